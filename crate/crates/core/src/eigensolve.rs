//! Right and left eigenpairs of `A v = λ B v` and their weighted
//! biorthonormalization `l_j† B r_k = δ_jk`.

use serde::{Deserialize, Serialize};

use crate::assembly::OperatorPencil;
use crate::c64;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// How the free scale of each eigenpair is fixed. The left vector always
/// absorbs whatever makes `l† B r = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `‖r‖₂ = 1`, first significant component of `r` real positive.
    UnitRight,
    /// Largest-modulus component of `r` equal to one.
    MaxComponent,
    /// `|r† G B r| = 1` with `G` the pencil's reference form; the sign of
    /// `r† G B r` is kept in [`Spectrum::signs`]. Pairs whose indefinite norm
    /// vanishes (relative to `‖r‖ ‖G B r‖`, below `defect_tol`; this is the
    /// case for complex-conjugate eigencharges) fall back to `UnitRight` with
    /// sign `+1`.
    Krein,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual bound for eigenpairs.
    pub tol_eig: f64,
    /// Relative to `max|λ|`.
    pub degeneracy_tol: f64,
    /// Lower bound on `|l† B r| / (‖l‖ ‖B r‖)`.
    pub defect_tol: f64,
    pub reality_tol: f64,
    pub normalization: Normalization,
    /// Inverse-iteration polishing for tridiagonal `A`.
    pub polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_eig: 1e-10,
            degeneracy_tol: 1e-8,
            defect_tol: 1e-8,
            reality_tol: 1e-8,
            normalization: Normalization::Krein,
            polish: true,
        }
    }
}

/// Eigencharges sorted by `(Re λ, Im λ)` with matching right (`|λ⟩`) and
/// left (`|λ⟩⟩`) eigenvectors stored as columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigencharges: Vec<c64>,
    pub right: CMat,
    pub left: CMat,
    /// `|conj(μ) − λ|` between each eigencharge and its matched adjoint eigenvalue.
    pub pairing_residuals: Vec<f64>,
    pub degenerate_flags: Vec<bool>,
    /// `‖A r − λ B r‖ / ((‖A‖ + |λ| ‖B‖) ‖r‖)`, infinity norms for the matrices.
    pub residuals: Vec<f64>,
    /// Same for `A† l − conj(λ) B† l`.
    pub left_residuals: Vec<f64>,
    /// Per-pair sign of the indefinite norm; all `+1` unless normalized with
    /// [`Normalization::Krein`].
    pub signs: Vec<f64>,
    pub normalization: Option<Normalization>,
}

impl Spectrum {
    /// Spectrum from explicit vectors; residual diagnostics are left empty.
    pub fn from_parts(eigencharges: Vec<c64>, right: CMat, left: CMat) -> Result<Self> {
        let n = eigencharges.len();
        if right.nrows() != left.nrows() || right.ncols() != n || left.ncols() != n {
            return Err(Error::InputMismatch(format!(
                "{} eigencharges, right {}x{}, left {}x{}",
                n,
                right.nrows(),
                right.ncols(),
                left.nrows(),
                left.ncols()
            )));
        }
        Ok(Self {
            eigencharges,
            right,
            left,
            pairing_residuals: vec![0.0; n],
            degenerate_flags: vec![false; n],
            residuals: Vec::new(),
            left_residuals: Vec::new(),
            signs: vec![1.0; n],
            normalization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.eigencharges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigencharges.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.right.nrows()
    }

    pub fn max_abs_eigencharge(&self) -> f64 {
        self.eigencharges.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn any_degenerate(&self) -> bool {
        self.degenerate_flags.iter().any(|&f| f)
    }

    pub fn right_col(&self, k: usize) -> &[c64] {
        self.right.col_as_slice(k)
    }

    pub fn left_col(&self, k: usize) -> &[c64] {
        self.left.col_as_slice(k)
    }

    /// `L† B R`.
    pub fn biorthogonality_matrix(&self, weight: &[c64]) -> CMat {
        self.left.adjoint() * linalg::scale_rows(weight, &self.right)
    }
}

fn inf_norm(m: &CMat) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn weight_norm(weight: &[c64]) -> f64 {
    weight.iter().map(|w| w.norm()).fold(0.0, f64::max)
}

/// Relative residual of `A x − μ B' x` for tridiagonal `A` given by its bands.
fn banded_residual(
    bands: (&[c64], &[c64], &[c64]),
    weight: &[c64],
    mu: c64,
    x: &[c64],
    a_norm: f64,
    w_norm: f64,
) -> f64 {
    let (lower, main, upper) = bands;
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut s = (main[i] - mu * weight[i]) * x[i];
        if i > 0 {
            s += lower[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            s += upper[i] * x[i + 1];
        }
        acc += s.norm_sqr();
    }
    let xn = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let scale = (a_norm + mu.norm() * w_norm) * xn;
    if scale == 0.0 {
        acc.sqrt()
    } else {
        acc.sqrt() / scale
    }
}

/// Residuals for all columns at once.
fn residuals_for(a: &CMat, weight: &[c64], mus: &[c64], v: &CMat) -> Vec<f64> {
    let a_norm = inf_norm(a);
    let w_norm = weight_norm(weight);
    let av = a * v;
    (0..v.ncols())
        .map(|k| {
            let x = v.col_as_slice(k);
            let r: f64 = (0..v.nrows())
                .map(|i| (av[(i, k)] - mus[k] * weight[i] * x[i]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let xn = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let scale = (a_norm + mus[k].norm() * w_norm) * xn;
            if scale == 0.0 {
                r
            } else {
                r / scale
            }
        })
        .collect()
}

/// Full eigendecomposition of the pencil.
///
/// Hermitian-definite pencils are reduced to `B^{-1/2} A B^{-1/2}` and need
/// no separate adjoint solve. Otherwise the right vectors come from
/// `C = B⁻¹A` and the left vectors from an independent decomposition of
/// `C† = A† B^{-†}`, with `l = B^{-†} y`.
pub fn solve_pencil(pencil: &OperatorPencil, opts: &SolverOptions) -> Result<Spectrum> {
    let n = pencil.dim();
    let a = pencil.a_matrix();
    let weight = pencil.weight();

    let hermitian = pencil.is_hermitian_definite();
    let (eigencharges, mut right, mut left, pairing_residuals, mut degenerate_flags) =
        if hermitian {
            let root_inv: Vec<c64> = weight.iter().map(|w| c64::new(w.re.sqrt().recip(), 0.0)).collect();
            let k = linalg::scale_cols(&linalg::scale_rows(&root_inv, a), &root_inv);
            let k = linalg::hermitian_part(&k);
            let (values, u) = linalg::hermitian_eigen(&k)?;
            let right = linalg::scale_rows(&root_inv, &u);
            let left = right.clone();
            let lambdas = values.iter().map(|&v| c64::new(v, 0.0)).collect();
            (lambdas, right, left, vec![0.0; n], vec![false; n])
        } else {
            solve_general(pencil, opts)?
        };

    if opts.polish && linalg::is_tridiagonal(a) {
        polish(pencil, &eigencharges, &mut right, &mut left, !hermitian);
        if hermitian {
            left = right.clone();
        }
    }

    // Sort by (Re, Im).
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (x, y) = (eigencharges[i], eigencharges[j]);
        x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im))
    });
    let permute = |m: &CMat| CMat::from_fn(n, n, |i, k| m[(i, order[k])]);
    right = permute(&right);
    left = permute(&left);
    let eigencharges: Vec<c64> = order.iter().map(|&k| eigencharges[k]).collect();
    let pairing_residuals = order.iter().map(|&k| pairing_residuals[k]).collect();
    degenerate_flags = order.iter().map(|&k| degenerate_flags[k]).collect();

    let residuals = residuals_for(a, weight, &eigencharges, &right);
    let adj = a.adjoint().to_owned();
    let wconj: Vec<c64> = weight.iter().map(|w| w.conj()).collect();
    let conj_charges: Vec<c64> = eigencharges.iter().map(|z| z.conj()).collect();
    let left_residuals = residuals_for(&adj, &wconj, &conj_charges, &left);

    Ok(Spectrum {
        eigencharges,
        right,
        left,
        pairing_residuals,
        degenerate_flags,
        residuals,
        left_residuals,
        signs: vec![1.0; n],
        normalization: None,
    })
}

type Decomposition = (Vec<c64>, CMat, CMat, Vec<f64>, Vec<bool>);

fn solve_general(pencil: &OperatorPencil, opts: &SolverOptions) -> Result<Decomposition> {
    let n = pencil.dim();
    let a = pencil.a_matrix();
    let weight = pencil.weight();
    let winv: Vec<c64> = weight.iter().map(|w| w.inv()).collect();

    let c = linalg::scale_rows(&winv, a);
    let evd = c
        .eigen()
        .map_err(|e| Error::EigensolverFailure(format!("right eigenproblem: {e:?}")))?;
    let lambdas: Vec<c64> = (0..n).map(|i| evd.S().column_vector()[i]).collect();
    let right = evd.U().to_owned();

    let c_adj = c.adjoint().to_owned();
    let evd_adj = c_adj
        .eigen()
        .map_err(|e| Error::EigensolverFailure(format!("left eigenproblem: {e:?}")))?;
    let mus: Vec<c64> = (0..n).map(|i| evd_adj.S().column_vector()[i]).collect();
    let y = evd_adj.U();

    let max_abs = lambdas.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let match_tol = opts.degeneracy_tol * max_abs.max(f64::MIN_POSITIVE);
    let (assignment, pairing_residuals, flags) = match_conjugates(&lambdas, &mus, match_tol);

    let winv_conj: Vec<c64> = winv.iter().map(|w| w.conj()).collect();
    let left = CMat::from_fn(n, n, |i, k| winv_conj[i] * y[(i, assignment[k])]);
    Ok((lambdas, right, left, pairing_residuals, flags))
}

/// Greedy nearest matching of each `λ_i` to an unused `conj(μ_j)`, visiting
/// the `λ_i` with the most clear-cut nearest candidate first. A `λ_i` with
/// two or more candidates inside `tol` is flagged, as is any `λ_i` whose
/// nearest candidate was already taken.
fn match_conjugates(lambdas: &[c64], mus: &[c64], tol: f64) -> (Vec<usize>, Vec<f64>, Vec<bool>) {
    let n = lambdas.len();
    let dist = |i: usize, j: usize| (mus[j].conj() - lambdas[i]).norm();

    let mut flags = vec![false; n];
    let mut nearest = vec![(f64::INFINITY, 0usize); n];
    for i in 0..n {
        let mut close = 0;
        for j in 0..n {
            let d = dist(i, j);
            if d <= tol {
                close += 1;
            }
            if d < nearest[i].0 {
                nearest[i] = (d, j);
            }
        }
        flags[i] = close > 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| nearest[i].0.total_cmp(&nearest[j].0));
    let mut taken = vec![false; n];
    let mut assignment = vec![0; n];
    let mut residual = vec![0.0; n];
    for i in order {
        let (d, j) = nearest[i];
        let (d, j) = if !taken[j] {
            (d, j)
        } else {
            flags[i] = true;
            (0..n)
                .filter(|&j| !taken[j])
                .map(|j| (dist(i, j), j))
                .min_by(|x, y| x.0.total_cmp(&y.0))
                .expect("one free candidate per remaining eigencharge")
        };
        taken[j] = true;
        assignment[i] = j;
        residual[i] = d;
    }
    (assignment, residual, flags)
}

/// One step of inverse iteration per vector, kept only where it lowers the residual.
fn polish(pencil: &OperatorPencil, lambdas: &[c64], right: &mut CMat, left: &mut CMat, with_left: bool) {
    let a = pencil.a_matrix();
    let weight = pencil.weight();
    let a_norm = inf_norm(a);
    let w_norm = weight_norm(weight);
    let (lower, main, upper) = linalg::tridiagonal_bands(a);
    // Bands of A†.
    let adj_lower: Vec<c64> = upper.iter().map(|z| z.conj()).collect();
    let adj_upper: Vec<c64> = lower.iter().map(|z| z.conj()).collect();
    let adj_main: Vec<c64> = main.iter().map(|z| z.conj()).collect();
    let wconj: Vec<c64> = weight.iter().map(|w| w.conj()).collect();

    let step = |lo: &[c64], md: &[c64], up: &[c64], w: &[c64], mu: c64, x: &[c64]| -> Option<Vec<c64>> {
        let shifted: Vec<c64> = md.iter().zip(w).map(|(d, w)| d - mu * w).collect();
        let rhs: Vec<c64> = x.iter().zip(w).map(|(x, w)| x * w).collect();
        let y = linalg::solve_tridiagonal(lo, &shifted, up, &rhs)?;
        let scale = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !scale.is_finite() || scale == 0.0 {
            return None;
        }
        Some(y.iter().map(|z| z / scale).collect())
    };

    for (k, &mu) in lambdas.iter().enumerate() {
        let x = right.col_as_slice(k).to_vec();
        if let Some(y) = step(&lower, &main, &upper, weight, mu, &x) {
            let bands = (&lower[..], &main[..], &upper[..]);
            let before = banded_residual(bands, weight, mu, &x, a_norm, w_norm);
            let after = banded_residual(bands, weight, mu, &y, a_norm, w_norm);
            if after < before {
                right.col_as_slice_mut(k).copy_from_slice(&y);
            }
        }
        if !with_left {
            continue;
        }
        let x = left.col_as_slice(k).to_vec();
        if let Some(y) = step(&adj_lower, &adj_main, &adj_upper, &wconj, mu.conj(), &x) {
            let bands = (&adj_lower[..], &adj_main[..], &adj_upper[..]);
            let before = banded_residual(bands, &wconj, mu.conj(), &x, a_norm, w_norm);
            let after = banded_residual(bands, &wconj, mu.conj(), &y, a_norm, w_norm);
            if after < before {
                left.col_as_slice_mut(k).copy_from_slice(&y);
            }
        }
    }
}

/// Index of the first component with modulus at least `1e-6` of the largest.
fn first_significant(x: &[c64]) -> usize {
    let max = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    x.iter().position(|z| z.norm() >= 1e-6 * max).unwrap_or(0)
}

fn max_component(x: &[c64]) -> usize {
    let mut best = 0;
    for (i, z) in x.iter().enumerate() {
        if z.norm() > x[best].norm() {
            best = i;
        }
    }
    best
}

/// Smallest gap `|λ_j − λ_k|`, `j ≠ k`, with the indices attaining it.
fn min_gap(lambdas: &[c64]) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for j in 0..lambdas.len() {
        for k in j + 1..lambdas.len() {
            let g = (lambdas[j] - lambdas[k]).norm();
            if best.is_none_or(|b| g < b.2) {
                best = Some((j, k, g));
            }
        }
    }
    best
}

/// Rescales every pair so that `L† B R = I`, fixing the remaining freedom as
/// `opts.normalization` prescribes.
pub fn biorthonormalize(
    spectrum: &Spectrum,
    pencil: &OperatorPencil,
    opts: &SolverOptions,
) -> Result<Spectrum> {
    let n = spectrum.len();
    if spectrum.dim() != pencil.dim() {
        return Err(Error::InputMismatch(format!(
            "spectrum dimension {} vs pencil dimension {}",
            spectrum.dim(),
            pencil.dim()
        )));
    }
    let weight = pencil.weight();

    if let Some((first, second, gap)) = min_gap(&spectrum.eigencharges) {
        if gap < opts.degeneracy_tol * spectrum.max_abs_eigencharge() {
            return Err(Error::DegenerateSpectrum { first, second, gap });
        }
    }

    let mut right = spectrum.right.clone();
    let mut left = spectrum.left.clone();
    let mut signs = vec![1.0; n];

    // Indefinite norms `r† G B r` with the cosine `|r† G B r| / (‖r‖ ‖G B r‖)`
    // that decides whether a pair is null.
    let krein: Vec<(c64, f64)> = match opts.normalization {
        Normalization::Krein => (0..n)
            .map(|k| {
                let r = right.col_as_slice(k);
                let br: Vec<c64> = r.iter().zip(weight).map(|(x, w)| x * w).collect();
                let gbr = pencil.reference().apply(&br);
                let nu = linalg::dot(r, &gbr);
                let denom = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
                    * gbr.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                (nu, if denom > 0.0 { nu.norm() / denom } else { 0.0 })
            })
            .collect(),
        _ => Vec::new(),
    };

    for k in 0..n {
        let r = right.col_as_slice(k);
        let l = left.col_as_slice(k);
        let br: Vec<c64> = r.iter().zip(weight).map(|(x, w)| x * w).collect();
        let overlap = linalg::dot(l, &br);
        let cosine = overlap.norm()
            / (l.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
                * br.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
        if !(cosine >= opts.defect_tol) {
            return Err(Error::NearDefectivePair {
                index: k,
                overlap: cosine,
            });
        }

        let r_norm = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let unit_right = {
            let p = r[first_significant(r)];
            (p.norm() / p) / r_norm
        };
        let scale_r = match opts.normalization {
            Normalization::UnitRight => unit_right,
            Normalization::MaxComponent => r[max_component(r)].inv(),
            Normalization::Krein => {
                let (nu, cosine) = krein[k];
                if cosine >= opts.defect_tol {
                    signs[k] = if nu.re >= 0.0 { 1.0 } else { -1.0 };
                    // Phase as for UnitRight, magnitude from the indefinite norm.
                    let p = r[first_significant(r)];
                    (p.norm() / p) / nu.norm().sqrt()
                } else {
                    unit_right
                }
            }
        };
        // l† B r scales by conj(1/conj(overlap·s)) · s = 1 / overlap.
        let scale_l = (overlap * scale_r).inv().conj();
        for z in right.col_as_slice_mut(k) {
            *z *= scale_r;
        }
        for z in left.col_as_slice_mut(k) {
            *z *= scale_l;
        }
    }

    Ok(Spectrum {
        right,
        left,
        signs,
        normalization: Some(opts.normalization),
        ..spectrum.clone()
    })
}

/// Real-versus-complex census of the eigencharges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealityReport {
    pub n_real: usize,
    pub n_complex_pairs: usize,
    pub n_unpaired: usize,
    pub broken: bool,
}

/// `λ` counts as real when `|Im λ| ≤ tol·(1 + |λ|)`. Non-real values are
/// paired with their nearest unpaired conjugate within the same tolerance.
pub fn classify_reality(eigencharges: &[c64], reality_tol: f64) -> RealityReport {
    let is_real = |z: &c64| z.im.abs() <= reality_tol * (1.0 + z.norm());
    let n_real = eigencharges.iter().filter(|z| is_real(z)).count();
    let complex: Vec<c64> = eigencharges.iter().copied().filter(|z| !is_real(z)).collect();

    let mut used = vec![false; complex.len()];
    let mut pairs = 0;
    for i in 0..complex.len() {
        if used[i] {
            continue;
        }
        let target = complex[i].conj();
        let tol = reality_tol * (1.0 + complex[i].norm());
        let best = (0..complex.len())
            .filter(|&j| j != i && !used[j])
            .map(|j| ((complex[j] - target).norm(), j))
            .min_by(|x, y| x.0.total_cmp(&y.0));
        if let Some((d, j)) = best {
            if d <= tol {
                used[i] = true;
                used[j] = true;
                pairs += 1;
            }
        }
    }
    let n_unpaired = complex.len() - 2 * pairs;
    RealityReport {
        n_real,
        n_complex_pairs: pairs,
        n_unpaired,
        broken: n_unpaired > 0,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SpectrumRow {
    index: usize,
    re: f64,
    im: f64,
    residual: f64,
    degenerate: bool,
}

/// CSV with columns `index, re, im, residual, degenerate`.
pub fn write_spectrum_csv<W: std::io::Write>(out: W, spectrum: &Spectrum) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (k, z) in spectrum.eigencharges.iter().enumerate() {
        w.serialize(SpectrumRow {
            index: k,
            re: z.re,
            im: z.im,
            residual: spectrum.residuals.get(k).copied().unwrap_or(f64::NAN),
            degenerate: spectrum.degenerate_flags[k],
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back `(eigencharge, residual, degenerate)` rows in file order.
pub fn read_spectrum_csv<R: std::io::Read>(input: R) -> Result<Vec<(c64, f64, bool)>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for (expected, row) in r.deserialize::<SpectrumRow>().enumerate() {
        let row = row?;
        if row.index != expected {
            return Err(Error::Parse(format!(
                "spectrum row {expected} carries index {}",
                row.index
            )));
        }
        rows.push((c64::new(row.re, row.im), row.residual, row.degenerate));
    }
    Ok(rows)
}

/// Eigenvalues of a Hermitian tridiagonal matrix below `x` (Sturm count).
fn sturm_count(main: &[f64], off_sq: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..main.len() {
        let coupling = if i == 0 { 0.0 } else { off_sq[i - 1] / q };
        q = main[i] - x - coupling;
        if q == 0.0 {
            q = f64::EPSILON * (main[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k` eigencharges of smallest modulus for a Hermitian-definite
/// pencil with tridiagonal `A`, by bisection on the Sturm sequence of
/// `B^{-1/2} A B^{-1/2}`. Returns `None` if the pencil lacks that structure.
pub fn smallest_hermitian_eigencharges(pencil: &OperatorPencil, k: usize) -> Option<Vec<f64>> {
    let a = pencil.a_matrix();
    if !pencil.is_hermitian_definite() || !linalg::is_tridiagonal(a) {
        return None;
    }
    let n = pencil.dim();
    let k = k.min(n);
    let root_inv: Vec<f64> = pencil.weight().iter().map(|w| w.re.sqrt().recip()).collect();
    let main: Vec<f64> = (0..n).map(|i| a[(i, i)].re * root_inv[i] * root_inv[i]).collect();
    let off_sq: Vec<f64> = (0..n.saturating_sub(1))
        .map(|i| (a[(i + 1, i)] * root_inv[i] * root_inv[i + 1]).norm_sqr())
        .collect();

    // Gershgorin bounds.
    let off: Vec<f64> = off_sq.iter().map(|x| x.sqrt()).collect();
    let radius = |i: usize| {
        (if i > 0 { off[i - 1] } else { 0.0 }) + (if i + 1 < n { off[i] } else { 0.0 })
    };
    let lo = (0..n).map(|i| main[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let hi = (0..n).map(|i| main[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);

    // The m-th smallest eigenvalue (0-based).
    let nth = |m: usize| {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if sturm_count(&main, &off_sq, mid) > m {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };

    let negatives = sturm_count(&main, &off_sq, 0.0);
    let mut candidates: Vec<f64> = Vec::new();
    for m in negatives.saturating_sub(k)..negatives {
        candidates.push(nth(m));
    }
    for m in negatives..(negatives + k).min(n) {
        candidates.push(nth(m));
    }
    candidates.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    candidates.truncate(k);
    Some(candidates)
}

/// The `k` eigencharges of smallest modulus, sorted by modulus. Uses
/// bisection when the pencil allows it and a dense solve otherwise.
pub fn smallest_eigencharges(pencil: &OperatorPencil, k: usize) -> Result<Vec<c64>> {
    if let Some(values) = smallest_hermitian_eigencharges(pencil, k) {
        return Ok(values.into_iter().map(|v| c64::new(v, 0.0)).collect());
    }
    let winv: Vec<c64> = pencil.weight().iter().map(|w| w.inv()).collect();
    let c = linalg::scale_rows(&winv, pencil.a_matrix());
    let mut values = c
        .eigenvalues()
        .map_err(|e| Error::EigensolverFailure(format!("{e:?}")))?;
    values.sort_by(|x, y| {
        x.norm()
            .total_cmp(&y.norm())
            .then(x.re.total_cmp(&y.re))
            .then(x.im.total_cmp(&y.im))
    });
    values.truncate(k);
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn real_mat(rows: &[&[f64]]) -> CMat {
        CMat::from_fn(rows.len(), rows[0].len(), |i, j| c(rows[i][j], 0.0))
    }

    fn opts(normalization: Normalization) -> SolverOptions {
        SolverOptions {
            normalization,
            ..SolverOptions::default()
        }
    }

    fn assert_parallel(x: &[c64], y: &[f64]) {
        // x = α·y for some complex α.
        let alpha: c64 = x.iter().zip(y).map(|(a, b)| a * b).sum::<c64>()
            / y.iter().map(|b| b * b).sum::<f64>();
        for (a, b) in x.iter().zip(y) {
            assert!((a - alpha * b).norm() < 1e-12, "{x:?} vs {y:?}");
        }
    }

    #[test]
    fn diagonal_pencil() {
        let p = OperatorPencil::new(real_mat(&[&[2.0, 0.0], &[0.0, 6.0]]), vec![c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        let s = solve_pencil(&p, &SolverOptions::default()).unwrap();
        assert!((s.eigencharges[0] - c(2.0, 0.0)).norm() < 1e-14);
        assert!((s.eigencharges[1] - c(3.0, 0.0)).norm() < 1e-14);
        assert_parallel(s.right_col(0), &[1.0, 0.0]);
        assert_parallel(s.right_col(1), &[0.0, 1.0]);
    }

    #[test]
    fn diagonal_pencil_biorthonormalization_rescales_left() {
        let p = OperatorPencil::new(real_mat(&[&[2.0, 0.0], &[0.0, 6.0]]), vec![c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        let s = Spectrum::from_parts(
            vec![c(2.0, 0.0), c(3.0, 0.0)],
            linalg::identity(2),
            linalg::identity(2),
        )
        .unwrap();
        let raw = s.biorthogonality_matrix(p.weight());
        assert_eq!((raw[(0, 0)], raw[(1, 1)]), (c(1.0, 0.0), c(2.0, 0.0)));
        let b = biorthonormalize(&s, &p, &opts(Normalization::UnitRight)).unwrap();
        assert_eq!(b.right, linalg::identity(2));
        assert_eq!(b.left_col(0), &[c(1.0, 0.0), c64::ZERO]);
        assert_eq!(b.left_col(1), &[c64::ZERO, c(0.5, 0.0)]);
    }

    #[test]
    fn upper_triangular_example() {
        let p = OperatorPencil::new(real_mat(&[&[1.0, 1.0], &[0.0, 2.0]]), vec![c64::ONE; 2]).unwrap();
        let s = solve_pencil(&p, &SolverOptions::default()).unwrap();
        assert!((s.eigencharges[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((s.eigencharges[1] - c(2.0, 0.0)).norm() < 1e-14);
        assert_parallel(s.right_col(0), &[1.0, 0.0]);
        assert_parallel(s.right_col(1), &[1.0, 1.0]);
        assert_parallel(s.left_col(0), &[1.0, -1.0]);
        assert_parallel(s.left_col(1), &[0.0, 1.0]);

        let b = biorthonormalize(&s, &p, &opts(Normalization::UnitRight)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expect_r = [[1.0, 0.0], [h, h]];
        let expect_l = [[1.0, -1.0], [0.0, 1.0 / h]];
        for k in 0..2 {
            for i in 0..2 {
                assert!((b.right[(i, k)] - c(expect_r[k][i], 0.0)).norm() < 1e-14);
                assert!((b.left[(i, k)] - c(expect_l[k][i], 0.0)).norm() < 1e-14);
            }
        }
        let g = b.biorthogonality_matrix(p.weight());
        assert!(linalg::max_abs_diff(&g, &linalg::identity(2)) < 1e-14);
    }

    #[test]
    fn hermitian_pencil_has_equal_left_and_right() {
        let a = CMat::from_fn(4, 4, |i, j| match i.abs_diff(j) {
            0 => c(2.0 + i as f64, 0.0),
            1 => {
                if i < j {
                    c(0.5, 0.25)
                } else {
                    c(0.5, -0.25)
                }
            }
            _ => c64::ZERO,
        });
        let p = OperatorPencil::new(a, vec![c64::ONE; 4]).unwrap();
        let s = solve_pencil(&p, &SolverOptions::default()).unwrap();
        assert!(s.eigencharges.iter().all(|z| z.im == 0.0));
        let b = biorthonormalize(&s, &p, &opts(Normalization::UnitRight)).unwrap();
        let lr = linalg::max_abs_diff(&b.left, &b.right);
        assert!(lr < 1e-13, "{lr}");
        let again = biorthonormalize(&b, &p, &opts(Normalization::UnitRight)).unwrap();
        assert!(linalg::max_abs_diff(&again.right, &b.right) < 1e-15);
    }

    #[test]
    fn degenerate_and_defective_inputs_are_rejected() {
        let p = OperatorPencil::new(linalg::identity(2), vec![c64::ONE; 2]).unwrap();
        let s = solve_pencil(&p, &SolverOptions::default()).unwrap();
        assert!(matches!(
            biorthonormalize(&s, &p, &SolverOptions::default()),
            Err(Error::DegenerateSpectrum { .. })
        ));

        // A left vector orthogonal to its right partner.
        let s = Spectrum::from_parts(
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            linalg::identity(2),
            real_mat(&[&[0.0, 0.0], &[1.0, 1.0]]),
        )
        .unwrap();
        assert!(matches!(
            biorthonormalize(&s, &p, &SolverOptions::default()),
            Err(Error::NearDefectivePair { index: 0, .. })
        ));
    }

    #[test]
    fn conjugate_matching_flags_collisions() {
        let lambdas = [c(1.0, 0.0), c(1.0, 1e-12), c(3.0, 0.0)];
        let mus = [c(3.0, 0.0), c(1.0, 0.0), c(1.0, -1e-12)];
        let (assignment, residual, flags) = match_conjugates(&lambdas, &mus, 1e-9);
        assert_eq!(assignment[2], 0);
        assert!(residual.iter().all(|&d| d <= 1e-12));
        assert_eq!(flags, vec![true, true, false]);
        let (_, _, flags) = match_conjugates(&lambdas, &mus, 1e-14);
        assert_eq!(flags, vec![false, false, false]);
    }

    #[test]
    fn reality_examples() {
        let r = classify_reality(&[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)], 1e-8);
        assert_eq!((r.n_real, r.broken), (3, false));
        let r = classify_reality(&[c(1.0, 0.0), c(2.0, 1.0), c(2.0, -1.0)], 1e-8);
        assert_eq!((r.n_real, r.n_complex_pairs, r.broken), (1, 1, false));
        let r = classify_reality(&[c(1.0, 0.0), c(2.0, 1.0)], 1e-8);
        assert!(r.broken);
        assert_eq!(r.n_unpaired, 1);
    }

    #[test]
    fn sturm_bisection_matches_dense_solve() {
        let n = 30;
        let a = CMat::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => c(2.0 - 0.1 * i as f64, 0.0),
            1 => c(-1.0, 0.0),
            _ => c64::ZERO,
        });
        let w: Vec<c64> = (0..n).map(|i| c(1.0 + 0.05 * i as f64, 0.0)).collect();
        let p = OperatorPencil::new(a, w).unwrap();
        let dense = solve_pencil(&p, &SolverOptions::default()).unwrap();
        let mut by_modulus: Vec<f64> = dense.eigencharges.iter().map(|z| z.re).collect();
        by_modulus.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
        let bisected = smallest_hermitian_eigencharges(&p, 5).unwrap();
        for (x, y) in bisected.iter().zip(&by_modulus) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn spectrum_csv_round_trip() {
        let p = OperatorPencil::new(real_mat(&[&[1.0, 1.0], &[0.0, 2.0]]), vec![c64::ONE; 2]).unwrap();
        let s = solve_pencil(&p, &SolverOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_spectrum_csv(&mut buf, &s).unwrap();
        let rows = read_spectrum_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 2);
        for (k, (z, res, deg)) in rows.iter().enumerate() {
            assert_eq!(*z, s.eigencharges[k]);
            assert_eq!(*res, s.residuals[k]);
            assert!(!deg);
        }
    }
}
