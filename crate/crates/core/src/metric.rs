//! Metric operators `Θ` built from the left eigenvectors, the Hermitian
//! square root `Ω = Θ^{1/2}`, and the Hermitized images `h = Ω H Ω⁻¹`,
//! `w = Ω W Ω⁻¹`.
//!
//! With signs `σ_k` from the indefinite normalization the single series is
//! `Θ = Σ_k σ_k |λ_k⟩⟩⟨⟨λ_k| W`; all signs are `+1` whenever `ΘW` is
//! positive definite.

use serde::{Deserialize, Serialize};

use crate::assembly::OperatorPencil;
use crate::c64;
use crate::eigensolve::Spectrum;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    /// Relative asymmetry `‖Θ − Θ†‖_max / ‖Θ‖_max` tolerated by
    /// [`metric_single_series`].
    pub tol_herm: f64,
    /// `Θ` counts as positive definite when `min eig > pd_floor · max eig`.
    pub pd_floor: f64,
    /// Left-vector matrices with `σ_min/σ_max` below this are rank deficient.
    pub rank_tol: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            tol_herm: 1e-8,
            pd_floor: 1e-10,
            rank_tol: 1e-14,
        }
    }
}

/// A Hermitian-symmetrized metric and the asymmetry removed from it.
#[derive(Debug, Clone)]
pub struct SeriesMetric {
    pub theta: CMat,
    /// `‖Θ_raw − Θ_raw†‖_max / ‖Θ_raw‖_max` before symmetrization.
    pub asymmetry: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Positivity {
    pub theta_min_eig: f64,
    pub theta_max_eig: f64,
    /// Extreme eigenvalues of the Hermitian part of `ΘW`.
    pub theta_w_min_eig: f64,
    pub theta_w_max_eig: f64,
}

impl Positivity {
    pub fn theta_is_positive(&self, pd_floor: f64) -> bool {
        self.theta_min_eig > pd_floor * self.theta_max_eig.abs()
    }
}

#[derive(Debug, Clone)]
pub struct MMatrix {
    /// `M_jk = σ_j ⟨⟨λ_j|λ_k⟩`.
    pub m: CMat,
}

/// `M` from the other representations, kept as consistency checks.
#[derive(Debug, Clone)]
pub struct MRepresentations {
    /// `σ_j {{λ_j|W⁻¹|λ_k⟩`.
    pub via_weight_inverse_left: CMat,
    /// `σ_j ⟨⟨λ_j|W⁻¹|λ_k}`.
    pub via_weight_inverse_right: CMat,
    /// `⟨λ_j|Θ|λ_k⟩` for a given `Θ`.
    pub via_theta: CMat,
}

#[derive(Debug, Clone)]
pub struct MetricBundle {
    pub theta: CMat,
    /// Double-series metric from the same spectrum, for route comparison.
    pub theta_double: CMat,
    pub single_series_asymmetry: f64,
    pub positivity: Positivity,
    /// `None` when `Θ` is not positive definite.
    pub omega: Option<CMat>,
    pub omega_inv: Option<CMat>,
    pub h_herm: Option<CMat>,
    pub w_herm: Option<CMat>,
}

/// `lhs · rhs`; both metric routes go through here so that identical inputs
/// give bit-identical outputs.
fn product(lhs: &CMat, rhs: &CMat) -> CMat {
    lhs * rhs
}

/// Rank test on the column-normalized matrix, so that the per-pair scale
/// fixed by biorthonormalization does not count as rank loss.
fn check_rank(left: &CMat, opts: &MetricOptions) -> Result<()> {
    let inv_norms: Vec<c64> = (0..left.ncols())
        .map(|k| {
            let nk = linalg::col_norm(left, k);
            c64::new(if nk > 0.0 { nk.recip() } else { 0.0 }, 0.0)
        })
        .collect();
    let s = linalg::singular_values(&linalg::scale_cols(left, &inv_norms))?;
    let hi = s.first().copied().unwrap_or(0.0);
    let lo = s.last().copied().unwrap_or(0.0);
    let ratio = if hi == 0.0 { 0.0 } else { lo / hi };
    if ratio < opts.rank_tol {
        return Err(Error::RankDeficient { ratio });
    }
    Ok(())
}

fn relative_asymmetry(m: &CMat) -> f64 {
    let scale = linalg::max_abs(m);
    if scale == 0.0 {
        0.0
    } else {
        linalg::hermitian_defect(m) / scale
    }
}

fn signed_left(spectrum: &Spectrum) -> CMat {
    let signs: Vec<c64> = spectrum.signs.iter().map(|&s| c64::new(s, 0.0)).collect();
    linalg::scale_cols(&spectrum.left, &signs)
}

/// `Θ = Σ_k |λ_k⟩⟩⟨⟨λ_k|` for `l_j† r_k = δ_jk`, symmetrized.
pub fn metric_w_identity(spectrum: &Spectrum, opts: &MetricOptions) -> Result<CMat> {
    check_rank(&spectrum.left, opts)?;
    let raw = product(&spectrum.left, &linalg::adjoint(&spectrum.left));
    Ok(linalg::hermitian_part(&raw))
}

/// Unsymmetrized `Σ_k σ_k l_k (l_k† B)`.
pub fn single_series_raw(spectrum: &Spectrum, pencil: &OperatorPencil) -> Result<CMat> {
    check_dims(spectrum, pencil)?;
    let lb = linalg::scale_cols(&linalg::adjoint(&spectrum.left), pencil.weight());
    Ok(product(&signed_left(spectrum), &lb))
}

/// Single-series metric with its asymmetry recorded; does not enforce a bound.
pub fn single_series(
    spectrum: &Spectrum,
    pencil: &OperatorPencil,
    opts: &MetricOptions,
) -> Result<SeriesMetric> {
    check_rank(&spectrum.left, opts)?;
    let raw = single_series_raw(spectrum, pencil)?;
    Ok(SeriesMetric {
        asymmetry: relative_asymmetry(&raw),
        theta: linalg::hermitian_part(&raw),
    })
}

/// As [`single_series`], failing with `AsymmetryExceeded` when the raw sum
/// is further than `tol_herm` from Hermitian.
pub fn metric_single_series(
    spectrum: &Spectrum,
    pencil: &OperatorPencil,
    opts: &MetricOptions,
) -> Result<SeriesMetric> {
    let s = single_series(spectrum, pencil, opts)?;
    if s.asymmetry > opts.tol_herm {
        return Err(Error::AsymmetryExceeded {
            asymmetry: s.asymmetry,
            tolerance: opts.tol_herm,
        });
    }
    Ok(s)
}

/// `Θ = Σ_jk (B† l_j) M_jk (l_k† B)`, symmetrized.
pub fn metric_double_series(
    spectrum: &Spectrum,
    pencil: &OperatorPencil,
    m: &MMatrix,
    opts: &MetricOptions,
) -> Result<SeriesMetric> {
    check_dims(spectrum, pencil)?;
    check_rank(&spectrum.left, opts)?;
    let n = spectrum.dim();
    if m.m.nrows() != spectrum.len() || m.m.ncols() != spectrum.len() {
        return Err(Error::InputMismatch(format!(
            "M is {}x{}, spectrum has {} pairs",
            m.m.nrows(),
            m.m.ncols(),
            spectrum.len()
        )));
    }
    let wconj: Vec<c64> = pencil.weight().iter().map(|w| w.conj()).collect();
    let bl = linalg::scale_rows(&wconj, &spectrum.left);
    let lb = linalg::scale_cols(&linalg::adjoint(&spectrum.left), pencil.weight());
    let raw = product(&product(&bl, &m.m), &lb);
    debug_assert_eq!(raw.nrows(), n);
    Ok(SeriesMetric {
        asymmetry: relative_asymmetry(&raw),
        theta: linalg::hermitian_part(&raw),
    })
}

/// `M_jk = σ_j l_j† r_k`.
pub fn m_matrix(spectrum: &Spectrum, pencil: &OperatorPencil) -> Result<MMatrix> {
    check_dims(spectrum, pencil)?;
    let m = product(&linalg::adjoint(&signed_left(spectrum)), &spectrum.right);
    Ok(MMatrix { m })
}

pub fn m_representations(
    spectrum: &Spectrum,
    pencil: &OperatorPencil,
    theta: &CMat,
) -> Result<MRepresentations> {
    check_dims(spectrum, pencil)?;
    let w = pencil.weight();
    let winv: Vec<c64> = w.iter().map(|x| x.inv()).collect();
    let sl_adj = linalg::adjoint(&signed_left(spectrum));

    // {{λ| = l† W, then W⁻¹, then |λ'⟩.
    let left_form = linalg::scale_cols(&linalg::scale_cols(&sl_adj, w), &winv);
    let via_weight_inverse_left = product(&left_form, &spectrum.right);
    // ⟨⟨λ|, then W⁻¹ acting on |λ'} = W r.
    let wr = linalg::scale_rows(w, &spectrum.right);
    let via_weight_inverse_right = product(&linalg::scale_cols(&sl_adj, &winv), &wr);
    let via_theta = product(&linalg::adjoint(&spectrum.right), &product(theta, &spectrum.right));
    Ok(MRepresentations {
        via_weight_inverse_left,
        via_weight_inverse_right,
        via_theta,
    })
}

fn check_dims(spectrum: &Spectrum, pencil: &OperatorPencil) -> Result<()> {
    if spectrum.dim() != pencil.dim() || spectrum.len() != pencil.dim() {
        return Err(Error::InputMismatch(format!(
            "spectrum {}x{} vs pencil dimension {}",
            spectrum.dim(),
            spectrum.len(),
            pencil.dim()
        )));
    }
    Ok(())
}

/// Extreme eigenvalues of `Θ` and of the Hermitian part of `ΘW`.
pub fn positivity(theta: &CMat, weight: &[c64]) -> Result<Positivity> {
    let t = linalg::hermitian_eigenvalues(&linalg::hermitian_part(theta))?;
    let tw = linalg::hermitian_eigenvalues(&linalg::hermitian_part(&linalg::scale_cols(
        theta, weight,
    )))?;
    let ends = |v: &[f64]| (v.first().copied().unwrap_or(0.0), v.last().copied().unwrap_or(0.0));
    let (theta_min_eig, theta_max_eig) = ends(&t);
    let (theta_w_min_eig, theta_w_max_eig) = ends(&tw);
    Ok(Positivity {
        theta_min_eig,
        theta_max_eig,
        theta_w_min_eig,
        theta_w_max_eig,
    })
}

/// `Ω = Θ^{1/2}` (Hermitian positive root) and `Ω⁻¹`.
pub fn factorize_omega(theta: &CMat, opts: &MetricOptions) -> Result<(CMat, CMat)> {
    let scale = linalg::max_abs(theta).max(f64::MIN_POSITIVE);
    let defect = linalg::hermitian_defect(theta) / scale;
    if defect > opts.tol_herm {
        return Err(Error::NotHermitian { defect });
    }
    let (values, vectors) = linalg::hermitian_eigen(&linalg::hermitian_part(theta))?;
    let min = values.first().copied().unwrap_or(0.0);
    let max = values.last().copied().unwrap_or(0.0);
    if !(min > opts.pd_floor * max.abs()) {
        return Err(Error::NotPositiveDefinite { min_eig: min });
    }
    let omega = linalg::hermitian_function(&values, &vectors, f64::sqrt);
    let omega_inv = linalg::hermitian_function(&values, &vectors, |v| v.sqrt().recip());
    Ok((omega, omega_inv))
}

/// `(Ω A Ω⁻¹, Ω B Ω⁻¹)`. `A` here is the full left-hand operator, `κ²`
/// included; a real shift does not change Hermiticity and a complex one
/// would spoil it for any metric.
pub fn hermitize(pencil: &OperatorPencil, omega: &CMat, omega_inv: &CMat) -> (CMat, CMat) {
    let h = product(&product(omega, pencil.a_matrix()), omega_inv);
    let w = product(&linalg::scale_cols(omega, pencil.weight()), omega_inv);
    (h, w)
}

/// Single- and double-series metrics, positivity data and, when `Θ` is
/// positive definite, `Ω` with the Hermitized operators.
pub fn build_bundle(
    spectrum: &Spectrum,
    pencil: &OperatorPencil,
    opts: &MetricOptions,
) -> Result<MetricBundle> {
    let single = single_series(spectrum, pencil, opts)?;
    let m = m_matrix(spectrum, pencil)?;
    let double = metric_double_series(spectrum, pencil, &m, opts)?;
    bundle_from_theta(single.theta, double.theta, single.asymmetry, pencil, opts)
}

/// Bundle around an externally supplied `Θ`.
pub fn bundle_from_theta(
    theta: CMat,
    theta_double: CMat,
    single_series_asymmetry: f64,
    pencil: &OperatorPencil,
    opts: &MetricOptions,
) -> Result<MetricBundle> {
    let positivity = positivity(&theta, pencil.weight())?;
    let (omega, omega_inv, h_herm, w_herm) = match factorize_omega(&theta, opts) {
        Ok((omega, omega_inv)) => {
            let (h, w) = hermitize(pencil, &omega, &omega_inv);
            (Some(omega), Some(omega_inv), Some(h), Some(w))
        }
        Err(Error::NotPositiveDefinite { .. } | Error::NotHermitian { .. }) => (None, None, None, None),
        Err(e) => return Err(e),
    };
    Ok(MetricBundle {
        theta,
        theta_double,
        single_series_asymmetry,
        positivity,
        omega,
        omega_inv,
        h_herm,
        w_herm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::{biorthonormalize, solve_pencil, Normalization, SolverOptions};

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn real_mat(rows: &[&[f64]]) -> CMat {
        CMat::from_fn(rows.len(), rows[0].len(), |i, j| c(rows[i][j], 0.0))
    }

    fn normalized(p: &OperatorPencil, normalization: Normalization) -> Spectrum {
        let opts = SolverOptions {
            normalization,
            ..SolverOptions::default()
        };
        biorthonormalize(&solve_pencil(p, &opts).unwrap(), p, &opts).unwrap()
    }

    fn triangular() -> OperatorPencil {
        OperatorPencil::new(real_mat(&[&[1.0, 1.0], &[0.0, 2.0]]), vec![c64::ONE; 2]).unwrap()
    }

    /// Builds Θ entry by entry from the outer-product definition.
    fn brute_force_single(s: &Spectrum, w: &[c64]) -> CMat {
        let n = s.dim();
        CMat::from_fn(n, n, |i, j| {
            (0..s.len())
                .map(|k| s.signs[k] * s.left[(i, k)] * s.left[(j, k)].conj() * w[j])
                .sum()
        })
    }

    #[test]
    fn hand_example_metric() {
        let p = triangular();
        let s = normalized(&p, Normalization::MaxComponent);
        let theta = metric_w_identity(&s, &MetricOptions::default()).unwrap();
        let expected = real_mat(&[&[1.0, -1.0], &[-1.0, 2.0]]);
        assert!(linalg::max_abs_diff(&theta, &expected) < 1e-12);
        let a = p.a_matrix();
        let lhs = linalg::adjoint(a) * &theta;
        let rhs = &theta * a;
        let target = real_mat(&[&[1.0, -1.0], &[-1.0, 3.0]]);
        assert!(linalg::max_abs_diff(&lhs, &target) < 1e-12);
        assert!(linalg::max_abs_diff(&rhs, &target) < 1e-12);
    }

    #[test]
    fn hermitian_case_gives_identity() {
        let a = CMat::from_fn(5, 5, |i, j| match i.abs_diff(j) {
            0 => c(3.0 + i as f64, 0.0),
            1 => c(-1.0, 0.0),
            _ => c64::ZERO,
        });
        let p = OperatorPencil::new(a, vec![c64::ONE; 5]).unwrap();
        let s = normalized(&p, Normalization::UnitRight);
        let theta = metric_w_identity(&s, &MetricOptions::default()).unwrap();
        assert!(linalg::max_abs_diff(&theta, &linalg::identity(5)) < 1e-13);
        let m = m_matrix(&s, &p).unwrap();
        assert!(linalg::max_abs_diff(&m.m, &linalg::identity(5)) < 1e-13);
    }

    #[test]
    fn diagonal_pencil_single_series_matches_brute_force() {
        let p = OperatorPencil::new(real_mat(&[&[2.0, 0.0], &[0.0, 6.0]]), vec![c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        let s = normalized(&p, Normalization::Krein);
        let raw = single_series_raw(&s, &p).unwrap();
        assert!(linalg::max_abs_diff(&raw, &brute_force_single(&s, p.weight())) < 1e-15);
        // Θ r_k = σ_k l_k.
        let theta = metric_single_series(&s, &p, &MetricOptions::default()).unwrap().theta;
        for k in 0..2 {
            for i in 0..2 {
                let tr: c64 = (0..2).map(|j| theta[(i, j)] * s.right[(j, k)]).sum();
                assert!((tr - s.signs[k] * s.left[(i, k)]).norm() < 1e-14);
            }
        }
        // Krein normalization for a positive weight gives Θ = I.
        assert!(linalg::max_abs_diff(&theta, &linalg::identity(2)) < 1e-14);
    }

    #[test]
    fn routes_agree_and_m_representations_coincide() {
        // Non-normal, non-Hermitian tridiagonal pencil with a complex weight.
        let n = 6;
        let a = CMat::from_fn(n, n, |i, j| match (i as isize) - (j as isize) {
            0 => c(1.0 + i as f64, 0.2),
            1 => c(0.5, 0.0),
            -1 => c(-0.3, 0.1),
            _ => c64::ZERO,
        });
        let w: Vec<c64> = (0..n).map(|i| c(1.0, 0.1 * i as f64)).collect();
        let p = OperatorPencil::new(a, w).unwrap();
        let s = normalized(&p, Normalization::UnitRight);
        let opts = MetricOptions::default();
        let raw = single_series_raw(&s, &p).unwrap();
        assert!(linalg::max_abs_diff(&raw, &brute_force_single(&s, p.weight())) < 1e-13);
        let m = m_matrix(&s, &p).unwrap();
        let reps = m_representations(&s, &p, &raw).unwrap();
        for alt in [&reps.via_weight_inverse_left, &reps.via_weight_inverse_right] {
            assert!(linalg::max_abs_diff(alt, &m.m) < 1e-12);
        }
        // ⟨λ_j|Θ|λ_k⟩ with the unsymmetrized Θ reproduces l_j† r_k exactly
        // only through Θ r_k = l_k.
        let lhs = linalg::adjoint(&s.right) * (&raw * &s.right);
        let rhs = linalg::adjoint(&s.right) * &s.left;
        assert!(linalg::max_abs_diff(&lhs, &rhs) < 1e-11);
        // Double series is the adjoint of the raw single series.
        let bl = linalg::scale_rows(
            &p.weight().iter().map(|x| x.conj()).collect::<Vec<_>>(),
            &s.left,
        );
        let lb = linalg::scale_cols(&linalg::adjoint(&s.left), p.weight());
        let double_raw = &bl * &m.m * &lb;
        assert!(linalg::max_abs_diff(&double_raw, &linalg::adjoint(&raw)) < 1e-11);
        let d = metric_double_series(&s, &p, &m, &opts).unwrap();
        let single = single_series(&s, &p, &opts).unwrap();
        assert!(linalg::max_abs_diff(&d.theta, &single.theta) < 1e-11);
    }

    #[test]
    fn omega_examples() {
        let opts = MetricOptions::default();
        let (o, oi) = factorize_omega(&linalg::identity(3), &opts).unwrap();
        assert!(linalg::max_abs_diff(&o, &linalg::identity(3)) < 1e-15);
        assert!(linalg::max_abs_diff(&oi, &linalg::identity(3)) < 1e-15);

        let (o, _) = factorize_omega(&real_mat(&[&[4.0, 0.0], &[0.0, 9.0]]), &opts).unwrap();
        assert!(linalg::max_abs_diff(&o, &real_mat(&[&[2.0, 0.0], &[0.0, 3.0]])) < 1e-14);

        let theta = real_mat(&[&[1.0, -1.0], &[-1.0, 2.0]]);
        let (o, oi) = factorize_omega(&theta, &opts).unwrap();
        assert!(linalg::max_abs_diff(&(linalg::adjoint(&o) * &o), &theta) < 1e-14);
        assert!(linalg::max_abs_diff(&(&o * &oi), &linalg::identity(2)) < 1e-14);

        assert!(matches!(
            factorize_omega(&real_mat(&[&[1.0, 0.0], &[0.0, -1.0]]), &opts),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn hermitized_hand_example_is_hermitian_and_isospectral() {
        let p = triangular();
        let s = normalized(&p, Normalization::MaxComponent);
        let theta = metric_w_identity(&s, &MetricOptions::default()).unwrap();
        let (o, oi) = factorize_omega(&theta, &MetricOptions::default()).unwrap();
        let (h, _) = hermitize(&p, &o, &oi);
        assert!(linalg::hermitian_defect(&h) < 1e-12);
        let mut ev = linalg::hermitian_eigenvalues(&linalg::hermitian_part(&h)).unwrap();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_detected() {
        let s = Spectrum::from_parts(
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            linalg::identity(2),
            real_mat(&[&[1.0, 1.0], &[1.0, 1.0]]),
        )
        .unwrap();
        assert!(matches!(
            metric_w_identity(&s, &MetricOptions::default()),
            Err(Error::RankDeficient { .. })
        ));
    }
}
