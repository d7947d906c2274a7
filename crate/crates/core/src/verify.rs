//! Residual checks of every identity the eigenpairs and metric should
//! satisfy, plus grid-refinement studies of the eigencharges.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::assembly::{assemble_pencil, OperatorPencil, ProblemSpec, WeightKind};
use crate::c64;
use crate::contour::ContourKind;
use crate::eigensolve::{smallest_eigencharges, Spectrum};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::metric::MetricBundle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Multiplied by `max(1, cond₂(R))` to give each entry's threshold.
    pub base_tol: f64,
    /// Positivity entries pass when `min eig / max eig > pd_floor`.
    pub pd_floor: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            base_tol: 1e-10,
            pd_floor: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionNumbers {
    pub right_vectors: f64,
    pub theta: f64,
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub entries: Vec<Entry>,
    pub skipped: Vec<Skipped>,
    pub condition_numbers: ConditionNumbers,
    /// `max(1, cond₂(R))`.
    pub condition_scale: f64,
    pub overall: bool,
}

impl VerificationReport {
    pub fn entry(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(|e| !e.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_text(&self) -> String {
        let width = self
            .entries
            .iter()
            .map(|e| e.name.len())
            .chain(self.skipped.iter().map(|s| s.name.len()))
            .max()
            .unwrap_or(0)
            .max(8);
        let mut out = String::new();
        writeln!(out, "{:<width$}  {:>12}  {:>12}  status", "identity", "residual", "tolerance").unwrap();
        for e in &self.entries {
            writeln!(
                out,
                "{:<width$}  {:>12.3e}  {:>12.3e}  {}",
                e.name,
                e.residual,
                e.tolerance,
                if e.passed { "pass" } else { "FAIL" }
            )
            .unwrap();
        }
        for s in &self.skipped {
            writeln!(out, "{:<width$}  {:>12}  {:>12}  skipped ({})", s.name, "-", "-", s.reason).unwrap();
        }
        let c = &self.condition_numbers;
        writeln!(
            out,
            "cond(R) = {:.3e}  cond(Θ) = {:.3e}  cond(Ω) = {}",
            c.right_vectors,
            c.theta,
            c.omega.map_or("n/a".to_string(), |x| format!("{x:.3e}"))
        )
        .unwrap();
        writeln!(out, "overall: {}", if self.overall { "pass" } else { "FAIL" }).unwrap();
        out
    }
}

fn rel(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

fn adjoint_weighted_left(spectrum: &Spectrum, weight: &[c64]) -> CMat {
    // L† B
    linalg::scale_cols(&linalg::adjoint(&spectrum.left), weight)
}

/// Runs the full identity suite. `theta` in the bundle is used as given, so
/// a corrupted metric shows up in the metric-dependent entries.
pub fn run_suite(
    pencil: &OperatorPencil,
    spectrum: &Spectrum,
    bundle: &MetricBundle,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let n = pencil.dim();
    if spectrum.dim() != n || spectrum.len() != n || bundle.theta.nrows() != n || bundle.theta.ncols() != n {
        return Err(Error::InputMismatch(format!(
            "pencil dimension {n}, spectrum {}x{}, theta {}x{}",
            spectrum.dim(),
            spectrum.len(),
            bundle.theta.nrows(),
            bundle.theta.ncols()
        )));
    }
    let a = pencil.a_matrix();
    let w = pencil.weight();
    let wconj: Vec<c64> = w.iter().map(|x| x.conj()).collect();
    let b = pencil.b_matrix();
    let theta = &bundle.theta;
    let r = &spectrum.right;
    let l = &spectrum.left;
    let lambdas = &spectrum.eigencharges;
    let lambdas_conj: Vec<c64> = lambdas.iter().map(|z| z.conj()).collect();
    let signs: Vec<c64> = spectrum.signs.iter().map(|&s| c64::new(s, 0.0)).collect();
    let id = linalg::identity(n);

    let cond_r = linalg::cond2(r)?;
    let cond_theta = linalg::cond2(theta)?;
    let cond_omega = match &bundle.omega {
        Some(o) => Some(linalg::cond2(o)?),
        None => None,
    };
    let scale = cond_r.max(1.0);
    let tol = opts.base_tol * scale;

    let a_norm = linalg::max_abs(a);
    let b_norm = linalg::max_abs(&b);
    let theta_norm = linalg::max_abs(theta);

    let lb = adjoint_weighted_left(spectrum, w);
    let br = linalg::scale_rows(w, r);

    let mut entries = Vec::new();
    let mut push = |name: &str, residual: f64, tolerance: f64| {
        entries.push(Entry {
            name: name.to_string(),
            residual,
            tolerance,
            passed: residual <= tolerance,
        });
    };

    // ⟨⟨λ|W|λ'⟩ = δ
    push("biorthogonality", linalg::max_abs_diff(&(&lb * r), &id), tol);
    // Σ |λ⟩ {{λ| = I and Σ |λ} ⟨⟨λ| = I
    push("completeness_right", linalg::max_abs_diff(&(r * &lb), &id), tol);
    push("completeness_left", linalg::max_abs_diff(&(&br * linalg::adjoint(l)), &id), tol);
    // W = Σ |λ} {{λ|,  H = Σ |λ} λ {{λ|
    push("weight_spectral", rel(linalg::max_abs_diff(&(&br * &lb), &b), b_norm), tol);
    let h_rep = linalg::scale_cols(&br, lambdas) * &lb;
    push("hamiltonian_spectral", rel(linalg::max_abs_diff(&h_rep, a), a_norm), tol);

    // H†Θ = ΘH,  W†Θ = ΘW
    let qh = linalg::max_abs_diff(&(linalg::adjoint(a) * theta), &(theta * a));
    push("quasi_hermiticity_h", rel(qh, a_norm * theta_norm), tol);
    let qw = linalg::max_abs_diff(&linalg::scale_rows(&wconj, theta), &linalg::scale_cols(theta, w));
    push("quasi_hermiticity_w", rel(qw, b_norm * theta_norm), tol);

    push("theta_hermiticity", rel(linalg::hermitian_defect(theta), theta_norm), tol);
    push("single_series_asymmetry", bundle.single_series_asymmetry, tol);

    let t_eigs = linalg::hermitian_eigenvalues(&linalg::hermitian_part(theta))?;
    let tw_eigs = linalg::hermitian_eigenvalues(&linalg::hermitian_part(&linalg::scale_cols(theta, w)))?;
    let gate = |eigs: &[f64]| {
        let (lo, hi) = (eigs[0], eigs[eigs.len() - 1]);
        let ratio = if hi > 0.0 { lo / hi } else { f64::NEG_INFINITY };
        (opts.pd_floor - ratio).max(0.0)
    };
    push("theta_positivity", gate(&t_eigs), 0.0);
    push("theta_w_positivity", gate(&tw_eigs), 0.0);

    push(
        "series_agreement",
        rel(linalg::max_abs_diff(theta, &bundle.theta_double), theta_norm),
        tol,
    );

    // Θ|λ⟩ = σ|λ⟩⟩
    let tr = theta * r;
    let sl = linalg::scale_cols(l, &signs);
    push(
        "theta_maps_right_to_left",
        rel(linalg::max_abs_diff(&tr, &sl), theta_norm * linalg::max_abs(r)),
        tol,
    );

    // Σ |λ}} conj(λ) {λ| Θ = Θ Σ |λ} λ {{λ|
    let bl = linalg::scale_rows(&wconj, l);
    let rb = linalg::scale_cols(&linalg::adjoint(r), &wconj);
    let h_adj_rep = linalg::scale_cols(&bl, &lambdas_conj) * rb;
    let ins = linalg::max_abs_diff(&(h_adj_rep * theta), &(theta * h_rep));
    push("insertion_identity", rel(ins, a_norm * theta_norm), tol);

    let mut skipped = Vec::new();
    match (&bundle.h_herm, &bundle.w_herm) {
        (Some(h), Some(wh)) => {
            push("h_hermiticity", rel(linalg::hermitian_defect(h), linalg::max_abs(h)), tol);
            push("w_hermiticity", rel(linalg::hermitian_defect(wh), linalg::max_abs(wh)), tol);
        }
        _ => {
            for name in ["h_hermiticity", "w_hermiticity"] {
                skipped.push(Skipped {
                    name: name.to_string(),
                    reason: "theta not positive definite, no omega".to_string(),
                });
            }
        }
    }

    let overall = entries.iter().all(|e| e.passed);
    Ok(VerificationReport {
        entries,
        skipped,
        condition_numbers: ConditionNumbers {
            right_vectors: cond_r,
            theta: cond_theta,
            omega: cond_omega,
        },
        condition_scale: scale,
        overall,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    /// `λ_n = 2κ(n + ℓ + 1)`.
    Analytic,
    /// A solve on a grid one halving finer than the finest row.
    FineGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_interior: usize,
    pub h: f64,
    pub eigencharges: Vec<c64>,
    /// `|λ − λ_ref|` per tracked eigencharge.
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub oracle: OracleKind,
    pub reference: Vec<c64>,
    pub rows: Vec<ConvergenceRow>,
    /// `log₂(e_{i−1}/e_i)` per tracked eigencharge, one list per refinement.
    pub orders: Vec<Vec<f64>>,
    /// Set when some order falls below [`MIN_ORDER`] while the errors are
    /// still above rounding level.
    pub flagged: bool,
}

pub const MIN_ORDER: f64 = 1.5;

/// Closed-form charges when `spec` is the Hermitian Coulomb problem on the half-line.
pub fn analytic_charges(spec: &ProblemSpec, k: usize) -> Option<Vec<f64>> {
    let kappa_sq = spec.kappa_sq;
    if spec.contour.kind != ContourKind::RealHalfLine
        || spec.weight != WeightKind::Coulomb
        || kappa_sq.im != 0.0
        || !(kappa_sq.re > 0.0)
        || !(spec.ell > -1.0)
    {
        return None;
    }
    let kappa = kappa_sq.re.sqrt();
    (0..k as u32)
        .map(|n| analytic::hermitian_coulomb_charge(n, spec.ell, kappa).ok())
        .collect()
}

/// Per-step orders `log₂(e_{i−1}/e_i)` and whether any falls below
/// [`MIN_ORDER`] while its error is still above rounding level.
pub fn observed_orders(rows: &[ConvergenceRow]) -> (Vec<Vec<f64>>, bool) {
    let mut orders = Vec::new();
    let mut flagged = false;
    for pair in rows.windows(2) {
        let step: Vec<f64> = pair[0]
            .errors
            .iter()
            .zip(&pair[1].errors)
            .map(|(e0, e1)| (e0 / e1).log2())
            .collect();
        for ((o, e1), v) in step.iter().zip(&pair[1].errors).zip(&pair[1].eigencharges) {
            let above_rounding = *e1 > 1e-12 * v.norm().max(1.0);
            if above_rounding && !(*o >= MIN_ORDER) {
                flagged = true;
            }
        }
        orders.push(step);
    }
    (orders, flagged)
}

/// Tracks the `k` smallest-modulus eigencharges over `refinements`
/// successive halvings of the grid spacing.
pub fn convergence_study(spec: &ProblemSpec, refinements: usize, k: usize) -> Result<ConvergenceStudy> {
    let mut grids = vec![spec.grid.clone()];
    for _ in 0..refinements {
        grids.push(grids.last().unwrap().refined());
    }
    let values: Vec<Vec<c64>> = grids
        .iter()
        .map(|g| smallest_eigencharges(&assemble_pencil(&spec.with_grid(g.clone()))?, k))
        .collect::<Result<_>>()?;

    let (oracle, reference) = match analytic_charges(spec, k) {
        Some(v) => (OracleKind::Analytic, v.into_iter().map(|x| c64::new(x, 0.0)).collect()),
        None => {
            let fine = grids.last().unwrap().refined();
            (
                OracleKind::FineGrid,
                smallest_eigencharges(&assemble_pencil(&spec.with_grid(fine))?, k)?,
            )
        }
    };

    let rows: Vec<ConvergenceRow> = grids
        .iter()
        .zip(&values)
        .map(|(g, vals)| ConvergenceRow {
            n_interior: g.n_interior(),
            h: g.h(),
            errors: vals
                .iter()
                .map(|v| {
                    reference
                        .iter()
                        .map(|r| (v - r).norm())
                        .fold(f64::INFINITY, f64::min)
                })
                .collect(),
            eigencharges: vals.clone(),
        })
        .collect();

    let (orders, flagged) = observed_orders(&rows);

    Ok(ConvergenceStudy {
        oracle,
        reference,
        rows,
        orders,
        flagged,
    })
}
