//! Finite-difference assembly of the Sturmian pencil `A v = λ B v`.
//!
//! `A = T + diag(ℓ(ℓ+1)/r²) + κ²·I` with `T` the flux-form discretization of
//! `−d²/dr²` along the contour, and `B = diag(W(r_j))`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::c64;
use crate::contour::{ContourKind, ContourSpec, Grid};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Multiplicative weight `W(r)` on the eigencharge side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    Identity,
    /// `W = i/r`.
    PtCoulomb,
    /// `W = 1/r`.
    Coulomb,
    /// `W = r^N`, `N ≥ −2`. `N = −2` is experimental.
    Power(i32),
}

impl WeightKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightKind::Power(n) if n < -2 => Err(Error::InvalidProblem(format!(
                "power weight exponent must be >= -2, got {n}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, r: c64) -> c64 {
        match *self {
            WeightKind::Identity => c64::ONE,
            WeightKind::PtCoulomb => c64::I * r.inv(),
            WeightKind::Coulomb => r.inv(),
            WeightKind::Power(n) => r.powi(n),
        }
    }
}

/// Physical parameters of one Sturmian pencil.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub ell: f64,
    #[serde(with = "complex_scalar")]
    pub kappa_sq: c64,
    pub weight: WeightKind,
    pub contour: ContourSpec,
    pub grid: Grid,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.ell.is_finite() {
            return Err(Error::InvalidProblem("ell must be finite".into()));
        }
        if !(self.kappa_sq.re.is_finite() && self.kappa_sq.im.is_finite()) {
            return Err(Error::InvalidProblem("kappa_sq must be finite".into()));
        }
        self.weight.validate()?;
        self.contour.validate()?;
        if self.contour.kind == ContourKind::RealHalfLine && self.grid.x_min() < 0.0 {
            return Err(Error::InvalidProblem(format!(
                "real half-line requires x_min >= 0, got {}",
                self.grid.x_min()
            )));
        }
        Ok(())
    }

    /// `ℓ(ℓ+1)`.
    pub fn centrifugal_strength(&self) -> f64 {
        self.ell * (self.ell + 1.0)
    }

    pub fn with_grid(&self, grid: Grid) -> Self {
        Self {
            grid,
            ..self.clone()
        }
    }
}

/// Accepts `kappa_sq = 1.0` or `kappa_sq = [re, im]`; always writes the pair.
mod complex_scalar {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Real(f64),
        Pair([f64; 2]),
    }

    pub fn serialize<S: Serializer>(z: &c64, s: S) -> std::result::Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<c64, D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Real(re) => c64::new(re, 0.0),
            Repr::Pair([re, im]) => c64::new(re, im),
        })
    }
}

/// Hermitian sesquilinear form `G` that the pencil's structure singles out;
/// used to fix the per-pair normalization of eigenvectors so that the
/// spectral metric comes out Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceForm {
    /// `G = I`.
    Identity,
    /// `G = P·diag(jacobian)` with `P` the index-reversal permutation. For a
    /// mirror-symmetric grid on the parabola `jacobian_j = r′(x_j)`.
    Mirrored { jacobian: Vec<c64> },
}

impl ReferenceForm {
    pub fn apply(&self, v: &[c64]) -> Vec<c64> {
        match self {
            ReferenceForm::Identity => v.to_vec(),
            ReferenceForm::Mirrored { jacobian } => {
                let n = v.len();
                (0..n).map(|i| jacobian[n - 1 - i] * v[n - 1 - i]).collect()
            }
        }
    }

    pub fn to_matrix(&self, n: usize) -> CMat {
        match self {
            ReferenceForm::Identity => linalg::identity(n),
            ReferenceForm::Mirrored { jacobian } => CMat::from_fn(n, n, |i, j| {
                if i + j == n - 1 {
                    jacobian[j]
                } else {
                    c64::ZERO
                }
            }),
        }
    }
}

/// Dense `A` and diagonal `B` of `A v = λ B v`.
#[derive(Debug, Clone)]
pub struct OperatorPencil {
    a: CMat,
    weight: Vec<c64>,
    kappa_sq: c64,
    reference: ReferenceForm,
}

impl OperatorPencil {
    /// Pencil from explicit matrices, with `κ² = 0` and an identity reference form.
    pub fn new(a: CMat, weight: Vec<c64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() != weight.len() {
            return Err(Error::InputMismatch(format!(
                "A is {}x{}, weight has {} entries",
                a.nrows(),
                a.ncols(),
                weight.len()
            )));
        }
        if let Some(node) = weight.iter().position(|w| *w == c64::ZERO) {
            return Err(Error::SingularWeight {
                node,
                magnitude: 0.0,
                radius: f64::NAN,
            });
        }
        Ok(Self {
            a,
            weight,
            kappa_sq: c64::ZERO,
            reference: ReferenceForm::Identity,
        })
    }

    pub fn with_reference(mut self, reference: ReferenceForm) -> Self {
        self.reference = reference;
        self
    }

    pub fn with_kappa_sq(mut self, kappa_sq: c64) -> Self {
        self.kappa_sq = kappa_sq;
        self
    }

    pub fn dim(&self) -> usize {
        self.weight.len()
    }

    /// The full left-hand operator `A` (the Sturmian `H`, κ² included).
    pub fn a_matrix(&self) -> &CMat {
        &self.a
    }

    /// Diagonal of `B`.
    pub fn weight(&self) -> &[c64] {
        &self.weight
    }

    pub fn b_matrix(&self) -> CMat {
        linalg::diag(&self.weight)
    }

    pub fn kappa_sq(&self) -> c64 {
        self.kappa_sq
    }

    /// `A − κ²·I`.
    pub fn shifted_hamiltonian(&self) -> CMat {
        let n = self.dim();
        CMat::from_fn(n, n, |i, j| {
            if i == j {
                self.a[(i, j)] - self.kappa_sq
            } else {
                self.a[(i, j)]
            }
        })
    }

    pub fn reference(&self) -> &ReferenceForm {
        &self.reference
    }

    /// `A` Hermitian and `B` real positive: the pencil is Hermitian-definite.
    pub fn is_hermitian_definite(&self) -> bool {
        let scale = linalg::max_abs(&self.a).max(f64::MIN_POSITIVE);
        linalg::hermitian_defect(&self.a) <= 1e-14 * scale
            && self.weight.iter().all(|w| w.im == 0.0 && w.re > 0.0)
    }

    /// `max(‖P·conj(A)·P − A‖_max, ‖P·conj(B)·P − B‖_max)`.
    pub fn pt_symmetry_defect(&self) -> f64 {
        let n = self.dim();
        let mut defect = 0.0_f64;
        for j in 0..n {
            for i in 0..n {
                let mirrored = self.a[(n - 1 - i, n - 1 - j)].conj();
                defect = defect.max((mirrored - self.a[(i, j)]).norm());
            }
            defect = defect.max((self.weight[n - 1 - j].conj() - self.weight[j]).norm());
        }
        defect
    }
}

/// Relative floor below which `|W(r_j)|` or `|r_j|` counts as singular.
pub const DEFAULT_SINGULAR_FLOOR: f64 = 1e-12;

/// `T` for `−(1/r′) d/dx (1/r′) d/dx` with Dirichlet closure.
pub fn assemble_kinetic(spec: &ProblemSpec) -> CMat {
    let grid = &spec.grid;
    let contour = &spec.contour;
    let n = grid.n_interior();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut t = CMat::zeros(n, n);
    for (j, &x) in grid.nodes().iter().enumerate() {
        let s = contour.derivative(x).inv();
        let s_right = contour.derivative(grid.right_midpoint(j)).inv();
        let s_left = contour.derivative(grid.left_midpoint(j)).inv();
        t[(j, j)] = s * (s_right + s_left) * inv_h2;
        if j + 1 < n {
            t[(j, j + 1)] = -(s * s_right) * inv_h2;
        }
        if j > 0 {
            t[(j, j - 1)] = -(s * s_left) * inv_h2;
        }
    }
    t
}

pub fn assemble_pencil(spec: &ProblemSpec) -> Result<OperatorPencil> {
    assemble_pencil_with_floor(spec, DEFAULT_SINGULAR_FLOOR)
}

pub fn assemble_pencil_with_floor(spec: &ProblemSpec, floor: f64) -> Result<OperatorPencil> {
    spec.validate()?;
    let nodes = spec.grid.nodes();
    let radii: Vec<c64> = nodes.iter().map(|&x| spec.contour.point(x)).collect();
    let weight: Vec<c64> = radii.iter().map(|&r| spec.weight.eval(r)).collect();

    let r_scale = radii.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let w_scale = weight
        .iter()
        .filter(|w| w.is_finite())
        .map(|w| w.norm())
        .fold(0.0, f64::max);
    for (node, (r, w)) in radii.iter().zip(&weight).enumerate() {
        if !w.is_finite() || r.norm() <= floor * r_scale || w.norm() <= floor * w_scale {
            return Err(Error::SingularWeight {
                node,
                magnitude: w.norm(),
                radius: r.norm(),
            });
        }
    }

    let mut a = assemble_kinetic(spec);
    let strength = spec.centrifugal_strength();
    for (j, r) in radii.iter().enumerate() {
        a[(j, j)] += c64::new(strength, 0.0) / (r * r) + spec.kappa_sq;
    }

    let reference = if spec.contour.is_pt_symmetric() && spec.grid.is_symmetric() {
        ReferenceForm::Mirrored {
            jacobian: nodes.iter().map(|&x| spec.contour.derivative(x)).collect(),
        }
    } else {
        ReferenceForm::Identity
    };

    Ok(OperatorPencil {
        a,
        weight,
        kappa_sq: spec.kappa_sq,
        reference,
    })
}
