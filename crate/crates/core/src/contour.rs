//! Integration paths and their uniform discretization.
//!
//! Two paths are supported: the real half-line `r = x` and the left-right
//! symmetric complex parabola `r(x) = α·x + i(β·x² − γ)`. The defaults
//! `(α, β, γ) = (2, 1, 1)` give `r(x) = 2x + i(x² − 1)`, which passes below the
//! Coulomb singularity at `r = 0` (`r(0) = −i`).

use serde::{Deserialize, Serialize};

use crate::c64;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContourKind {
    RealHalfLine,
    ComplexParabola,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourSpec {
    pub kind: ContourKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_alpha() -> f64 {
    2.0
}
fn default_beta() -> f64 {
    1.0
}
fn default_gamma() -> f64 {
    1.0
}

impl Default for ContourSpec {
    fn default() -> Self {
        Self::parabola(2.0, 1.0, 1.0)
    }
}

impl ContourSpec {
    pub fn real_half_line() -> Self {
        Self {
            kind: ContourKind::RealHalfLine,
            alpha: 1.0,
            beta: 0.0,
            gamma: 0.0,
        }
    }

    pub fn parabola(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self {
            kind: ContourKind::ComplexParabola,
            alpha,
            beta,
            gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == ContourKind::ComplexParabola {
            if !(self.alpha.is_finite() && self.beta.is_finite() && self.gamma.is_finite()) {
                return Err(Error::InvalidContour("non-finite shape parameter".into()));
            }
            if self.alpha == 0.0 {
                return Err(Error::InvalidContour("alpha must be nonzero".into()));
            }
            if self.beta < 0.0 {
                return Err(Error::InvalidContour("beta must be non-negative".into()));
            }
        }
        Ok(())
    }

    /// `r(x)`.
    pub fn point(&self, x: f64) -> c64 {
        match self.kind {
            ContourKind::RealHalfLine => c64::new(x, 0.0),
            ContourKind::ComplexParabola => {
                c64::new(self.alpha * x, self.beta * x * x - self.gamma)
            }
        }
    }

    /// `r′(x)`.
    pub fn derivative(&self, x: f64) -> c64 {
        match self.kind {
            ContourKind::RealHalfLine => c64::ONE,
            ContourKind::ComplexParabola => c64::new(self.alpha, 2.0 * self.beta * x),
        }
    }

    /// Whether `r(−x) = −conj(r(x))` holds for every `x`, i.e. the path is
    /// mirror symmetric about the imaginary axis.
    pub fn is_pt_symmetric(&self) -> bool {
        self.kind == ContourKind::ComplexParabola
    }
}

/// Uniform grid of interior nodes; both endpoints carry Dirichlet conditions
/// and are not part of the node set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridConfig", into = "GridConfig")]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_interior: usize,
    h: f64,
    nodes: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridConfig {
    x_min: f64,
    x_max: f64,
    n_interior: usize,
}

impl TryFrom<GridConfig> for Grid {
    type Error = Error;
    fn try_from(c: GridConfig) -> Result<Self> {
        make_grid(c.x_min, c.x_max, c.n_interior)
    }
}

impl From<Grid> for GridConfig {
    fn from(g: Grid) -> Self {
        Self {
            x_min: g.x_min,
            x_max: g.x_max,
            n_interior: g.n_interior,
        }
    }
}

/// Builds the interior nodes `x_j = x_min + j·h`, `j = 1..=n_interior`.
///
/// Nodes are evaluated as `(x_min·(n+1−j) + x_max·j)/(n+1)`, which makes a
/// grid with `x_min = −x_max` exactly antisymmetric in floating point.
pub fn make_grid(x_min: f64, x_max: f64, n_interior: usize) -> Result<Grid> {
    if !(x_min.is_finite() && x_max.is_finite()) {
        return Err(Error::InvalidGrid("non-finite endpoint".into()));
    }
    if x_max <= x_min {
        return Err(Error::InvalidGrid(format!(
            "x_max ({x_max}) must exceed x_min ({x_min})"
        )));
    }
    if n_interior < 3 {
        return Err(Error::InvalidGrid(format!(
            "need at least 3 interior nodes, got {n_interior}"
        )));
    }
    let cells = (n_interior + 1) as f64;
    let h = (x_max - x_min) / cells;
    let nodes = (1..=n_interior)
        .map(|j| {
            let j = j as f64;
            (x_min * (cells - j) + x_max * j) / cells
        })
        .collect();
    Ok(Grid {
        x_min,
        x_max,
        n_interior,
        h,
        nodes,
    })
}

impl Grid {
    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn n_interior(&self) -> usize {
        self.n_interior
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Midpoint between node `j` and its right neighbour; `j = −1` and
    /// `j = n−1` refer to the boundary cells.
    pub(crate) fn right_midpoint(&self, j: usize) -> f64 {
        let left = self.node_or_boundary(j as isize);
        let right = self.node_or_boundary(j as isize + 1);
        0.5 * (left + right)
    }

    pub(crate) fn left_midpoint(&self, j: usize) -> f64 {
        let left = self.node_or_boundary(j as isize - 1);
        let right = self.node_or_boundary(j as isize);
        0.5 * (left + right)
    }

    fn node_or_boundary(&self, j: isize) -> f64 {
        if j < 0 {
            self.x_min
        } else if j as usize >= self.n_interior {
            self.x_max
        } else {
            self.nodes[j as usize]
        }
    }

    /// The same interval with the spacing halved.
    pub fn refined(&self) -> Grid {
        make_grid(self.x_min, self.x_max, 2 * self.n_interior + 1)
            .expect("refining a valid grid stays valid")
    }

    /// Whether node `j` and node `n−1−j` are exact mirror images.
    pub fn is_symmetric(&self) -> bool {
        let n = self.n_interior;
        (0..n).all(|j| self.nodes[j] == -self.nodes[n - 1 - j])
    }
}
