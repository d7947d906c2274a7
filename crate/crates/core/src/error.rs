use thiserror::Error;

/// Errors raised anywhere in the assemble → solve → metric → verify chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid contour: {0}")]
    InvalidContour(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("weight is singular at node {node} (|W| = {magnitude:e}, |r| = {radius:e})")]
    SingularWeight {
        node: usize,
        magnitude: f64,
        radius: f64,
    },

    #[error("eigensolver failed: {0}")]
    EigensolverFailure(String),

    #[error("eigencharges {first} and {second} are degenerate (|Δλ| = {gap:e})")]
    DegenerateSpectrum {
        first: usize,
        second: usize,
        gap: f64,
    },

    #[error("eigenpair {index} is nearly self-orthogonal (|⟨⟨λ|W|λ⟩| = {overlap:e})")]
    NearDefectivePair { index: usize, overlap: f64 },

    #[error("left-eigenvector matrix is numerically rank deficient (σ_min/σ_max = {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("metric asymmetry {asymmetry:e} exceeds tolerance {tolerance:e}")]
    AsymmetryExceeded { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not Hermitian (relative defect {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("metric is not positive definite (minimum eigenvalue {min_eig:e})")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("quantum numbers give a zero denominator 2n + 1 - q - 2qℓ")]
    SingularQuantumNumbers,

    #[error("energy must be positive, got {0}")]
    NonpositiveEnergy(f64),

    #[error("dimension mismatch: {0}")]
    InputMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
