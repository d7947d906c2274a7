use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sturmian_core::assembly::assemble_pencil_with_floor;
use sturmian_core::eigensolve::{smallest_eigencharges, write_spectrum_csv};
use sturmian_core::verify::OracleKind;
use sturmian_core::{
    biorthonormalize, build_bundle, c64, convergence_study, run_suite, solve_pencil, Error,
    OperatorPencil, ProblemSpec,
};

use crate::config::{Pipeline, RunConfig, SweepParameter, Tolerances};
use crate::output::{self, Collision, SweepRow};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                Error::InvalidGrid(_)
                | Error::InvalidContour(_)
                | Error::InvalidProblem(_)
                | Error::SingularWeight { .. }
                | Error::SingularQuantumNumbers
                | Error::NonpositiveEnergy(_)
                | Error::Parse(_) => 2,
                Error::DegenerateSpectrum { .. }
                | Error::NearDefectivePair { .. }
                | Error::RankDeficient { .. } => 5,
                Error::NotPositiveDefinite { .. } | Error::AsymmetryExceeded { .. } => 4,
                _ => 3,
            },
            CliError::Io { .. } | CliError::Csv { .. } => 3,
        }
    }
}

/// Result of a pipeline whose computations completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Some eigenpair residual exceeds `tol_eig`.
    SolverCheckFailed,
    VerificationFailed,
    Degenerate,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::SolverCheckFailed => 3,
            Status::VerificationFailed => 4,
            Status::Degenerate => 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

/// Runs `pipeline` on a validated copy of `config`, writing into `out_dir`.
pub fn run(
    pipeline: Pipeline,
    config: &RunConfig,
    tolerances: &Tolerances,
    out_dir: &Path,
    workers: usize,
) -> Result<Outcome, CliError> {
    config.validate(pipeline)?;
    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    match pipeline {
        Pipeline::Solve => solve(config, tolerances, out_dir),
        Pipeline::Verify => verify(config, tolerances, out_dir),
        Pipeline::Sweep => sweep(config, tolerances, out_dir, workers),
        Pipeline::Oracle => oracle(config, tolerances, out_dir),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn pencil(spec: &ProblemSpec, tol: &Tolerances) -> Result<OperatorPencil, CliError> {
    Ok(assemble_pencil_with_floor(spec, tol.singular_floor)?)
}

fn solve(config: &RunConfig, tol: &Tolerances, out: &Path) -> Result<Outcome, CliError> {
    let pencil = pencil(&config.problem, tol)?;
    let spectrum = solve_pencil(&pencil, &tol.solver)?;
    let path = out.join("spectrum.csv");
    write_spectrum_csv(create(&path)?, &spectrum)?;

    let worst = spectrum.residuals.iter().copied().fold(0.0, f64::max);
    let degenerate = spectrum.degenerate_flags.iter().filter(|&&f| f).count();
    let status = if degenerate > 0 {
        Status::Degenerate
    } else if !(worst <= tol.solver.tol_eig) {
        Status::SolverCheckFailed
    } else {
        Status::Ok
    };
    Ok(Outcome {
        status,
        summary: format!(
            "{} eigencharges, max residual {worst:.3e} (tol_eig {:.1e}), {degenerate} flagged degenerate\n",
            spectrum.len(),
            tol.solver.tol_eig
        ),
        files: vec![path],
    })
}

fn verify(config: &RunConfig, tol: &Tolerances, out: &Path) -> Result<Outcome, CliError> {
    let pencil = pencil(&config.problem, tol)?;
    let spectrum = solve_pencil(&pencil, &tol.solver)?;
    let spectrum_path = out.join("spectrum.csv");
    write_spectrum_csv(create(&spectrum_path)?, &spectrum)?;

    let spectrum = biorthonormalize(&spectrum, &pencil, &tol.solver)?;
    let bundle = build_bundle(&spectrum, &pencil, &tol.metric)?;
    let report = run_suite(&pencil, &spectrum, &bundle, &tol.verify)?;

    let json_path = out.join("verification.json");
    let text_path = out.join("verification.txt");
    write_text(&json_path, &report.to_json()?)?;
    let mut text = report.to_text();
    if pencil.reference() != &sturmian_core::assembly::ReferenceForm::Identity {
        text.push_str(&format!("pt_symmetry_defect = {:.3e}\n", pencil.pt_symmetry_defect()));
    }
    write_text(&text_path, &text)?;

    Ok(Outcome {
        status: if report.overall { Status::Ok } else { Status::VerificationFailed },
        summary: text,
        files: vec![spectrum_path, json_path, text_path],
    })
}

/// Greedy nearest-neighbour assignment of `next` onto the branches whose
/// last values are `prev`, closest pairs first. Returns, per branch, the
/// index into `next`, and the branch pairs that shared a nearest neighbour.
pub fn match_branches(prev: &[c64], next: &[c64]) -> (Vec<usize>, Vec<(usize, usize, usize)>) {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(prev.len() * next.len());
    for (b, p) in prev.iter().enumerate() {
        for (j, q) in next.iter().enumerate() {
            pairs.push(((p - q).norm(), b, j));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut assignment = vec![usize::MAX; prev.len()];
    let mut taken = vec![false; next.len()];
    let mut remaining = prev.len().min(next.len());
    for &(_, b, j) in &pairs {
        if remaining == 0 {
            break;
        }
        if assignment[b] == usize::MAX && !taken[j] {
            assignment[b] = j;
            taken[j] = true;
            remaining -= 1;
        }
    }

    let nearest: Vec<usize> = prev
        .iter()
        .map(|p| {
            (0..next.len())
                .min_by(|&i, &j| (p - next[i]).norm().total_cmp(&(p - next[j]).norm()))
                .unwrap_or(usize::MAX)
        })
        .collect();
    let mut collisions = Vec::new();
    for a in 0..prev.len() {
        for b in a + 1..prev.len() {
            if nearest[a] == nearest[b] {
                collisions.push((a, b, nearest[a]));
            }
        }
    }
    (assignment, collisions)
}

fn sweep(config: &RunConfig, tol: &Tolerances, out: &Path, workers: usize) -> Result<Outcome, CliError> {
    let sweep = config.sweep.as_ref().expect("validated");
    let values = sweep.values();
    let track = sweep.track.unwrap_or(config.problem.grid.n_interior());

    let step = |value: f64| -> Result<Vec<c64>, CliError> {
        let mut spec = config.problem.clone();
        match sweep.parameter {
            SweepParameter::KappaSq => spec.kappa_sq = c64::new(value, spec.kappa_sq.im),
            SweepParameter::Ell => spec.ell = value,
        }
        spec.validate().map_err(|e| CliError::Config(format!("sweep value {value}: {e}")))?;
        Ok(smallest_eigencharges(&pencil(&spec, tol)?, track)?)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let spectra: Vec<Vec<c64>> =
        pool.install(|| values.par_iter().map(|&v| step(v)).collect::<Result<_, _>>())?;

    let mut rows = Vec::new();
    let mut collisions = Vec::new();
    let mut current = spectra[0].clone();
    for (s, (value, spectrum)) in values.iter().zip(&spectra).enumerate() {
        if s > 0 {
            let (assignment, clashes) = match_branches(&current, spectrum);
            for (a, b, j) in clashes {
                collisions.push(Collision {
                    step: s,
                    parameter: *value,
                    branch_a: a,
                    branch_b: b,
                    re: spectrum[j].re,
                    im: spectrum[j].im,
                });
            }
            current = assignment.iter().map(|&j| spectrum[j]).collect();
        }
        for (branch, z) in current.iter().enumerate() {
            rows.push(SweepRow {
                step: s,
                parameter: *value,
                branch,
                re: z.re,
                im: z.im,
            });
        }
    }

    let sweep_path = out.join("sweep.csv");
    let collision_path = out.join("sweep_collisions.csv");
    output::write_rows(create(&sweep_path)?, &rows).map_err(|source| CliError::Csv {
        path: sweep_path.clone(),
        source,
    })?;
    output::write_rows(create(&collision_path)?, &collisions).map_err(|source| CliError::Csv {
        path: collision_path.clone(),
        source,
    })?;

    Ok(Outcome {
        status: Status::Ok,
        summary: format!(
            "{} steps x {} branches, {} nearest-neighbour collisions\n",
            values.len(),
            current.len(),
            collisions.len()
        ),
        files: vec![sweep_path, collision_path],
    })
}

fn oracle(config: &RunConfig, tol: &Tolerances, out: &Path) -> Result<Outcome, CliError> {
    let study = convergence_study(&config.problem, config.oracle.refinements, config.oracle.count)?;
    let rows = output::oracle_rows(&study);
    let csv_path = out.join("oracle.csv");
    let text_path = out.join("oracle.txt");
    output::write_rows(create(&csv_path)?, &rows).map_err(|source| CliError::Csv {
        path: csv_path.clone(),
        source,
    })?;

    let finest = study.rows.last().expect("at least one grid").n_interior;
    let worst = rows
        .iter()
        .filter(|r| r.n_interior == finest)
        .map(|r| r.rel_error)
        .fold(0.0, f64::max);
    let accurate = worst <= tol.oracle_rel_tol;
    let oracle_name = match study.oracle {
        OracleKind::Analytic => "closed form 2κ(n + ℓ + 1)",
        OracleKind::FineGrid => "solve on a grid one halving finer",
    };
    let mut text = format!("reference: {oracle_name}\n");
    text.push_str(&output::oracle_table(&rows));
    text.push_str(&format!(
        "finest-grid max relative error {worst:.3e} (limit {:.1e}): {}\n",
        tol.oracle_rel_tol,
        if accurate { "pass" } else { "FAIL" }
    ));
    text.push_str(&format!(
        "convergence order: {}\n",
        if study.flagged { "FAIL (below 1.5)" } else { "pass" }
    ));
    write_text(&text_path, &text)?;

    Ok(Outcome {
        status: if accurate && !study.flagged {
            Status::Ok
        } else {
            Status::VerificationFailed
        },
        summary: text,
        files: vec![csv_path, text_path],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branches_follow_nearest_values() {
        let prev = [c64::new(0.0, 0.0), c64::new(1.0, 0.0), c64::new(5.0, 0.0)];
        let next = [c64::new(5.1, 0.0), c64::new(0.1, 0.0), c64::new(1.1, 0.0)];
        let (assignment, collisions) = match_branches(&prev, &next);
        assert_eq!(assignment, vec![1, 2, 0]);
        assert!(collisions.is_empty());
    }

    #[test]
    fn shared_nearest_neighbour_is_reported() {
        let prev = [c64::new(0.0, 0.0), c64::new(0.2, 0.0)];
        let next = [c64::new(0.1, 0.0), c64::new(3.0, 0.0)];
        let (assignment, collisions) = match_branches(&prev, &next);
        assert_eq!(assignment, vec![0, 1]);
        assert_eq!(collisions, vec![(0, 1, 0)]);
    }

    #[test]
    fn exit_codes_are_distinct_per_class() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(Error::EigensolverFailure("x".into())).exit_code(), 3);
        assert_eq!(CliError::Core(Error::NotPositiveDefinite { min_eig: -1.0 }).exit_code(), 4);
        assert_eq!(CliError::Core(Error::RankDeficient { ratio: 0.0 }).exit_code(), 5);
        assert_eq!(Status::VerificationFailed.exit_code(), 4);
    }
}
