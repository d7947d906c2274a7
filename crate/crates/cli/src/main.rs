use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sturmian_cli::config::parse_override;
use sturmian_cli::{run, Pipeline, RunConfig, Tolerances};

const EXIT_CODES: &str = "\
Exit status:
  0  all requested checks passed
  2  configuration error (parse or validation)
  3  solver or I/O failure, or an eigenpair residual above tol_eig
  4  verification failure (identity suite, oracle accuracy or convergence order)
  5  degenerate or defective spectrum

Tolerance names for --tol: tol_eig, degeneracy_tol, defect_tol, reality_tol,
tol_herm, pd_floor, rank_tol, base_tol, singular_floor, oracle_rel_tol.";

/// Assembles, solves and verifies non-Hermitian Sturmian eigenproblems.
#[derive(Debug, Parser)]
#[command(name = "sturmian", version, after_help = EXIT_CODES)]
struct Args {
    /// solve: spectrum.csv; verify: spectrum.csv, verification.json and
    /// verification.txt; sweep: sweep.csv and sweep_collisions.csv;
    /// oracle: oracle.csv and oracle.txt.
    #[arg(value_enum)]
    pipeline: Pipeline,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the config (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tolerance override `name=value`, repeatable; applied after the
    /// config's [tolerances] table.
    #[arg(long = "tol", value_parser = parse_override)]
    tol: Vec<(String, f64)>,
    /// Concurrent sweep steps.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    workers: u32,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = RunConfig::load(&args.config).and_then(|mut config| {
        for (name, value) in &args.tol {
            config.tolerances.insert(name.clone(), *value);
        }
        let tolerances = Tolerances::from_map(&config.tolerances)?;
        let out = args
            .out
            .clone()
            .or_else(|| config.output.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        run(args.pipeline, &config, &tolerances, &out, args.workers as usize)
    });
    match result {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(outcome.status.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
