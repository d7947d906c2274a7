use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sturmian_core::{MetricOptions, ProblemSpec, SolverOptions, VerifyOptions};

use crate::pipeline::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Solve,
    Verify,
    Sweep,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Real part of `κ²`; the imaginary part is kept from `[problem]`.
    KappaSq,
    Ell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    /// Number of smallest-modulus eigencharges to follow; all when absent.
    #[serde(default)]
    pub track: Option<usize>,
}

impl SweepConfig {
    pub fn values(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                let t = i as f64 / last;
                self.start * (1.0 - t) + self.stop * t
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Grid halvings after the configured grid.
    #[serde(default = "default_refinements")]
    pub refinements: usize,
    #[serde(default = "default_count")]
    pub count: usize,
}

fn default_refinements() -> usize {
    1
}
fn default_count() -> usize {
    3
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            refinements: default_refinements(),
            count: default_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must agree with the subcommand when present.
    #[serde(default)]
    pub pipeline: Option<Pipeline>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self, pipeline: Pipeline) -> Result<(), CliError> {
        if let Some(p) = self.pipeline {
            if p != pipeline {
                return Err(CliError::Config(format!(
                    "config names pipeline {p:?} but {pipeline:?} was requested"
                )));
            }
        }
        self.problem
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if pipeline == Pipeline::Sweep {
            let sweep = self
                .sweep
                .as_ref()
                .ok_or_else(|| CliError::Config("sweep pipeline needs a [sweep] block".into()))?;
            if sweep.steps < 2 {
                return Err(CliError::Config(format!("sweep needs steps >= 2, got {}", sweep.steps)));
            }
            if !(sweep.start.is_finite() && sweep.stop.is_finite()) {
                return Err(CliError::Config("sweep bounds must be finite".into()));
            }
            if sweep.track == Some(0) {
                return Err(CliError::Config("sweep.track must be positive".into()));
            }
        }
        if pipeline == Pipeline::Oracle && self.oracle.count == 0 {
            return Err(CliError::Config("oracle.count must be positive".into()));
        }
        Tolerances::from_map(&self.tolerances)?;
        Ok(())
    }
}

/// Every numeric knob of the pipelines, addressable by name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub solver: SolverOptions,
    pub metric: MetricOptions,
    pub verify: VerifyOptions,
    /// Relative `|W|` below which assembly rejects a node.
    pub singular_floor: f64,
    /// Largest relative error the oracle pipeline accepts on the finest grid.
    pub oracle_rel_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            metric: MetricOptions::default(),
            verify: VerifyOptions::default(),
            singular_floor: sturmian_core::assembly::DEFAULT_SINGULAR_FLOOR,
            oracle_rel_tol: 1e-3,
        }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 10] = [
        "tol_eig",
        "degeneracy_tol",
        "defect_tol",
        "reality_tol",
        "tol_herm",
        "pd_floor",
        "rank_tol",
        "base_tol",
        "singular_floor",
        "oracle_rel_tol",
    ];

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), CliError> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(CliError::Config(format!("tolerance {name} = {value} must be finite and >= 0")));
        }
        match name {
            "tol_eig" => self.solver.tol_eig = value,
            "degeneracy_tol" => self.solver.degeneracy_tol = value,
            "defect_tol" => self.solver.defect_tol = value,
            "reality_tol" => self.solver.reality_tol = value,
            "tol_herm" => self.metric.tol_herm = value,
            // One positivity floor for the metric gate and the verification entries.
            "pd_floor" => {
                self.metric.pd_floor = value;
                self.verify.pd_floor = value;
            }
            "rank_tol" => self.metric.rank_tol = value,
            "base_tol" => self.verify.base_tol = value,
            "singular_floor" => self.singular_floor = value,
            "oracle_rel_tol" => self.oracle_rel_tol = value,
            _ => {
                return Err(CliError::Config(format!(
                    "unknown tolerance {name:?}; known: {}",
                    Self::NAMES.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn from_map(map: &BTreeMap<String, f64>) -> Result<Self, CliError> {
        let mut t = Self::default();
        for (name, &value) in map {
            t.set(name, value)?;
        }
        Ok(t)
    }
}

/// Parses a `name=value` override.
pub fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|e| format!("bad value in {s:?}: {e}"))?;
    Ok((name.trim().to_string(), value))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = r#"
[problem]
ell = 0.0
kappa_sq = 1.0
weight = "pt-coulomb"

[problem.contour]
kind = "complex-parabola"

[problem.grid]
x_min = -6.0
x_max = 6.0
n_interior = 40

[sweep]
parameter = "kappa_sq"
start = 0.5
stop = 1.5
steps = 3
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = RunConfig::from_toml(DEMO).unwrap();
        assert_eq!(c.problem.grid.n_interior(), 40);
        assert_eq!(c.sweep.as_ref().unwrap().values(), vec![0.5, 1.0, 1.5]);
        c.validate(Pipeline::Sweep).unwrap();
        let again = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_bad_configs() {
        let no_grid = DEMO.replace("[problem.grid]", "[unused]");
        assert!(matches!(RunConfig::from_toml(&no_grid), Err(CliError::Config(_))));

        let one_step = DEMO.replace("steps = 3", "steps = 1");
        let c = RunConfig::from_toml(&one_step).unwrap();
        assert!(c.validate(Pipeline::Sweep).is_err());
        assert!(c.validate(Pipeline::Solve).is_ok());

        let mut c = RunConfig::from_toml(DEMO).unwrap();
        c.sweep = None;
        assert!(c.validate(Pipeline::Sweep).is_err());

        c.pipeline = Some(Pipeline::Oracle);
        assert!(c.validate(Pipeline::Solve).is_err());
    }

    #[test]
    fn tolerance_overrides() {
        let mut t = Tolerances::default();
        t.set("pd_floor", 1e-6).unwrap();
        assert_eq!(t.metric.pd_floor, 1e-6);
        assert_eq!(t.verify.pd_floor, 1e-6);
        assert!(t.set("nonsense", 1.0).is_err());
        assert!(t.set("tol_eig", -1.0).is_err());
        assert_eq!(parse_override("base_tol = 1e-8").unwrap(), ("base_tol".into(), 1e-8));
        assert!(parse_override("base_tol").is_err());
        assert!(parse_override("base_tol=x").is_err());
    }
}
