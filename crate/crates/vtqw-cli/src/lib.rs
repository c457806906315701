//! Scenario runner behind the `vtqw` binary: input documents, the run
//! configuration, report assembly and the suite driver.

pub mod commands;
pub mod documents;

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use vtqw_core::phase_estimation::{DecisionConfig, Mode};
use vtqw_core::subroutine::AlphaSchedule;
use vtqw_core::Tolerances;

pub use commands::{run_scenario, run_suite, ScenarioKind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Core(#[from] vtqw_core::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Every knob a run depends on; embedded in each report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub tolerances: Tolerances,
    pub kappa: f64,
    pub tau_accept: f64,
    pub eta: f64,
    /// Overrides the history weighting of walk scenarios.
    pub alpha: Option<AlphaSchedule>,
    pub mode: Mode,
    pub shots: usize,
    pub repetitions: usize,
    pub max_dim: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let decision = DecisionConfig::default();
        Self {
            seed: 0,
            tolerances: Tolerances::default(),
            kappa: decision.kappa,
            tau_accept: decision.tau_accept,
            eta: vtqw_core::alg_compose::DEFAULT_ETA,
            alpha: None,
            mode: decision.mode,
            shots: decision.shots,
            repetitions: decision.repetitions,
            max_dim: vtqw_core::config::max_dimension(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        let bad = |what: &str| Err(CliError::Config(what.into()));
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return bad("kappa must lie in (0, 1]");
        }
        if !(self.tau_accept > 0.0 && self.tau_accept < 1.0) {
            return bad("tau_accept must lie in (0, 1)");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be positive");
        }
        let tol = self.tolerances.construction;
        if !(tol > 0.0 && tol <= 1e-3) {
            return bad("tolerance must lie in (0, 1e-3]");
        }
        if self.mode == Mode::Circuit && (self.shots == 0 || self.repetitions == 0) {
            return bad("circuit mode needs at least one shot and one repetition");
        }
        Ok(())
    }

    pub fn decision(&self) -> DecisionConfig {
        DecisionConfig {
            kappa: self.kappa,
            tau_accept: self.tau_accept,
            mode: self.mode,
            seed: self.seed,
            shots: self.shots,
            repetitions: self.repetitions,
            ..DecisionConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub input: String,
    pub config: RunConfig,
    /// The parsed input document.
    pub scenario: Value,
    pub checks: Vec<Check>,
    pub result: Value,
    /// CSV emitted alongside the report (search sweeps).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect()
    }
}

/// Pretty JSON with a trailing newline. Floats use the shortest
/// representation that round-trips, so identical runs give identical bytes.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports contain only serializable data");
    s.push('\n');
    s
}

pub fn read_document<T: DeserializeOwned>(path: &Path) -> CliResult<(T, Value)> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    let parse_error = |e: serde_json::Error| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    let raw: Value = serde_json::from_str(&text).map_err(parse_error)?;
    let doc = serde_json::from_str(&text).map_err(parse_error)?;
    Ok((doc, raw))
}
