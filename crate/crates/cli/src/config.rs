//! Run configuration: one JSON document with a versioned schema.

use serde::{Deserialize, Serialize};

use qvi_core::simulate::{SimConfig, TailHandling};
use qvi_core::solver::{ConsumptionMode, Grid, InitialGuess, SolverConfig, TopBoundary};
use qvi_core::{Preferences, StationaryProblem, SwitchingCostMatrix};

use crate::error::{CliError, Result};

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec_version: u32,
    pub problem: ProblemSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub acceptance: AcceptanceSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    #[serde(rename = "A")]
    pub tech: f64,
    pub x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaKeyword {
    Vanishing,
}

/// Switching costs: the keyword `"vanishing"`, one number for every
/// off-diagonal entry, or a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSpec {
    Keyword(EtaKeyword),
    Uniform(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Default for EtaSpec {
    fn default() -> Self {
        EtaSpec::Keyword(EtaKeyword::Vanishing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub regimes: Vec<RegimeSpec>,
    pub gamma: f64,
    pub rho: f64,
    pub delta: f64,
    #[serde(default)]
    pub pi: f64,
    #[serde(default)]
    pub eta: EtaSpec,
}

impl ProblemSection {
    pub fn build(&self) -> StationaryProblem {
        let n = self.regimes.len();
        let costs = match &self.eta {
            EtaSpec::Keyword(EtaKeyword::Vanishing) => SwitchingCostMatrix::vanishing(n),
            EtaSpec::Uniform(c) => SwitchingCostMatrix::uniform(n, *c),
            EtaSpec::Matrix(rows) => SwitchingCostMatrix::from_rows(rows.clone()),
        };
        StationaryProblem::new(
            self.regimes.iter().map(|r| (r.tech, r.x)),
            Preferences::new(self.gamma, self.rho, self.pi, self.delta),
            costs,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub k_min: f64,
    pub k_max: f64,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { k_min: 0.01, k_max: 6.0, n: 4001 }
    }
}

impl GridSection {
    pub fn build(&self) -> Result<Grid> {
        Ok(Grid::new(self.k_min, self.k_max, self.n)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    ClosedForm,
    GridSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
    pub consumption_mode: ModeName,
    pub n_c: usize,
    pub damping: f64,
    pub c_floor: f64,
    pub top_boundary: TopBoundary,
    pub initial_guess: InitialGuess,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            consumption_mode: ModeName::ClosedForm,
            n_c: 2000,
            damping: d.damping,
            c_floor: d.c_floor,
            top_boundary: d.boundary,
            initial_guess: d.init,
        }
    }
}

impl SolverSection {
    pub fn build(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            consumption_mode: match self.consumption_mode {
                ModeName::ClosedForm => ConsumptionMode::ClosedForm,
                ModeName::GridSearch => ConsumptionMode::GridSearch { n_c: self.n_c },
            },
            c_floor: self.c_floor,
            damping: self.damping,
            boundary: self.top_boundary,
            init: self.initial_guess,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Where `simulate` takes its feedback policy from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySource {
    /// Closed-form policy; needs the analytic preconditions.
    Analytic,
    /// Solve the problem on the configured grid first.
    Numeric,
    /// Read `solution.csv` from the output directory of an earlier `solve`.
    SolutionFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub dt: f64,
    pub t_max: f64,
    pub k0: f64,
    pub i0: usize,
    pub event_tol: f64,
    /// Defaults to the analytic tail when `gamma > 1`, truncation otherwise.
    pub tail_handling: Option<TailHandling>,
    pub policy: PolicySource,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            dt: d.dt,
            t_max: d.t_max,
            k0: 0.5,
            i0: 1,
            event_tol: d.event_tol,
            tail_handling: None,
            policy: PolicySource::Analytic,
        }
    }
}

impl SimSection {
    pub fn build(&self, gamma: f64) -> Result<SimConfig> {
        let tail = self.tail_handling.unwrap_or(if gamma > 1.0 {
            TailHandling::AnalyticTail
        } else {
            TailHandling::Truncate
        });
        let cfg = SimConfig { dt: self.dt, t_max: self.t_max, event_tol: self.event_tol, tail };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Used when `--out-dir` is not given.
    pub directory: Option<String>,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: None, formats: vec![Format::Csv, Format::Json] }
    }
}

/// Tolerances checked by `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcceptanceSection {
    pub value_rel_tol: f64,
    pub threshold_cells: f64,
    pub switch_time_rel_tol: f64,
    /// Problem used for the closed-form side; defaults to `problem`.
    pub reference: Option<ProblemSection>,
}

impl Default for AcceptanceSection {
    fn default() -> Self {
        Self { value_rel_tol: 1e-3, threshold_cells: 1.0, switch_time_rel_tol: 1e-2, reference: None }
    }
}

/// Parses a configuration document. Only syntax, schema and version are
/// checked here; model invariants are left to the subcommands.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    if cfg.spec_version != SPEC_VERSION {
        return Err(CliError::Parse(format!(
            "unsupported spec_version {} (expected {SPEC_VERSION})",
            cfg.spec_version
        )));
    }
    Ok(cfg)
}
