use std::path::{Path, PathBuf};

use langevin_dp::planner::{Mode, PlanRequest, ProcessKind, DEFAULT_C};
use langevin_dp::potentials::{Curvature, PotentialSpec};
use langevin_dp::privacy::{GibbsLoss, MechanismConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub fn read_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_relative() {
        base.join(p)
    } else {
        p.to_path_buf()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dynamics {
    #[default]
    Overdamped,
    Underdamped { gamma: f64, mu: f64 },
}

/// Where the plan's curvature comes from: a builtin potential, or a declared bracket.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Potential { potential: PotentialSpec },
    Declared { dim: usize, curvature: Curvature },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSettings {
    pub alpha: f64,
    pub eps: f64,
    #[serde(default = "one_sided")]
    pub mode: Mode,
    #[serde(default)]
    pub dynamics: Dynamics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

fn one_sided() -> Mode {
    Mode::OneSided
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    #[serde(flatten)]
    pub target: Target,
    pub plan: PlanSettings,
}

/// Strongly convex targets are planned in canonical form (smoothness `L/m`);
/// targets with `m = 0` use the Lipschitz regime with their declared `B`.
pub fn plan_request(dim: usize, curv: Curvature, s: &PlanSettings, c_override: Option<f64>) -> CliResult<PlanRequest> {
    curv.validate()?;
    let m = curv.strong_convexity;
    let (process, smoothness) = match (s.dynamics, m > 0.0) {
        (Dynamics::Overdamped, true) => (ProcessKind::OverdampedSc, curv.smoothness / m),
        (Dynamics::Underdamped { gamma, mu }, true) => (ProcessKind::Underdamped { gamma, mu }, curv.smoothness / m),
        (Dynamics::Overdamped, false) => {
            let b = curv.lipschitz.ok_or_else(|| {
                CliError::Precondition("a potential with m = 0 needs a declared Lipschitz bound".into())
            })?;
            (ProcessKind::OverdampedLip { b }, curv.smoothness)
        }
        (Dynamics::Underdamped { .. }, false) => {
            return Err(CliError::Precondition("underdamped plans need a strongly convex potential".into()))
        }
    };
    Ok(PlanRequest {
        alpha: s.alpha,
        eps: s.eps,
        smoothness,
        dim,
        process,
        mode: s.mode,
        c: c_override.or(s.c).unwrap_or(DEFAULT_C),
        tau: s.tau,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub plan: PathBuf,
    pub potential: PotentialSpec,
    pub n_chains: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    pub suites: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorConfig {
    /// CSV of records; for the logistic loss the last column is the label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<Vec<f64>>>,
    /// Required when the dataset is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    pub loss: GibbsLoss,
    pub beta: f64,
    pub lambda: f64,
    pub norm_bound: f64,
    pub mechanism: MechanismConfig,
    #[serde(default = "one_run")]
    pub runs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn one_run() -> usize {
    1
}

pub fn require_seed(flag: Option<u64>, config: Option<u64>) -> CliResult<u64> {
    flag.or(config)
        .ok_or_else(|| CliError::Config("a seed is required: pass --seed or set `seed` in the config".into()))
}
