//! Run configuration.
//!
//! A run is described by one JSON document. Relative paths inside it are
//! resolved against the directory of the document.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::dispatch::{ExactLimits, InstanceFamily, DEFAULT_GAMMA, DEFAULT_SPEED_KMH};
use crate::ga::GaConfig;
use crate::policy::{ModelConfig, PpoConfig};
use crate::scenario::{EnsMode, LossWeights};
use crate::seismic::SeismicEvent;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exact,
    Ga,
    Policy,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Exact => "exact",
            SolverKind::Ga => "ga",
            SolverKind::Policy => "policy",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub n_sce: usize,
    pub weights: LossWeights,
    /// Return periods whose representatives survive reduction.
    pub periods: Vec<f64>,
    /// Size of the reduced set.
    pub k: usize,
    pub ens_mode: EnsMode,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_sce: 100,
            weights: LossWeights::default(),
            periods: vec![2.0, 10.0, 50.0, 100.0],
            k: 8,
            ens_mode: EnsMode::Surrogate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExactConfig {
    pub max_components: usize,
    pub max_crews: usize,
    /// Seconds; `null` disables the timeout.
    pub timeout_secs: Option<f64>,
}

impl Default for ExactConfig {
    fn default() -> Self {
        let l = ExactLimits::default();
        ExactConfig {
            max_components: l.max_components,
            max_crews: l.max_crews,
            timeout_secs: l.timeout.map(|t| t.as_secs_f64()),
        }
    }
}

impl ExactConfig {
    pub fn limits(&self) -> ExactLimits {
        ExactLimits {
            max_components: self.max_components,
            max_crews: self.max_crews,
            timeout: self.timeout_secs.map(Duration::from_secs_f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    /// Trained checkpoint; required when the policy solver is selected.
    pub model: Option<PathBuf>,
    pub samples: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            model: None,
            samples: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DispatchConfig {
    pub gamma: f64,
    /// km/h.
    pub speed: f64,
    pub solvers: Vec<SolverKind>,
    pub exact: ExactConfig,
    pub ga: GaConfig,
    pub policy: PolicyConfig,
}

impl Default for DispatchConfig {
    fn default() -> Self {
        DispatchConfig {
            gamma: DEFAULT_GAMMA,
            speed: DEFAULT_SPEED_KMH,
            solvers: vec![SolverKind::Exact, SolverKind::Ga],
            exact: ExactConfig::default(),
            ga: GaConfig::default(),
            policy: PolicyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub family: InstanceFamily,
    pub model: ModelConfig,
    pub ppo: PpoConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: PathBuf,
    pub event: SeismicEvent,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub dispatch: DispatchConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    /// Parses and validates a document; relative paths are joined onto
    /// `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| config_error(format!("at `{}`: {}", e.path(), e.inner())))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_json(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.network);
        join(&mut self.output);
        if let Some(m) = self.dispatch.policy.model.as_mut() {
            join(m);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.network.is_file() {
            return Err(config_error(format!("network file {} does not exist", self.network.display())));
        }
        self.event.validate()?;
        let s = &self.scenario;
        s.weights.validate()?;
        if s.n_sce == 0 {
            return Err(config_error("scenario.n_sce must be >= 1"));
        }
        if s.k == 0 || s.k > s.n_sce {
            return Err(config_error(format!("scenario.k must lie in [1, n_sce = {}], got {}", s.n_sce, s.k)));
        }
        if let Some(p) = s.periods.iter().find(|p| !(p.is_finite() && **p >= 1.0)) {
            return Err(config_error(format!("scenario.periods entries must be >= 1, got {p}")));
        }
        if s.periods.len() > s.k {
            return Err(config_error(format!(
                "scenario.k = {} cannot keep {} return-period representatives",
                s.k,
                s.periods.len()
            )));
        }
        let d = &self.dispatch;
        if !(0.0..=1.0).contains(&d.gamma) {
            return Err(config_error(format!("dispatch.gamma must lie in [0, 1], got {}", d.gamma)));
        }
        if !(d.speed.is_finite() && d.speed > 0.0) {
            return Err(config_error(format!("dispatch.speed must be > 0, got {}", d.speed)));
        }
        if d.solvers.is_empty() {
            return Err(config_error("dispatch.solvers is empty"));
        }
        let mut seen = d.solvers.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != d.solvers.len() {
            return Err(config_error("dispatch.solvers lists a solver twice"));
        }
        if d.exact.max_components == 0 || d.exact.max_crews == 0 {
            return Err(config_error("dispatch.exact limits must be >= 1"));
        }
        if let Some(t) = d.exact.timeout_secs {
            if !(t.is_finite() && t > 0.0) {
                return Err(config_error(format!("dispatch.exact.timeout_secs must be > 0, got {t}")));
            }
        }
        d.ga.validate()?;
        if d.policy.samples == 0 {
            return Err(config_error("dispatch.policy.samples must be >= 1"));
        }
        if d.solvers.contains(&SolverKind::Policy) {
            match &d.policy.model {
                None => return Err(config_error("policy solver selected but dispatch.policy.model is unset")),
                Some(m) if !m.is_file() => {
                    return Err(config_error(format!("policy model {} does not exist", m.display())))
                }
                Some(_) => {}
            }
        }
        self.training.model.validate()?;
        self.training.ppo.validate()?;
        Ok(())
    }
}
