//! Monte Carlo damage scenarios, loss statistics and reduction.

mod reduce;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispatch::singleton_curtailment;
use crate::grid::Network;
use crate::powerflow::{ens_timeline, RepairSchedule};
use crate::rng;
use crate::seismic::{sample_damage, PgaField, SeismicEvent};

pub use reduce::{forward_reduce, reduction_distance, wasserstein_1d};

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("scenario set is empty")]
    Empty,
    #[error("n_sce must be at least 1")]
    NoScenarios,
    #[error("return period must be >= 1, got {0}")]
    ReturnPeriod(f64),
    #[error("loss weights must be non-negative, got w1={w1}, w2={w2}")]
    LossWeights { w1: f64, w2: f64 },
    #[error("target size {k} out of range: {protected} protected, {available} scenarios")]
    TargetSize {
        k: usize,
        protected: usize,
        available: usize,
    },
    #[error("unknown scenario id {0}")]
    UnknownScenario(usize),
    #[error("scenario set refers to unknown component \"{0}\"")]
    UnknownComponent(String),
    #[error("scenario set lists {got} components, network has {expected}")]
    ComponentMismatch { expected: usize, got: usize },
}

/// One sampled damage state.
#[derive(Debug, Clone, PartialEq)]
pub struct DamageScenario {
    pub id: usize,
    /// Failure indicator per network component.
    pub failures: Vec<bool>,
    pub pga: Option<Vec<f64>>,
    pub loss: f64,
    pub ens_mwh: f64,
    pub weight: f64,
}

impl DamageScenario {
    pub fn failure_count(&self) -> usize {
        self.failures.iter().filter(|&&f| f).count()
    }

    pub fn failed_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.failures.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i)
    }
}

/// Weights of the scalar loss `w1·failures + w2·ENS`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w1: f64,
    pub w2: f64,
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.w1 >= 0.0 && self.w2 >= 0.0 {
            Ok(())
        } else {
            Err(ScenarioError::LossWeights { w1: self.w1, w2: self.w2 })
        }
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { w1: 1.0, w2: 1.0 }
    }
}

/// How ENS is estimated while scoring scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsMode {
    /// `Σ CL_d · t_d` with single-failure curtailment at the peak hour.
    #[default]
    Surrogate,
    /// Full timeline with every failed component repaired after its own
    /// repair duration.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub magnitude: f64,
    pub n_sce: usize,
    pub seed: u64,
    pub component_ids: Vec<String>,
    /// Size of the set this one was reduced from, if any.
    pub reduced_from: Option<usize>,
    pub scenarios: Vec<DamageScenario>,
}

impl ScenarioSet {
    pub fn total_weight(&self) -> f64 {
        self.scenarios.iter().map(|s| s.weight).sum()
    }

    pub fn get(&self, id: usize) -> Option<&DamageScenario> {
        self.scenarios.iter().find(|s| s.id == id)
    }

    pub fn loss_distribution(&self) -> Result<LossDistribution, ScenarioError> {
        LossDistribution::new(self.scenarios.iter().map(|s| (s.loss, s.weight)))
    }

    pub fn to_document(&self) -> ScenarioSetDocument {
        ScenarioSetDocument {
            magnitude: self.magnitude,
            n_sce: self.n_sce,
            seed: self.seed,
            reduced_from: self.reduced_from,
            component_ids: self.component_ids.clone(),
            scenarios: self
                .scenarios
                .iter()
                .map(|s| ScenarioRecord {
                    id: s.id,
                    failed: s.failed_indices().map(|c| self.component_ids[c].clone()).collect(),
                    loss: s.loss,
                    ens_mwh: s.ens_mwh,
                    weight: s.weight,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("scenario set serialises")
    }

    /// Checks that the set was generated for `net`'s component list.
    pub fn check_network(&self, net: &Network) -> Result<(), ScenarioError> {
        if self.component_ids.len() != net.component_count() {
            return Err(ScenarioError::ComponentMismatch {
                expected: net.component_count(),
                got: self.component_ids.len(),
            });
        }
        for (id, c) in self.component_ids.iter().zip(&net.components) {
            if *id != c.id {
                return Err(ScenarioError::UnknownComponent(id.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRecord {
    pub id: usize,
    pub failed: Vec<String>,
    pub loss: f64,
    pub ens_mwh: f64,
    pub weight: f64,
}

/// On-disk form of a [`ScenarioSet`]; failures are listed by component id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSetDocument {
    pub magnitude: f64,
    pub n_sce: usize,
    pub seed: u64,
    #[serde(default)]
    pub reduced_from: Option<usize>,
    pub component_ids: Vec<String>,
    pub scenarios: Vec<ScenarioRecord>,
}

impl ScenarioSetDocument {
    pub fn into_set(self) -> Result<ScenarioSet, ScenarioError> {
        let index: std::collections::HashMap<&str, usize> = self
            .component_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let scenarios = self
            .scenarios
            .iter()
            .map(|r| {
                let mut failures = vec![false; self.component_ids.len()];
                for id in &r.failed {
                    let c = *index
                        .get(id.as_str())
                        .ok_or_else(|| ScenarioError::UnknownComponent(id.clone()))?;
                    failures[c] = true;
                }
                Ok(DamageScenario {
                    id: r.id,
                    failures,
                    pga: None,
                    loss: r.loss,
                    ens_mwh: r.ens_mwh,
                    weight: r.weight,
                })
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        Ok(ScenarioSet {
            magnitude: self.magnitude,
            n_sce: self.n_sce,
            seed: self.seed,
            reduced_from: self.reduced_from,
            component_ids: self.component_ids,
            scenarios,
        })
    }
}

pub fn parse_scenario_set(text: &str) -> crate::Result<ScenarioSet> {
    let doc: ScenarioSetDocument =
        serde_json::from_str(text).map_err(|e| crate::Error::json("scenario set", e))?;
    Ok(doc.into_set()?)
}

/// `w1·(failure count) + w2·ens_mwh`.
pub fn system_loss(
    scenario: &DamageScenario,
    ens_mwh: f64,
    weights: LossWeights,
) -> Result<f64, ScenarioError> {
    weights.validate()?;
    Ok(weights.w1 * scenario.failure_count() as f64 + weights.w2 * ens_mwh)
}

/// Samples and scores `n_sce` scenarios with uniform weights. Scenario `s`
/// draws its residuals and failures from stream `s` under `seed`, so the set
/// does not depend on the thread count.
pub fn generate_scenarios(
    net: &Network,
    event: &SeismicEvent,
    n_sce: usize,
    weights: LossWeights,
    ens_mode: EnsMode,
    seed: u64,
) -> crate::Result<ScenarioSet> {
    if n_sce == 0 {
        return Err(ScenarioError::NoScenarios.into());
    }
    event.validate()?;
    weights.validate()?;
    let curtailment = match ens_mode {
        EnsMode::Surrogate => Some(singleton_curtailment(net)?),
        EnsMode::Exact => None,
    };
    let scenarios = (0..n_sce)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng::stream(seed, s as u64);
            let field = PgaField::sample(net, event, &mut rng)?;
            let mut sc = sample_damage(net, &field, &mut rng)?;
            sc.id = s;
            sc.weight = 1.0 / n_sce as f64;
            sc.ens_mwh = match &curtailment {
                Some(cl) => sc
                    .failed_indices()
                    .map(|c| cl[c] * net.components[c].repair_duration)
                    .sum(),
                None => exact_ens(net, &sc)?,
            };
            sc.loss = system_loss(&sc, sc.ens_mwh, weights)?;
            Ok(sc)
        })
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(ScenarioSet {
        magnitude: event.magnitude,
        n_sce,
        seed,
        component_ids: net.components.iter().map(|c| c.id.clone()).collect(),
        reduced_from: None,
        scenarios,
    })
}

fn exact_ens(net: &Network, sc: &DamageScenario) -> crate::Result<f64> {
    let schedule = RepairSchedule::from_completions(
        net,
        sc.failed_indices().map(|c| (c, net.components[c].repair_duration)),
    );
    Ok(ens_timeline(net, &sc.failures, &schedule, net.peak_step())?.ens_mwh)
}

/// Weighted empirical loss distribution over distinct loss values.
#[derive(Debug, Clone, PartialEq)]
pub struct LossDistribution {
    /// Distinct losses, ascending.
    pub losses: Vec<f64>,
    /// Probability mass at each distinct loss, normalised to 1.
    pub weights: Vec<f64>,
}

impl LossDistribution {
    pub fn new(points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, ScenarioError> {
        let mut pts: Vec<(f64, f64)> = points.into_iter().collect();
        if pts.is_empty() {
            return Err(ScenarioError::Empty);
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pts.iter().map(|p| p.1).sum();
        let mut losses: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (l, w) in pts {
            if losses.last() == Some(&l) {
                *weights.last_mut().unwrap() += w;
            } else {
                losses.push(l);
                weights.push(w);
            }
        }
        if total > 0.0 {
            weights.iter_mut().for_each(|w| *w /= total);
        }
        Ok(LossDistribution { losses, weights })
    }

    /// `F_L(l) = Pr[L ≤ l]`.
    pub fn cdf(&self, l: f64) -> f64 {
        let k = self.losses.partition_point(|&x| x <= l);
        if k == self.losses.len() {
            return 1.0;
        }
        self.weights[..k].iter().sum::<f64>().min(1.0)
    }

    /// `Pr[L ≥ l]`.
    pub fn exceedance(&self, l: f64) -> f64 {
        let k = self.losses.partition_point(|&x| x < l);
        if k == 0 {
            return 1.0;
        }
        self.weights[k..].iter().sum::<f64>().min(1.0)
    }

    pub fn max_loss(&self) -> f64 {
        *self.losses.last().expect("non-empty")
    }
}

/// Smallest loss `l` in the support with `Pr[L ≥ l] ≤ 1/T`; the largest loss
/// if no support point qualifies.
pub fn return_period_loss(dist: &LossDistribution, period: f64) -> Result<f64, ScenarioError> {
    if !(period >= 1.0) {
        return Err(ScenarioError::ReturnPeriod(period));
    }
    if dist.losses.is_empty() {
        return Err(ScenarioError::Empty);
    }
    let target = 1.0 / period;
    // exceedance at losses[i] as a suffix sum
    let mut tail = vec![0.0; dist.losses.len()];
    let mut acc = 0.0;
    for i in (0..dist.losses.len()).rev() {
        acc += dist.weights[i];
        tail[i] = acc;
    }
    tail[0] = 1.0;
    Ok(dist
        .losses
        .iter()
        .zip(&tail)
        .find(|(_, &p)| p <= target + 1e-12)
        .map_or(dist.max_loss(), |(&l, _)| l))
}

/// For each return period, the scenario closest in loss to `L_T` (ties: larger
/// weight, then lower id). Duplicates are dropped, first occurrence kept.
pub fn select_representatives(
    set: &ScenarioSet,
    periods: &[f64],
) -> Result<Vec<usize>, ScenarioError> {
    let dist = set.loss_distribution()?;
    let mut out = Vec::new();
    for &period in periods {
        let target = return_period_loss(&dist, period)?;
        let best = set
            .scenarios
            .iter()
            .min_by(|a, b| {
                (a.loss - target)
                    .abs()
                    .total_cmp(&(b.loss - target).abs())
                    .then(b.weight.total_cmp(&a.weight))
                    .then(a.id.cmp(&b.id))
            })
            .expect("non-empty");
        if !out.contains(&best.id) {
            out.push(best.id);
        }
    }
    Ok(out)
}
