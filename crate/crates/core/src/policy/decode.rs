//! Autoregressive plan construction.
//!
//! Each step picks one (crew, component) pair from a masked distribution.
//! A component is offered only to crews of its own depot and only while it
//! is unrepaired; within a round every crew is picked at most once, and a
//! new round opens when no valid pair is left.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::autodiff::{Graph, Var};
use super::features::{featurize, FeatureStats, GLOBAL_FEATURES, PAIR_FEATURES};
use super::model::{encode_graph, step_graph, Encoded, PolicyModel, StepInputs};
use super::tensor::Matrix;
use super::PolicyError;
use crate::dispatch::{objective, schedule_plan, DispatchInstance, DispatchPlan, ObjectiveBreakdown, Route};
use crate::grid::Point;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    Greedy,
    Sample,
}

/// Simulated dispatch state during decoding.
pub(crate) struct Env<'a> {
    inst: &'a DispatchInstance,
    stats: FeatureStats,
    cluster: Vec<usize>,
    /// `(depot, crew)` in depot-major order.
    crews: Vec<(usize, usize)>,
    pos: Vec<Point>,
    avail: Vec<f64>,
    used: Vec<bool>,
    routes: Vec<Vec<usize>>,
    remaining: Vec<bool>,
    n_remaining: usize,
    cluster_remaining: Vec<usize>,
    makespan: f64,
    reward_scale: f64,
}

impl<'a> Env<'a> {
    pub fn new(inst: &'a DispatchInstance, features: &super::features::FeatureVector, reward_scale: f64) -> Self {
        let crews: Vec<(usize, usize)> = inst
            .depots
            .iter()
            .enumerate()
            .flat_map(|(d, dep)| (0..dep.crew_count).map(move |k| (d, k)))
            .collect();
        let mut cluster_remaining = vec![0; inst.depots.len()];
        for &d in &features.cluster {
            cluster_remaining[d] += 1;
        }
        Env {
            inst,
            stats: features.stats,
            cluster: features.cluster.clone(),
            pos: crews.iter().map(|&(d, _)| inst.depots[d].coords).collect(),
            avail: vec![0.0; crews.len()],
            used: vec![false; crews.len()],
            routes: vec![Vec::new(); crews.len()],
            remaining: vec![true; inst.failed.len()],
            n_remaining: inst.failed.len(),
            cluster_remaining,
            makespan: 0.0,
            reward_scale,
            crews,
        }
    }

    pub fn done(&self) -> bool {
        self.n_remaining == 0
    }

    fn valid(&self, c: usize, j: usize) -> bool {
        self.remaining[j] && !self.used[c] && self.cluster[j] == self.crews[c].0
    }

    /// Valid (crew, component) pairs, row-major; opens a new round first when
    /// the current one is exhausted.
    pub fn action_mask(&mut self) -> Vec<bool> {
        let n = self.inst.failed.len();
        let build = |env: &Self| -> Vec<bool> {
            (0..env.crews.len() * n).map(|k| env.valid(k / n, k % n)).collect()
        };
        let mask = build(self);
        if mask.iter().any(|&b| b) || self.done() {
            return mask;
        }
        self.used.iter_mut().for_each(|u| *u = false);
        build(self)
    }

    fn cross_mask(&self) -> Vec<bool> {
        let n = self.inst.failed.len();
        (0..self.crews.len() * n)
            .map(|k| self.remaining[k % n] && self.cluster[k % n] == self.crews[k / n].0)
            .collect()
    }

    fn crew_features(&self) -> Matrix {
        let s = &self.stats;
        let n = self.inst.failed.len() as f64;
        let rows: Vec<Vec<f64>> = self
            .crews
            .iter()
            .enumerate()
            .map(|(c, &(d, _))| {
                let home = self.inst.depots[d].coords;
                vec![
                    s.rel_x(self.pos[c]),
                    s.rel_y(self.pos[c]),
                    self.avail[c] / s.tau,
                    s.rel_x(home),
                    s.rel_y(home),
                    self.cluster_remaining[d] as f64 / n,
                    if self.used[c] { 1.0 } else { 0.0 },
                    self.makespan / s.tau,
                ]
            })
            .collect();
        Matrix::from_rows(&rows)
    }

    fn completion(&self, c: usize, j: usize) -> (f64, f64) {
        let f = &self.inst.failed[j];
        let travel = self.inst.travel(self.pos[c], f.coords);
        (travel, self.avail[c] + travel + f.repair_duration)
    }

    fn pair_features(&self, mask: &[bool]) -> Matrix {
        let s = &self.stats;
        let n = self.inst.failed.len();
        let mut m = Matrix::zeros(mask.len(), PAIR_FEATURES);
        for (k, _) in mask.iter().enumerate().filter(|(_, &ok)| ok) {
            let (c, j) = (k / n, k % n);
            let f = &self.inst.failed[j];
            let (travel, done) = self.completion(c, j);
            let load = f.curtailed_load / s.load_scale;
            m.row_mut(k).copy_from_slice(&[
                travel / s.tau,
                done / s.tau,
                load * done / s.tau,
                load * s.tau / (travel + f.repair_duration),
                (done - self.makespan).max(0.0) / s.tau,
            ]);
        }
        m
    }

    fn globals(&self, step: usize) -> Matrix {
        let n = self.inst.failed.len() as f64;
        Matrix::from_vec(
            1,
            GLOBAL_FEATURES,
            vec![
                self.n_remaining as f64 / n,
                self.makespan / self.stats.tau,
                step as f64 / n,
                self.inst.gamma,
            ],
        )
    }

    fn pool(&self) -> Matrix {
        let w = 1.0 / self.n_remaining.max(1) as f64;
        Matrix::from_vec(
            1,
            self.remaining.len(),
            self.remaining.iter().map(|&r| if r { w } else { 0.0 }).collect(),
        )
    }

    /// Applies a valid action; returns its shaped reward. Rewards over an
    /// episode sum to `−objective / reward_scale`.
    pub fn step(&mut self, c: usize, j: usize) -> f64 {
        debug_assert!(self.valid(c, j));
        let g = self.inst.gamma;
        let (_, done) = self.completion(c, j);
        let load = self.inst.failed[j].curtailed_load;
        let dt = (done - self.makespan).max(0.0);
        self.pos[c] = self.inst.failed[j].coords;
        self.avail[c] = done;
        self.used[c] = true;
        self.routes[c].push(j);
        self.remaining[j] = false;
        self.n_remaining -= 1;
        self.cluster_remaining[self.cluster[j]] -= 1;
        self.makespan = self.makespan.max(done);
        -((1.0 - g) * load * done + g * dt) / self.reward_scale
    }

    pub fn routes(&self) -> Vec<Route> {
        self.crews
            .iter()
            .zip(&self.routes)
            .map(|(&(depot, crew), jobs)| Route {
                depot,
                crew,
                jobs: jobs.clone(),
            })
            .collect()
    }

    fn inputs<'m>(&self, step: usize, cross_mask: &'m [bool], action_mask: &'m [bool]) -> StepInputs<'m> {
        StepInputs {
            crew: self.crew_features(),
            pair: self.pair_features(action_mask),
            globals: self.globals(step),
            pool: self.pool(),
            cross_mask,
            action_mask,
        }
    }
}

/// Scalars recorded at one decoding step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct StepRecord {
    /// Flat index `crew · n + component`.
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
}

/// Graph handles of one step, kept when differentiating.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepVars {
    pub log_probs: Var,
    pub action: usize,
    pub value: Var,
}

pub(crate) struct EpisodeRun {
    pub steps: Vec<StepRecord>,
    pub vars: Vec<StepVars>,
    pub routes: Vec<Route>,
}

/// Runs one episode on an encoded instance. With `keep` the step graphs stay
/// on the tape for differentiation; otherwise each is dropped after use.
pub(crate) fn run_episode(
    g: &mut Graph,
    model: &PolicyModel,
    enc: &Encoded,
    inst: &DispatchInstance,
    features: &super::features::FeatureVector,
    reward_scale: f64,
    keep: bool,
    mut choose: impl FnMut(usize, &[f64], &[bool]) -> usize,
) -> Result<EpisodeRun, PolicyError> {
    let n = inst.failed.len();
    let mut env = Env::new(inst, features, reward_scale);
    let mut steps = Vec::with_capacity(n);
    let mut vars = Vec::new();
    let mark = g.len();
    for step in 0..n {
        let action_mask = env.action_mask();
        let cross_mask = env.cross_mask();
        let inputs = env.inputs(step, &cross_mask, &action_mask);
        let (log_probs, value) = step_graph(g, model, enc, &inputs);
        let lp = g.value(log_probs);
        let action = choose(step, &lp.data, &action_mask);
        if !action_mask.get(action).copied().unwrap_or(false) {
            return Err(PolicyError::InvalidAction { step, action });
        }
        let log_prob = lp.data[action];
        let v = g.scalar(value);
        if keep {
            vars.push(StepVars {
                log_probs,
                action,
                value,
            });
        } else {
            g.truncate(mark);
        }
        let reward = env.step(action / n, action % n);
        steps.push(StepRecord {
            action,
            log_prob,
            value: v,
            reward,
        });
    }
    debug_assert!(env.done());
    Ok(EpisodeRun {
        steps,
        vars,
        routes: env.routes(),
    })
}

pub(crate) fn argmax(log_probs: &[f64], mask: &[bool]) -> usize {
    let mut best = usize::MAX;
    for (k, (&v, &ok)) in log_probs.iter().zip(mask).enumerate() {
        if ok && (best == usize::MAX || v > log_probs[best]) {
            best = k;
        }
    }
    best
}

pub(crate) fn sample(log_probs: &[f64], mask: &[bool], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = usize::MAX;
    for (k, (&v, &ok)) in log_probs.iter().zip(mask).enumerate() {
        if ok {
            acc += v.exp();
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    // rounding left `acc` slightly below 1
    last
}

/// A decoded plan with the per-step decisions that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub plan: DispatchPlan,
    pub objective: ObjectiveBreakdown,
    /// `(crew index in depot-major order, component index)` per step.
    pub actions: Vec<(usize, usize)>,
    pub log_probs: Vec<f64>,
}

fn finish(inst: &DispatchInstance, run: EpisodeRun) -> Result<DecodeOutcome, PolicyError> {
    let n = inst.failed.len();
    let plan = schedule_plan(inst, &run.routes)?;
    let objective = objective(&plan, inst)?;
    Ok(DecodeOutcome {
        plan,
        objective,
        actions: run.steps.iter().map(|s| (s.action / n, s.action % n)).collect(),
        log_probs: run.steps.iter().map(|s| s.log_prob).collect(),
    })
}

/// Component embeddings, one row per failed component.
pub fn encode(model: &PolicyModel, instance: &DispatchInstance) -> Result<Matrix, PolicyError> {
    instance.validate()?;
    let features = featurize(instance);
    let mut g = Graph::new(&model.params.tensors);
    let enc = encode_graph(&mut g, model, &features.components);
    Ok(g.value(enc.h).clone())
}

/// Builds a plan by greedy (arg-max) or sampled decoding. Greedy decoding
/// ignores `rng`.
pub fn decode_plan(
    model: &PolicyModel,
    instance: &DispatchInstance,
    mode: DecodeMode,
    rng: &mut Rng,
) -> Result<DecodeOutcome, PolicyError> {
    instance.validate()?;
    let features = featurize(instance);
    let mut g = Graph::new(&model.params.tensors);
    let enc = encode_graph(&mut g, model, &features.components);
    let run = run_episode(&mut g, model, &enc, instance, &features, 1.0, false, |_, lp, mask| match mode {
        DecodeMode::Greedy => argmax(lp, mask),
        DecodeMode::Sample => sample(lp, mask, rng),
    })?;
    finish(instance, run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutcome {
    pub plan: DispatchPlan,
    pub objective: ObjectiveBreakdown,
    /// 0 for the greedy decode, `s` for the `s`-th sample.
    pub chosen: usize,
    /// Objective value of every decode, greedy first.
    pub values: Vec<f64>,
}

/// Best of one greedy decode and `samples − 1` sampled decodes. Sample `s`
/// draws from stream `s` under `seed`; the encoder runs once.
pub fn policy_dispatch(
    model: &PolicyModel,
    instance: &DispatchInstance,
    samples: usize,
    seed: u64,
) -> Result<PolicyOutcome, PolicyError> {
    instance.validate()?;
    let features = featurize(instance);
    let mut g = Graph::new(&model.params.tensors);
    let enc = encode_graph(&mut g, model, &features.components);
    let mut best: Option<(DecodeOutcome, usize)> = None;
    let mut values = Vec::with_capacity(samples.max(1));
    for s in 0..samples.max(1) {
        let mut rng = rng::stream(seed, s as u64);
        let run = run_episode(&mut g, model, &enc, instance, &features, 1.0, false, |_, lp, mask| {
            if s == 0 {
                argmax(lp, mask)
            } else {
                sample(lp, mask, &mut rng)
            }
        })?;
        let out = finish(instance, run)?;
        values.push(out.objective.value);
        if best.as_ref().is_none_or(|(b, _)| out.objective.value < b.objective.value) {
            best = Some((out, s));
        }
    }
    let (out, chosen) = best.expect("at least one decode");
    Ok(PolicyOutcome {
        plan: out.plan,
        objective: out.objective,
        chosen,
        values,
    })
}
