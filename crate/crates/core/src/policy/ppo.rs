//! Proximal policy optimization for the dispatch policy.
//!
//! Rollouts sample plans from the current policy; every step's reward is the
//! negative increment of the dispatch objective, scaled by the greedy
//! heuristic's objective on the same instance so that returns of different
//! instances are comparable. Updates minimize the clipped surrogate plus a
//! squared value error, minus an entropy bonus.

use rand::seq::{IndexedRandom, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::autodiff::{Graph, Var};
use super::decode::{run_episode, sample};
use super::features::featurize;
use super::model::{encode_graph, ModelConfig, PolicyModel};
use super::tensor::Matrix;
use super::PolicyError;
use crate::dispatch::{greedy_dispatch, DispatchInstance, InstanceFamily};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub iterations: usize,
    pub episodes_per_iteration: usize,
    pub epochs: usize,
    pub minibatches: usize,
    pub clip: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub seed: u64,
    /// Divergence guard: abort when the mean reward falls by more than
    /// `divergence_factor` interquartile ranges across this many iterations.
    pub divergence_window: usize,
    pub divergence_factor: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            iterations: 500,
            episodes_per_iteration: 32,
            epochs: 4,
            minibatches: 2,
            clip: 0.2,
            discount: 1.0,
            gae_lambda: 0.95,
            learning_rate: 3e-4,
            max_grad_norm: 1.0,
            value_coef: 0.5,
            entropy_coef: 0.01,
            seed: 3,
            divergence_window: 20,
            divergence_factor: 5.0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: &str| Err(PolicyError::Config(format!("ppo: {m}")));
        if self.episodes_per_iteration == 0 || self.epochs == 0 || self.minibatches == 0 {
            return bad("episodes, epochs and minibatches must be positive");
        }
        if self.minibatches > self.episodes_per_iteration {
            return bad("more minibatches than episodes");
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return bad("clip must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.discount) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("discount and gae_lambda must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0) || !(self.max_grad_norm > 0.0) {
            return bad("learning_rate and max_grad_norm must be positive");
        }
        if !(self.value_coef >= 0.0) || !(self.entropy_coef >= 0.0) || !(self.divergence_factor > 0.0) {
            return bad("coefficients must be non-negative");
        }
        Ok(())
    }
}

/// Where training instances come from.
pub trait InstanceSource: Sync {
    fn draw(&self, rng: &mut Rng) -> DispatchInstance;
}

impl InstanceSource for InstanceFamily {
    fn draw(&self, rng: &mut Rng) -> DispatchInstance {
        self.sample(rng)
    }
}

/// Uniform choice from a fixed list.
impl InstanceSource for Vec<DispatchInstance> {
    fn draw(&self, rng: &mut Rng) -> DispatchInstance {
        self.choose(rng).expect("non-empty instance list").clone()
    }
}

/// One sampled episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeBuffer {
    pub instance: DispatchInstance,
    /// Flat action index `crew · n + component` per step.
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Objective of the greedy heuristic, dividing every reward.
    pub reward_scale: f64,
}

impl EpisodeBuffer {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let n = self.actions.len();
        if [self.log_probs.len(), self.rewards.len(), self.values.len(), self.dones.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(PolicyError::Buffer("sequence lengths differ".into()));
        }
        if self.rewards.iter().any(|r| !r.is_finite()) {
            return Err(PolicyError::Buffer("non-finite reward".into()));
        }
        if n > 0 && (!self.dones[n - 1] || self.dones[..n - 1].iter().any(|&d| d)) {
            return Err(PolicyError::Buffer("only the last step may be terminal".into()));
        }
        Ok(())
    }
}

fn reward_scale(instance: &DispatchInstance) -> Result<f64, PolicyError> {
    let v = greedy_dispatch(instance)?.1.value;
    Ok(if v > 1e-9 { v } else { 1.0 })
}

/// Samples one episode from the current policy.
pub fn collect_episode(
    model: &PolicyModel,
    instance: DispatchInstance,
    rng: &mut Rng,
) -> Result<EpisodeBuffer, PolicyError> {
    instance.validate()?;
    let scale = reward_scale(&instance)?;
    let features = featurize(&instance);
    let mut g = Graph::new(&model.params.tensors);
    let enc = encode_graph(&mut g, model, &features.components);
    let run = run_episode(&mut g, model, &enc, &instance, &features, scale, false, |_, lp, mask| {
        sample(lp, mask, rng)
    })?;
    let n = run.steps.len();
    Ok(EpisodeBuffer {
        actions: run.steps.iter().map(|s| s.action).collect(),
        log_probs: run.steps.iter().map(|s| s.log_prob).collect(),
        rewards: run.steps.iter().map(|s| s.reward).collect(),
        values: run.steps.iter().map(|s| s.value).collect(),
        dones: (0..n).map(|t| t + 1 == n).collect(),
        reward_scale: scale,
        instance,
    })
}

/// Generalized advantage estimates and the matching return targets.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], discount: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + discount * next_value * live - values[t];
        next_adv = delta + discount * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Per-step targets of an update.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

/// Advantages normalized to zero mean and unit variance across the batch.
pub fn batch_targets(batch: &[EpisodeBuffer], cfg: &PpoConfig) -> Vec<Targets> {
    let mut out: Vec<Targets> = batch
        .iter()
        .map(|e| {
            let (advantages, returns) = gae(&e.rewards, &e.values, &e.dones, cfg.discount, cfg.gae_lambda);
            Targets { advantages, returns }
        })
        .collect();
    let all: Vec<f64> = out.iter().flat_map(|t| t.advantages.iter().copied()).collect();
    let n = all.len().max(1) as f64;
    let mean = all.iter().sum::<f64>() / n;
    let std = (all.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n).sqrt().max(1e-8);
    for t in &mut out {
        t.advantages.iter_mut().for_each(|a| *a = (*a - mean) / std);
    }
    out
}

/// Averages of the loss terms over the steps of a minibatch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    /// Share of steps whose ratio lies outside `[1 − ε, 1 + ε]`.
    pub clip_fraction: f64,
}

impl LossBreakdown {
    fn add(&mut self, o: &LossBreakdown) {
        self.total += o.total;
        self.policy += o.policy;
        self.value += o.value;
        self.entropy += o.entropy;
        self.clip_fraction += o.clip_fraction;
    }
}

/// One ratio term of the clipped surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateTerm {
    pub ratio: f64,
    pub advantage: f64,
    /// `min(r·A, clamp(r, 1 − ε, 1 + ε)·A)`.
    pub objective: f64,
}

fn episode_loss(
    model: &PolicyModel,
    ep: &EpisodeBuffer,
    targets: &Targets,
    cfg: &PpoConfig,
    weight: f64,
    want_grads: bool,
) -> Result<(LossBreakdown, Vec<SurrogateTerm>, Option<Vec<Matrix>>), PolicyError> {
    let features = featurize(&ep.instance);
    let mut g = Graph::new(&model.params.tensors);
    let enc = encode_graph(&mut g, model, &features.components);
    let run = run_episode(&mut g, model, &enc, &ep.instance, &features, ep.reward_scale, true, |t, _, _| {
        ep.actions[t]
    })?;
    let mut terms: Vec<Var> = Vec::with_capacity(run.vars.len());
    let mut parts = LossBreakdown::default();
    let mut surrogate = Vec::with_capacity(run.vars.len());
    for (t, sv) in run.vars.iter().enumerate() {
        let adv = targets.advantages[t];
        let lp = g.select(sv.log_probs, sv.action);
        let old = g.constant(Matrix::filled(1, 1, ep.log_probs[t]));
        let diff = g.sub(lp, old);
        let ratio = g.exp(diff);
        let s1 = g.scale(ratio, adv);
        let clamped = g.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
        let s2 = g.scale(clamped, adv);
        let surr = g.minimum(s1, s2);
        let pol = g.scale(surr, -1.0);

        let ret = g.constant(Matrix::filled(1, 1, targets.returns[t]));
        let err = g.sub(sv.value, ret);
        let vl = g.square(err);

        let p = g.exp(sv.log_probs);
        let plogp = g.mul(p, sv.log_probs);
        let neg_ent = g.sum(plogp);

        let vl_w = g.scale(vl, cfg.value_coef);
        let ent_w = g.scale(neg_ent, cfg.entropy_coef);
        terms.push(g.add_n(&[pol, vl_w, ent_w]));

        let r = g.scalar(ratio);
        surrogate.push(SurrogateTerm {
            ratio: r,
            advantage: adv,
            objective: g.scalar(surr),
        });
        parts.policy += -g.scalar(surr) * weight;
        parts.value += g.scalar(vl) * weight;
        parts.entropy += -g.scalar(neg_ent) * weight;
        if r < 1.0 - cfg.clip || r > 1.0 + cfg.clip {
            parts.clip_fraction += weight;
        }
    }
    let sum = g.add_n(&terms);
    let loss = g.scale(sum, weight);
    parts.total = g.scalar(loss);
    let grads = want_grads.then(|| g.backward(loss));
    Ok((parts, surrogate, grads))
}

/// Minibatch loss (mean over all steps) and, if asked, its gradient with
/// respect to every parameter tensor. Episodes are differentiated
/// independently and summed in batch order.
pub fn ppo_loss(
    model: &PolicyModel,
    batch: &[EpisodeBuffer],
    targets: &[Targets],
    cfg: &PpoConfig,
    want_grads: bool,
) -> Result<(LossBreakdown, Option<Vec<Matrix>>), PolicyError> {
    let steps: usize = batch.iter().map(EpisodeBuffer::len).sum();
    let weight = 1.0 / steps.max(1) as f64;
    let per: Vec<_> = batch
        .par_iter()
        .zip(targets)
        .map(|(ep, t)| episode_loss(model, ep, t, cfg, weight, want_grads))
        .collect::<Result<_, _>>()?;
    let mut total = LossBreakdown::default();
    let mut grads: Option<Vec<Matrix>> = None;
    for (parts, _, g) in per {
        total.add(&parts);
        if let Some(g) = g {
            match &mut grads {
                None => grads = Some(g),
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| a.add_assign(b)),
            }
        }
    }
    Ok((total, grads))
}

/// Recomputes the clipped surrogate of every step under the current
/// parameters from the log-probabilities stored at collection time.
pub fn surrogate_terms(
    model: &PolicyModel,
    batch: &[EpisodeBuffer],
    targets: &[Targets],
    cfg: &PpoConfig,
) -> Result<Vec<SurrogateTerm>, PolicyError> {
    let mut out = Vec::new();
    for (ep, t) in batch.iter().zip(targets) {
        out.extend(episode_loss(model, ep, t, cfg, 1.0, false)?.1);
    }
    Ok(out)
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(params: &[Matrix], learning_rate: f64) -> Self {
        let zeros: Vec<Matrix> = params.iter().map(|p| Matrix::zeros(p.rows, p.cols)).collect();
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            steps: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix]) {
        self.steps += 1;
        let b1t = 1.0 - self.beta1.powi(self.steps as i32);
        let b2t = 1.0 - self.beta2.powi(self.steps as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for k in 0..p.data.len() {
                let gk = g.data[k];
                m.data[k] = self.beta1 * m.data[k] + (1.0 - self.beta1) * gk;
                v.data[k] = self.beta2 * v.data[k] + (1.0 - self.beta2) * gk * gk;
                let mh = m.data[k] / b1t;
                let vh = v.data[k] / b2t;
                p.data[k] -= self.learning_rate * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

/// Rescales `grads` so their global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm(grads: &mut [Matrix], max_norm: f64) -> f64 {
    let norm = grads.iter().map(Matrix::norm_sq).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.data.iter_mut().for_each(|x| *x *= s);
        }
    }
    norm
}

/// Per-iteration training statistics.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingTrace {
    /// Mean total episode reward, i.e. minus the mean objective relative to
    /// the greedy heuristic.
    pub mean_reward: Vec<f64>,
    pub loss: Vec<LossBreakdown>,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let x = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (x.floor() as usize, x.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (x - lo as f64)
}

/// `Some(drop)` when the median reward of the last `window` iterations sits
/// more than `factor` interquartile ranges below the median of the `window`
/// iterations before them. The IQR is taken over the earlier window.
pub fn divergence(rewards: &[f64], window: usize, factor: f64) -> Option<f64> {
    if window == 0 || rewards.len() < 2 * window {
        return None;
    }
    let sorted = |w: &[f64]| {
        let mut v = w.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let n = rewards.len();
    let reference = sorted(&rewards[n - 2 * window..n - window]);
    let recent = sorted(&rewards[n - window..]);
    let drop = quantile(&reference, 0.5) - quantile(&recent, 0.5);
    let iqr = (quantile(&reference, 0.75) - quantile(&reference, 0.25)).max(1e-12);
    (drop > factor * iqr).then_some(drop)
}

fn episode_seed(iteration: usize, episode: usize) -> (u64, u64) {
    (iteration as u64, 2 * episode as u64)
}

/// Trains `model` in place; `on_iteration` sees the iteration index and the
/// trace so far.
pub fn ppo_train_on(
    model: &mut PolicyModel,
    source: &dyn InstanceSource,
    cfg: &PpoConfig,
    mut on_iteration: impl FnMut(usize, &TrainingTrace),
) -> Result<TrainingTrace, PolicyError> {
    cfg.validate()?;
    let mut adam = Adam::new(&model.params.tensors, cfg.learning_rate);
    let mut trace = TrainingTrace::default();
    for iter in 0..cfg.iterations {
        let batch: Vec<EpisodeBuffer> = (0..cfg.episodes_per_iteration)
            .into_par_iter()
            .map(|e| {
                let (outer, inner) = episode_seed(iter, e);
                let inst = source.draw(&mut rng::substream(cfg.seed, outer, inner));
                collect_episode(model, inst, &mut rng::substream(cfg.seed, outer, inner + 1))
            })
            .collect::<Result<_, _>>()?;
        for ep in &batch {
            ep.validate()?;
        }
        let mean = batch.iter().map(EpisodeBuffer::total_reward).sum::<f64>() / batch.len() as f64;
        trace.mean_reward.push(mean);
        if let Some(drop) = divergence(&trace.mean_reward, cfg.divergence_window, cfg.divergence_factor) {
            return Err(PolicyError::Diverged { iteration: iter, drop });
        }

        let targets = batch_targets(&batch, cfg);
        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut shuffle = rng::substream(cfg.seed ^ 0x5bd1_e995, iter as u64, 0);
        let mut stats = LossBreakdown::default();
        let mut updates = 0.0;
        for _ in 0..cfg.epochs {
            order.shuffle(&mut shuffle);
            let size = batch.len().div_ceil(cfg.minibatches);
            for chunk in order.chunks(size) {
                let eps: Vec<EpisodeBuffer> = chunk.iter().map(|&i| batch[i].clone()).collect();
                let tg: Vec<Targets> = chunk.iter().map(|&i| targets[i].clone()).collect();
                let (parts, grads) = ppo_loss(model, &eps, &tg, cfg, true)?;
                let mut grads = grads.expect("gradients requested");
                if !parts.total.is_finite() || grads.iter().any(|g| g.data.iter().any(|x| !x.is_finite())) {
                    return Err(PolicyError::NonFinite { iteration: iter });
                }
                clip_grad_norm(&mut grads, cfg.max_grad_norm);
                adam.step(&mut model.params.tensors, &grads);
                stats.add(&parts);
                updates += 1.0;
            }
        }
        trace.loss.push(LossBreakdown {
            total: stats.total / updates,
            policy: stats.policy / updates,
            value: stats.value / updates,
            entropy: stats.entropy / updates,
            clip_fraction: stats.clip_fraction / updates,
        });
        on_iteration(iter, &trace);
    }
    model.meta.iterations += cfg.iterations;
    model.meta.seed = Some(cfg.seed);
    Ok(trace)
}

/// Fresh model trained on `family`.
pub fn ppo_train(
    family: &InstanceFamily,
    model_config: ModelConfig,
    cfg: &PpoConfig,
) -> Result<(PolicyModel, TrainingTrace), PolicyError> {
    let mut model = PolicyModel::new(model_config)?;
    model.meta.gamma = Some(family.gamma);
    model.meta.family = Some(family.clone());
    let trace = ppo_train_on(&mut model, family, cfg, |_, _| {})?;
    Ok((model, trace))
}
