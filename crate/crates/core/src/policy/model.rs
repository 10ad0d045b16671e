//! Encoder, decoder, pointer and critic networks.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::attention::{mha_cached, project_kv, KvCache, MhaVars};
use super::autodiff::{Graph, Var};
use super::features::{COMPONENT_FEATURES, CREW_FEATURES, GLOBAL_FEATURES, PAIR_FEATURES};
use super::tensor::Matrix;
use super::PolicyError;
use crate::dispatch::InstanceFamily;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub width: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub ff_hidden: usize,
    pub pair_hidden: usize,
    pub critic_hidden: usize,
    /// Pointer logits are `clip · tanh(·)`.
    pub logit_clip: f64,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            width: 64,
            heads: 4,
            encoder_layers: 2,
            decoder_layers: 2,
            ff_hidden: 128,
            pair_hidden: 32,
            critic_hidden: 64,
            logit_clip: 10.0,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    /// Width 8, one head, one layer per stack.
    pub fn tiny() -> Self {
        ModelConfig {
            width: 8,
            heads: 1,
            encoder_layers: 1,
            decoder_layers: 1,
            ff_hidden: 16,
            pair_hidden: 8,
            critic_hidden: 8,
            logit_clip: 10.0,
            init_seed: 0,
        }
    }

    pub fn key_width(&self) -> usize {
        self.width / self.heads
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: String| Err(PolicyError::Config(m));
        if self.width == 0 || self.heads == 0 || self.width % self.heads != 0 {
            return bad(format!("width {} must be a positive multiple of heads {}", self.width, self.heads));
        }
        if self.ff_hidden == 0 || self.pair_hidden == 0 || self.critic_hidden == 0 {
            return bad("hidden sizes must be positive".into());
        }
        if !(self.logit_clip > 0.0) {
            return bad(format!("logit_clip must be > 0, got {}", self.logit_clip));
        }
        Ok(())
    }
}

/// Named parameter tensors in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub names: Vec<String>,
    pub tensors: Vec<Matrix>,
}

impl ParamSet {
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }
}

#[derive(Debug, Clone, Copy)]
struct FfIdx {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct AttnIdx([usize; 4]);

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    embed: (usize, usize),
    crew_embed: (usize, usize),
    encoder: Vec<(AttnIdx, FfIdx)>,
    decoder: Vec<(AttnIdx, AttnIdx, FfIdx)>,
    ptr_q: usize,
    ptr_k: usize,
    pair: FfIdx,
    critic: FfIdx,
}

#[derive(Clone, Copy)]
enum Init {
    Xavier,
    Zero,
}

struct Builder {
    specs: Vec<(String, usize, usize, Init)>,
}

impl Builder {
    fn add(&mut self, name: String, rows: usize, cols: usize, init: Init) -> usize {
        self.specs.push((name, rows, cols, init));
        self.specs.len() - 1
    }

    fn linear(&mut self, prefix: &str, inp: usize, out: usize) -> (usize, usize) {
        (
            self.add(format!("{prefix}.w"), inp, out, Init::Xavier),
            self.add(format!("{prefix}.b"), 1, out, Init::Zero),
        )
    }

    fn attn(&mut self, prefix: &str, w: usize) -> AttnIdx {
        AttnIdx(["wq", "wk", "wv", "wo"].map(|n| self.add(format!("{prefix}.{n}"), w, w, Init::Xavier)))
    }

    fn ff(&mut self, prefix: &str, inp: usize, hidden: usize, out: usize) -> FfIdx {
        let (w1, b1) = self.linear(&format!("{prefix}.1"), inp, hidden);
        let (w2, b2) = self.linear(&format!("{prefix}.2"), hidden, out);
        FfIdx { w1, b1, w2, b2: Some(b2) }
    }

    /// Output bias omitted, e.g. where a softmax would cancel it.
    fn ff_unbiased(&mut self, prefix: &str, inp: usize, hidden: usize, out: usize) -> FfIdx {
        let (w1, b1) = self.linear(&format!("{prefix}.1"), inp, hidden);
        let w2 = self.add(format!("{prefix}.2.w"), hidden, out, Init::Xavier);
        FfIdx { w1, b1, w2, b2: None }
    }
}

impl Layout {
    fn build(cfg: &ModelConfig) -> (Layout, Vec<(String, usize, usize, Init)>) {
        let w = cfg.width;
        let mut b = Builder { specs: Vec::new() };
        let embed = b.linear("embed", COMPONENT_FEATURES, w);
        let crew_embed = b.linear("crew_embed", CREW_FEATURES, w);
        let encoder = (0..cfg.encoder_layers)
            .map(|l| {
                (
                    b.attn(&format!("enc.{l}.attn"), w),
                    b.ff(&format!("enc.{l}.ff"), w, cfg.ff_hidden, w),
                )
            })
            .collect();
        let decoder = (0..cfg.decoder_layers)
            .map(|l| {
                (
                    b.attn(&format!("dec.{l}.self"), w),
                    b.attn(&format!("dec.{l}.cross"), w),
                    b.ff(&format!("dec.{l}.ff"), w, cfg.ff_hidden, w),
                )
            })
            .collect();
        let ptr_q = b.add("ptr.wq".into(), w, w, Init::Xavier);
        let ptr_k = b.add("ptr.wk".into(), w, w, Init::Xavier);
        let pair = b.ff_unbiased("pair", PAIR_FEATURES, cfg.pair_hidden, 1);
        let critic = b.ff("critic", 2 * w + GLOBAL_FEATURES, cfg.critic_hidden, 1);
        (
            Layout {
                embed,
                crew_embed,
                encoder,
                decoder,
                ptr_q,
                ptr_k,
                pair,
                critic,
            },
            b.specs,
        )
    }
}

/// Provenance carried in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingMeta {
    pub gamma: Option<f64>,
    pub seed: Option<u64>,
    pub iterations: usize,
    pub family: Option<InstanceFamily>,
}

#[derive(Debug, Clone)]
pub struct PolicyModel {
    pub config: ModelConfig,
    pub params: ParamSet,
    pub meta: TrainingMeta,
    pub(crate) layout: Layout,
}

impl PartialEq for PolicyModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params && self.meta == other.meta
    }
}

impl PolicyModel {
    /// Xavier-uniform weights and zero biases drawn from `config.init_seed`.
    pub fn new(config: ModelConfig) -> Result<Self, PolicyError> {
        config.validate()?;
        let (layout, specs) = Layout::build(&config);
        let mut rng = rng::stream(config.init_seed, 0);
        let mut names = Vec::with_capacity(specs.len());
        let mut tensors = Vec::with_capacity(specs.len());
        for (name, r, c, init) in specs {
            let m = match init {
                Init::Zero => Matrix::zeros(r, c),
                Init::Xavier => {
                    let a = (6.0 / (r + c) as f64).sqrt();
                    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-a..a)).collect())
                }
            };
            names.push(name);
            tensors.push(m);
        }
        Ok(PolicyModel {
            config,
            params: ParamSet { names, tensors },
            meta: TrainingMeta::default(),
            layout,
        })
    }

    /// Reassembles a model, checking names and shapes against `config`.
    pub fn from_parts(config: ModelConfig, params: ParamSet, meta: TrainingMeta) -> Result<Self, PolicyError> {
        config.validate()?;
        let (layout, specs) = Layout::build(&config);
        if specs.len() != params.tensors.len() || params.names.len() != params.tensors.len() {
            return Err(PolicyError::Checkpoint(format!(
                "expected {} tensors, found {}",
                specs.len(),
                params.tensors.len()
            )));
        }
        for ((name, r, c, _), (got_name, t)) in specs.iter().zip(params.names.iter().zip(&params.tensors)) {
            if name != got_name || (t.rows, t.cols) != (*r, *c) || t.data.len() != r * c {
                return Err(PolicyError::Checkpoint(format!(
                    "tensor {got_name} {}x{} does not match {name} {r}x{c}",
                    t.rows, t.cols
                )));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(PolicyError::Checkpoint(format!("tensor {name} holds non-finite values")));
            }
        }
        Ok(PolicyModel {
            config,
            params,
            meta,
            layout,
        })
    }
}

/// Encoder output and the per-episode projections derived from it.
pub(crate) struct Encoded {
    pub h: Var,
    cross: Vec<KvCache>,
    ptr_k: Var,
}

fn attn_vars(g: &mut Graph, a: AttnIdx) -> MhaVars {
    MhaVars {
        wq: g.param(a.0[0]),
        wk: g.param(a.0[1]),
        wv: g.param(a.0[2]),
        wo: g.param(a.0[3]),
    }
}

fn linear(g: &mut Graph, x: Var, w: usize, b: usize) -> Var {
    let (w, b) = (g.param(w), g.param(b));
    let y = g.matmul(x, w);
    g.add_row(y, b)
}

fn ff(g: &mut Graph, x: Var, f: FfIdx) -> Var {
    let h = linear(g, x, f.w1, f.b1);
    let h = g.relu(h);
    match f.b2 {
        Some(b2) => linear(g, h, f.w2, b2),
        None => {
            let w2 = g.param(f.w2);
            g.matmul(h, w2)
        }
    }
}

pub(crate) fn encode_graph(g: &mut Graph, model: &PolicyModel, features: &Matrix) -> Encoded {
    let lay = &model.layout;
    let heads = model.config.heads;
    let x = g.constant(features.clone());
    let mut h = linear(g, x, lay.embed.0, lay.embed.1);
    for &(attn, f) in &lay.encoder {
        let w = attn_vars(g, attn);
        let kv = project_kv(g, &w, heads, h, h);
        let a = mha_cached(g, &w, h, &kv, None);
        h = g.add(h, a);
        let y = ff(g, h, f);
        h = g.add(h, y);
    }
    let cross = lay
        .decoder
        .iter()
        .map(|&(_, cross, _)| {
            let w = attn_vars(g, cross);
            project_kv(g, &w, heads, h, h)
        })
        .collect();
    let wk = g.param(lay.ptr_k);
    let ptr_k = g.matmul(h, wk);
    Encoded { h, cross, ptr_k }
}

/// Inputs of one decoding step.
pub(crate) struct StepInputs<'a> {
    /// `crews × CREW_FEATURES`.
    pub crew: Matrix,
    /// `(crews · n) × PAIR_FEATURES`, row `c · n + j`.
    pub pair: Matrix,
    /// `1 × GLOBAL_FEATURES`.
    pub globals: Matrix,
    /// `1 × n` pooling weights over remaining components.
    pub pool: Matrix,
    /// `crews × n` cross-attention mask.
    pub cross_mask: &'a [bool],
    /// `crews × n` valid actions.
    pub action_mask: &'a [bool],
}

/// Returns `(log-probabilities over crews × n, state value)`.
pub(crate) fn step_graph(g: &mut Graph, model: &PolicyModel, enc: &Encoded, inp: &StepInputs) -> (Var, Var) {
    let lay = &model.layout;
    let heads = model.config.heads;
    let crews = inp.crew.rows;
    let n = inp.pool.cols;

    let x = g.constant(inp.crew.clone());
    let mut c = linear(g, x, lay.crew_embed.0, lay.crew_embed.1);
    for (&(self_attn, cross, f), kv) in lay.decoder.iter().zip(&enc.cross) {
        let w = attn_vars(g, self_attn);
        let own = project_kv(g, &w, heads, c, c);
        let a = mha_cached(g, &w, c, &own, None);
        c = g.add(c, a);
        let w = attn_vars(g, cross);
        let a = mha_cached(g, &w, c, kv, Some(inp.cross_mask));
        c = g.add(c, a);
        let y = ff(g, c, f);
        c = g.add(c, y);
    }

    // pointer: clipped compatibility plus a pair-feature MLP
    let wq = g.param(lay.ptr_q);
    let q = g.matmul(c, wq);
    let u = g.matmul_t(q, enc.ptr_k);
    let u = g.scale(u, 1.0 / (model.config.width as f64).sqrt());
    let u = g.tanh(u);
    let u = g.scale(u, model.config.logit_clip);
    let p = g.constant(inp.pair.clone());
    let pair = ff(g, p, lay.pair);
    let pair = g.reshape(pair, crews, n);
    let logits = g.add(u, pair);
    let logp = g.masked_log_softmax_all(logits, inp.action_mask);

    let pool = g.constant(inp.pool.clone());
    let comp = g.matmul(pool, enc.h);
    let crew = g.mean_rows(c);
    let glob = g.constant(inp.globals.clone());
    let z = g.concat_cols(&[comp, crew, glob]);
    let value = ff(g, z, lay.critic);
    (logp, value)
}
