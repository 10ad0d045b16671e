//! Scaled dot-product and multi-head attention.
//!
//! The graph-level builders are what the model uses; the free functions wrap
//! them for direct evaluation on plain matrices.

use serde::{Deserialize, Serialize};

use super::autodiff::{Graph, Var};
use super::tensor::Matrix;
use super::PolicyError;

fn dim_err(msg: String) -> PolicyError {
    PolicyError::Dimension(msg)
}

fn check_mask(mask: Option<&[bool]>, rows: usize, cols: usize) -> Result<(), PolicyError> {
    match mask {
        Some(m) if m.len() != rows * cols => Err(dim_err(format!(
            "mask has {} entries, scores are {rows}x{cols}",
            m.len()
        ))),
        _ => Ok(()),
    }
}

/// `softmax(Q Kᵀ / √d_k)` with optional row-major `allowed` mask.
pub fn attention_weights(q: &Matrix, k: &Matrix, mask: Option<&[bool]>) -> Result<Matrix, PolicyError> {
    if q.cols != k.cols || q.cols == 0 {
        return Err(dim_err(format!("query width {} vs key width {}", q.cols, k.cols)));
    }
    check_mask(mask, q.rows, k.rows)?;
    let scores = q.matmul_t(k).scale(1.0 / (q.cols as f64).sqrt());
    Ok(scores.masked_softmax_rows(mask))
}

pub fn attention(q: &Matrix, k: &Matrix, v: &Matrix) -> Result<Matrix, PolicyError> {
    if k.rows != v.rows {
        return Err(dim_err(format!("{} keys vs {} values", k.rows, v.rows)));
    }
    Ok(attention_weights(q, k, None)?.matmul(v))
}

/// Projection weights of one multi-head attention block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub heads: usize,
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
}

impl AttentionParams {
    /// Model width (`d_model`).
    pub fn width(&self) -> usize {
        self.wo.cols
    }

    pub fn key_width(&self) -> usize {
        self.wq.cols / self.heads.max(1)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let w = self.wq.cols;
        if self.heads == 0 || w % self.heads != 0 {
            return Err(dim_err(format!("width {w} not divisible by {} heads", self.heads)));
        }
        if self.wk.cols != w || self.wv.cols != w || self.wo.rows != w {
            return Err(dim_err("projection widths disagree".into()));
        }
        Ok(())
    }
}

/// Parameter handles of an attention block inside a [`Graph`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct MhaVars {
    pub wq: Var,
    pub wk: Var,
    pub wv: Var,
    pub wo: Var,
}

/// Per-head projected keys and values, reusable across queries.
pub(crate) struct KvCache {
    heads: Vec<(Var, Var)>,
    len: usize,
}

pub(crate) fn project_kv(g: &mut Graph, w: &MhaVars, heads: usize, xk: Var, xv: Var) -> KvCache {
    let k = g.matmul(xk, w.wk);
    let v = g.matmul(xv, w.wv);
    let width = g.value(k).cols;
    let dk = width / heads;
    let len = g.value(k).rows;
    let heads = if heads == 1 {
        vec![(k, v)]
    } else {
        (0..heads)
            .map(|h| (g.slice_cols(k, h * dk, (h + 1) * dk), g.slice_cols(v, h * dk, (h + 1) * dk)))
            .collect()
    };
    KvCache { heads, len }
}

pub(crate) fn mha_cached(g: &mut Graph, w: &MhaVars, xq: Var, kv: &KvCache, mask: Option<&[bool]>) -> Var {
    let q = g.matmul(xq, w.wq);
    let heads = kv.heads.len();
    let dk = g.value(q).cols / heads;
    let scale = 1.0 / (dk as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    for (h, &(kh, vh)) in kv.heads.iter().enumerate() {
        let qh = if heads == 1 { q } else { g.slice_cols(q, h * dk, (h + 1) * dk) };
        let s = g.matmul_t(qh, kh);
        let s = g.scale(s, scale);
        let a = g.masked_softmax_rows(s, mask);
        outs.push(g.matmul(a, vh));
    }
    let cat = if heads == 1 { outs[0] } else { g.concat_cols(&outs) };
    debug_assert!(mask.is_none_or(|m| m.len() == g.value(xq).rows * kv.len));
    g.matmul(cat, w.wo)
}

fn params_graph_inputs(p: &AttentionParams) -> Vec<Matrix> {
    vec![p.wq.clone(), p.wk.clone(), p.wv.clone(), p.wo.clone()]
}

fn check_inputs(p: &AttentionParams, q: &Matrix, k: &Matrix, v: &Matrix, mask: Option<&[bool]>) -> Result<(), PolicyError> {
    p.validate()?;
    if q.cols != p.wq.rows || k.cols != p.wk.rows || v.cols != p.wv.rows {
        return Err(dim_err("input width does not match projection".into()));
    }
    if k.rows != v.rows {
        return Err(dim_err(format!("{} keys vs {} values", k.rows, v.rows)));
    }
    check_mask(mask, q.rows, k.rows)
}

/// `Concat(head_1..head_h) W^O` with `head_i = Attention(Q W^Q_i, K W^K_i, V W^V_i)`.
/// Masked positions receive zero weight in every head.
pub fn multi_head_attention(
    p: &AttentionParams,
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    mask: Option<&[bool]>,
) -> Result<Matrix, PolicyError> {
    check_inputs(p, q, k, v, mask)?;
    let params = params_graph_inputs(p);
    let mut g = Graph::new(&params);
    let w = MhaVars {
        wq: g.param(0),
        wk: g.param(1),
        wv: g.param(2),
        wo: g.param(3),
    };
    let (qv, kv, vv) = (g.constant(q.clone()), g.constant(k.clone()), g.constant(v.clone()));
    let cache = project_kv(&mut g, &w, p.heads, kv, vv);
    let out = mha_cached(&mut g, &w, qv, &cache, mask);
    Ok(g.value(out).clone())
}

/// Attention weight matrix of every head.
pub fn multi_head_weights(
    p: &AttentionParams,
    q: &Matrix,
    k: &Matrix,
    mask: Option<&[bool]>,
) -> Result<Vec<Matrix>, PolicyError> {
    check_inputs(p, q, k, k, mask)?;
    let qp = q.matmul(&p.wq);
    let kp = k.matmul(&p.wk);
    let dk = p.key_width();
    (0..p.heads)
        .map(|h| attention_weights(&qp.slice_cols(h * dk, (h + 1) * dk), &kp.slice_cols(h * dk, (h + 1) * dk), mask))
        .collect()
}
