//! Tape-based reverse-mode differentiation over [`Matrix`] values.
//!
//! A [`Graph`] records every operation as it is evaluated. Parameters are
//! referenced, not copied; [`Graph::backward`] returns one gradient per
//! parameter slot.

use super::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddN(Vec<Var>),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    SoftmaxRows(Var),
    LogSoftmaxAll(Var, Vec<bool>),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Reshape(Var),
    MeanRows(Var),
    Sum(Var),
    Select(Var, usize),
    Minimum(Var, Var),
    Clamp(Var, f64, f64),
    Square(Var),
}

struct Node {
    op: Op,
    value: Option<Matrix>,
}

pub struct Graph<'p> {
    params: &'p [Matrix],
    param_var: Vec<Option<Var>>,
    nodes: Vec<Node>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p [Matrix]) -> Self {
        Graph {
            params,
            param_var: vec![None; params.len()],
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, op: Op, value: Matrix) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        match (&self.nodes[v.0].op, &self.nodes[v.0].value) {
            (Op::Param(i), _) => &self.params[*i],
            (_, Some(m)) => m,
            _ => unreachable!("non-parameter node without value"),
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        assert_eq!(m.shape(), (1, 1), "scalar node");
        m.data[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node recorded after the first `len`; handles into the
    /// dropped tail become invalid.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
        for slot in &mut self.param_var {
            if slot.is_some_and(|v| v.0 >= len) {
                *slot = None;
            }
        }
    }

    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(Op::Leaf, m)
    }

    pub fn param(&mut self, index: usize) -> Var {
        if let Some(v) = self.param_var[index] {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(index),
            value: None,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_var[index] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let m = self.value(a).matmul(self.value(b));
        self.push(Op::MatMul(a, b), m)
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let m = self.value(a).matmul_t(self.value(b));
        self.push(Op::MatMulT(a, b), m)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let m = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(Op::Add(a, b), m)
    }

    pub fn add_n(&mut self, terms: &[Var]) -> Var {
        let mut m = self.value(terms[0]).clone();
        for &t in &terms[1..] {
            m.add_assign(self.value(t));
        }
        self.push(Op::AddN(terms.to_vec()), m)
    }

    /// Adds the `1 × n` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!((1, av.cols), bv.shape(), "add_row shape");
        let mut m = av.clone();
        for i in 0..m.rows {
            for (x, y) in m.row_mut(i).iter_mut().zip(&bv.data) {
                *x += y;
            }
        }
        self.push(Op::AddRow(a, b), m)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let m = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(Op::Sub(a, b), m)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let m = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(Op::Mul(a, b), m)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let m = self.value(a).scale(s);
        self.push(Op::Scale(a, s), m)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let m = self.value(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a), m)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let m = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), m)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let m = self.value(a).map(f64::exp);
        self.push(Op::Exp(a), m)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let m = self.value(a).map(|x| x * x);
        self.push(Op::Square(a), m)
    }

    /// Row softmax over `allowed` entries; masked entries get exactly zero.
    pub fn masked_softmax_rows(&mut self, a: Var, allowed: Option<&[bool]>) -> Var {
        let m = self.value(a).masked_softmax_rows(allowed);
        self.push(Op::SoftmaxRows(a), m)
    }

    /// Log-softmax over all allowed entries of `a` taken together. Masked
    /// entries hold 0 and receive no gradient.
    pub fn masked_log_softmax_all(&mut self, a: Var, allowed: &[bool]) -> Var {
        let x = self.value(a);
        assert_eq!(allowed.len(), x.data.len(), "mask shape");
        let max = x
            .data
            .iter()
            .zip(allowed)
            .filter(|(_, &ok)| ok)
            .map(|(&v, _)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(max > f64::NEG_INFINITY, "log-softmax over an empty mask");
        let lse = max
            + x.data
                .iter()
                .zip(allowed)
                .filter(|(_, &ok)| ok)
                .map(|(&v, _)| (v - max).exp())
                .sum::<f64>()
                .ln();
        let data = x
            .data
            .iter()
            .zip(allowed)
            .map(|(&v, &ok)| if ok { v - lse } else { 0.0 })
            .collect();
        let m = Matrix::from_vec(x.rows, x.cols, data);
        self.push(Op::LogSoftmaxAll(a, allowed.to_vec()), m)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let mats: Vec<Matrix> = parts.iter().map(|&p| self.value(p).clone()).collect();
        let m = Matrix::concat_cols(&mats);
        self.push(Op::ConcatCols(parts.to_vec()), m)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let m = self.value(a).slice_cols(start, end);
        self.push(Op::SliceCols(a, start), m)
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let x = self.value(a);
        assert_eq!(x.data.len(), rows * cols, "reshape size");
        let m = Matrix::from_vec(rows, cols, x.data.clone());
        self.push(Op::Reshape(a), m)
    }

    /// `1 × cols` mean over rows.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut m = Matrix::zeros(1, x.cols);
        for i in 0..x.rows {
            for (o, v) in m.data.iter_mut().zip(x.row(i)) {
                *o += v;
            }
        }
        let n = x.rows as f64;
        m.data.iter_mut().for_each(|v| *v /= n);
        self.push(Op::MeanRows(a), m)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Op::Sum(a), Matrix::filled(1, 1, s))
    }

    /// Element at flat (row-major) index as a `1 × 1` node.
    pub fn select(&mut self, a: Var, flat: usize) -> Var {
        let v = self.value(a).data[flat];
        self.push(Op::Select(a, flat), Matrix::filled(1, 1, v))
    }

    pub fn minimum(&mut self, a: Var, b: Var) -> Var {
        let m = self.value(a).zip_map(self.value(b), f64::min);
        self.push(Op::Minimum(a, b), m)
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let m = self.value(a).map(|x| x.clamp(lo, hi));
        self.push(Op::Clamp(a, lo, hi), m)
    }

    /// Gradients of the scalar `loss` with respect to every parameter slot
    /// (zero for parameters not used in the graph).
    pub fn backward(&self, loss: Var) -> Vec<Matrix> {
        assert_eq!(self.value(loss).shape(), (1, 1), "loss must be scalar");
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        fn acc(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
            match &mut grads[v.0] {
                Some(x) => x.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Param(_) => {
                    grads[i] = Some(g);
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, g.matmul_t(bv));
                    acc(&mut grads, *b, av.t_matmul(&g));
                }
                Op::MatMulT(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, g.matmul(bv));
                    acc(&mut grads, *b, g.t_matmul(av));
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddN(terms) => {
                    for t in terms {
                        acc(&mut grads, *t, g.clone());
                    }
                }
                Op::AddRow(a, b) => {
                    let mut gb = Matrix::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (o, v) in gb.data.iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, g.scale(-1.0));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, g.zip_map(bv, |x, y| x * y));
                    acc(&mut grads, *b, g.zip_map(av, |x, y| x * y));
                }
                Op::Scale(a, s) => acc(&mut grads, *a, g.scale(*s)),
                Op::Relu(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, g.zip_map(x, |gv, xv| if xv > 0.0 { gv } else { 0.0 }));
                }
                Op::Tanh(_) | Op::Exp(_) => {
                    let y = self.nodes[i].value.as_ref().expect("value");
                    let (a, d) = match &self.nodes[i].op {
                        Op::Tanh(a) => (*a, g.zip_map(y, |gv, yv| gv * (1.0 - yv * yv))),
                        Op::Exp(a) => (*a, g.zip_map(y, |gv, yv| gv * yv)),
                        _ => unreachable!(),
                    };
                    acc(&mut grads, a, d);
                }
                Op::Square(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, g.zip_map(x, |gv, xv| 2.0 * gv * xv));
                }
                Op::SoftmaxRows(a) => {
                    let y = self.nodes[i].value.as_ref().expect("value");
                    let mut d = Matrix::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let s: f64 = y.row(r).iter().zip(g.row(r)).map(|(p, q)| p * q).sum();
                        for c in 0..y.cols {
                            d.set(r, c, y.get(r, c) * (g.get(r, c) - s));
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::LogSoftmaxAll(a, allowed) => {
                    let y = self.nodes[i].value.as_ref().expect("value");
                    let total: f64 = g.data.iter().zip(allowed).filter(|(_, &ok)| ok).map(|(v, _)| v).sum();
                    let data = y
                        .data
                        .iter()
                        .zip(&g.data)
                        .zip(allowed)
                        .map(|((&yv, &gv), &ok)| if ok { gv - yv.exp() * total } else { 0.0 })
                        .collect();
                    acc(&mut grads, *a, Matrix::from_vec(y.rows, y.cols, data));
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.value(*p).cols;
                        acc(&mut grads, *p, g.slice_cols(off, off + w));
                        off += w;
                    }
                }
                Op::SliceCols(a, start) => {
                    let x = self.value(*a);
                    let mut d = Matrix::zeros(x.rows, x.cols);
                    for r in 0..g.rows {
                        d.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Reshape(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, Matrix::from_vec(x.rows, x.cols, g.data));
                }
                Op::MeanRows(a) => {
                    let x = self.value(*a);
                    let n = x.rows as f64;
                    let mut d = Matrix::zeros(x.rows, x.cols);
                    for r in 0..x.rows {
                        for (o, v) in d.row_mut(r).iter_mut().zip(&g.data) {
                            *o = v / n;
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Sum(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, Matrix::filled(x.rows, x.cols, g.data[0]));
                }
                Op::Select(a, flat) => {
                    let x = self.value(*a);
                    let mut d = Matrix::zeros(x.rows, x.cols);
                    d.data[*flat] = g.data[0];
                    acc(&mut grads, *a, d);
                }
                Op::Minimum(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let mut ga = Matrix::zeros(g.rows, g.cols);
                    let mut gb = Matrix::zeros(g.rows, g.cols);
                    for k in 0..g.data.len() {
                        if av.data[k] <= bv.data[k] {
                            ga.data[k] = g.data[k];
                        } else {
                            gb.data[k] = g.data[k];
                        }
                    }
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Clamp(a, lo, hi) => {
                    let x = self.value(*a);
                    acc(
                        &mut grads,
                        *a,
                        g.zip_map(x, |gv, xv| if xv > *lo && xv < *hi { gv } else { 0.0 }),
                    );
                }
            }
        }

        self.param_var
            .iter()
            .zip(self.params)
            .map(|(v, p)| match v.and_then(|v| grads[v.0].take()) {
                Some(g) => g,
                None => Matrix::zeros(p.rows, p.cols),
            })
            .collect()
    }
}
