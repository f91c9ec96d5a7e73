//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Each operation appends a node holding its output value and whatever it
//! needs for its local gradient rule. Nodes only reference earlier nodes, so
//! the tape is always in topological order and [`Tape::backward`] is a single
//! reverse sweep.

use crate::error::{Error, Result};
use crate::text::EmbeddedSequence;

use super::tensor::{gemm, Tensor};

/// SELU scale.
pub const SELU_LAMBDA: f64 = 1.05070098735548;
/// SELU negative-branch coefficient.
pub const SELU_ALPHA: f64 = 1.67326324235437;
/// Scores are clamped this far from 0 and 1 before taking logarithms.
pub const PROB_CLAMP: f64 = 1e-7;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Padded embedded sequences stacked for the recurrent layer.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceBatch {
    count: usize,
    steps: usize,
    dim: usize,
    /// `count × steps × dim`, row-major.
    data: Vec<f64>,
    /// `count × steps`.
    mask: Vec<bool>,
}

impl SequenceBatch {
    pub fn new(seqs: &[&EmbeddedSequence]) -> Result<Self> {
        let first = seqs.first().ok_or(Error::Empty("sequence batch"))?;
        let (steps, dim) = (first.max_len(), first.dim());
        let mut data = Vec::with_capacity(seqs.len() * steps * dim);
        let mut mask = Vec::with_capacity(seqs.len() * steps);
        for s in seqs {
            if s.max_len() != steps || s.dim() != dim {
                return Err(Error::Shape {
                    op: "sequence batch",
                    lhs: vec![steps, dim],
                    rhs: vec![s.max_len(), s.dim()],
                });
            }
            data.extend_from_slice(s.matrix());
            mask.extend_from_slice(s.mask());
        }
        Ok(SequenceBatch {
            count: seqs.len(),
            steps,
            dim,
            data,
            mask,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[cfg(test)]
    pub(crate) fn mask_mut(&mut self) -> &mut [bool] {
        &mut self.mask
    }
}

/// Batch-norm behaviour.
#[derive(Clone, Copy, Debug)]
pub enum NormMode<'a> {
    /// Normalize with the statistics of the current batch.
    Train,
    /// Normalize with fixed running statistics.
    Eval { mean: &'a [f64], var: &'a [f64] },
}

/// Per-feature mean and (biased) variance of a training batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

struct LstmCache {
    batch: SequenceBatch,
    hidden: usize,
    /// Per step, `count × hidden` each.
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Per step, `count × 4·hidden` activated gates in i, f, g, o order.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

enum Op {
    Leaf,
    Add(Var, Var),
    Mul(Var, Var),
    Sum(Var),
    Dense {
        x: Var,
        w: Var,
        b: Var,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        train: bool,
    },
    Lstm {
        w_input: Var,
        w_recurrent: Var,
        bias: Var,
        cache: Box<LstmCache>,
    },
    Gather {
        x: Var,
        index: Vec<usize>,
    },
    Selu(Var),
    Cosine {
        u: Var,
        v: Var,
        norm_u: Vec<f64>,
        norm_v: Vec<f64>,
        eps: f64,
    },
    Sigmoid(Var),
    Bce {
        s: Var,
        labels: Vec<f64>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Recorded computation. Confined to one thread; build a fresh tape per step.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`; zero if `var` does not
    /// reach the loss.
    pub fn get(&self, var: Var) -> Tensor {
        match self.grads.get(var.0).and_then(Option::as_ref) {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }
}

fn shape_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Error {
    Error::Shape {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn selu_scalar(x: f64) -> f64 {
    if x > 0.0 {
        SELU_LAMBDA * x
    } else {
        SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err("add", va.shape(), vb.shape()));
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x + y)
            .collect();
        let out = Tensor::from_parts(va.shape().to_vec(), data);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err("mul", va.shape(), vb.shape()));
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::from_parts(va.shape().to_vec(), data);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// `x·w + b` for `x: B×n`, `w: n×m`, `b: m`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (vx, vw, vb) = (self.value(x), self.value(w), self.value(b));
        if vx.shape().len() != 2 || vw.shape().len() != 2 || vx.shape()[1] != vw.shape()[0] {
            return Err(shape_err("dense", vx.shape(), vw.shape()));
        }
        let (rows, n, m) = (vx.shape()[0], vw.shape()[0], vw.shape()[1]);
        if vb.shape() != [m] {
            return Err(shape_err("dense bias", vw.shape(), vb.shape()));
        }
        let mut out = Vec::with_capacity(rows * m);
        for _ in 0..rows {
            out.extend_from_slice(vb.data());
        }
        gemm(
            false,
            false,
            rows,
            n,
            m,
            vx.data(),
            vw.data(),
            1.0,
            &mut out,
        );
        Ok(self.push(
            Tensor::from_parts(vec![rows, m], out),
            Op::Dense { x, w, b },
        ))
    }

    /// Per-feature normalization of `x: B×n` followed by `gamma·x̂ + beta`.
    ///
    /// In train mode the returned [`BatchStats`] are the batch moments used,
    /// for the caller to fold into its running statistics.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mode: NormMode<'_>,
        eps: f64,
    ) -> Result<(Var, Option<BatchStats>)> {
        let (vx, vg, vb) = (self.value(x), self.value(gamma), self.value(beta));
        if vx.shape().len() != 2 {
            return Err(shape_err("batch_norm", vx.shape(), vg.shape()));
        }
        let (rows, n) = (vx.shape()[0], vx.shape()[1]);
        if vg.shape() != [n] || vb.shape() != [n] {
            return Err(shape_err("batch_norm", vx.shape(), vg.shape()));
        }
        let (mean, var, stats) = match mode {
            NormMode::Train => {
                if rows < 2 {
                    return Err(Error::BatchTooSmall(rows));
                }
                let mut mean = vec![0.0; n];
                for r in 0..rows {
                    for (m, v) in mean.iter_mut().zip(vx.row(r)) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= rows as f64);
                let mut var = vec![0.0; n];
                for r in 0..rows {
                    for ((s, v), m) in var.iter_mut().zip(vx.row(r)).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s /= rows as f64);
                let stats = BatchStats {
                    mean: mean.clone(),
                    var: var.clone(),
                };
                (mean, var, Some(stats))
            }
            NormMode::Eval { mean, var } => {
                if mean.len() != n || var.len() != n {
                    return Err(shape_err(
                        "batch_norm running stats",
                        &[n],
                        &[mean.len(), var.len()],
                    ));
                }
                (mean.to_vec(), var.to_vec(), None)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut xhat = Vec::with_capacity(rows * n);
        let mut out = Vec::with_capacity(rows * n);
        for r in 0..rows {
            for (j, v) in vx.row(r).iter().enumerate() {
                let h = (v - mean[j]) * inv_std[j];
                xhat.push(h);
                out.push(vg.data()[j] * h + vb.data()[j]);
            }
        }
        let op = Op::BatchNorm {
            x,
            gamma,
            beta,
            xhat,
            inv_std,
            train: matches!(mode, NormMode::Train),
        };
        Ok((self.push(Tensor::from_parts(vec![rows, n], out), op), stats))
    }

    /// Masked LSTM over a batch of sequences; returns the hidden state at the
    /// last unmasked step of each sequence (`count × hidden`).
    ///
    /// `w_input` is `dim × 4h`, `w_recurrent` is `h × 4h`, `bias` is `4h`,
    /// with gate blocks ordered input, forget, cell, output. Masked steps
    /// carry both hidden and cell state through unchanged.
    pub fn lstm(
        &mut self,
        batch: &SequenceBatch,
        w_input: Var,
        w_recurrent: Var,
        bias: Var,
    ) -> Result<Var> {
        let (wi, wr, b) = (
            self.value(w_input),
            self.value(w_recurrent),
            self.value(bias),
        );
        if wi.shape().len() != 2 || wi.shape()[0] != batch.dim || wi.shape()[1] % 4 != 0 {
            return Err(shape_err("lstm input weights", &[batch.dim], wi.shape()));
        }
        let hidden = wi.shape()[1] / 4;
        let g4 = 4 * hidden;
        if wr.shape() != [hidden, g4] {
            return Err(shape_err(
                "lstm recurrent weights",
                &[hidden, g4],
                wr.shape(),
            ));
        }
        if b.shape() != [g4] {
            return Err(shape_err("lstm bias", &[g4], b.shape()));
        }
        let (count, steps) = (batch.count, batch.steps);
        for u in 0..count {
            if !batch.mask[u * steps..(u + 1) * steps].iter().any(|&m| m) {
                return Err(Error::EmptyMask(u));
            }
        }

        // Input projections for every (sequence, step) row at once.
        let mut xw = vec![0.0; count * steps * g4];
        gemm(
            false,
            false,
            count * steps,
            batch.dim,
            g4,
            &batch.data,
            wi.data(),
            0.0,
            &mut xw,
        );

        let per_step = count * hidden;
        let mut h_prev = vec![0.0; steps * per_step];
        let mut c_prev = vec![0.0; steps * per_step];
        let mut gates = vec![0.0; steps * count * g4];
        let mut tanh_c = vec![0.0; steps * per_step];
        let mut h = vec![0.0; per_step];
        let mut c = vec![0.0; per_step];
        let mut z = vec![0.0; count * g4];

        for t in 0..steps {
            h_prev[t * per_step..(t + 1) * per_step].copy_from_slice(&h);
            c_prev[t * per_step..(t + 1) * per_step].copy_from_slice(&c);
            for u in 0..count {
                let src = &xw[(u * steps + t) * g4..(u * steps + t + 1) * g4];
                for ((zz, x), bb) in z[u * g4..(u + 1) * g4].iter_mut().zip(src).zip(b.data()) {
                    *zz = x + bb;
                }
            }
            gemm(false, false, count, hidden, g4, &h, wr.data(), 1.0, &mut z);
            let gate_t = &mut gates[t * count * g4..(t + 1) * count * g4];
            let tanh_t = &mut tanh_c[t * per_step..(t + 1) * per_step];
            for u in 0..count {
                if !batch.mask[u * steps + t] {
                    continue;
                }
                let zu = &z[u * g4..(u + 1) * g4];
                let gu = &mut gate_t[u * g4..(u + 1) * g4];
                for k in 0..hidden {
                    let i = sigmoid(zu[k]);
                    let f = sigmoid(zu[hidden + k]);
                    let g = zu[2 * hidden + k].tanh();
                    let o = sigmoid(zu[3 * hidden + k]);
                    gu[k] = i;
                    gu[hidden + k] = f;
                    gu[2 * hidden + k] = g;
                    gu[3 * hidden + k] = o;
                    let idx = u * hidden + k;
                    let cn = f * c[idx] + i * g;
                    let tc = cn.tanh();
                    c[idx] = cn;
                    tanh_t[idx] = tc;
                    h[idx] = o * tc;
                }
            }
        }

        let cache = LstmCache {
            batch: batch.clone(),
            hidden,
            h_prev,
            c_prev,
            gates,
            tanh_c,
        };
        let out = Tensor::from_parts(vec![count, hidden], h);
        Ok(self.push(
            out,
            Op::Lstm {
                w_input,
                w_recurrent,
                bias,
                cache: Box::new(cache),
            },
        ))
    }

    /// Row gather: output row `r` is row `index[r]` of `x`.
    pub fn gather_rows(&mut self, x: Var, index: &[usize]) -> Result<Var> {
        let vx = self.value(x);
        let rows = vx.rows();
        if let Some(&bad) = index.iter().find(|&&i| i >= rows) {
            return Err(shape_err("gather_rows", vx.shape(), &[bad]));
        }
        let cols = vx.cols();
        let mut out = Vec::with_capacity(index.len() * cols);
        for &i in index {
            out.extend_from_slice(vx.row(i));
        }
        let mut shape = vx.shape().to_vec();
        shape[0] = index.len();
        Ok(self.push(
            Tensor::from_parts(shape, out),
            Op::Gather {
                x,
                index: index.to_vec(),
            },
        ))
    }

    pub fn selu(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        let data = vx.data().iter().map(|&v| selu_scalar(v)).collect();
        let out = Tensor::from_parts(vx.shape().to_vec(), data);
        self.push(out, Op::Selu(x))
    }

    /// Row-wise `u·v / (max(‖u‖, eps)·max(‖v‖, eps))` for `B×h` inputs.
    pub fn cosine(&mut self, u: Var, v: Var, eps: f64) -> Result<Var> {
        let (vu, vv) = (self.value(u), self.value(v));
        if vu.shape() != vv.shape() || vu.shape().len() != 2 {
            return Err(shape_err("cosine", vu.shape(), vv.shape()));
        }
        let rows = vu.rows();
        let mut out = Vec::with_capacity(rows);
        let mut norm_u = Vec::with_capacity(rows);
        let mut norm_v = Vec::with_capacity(rows);
        for r in 0..rows {
            let (a, b) = (vu.row(r), vv.row(r));
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            out.push(dot / (na.max(eps) * nb.max(eps)));
            norm_u.push(na);
            norm_v.push(nb);
        }
        Ok(self.push(
            Tensor::from_parts(vec![rows], out),
            Op::Cosine {
                u,
                v,
                norm_u,
                norm_v,
                eps,
            },
        ))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        let data = vx.data().iter().map(|&v| sigmoid(v)).collect();
        let out = Tensor::from_parts(vx.shape().to_vec(), data);
        self.push(out, Op::Sigmoid(x))
    }

    /// Mean binary cross-entropy of probabilities `s` against 0/1 `labels`.
    /// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
    pub fn bce(&mut self, s: Var, labels: &[f64]) -> Result<Var> {
        let vs = self.value(s);
        if vs.numel() != labels.len() || labels.is_empty() {
            return Err(shape_err("bce", vs.shape(), &[labels.len()]));
        }
        let n = labels.len() as f64;
        let loss = vs
            .data()
            .iter()
            .zip(labels)
            .map(|(&p, &y)| {
                let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / n;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Bce {
                s,
                labels: labels.to_vec(),
            },
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.numel() != 1 {
            return Err(Error::NotScalar(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(lv.shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else {
                continue;
            };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self
                .nodes
                .iter()
                .map(|n| n.value.shape().to_vec())
                .collect(),
        })
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let mut acc = |var: Var, delta: Tensor| match &mut grads[var.0] {
            Some(existing) => existing.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let da = g.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
                let db = g.data().iter().zip(va.data()).map(|(x, y)| x * y).collect();
                acc(*a, Tensor::from_parts(va.shape().to_vec(), da));
                acc(*b, Tensor::from_parts(vb.shape().to_vec(), db));
            }
            Op::Sum(x) => {
                let vx = self.value(*x);
                acc(*x, Tensor::full(vx.shape(), g.item()));
            }
            Op::Dense { x, w, b } => {
                let (vx, vw) = (self.value(*x), self.value(*w));
                let (rows, n, m) = (vx.shape()[0], vw.shape()[0], vw.shape()[1]);
                let mut dx = vec![0.0; rows * n];
                gemm(false, true, rows, m, n, g.data(), vw.data(), 0.0, &mut dx);
                let mut dw = vec![0.0; n * m];
                gemm(true, false, n, rows, m, vx.data(), g.data(), 0.0, &mut dw);
                let mut db = vec![0.0; m];
                for r in 0..rows {
                    for (d, v) in db.iter_mut().zip(g.row(r)) {
                        *d += v;
                    }
                }
                acc(*x, Tensor::from_parts(vec![rows, n], dx));
                acc(*w, Tensor::from_parts(vec![n, m], dw));
                acc(*b, Tensor::from_parts(vec![m], db));
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train,
            } => {
                let vg = self.value(*gamma);
                let (rows, n) = (g.shape()[0], g.shape()[1]);
                let mut dgamma = vec![0.0; n];
                let mut dbeta = vec![0.0; n];
                for r in 0..rows {
                    for j in 0..n {
                        let gv = g.data()[r * n + j];
                        dbeta[j] += gv;
                        dgamma[j] += gv * xhat[r * n + j];
                    }
                }
                let mut dx = vec![0.0; rows * n];
                if *train {
                    // dx = inv_std/B · (B·dx̂ − Σdx̂ − x̂·Σ(dx̂·x̂)), with dx̂ = g·γ
                    let bsz = rows as f64;
                    for j in 0..n {
                        let gam = vg.data()[j];
                        let sum_dxhat = dbeta[j] * gam;
                        let sum_dxhat_xhat = dgamma[j] * gam;
                        for r in 0..rows {
                            let dxhat = g.data()[r * n + j] * gam;
                            dx[r * n + j] = inv_std[j] / bsz
                                * (bsz * dxhat - sum_dxhat - xhat[r * n + j] * sum_dxhat_xhat);
                        }
                    }
                } else {
                    for r in 0..rows {
                        for j in 0..n {
                            dx[r * n + j] = g.data()[r * n + j] * vg.data()[j] * inv_std[j];
                        }
                    }
                }
                acc(*x, Tensor::from_parts(vec![rows, n], dx));
                acc(*gamma, Tensor::from_parts(vec![n], dgamma));
                acc(*beta, Tensor::from_parts(vec![n], dbeta));
            }
            Op::Lstm {
                w_input,
                w_recurrent,
                bias,
                cache,
            } => {
                let (dwi, dwr, db) = self.lstm_backward(cache, self.value(*w_recurrent), g);
                acc(*w_input, dwi);
                acc(*w_recurrent, dwr);
                acc(*bias, db);
            }
            Op::Gather { x, index } => {
                let vx = self.value(*x);
                let cols = vx.cols();
                let mut dx = vec![0.0; vx.numel()];
                for (r, &src) in index.iter().enumerate() {
                    for (d, v) in dx[src * cols..(src + 1) * cols].iter_mut().zip(g.row(r)) {
                        *d += v;
                    }
                }
                acc(*x, Tensor::from_parts(vx.shape().to_vec(), dx));
            }
            Op::Selu(x) => {
                let vx = self.value(*x);
                let dx = vx
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&v, &gv)| {
                        if v > 0.0 {
                            gv * SELU_LAMBDA
                        } else {
                            gv * SELU_LAMBDA * SELU_ALPHA * v.exp()
                        }
                    })
                    .collect();
                acc(*x, Tensor::from_parts(vx.shape().to_vec(), dx));
            }
            Op::Cosine {
                u,
                v,
                norm_u,
                norm_v,
                eps,
            } => {
                let (vu, vv) = (self.value(*u), self.value(*v));
                let out = node.value.data();
                let cols = vu.cols();
                let mut du = vec![0.0; vu.numel()];
                let mut dv = vec![0.0; vv.numel()];
                for r in 0..vu.rows() {
                    let (a, b) = (vu.row(r), vv.row(r));
                    let (na, nb) = (norm_u[r].max(*eps), norm_v[r].max(*eps));
                    let gv = g.data()[r];
                    let cos = out[r];
                    // the norm is a constant below eps, so only the dot term remains
                    let ka = if norm_u[r] > *eps {
                        cos / (na * na)
                    } else {
                        0.0
                    };
                    let kb = if norm_v[r] > *eps {
                        cos / (nb * nb)
                    } else {
                        0.0
                    };
                    let inv = 1.0 / (na * nb);
                    for k in 0..cols {
                        du[r * cols + k] = gv * (b[k] * inv - ka * a[k]);
                        dv[r * cols + k] = gv * (a[k] * inv - kb * b[k]);
                    }
                }
                acc(*u, Tensor::from_parts(vu.shape().to_vec(), du));
                acc(*v, Tensor::from_parts(vv.shape().to_vec(), dv));
            }
            Op::Sigmoid(x) => {
                let s = node.value.data();
                let dx = s
                    .iter()
                    .zip(g.data())
                    .map(|(s, gv)| gv * s * (1.0 - s))
                    .collect();
                acc(*x, Tensor::from_parts(node.value.shape().to_vec(), dx));
            }
            Op::Bce { s, labels } => {
                let vs = self.value(*s);
                let n = labels.len() as f64;
                let scale = g.item() / n;
                let ds = vs
                    .data()
                    .iter()
                    .zip(labels)
                    .map(|(&p, &y)| {
                        if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                            0.0
                        } else {
                            scale * ((1.0 - y) / (1.0 - p) - y / p)
                        }
                    })
                    .collect();
                acc(*s, Tensor::from_parts(vs.shape().to_vec(), ds));
            }
        }
    }

    fn lstm_backward(
        &self,
        cache: &LstmCache,
        wr: &Tensor,
        g_out: &Tensor,
    ) -> (Tensor, Tensor, Tensor) {
        let batch = &cache.batch;
        let (count, steps, dim, hidden) = (batch.count, batch.steps, batch.dim, cache.hidden);
        let g4 = 4 * hidden;
        let per_step = count * hidden;

        let mut dh = g_out.data().to_vec();
        let mut dc = vec![0.0; per_step];
        // rows ordered (sequence, step) to line up with the stacked inputs
        let mut dz_all = vec![0.0; count * steps * g4];
        let mut hprev_all = vec![0.0; count * steps * hidden];
        let mut dz_t = vec![0.0; count * g4];
        let mut dh_new = vec![0.0; per_step];

        for t in (0..steps).rev() {
            let gate_t = &cache.gates[t * count * g4..(t + 1) * count * g4];
            let tanh_t = &cache.tanh_c[t * per_step..(t + 1) * per_step];
            let cprev_t = &cache.c_prev[t * per_step..(t + 1) * per_step];
            let hprev_t = &cache.h_prev[t * per_step..(t + 1) * per_step];
            dz_t.fill(0.0);
            for u in 0..count {
                if !batch.mask[u * steps + t] {
                    continue;
                }
                let gu = &gate_t[u * g4..(u + 1) * g4];
                let dz = &mut dz_t[u * g4..(u + 1) * g4];
                for k in 0..hidden {
                    let idx = u * hidden + k;
                    let (i, f, gg, o) = (
                        gu[k],
                        gu[hidden + k],
                        gu[2 * hidden + k],
                        gu[3 * hidden + k],
                    );
                    let tc = tanh_t[idx];
                    let d_o = dh[idx] * tc;
                    let dct = dc[idx] + dh[idx] * o * (1.0 - tc * tc);
                    dz[k] = dct * gg * i * (1.0 - i);
                    dz[hidden + k] = dct * cprev_t[idx] * f * (1.0 - f);
                    dz[2 * hidden + k] = dct * i * (1.0 - gg * gg);
                    dz[3 * hidden + k] = d_o * o * (1.0 - o);
                    dc[idx] = dct * f;
                }
                let row = u * steps + t;
                dz_all[row * g4..(row + 1) * g4].copy_from_slice(dz);
                hprev_all[row * hidden..(row + 1) * hidden]
                    .copy_from_slice(&hprev_t[u * hidden..(u + 1) * hidden]);
            }
            gemm(
                false,
                true,
                count,
                g4,
                hidden,
                &dz_t,
                wr.data(),
                0.0,
                &mut dh_new,
            );
            for u in 0..count {
                if batch.mask[u * steps + t] {
                    dh[u * hidden..(u + 1) * hidden]
                        .copy_from_slice(&dh_new[u * hidden..(u + 1) * hidden]);
                }
            }
        }

        let rows = count * steps;
        let mut dwi = vec![0.0; dim * g4];
        gemm(
            true,
            false,
            dim,
            rows,
            g4,
            &batch.data,
            &dz_all,
            0.0,
            &mut dwi,
        );
        let mut dwr = vec![0.0; hidden * g4];
        gemm(
            true, false, hidden, rows, g4, &hprev_all, &dz_all, 0.0, &mut dwr,
        );
        let mut db = vec![0.0; g4];
        for r in 0..rows {
            for (d, v) in db.iter_mut().zip(&dz_all[r * g4..(r + 1) * g4]) {
                *d += v;
            }
        }
        (
            Tensor::from_parts(vec![dim, g4], dwi),
            Tensor::from_parts(vec![hidden, g4], dwr),
            Tensor::from_parts(vec![g4], db),
        )
    }
}
