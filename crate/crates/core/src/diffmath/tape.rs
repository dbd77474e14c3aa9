use std::fmt;
use std::sync::Arc;

use super::tensor::{matmul, matmul_nt, matmul_tn, Tensor};
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation kinds, used for gradient-check reports and fault injection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Leaf,
    MatMul,
    Add,
    AddBias,
    Mul,
    Scale,
    Concat,
    SegmentSum,
    GatherRows,
    Swish,
    Sigmoid,
    Sum,
    Mean,
    MseLoss,
    BceWithLogits,
}

impl OpKind {
    pub const DIFFERENTIABLE: [OpKind; 14] = [
        OpKind::MatMul,
        OpKind::Add,
        OpKind::AddBias,
        OpKind::Mul,
        OpKind::Scale,
        OpKind::Concat,
        OpKind::SegmentSum,
        OpKind::GatherRows,
        OpKind::Swish,
        OpKind::Sigmoid,
        OpKind::Sum,
        OpKind::Mean,
        OpKind::MseLoss,
        OpKind::BceWithLogits,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Leaf => "leaf",
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::AddBias => "add_bias",
            OpKind::Mul => "mul",
            OpKind::Scale => "scale",
            OpKind::Concat => "concat",
            OpKind::SegmentSum => "segment_sum",
            OpKind::GatherRows => "gather_rows",
            OpKind::Swish => "swish",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Sum => "sum",
            OpKind::Mean => "mean",
            OpKind::MseLoss => "mse_loss",
            OpKind::BceWithLogits => "bce_with_logits",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::DIFFERENTIABLE.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Concat { parts: Vec<Var>, axis: usize },
    SegmentSum { values: Var, ids: Arc<[usize]> },
    GatherRows { src: Var, idx: Arc<[usize]> },
    Swish(Var),
    Sigmoid(Var),
    Sum(Var),
    Mean(Var),
    Mse(Var, Var),
    Bce(Var, Var),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::AddBias(..) => OpKind::AddBias,
            Op::Mul(..) => OpKind::Mul,
            Op::Scale(..) => OpKind::Scale,
            Op::Concat { .. } => OpKind::Concat,
            Op::SegmentSum { .. } => OpKind::SegmentSum,
            Op::GatherRows { .. } => OpKind::GatherRows,
            Op::Swish(_) => OpKind::Swish,
            Op::Sigmoid(_) => OpKind::Sigmoid,
            Op::Sum(_) => OpKind::Sum,
            Op::Mean(_) => OpKind::Mean,
            Op::Mse(..) => OpKind::MseLoss,
            Op::Bce(..) => OpKind::BceWithLogits,
        }
    }
}

struct Node {
    value: Arc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Scales the backward contribution of one op kind. Test fixture for the
/// gradient checker's negative control.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackwardFault {
    pub op: OpKind,
    pub factor: f64,
}

/// Records a computation for reverse-mode differentiation.
///
/// Single-threaded and append-only, so the recording order is a topological
/// order and [`Tape::backward`] simply walks it in reverse.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    fault: Option<BackwardFault>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn rank2(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    t.dims2().ok_or_else(|| Error::ShapeMismatch {
        op,
        lhs: t.shape().to_vec(),
        rhs: vec![0, 0],
    })
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fault(fault: BackwardFault) -> Self {
        Self {
            nodes: Vec::new(),
            fault: Some(fault),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.push_shared(Arc::new(value), op, requires_grad)
    }

    fn push_shared(&mut self, value: Arc<Tensor>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn grad_any(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Differentiable input sharing storage with a parameter store.
    pub fn leaf_shared(&mut self, value: Arc<Tensor>) -> Var {
        self.push_shared(value, Op::Leaf, true)
    }

    /// Input that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Constant sharing storage with a parameter store.
    pub fn constant_shared(&mut self, value: Arc<Tensor>) -> Var {
        self.push_shared(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (_, k) = rank2("matmul", ta)?;
        let (k2, _) = rank2("matmul", tb)?;
        if k != k2 {
            return Err(mismatch("matmul", ta, tb));
        }
        let out = matmul(ta, tb);
        let rg = self.grad_any(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    /// Elementwise sum of equal shapes, or a row-broadcast bias when `b` is a
    /// vector matching the column count of rank-2 `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let rg = self.grad_any(&[a, b]);
        if ta.shape() == tb.shape() {
            let mut out = ta.clone();
            out.add_assign(tb);
            return Ok(self.push(out, Op::Add(a, b), rg));
        }
        match (ta.dims2(), tb.shape()) {
            (Some((r, c)), [n]) if *n == c => {
                let mut out = ta.clone();
                let bias = tb.data();
                for i in 0..r {
                    for (o, bv) in out.data_mut()[i * c..(i + 1) * c].iter_mut().zip(bias) {
                        *o += bv;
                    }
                }
                Ok(self.push(out, Op::AddBias(a, b), rg))
            }
            _ => Err(mismatch("add", ta, tb)),
        }
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch("mul", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.grad_any(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x * c);
        let rg = self.grad_any(&[a]);
        self.push(out, Op::Scale(a, c), rg)
    }

    /// Concatenate rank-2 tensors along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        if parts.is_empty() || axis > 1 {
            return Err(Error::ShapeMismatch {
                op: "concat",
                lhs: vec![parts.len()],
                rhs: vec![axis],
            });
        }
        let first = self.value(parts[0]);
        let (r0, c0) = rank2("concat", first)?;
        for &p in &parts[1..] {
            let t = self.value(p);
            let (r, c) = rank2("concat", t)?;
            if (axis == 1 && r != r0) || (axis == 0 && c != c0) {
                return Err(mismatch("concat", first, t));
            }
        }
        let out = if axis == 0 {
            let rows: usize = parts.iter().map(|&p| self.value(p).dims2().unwrap().0).sum();
            let mut data = Vec::with_capacity(rows * c0);
            for &p in parts {
                data.extend_from_slice(self.value(p).data());
            }
            Tensor::matrix(rows, c0, data)?
        } else {
            let cols: usize = parts.iter().map(|&p| self.value(p).dims2().unwrap().1).sum();
            let mut data = Vec::with_capacity(r0 * cols);
            for i in 0..r0 {
                for &p in parts {
                    data.extend_from_slice(self.value(p).row(i));
                }
            }
            Tensor::matrix(r0, cols, data)?
        };
        let rg = self.grad_any(parts);
        Ok(self.push(
            out,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// `out[s] = Σ_{e : ids[e] = s} values[e]` over rows.
    pub fn segment_sum(&mut self, values: Var, ids: Arc<[usize]>, num_segments: usize) -> Result<Var> {
        let tv = self.value(values);
        let (e, f) = rank2("segment_sum", tv)?;
        if ids.len() != e {
            return Err(Error::ShapeMismatch {
                op: "segment_sum",
                lhs: tv.shape().to_vec(),
                rhs: vec![ids.len()],
            });
        }
        if let Some(&bad) = ids.iter().find(|&&s| s >= num_segments) {
            return Err(Error::ShapeMismatch {
                op: "segment_sum",
                lhs: vec![num_segments],
                rhs: vec![bad],
            });
        }
        let mut out = Tensor::zeros(&[num_segments, f]);
        for (k, &s) in ids.iter().enumerate() {
            let src = tv.row(k);
            for (o, v) in out.data_mut()[s * f..(s + 1) * f].iter_mut().zip(src) {
                *o += v;
            }
        }
        let rg = self.grad_any(&[values]);
        Ok(self.push(out, Op::SegmentSum { values, ids }, rg))
    }

    /// `out[k] = src[idx[k]]` over rows.
    pub fn gather_rows(&mut self, src: Var, idx: Arc<[usize]>) -> Result<Var> {
        let ts = self.value(src);
        let (r, c) = rank2("gather_rows", ts)?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= r) {
            return Err(Error::ShapeMismatch {
                op: "gather_rows",
                lhs: vec![r, c],
                rhs: vec![bad],
            });
        }
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx.iter() {
            data.extend_from_slice(ts.row(i));
        }
        let out = Tensor::matrix(idx.len(), c, data)?;
        let rg = self.grad_any(&[src]);
        Ok(self.push(out, Op::GatherRows { src, idx }, rg))
    }

    /// `x · sigmoid(x)`.
    pub fn swish(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x * sigmoid(x));
        let rg = self.grad_any(&[a]);
        self.push(out, Op::Swish(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let rg = self.grad_any(&[a]);
        self.push(out, Op::Sigmoid(a), rg)
    }

    /// Sum of all entries, as a rank-0 tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.grad_any(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(mismatch("mean", t, t));
        }
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        let rg = self.grad_any(&[a]);
        Ok(self.push(Tensor::scalar(m), Op::Mean(a), rg))
    }

    /// Mean squared error between equal-size tensors.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (tp, tt) = (self.value(pred), self.value(target));
        if tp.len() != tt.len() || tp.is_empty() {
            return Err(mismatch("mse_loss", tp, tt));
        }
        let n = tp.len() as f64;
        let l = tp.data().iter().zip(tt.data()).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
        let rg = self.grad_any(&[pred, target]);
        Ok(self.push(Tensor::scalar(l), Op::Mse(pred, target), rg))
    }

    /// Mean of `max(z,0) − z·y + ln(1 + e^{−|z|})`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Var) -> Result<Var> {
        let (tz, ty) = (self.value(logits), self.value(targets));
        if tz.len() != ty.len() || tz.is_empty() {
            return Err(mismatch("bce_with_logits", tz, ty));
        }
        let n = tz.len() as f64;
        let l = tz
            .data()
            .iter()
            .zip(ty.data())
            .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
            .sum::<f64>()
            / n;
        let rg = self.grad_any(&[logits, targets]);
        Ok(self.push(Tensor::scalar(l), Op::Bce(logits, targets), rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(Error::NonScalarLoss(lt.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::filled(lt.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let factor = match self.fault {
                Some(f) if f.op == node.op.kind() => f.factor,
                _ => 1.0,
            };
            let send = |grads: &mut Vec<Option<Tensor>>, v: Var, mut contrib: Tensor| {
                if !self.nodes[v.0].requires_grad {
                    return;
                }
                if factor != 1.0 {
                    contrib.scale_assign(factor);
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&contrib),
                    slot @ None => *slot = Some(contrib),
                }
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    if self.nodes[a.0].requires_grad {
                        send(&mut grads, *a, matmul_nt(&g, tb));
                    }
                    if self.nodes[b.0].requires_grad {
                        send(&mut grads, *b, matmul_tn(ta, &g));
                    }
                }
                Op::Add(a, b) => {
                    send(&mut grads, *a, g.clone());
                    send(&mut grads, *b, g);
                }
                Op::AddBias(a, b) => {
                    let (r, c) = g.dims2().unwrap();
                    let mut db = Tensor::zeros(&[c]);
                    for i in 0..r {
                        for (d, v) in db.data_mut().iter_mut().zip(g.row(i)) {
                            *d += v;
                        }
                    }
                    send(&mut grads, *a, g);
                    send(&mut grads, *b, db);
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let da = elementwise(&g, tb, |gv, bv| gv * bv);
                    let db = elementwise(&g, ta, |gv, av| gv * av);
                    send(&mut grads, *a, da);
                    send(&mut grads, *b, db);
                }
                Op::Scale(a, c) => send(&mut grads, *a, g.map(|v| v * c)),
                Op::Concat { parts, axis } => {
                    let (rows, cols) = g.dims2().unwrap();
                    let mut start = 0;
                    for &p in parts {
                        let (pr, pc) = self.value(p).dims2().unwrap();
                        let mut data = Vec::with_capacity(pr * pc);
                        if *axis == 0 {
                            data.extend_from_slice(&g.data()[start * cols..(start + pr) * cols]);
                            start += pr;
                        } else {
                            for i in 0..rows {
                                data.extend_from_slice(&g.row(i)[start..start + pc]);
                            }
                            start += pc;
                        }
                        send(&mut grads, p, Tensor::matrix(pr, pc, data).unwrap());
                    }
                }
                Op::SegmentSum { values, ids } => {
                    let f = g.dims2().unwrap().1;
                    let mut data = Vec::with_capacity(ids.len() * f);
                    for &s in ids.iter() {
                        data.extend_from_slice(g.row(s));
                    }
                    send(&mut grads, *values, Tensor::matrix(ids.len(), f, data).unwrap());
                }
                Op::GatherRows { src, idx } => {
                    let ts = self.value(*src);
                    let (_, c) = ts.dims2().unwrap();
                    let mut d = Tensor::zeros(ts.shape());
                    for (k, &i) in idx.iter().enumerate() {
                        for (o, v) in d.data_mut()[i * c..(i + 1) * c].iter_mut().zip(g.row(k)) {
                            *o += v;
                        }
                    }
                    send(&mut grads, *src, d);
                }
                Op::Swish(a) => {
                    let d = elementwise(&g, self.value(*a), |gv, x| {
                        let s = sigmoid(x);
                        gv * (s + x * s * (1.0 - s))
                    });
                    send(&mut grads, *a, d);
                }
                Op::Sigmoid(a) => {
                    let d = elementwise(&g, &node.value, |gv, s| gv * s * (1.0 - s));
                    send(&mut grads, *a, d);
                }
                Op::Sum(a) => {
                    let gv = g.data()[0];
                    send(&mut grads, *a, Tensor::filled(self.value(*a).shape(), gv));
                }
                Op::Mean(a) => {
                    let t = self.value(*a);
                    let gv = g.data()[0] / t.len() as f64;
                    send(&mut grads, *a, Tensor::filled(t.shape(), gv));
                }
                Op::Mse(p, t) => {
                    let (tp, tt) = (self.value(*p), self.value(*t));
                    let c = 2.0 * g.data()[0] / tp.len() as f64;
                    let data: Vec<f64> =
                        tp.data().iter().zip(tt.data()).map(|(a, b)| c * (a - b)).collect();
                    let dp = Tensor::new(tp.shape().to_vec(), data.clone()).unwrap();
                    let dt = Tensor::new(tt.shape().to_vec(), data.iter().map(|v| -v).collect()).unwrap();
                    send(&mut grads, *p, dp);
                    send(&mut grads, *t, dt);
                }
                Op::Bce(z, y) => {
                    let (tz, ty) = (self.value(*z), self.value(*y));
                    let c = g.data()[0] / tz.len() as f64;
                    let dz = tz.data().iter().zip(ty.data()).map(|(&zv, &yv)| c * (sigmoid(zv) - yv)).collect();
                    let dy = tz.data().iter().map(|&zv| -c * zv).collect();
                    send(&mut grads, *z, Tensor::new(tz.shape().to_vec(), dz).unwrap());
                    send(&mut grads, *y, Tensor::new(ty.shape().to_vec(), dy).unwrap());
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn elementwise(g: &Tensor, x: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = g.data().iter().zip(x.data()).map(|(&a, &b)| f(a, b)).collect();
    Tensor::new(g.shape().to_vec(), data).unwrap()
}

/// Result of [`Tape::backward`]. Leaves only keep their gradients.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of a leaf, `None` if the loss does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of a leaf, zeros of `shape` if unreached.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}
