//! Reverse-mode tape over [`Tensor`] values.
//!
//! Nodes are appended in evaluation order, so walking the tape backwards is a
//! reverse topological traversal. Each node keeps an optional closure that
//! pushes its output gradient into its parents' gradient buffers.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::sync::Arc;

use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.01;
pub const COSINE_EPS: f64 = 1e-12;

type BackFn = Box<dyn Fn(&Tensor, &mut GradBuf)>;

struct Node {
    value: Arc<Tensor>,
    backward: Option<BackFn>,
    param: Option<ParamId>,
}

/// Gradient accumulators indexed by node, allocated lazily.
pub struct GradBuf {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl GradBuf {
    fn slot(&mut self, node: usize) -> &mut Tensor {
        let shape = &self.shapes[node];
        self.grads[node].get_or_insert_with(|| Tensor::zeros(shape))
    }

    fn add(&mut self, node: usize, g: &[f64]) {
        for (a, b) in self.slot(node).data_mut().iter_mut().zip(g) {
            *a += b;
        }
    }

    fn add_at(&mut self, node: usize, offset: usize, g: &[f64]) {
        let buf = &mut self.slot(node).data_mut()[offset..offset + g.len()];
        for (a, b) in buf.iter_mut().zip(g) {
            *a += b;
        }
    }

    /// Gradient of the loss with respect to `var`, if it received any.
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }
}

/// Records one forward pass. Single use: `backward` may run once.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    param_nodes: RefCell<HashMap<ParamId, usize>>,
    consumed: Cell<bool>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("id", &self.id).field("shape", &self.shape()).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Arc<Tensor>, backward: Option<BackFn>, param: Option<ParamId>) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, backward, param });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn op(&self, name: &str, value: Tensor, backward: BackFn) -> Result<Var<'_>> {
        if !value.is_finite() {
            return Err(Error::Numeric(format!("{name} produced a non-finite value")));
        }
        Ok(self.push(Arc::new(value), Some(backward), None))
    }

    /// A leaf that never receives gradient updates from the caller's view.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(Arc::new(value), None, None)
    }

    pub fn scalar(&self, x: f64) -> Var<'_> {
        self.constant(Tensor::scalar(x))
    }

    /// Leaf bound to a parameter; repeated calls return the same node.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var<'_> {
        if let Some(&node) = self.param_nodes.borrow().get(&id) {
            return Var { tape: self, id: node };
        }
        let var = self.push(store.value_arc(id), None, Some(id));
        self.param_nodes.borrow_mut().insert(id, var.id);
        var
    }

    /// Runs the reverse sweep from a scalar `loss` and returns every node's gradient.
    pub fn gradients(&self, loss: Var<'_>) -> Result<GradBuf> {
        if self.consumed.replace(true) {
            return Err(Error::Numeric("backward already ran on this tape".into()));
        }
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if !root.value.is_scalar() {
            return Err(Error::shape("backward (loss must be scalar)", root.value.shape(), &[]));
        }
        let mut buf = GradBuf {
            grads: (0..nodes.len()).map(|_| None).collect(),
            shapes: nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        };
        buf.grads[loss.id] = Some(Tensor::full(root.value.shape(), 1.0));
        for id in (0..=loss.id).rev() {
            let Some(grad) = buf.grads[id].take() else { continue };
            if let Some(back) = &nodes[id].backward {
                back(&grad, &mut buf);
            }
            buf.grads[id] = Some(grad);
        }
        Ok(buf)
    }

    /// Reverse sweep that accumulates parameter gradients into `store`.
    pub fn backward(&self, loss: Var<'_>, store: &mut ParamStore) -> Result<()> {
        let buf = self.gradients(loss)?;
        let nodes = self.nodes.borrow();
        for (node, grad) in nodes.iter().zip(&buf.grads) {
            if let (Some(pid), Some(g)) = (node.param, grad) {
                store.accumulate_grad(pid, g);
            }
        }
        Ok(())
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    Ok(())
}

fn require_vector(op: &'static str, t: &Tensor) -> Result<()> {
    if t.rank() != 1 {
        return Err(Error::shape(op, t.shape(), &[t.len()]));
    }
    Ok(())
}

impl<'t> Var<'t> {
    pub fn value(&self) -> Arc<Tensor> {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    /// Value of a scalar node.
    pub fn item(&self) -> f64 {
        self.value().item()
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn unary(
        self,
        name: &str,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Result<Var<'t>> {
        let x = self.value();
        let out = Tensor::new(x.shape().to_vec(), x.data().iter().map(|&v| f(v)).collect())?;
        let y = Arc::new(out.clone());
        let parent = self.id;
        self.tape.op(
            name,
            out,
            Box::new(move |g, buf| {
                let d: Vec<f64> = g
                    .data()
                    .iter()
                    .zip(x.data().iter().zip(y.data()))
                    .map(|(&g, (&x, &y))| g * df(x, y))
                    .collect();
                buf.add(parent, &d);
            }),
        )
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        same_shape("add", &a, &b)?;
        let out = Tensor::new(a.shape().to_vec(), a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect())?;
        let (pa, pb) = (self.id, other.id);
        self.tape.op(
            "add",
            out,
            Box::new(move |g, buf| {
                buf.add(pa, g.data());
                buf.add(pb, g.data());
            }),
        )
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        same_shape("sub", &a, &b)?;
        let out = Tensor::new(a.shape().to_vec(), a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect())?;
        let (pa, pb) = (self.id, other.id);
        self.tape.op(
            "sub",
            out,
            Box::new(move |g, buf| {
                buf.add(pa, g.data());
                let neg: Vec<f64> = g.data().iter().map(|x| -x).collect();
                buf.add(pb, &neg);
            }),
        )
    }

    /// Elementwise product.
    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        same_shape("mul", &a, &b)?;
        let out = Tensor::new(a.shape().to_vec(), a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect())?;
        let (pa, pb) = (self.id, other.id);
        self.tape.op(
            "mul",
            out,
            Box::new(move |g, buf| {
                let ga: Vec<f64> = g.data().iter().zip(b.data()).map(|(g, y)| g * y).collect();
                let gb: Vec<f64> = g.data().iter().zip(a.data()).map(|(g, x)| g * x).collect();
                buf.add(pa, &ga);
                buf.add(pb, &gb);
            }),
        )
    }

    pub fn scale(self, c: f64) -> Result<Var<'t>> {
        self.unary("scale", move |x| c * x, move |_, _| c)
    }

    pub fn sigmoid(self) -> Result<Var<'t>> {
        self.unary("sigmoid", sigmoid, |_, y| y * (1.0 - y))
    }

    pub fn tanh(self) -> Result<Var<'t>> {
        self.unary("tanh", f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn leaky_relu(self) -> Result<Var<'t>> {
        self.unary(
            "leaky_relu",
            |x| if x > 0.0 { x } else { LEAKY_SLOPE * x },
            |x, _| if x > 0.0 { 1.0 } else { LEAKY_SLOPE },
        )
    }

    /// `[k] x [k, n] -> [n]` or `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), rhs.value());
        let (m, k) = match a.shape() {
            [k] => (1, *k),
            [m, k] => (*m, *k),
            s => return Err(Error::shape("matmul", s, b.shape())),
        };
        let n = match b.shape() {
            [k2, n] if *k2 == k => *n,
            s => return Err(Error::shape("matmul", a.shape(), s)),
        };
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &a.data()[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            for (p, &av) in arow.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let brow = &b.data()[p * n..(p + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        let shape = if a.rank() == 1 { vec![n] } else { vec![m, n] };
        let (pa, pb) = (self.id, rhs.id);
        self.tape.op(
            "matmul",
            Tensor::new(shape, out)?,
            Box::new(move |g, buf| {
                let g = g.data();
                // dA = G B^T
                let mut ga = vec![0.0; m * k];
                for i in 0..m {
                    let grow = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let brow = &b.data()[p * n..(p + 1) * n];
                        ga[i * k + p] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                    }
                }
                buf.add(pa, &ga);
                // dB = A^T G
                let mut gb = vec![0.0; k * n];
                for i in 0..m {
                    let grow = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let av = a.data()[i * k + p];
                        if av == 0.0 {
                            continue;
                        }
                        for (o, &gv) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                            *o += av * gv;
                        }
                    }
                }
                buf.add(pb, &gb);
            }),
        )
    }

    /// Row `index` of a matrix as a vector.
    pub fn row(self, index: usize) -> Result<Var<'t>> {
        let m = self.value();
        if m.rank() != 2 || index >= m.rows() {
            return Err(Error::shape("embedding_lookup", m.shape(), &[index]));
        }
        let cols = m.cols();
        let out = Tensor::vector(m.row(index).to_vec());
        let parent = self.id;
        self.tape.op(
            "embedding_lookup",
            out,
            Box::new(move |g, buf| buf.add_at(parent, index * cols, g.data())),
        )
    }

    pub fn sum(self) -> Result<Var<'t>> {
        let x = self.value();
        let n = x.len();
        let parent = self.id;
        self.tape.op(
            "sum",
            Tensor::scalar(x.data().iter().sum()),
            Box::new(move |g, buf| buf.add(parent, &vec![g.item(); n])),
        )
    }

    pub fn mean(self) -> Result<Var<'t>> {
        let n = self.value().len();
        self.sum()?.scale(1.0 / n as f64)
    }

    pub fn dot(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        same_shape("dot", &a, &b)?;
        let out = a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum();
        let (pa, pb) = (self.id, other.id);
        self.tape.op(
            "dot",
            Tensor::scalar(out),
            Box::new(move |g, buf| {
                let g = g.item();
                let ga: Vec<f64> = b.data().iter().map(|y| g * y).collect();
                let gb: Vec<f64> = a.data().iter().map(|x| g * x).collect();
                buf.add(pa, &ga);
                buf.add(pb, &gb);
            }),
        )
    }

    /// `a.b / (|a||b| + eps)`; zero-norm inputs are a numeric error.
    pub fn cosine(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        same_shape("cosine_similarity", &a, &b)?;
        require_vector("cosine_similarity", &a)?;
        let na = a.data().iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.data().iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return Err(Error::Numeric("cosine similarity of a zero-norm vector".into()));
        }
        let d: f64 = a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum();
        let denom = na * nb + COSINE_EPS;
        let s = d / denom;
        let (pa, pb) = (self.id, other.id);
        self.tape.op(
            "cosine_similarity",
            Tensor::scalar(s),
            Box::new(move |g, buf| {
                let g = g.item();
                // ds/da = b/denom - d * nb * (a/na) / denom^2
                let ca = d * nb / (na * denom * denom);
                let cb = d * na / (nb * denom * denom);
                let ga: Vec<f64> = a.data().iter().zip(b.data()).map(|(x, y)| g * (y / denom - ca * x)).collect();
                let gb: Vec<f64> = a.data().iter().zip(b.data()).map(|(x, y)| g * (x / denom - cb * y)).collect();
                buf.add(pa, &ga);
                buf.add(pb, &gb);
            }),
        )
    }

    pub fn softmax(self) -> Result<Var<'t>> {
        let x = self.value();
        require_vector("softmax", &x)?;
        let y = Arc::new(Tensor::vector(softmax(x.data())));
        let out = (*y).clone();
        let parent = self.id;
        self.tape.op(
            "softmax",
            out,
            Box::new(move |g, buf| {
                let dot: f64 = g.data().iter().zip(y.data()).map(|(g, y)| g * y).sum();
                let d: Vec<f64> = g.data().iter().zip(y.data()).map(|(g, y)| y * (g - dot)).collect();
                buf.add(parent, &d);
            }),
        )
    }

    pub fn log_softmax(self) -> Result<Var<'t>> {
        let x = self.value();
        require_vector("log_softmax", &x)?;
        let lse = log_sum_exp(x.data());
        let out = Tensor::vector(x.data().iter().map(|v| v - lse).collect());
        let p: Vec<f64> = out.data().iter().map(|v| v.exp()).collect();
        let parent = self.id;
        self.tape.op(
            "log_softmax",
            out,
            Box::new(move |g, buf| {
                let total: f64 = g.data().iter().sum();
                let d: Vec<f64> = g.data().iter().zip(&p).map(|(g, p)| g - p * total).collect();
                buf.add(parent, &d);
            }),
        )
    }

    pub fn log_sum_exp(self) -> Result<Var<'t>> {
        let x = self.value();
        require_vector("log_sum_exp", &x)?;
        let lse = log_sum_exp(x.data());
        let p: Vec<f64> = x.data().iter().map(|v| (v - lse).exp()).collect();
        let parent = self.id;
        self.tape.op(
            "log_sum_exp",
            Tensor::scalar(lse),
            Box::new(move |g, buf| {
                let g = g.item();
                let d: Vec<f64> = p.iter().map(|p| g * p).collect();
                buf.add(parent, &d);
            }),
        )
    }

    /// Element `index` of a vector as a scalar.
    pub fn pick(self, index: usize) -> Result<Var<'t>> {
        let x = self.value();
        require_vector("pick", &x)?;
        if index >= x.len() {
            return Err(Error::shape("pick", x.shape(), &[index]));
        }
        let parent = self.id;
        self.tape.op(
            "pick",
            Tensor::scalar(x.data()[index]),
            Box::new(move |g, buf| buf.add_at(parent, index, &[g.item()])),
        )
    }

    /// `out_k = sum_ij left_i K[i, j, k] right_j` for `K` of shape `[p, q, r]`.
    pub fn bilinear(self, kernel: Var<'t>, right: Var<'t>) -> Result<Var<'t>> {
        let (l, k, r) = (self.value(), kernel.value(), right.value());
        let (p, q, n) = match k.shape() {
            [p, q, n] => (*p, *q, *n),
            s => return Err(Error::shape("bilinear_form", s, l.shape())),
        };
        if l.shape() != [p] {
            return Err(Error::shape("bilinear_form", l.shape(), k.shape()));
        }
        if r.shape() != [q] {
            return Err(Error::shape("bilinear_form", k.shape(), r.shape()));
        }
        let mut out = vec![0.0; n];
        for (i, &li) in l.data().iter().enumerate() {
            if li == 0.0 {
                continue;
            }
            for (j, &rj) in r.data().iter().enumerate() {
                let c = li * rj;
                if c == 0.0 {
                    continue;
                }
                let ks = &k.data()[(i * q + j) * n..(i * q + j + 1) * n];
                for (o, &kv) in out.iter_mut().zip(ks) {
                    *o += c * kv;
                }
            }
        }
        let (pl, pk, pr) = (self.id, kernel.id, right.id);
        self.tape.op(
            "bilinear_form",
            Tensor::vector(out),
            Box::new(move |g, buf| {
                let g = g.data();
                let mut gl = vec![0.0; p];
                let mut gr = vec![0.0; q];
                let mut gk = vec![0.0; p * q * n];
                for i in 0..p {
                    let li = l.data()[i];
                    for j in 0..q {
                        let rj = r.data()[j];
                        let base = (i * q + j) * n;
                        let ks = &k.data()[base..base + n];
                        let gk_dot: f64 = ks.iter().zip(g).map(|(k, g)| k * g).sum();
                        gl[i] += gk_dot * rj;
                        gr[j] += gk_dot * li;
                        let c = li * rj;
                        if c != 0.0 {
                            for (o, &gv) in gk[base..base + n].iter_mut().zip(g) {
                                *o += c * gv;
                            }
                        }
                    }
                }
                buf.add(pl, &gl);
                buf.add(pk, &gk);
                buf.add(pr, &gr);
            }),
        )
    }
}

/// Concatenates vectors end to end.
pub fn concat<'t>(parts: &[Var<'t>]) -> Result<Var<'t>> {
    let tape = parts
        .first()
        .ok_or_else(|| Error::shape("concat", &[], &[]))?
        .tape;
    let mut data = Vec::new();
    let mut spans = Vec::with_capacity(parts.len());
    for v in parts {
        let t = v.value();
        require_vector("concat", &t)?;
        spans.push((v.id, data.len(), t.len()));
        data.extend_from_slice(t.data());
    }
    tape.op(
        "concat",
        Tensor::vector(data),
        Box::new(move |g, buf| {
            for &(id, start, len) in &spans {
                buf.add(id, &g.data()[start..start + len]);
            }
        }),
    )
}

/// Gathers scalars into a vector.
pub fn stack<'t>(scalars: &[Var<'t>]) -> Result<Var<'t>> {
    let tape = scalars
        .first()
        .ok_or_else(|| Error::shape("stack", &[], &[]))?
        .tape;
    let mut data = Vec::with_capacity(scalars.len());
    for s in scalars {
        let t = s.value();
        if !t.is_scalar() {
            return Err(Error::shape("stack", t.shape(), &[]));
        }
        data.push(t.item());
    }
    let ids: Vec<usize> = scalars.iter().map(|s| s.id).collect();
    tape.op(
        "stack",
        Tensor::vector(data),
        Box::new(move |g, buf| {
            for (&id, &gv) in ids.iter().zip(g.data()) {
                buf.add(id, &[gv]);
            }
        }),
    )
}

/// Sum of scalars.
pub fn sum_all<'t>(scalars: &[Var<'t>]) -> Result<Var<'t>> {
    stack(scalars)?.sum()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted `log(sum(exp(x)))`.
pub fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}
