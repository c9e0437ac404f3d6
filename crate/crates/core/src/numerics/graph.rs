//! Reverse-mode differentiation over a tape of dense-array operations.
//!
//! A [`Graph`] records every operation eagerly: values are computed as nodes
//! are pushed, and [`Graph::backward`] walks the tape in reverse, writing
//! parameter gradients into a [`Gradients`] buffer. Parameter values are
//! borrowed from the [`ParamStore`], never copied onto the tape.

use ndarray::linalg::{general_mat_mul, general_mat_vec_mul};
use ndarray::ArrayViewMut1;
use rand::Rng;

use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::{self, view2, view2_mut, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    /// `W[m,k] · x[k]`
    MatVec(NodeId, NodeId),
    /// `A[m,k] · B[k,n]`
    MatMul(NodeId, NodeId),
    /// `A[m,k] · B[n,k]^T`
    MatMulNT(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// `A[m,n] + b[n]` broadcast over rows.
    AddRow(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Concat(Vec<NodeId>),
    ConcatCols(NodeId, NodeId),
    StackRows(Vec<NodeId>),
    Row(NodeId, usize),
    Slice(NodeId, usize),
    SoftmaxRows(NodeId),
    /// `s[i,j] = v · tanh(A[i] + B[j])`
    AdditiveScores(NodeId, NodeId, NodeId),
    /// `[i f g o]` pre-activations and previous cell state to `[h, c]`.
    LstmGates(NodeId, NodeId),
    CrossEntropy(NodeId, usize),
    Sum(NodeId),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Option<Tensor>,
    needs_grad: bool,
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<NodeId>>,
}

fn shape_panic(op: &str, a: &[usize], b: &[usize]) -> ! {
    panic!("shape mismatch in {op}: {a:?} vs {b:?}")
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph {
            params,
            nodes: Vec::with_capacity(256),
            param_nodes: vec![None; params.len()],
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        let node = &self.nodes[id.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(p)) => self.params.tensor(*p),
            _ => unreachable!("node without value"),
        }
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value: Some(value),
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn ng(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    pub fn constant(&mut self, t: Tensor) -> NodeId {
        self.push(Op::Constant, t, false)
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(n) = self.param_nodes[id.0] {
            return n;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            needs_grad: true,
        });
        let n = NodeId(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(n);
        n
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> NodeId {
        let (wt, xt) = (self.value(w), self.value(x));
        if wt.shape().len() != 2 || wt.cols() != xt.len() {
            shape_panic("matvec", wt.shape(), xt.shape());
        }
        let m = wt.rows();
        let mut y = vec![0.0; m];
        general_mat_vec_mul(
            1.0,
            &wt.view2(),
            &xt.view1(),
            0.0,
            &mut ArrayViewMut1::from(&mut y[..]),
        );
        let ng = self.ng(w) || self.ng(x);
        self.push(Op::MatVec(w, x), Tensor::vector(y), ng)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (at, bt) = (self.value(a), self.value(b));
        if at.cols() != bt.rows() {
            shape_panic("matmul", at.shape(), bt.shape());
        }
        let (m, n) = (at.rows(), bt.cols());
        let mut y = vec![0.0; m * n];
        general_mat_mul(1.0, &at.view2(), &bt.view2(), 0.0, &mut view2_mut(&mut y, m, n));
        let ng = self.ng(a) || self.ng(b);
        self.push(Op::MatMul(a, b), Tensor::matrix(m, n, y), ng)
    }

    /// `A · B^T`, the row-batched form of applying a weight matrix `B`.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (at, bt) = (self.value(a), self.value(b));
        if at.cols() != bt.cols() {
            shape_panic("matmul_nt", at.shape(), bt.shape());
        }
        let (m, n) = (at.rows(), bt.rows());
        let mut y = vec![0.0; m * n];
        general_mat_mul(1.0, &at.view2(), &bt.view2().t(), 0.0, &mut view2_mut(&mut y, m, n));
        let ng = self.ng(a) || self.ng(b);
        self.push(Op::MatMulNT(a, b), Tensor::matrix(m, n, y), ng)
    }

    fn zip(&mut self, a: NodeId, b: NodeId, name: &str, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (at, bt) = (self.value(a), self.value(b));
        if at.len() != bt.len() {
            shape_panic(name, at.shape(), bt.shape());
        }
        let v = at
            .values()
            .iter()
            .zip(bt.values())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::from_shape(at.shape(), v).expect("same length")
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let t = self.zip(a, b, "add", |x, y| x + y);
        let ng = self.ng(a) || self.ng(b);
        self.push(Op::Add(a, b), t, ng)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let t = self.zip(a, b, "mul", |x, y| x * y);
        let ng = self.ng(a) || self.ng(b);
        self.push(Op::Mul(a, b), t, ng)
    }

    pub fn add_row(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (at, bt) = (self.value(a), self.value(b));
        if at.cols() != bt.len() {
            shape_panic("add_row", at.shape(), bt.shape());
        }
        let c = at.cols();
        let mut v = at.values().to_vec();
        for row in v.chunks_mut(c) {
            for (x, &y) in row.iter_mut().zip(bt.values()) {
                *x += y;
            }
        }
        let t = Tensor::from_shape(at.shape(), v).expect("same shape");
        let ng = self.ng(a) || self.ng(b);
        self.push(Op::AddRow(a, b), t, ng)
    }

    fn map(&self, a: NodeId, f: impl Fn(f64) -> f64) -> Tensor {
        let at = self.value(a);
        Tensor::from_shape(at.shape(), at.values().iter().map(|&x| f(x)).collect())
            .expect("same shape")
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let t = self.map(a, f64::tanh);
        let ng = self.ng(a);
        self.push(Op::Tanh(a), t, ng)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let t = self.map(a, tensor::sigmoid);
        let ng = self.ng(a);
        self.push(Op::Sigmoid(a), t, ng)
    }

    /// Concatenates the flattened values of every input into one vector.
    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut v = Vec::new();
        for &p in parts {
            v.extend_from_slice(self.value(p).values());
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(Op::Concat(parts.to_vec()), Tensor::vector(v), ng)
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (at, bt) = (self.value(a), self.value(b));
        if at.rows() != bt.rows() {
            shape_panic("concat_cols", at.shape(), bt.shape());
        }
        let (m, p, q) = (at.rows(), at.cols(), bt.cols());
        let mut v = Vec::with_capacity(m * (p + q));
        for i in 0..m {
            v.extend_from_slice(at.row(i));
            v.extend_from_slice(bt.row(i));
        }
        let ng = self.ng(a) || self.ng(b);
        self.push(Op::ConcatCols(a, b), Tensor::matrix(m, p + q, v), ng)
    }

    /// Stacks equal-length vectors into a `[k, n]` matrix.
    pub fn stack_rows(&mut self, rows: &[NodeId]) -> NodeId {
        assert!(!rows.is_empty(), "stack_rows needs at least one row");
        let n = self.value(rows[0]).len();
        let mut v = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            let rt = self.value(r);
            if rt.len() != n {
                shape_panic("stack_rows", &[n], rt.shape());
            }
            v.extend_from_slice(rt.values());
        }
        let ng = rows.iter().any(|&r| self.ng(r));
        self.push(Op::StackRows(rows.to_vec()), Tensor::matrix(rows.len(), n, v), ng)
    }

    pub fn row(&mut self, a: NodeId, i: usize) -> NodeId {
        let at = self.value(a);
        assert!(i < at.rows(), "row {i} out of range for {:?}", at.shape());
        let t = Tensor::vector(at.row(i).to_vec());
        let ng = self.ng(a);
        self.push(Op::Row(a, i), t, ng)
    }

    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let at = self.value(a);
        assert!(start + len <= at.len(), "slice out of range");
        let t = Tensor::vector(at.values()[start..start + len].to_vec());
        let ng = self.ng(a);
        self.push(Op::Slice(a, start), t, ng)
    }

    /// Row-wise softmax; a vector is a single row.
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let at = self.value(a);
        let c = at.cols();
        let mut v = Vec::with_capacity(at.len());
        for row in at.values().chunks(c) {
            v.extend(tensor::softmax(row));
        }
        let t = Tensor::from_shape(at.shape(), v).expect("same shape");
        let ng = self.ng(a);
        self.push(Op::SoftmaxRows(a), t, ng)
    }

    /// Additive attention scores `s[i,j] = v · tanh(a[i] + b[j])`.
    pub fn additive_scores(&mut self, a: NodeId, b: NodeId, v: NodeId) -> NodeId {
        let (at, bt, vt) = (self.value(a), self.value(b), self.value(v));
        let k = vt.len();
        if at.cols() != k || bt.cols() != k {
            shape_panic("additive_scores", at.shape(), bt.shape());
        }
        let (n, m) = (at.rows(), bt.rows());
        let mut s = vec![0.0; n * m];
        for i in 0..n {
            let ai = at.row(i);
            for j in 0..m {
                let bj = bt.row(j);
                let mut acc = 0.0;
                for l in 0..k {
                    acc += vt.values()[l] * (ai[l] + bj[l]).tanh();
                }
                s[i * m + j] = acc;
            }
        }
        let ng = self.ng(a) || self.ng(b) || self.ng(v);
        self.push(Op::AdditiveScores(a, b, v), Tensor::matrix(n, m, s), ng)
    }

    /// Gate nonlinearities and state update of an LSTM cell. Returns a node
    /// holding `[h, c]`.
    pub fn lstm_gates(&mut self, pre: NodeId, c_prev: NodeId) -> NodeId {
        let (pt, ct) = (self.value(pre), self.value(c_prev));
        let h = ct.len();
        if pt.len() != 4 * h {
            shape_panic("lstm_gates", pt.shape(), ct.shape());
        }
        let p = pt.values();
        let mut out = vec![0.0; 2 * h];
        for u in 0..h {
            let i = tensor::sigmoid(p[u]);
            let f = tensor::sigmoid(p[h + u]);
            let g = p[2 * h + u].tanh();
            let o = tensor::sigmoid(p[3 * h + u]);
            let c = f * ct.values()[u] + i * g;
            out[h + u] = c;
            out[u] = o * c.tanh();
        }
        let ng = self.ng(pre) || self.ng(c_prev);
        self.push(Op::LstmGates(pre, c_prev), Tensor::vector(out), ng)
    }

    /// `-log softmax(logits)[class]` as a scalar node.
    pub fn cross_entropy(&mut self, logits: NodeId, class: usize) -> NodeId {
        let lt = self.value(logits);
        assert!(class < lt.len(), "class {class} out of range");
        let v = tensor::cross_entropy(lt.values(), class);
        let ng = self.ng(logits);
        self.push(Op::CrossEntropy(logits, class), Tensor::scalar(v), ng)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).values().iter().sum();
        let ng = self.ng(a);
        self.push(Op::Sum(a), Tensor::scalar(v), ng)
    }

    /// Inverted dropout: in training mode each component is zeroed with
    /// probability `p` and survivors are scaled by `1/(1-p)`. Identity otherwise.
    pub fn dropout<R: Rng>(&mut self, x: NodeId, p: f64, training: bool, rng: &mut R) -> NodeId {
        assert!((0.0..1.0).contains(&p), "dropout rate must lie in [0, 1)");
        if !training || p == 0.0 {
            return x;
        }
        let xt = self.value(x);
        let mask = Tensor::from_shape(xt.shape(), dropout_mask(xt.len(), p, rng))
            .expect("same shape");
        let m = self.constant(mask);
        self.mul(x, m)
    }

    /// Accumulates `∂loss/∂param` into `grads` for every parameter on the tape.
    pub fn backward(&self, loss: NodeId, grads: &mut Gradients) {
        self.backward_scaled(loss, 1.0, grads)
    }

    /// Like [`Graph::backward`] with the loss multiplied by `scale`.
    pub fn backward_scaled(&self, loss: NodeId, scale: f64, grads: &mut Gradients) {
        let lt = self.value(loss);
        assert!(
            lt.len() == 1,
            "backward needs a scalar loss, got shape {:?}",
            lt.shape()
        );
        assert_eq!(grads.len(), self.params.len(), "gradient buffer mismatch");
        let mut node_grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        node_grads[loss.0] = Some(vec![scale]);
        for id in (0..=loss.0).rev() {
            let Some(dy) = node_grads[id].take() else {
                continue;
            };
            let node = &self.nodes[id];
            if !node.needs_grad {
                continue;
            }
            let mut acc = Acc {
                graph: self,
                node_grads: &mut node_grads,
                grads,
            };
            acc.propagate(NodeId(id), &node.op, &dy);
        }
    }
}

/// Mask values for inverted dropout.
pub fn dropout_mask<R: Rng>(len: usize, p: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
        .collect()
}

/// `y += a * x`
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    if a == 0.0 {
        return;
    }
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

struct Acc<'a, 'p> {
    graph: &'a Graph<'p>,
    node_grads: &'a mut [Option<Vec<f64>>],
    grads: &'a mut Gradients,
}

impl Acc<'_, '_> {
    /// Gradient buffer for `id`, or `None` when nothing upstream needs it.
    fn target(&mut self, id: NodeId) -> Option<&mut [f64]> {
        let node = &self.graph.nodes[id.0];
        if !node.needs_grad {
            return None;
        }
        match node.op {
            Op::Param(p) => Some(self.grads.get_mut(p)),
            _ => {
                let len = self.graph.value(id).len();
                Some(
                    self.node_grads[id.0]
                        .get_or_insert_with(|| vec![0.0; len])
                        .as_mut_slice(),
                )
            }
        }
    }

    fn add_into(&mut self, id: NodeId, dy: &[f64]) {
        if let Some(t) = self.target(id) {
            for (g, &d) in t.iter_mut().zip(dy) {
                *g += d;
            }
        }
    }

    fn propagate(&mut self, id: NodeId, op: &Op, dy: &[f64]) {
        let g = self.graph;
        match *op {
            Op::Constant | Op::Param(_) => {}
            Op::MatVec(w, x) => {
                let (wt, xt) = (g.value(w), g.value(x));
                let k = wt.cols();
                if let Some(dw) = self.target(w) {
                    for (row, &d) in dw.chunks_mut(k).zip(dy) {
                        axpy(d, xt.values(), row);
                    }
                }
                if let Some(dx) = self.target(x) {
                    for (row, &d) in wt.values().chunks(k).zip(dy) {
                        axpy(d, row, dx);
                    }
                }
            }
            Op::MatMul(a, b) => {
                let (at, bt) = (g.value(a), g.value(b));
                let (m, k, n) = (at.rows(), at.cols(), bt.cols());
                let dyv = view2(dy, m, n);
                if let Some(da) = self.target(a) {
                    general_mat_mul(1.0, &dyv, &bt.view2().t(), 1.0, &mut view2_mut(da, m, k));
                }
                if let Some(db) = self.target(b) {
                    general_mat_mul(1.0, &at.view2().t(), &dyv, 1.0, &mut view2_mut(db, k, n));
                }
            }
            Op::MatMulNT(a, b) => {
                let (at, bt) = (g.value(a), g.value(b));
                let (m, k, n) = (at.rows(), at.cols(), bt.rows());
                let dyv = view2(dy, m, n);
                if let Some(da) = self.target(a) {
                    general_mat_mul(1.0, &dyv, &bt.view2(), 1.0, &mut view2_mut(da, m, k));
                }
                if let Some(db) = self.target(b) {
                    general_mat_mul(1.0, &dyv.t(), &at.view2(), 1.0, &mut view2_mut(db, n, k));
                }
            }
            Op::Add(a, b) => {
                self.add_into(a, dy);
                self.add_into(b, dy);
            }
            Op::AddRow(a, b) => {
                self.add_into(a, dy);
                let n = g.value(b).len();
                if let Some(db) = self.target(b) {
                    for row in dy.chunks(n) {
                        for (x, &d) in db.iter_mut().zip(row) {
                            *x += d;
                        }
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (g.value(a).values(), g.value(b).values());
                if let Some(da) = self.target(a) {
                    for ((x, &d), &o) in da.iter_mut().zip(dy).zip(bv) {
                        *x += d * o;
                    }
                }
                if let Some(db) = self.target(b) {
                    for ((x, &d), &o) in db.iter_mut().zip(dy).zip(av) {
                        *x += d * o;
                    }
                }
            }
            Op::Tanh(a) => {
                let y = g.value(id).values();
                if let Some(da) = self.target(a) {
                    for ((x, &d), &yv) in da.iter_mut().zip(dy).zip(y) {
                        *x += d * (1.0 - yv * yv);
                    }
                }
            }
            Op::Sigmoid(a) => {
                let y = g.value(id).values();
                if let Some(da) = self.target(a) {
                    for ((x, &d), &yv) in da.iter_mut().zip(dy).zip(y) {
                        *x += d * yv * (1.0 - yv);
                    }
                }
            }
            Op::Concat(ref parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = g.value(p).len();
                    self.add_into(p, &dy[off..off + n]);
                    off += n;
                }
            }
            Op::ConcatCols(a, b) => {
                let (p, q) = (g.value(a).cols(), g.value(b).cols());
                if let Some(da) = self.target(a) {
                    for (row, drow) in da.chunks_mut(p).zip(dy.chunks(p + q)) {
                        for (x, &d) in row.iter_mut().zip(&drow[..p]) {
                            *x += d;
                        }
                    }
                }
                if let Some(db) = self.target(b) {
                    for (row, drow) in db.chunks_mut(q).zip(dy.chunks(p + q)) {
                        for (x, &d) in row.iter_mut().zip(&drow[p..]) {
                            *x += d;
                        }
                    }
                }
            }
            Op::StackRows(ref rows) => {
                let n = g.value(rows[0]).len();
                for (r, drow) in rows.iter().zip(dy.chunks(n)) {
                    self.add_into(*r, drow);
                }
            }
            Op::Row(a, i) => {
                let c = g.value(a).cols();
                if let Some(da) = self.target(a) {
                    for (x, &d) in da[i * c..(i + 1) * c].iter_mut().zip(dy) {
                        *x += d;
                    }
                }
            }
            Op::Slice(a, start) => {
                if let Some(da) = self.target(a) {
                    for (x, &d) in da[start..start + dy.len()].iter_mut().zip(dy) {
                        *x += d;
                    }
                }
            }
            Op::SoftmaxRows(a) => {
                let yt = g.value(id);
                let c = yt.cols();
                if let Some(da) = self.target(a) {
                    for ((drow, yrow), dyrow) in
                        da.chunks_mut(c).zip(yt.values().chunks(c)).zip(dy.chunks(c))
                    {
                        let dot: f64 = yrow.iter().zip(dyrow).map(|(y, d)| y * d).sum();
                        for ((x, &y), &d) in drow.iter_mut().zip(yrow).zip(dyrow) {
                            *x += y * (d - dot);
                        }
                    }
                }
            }
            Op::AdditiveScores(a, b, v) => {
                let (at, bt, vt) = (g.value(a), g.value(b), g.value(v));
                let (n, m, k) = (at.rows(), bt.rows(), vt.len());
                let vv = vt.values();
                let mut da = vec![0.0; n * k];
                let mut db = vec![0.0; m * k];
                let mut dv = vec![0.0; k];
                for i in 0..n {
                    let ai = at.row(i);
                    for j in 0..m {
                        let ds = dy[i * m + j];
                        if ds == 0.0 {
                            continue;
                        }
                        let bj = bt.row(j);
                        for l in 0..k {
                            let t = (ai[l] + bj[l]).tanh();
                            dv[l] += ds * t;
                            let dp = ds * vv[l] * (1.0 - t * t);
                            da[i * k + l] += dp;
                            db[j * k + l] += dp;
                        }
                    }
                }
                self.add_into(a, &da);
                self.add_into(b, &db);
                self.add_into(v, &dv);
            }
            Op::LstmGates(pre, c_prev) => {
                let (pt, ct) = (g.value(pre), g.value(c_prev));
                let h = ct.len();
                let p = pt.values();
                let out = g.value(id).values();
                let mut dpre = vec![0.0; 4 * h];
                let mut dcp = vec![0.0; h];
                for u in 0..h {
                    let i = tensor::sigmoid(p[u]);
                    let f = tensor::sigmoid(p[h + u]);
                    let gg = p[2 * h + u].tanh();
                    let o = tensor::sigmoid(p[3 * h + u]);
                    let c = out[h + u];
                    let tc = c.tanh();
                    let dh = dy[u];
                    let dc = dy[h + u] + dh * o * (1.0 - tc * tc);
                    let d_o = dh * tc;
                    dpre[u] = dc * gg * i * (1.0 - i);
                    dpre[h + u] = dc * ct.values()[u] * f * (1.0 - f);
                    dpre[2 * h + u] = dc * i * (1.0 - gg * gg);
                    dpre[3 * h + u] = d_o * o * (1.0 - o);
                    dcp[u] = dc * f;
                }
                self.add_into(pre, &dpre);
                self.add_into(c_prev, &dcp);
            }
            Op::CrossEntropy(logits, class) => {
                let probs = tensor::softmax(g.value(logits).values());
                let d: Vec<f64> = probs
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| dy[0] * (p - if i == class { 1.0 } else { 0.0 }))
                    .collect();
                self.add_into(logits, &d);
            }
            Op::Sum(a) => {
                let n = g.value(a).len();
                self.add_into(a, &vec![dy[0]; n]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn store_with(shape: (usize, usize), seed: u64) -> (ParamStore, ParamId) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        let id = s.add_uniform("w", shape.0, shape.1, &mut rng);
        (s, id)
    }

    /// Central differences over every component of every parameter.
    fn fd_check(store: &ParamStore, f: impl Fn(&ParamStore) -> f64, analytic: &Gradients) {
        let h = 1e-5;
        let mut s = store.clone();
        for (id, p) in store.iter() {
            for k in 0..p.tensor.len() {
                let orig = p.tensor.values()[k];
                s.tensor_mut(id).values_mut()[k] = orig + h;
                let up = f(&s);
                s.tensor_mut(id).values_mut()[k] = orig - h;
                let down = f(&s);
                s.tensor_mut(id).values_mut()[k] = orig;
                let num = (up - down) / (2.0 * h);
                let ana = analytic.get(id)[k];
                let rel = (num - ana).abs() / num.abs().max(ana.abs()).max(1e-6);
                assert!(rel < 1e-4, "{}[{k}]: analytic {ana} numeric {num}", p.name);
            }
        }
    }

    #[test]
    fn sum_of_matvec_grad_is_outer_product() {
        let (s, w) = store_with((3, 4), 1);
        let x = [0.5, -1.0, 2.0, 0.25];
        let mut g = Graph::new(&s);
        let wn = g.param(w);
        let xn = g.constant(Tensor::vector(x.to_vec()));
        let y = g.matvec(wn, xn);
        let loss = g.sum(y);
        let mut grads = Gradients::zeros_like(&s);
        g.backward(loss, &mut grads);
        for r in 0..3 {
            for c in 0..4 {
                assert_eq!(grads.get(w)[r * 4 + c], x[c]);
            }
        }
    }

    #[test]
    #[should_panic(expected = "scalar loss")]
    fn backward_rejects_non_scalar() {
        let (s, w) = store_with((2, 2), 1);
        let mut g = Graph::new(&s);
        let wn = g.param(w);
        let t = g.tanh(wn);
        g.backward(t, &mut Gradients::zeros_like(&s));
    }

    #[test]
    #[should_panic(expected = "shape mismatch in matvec")]
    fn matvec_shape_mismatch_panics() {
        let (s, w) = store_with((2, 3), 1);
        let mut g = Graph::new(&s);
        let wn = g.param(w);
        let x = g.constant(Tensor::vector(vec![1.0, 2.0]));
        g.matvec(wn, x);
    }

    #[test]
    fn unused_parameter_gets_zero_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = ParamStore::new();
        let a = s.add_uniform("a", 2, 2, &mut rng);
        let b = s.add_uniform("b", 2, 2, &mut rng);
        let mut g = Graph::new(&s);
        let an = g.param(a);
        let t = g.tanh(an);
        let loss = g.sum(t);
        let mut grads = Gradients::zeros_like(&s);
        g.backward(loss, &mut grads);
        assert!(grads.get(b).iter().all(|&v| v == 0.0));
        assert!(grads.get(a).iter().any(|&v| v != 0.0));
    }

    /// Exercises every primitive in one composite loss and checks it
    /// against finite differences.
    fn composite_loss(s: &ParamStore, grads: Option<&mut Gradients>) -> f64 {
        let ids: Vec<ParamId> = s.iter().map(|(id, _)| id).collect();
        let mut g = Graph::new(s);
        let w = g.param(ids[0]); // 3x4
        let m = g.param(ids[1]); // 2x4
        let v = g.param(ids[2]); // 1x4
        let x = g.constant(Tensor::vector(vec![0.3, -0.2, 0.7, 0.1]));
        let y = g.matvec(w, x);
        let ys = g.sigmoid(y);
        let mt = g.tanh(m);
        let sc = g.additive_scores(mt, w, v);
        let sm = g.softmax(sc);
        let pooled = g.matmul(sm, w);
        let nt = g.matmul_nt(pooled, m);
        let b = g.row(nt, 1);
        let cat = g.concat(&[ys, b]);
        let st = g.stack_rows(&[cat, cat]);
        let cc = g.concat_cols(st, st);
        let r0 = g.row(cc, 0);
        let sl = g.slice(r0, 1, 4);
        let c_prev = g.slice(r0, 6, 1);
        let _ = c_prev;
        let bias = g.row(m, 0);
        let ar = g.add_row(pooled, bias);
        let ar0 = g.row(ar, 0);
        let prod = g.mul(sl, ar0);
        let c1 = g.slice(prod, 0, 1);
        let gates = g.lstm_gates(prod, c1);
        let logits = g.slice(gates, 0, 2);
        let both = g.add(logits, logits);
        let loss = g.cross_entropy(both, 1);
        let total = {
            let s2 = g.sum(r0);
            let z = g.concat(&[s2]);
            let zz = g.concat(&[loss]);
            let sum = g.add(zz, z);
            g.sum(sum)
        };
        if let Some(gr) = grads {
            g.backward(total, gr);
        }
        g.value(total).values()[0]
    }

    #[test]
    fn composite_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = ParamStore::new();
            s.add_uniform("w", 3, 4, &mut rng);
            s.add_uniform("m", 2, 4, &mut rng);
            s.add_uniform("v", 1, 4, &mut rng);
            let mut grads = Gradients::zeros_like(&s);
            composite_loss(&s, Some(&mut grads));
            fd_check(&s, |p| composite_loss(p, None), &grads);
        }
    }

    #[test]
    fn dropout_eval_is_identity() {
        let s = ParamStore::new();
        let mut g = Graph::new(&s);
        let x = g.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = g.dropout(x, 0.3, false, &mut rng);
        assert_eq!(g.value(y), g.value(x));
    }
}
