//! Reverse-mode automatic differentiation on a flat tape.
//!
//! A [`Tape`] is a write-once list of nodes. Builder methods evaluate each
//! op eagerly and record enough structure to run one backward sweep from a
//! scalar loss. Values are 1-D arrays; matrices appear only as weight leaves
//! feeding [`Tape::matvec`]. Scalars are length-1 vectors.
//!
//! Shape mismatches while building a graph are programmer errors and panic
//! with a message; [`Tape::backward`] returns proper errors for non-scalar
//! losses and for non-finite values encountered anywhere in the forward
//! sweep (tagged with the offending node).

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Payload<S: Scalar> {
    Vec(Array1<S>),
    Mat(Array2<S>),
}

#[derive(Debug, Clone)]
enum Op<S: Scalar> {
    /// Input or parameter leaf; no upstream.
    Leaf,
    MatVec(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Neg(NodeId),
    Scale(NodeId, S),
    Offset(NodeId, S),
    Relu(NodeId),
    Tanh(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    Softplus(NodeId),
    Clamp(NodeId, S, S),
    Square(NodeId),
    Sum(NodeId),
    Dot(NodeId, NodeId),
    LogSumExp(NodeId),
    Stack(Vec<NodeId>),
    Concat(NodeId, NodeId),
}

#[derive(Debug)]
struct Node<S: Scalar> {
    op: Op<S>,
    value: Payload<S>,
}

#[derive(Debug, Default)]
pub struct Tape<S: Scalar> {
    nodes: Vec<Node<S>>,
}

/// Adjoints produced by one backward sweep, indexed by node.
#[derive(Debug)]
pub struct Gradients<S: Scalar> {
    adjoints: Vec<Payload<S>>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient of the loss w.r.t. a vector-valued node.
    pub fn vec(&self, id: NodeId) -> &Array1<S> {
        match &self.adjoints[id.0] {
            Payload::Vec(v) => v,
            Payload::Mat(_) => panic!("node {} is matrix-valued", id.0),
        }
    }

    /// Gradient of the loss w.r.t. a matrix-valued node.
    pub fn mat(&self, id: NodeId) -> &Array2<S> {
        match &self.adjoints[id.0] {
            Payload::Mat(m) => m,
            Payload::Vec(_) => panic!("node {} is vector-valued", id.0),
        }
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<S>, value: Payload<S>) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    fn vec_value(&self, id: NodeId) -> &Array1<S> {
        match &self.nodes[id.0].value {
            Payload::Vec(v) => v,
            Payload::Mat(_) => panic!("node {} is matrix-valued, vector expected", id.0),
        }
    }

    fn mat_value(&self, id: NodeId) -> &Array2<S> {
        match &self.nodes[id.0].value {
            Payload::Mat(m) => m,
            Payload::Vec(_) => panic!("node {} is vector-valued, matrix expected", id.0),
        }
    }

    /// Value of a vector node.
    pub fn value(&self, id: NodeId) -> &Array1<S> {
        self.vec_value(id)
    }

    /// Value of a scalar (length-1) node.
    pub fn scalar_value(&self, id: NodeId) -> S {
        let v = self.vec_value(id);
        assert_eq!(v.len(), 1, "scalar_value on node of length {}", v.len());
        v[0]
    }

    /// Constant input: participates in the sweep but is not a parameter.
    pub fn constant(&mut self, v: Array1<S>) -> NodeId {
        self.push(Op::Leaf, Payload::Vec(v))
    }

    pub fn constant_slice(&mut self, v: &[S]) -> NodeId {
        self.constant(Array1::from(v.to_vec()))
    }

    pub fn scalar(&mut self, v: S) -> NodeId {
        self.constant(Array1::from(vec![v]))
    }

    /// Parameter leaf (vector). The caller keeps the id to read its gradient.
    pub fn leaf_vec(&mut self, v: Array1<S>) -> NodeId {
        self.push(Op::Leaf, Payload::Vec(v))
    }

    /// Parameter leaf (matrix), usable as the weight side of [`Tape::matvec`].
    pub fn leaf_mat(&mut self, v: Array2<S>) -> NodeId {
        self.push(Op::Leaf, Payload::Mat(v))
    }

    /// `W x` for a matrix leaf `W` of shape `(rows, cols)` and vector `x`.
    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> NodeId {
        let wv = self.mat_value(w);
        let xv = self.vec_value(x);
        assert_eq!(
            wv.ncols(),
            xv.len(),
            "matvec: {}x{} matrix applied to vector of length {}",
            wv.nrows(),
            wv.ncols(),
            xv.len()
        );
        let y = wv.dot(xv);
        self.push(Op::MatVec(w, x), Payload::Vec(y))
    }

    fn binary_elementwise(
        &mut self,
        a: NodeId,
        b: NodeId,
        name: &str,
        f: impl Fn(S, S) -> S,
        op: Op<S>,
    ) -> NodeId {
        let av = self.vec_value(a);
        let bv = self.vec_value(b);
        assert_eq!(
            av.len(),
            bv.len(),
            "{name}: lengths {} vs {}",
            av.len(),
            bv.len()
        );
        let out = Array1::from_iter(av.iter().zip(bv.iter()).map(|(&x, &y)| f(x, y)));
        self.push(op, Payload::Vec(out))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_elementwise(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_elementwise(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_elementwise(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    fn unary(&mut self, a: NodeId, f: impl Fn(S) -> S, op: Op<S>) -> NodeId {
        let out = self.vec_value(a).mapv(f);
        self.push(op, Payload::Vec(out))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| -x, Op::Neg(a))
    }

    pub fn scale(&mut self, a: NodeId, c: S) -> NodeId {
        self.unary(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn offset(&mut self, a: NodeId, c: S) -> NodeId {
        self.unary(a, |x| x + c, Op::Offset(a, c))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| if x > S::zero() { x } else { S::zero() }, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| x.tanh(), Op::Tanh(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| x.exp(), Op::Exp(a))
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| x.ln(), Op::Ln(a))
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        self.unary(a, crate::scalar::softplus, Op::Softplus(a))
    }

    pub fn clamp(&mut self, a: NodeId, lo: S, hi: S) -> NodeId {
        assert!(lo <= hi, "clamp: lo > hi");
        self.unary(
            a,
            |x| {
                if x < lo {
                    lo
                } else if x > hi {
                    hi
                } else {
                    x
                }
            },
            Op::Clamp(a, lo, hi),
        )
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    /// Sum of all entries; a length-1 node.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.vec_value(a).iter().fold(S::zero(), |acc, &x| acc + x);
        self.push(Op::Sum(a), Payload::Vec(Array1::from(vec![s])))
    }

    /// Inner product; a length-1 node.
    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = self.vec_value(a);
        let bv = self.vec_value(b);
        assert_eq!(av.len(), bv.len(), "dot: lengths {} vs {}", av.len(), bv.len());
        let s = av
            .iter()
            .zip(bv.iter())
            .fold(S::zero(), |acc, (&x, &y)| acc + x * y);
        self.push(Op::Dot(a, b), Payload::Vec(Array1::from(vec![s])))
    }

    /// Sum of squared entries; a length-1 node.
    pub fn sum_squares(&mut self, a: NodeId) -> NodeId {
        let sq = self.square(a);
        self.sum(sq)
    }

    /// `log Σ exp(aᵢ)` with max shift; a length-1 node.
    pub fn logsumexp(&mut self, a: NodeId) -> NodeId {
        let v = self.vec_value(a);
        assert!(!v.is_empty(), "logsumexp of empty vector");
        let s = crate::scalar::logsumexp(v.as_slice().expect("contiguous"));
        self.push(Op::LogSumExp(a), Payload::Vec(Array1::from(vec![s])))
    }

    /// Gathers length-1 nodes into one vector node.
    pub fn stack(&mut self, parts: &[NodeId]) -> NodeId {
        let mut out = Vec::with_capacity(parts.len());
        for &p in parts {
            let v = self.vec_value(p);
            assert_eq!(v.len(), 1, "stack expects scalar nodes, got length {}", v.len());
            out.push(v[0]);
        }
        self.push(Op::Stack(parts.to_vec()), Payload::Vec(Array1::from(out)))
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = self.vec_value(a);
        let bv = self.vec_value(b);
        let mut out = Vec::with_capacity(av.len() + bv.len());
        out.extend(av.iter().copied());
        out.extend(bv.iter().copied());
        self.push(Op::Concat(a, b), Payload::Vec(Array1::from(out)))
    }

    /// Mean of a set of length-1 nodes; a length-1 node.
    pub fn mean_of(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "mean_of needs at least one node");
        let stacked = self.stack(parts);
        let total = self.sum(stacked);
        self.scale(total, S::from_f64(1.0 / parts.len() as f64))
    }

    fn first_nonfinite(&self) -> Option<(usize, &'static str)> {
        for (i, node) in self.nodes.iter().enumerate() {
            let bad = match &node.value {
                Payload::Vec(v) => v.iter().any(|x| !x.is_finite()),
                Payload::Mat(m) => m.iter().any(|x| !x.is_finite()),
            };
            if bad {
                return Some((i, op_name(&node.op)));
            }
        }
        None
    }

    /// One reverse sweep from `loss`, which must be a finite length-1 node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<S>> {
        let lv = self.vec_value(loss);
        if lv.len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "loss must be scalar, got length {}",
                lv.len()
            )));
        }
        if let Some((idx, name)) = self.first_nonfinite() {
            return Err(Error::NonFinite(format!("tape node {idx} ({name})")));
        }

        let mut adj: Vec<Payload<S>> = self
            .nodes
            .iter()
            .map(|n| match &n.value {
                Payload::Vec(v) => Payload::Vec(Array1::zeros(v.len())),
                Payload::Mat(m) => Payload::Mat(Array2::zeros((m.nrows(), m.ncols()))),
            })
            .collect();
        if let Payload::Vec(v) = &mut adj[loss.0] {
            v[0] = S::one();
        }

        macro_rules! adj_vec {
            ($id:expr) => {
                match &adj[$id.0] {
                    Payload::Vec(v) => v.clone(),
                    Payload::Mat(_) => unreachable!("vector adjoint expected"),
                }
            };
        }

        for i in (0..self.nodes.len()).rev() {
            if matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let g = adj_vec!(NodeId(i));
            match &self.nodes[i].op {
                Op::Leaf => unreachable!(),
                Op::MatVec(w, x) => {
                    let wv = self.mat_value(*w).clone();
                    let xv = self.vec_value(*x).clone();
                    if let Payload::Mat(dw) = &mut adj[w.0] {
                        for r in 0..wv.nrows() {
                            let gr = g[r];
                            for c in 0..wv.ncols() {
                                dw[(r, c)] += gr * xv[c];
                            }
                        }
                    }
                    if let Payload::Vec(dx) = &mut adj[x.0] {
                        for c in 0..wv.ncols() {
                            let mut acc = S::zero();
                            for r in 0..wv.nrows() {
                                acc += wv[(r, c)] * g[r];
                            }
                            dx[c] += acc;
                        }
                    }
                }
                Op::Add(a, b) => {
                    if let Payload::Vec(da) = &mut adj[a.0] {
                        *da += &g;
                    }
                    if let Payload::Vec(db) = &mut adj[b.0] {
                        *db += &g;
                    }
                }
                Op::Sub(a, b) => {
                    if let Payload::Vec(da) = &mut adj[a.0] {
                        *da += &g;
                    }
                    if let Payload::Vec(db) = &mut adj[b.0] {
                        *db -= &g;
                    }
                }
                Op::Mul(a, b) => {
                    let av = self.vec_value(*a).clone();
                    let bv = self.vec_value(*b).clone();
                    if let Payload::Vec(da) = &mut adj[a.0] {
                        *da += &(&g * &bv);
                    }
                    if let Payload::Vec(db) = &mut adj[b.0] {
                        *db += &(&g * &av);
                    }
                }
                Op::Neg(a) => {
                    if let Payload::Vec(da) = &mut adj[a.0] {
                        *da -= &g;
                    }
                }
                Op::Scale(a, c) => {
                    if let Payload::Vec(da) = &mut adj[a.0] {
                        *da += &(&g * *c);
                    }
                }
                Op::Offset(a, _) => {
                    if let Payload::Vec(da) = &mut adj[a.0] {
                        *da += &g;
                    }
                }
                Op::Relu(a) => {
                    let av = self.vec_value(*a).clone();
                    if let Payload::Vec(da) = &mut adj[a.0] {
                        for j in 0..g.len() {
                            if av[j] > S::zero() {
                                da[j] += g[j];
                            }
                        }
                    }
                }
                Op::Tanh(a) => {
                    let yv = self.vec_value(NodeId(i)).clone();
                    if let Payload::Vec(da) = &mut adj[a.0] {
                        for j in 0..g.len() {
                            da[j] += g[j] * (S::one() - yv[j] * yv[j]);
                        }
                    }
                }
                Op::Exp(a) => {
                    let yv = self.vec_value(NodeId(i)).clone();
                    if let Payload::Vec(da) = &mut adj[a.0] {
                        *da += &(&g * &yv);
                    }
                }
                Op::Ln(a) => {
                    let av = self.vec_value(*a).clone();
                    if let Payload::Vec(da) = &mut adj[a.0] {
                        for j in 0..g.len() {
                            da[j] += g[j] / av[j];
                        }
                    }
                }
                Op::Softplus(a) => {
                    let av = self.vec_value(*a).clone();
                    if let Payload::Vec(da) = &mut adj[a.0] {
                        for j in 0..g.len() {
                            // sigmoid(x) without overflow on either tail
                            let x = av[j];
                            let sig = if x >= S::zero() {
                                S::one() / (S::one() + (-x).exp())
                            } else {
                                let e = x.exp();
                                e / (S::one() + e)
                            };
                            da[j] += g[j] * sig;
                        }
                    }
                }
                Op::Clamp(a, lo, hi) => {
                    let av = self.vec_value(*a).clone();
                    let (lo, hi) = (*lo, *hi);
                    if let Payload::Vec(da) = &mut adj[a.0] {
                        for j in 0..g.len() {
                            if av[j] >= lo && av[j] <= hi {
                                da[j] += g[j];
                            }
                        }
                    }
                }
                Op::Square(a) => {
                    let av = self.vec_value(*a).clone();
                    if let Payload::Vec(da) = &mut adj[a.0] {
                        let two = S::from_f64(2.0);
                        for j in 0..g.len() {
                            da[j] += g[j] * two * av[j];
                        }
                    }
                }
                Op::Sum(a) => {
                    let gs = g[0];
                    if let Payload::Vec(da) = &mut adj[a.0] {
                        da.mapv_inplace(|x| x + gs);
                    }
                }
                Op::Dot(a, b) => {
                    let gs = g[0];
                    let av = self.vec_value(*a).clone();
                    let bv = self.vec_value(*b).clone();
                    if let Payload::Vec(da) = &mut adj[a.0] {
                        *da += &(&bv * gs);
                    }
                    if let Payload::Vec(db) = &mut adj[b.0] {
                        *db += &(&av * gs);
                    }
                }
                Op::LogSumExp(a) => {
                    let gs = g[0];
                    let av = self.vec_value(*a).clone();
                    let out = self.scalar_value(NodeId(i));
                    if let Payload::Vec(da) = &mut adj[a.0] {
                        for j in 0..av.len() {
                            da[j] += gs * (av[j] - out).exp();
                        }
                    }
                }
                Op::Stack(parts) => {
                    for (j, p) in parts.iter().enumerate() {
                        if let Payload::Vec(dp) = &mut adj[p.0] {
                            dp[0] += g[j];
                        }
                    }
                }
                Op::Concat(a, b) => {
                    let alen = self.vec_value(*a).len();
                    if let Payload::Vec(da) = &mut adj[a.0] {
                        for j in 0..alen {
                            da[j] += g[j];
                        }
                    }
                    if let Payload::Vec(db) = &mut adj[b.0] {
                        for j in 0..db.len() {
                            db[j] += g[alen + j];
                        }
                    }
                }
            }
        }

        Ok(Gradients { adjoints: adj })
    }
}

fn op_name<S: Scalar>(op: &Op<S>) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::MatVec(..) => "matvec",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::Neg(..) => "neg",
        Op::Scale(..) => "scale",
        Op::Offset(..) => "offset",
        Op::Relu(..) => "relu",
        Op::Tanh(..) => "tanh",
        Op::Exp(..) => "exp",
        Op::Ln(..) => "ln",
        Op::Softplus(..) => "softplus",
        Op::Clamp(..) => "clamp",
        Op::Square(..) => "square",
        Op::Sum(..) => "sum",
        Op::Dot(..) => "dot",
        Op::LogSumExp(..) => "logsumexp",
        Op::Stack(..) => "stack",
        Op::Concat(..) => "concat",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Central finite difference of a scalar function of one tape leaf entry.
    fn finite_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf_vec(Array1::from(vec![1.0, -2.0, 3.5]));
        let s = t.sum(x);
        let g = t.backward(s).unwrap();
        assert_eq!(g.vec(x).to_vec(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn chained_ops_match_finite_differences() {
        // loss(x) = sum(tanh(x)^2) + logsumexp(x) + softplus(x).sum()
        let build = |vals: &[f64]| {
            let mut t = Tape::<f64>::new();
            let x = t.leaf_vec(Array1::from(vals.to_vec()));
            let th = t.tanh(x);
            let sq = t.square(th);
            let a = t.sum(sq);
            let b = t.logsumexp(x);
            let sp = t.softplus(x);
            let c = t.sum(sp);
            let ab = t.add(a, b);
            let loss = t.add(ab, c);
            (t, x, loss)
        };
        let base = vec![0.3, -1.1, 2.0];
        let (t, x, loss) = build(&base);
        let g = t.backward(loss).unwrap();
        for i in 0..base.len() {
            let fd = finite_diff(
                |v| {
                    let mut pert = base.clone();
                    pert[i] = v;
                    let (t2, _, l2) = build(&pert);
                    t2.scalar_value(l2)
                },
                base[i],
                1e-6,
            );
            assert_relative_eq!(g.vec(x)[i], fd, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn matvec_gradients_match_finite_differences() {
        let w0 = Array2::from_shape_vec((2, 3), vec![0.5, -0.2, 0.1, 0.7, 0.3, -0.4]).unwrap();
        let x0 = Array1::from(vec![1.0, 2.0, -1.0]);
        let build = |w: &Array2<f64>, x: &Array1<f64>| {
            let mut t = Tape::<f64>::new();
            let wl = t.leaf_mat(w.clone());
            let xl = t.leaf_vec(x.clone());
            let y = t.matvec(wl, xl);
            let loss = t.sum_squares(y);
            (t, wl, xl, loss)
        };
        let (t, wl, xl, loss) = build(&w0, &x0);
        let g = t.backward(loss).unwrap();
        for r in 0..2 {
            for c in 0..3 {
                let fd = finite_diff(
                    |v| {
                        let mut w = w0.clone();
                        w[(r, c)] = v;
                        let (t2, _, _, l2) = build(&w, &x0);
                        t2.scalar_value(l2)
                    },
                    w0[(r, c)],
                    1e-6,
                );
                assert_relative_eq!(g.mat(wl)[(r, c)], fd, max_relative = 1e-6, epsilon = 1e-9);
            }
        }
        for i in 0..3 {
            let fd = finite_diff(
                |v| {
                    let mut x = x0.clone();
                    x[i] = v;
                    let (t2, _, _, l2) = build(&w0, &x);
                    t2.scalar_value(l2)
                },
                x0[i],
                1e-6,
            );
            assert_relative_eq!(g.vec(xl)[i], fd, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn stack_concat_clamp_backward() {
        let mut t = Tape::<f64>::new();
        let a = t.leaf_vec(Array1::from(vec![0.5, -3.0]));
        let b = t.leaf_vec(Array1::from(vec![1.5]));
        let cl = t.clamp(a, -1.0, 1.0); // second entry saturates
        let cat = t.concat(cl, b);
        let s1 = t.sum(cat);
        let s2 = t.sum_squares(b);
        let loss_vec = t.stack(&[s1, s2]);
        let loss = t.sum(loss_vec);
        let g = t.backward(loss).unwrap();
        assert_eq!(g.vec(a).to_vec(), vec![1.0, 0.0]);
        assert_eq!(g.vec(b).to_vec(), vec![1.0 + 3.0]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf_vec(Array1::from(vec![1.0, 2.0]));
        assert!(t.backward(x).is_err());
    }

    #[test]
    fn nan_in_forward_is_reported_with_location() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf_vec(Array1::from(vec![-1.0]));
        let l = t.ln(x); // NaN
        let s = t.sum(l);
        let err = t.backward(s).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("ln"), "message should tag the op: {msg}");
    }

    #[test]
    #[should_panic(expected = "matvec")]
    fn matvec_shape_mismatch_panics() {
        let mut t = Tape::<f64>::new();
        let w = t.leaf_mat(Array2::zeros((2, 3)));
        let x = t.leaf_vec(Array1::zeros(4));
        t.matvec(w, x);
    }
}
