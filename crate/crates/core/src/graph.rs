//! Static batched reverse-mode differentiation tape.
//!
//! The expression graph is built once per training run over 2-D arrays
//! (rows = batch points, columns = features); `forward` and `backward` then
//! re-evaluate it in place every iteration with no allocation in the loop.
//! Node ids are creation-ordered, so creation order is a topological order.
//!
//! [`TapeExpr`] implements [`Scalar`], which lets the constitutive laws and
//! output transforms written for plain numbers run unchanged on batched
//! graph columns, including through [`Jet1`](crate::scalar::Jet1) for
//! spatial-derivative channels.
//!
//! Parallel sections use fixed row blocks with a fixed reduction order, so
//! results are bit-identical at any worker count.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::rc::Rc;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use rayon::prelude::*;

use crate::scalar::Scalar;

/// Rows per parallel matmul block. Fixed so the block structure (and with it
/// the floating-point result) does not depend on the worker count.
const MATMUL_BLOCK: usize = 256;

type Shape = (usize, usize);

#[derive(Clone, Debug)]
enum Op {
    /// Constant, input, or parameter; value is written from outside.
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Sigmoid(usize),
    Ln(usize),
    /// max(x, lo); counts activations; gradient passes only where x > lo.
    ClampMin(usize, f64),
    /// 1 where x > lo else 0; no gradient.
    StepAbove(usize, f64),
    StopGrad(usize),
    /// Columns lo..hi of the source.
    SliceCols(usize, usize, usize),
    ConcatCols(Vec<usize>),
    /// Sum of all entries, shape (1,1).
    SumAll(usize),
}

struct Node {
    op: Op,
    value: Array2<f64>,
    grad: Array2<f64>,
}

impl Node {
    fn shape(&self) -> Shape {
        self.value.dim()
    }
}

struct GraphInner {
    nodes: Vec<Node>,
    /// Leaf node ids registered as trainable parameters, in order.
    params: Vec<usize>,
    clamp_events: u64,
}

/// Shared handle to one expression graph.
#[derive(Clone)]
pub struct Graph(Rc<RefCell<GraphInner>>);

/// Handle to a node in a [`Graph`]; the `Scalar` arithmetic on it appends
/// nodes to the shared graph.
#[derive(Clone)]
pub struct TapeExpr {
    graph: Graph,
    id: usize,
}

impl fmt::Debug for TapeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TapeExpr#{}{:?}", self.id, self.shape())
    }
}

fn broadcast_dim(a: usize, b: usize, what: &str) -> usize {
    if a == b {
        a
    } else if a == 1 {
        b
    } else if b == 1 {
        a
    } else {
        panic!("incompatible {what} {a} vs {b}");
    }
}

fn broadcast_shape(a: Shape, b: Shape) -> Shape {
    (
        broadcast_dim(a.0, b.0, "rows"),
        broadcast_dim(a.1, b.1, "cols"),
    )
}

/// Sums `g` over axes where `shape` is 1 but `g` is larger.
fn reduce_to(g: &Array2<f64>, shape: Shape) -> Array2<f64> {
    let mut r = g.to_owned();
    if shape.0 == 1 && r.nrows() > 1 {
        let summed = r.sum_axis(Axis(0));
        r = summed.insert_axis(Axis(0));
    }
    if shape.1 == 1 && r.ncols() > 1 {
        let summed = r.sum_axis(Axis(1));
        r = summed.insert_axis(Axis(1));
    }
    r
}

fn add_reduced(target: &mut Array2<f64>, g: &Array2<f64>) {
    let r = reduce_to(g, target.dim());
    *target += &r;
}

/// out = a · b with fixed row blocks of `a`, each block an independent
/// product, so the result is identical at any worker count.
fn matmul_into(out: &mut Array2<f64>, a: ArrayView2<f64>, b: ArrayView2<f64>, beta: f64) {
    if a.nrows() <= MATMUL_BLOCK {
        general_mat_mul(1.0, &a, &b, beta, out);
        return;
    }
    let blocks: Vec<_> = out
        .axis_chunks_iter_mut(Axis(0), MATMUL_BLOCK)
        .zip(a.axis_chunks_iter(Axis(0), MATMUL_BLOCK))
        .collect();
    blocks.into_par_iter().for_each(|(mut o, ab)| {
        general_mat_mul(1.0, &ab, &b, beta, &mut o);
    });
}

/// a^T · g accumulated in fixed block order (sequential reduction over the
/// per-block partial products).
fn matmul_t_accumulate(target: &mut Array2<f64>, a: ArrayView2<f64>, g: ArrayView2<f64>) {
    if a.nrows() <= MATMUL_BLOCK {
        general_mat_mul(1.0, &a.t(), &g, 1.0, target);
        return;
    }
    let partials: Vec<Array2<f64>> = a
        .axis_chunks_iter(Axis(0), MATMUL_BLOCK)
        .zip(g.axis_chunks_iter(Axis(0), MATMUL_BLOCK))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(ab, gb)| {
            let mut p = Array2::zeros((a.ncols(), g.ncols()));
            general_mat_mul(1.0, &ab.t(), &gb, 0.0, &mut p);
            p
        })
        .collect();
    for p in partials {
        *target += &p;
    }
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Graph {
        Graph(Rc::new(RefCell::new(GraphInner {
            nodes: Vec::new(),
            params: Vec::new(),
            clamp_events: 0,
        })))
    }

    fn push(&self, op: Op, shape: Shape) -> TapeExpr {
        let mut inner = self.0.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            op,
            value: Array2::zeros(shape),
            grad: Array2::zeros(shape),
        });
        TapeExpr {
            graph: self.clone(),
            id,
        }
    }

    fn shape_of(&self, id: usize) -> Shape {
        self.0.borrow().nodes[id].shape()
    }

    /// Leaf whose value is assigned later via [`Graph::set_value`].
    pub fn leaf(&self, shape: Shape) -> TapeExpr {
        self.push(Op::Leaf, shape)
    }

    /// Leaf with a fixed value.
    pub fn constant(&self, value: Array2<f64>) -> TapeExpr {
        let e = self.push(Op::Leaf, value.dim());
        self.0.borrow_mut().nodes[e.id].value = value;
        e
    }

    /// (1,1) constant.
    pub fn scalar(&self, c: f64) -> TapeExpr {
        self.constant(Array2::from_elem((1, 1), c))
    }

    /// Trainable leaf, registered in creation order for the flat parameter
    /// vector.
    pub fn param(&self, shape: Shape) -> TapeExpr {
        let e = self.push(Op::Leaf, shape);
        self.0.borrow_mut().params.push(e.id);
        e
    }

    pub fn set_value(&self, e: &TapeExpr, value: Array2<f64>) {
        assert!(Rc::ptr_eq(&self.0, &e.graph.0), "foreign expression");
        let mut inner = self.0.borrow_mut();
        assert_eq!(inner.nodes[e.id].shape(), value.dim(), "leaf shape");
        assert!(matches!(inner.nodes[e.id].op, Op::Leaf), "not a leaf");
        inner.nodes[e.id].value = value;
    }

    pub fn matmul(&self, a: &TapeExpr, b: &TapeExpr) -> TapeExpr {
        let (sa, sb) = (self.shape_of(a.id), self.shape_of(b.id));
        assert_eq!(sa.1, sb.0, "matmul inner dims");
        self.push(Op::MatMul(a.id, b.id), (sa.0, sb.1))
    }

    pub fn sigmoid(&self, a: &TapeExpr) -> TapeExpr {
        self.push(Op::Sigmoid(a.id), self.shape_of(a.id))
    }

    pub fn stop_grad(&self, a: &TapeExpr) -> TapeExpr {
        self.push(Op::StopGrad(a.id), self.shape_of(a.id))
    }

    pub fn slice_cols(&self, a: &TapeExpr, lo: usize, hi: usize) -> TapeExpr {
        let s = self.shape_of(a.id);
        assert!(lo < hi && hi <= s.1, "column slice {lo}..{hi} of {s:?}");
        self.push(Op::SliceCols(a.id, lo, hi), (s.0, hi - lo))
    }

    pub fn concat_cols(&self, parts: &[&TapeExpr]) -> TapeExpr {
        assert!(!parts.is_empty());
        let rows = self.shape_of(parts[0].id).0;
        let mut cols = 0;
        for p in parts {
            let s = self.shape_of(p.id);
            assert_eq!(s.0, rows, "concat row mismatch");
            cols += s.1;
        }
        self.push(Op::ConcatCols(parts.iter().map(|p| p.id).collect()), (rows, cols))
    }

    pub fn sum_all(&self, a: &TapeExpr) -> TapeExpr {
        self.push(Op::SumAll(a.id), (1, 1))
    }

    pub fn value_of(&self, e: &TapeExpr) -> Array2<f64> {
        self.0.borrow().nodes[e.id].value.clone()
    }

    pub fn scalar_value(&self, e: &TapeExpr) -> f64 {
        let inner = self.0.borrow();
        let v = &inner.nodes[e.id].value;
        assert_eq!(v.dim(), (1, 1), "not a scalar node");
        v[[0, 0]]
    }

    pub fn param_len(&self) -> usize {
        let inner = self.0.borrow();
        inner
            .params
            .iter()
            .map(|&id| inner.nodes[id].value.len())
            .sum()
    }

    /// Copies `flat` into the parameter leaves (row-major per leaf).
    pub fn write_params(&self, flat: &[f64]) {
        let mut inner = self.0.borrow_mut();
        let ids = inner.params.clone();
        let mut off = 0;
        for id in ids {
            let v = &mut inner.nodes[id].value;
            let n = v.len();
            v.as_slice_mut()
                .expect("contiguous")
                .copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        assert_eq!(off, flat.len(), "parameter vector length");
    }

    /// Reads parameter gradients (same layout as [`Graph::write_params`]).
    pub fn read_param_grads(&self, out: &mut [f64]) {
        let inner = self.0.borrow();
        let mut off = 0;
        for &id in &inner.params {
            let g = &inner.nodes[id].grad;
            let n = g.len();
            out[off..off + n].copy_from_slice(g.as_slice().expect("contiguous"));
            off += n;
        }
        assert_eq!(off, out.len(), "gradient vector length");
    }

    /// Clamp activations observed during the last forward pass.
    pub fn clamp_events(&self) -> u64 {
        self.0.borrow().clamp_events
    }

    /// Re-evaluates every node in creation order.
    pub fn forward(&self) {
        let mut inner = self.0.borrow_mut();
        inner.clamp_events = 0;
        let mut clamps = 0u64;
        let n = inner.nodes.len();
        for i in 0..n {
            let (done, rest) = inner.nodes.split_at_mut(i);
            let node = &mut rest[0];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    matmul_into(&mut node.value, done[*a].value.view(), done[*b].value.view(), 0.0);
                }
                Op::Add(a, b) => {
                    Zip::from(&mut node.value)
                        .and_broadcast(&done[*a].value)
                        .and_broadcast(&done[*b].value)
                        .for_each(|o, &x, &y| *o = x + y);
                }
                Op::Sub(a, b) => {
                    Zip::from(&mut node.value)
                        .and_broadcast(&done[*a].value)
                        .and_broadcast(&done[*b].value)
                        .for_each(|o, &x, &y| *o = x - y);
                }
                Op::Mul(a, b) => {
                    Zip::from(&mut node.value)
                        .and_broadcast(&done[*a].value)
                        .and_broadcast(&done[*b].value)
                        .for_each(|o, &x, &y| *o = x * y);
                }
                Op::Div(a, b) => {
                    Zip::from(&mut node.value)
                        .and_broadcast(&done[*a].value)
                        .and_broadcast(&done[*b].value)
                        .for_each(|o, &x, &y| *o = x / y);
                }
                Op::Neg(a) => {
                    Zip::from(&mut node.value)
                        .and(&done[*a].value)
                        .for_each(|o, &x| *o = -x);
                }
                Op::Sigmoid(a) => {
                    Zip::from(&mut node.value)
                        .and(&done[*a].value)
                        .for_each(|o, &x| *o = 1.0 / (1.0 + (-x).exp()));
                }
                Op::Ln(a) => {
                    Zip::from(&mut node.value)
                        .and(&done[*a].value)
                        .for_each(|o, &x| *o = x.ln());
                }
                Op::ClampMin(a, lo) => {
                    let lo = *lo;
                    let mut hits = 0u64;
                    Zip::from(&mut node.value)
                        .and(&done[*a].value)
                        .for_each(|o, &x| {
                            if x > lo {
                                *o = x;
                            } else {
                                *o = lo;
                                hits += 1;
                            }
                        });
                    clamps += hits;
                }
                Op::StepAbove(a, lo) => {
                    let lo = *lo;
                    Zip::from(&mut node.value)
                        .and(&done[*a].value)
                        .for_each(|o, &x| *o = if x > lo { 1.0 } else { 0.0 });
                }
                Op::StopGrad(a) => {
                    node.value.assign(&done[*a].value);
                }
                Op::SliceCols(a, lo, hi) => {
                    node.value.assign(&done[*a].value.slice(s![.., *lo..*hi]));
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = done[p].value.ncols();
                        node.value
                            .slice_mut(s![.., off..off + w])
                            .assign(&done[p].value);
                        off += w;
                    }
                }
                Op::SumAll(a) => {
                    node.value[[0, 0]] = done[*a].value.sum();
                }
            }
        }
        inner.clamp_events = clamps;
    }

    /// Accumulates d(loss)/d(node) for every node; call after `forward`.
    pub fn backward(&self, loss: &TapeExpr) {
        let mut inner = self.0.borrow_mut();
        for node in &mut inner.nodes {
            node.grad.fill(0.0);
        }
        inner.nodes[loss.id].grad.fill(1.0);
        assert_eq!(inner.nodes[loss.id].shape(), (1, 1), "loss must be scalar");

        for i in (0..inner.nodes.len()).rev() {
            let (done, rest) = inner.nodes.split_at_mut(i);
            let node = &rest[0];
            if node.grad.iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = &node.grad;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    // dA += g · B^T (row blocks of dA are disjoint)
                    let (bv, g_owned) = (done[*b].value.t().to_owned(), g.clone());
                    matmul_into(&mut done[*a].grad, g_owned.view(), bv.view(), 1.0);
                    // dB += A^T · g (fixed-order block reduction)
                    matmul_t_accumulate(&mut done[*b].grad, done[*a].value.view(), g.view());
                }
                Op::Add(a, b) => {
                    add_reduced(&mut done[*a].grad, g);
                    add_reduced(&mut done[*b].grad, g);
                }
                Op::Sub(a, b) => {
                    add_reduced(&mut done[*a].grad, g);
                    let neg = g.mapv(|x| -x);
                    add_reduced(&mut done[*b].grad, &neg);
                }
                Op::Mul(a, b) => {
                    let gdim = g.dim();
                    let da = g * &done[*b].value.broadcast(gdim).expect("broadcast");
                    add_reduced(&mut done[*a].grad, &da);
                    let db = g * &done[*a].value.broadcast(gdim).expect("broadcast");
                    add_reduced(&mut done[*b].grad, &db);
                }
                Op::Div(a, b) => {
                    let gdim = g.dim();
                    let bv = done[*b].value.broadcast(gdim).expect("broadcast");
                    let da = g / &bv;
                    add_reduced(&mut done[*a].grad, &da);
                    let out = &node.value;
                    let db = Zip::from(g)
                        .and(out)
                        .and(&bv)
                        .map_collect(|&gi, &oi, &bi| -gi * oi / bi);
                    add_reduced(&mut done[*b].grad, &db);
                }
                Op::Neg(a) => {
                    done[*a].grad.zip_mut_with(g, |d, &gi| *d -= gi);
                }
                Op::Sigmoid(a) => {
                    let out = &node.value;
                    Zip::from(&mut done[*a].grad)
                        .and(g)
                        .and(out)
                        .for_each(|d, &gi, &si| *d += gi * si * (1.0 - si));
                }
                Op::Ln(a) => {
                    Zip::from(&mut done[*a].grad)
                        .and(g)
                        .and(&done[*a].value)
                        .for_each(|d, &gi, &xi| *d += gi / xi);
                }
                Op::ClampMin(a, lo) => {
                    let lo = *lo;
                    Zip::from(&mut done[*a].grad)
                        .and(g)
                        .and(&done[*a].value)
                        .for_each(|d, &gi, &xi| {
                            if xi > lo {
                                *d += gi;
                            }
                        });
                }
                Op::StepAbove(..) => {}
                Op::StopGrad(_) => {}
                Op::SliceCols(a, lo, hi) => {
                    done[*a]
                        .grad
                        .slice_mut(s![.., *lo..*hi])
                        .zip_mut_with(g, |d, &gi| *d += gi);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = done[p].value.ncols();
                        done[p]
                            .grad
                            .zip_mut_with(&g.slice(s![.., off..off + w]), |d, &gi| *d += gi);
                        off += w;
                    }
                }
                Op::SumAll(a) => {
                    let gi = g[[0, 0]];
                    done[*a].grad.mapv_inplace(|d| d + gi);
                }
            }
        }
    }
}

impl TapeExpr {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn shape(&self) -> Shape {
        self.graph.shape_of(self.id)
    }

    fn binary(&self, rhs: &TapeExpr, f: impl FnOnce(usize, usize) -> Op) -> TapeExpr {
        assert!(
            Rc::ptr_eq(&self.graph.0, &rhs.graph.0),
            "expressions from different graphs"
        );
        let shape = broadcast_shape(self.shape(), rhs.shape());
        self.graph.push(f(self.id, rhs.id), shape)
    }
}

impl Add for TapeExpr {
    type Output = TapeExpr;
    fn add(self, rhs: TapeExpr) -> TapeExpr {
        self.binary(&rhs, Op::Add)
    }
}

impl Sub for TapeExpr {
    type Output = TapeExpr;
    fn sub(self, rhs: TapeExpr) -> TapeExpr {
        self.binary(&rhs, Op::Sub)
    }
}

impl Mul for TapeExpr {
    type Output = TapeExpr;
    fn mul(self, rhs: TapeExpr) -> TapeExpr {
        self.binary(&rhs, Op::Mul)
    }
}

impl Div for TapeExpr {
    type Output = TapeExpr;
    fn div(self, rhs: TapeExpr) -> TapeExpr {
        self.binary(&rhs, Op::Div)
    }
}

impl Neg for TapeExpr {
    type Output = TapeExpr;
    fn neg(self) -> TapeExpr {
        let shape = self.shape();
        self.graph.push(Op::Neg(self.id), shape)
    }
}

impl Scalar for TapeExpr {
    fn lift(&self, c: f64) -> TapeExpr {
        self.graph.scalar(c)
    }

    fn ln(&self) -> TapeExpr {
        let shape = self.shape();
        self.graph.push(Op::Ln(self.id), shape)
    }

    fn clamp_min(&self, lo: f64) -> TapeExpr {
        let shape = self.shape();
        self.graph.push(Op::ClampMin(self.id, lo), shape)
    }

    fn step_above(&self, lo: f64) -> TapeExpr {
        let shape = self.shape();
        self.graph.push(Op::StepAbove(self.id, lo), shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn broadcast_add_and_mul_values() {
        let g = Graph::new();
        let a = g.constant(array![[1.0, 2.0], [3.0, 4.0]]);
        let bias = g.constant(array![[10.0, 20.0]]);
        let s = g.scalar(2.0);
        let out = (a + bias) * s;
        g.forward();
        assert_eq!(g.value_of(&out), array![[22.0, 44.0], [26.0, 48.0]]);
    }

    #[test]
    fn matmul_matches_hand_product() {
        let g = Graph::new();
        let a = g.constant(array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        let b = g.constant(array![[1.0, 0.5], [-1.0, 2.0]]);
        let c = g.matmul(&a, &b);
        g.forward();
        assert_eq!(g.value_of(&c), array![[-1.0, 4.5], [-1.0, 9.5], [-1.0, 14.5]]);
    }

    /// Builds a small composite loss and checks every parameter gradient
    /// against central finite differences.
    #[test]
    fn gradients_match_finite_differences() {
        let build = |theta: &[f64]| -> (Graph, TapeExpr, TapeExpr) {
            let g = Graph::new();
            let x = g.constant(array![[0.3, -0.2], [0.1, 0.8], [-0.5, 0.4]]);
            let w = g.param((2, 3));
            let b = g.param((1, 3));
            g.write_params(theta);
            let z = g.matmul(&x, &w) + b;
            let s = g.sigmoid(&z);
            let act = z.clone() * s; // swish
            let shifted = act + g.scalar(2.0);
            let ln = shifted.clamp_min(0.5).ln();
            let loss = g.sum_all(&(ln.clone() * ln));
            (g, loss, z)
        };
        let theta0: Vec<f64> = (0..9).map(|i| 0.3 * ((i as f64) * 0.7).sin()).collect();
        let (g, loss, _) = build(&theta0);
        g.forward();
        g.backward(&loss);
        let mut grad = vec![0.0; 9];
        g.read_param_grads(&mut grad);

        let h = 1e-6;
        for k in 0..9 {
            let mut tp = theta0.clone();
            tp[k] += h;
            let (gp, lp, _) = build(&tp);
            gp.forward();
            let fp = gp.scalar_value(&lp);
            let mut tm = theta0.clone();
            tm[k] -= h;
            let (gm, lm, _) = build(&tm);
            gm.forward();
            let fm = gm.scalar_value(&lm);
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (fd - grad[k]).abs() < 1e-7 * (1.0 + fd.abs()),
                "param {k}: fd {fd} vs ad {}",
                grad[k]
            );
        }
    }

    #[test]
    fn stop_grad_blocks_flow() {
        let g = Graph::new();
        let w = g.param((1, 1));
        g.write_params(&[3.0]);
        let frozen = g.stop_grad(&(w.clone() * w.clone()));
        let loss = g.sum_all(&(frozen * w.clone()));
        g.forward();
        g.backward(&loss);
        let mut grad = vec![0.0; 1];
        g.read_param_grads(&mut grad);
        // d/dw [sg(w^2) * w] = sg(w^2) = 9, not 3w^2 = 27
        assert_eq!(grad[0], 9.0);
    }

    #[test]
    fn clamp_counts_and_masks() {
        let g = Graph::new();
        let x = g.param((1, 4));
        g.write_params(&[-1.0, 0.005, 0.5, 2.0]);
        let c = x.clamp_min(0.01);
        let loss = g.sum_all(&c);
        g.forward();
        assert_eq!(g.clamp_events(), 2);
        g.backward(&loss);
        let mut grad = vec![0.0; 4];
        g.read_param_grads(&mut grad);
        assert_eq!(grad, vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn slice_concat_roundtrip_gradients() {
        let g = Graph::new();
        let w = g.param((2, 3));
        g.write_params(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let left = g.slice_cols(&w, 0, 1);
        let right = g.slice_cols(&w, 1, 3);
        let back = g.concat_cols(&[&left, &right]);
        let two = g.scalar(2.0);
        let loss = g.sum_all(&(back * two));
        g.forward();
        g.backward(&loss);
        let mut grad = vec![0.0; 6];
        g.read_param_grads(&mut grad);
        assert_eq!(grad, vec![2.0; 6]);
    }

    #[test]
    fn division_broadcast_gradient() {
        let g = Graph::new();
        let num = g.param((3, 1));
        let den = g.param((1, 1));
        g.write_params(&[1.0, 2.0, 3.0, 2.0]);
        let q = num / den;
        let loss = g.sum_all(&q);
        g.forward();
        g.backward(&loss);
        let mut grad = vec![0.0; 4];
        g.read_param_grads(&mut grad);
        for gi in &grad[..3] {
            assert!((gi - 0.5).abs() < 1e-15);
        }
        // d/db sum(a_i / b) = -sum(a_i) / b^2 = -6/4
        assert!((grad[3] + 1.5).abs() < 1e-15);
    }

    #[test]
    fn results_identical_across_worker_counts() {
        let run = |threads: usize| -> (Vec<f64>, f64) {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let g = Graph::new();
                let rows = 3 * MATMUL_BLOCK + 17; // forces multiple blocks
                let x = g.constant(Array2::from_shape_fn((rows, 4), |(i, j)| {
                    ((i * 7 + j * 13) as f64 * 0.01).sin()
                }));
                let w = g.param((4, 8));
                let theta: Vec<f64> = (0..32).map(|i| ((i as f64) * 0.37).cos() * 0.2).collect();
                g.write_params(&theta);
                let z = g.matmul(&x, &w);
                let s = g.sigmoid(&z);
                let loss = g.sum_all(&(z * s));
                g.forward();
                g.backward(&loss);
                let mut grad = vec![0.0; 32];
                g.read_param_grads(&mut grad);
                (grad, g.scalar_value(&loss))
            })
        };
        let (g1, l1) = run(1);
        let (g4, l4) = run(4);
        assert_eq!(l1.to_bits(), l4.to_bits());
        for (a, b) in g1.iter().zip(&g4) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn jet_over_tape_gives_spatial_and_parameter_derivatives() {
        use crate::scalar::Jet1;
        // f(x; w) = w * x^2 -> df/dx = 2wx, d(df/dx)/dw = 2x
        let g = Graph::new();
        let xv = 0.7;
        let x = Jet1::new(
            g.constant(array![[xv]]),
            g.scalar(1.0),
            g.scalar(0.0),
        );
        let w = g.param((1, 1));
        g.write_params(&[1.3]);
        let wj = Jet1::constant(TapeExpr::clone(&w));
        let f = wj * x.clone() * x;
        let loss = g.sum_all(&f.dx);
        g.forward();
        assert!((g.scalar_value(&loss) - 2.0 * 1.3 * xv).abs() < 1e-14);
        g.backward(&loss);
        let mut grad = vec![0.0; 1];
        g.read_param_grads(&mut grad);
        assert!((grad[0] - 2.0 * xv).abs() < 1e-14);
    }
}
