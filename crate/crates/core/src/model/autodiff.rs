//! Tape-based reverse-mode differentiation over [`Mat`] values.
//!
//! A [`Graph`] records every operation of one forward pass. Calling
//! [`Graph::backward`] on a scalar node walks the tape in reverse and returns
//! the gradient of every parameter leaf that was used.

use std::collections::HashMap;

use super::params::ParamStore;
use super::tensor::{gemm_into, Mat, Scalar, Tr};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(usize),
    MatMul(Var, Var),
    /// `a @ b^T`
    MatMulT(Var, Var),
    Add(Var, Var),
    /// Adds a `1 x cols` row to every row.
    AddRow(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    /// Per-row RMS normalization with a `1 x cols` gain.
    RmsNorm(Var, Var),
    SoftmaxRows(Var),
    Rotary {
        x: Var,
        positions: Vec<usize>,
        head_dim: usize,
    },
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    Reshape(Var),
    QuantileLoss {
        pred: Var,
        truth: Vec<f64>,
        observed: Vec<bool>,
        levels: Vec<f64>,
    },
}

struct Node<S> {
    value: Mat<S>,
    op: Op,
}

pub const RMS_EPS: f64 = 1e-6;
const ROTARY_BASE: f64 = 10_000.0;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

/// Rotation angles for `positions` over `head_dim / 2` frequency pairs.
fn rotary_tables(positions: &[usize], head_dim: usize) -> (Vec<f64>, Vec<f64>) {
    let half = head_dim / 2;
    let mut cos = Vec::with_capacity(positions.len() * half);
    let mut sin = Vec::with_capacity(positions.len() * half);
    for &p in positions {
        for j in 0..half {
            let theta = ROTARY_BASE.powf(-2.0 * j as f64 / head_dim as f64);
            let angle = p as f64 * theta;
            cos.push(angle.cos());
            sin.push(angle.sin());
        }
    }
    (cos, sin)
}

/// Rotates consecutive pairs `(2j, 2j+1)` of every head. `sign = -1` applies
/// the inverse rotation.
fn apply_rotary<S: Scalar>(x: &Mat<S>, positions: &[usize], head_dim: usize, sign: f64) -> Mat<S> {
    let half = head_dim / 2;
    let (cos, sin) = rotary_tables(positions, head_dim);
    let mut out = x.clone();
    for r in 0..x.rows {
        let row = out.row_mut(r);
        for head in row.chunks_mut(head_dim) {
            for j in 0..half {
                let c = S::of(cos[r * half + j]);
                let s = S::of(sign * sin[r * half + j]);
                let (a, b) = (head[2 * j], head[2 * j + 1]);
                head[2 * j] = a * c - b * s;
                head[2 * j + 1] = a * s + b * c;
            }
        }
    }
    out
}

fn gelu(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * x * (1.0 + t)
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Pinball loss of one prediction at level `q`.
pub fn pinball(q: f64, pred: f64, truth: f64) -> f64 {
    if pred <= truth {
        q * (truth - pred)
    } else {
        (1.0 - q) * (pred - truth)
    }
}

pub struct Graph<'p, S: Scalar> {
    params: &'p ParamStore<S>,
    nodes: Vec<Node<S>>,
    param_nodes: HashMap<usize, Var>,
}

impl<'p, S: Scalar> Graph<'p, S> {
    pub fn new(params: &'p ParamStore<S>) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    fn push(&mut self, value: Mat<S>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat<S> {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self, value: Mat<S>) -> Var {
        self.push(value, Op::Input)
    }

    /// Leaf for the named parameter; repeated requests share one node.
    pub fn param(&mut self, name: &str) -> Var {
        let id = self
            .params
            .id(name)
            .unwrap_or_else(|| panic!("unknown parameter '{name}'"));
        if let Some(&v) = self.param_nodes.get(&id) {
            return v;
        }
        let value = self.params.get(id).clone();
        let v = self.push(value, Op::Param(id));
        self.param_nodes.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        let mut out = Mat::zeros(va.rows, vb.cols);
        gemm_into(va, Tr::N, vb, Tr::N, &mut out);
        self.push(out, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        let mut out = Mat::zeros(va.rows, vb.rows);
        gemm_into(va, Tr::N, vb, Tr::T, &mut out);
        self.push(out, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(out, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let mut out = self.value(a).clone();
        let r = self.value(row);
        assert_eq!((r.rows, r.cols), (1, out.cols), "row broadcast shape");
        for i in 0..out.rows {
            for (x, &b) in out.row_mut(i).iter_mut().zip(&r.data) {
                *x = *x + b;
            }
        }
        self.push(out, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let k = S::of(c);
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|x| *x = *x * k);
        self.push(out, Op::Scale(a, c))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|x| *x = S::of(gelu(x.f64())));
        self.push(out, Op::Gelu(a))
    }

    pub fn rms_norm(&mut self, a: Var, gain: Var) -> Var {
        let x = self.value(a);
        let g = self.value(gain);
        assert_eq!((g.rows, g.cols), (1, x.cols), "gain shape");
        let mut out = x.clone();
        let eps = S::of(RMS_EPS);
        let n = S::of(x.cols as f64);
        for i in 0..x.rows {
            let ms = x.row(i).iter().map(|&v| v * v).sum::<S>() / n;
            let inv = (ms + eps).sqrt().recip();
            for (o, &gv) in out.row_mut(i).iter_mut().zip(&g.data) {
                *o = *o * inv * gv;
            }
        }
        self.push(out, Op::RmsNorm(a, gain))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for i in 0..out.rows {
            let row = out.row_mut(i);
            let max = row.iter().copied().fold(S::neg_infinity(), S::max);
            let mut sum = S::zero();
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum = sum + *x;
            }
            for x in row.iter_mut() {
                *x = *x / sum;
            }
        }
        self.push(out, Op::SoftmaxRows(a))
    }

    /// Rotary position encoding of each head's consecutive pairs.
    pub fn rotary(&mut self, x: Var, positions: Vec<usize>, head_dim: usize) -> Var {
        let v = self.value(x);
        assert_eq!(v.rows, positions.len(), "one position per row");
        assert!(head_dim % 2 == 0 && v.cols % head_dim == 0, "rotary head layout");
        let out = apply_rotary(v, &positions, head_dim, 1.0);
        self.push(
            out,
            Op::Rotary {
                x,
                positions,
                head_dim,
            },
        )
    }

    pub fn concat_rows(&mut self, parts: Vec<Var>) -> Var {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in &parts {
            let v = self.value(p);
            assert_eq!(v.cols, cols, "concat_rows column mismatch");
            data.extend_from_slice(&v.data);
            rows += v.rows;
        }
        self.push(Mat::from_vec(rows, cols, data), Op::ConcatRows(parts))
    }

    pub fn concat_cols(&mut self, parts: Vec<Var>) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut off = 0;
        for &p in &parts {
            let v = self.value(p);
            assert_eq!(v.rows, rows, "concat_cols row mismatch");
            for i in 0..rows {
                out.row_mut(i)[off..off + v.cols].copy_from_slice(v.row(i));
            }
            off += v.cols;
        }
        self.push(out, Op::ConcatCols(parts))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a);
        assert!(start + len <= v.rows, "slice_rows out of range");
        let out = Mat::from_vec(len, v.cols, v.data[start * v.cols..(start + len) * v.cols].to_vec());
        self.push(out, Op::SliceRows(a, start))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a);
        assert!(start + len <= v.cols, "slice_cols out of range");
        let mut out = Mat::zeros(v.rows, len);
        for i in 0..v.rows {
            out.row_mut(i).copy_from_slice(&v.row(i)[start..start + len]);
        }
        self.push(out, Op::SliceCols(a, start))
    }

    pub fn gather_rows(&mut self, table: Var, idx: Vec<usize>) -> Var {
        let t = self.value(table);
        let mut out = Mat::zeros(idx.len(), t.cols);
        for (i, &r) in idx.iter().enumerate() {
            out.row_mut(i).copy_from_slice(t.row(r));
        }
        self.push(out, Op::GatherRows(table, idx))
    }

    /// Reinterprets the row-major data under a new shape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let v = self.value(a);
        assert_eq!(v.rows * v.cols, rows * cols, "reshape size");
        let out = Mat::from_vec(rows, cols, v.data.clone());
        self.push(out, Op::Reshape(a))
    }

    /// Mean pinball loss over observed rows of `pred` (`h x levels`).
    pub fn quantile_loss(
        &mut self,
        pred: Var,
        truth: Vec<f64>,
        observed: Vec<bool>,
        levels: Vec<f64>,
    ) -> Var {
        let p = self.value(pred);
        assert_eq!(p.rows, truth.len());
        assert_eq!(p.cols, levels.len());
        let n_obs = observed.iter().filter(|&&o| o).count();
        let mut total = 0.0;
        for t in (0..p.rows).filter(|&t| observed[t]) {
            for (j, &q) in levels.iter().enumerate() {
                total += pinball(q, p.row(t)[j].f64(), truth[t]);
            }
        }
        let loss = if n_obs == 0 {
            0.0
        } else {
            total / (n_obs * levels.len()) as f64
        };
        self.push(
            Mat::from_vec(1, 1, vec![S::of(loss)]),
            Op::QuantileLoss {
                pred,
                truth,
                observed,
                levels,
            },
        )
    }

    /// Gradients of the scalar `root` with respect to every parameter leaf,
    /// scaled by `seed`.
    pub fn backward(&self, root: Var, seed: f64) -> Vec<(usize, Mat<S>)> {
        let root_v = self.value(root);
        assert_eq!((root_v.rows, root_v.cols), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Mat<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Mat::from_vec(1, 1, vec![S::of(seed)]));

        fn acc<S: Scalar>(grads: &mut [Option<Mat<S>>], v: Var, g: Mat<S>) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        let mut out = Vec::new();
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => out.push((*id, g)),
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let mut ga = Mat::zeros(va.rows, va.cols);
                    gemm_into(&g, Tr::N, vb, Tr::T, &mut ga);
                    let mut gb = Mat::zeros(vb.rows, vb.cols);
                    gemm_into(va, Tr::T, &g, Tr::N, &mut gb);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let mut ga = Mat::zeros(va.rows, va.cols);
                    gemm_into(&g, Tr::N, vb, Tr::N, &mut ga);
                    let mut gb = Mat::zeros(vb.rows, vb.cols);
                    gemm_into(&g, Tr::T, va, Tr::N, &mut gb);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(a, row) => {
                    let mut gr = Mat::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (x, &v) in gr.data.iter_mut().zip(g.row(r)) {
                            *x = *x + v;
                        }
                    }
                    acc(&mut grads, *row, gr);
                    acc(&mut grads, *a, g);
                }
                Op::Scale(a, c) => {
                    let k = S::of(*c);
                    let mut ga = g;
                    ga.data.iter_mut().for_each(|x| *x = *x * k);
                    acc(&mut grads, *a, ga);
                }
                Op::Gelu(a) => {
                    let x = self.value(*a);
                    let mut ga = g;
                    for (gv, &xv) in ga.data.iter_mut().zip(&x.data) {
                        *gv = *gv * S::of(gelu_grad(xv.f64()));
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::RmsNorm(a, gain) => {
                    let x = self.value(*a);
                    let gv = self.value(*gain);
                    let n = S::of(x.cols as f64);
                    let eps = S::of(RMS_EPS);
                    let mut gx = Mat::zeros(x.rows, x.cols);
                    let mut gg = Mat::zeros(1, x.cols);
                    for r in 0..x.rows {
                        let xr = x.row(r);
                        let gr = g.row(r);
                        let ms = xr.iter().map(|&v| v * v).sum::<S>() / n;
                        let inv = (ms + eps).sqrt().recip();
                        // u = dy * gain, xhat = x * inv
                        let mut dot = S::zero();
                        for j in 0..x.cols {
                            let xhat = xr[j] * inv;
                            gg.data[j] = gg.data[j] + gr[j] * xhat;
                            dot = dot + gr[j] * gv.data[j] * xhat;
                        }
                        let mean_dot = dot / n;
                        let out = gx.row_mut(r);
                        for j in 0..x.cols {
                            let xhat = xr[j] * inv;
                            out[j] = (gr[j] * gv.data[j] - xhat * mean_dot) * inv;
                        }
                    }
                    acc(&mut grads, *gain, gg);
                    acc(&mut grads, *a, gx);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut ga = Mat::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dot = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum::<S>();
                        for (o, (&yv, &gv)) in ga.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                            *o = yv * (gv - dot);
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Rotary {
                    x,
                    positions,
                    head_dim,
                } => {
                    acc(&mut grads, *x, apply_rotary(&g, positions, *head_dim, -1.0));
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let rows = self.value(p).rows;
                        let part = Mat::from_vec(
                            rows,
                            g.cols,
                            g.data[off * g.cols..(off + rows) * g.cols].to_vec(),
                        );
                        acc(&mut grads, p, part);
                        off += rows;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let cols = self.value(p).cols;
                        let mut part = Mat::zeros(g.rows, cols);
                        for r in 0..g.rows {
                            part.row_mut(r).copy_from_slice(&g.row(r)[off..off + cols]);
                        }
                        acc(&mut grads, p, part);
                        off += cols;
                    }
                }
                Op::SliceRows(a, start) => {
                    let va = self.value(*a);
                    let mut ga = Mat::zeros(va.rows, va.cols);
                    ga.data[start * va.cols..(start + g.rows) * va.cols].copy_from_slice(&g.data);
                    acc(&mut grads, *a, ga);
                }
                Op::SliceCols(a, start) => {
                    let va = self.value(*a);
                    let mut ga = Mat::zeros(va.rows, va.cols);
                    for r in 0..g.rows {
                        ga.row_mut(r)[*start..start + g.cols].copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::GatherRows(table, idx) => {
                    let vt = self.value(*table);
                    let mut gt = Mat::zeros(vt.rows, vt.cols);
                    for (i, &r) in idx.iter().enumerate() {
                        for (o, &v) in gt.row_mut(r).iter_mut().zip(g.row(i)) {
                            *o = *o + v;
                        }
                    }
                    acc(&mut grads, *table, gt);
                }
                Op::Reshape(a) => {
                    let va = self.value(*a);
                    acc(&mut grads, *a, Mat::from_vec(va.rows, va.cols, g.data));
                }
                Op::QuantileLoss {
                    pred,
                    truth,
                    observed,
                    levels,
                } => {
                    let p = self.value(*pred);
                    let n_obs = observed.iter().filter(|&&o| o).count();
                    let mut gp = Mat::zeros(p.rows, p.cols);
                    if n_obs > 0 {
                        let scale = g.data[0].f64() / (n_obs * levels.len()) as f64;
                        for t in (0..p.rows).filter(|&t| observed[t]) {
                            for (j, &q) in levels.iter().enumerate() {
                                let d = if p.row(t)[j].f64() <= truth[t] { -q } else { 1.0 - q };
                                gp.row_mut(t)[j] = S::of(d * scale);
                            }
                        }
                    }
                    acc(&mut grads, *pred, gp);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(specs: &[(&str, usize, usize, &[f64])]) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        for (name, r, c, v) in specs {
            s.insert(name, Mat::from_vec(*r, *c, v.to_vec()));
        }
        s
    }

    /// Central differences of `f` over every parameter entry.
    fn numeric_grads(
        params: &ParamStore<f64>,
        f: &dyn Fn(&ParamStore<f64>) -> f64,
    ) -> Vec<Vec<f64>> {
        let eps = 1e-6;
        (0..params.len())
            .map(|id| {
                (0..params.get(id).data.len())
                    .map(|k| {
                        let mut p = params.clone();
                        p.get_mut(id).data[k] += eps;
                        let up = f(&p);
                        p.get_mut(id).data[k] -= 2.0 * eps;
                        let down = f(&p);
                        (up - down) / (2.0 * eps)
                    })
                    .collect()
            })
            .collect()
    }

    fn check(params: &ParamStore<f64>, build: &dyn Fn(&mut Graph<f64>) -> Var) {
        let f = |p: &ParamStore<f64>| {
            let mut g = Graph::new(p);
            let root = build(&mut g);
            g.value(root).data[0]
        };
        let mut g = Graph::new(params);
        let root = build(&mut g);
        let mut analytic: Vec<Vec<f64>> = (0..params.len())
            .map(|id| vec![0.0; params.get(id).data.len()])
            .collect();
        for (id, m) in g.backward(root, 1.0) {
            analytic[id] = m.data;
        }
        let numeric = numeric_grads(params, &f);
        for (a, n) in analytic.iter().flatten().zip(numeric.iter().flatten()) {
            assert!(
                (a - n).abs() <= 1e-6 * (1.0 + n.abs()),
                "analytic {a} vs numeric {n}"
            );
        }
    }

    fn sum_all(g: &mut Graph<f64>, x: Var, weights: &[f64]) -> Var {
        // Weighted sum as a 1x1 via matmul with a fixed column.
        let v = g.value(x).clone();
        let flat = g.reshape(x, 1, v.rows * v.cols);
        let w = g.input(Mat::from_vec(v.rows * v.cols, 1, weights[..v.rows * v.cols].to_vec()));
        g.matmul(flat, w)
    }

    const W: [f64; 64] = {
        let mut w = [0.0; 64];
        let mut i = 0;
        while i < 64 {
            w[i] = ((i * 37 % 17) as f64 - 8.0) / 7.0;
            i += 1;
        }
        w
    };

    #[test]
    fn elementwise_and_matmul_ops() {
        let p = store(&[
            ("a", 3, 4, &[0.1, -0.4, 0.3, 0.9, -1.2, 0.5, 0.7, -0.2, 0.05, 0.6, -0.8, 0.3]),
            ("b", 4, 2, &[0.2, -0.1, 0.4, 0.3, -0.5, 0.8, 0.1, -0.7]),
            ("r", 1, 2, &[0.3, -0.6]),
            ("g", 1, 4, &[1.1, 0.9, -0.7, 1.3]),
        ]);
        check(&p, &|g| {
            let a = g.param("a");
            let b = g.param("b");
            let r = g.param("r");
            let gain = g.param("g");
            let n = g.rms_norm(a, gain);
            let x = g.matmul(n, b);
            let x = g.add_row(x, r);
            let x = g.gelu(x);
            let y = g.matmul_t(x, x);
            let y = g.softmax_rows(y);
            let y = g.scale(y, 1.7);
            let z = g.add(y, y);
            sum_all(g, z, &W)
        });
    }

    #[test]
    fn structural_ops() {
        let p = store(&[
            ("a", 3, 4, &[0.1, -0.4, 0.3, 0.9, -1.2, 0.5, 0.7, -0.2, 0.05, 0.6, -0.8, 0.3]),
            ("t", 5, 4, &(0..20).map(|v| (v as f64 * 0.37).sin()).collect::<Vec<_>>()),
        ]);
        check(&p, &|g| {
            let a = g.param("a");
            let t = g.param("t");
            let rows = g.gather_rows(t, vec![4, 0, 4]);
            let x = g.add(a, rows);
            let x = g.rotary(x, vec![0, 3, 7], 2);
            let top = g.slice_rows(x, 0, 2);
            let bottom = g.slice_rows(x, 1, 2);
            let left = g.slice_cols(x, 0, 2);
            let right = g.slice_cols(x, 2, 2);
            let cols = g.concat_cols(vec![right, left]);
            let rows = g.concat_rows(vec![top, bottom, cols]);
            let y = g.reshape(rows, 4, 7);
            sum_all(g, y, &W)
        });
    }

    #[test]
    fn quantile_loss_grad() {
        let p = store(&[("p", 2, 3, &[0.3, -0.2, 1.4, 0.8, 0.55, -0.9])]);
        check(&p, &|g| {
            let x = g.param("p");
            g.quantile_loss(x, vec![0.1, 0.5], vec![true, true], vec![0.1, 0.5, 0.9])
        });
    }

    #[test]
    fn rotary_preserves_norm_and_inverts() {
        let x = Mat::from_vec(2, 4, vec![1.0, 2.0, -0.5, 0.25, 3.0, -1.0, 0.0, 2.0]);
        let y = apply_rotary(&x, &[5, 11], 4, 1.0);
        for r in 0..2 {
            let nx: f64 = x.row(r).iter().map(|v| v * v).sum();
            let ny: f64 = y.row(r).iter().map(|v| v * v).sum();
            assert!((nx - ny).abs() < 1e-12);
        }
        let back = apply_rotary(&y, &[5, 11], 4, -1.0);
        for (a, b) in back.data.iter().zip(&x.data) {
            assert!((a - b).abs() < 1e-12);
        }
        // Position 0 is the identity.
        assert_eq!(apply_rotary(&x, &[0, 0], 4, 1.0), x);
    }

    #[test]
    fn quantile_loss_values() {
        let p = store(&[("p", 1, 9, &[0.0; 9])]);
        let mut g = Graph::new(&p);
        let x = g.param("p");
        let l = g.quantile_loss(x, vec![1.0], vec![true], crate::QUANTILE_LEVELS.to_vec());
        assert!((g.value(l).data[0] - 0.5).abs() < 1e-12);

        let p = store(&[("p", 1, 1, &[20.0])]);
        let mut g = Graph::new(&p);
        let x = g.param("p");
        let l = g.quantile_loss(x, vec![10.0], vec![true], vec![0.9]);
        assert!((g.value(l).data[0] - 1.0).abs() < 1e-12);

        // Masked rows leave the normalizer.
        let p = store(&[("p", 2, 1, &[0.0, 100.0])]);
        let mut g = Graph::new(&p);
        let x = g.param("p");
        let l = g.quantile_loss(x, vec![1.0, 0.0], vec![true, false], vec![0.5]);
        assert!((g.value(l).data[0] - 0.5).abs() < 1e-12);
    }
}
