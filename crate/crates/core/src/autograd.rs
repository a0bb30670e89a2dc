//! Minimal reverse-mode automatic differentiation over dense `f64`
//! matrices, sized for per-query message passing on small subgraphs.
//!
//! A [`Tape`] records every operation in execution order; `backward`
//! walks it in reverse and accumulates gradients into each node.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    fn zip(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul inner dimension");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · other`.
    fn t_matmul(&self, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let brow = other.row(k);
            for i in 0..self.cols {
                let a = self.data[k * self.cols + i];
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out.data[i * other.cols..(i + 1) * other.cols].iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · otherᵀ`.
    fn matmul_t(&self, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = a.iter().zip(other.row(j)).map(|(x, y)| x * y).sum();
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(usize),
    Add(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Matrix),
    Scale(Var, f64),
    MatMul(Var, Var),
    GatherRows(Var, Vec<u32>),
    ScatterSum(Var, Vec<u32>),
    ScatterMean(Var, Vec<u32>, Vec<u32>),
    /// Source row feeding each output cell, `usize::MAX` when empty.
    ScatterMax(Var, Vec<usize>),
    ConcatCols(Vec<Var>),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    MulCol(Var, Var),
    RowSum(Var),
    BceWithLogitsSum(Var, usize),
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Recorded computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a backward pass, indexed by node.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    params: Vec<(usize, usize)>,
}

impl Gradients {
    pub fn of(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }

    /// `(param index, gradient)` for every parameter leaf that received one.
    pub fn params(&self) -> impl Iterator<Item = (usize, &Matrix)> {
        self.params
            .iter()
            .filter_map(|&(p, node)| self.grads[node].as_ref().map(|g| (p, g)))
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf)
    }

    /// Differentiable leaf tagged with parameter index `index`.
    pub fn param(&mut self, index: usize, m: &Matrix) -> Var {
        self.push(m.clone(), Op::Param(index))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!((va.rows, va.cols), (vb.rows, vb.cols), "add shape");
        let v = va.zip(vb, |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!((va.rows, va.cols), (vb.rows, vb.cols), "mul shape");
        let v = va.zip(vb, |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    /// Elementwise product with a constant (e.g. a dropout mask).
    pub fn mul_const(&mut self, a: Var, c: Matrix) -> Var {
        let v = self.value(a).zip(&c, |x, y| x * y);
        self.push(v, Op::MulConst(a, c))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// Row `idx[i]` of `a` as row `i` of the output.
    pub fn gather_rows(&mut self, a: Var, idx: Vec<u32>) -> Var {
        let va = self.value(a);
        let mut out = Matrix::zeros(idx.len(), va.cols);
        for (i, &r) in idx.iter().enumerate() {
            out.row_mut(i).copy_from_slice(va.row(r as usize));
        }
        self.push(out, Op::GatherRows(a, idx))
    }

    /// Sums row `i` of `a` into output row `target[i]`.
    pub fn scatter_sum(&mut self, a: Var, target: Vec<u32>, n_out: usize) -> Var {
        let va = self.value(a);
        let mut out = Matrix::zeros(n_out, va.cols);
        for (i, &t) in target.iter().enumerate() {
            for (o, x) in out.row_mut(t as usize).iter_mut().zip(va.row(i)) {
                *o += x;
            }
        }
        self.push(out, Op::ScatterSum(a, target))
    }

    /// Mean of the rows scattered into each output row; empty rows are zero.
    pub fn scatter_mean(&mut self, a: Var, target: Vec<u32>, n_out: usize) -> Var {
        let va = self.value(a);
        let mut counts = vec![0u32; n_out];
        for &t in &target {
            counts[t as usize] += 1;
        }
        let mut out = Matrix::zeros(n_out, va.cols);
        for (i, &t) in target.iter().enumerate() {
            let c = counts[t as usize] as f64;
            for (o, x) in out.row_mut(t as usize).iter_mut().zip(va.row(i)) {
                *o += x / c;
            }
        }
        self.push(out, Op::ScatterMean(a, target, counts))
    }

    /// Elementwise max of the rows scattered into each output row; empty
    /// rows are zero. Ties route the gradient to the first source row.
    pub fn scatter_max(&mut self, a: Var, target: &[u32], n_out: usize) -> Var {
        let va = self.value(a);
        let d = va.cols;
        let mut out = Matrix::zeros(n_out, d);
        let mut arg = vec![usize::MAX; n_out * d];
        for (i, &t) in target.iter().enumerate() {
            let base = t as usize * d;
            for (c, &x) in va.row(i).iter().enumerate() {
                let slot = base + c;
                if arg[slot] == usize::MAX || x > out.data[slot] {
                    out.data[slot] = x;
                    arg[slot] = i;
                }
            }
        }
        self.push(out, Op::ScatterMax(a, arg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let vp = self.value(p);
            assert_eq!(vp.rows, rows, "concat rows");
            for r in 0..rows {
                out.data[r * cols + off..r * cols + off + vp.cols].copy_from_slice(vp.row(r));
            }
            off += vp.cols;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    /// Scales row `i` of `a` by `c[i, 0]`.
    pub fn mul_col(&mut self, a: Var, c: Var) -> Var {
        let (va, vc) = (self.value(a), self.value(c));
        assert_eq!((vc.rows, vc.cols), (va.rows, 1), "mul_col shape");
        let mut out = va.clone();
        for r in 0..va.rows {
            let s = vc.data[r];
            out.row_mut(r).iter_mut().for_each(|x| *x *= s);
        }
        self.push(out, Op::MulCol(a, c))
    }

    /// Per-row sum as an `n × 1` column.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let data = (0..va.rows).map(|r| va.row(r).iter().sum()).collect();
        self.push(Matrix::from_vec(va.rows, 1, data), Op::RowSum(a))
    }

    /// `-Σ_o [y_o log σ(z_o) + (1 - y_o) log(1 - σ(z_o))]` over a logit
    /// column with a single positive row.
    pub fn bce_with_logits_sum(&mut self, logits: Var, positive: usize) -> Var {
        let v = bce_with_logits(&self.value(logits).data, positive);
        self.push(Matrix::from_vec(1, 1, vec![v]), Op::BceWithLogitsSum(logits, positive))
    }

    /// Reverse pass seeded with `d root / d root = 1`.
    pub fn backward(&self, root: Var) -> Gradients {
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        let r = &self.nodes[root.0].value;
        grads[root.0] = Some(Matrix::filled(r.rows, r.cols, 1.0));
        let mut params = Vec::new();
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if let Op::Param(p) = node.op {
                params.push((p, i));
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        params.reverse();
        Gradients { grads, params }
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let mut acc = |v: Var, d: Matrix| match &mut grads[v.0] {
            Some(x) => x.add_assign(&d),
            slot @ None => *slot = Some(d),
        };
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Mul(a, b) => {
                acc(*a, g.zip(self.value(*b), |x, y| x * y));
                acc(*b, g.zip(self.value(*a), |x, y| x * y));
            }
            Op::MulConst(a, c) => acc(*a, g.zip(c, |x, y| x * y)),
            Op::Scale(a, s) => acc(*a, g.map(|x| x * s)),
            Op::MatMul(a, b) => {
                acc(*a, g.matmul_t(self.value(*b)));
                acc(*b, self.value(*a).t_matmul(g));
            }
            Op::GatherRows(a, idx) => {
                let va = self.value(*a);
                let mut d = Matrix::zeros(va.rows, va.cols);
                for (i, &r) in idx.iter().enumerate() {
                    for (o, x) in d.row_mut(r as usize).iter_mut().zip(g.row(i)) {
                        *o += x;
                    }
                }
                acc(*a, d);
            }
            Op::ScatterSum(a, target) => {
                let va = self.value(*a);
                let mut d = Matrix::zeros(va.rows, va.cols);
                for (i, &t) in target.iter().enumerate() {
                    d.row_mut(i).copy_from_slice(g.row(t as usize));
                }
                acc(*a, d);
            }
            Op::ScatterMean(a, target, counts) => {
                let va = self.value(*a);
                let mut d = Matrix::zeros(va.rows, va.cols);
                for (i, &t) in target.iter().enumerate() {
                    let c = counts[t as usize] as f64;
                    for (o, x) in d.row_mut(i).iter_mut().zip(g.row(t as usize)) {
                        *o = x / c;
                    }
                }
                acc(*a, d);
            }
            Op::ScatterMax(a, arg) => {
                let va = self.value(*a);
                let cols = va.cols;
                let mut d = Matrix::zeros(va.rows, cols);
                for (slot, &src) in arg.iter().enumerate() {
                    if src != usize::MAX {
                        d.data[src * cols + slot % cols] += g.data[slot];
                    }
                }
                acc(*a, d);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let vp = self.value(p);
                    let mut d = Matrix::zeros(vp.rows, vp.cols);
                    for r in 0..vp.rows {
                        d.row_mut(r)
                            .copy_from_slice(&g.row(r)[off..off + vp.cols]);
                    }
                    off += vp.cols;
                    acc(p, d);
                }
            }
            Op::Relu(a) => acc(*a, g.zip(self.value(*a), |x, y| if y > 0.0 { x } else { 0.0 })),
            Op::Tanh(a) => acc(*a, g.zip(&node.value, |x, t| x * (1.0 - t * t))),
            Op::Sigmoid(a) => acc(*a, g.zip(&node.value, |x, s| x * s * (1.0 - s))),
            Op::MulCol(a, c) => {
                let (va, vc) = (self.value(*a), self.value(*c));
                let mut da = g.clone();
                let mut dc = Matrix::zeros(vc.rows, 1);
                for r in 0..va.rows {
                    let s = vc.data[r];
                    da.row_mut(r).iter_mut().for_each(|x| *x *= s);
                    dc.data[r] = g.row(r).iter().zip(va.row(r)).map(|(x, y)| x * y).sum();
                }
                acc(*a, da);
                acc(*c, dc);
            }
            Op::RowSum(a) => {
                let va = self.value(*a);
                let mut d = Matrix::zeros(va.rows, va.cols);
                for r in 0..va.rows {
                    let s = g.data[r];
                    d.row_mut(r).iter_mut().for_each(|x| *x = s);
                }
                acc(*a, d);
            }
            Op::BceWithLogitsSum(z, pos) => {
                let vz = self.value(*z);
                let s = g.data[0];
                let d = vz
                    .data
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| s * (sigmoid(x) - if i == *pos { 1.0 } else { 0.0 }))
                    .collect();
                acc(*z, Matrix::from_vec(vz.rows, vz.cols, d));
            }
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Summed binary cross-entropy of `logits` against a one-hot target at
/// `positive`, using `-log σ(z) = softplus(-z)` and `-log(1 - σ(z)) = softplus(z)`.
pub fn bce_with_logits(logits: &[f64], positive: usize) -> f64 {
    logits
        .iter()
        .enumerate()
        .map(|(i, &z)| if i == positive { softplus(-z) } else { softplus(z) })
        .sum()
}
