//! Reverse-mode automatic differentiation over dense 2-D tensors.
//!
//! Every value on the tape is a row-major `Array2`; vectors are single-row
//! matrices and scalars are `[1, 1]`. Ops are recorded in topological order
//! during the forward pass and replayed in reverse by [`Tape::backward`].
//! Batched sequence models only ever need matrices, so there is no general
//! N-d broadcasting here, just the handful of fused kernels the encoders and
//! tagger are built from.

use ndarray::{concatenate, s, Array1, Array2, Axis};

use crate::error::SluError;
use crate::params::ParamSet;

/// Scalar type the tape is generic over. Training runs in `f32`; the
/// finite-difference gradient checks instantiate everything at `f64`.
pub trait Scalar: ndarray::NdFloat + std::iter::Sum {
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Handle to a value on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub usize);

enum Op<F: Scalar> {
    /// Constant or parameter leaf; no backward.
    Leaf,
    Matmul(Var, Var),
    Add(Var, Var),
    /// `[N,D] + [1,D]` broadcast over rows (bias add).
    AddRow(Var, Var),
    Mul(Var, Var),
    /// `alpha * x + beta` with constant scalars.
    Affine(Var, F, F),
    Sigmoid(Var),
    Tanh(Var),
    ConcatCols(Var, Var),
    ConcatRows(Var, Var),
    /// Contiguous row range `[lo, hi)` of the input.
    SliceRows(Var, usize, usize),
    /// Arbitrary row selection; backward scatter-adds.
    GatherRows(Var, Vec<usize>),
    /// Row-major reshape to `(rows, cols)`.
    Reshape(Var),
    SoftmaxRows(Var),
    /// Row-wise cosine similarity of two `[N,D]` inputs -> `[N,1]`.
    CosineRows(Var, Var),
    /// Row-wise dot product of two `[N,D]` inputs -> `[N,1]`.
    DotRows(Var, Var),
    /// Attention apply: weights `[B,K]`, memories `[B*K,D]` -> `[B,D]`.
    AttnApply(Var, Var),
    /// Elementwise multiply by a stored constant mask (dropout).
    MaskMul(Var, Array2<F>),
    /// Softmax cross-entropy: logits `[N,C]`, target ids, per-row weights -> scalar.
    /// Saved: row-wise softmax probabilities.
    SoftmaxXent {
        logits: Var,
        targets: Vec<usize>,
        weights: Array1<F>,
        probs: Array2<F>,
    },
    /// Sigmoid binary cross-entropy against a constant target matrix, summed
    /// over columns, weighted per row -> scalar.
    BceLogits {
        logits: Var,
        targets: Array2<F>,
        weights: Array1<F>,
    },
    /// Sum of all elements -> scalar.
    SumAll(Var),
}

/// Wengert list: recorded ops plus their forward values.
pub struct Tape<F: Scalar> {
    ops: Vec<Op<F>>,
    vals: Vec<Array2<F>>,
    /// (node id, parameter index) for every parameter leaf.
    leaves: Vec<(usize, usize)>,
    strict: bool,
}

fn all_finite<F: Scalar>(a: &Array2<F>) -> bool {
    a.iter().all(|x| x.is_finite())
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Tape {
            ops: Vec::new(),
            vals: Vec::new(),
            leaves: Vec::new(),
            strict: true,
        }
    }

    /// Disable the per-op finiteness scan (gradient-check micro-benchmarks).
    pub fn relaxed() -> Self {
        let mut t = Self::new();
        t.strict = false;
        t
    }

    pub fn value(&self, v: Var) -> &Array2<F> {
        &self.vals[v.0]
    }

    pub fn scalar(&self, v: Var) -> F {
        self.vals[v.0][[0, 0]]
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn push(&mut self, op: Op<F>, val: Array2<F>) -> Var {
        if self.strict && !all_finite(&val) {
            panic!("non-finite value produced at tape node {}", self.ops.len());
        }
        self.ops.push(op);
        self.vals.push(val);
        Var(self.vals.len() - 1)
    }

    /// Constant leaf.
    pub fn constant(&mut self, value: Array2<F>) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.constant(Array2::zeros((rows, cols)))
    }

    /// Parameter leaf; gradients flow back into `params` on `backward`.
    pub fn param(&mut self, params: &ParamSet<F>, idx: usize) -> Var {
        let v = self.push(Op::Leaf, params.value(idx).clone());
        self.leaves.push((v.0, idx));
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.vals[a.0].dot(&self.vals[b.0]);
        self.push(Op::Matmul(a, b), v)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = &self.vals[a.0] + &self.vals[b.0];
        self.push(Op::Add(a, b), v)
    }

    /// Add a `[1,D]` bias row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let b = self.vals[bias.0].row(0).to_owned();
        let v = &self.vals[a.0] + &b;
        self.push(Op::AddRow(a, bias), v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = &self.vals[a.0] * &self.vals[b.0];
        self.push(Op::Mul(a, b), v)
    }

    /// `alpha * x + beta` elementwise with constants.
    pub fn affine(&mut self, x: Var, alpha: F, beta: F) -> Var {
        let v = self.vals[x.0].mapv(|e| alpha * e + beta);
        self.push(Op::Affine(x, alpha, beta), v)
    }

    /// `1 - x` elementwise.
    pub fn one_minus(&mut self, x: Var) -> Var {
        self.affine(x, F::from_f64(-1.0), F::from_f64(1.0))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let one = F::one();
        let v = self.vals[x.0].mapv(|e| one / (one + (-e).exp()));
        self.push(Op::Sigmoid(x), v)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let v = self.vals[x.0].mapv(|e| e.tanh());
        self.push(Op::Tanh(x), v)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let v = concatenate![Axis(1), self.vals[a.0], self.vals[b.0]];
        self.push(Op::ConcatCols(a, b), v)
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Var {
        let v = concatenate![Axis(0), self.vals[a.0], self.vals[b.0]];
        self.push(Op::ConcatRows(a, b), v)
    }

    pub fn slice_rows(&mut self, x: Var, lo: usize, hi: usize) -> Var {
        let v = self.vals[x.0].slice(s![lo..hi, ..]).to_owned();
        self.push(Op::SliceRows(x, lo, hi), v)
    }

    pub fn gather_rows(&mut self, x: Var, ids: &[usize]) -> Var {
        let src = &self.vals[x.0];
        let d = src.ncols();
        let mut v = Array2::zeros((ids.len(), d));
        for (i, &r) in ids.iter().enumerate() {
            v.row_mut(i).assign(&src.row(r));
        }
        self.push(Op::GatherRows(x, ids.to_vec()), v)
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Var {
        let v = self.vals[x.0]
            .clone()
            .into_shape_with_order((rows, cols))
            .expect("reshape: element count mismatch");
        self.push(Op::Reshape(x), v)
    }

    /// Row-wise softmax, numerically stabilized.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        if self.vals[x.0].iter().any(|e| !e.is_finite()) {
            panic!("softmax: non-finite input");
        }
        let v = softmax2(&self.vals[x.0]);
        self.push(Op::SoftmaxRows(x), v)
    }

    /// Row-wise cosine similarity -> `[N,1]`. Zero-norm rows score 0.
    pub fn cosine_rows(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (&self.vals[a.0], &self.vals[b.0]);
        let n = va.nrows();
        let mut out = Array2::zeros((n, 1));
        for i in 0..n {
            out[[i, 0]] = cosine(&va.row(i).to_owned(), &vb.row(i).to_owned());
        }
        self.push(Op::CosineRows(a, b), out)
    }

    /// Row-wise dot product -> `[N,1]`.
    pub fn dot_rows(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (&self.vals[a.0], &self.vals[b.0]);
        assert_eq!(va.dim(), vb.dim(), "dot_rows: shape mismatch");
        let n = va.nrows();
        let mut out = Array2::zeros((n, 1));
        for i in 0..n {
            out[[i, 0]] = va.row(i).iter().zip(vb.row(i).iter()).map(|(&x, &y)| x * y).sum();
        }
        self.push(Op::DotRows(a, b), out)
    }

    /// `out[b, :] = sum_k w[b, k] * mem[b * K + k, :]`.
    pub fn attn_apply(&mut self, weights: Var, memories: Var) -> Var {
        let w = &self.vals[weights.0];
        let m = &self.vals[memories.0];
        let (bsz, k) = (w.nrows(), w.ncols());
        assert_eq!(m.nrows(), bsz * k, "attn_apply: memory row count");
        let d = m.ncols();
        let mut out = Array2::zeros((bsz, d));
        for b in 0..bsz {
            for j in 0..k {
                let row = m.row(b * k + j);
                let wv = w[[b, j]];
                out.row_mut(b).zip_mut_with(&row, |o, &x| *o = *o + wv * x);
            }
        }
        self.push(Op::AttnApply(weights, memories), out)
    }

    /// Elementwise multiply by a constant mask (used by dropout).
    pub fn mask_mul(&mut self, x: Var, mask: Array2<F>) -> Var {
        let v = &self.vals[x.0] * &mask;
        self.push(Op::MaskMul(x, mask), v)
    }

    /// Weighted softmax cross-entropy over rows -> scalar `[1,1]`.
    pub fn softmax_xent(&mut self, logits: Var, targets: &[usize], weights: &Array1<F>) -> Var {
        let probs = softmax2(&self.vals[logits.0]);
        let mut loss = F::zero();
        for (i, &t) in targets.iter().enumerate() {
            let p = probs[[i, t]].max(F::from_f64(1e-30));
            loss = loss - weights[i] * p.ln();
        }
        let val = Array2::from_elem((1, 1), loss);
        self.push(
            Op::SoftmaxXent {
                logits,
                targets: targets.to_vec(),
                weights: weights.clone(),
                probs,
            },
            val,
        )
    }

    /// Weighted sigmoid BCE against constant targets, summed over labels -> scalar.
    pub fn bce_logits(&mut self, logits: Var, targets: Array2<F>, weights: &Array1<F>) -> Var {
        let x = &self.vals[logits.0];
        let zero = F::zero();
        let one = F::one();
        let mut loss = F::zero();
        for i in 0..x.nrows() {
            let mut row_loss = F::zero();
            for j in 0..x.ncols() {
                let l = x[[i, j]];
                let t = targets[[i, j]];
                // max(l,0) - l*t + ln(1 + exp(-|l|))
                row_loss = row_loss + l.max(zero) - l * t + (one + (-l.abs()).exp()).ln();
            }
            loss = loss + weights[i] * row_loss;
        }
        let val = Array2::from_elem((1, 1), loss);
        self.push(
            Op::BceLogits {
                logits,
                targets,
                weights: weights.clone(),
            },
            val,
        )
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let s = self.vals[x.0].sum();
        self.push(Op::SumAll(x), Array2::from_elem((1, 1), s))
    }

    /// Reverse pass from a scalar loss; accumulates into parameter gradients.
    pub fn backward(&mut self, loss: Var, params: &mut ParamSet<F>) -> Result<(), SluError> {
        if self.vals[loss.0].dim() != (1, 1) {
            return Err(SluError::Shape(format!(
                "backward: loss must be scalar, got {:?}",
                self.vals[loss.0].dim()
            )));
        }
        let mut grads: Vec<Option<Array2<F>>> = vec![None; self.vals.len()];
        grads[loss.0] = Some(Array2::ones((1, 1)));

        for id in (0..=loss.0).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.ops[id] {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::Matmul(a, b) => {
                    let ga = g.dot(&self.vals[b.0].t());
                    let gb = self.vals[a.0].t().dot(&g);
                    accum(&mut grads, a.0, ga);
                    accum(&mut grads, b.0, gb);
                }
                Op::Add(a, b) => {
                    accum(&mut grads, a.0, g.clone());
                    accum(&mut grads, b.0, g);
                }
                Op::AddRow(a, bias) => {
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accum(&mut grads, a.0, g);
                    accum(&mut grads, bias.0, gb);
                }
                Op::Mul(a, b) => {
                    let ga = &g * &self.vals[b.0];
                    let gb = &g * &self.vals[a.0];
                    accum(&mut grads, a.0, ga);
                    accum(&mut grads, b.0, gb);
                }
                Op::Affine(x, alpha, _) => {
                    accum(&mut grads, x.0, g.mapv(|e| e * *alpha));
                }
                Op::Sigmoid(x) => {
                    let y = &self.vals[id];
                    let gx = &g * &y.mapv(|s| s * (F::one() - s));
                    accum(&mut grads, x.0, gx);
                }
                Op::Tanh(x) => {
                    let y = &self.vals[id];
                    let gx = &g * &y.mapv(|t| F::one() - t * t);
                    accum(&mut grads, x.0, gx);
                }
                Op::ConcatCols(a, b) => {
                    let da = self.vals[a.0].ncols();
                    accum(&mut grads, a.0, g.slice(s![.., ..da]).to_owned());
                    accum(&mut grads, b.0, g.slice(s![.., da..]).to_owned());
                }
                Op::ConcatRows(a, b) => {
                    let na = self.vals[a.0].nrows();
                    accum(&mut grads, a.0, g.slice(s![..na, ..]).to_owned());
                    accum(&mut grads, b.0, g.slice(s![na.., ..]).to_owned());
                }
                Op::SliceRows(x, lo, _hi) => {
                    let mut gx = Array2::zeros(self.vals[x.0].dim());
                    gx.slice_mut(s![*lo..*lo + g.nrows(), ..]).assign(&g);
                    accum(&mut grads, x.0, gx);
                }
                Op::GatherRows(x, ids) => {
                    let mut gx = Array2::zeros(self.vals[x.0].dim());
                    for (i, &r) in ids.iter().enumerate() {
                        let gr = g.row(i);
                        gx.row_mut(r).zip_mut_with(&gr, |o, &v| *o = *o + v);
                    }
                    accum(&mut grads, x.0, gx);
                }
                Op::Reshape(x) => {
                    let dim = self.vals[x.0].dim();
                    let gx = g.into_shape_with_order(dim).expect("reshape backward");
                    accum(&mut grads, x.0, gx);
                }
                Op::SoftmaxRows(x) => {
                    let y = &self.vals[id];
                    let mut gx = Array2::zeros(y.dim());
                    for i in 0..y.nrows() {
                        let yr = y.row(i);
                        let gr = g.row(i);
                        let dot: F = yr.iter().zip(gr.iter()).map(|(&a, &b)| a * b).sum();
                        for j in 0..y.ncols() {
                            gx[[i, j]] = yr[j] * (gr[j] - dot);
                        }
                    }
                    accum(&mut grads, x.0, gx);
                }
                Op::CosineRows(a, b) => {
                    let (va, vb) = (&self.vals[a.0], &self.vals[b.0]);
                    let mut ga = Array2::zeros(va.dim());
                    let mut gb = Array2::zeros(vb.dim());
                    for i in 0..va.nrows() {
                        let ar = va.row(i);
                        let br = vb.row(i);
                        let na = ar.iter().map(|&x| x * x).sum::<F>().sqrt();
                        let nb = br.iter().map(|&x| x * x).sum::<F>().sqrt();
                        if na <= F::zero() || nb <= F::zero() {
                            continue; // degenerate rows scored 0; zero gradient
                        }
                        let sim = self.vals[id][[i, 0]];
                        let gi = g[[i, 0]];
                        for j in 0..va.ncols() {
                            ga[[i, j]] = gi * (br[j] / (na * nb) - sim * ar[j] / (na * na));
                            gb[[i, j]] = gi * (ar[j] / (na * nb) - sim * br[j] / (nb * nb));
                        }
                    }
                    accum(&mut grads, a.0, ga);
                    accum(&mut grads, b.0, gb);
                }
                Op::DotRows(a, b) => {
                    let (va, vb) = (&self.vals[a.0], &self.vals[b.0]);
                    let mut ga = Array2::zeros(va.dim());
                    let mut gb = Array2::zeros(vb.dim());
                    for i in 0..va.nrows() {
                        let gi = g[[i, 0]];
                        for j in 0..va.ncols() {
                            ga[[i, j]] = gi * vb[[i, j]];
                            gb[[i, j]] = gi * va[[i, j]];
                        }
                    }
                    accum(&mut grads, a.0, ga);
                    accum(&mut grads, b.0, gb);
                }
                Op::AttnApply(w, m) => {
                    let wv = &self.vals[w.0];
                    let mv = &self.vals[m.0];
                    let (bsz, k) = (wv.nrows(), wv.ncols());
                    let mut gw = Array2::zeros(wv.dim());
                    let mut gm = Array2::zeros(mv.dim());
                    for b in 0..bsz {
                        let gout = g.row(b);
                        for j in 0..k {
                            let mr = mv.row(b * k + j);
                            gw[[b, j]] = gout.iter().zip(mr.iter()).map(|(&x, &y)| x * y).sum();
                            let wj = wv[[b, j]];
                            gm.row_mut(b * k + j)
                                .zip_mut_with(&gout, |o, &x| *o = *o + wj * x);
                        }
                    }
                    accum(&mut grads, w.0, gw);
                    accum(&mut grads, m.0, gm);
                }
                Op::MaskMul(x, mask) => {
                    accum(&mut grads, x.0, &g * mask);
                }
                Op::SoftmaxXent {
                    logits,
                    targets,
                    weights,
                    probs,
                } => {
                    let gs = g[[0, 0]];
                    let mut gl = probs.clone();
                    for (i, &t) in targets.iter().enumerate() {
                        gl[[i, t]] = gl[[i, t]] - F::one();
                        let wi = weights[i] * gs;
                        gl.row_mut(i).mapv_inplace(|e| e * wi);
                    }
                    accum(&mut grads, logits.0, gl);
                }
                Op::BceLogits {
                    logits,
                    targets,
                    weights,
                } => {
                    let gs = g[[0, 0]];
                    let x = &self.vals[logits.0];
                    let one = F::one();
                    let mut gl = Array2::zeros(x.dim());
                    for i in 0..x.nrows() {
                        let wi = weights[i] * gs;
                        for j in 0..x.ncols() {
                            let sig = one / (one + (-x[[i, j]]).exp());
                            gl[[i, j]] = wi * (sig - targets[[i, j]]);
                        }
                    }
                    accum(&mut grads, logits.0, gl);
                }
                Op::SumAll(x) => {
                    let gs = g[[0, 0]];
                    accum(&mut grads, x.0, Array2::from_elem(self.vals[x.0].dim(), gs));
                }
            }
        }

        for &(node, pidx) in &self.leaves {
            if let Some(g) = &grads[node] {
                params.grad_mut(pidx).zip_mut_with(g, |a, &b| *a = *a + b);
            }
        }
        Ok(())
    }
}

impl<F: Scalar> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

fn accum<F: Scalar>(grads: &mut [Option<Array2<F>>], id: usize, g: Array2<F>) {
    match &mut grads[id] {
        Some(acc) => *acc = &*acc + &g,
        slot => *slot = Some(g),
    }
}

/// Stable row-wise softmax on a plain array.
pub fn softmax2<F: Scalar>(x: &Array2<F>) -> Array2<F> {
    let mut out = Array2::zeros(x.dim());
    for i in 0..x.nrows() {
        let row = x.row(i);
        let mx = row.iter().cloned().fold(F::neg_infinity(), F::max);
        let mut denom = F::zero();
        for j in 0..x.ncols() {
            let e = (row[j] - mx).exp();
            out[[i, j]] = e;
            denom = denom + e;
        }
        for j in 0..x.ncols() {
            out[[i, j]] = out[[i, j]] / denom;
        }
    }
    out
}

/// Cosine similarity of two vectors; zero-norm inputs score 0 (degenerate).
pub fn cosine<F: Scalar>(a: &Array1<F>, b: &Array1<F>) -> F {
    assert_eq!(a.len(), b.len(), "cosine: length mismatch");
    let na = a.iter().map(|&x| x * x).sum::<F>().sqrt();
    let nb = b.iter().map(|&x| x * x).sum::<F>().sqrt();
    if na <= F::zero() || nb <= F::zero() {
        return F::zero();
    }
    let dot: F = a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum();
    let v = dot / (na * nb);
    v.max(F::from_f64(-1.0)).min(F::one())
}
