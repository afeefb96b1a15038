//! Differentiable building blocks with hand-derived backward passes.

use super::store::{ParamRef, ParamStore};
use super::tensor::Tensor;
use crate::rng::DetRng;

/// Xavier-uniform matrix `[rows, cols]`: scale sqrt(6 / (rows + cols)).
pub fn xavier(rows: usize, cols: usize, rng: &mut DetRng) -> Tensor {
    let scale = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.uniform(-scale, scale)).collect();
    Tensor::from_vec(&[rows, cols], data)
}

/// Dot product with four independent accumulators so the multiply-add chain
/// pipelines and vectorizes on the baseline target. The fixed summation order
/// keeps results bit-reproducible across runs.
#[inline]
pub(crate) fn dot_fast(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..chunks {
        let k = i * 4;
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in chunks * 4..n {
        tail += a[k] * b[k];
    }
    ((s0 + s1) + (s2 + s3)) + tail
}

/// `dst += s * x`, element-wise.
#[inline]
pub(crate) fn axpy(dst: &mut [f64], s: f64, x: &[f64]) {
    debug_assert_eq!(dst.len(), x.len());
    for i in 0..dst.len() {
        dst[i] += s * x[i];
    }
}

/// Fully connected layer `y = W x + b`.
#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub w: ParamRef,
    pub b: ParamRef,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn init(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut DetRng) -> Self {
        let w = store.add(&format!("{name}.w"), xavier(out_dim, in_dim, rng));
        let b = store.add(&format!("{name}.b"), Tensor::zeros(&[out_dim]));
        Linear { w, b, in_dim, out_dim }
    }

    pub fn forward(&self, store: &ParamStore, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.in_dim, "linear: input dim mismatch");
        let w = store.value(self.w);
        let b = store.value(self.b);
        let mut y = vec![0.0; self.out_dim];
        for o in 0..self.out_dim {
            y[o] = b.data()[o] + dot_fast(w.row(o), x);
        }
        y
    }

    /// Accumulates dW and db; writes dL/dx into `dx` when given (added, not
    /// overwritten, so inputs shared by several layers accumulate correctly).
    pub fn backward(&self, store: &mut ParamStore, x: &[f64], dy: &[f64], dx: Option<&mut [f64]>) {
        assert_eq!(dy.len(), self.out_dim, "linear: output grad dim mismatch");
        let (values, grads) = store.split_mut();
        {
            let db = grads[self.b.0].data_mut();
            for o in 0..self.out_dim {
                db[o] += dy[o];
            }
        }
        {
            let dw = &mut grads[self.w.0];
            for o in 0..self.out_dim {
                axpy(dw.row_mut(o), dy[o], x);
            }
        }
        if let Some(dx) = dx {
            let w = &values[self.w.0];
            for o in 0..self.out_dim {
                axpy(dx, dy[o], w.row(o));
            }
        }
    }
}

/// Embedding table; lookups return rows, gradients scatter-add into rows.
#[derive(Clone, Copy, Debug)]
pub struct Embedding {
    pub table: ParamRef,
    pub vocab: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn init(store: &mut ParamStore, name: &str, vocab: usize, dim: usize, rng: &mut DetRng) -> Self {
        let scale = 0.1;
        let data = (0..vocab * dim).map(|_| rng.uniform(-scale, scale)).collect();
        let table = store.add(name, Tensor::from_vec(&[vocab, dim], data));
        Embedding { table, vocab, dim }
    }

    pub fn lookup<'s>(&self, store: &'s ParamStore, idx: usize) -> &'s [f64] {
        assert!(idx < self.vocab, "embedding index {idx} out of range {}", self.vocab);
        store.value(self.table).row(idx)
    }

    pub fn backward(&self, store: &mut ParamStore, idx: usize, d: &[f64]) {
        assert!(idx < self.vocab);
        let row = store.grad_mut(self.table).row_mut(idx);
        for i in 0..d.len() {
            row[i] += d[i];
        }
    }
}

/// Numerically stable softmax; output sums to 1.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Cross-entropy of a softmax distribution against one label.
/// Returns `(loss, dL/dlogits)`; the gradient is `softmax - one_hot`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    assert!(label < logits.len(), "label out of range");
    let probs = softmax(logits);
    let loss = -probs[label].max(f64::MIN_POSITIVE).ln();
    let mut grad = probs;
    grad[label] -= 1.0;
    (loss, grad)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine dissimilarity `1 - cos(a, b)` with gradient w.r.t. `a` only
/// (`b` is a frozen reference). Bitwise-equal inputs are the exact minimum:
/// loss 0, zero gradient, matching the analytic limit.
pub fn cosine_loss(a: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(a.len(), b.len(), "cosine_loss: length mismatch");
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    assert!(na > 0.0 && nb > 0.0, "cosine_loss: zero-norm input");
    if a == b {
        return (0.0, vec![0.0; a.len()]);
    }
    let ab = dot(a, b);
    let cos = ab / (na * nb);
    let loss = 1.0 - cos;
    // d/da (1 - a.b / (|a||b|)) = -(b / (|a||b|) - (a.b) a / (|a|^3 |b|))
    let inv = 1.0 / (na * nb);
    let coef = ab / (na * na * na * nb);
    let grad = a.iter().zip(b).map(|(&ai, &bi)| -(bi * inv - ai * coef)).collect();
    (loss, grad)
}
