use rand::Rng;

use super::matrix::{DenseMatrix, Scalar};
use crate::error::{Error, Result};

pub fn relu<T: Scalar>(x: &DenseMatrix<T>) -> DenseMatrix<T> {
    x.map(|v| v.max(T::zero()))
}

/// Gradient of relu given the pre-activation; the kink at 0 takes slope 0.
pub fn relu_backward<T: Scalar>(grad: &mut DenseMatrix<T>, pre: &DenseMatrix<T>) {
    for (g, &p) in grad.data_mut().iter_mut().zip(pre.data()) {
        if p <= T::zero() {
            *g = T::zero();
        }
    }
}

pub fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Scalar>(x: &DenseMatrix<T>) -> DenseMatrix<T> {
    x.map(sigmoid_scalar)
}

/// `ln(1 + e^t)` without overflow.
pub fn softplus<T: Scalar>(t: T) -> T {
    t.max(T::zero()) + (-t.abs()).exp().ln_1p()
}

/// Inverted dropout. Returns the output and, when training with `p > 0`, the
/// multiplier mask (0 or `1/(1-p)`) needed for the backward pass.
pub fn dropout<T: Scalar, R: Rng + ?Sized>(
    x: &DenseMatrix<T>,
    p: f64,
    training: bool,
    rng: &mut R,
) -> Result<(DenseMatrix<T>, Option<DenseMatrix<T>>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Parameter(format!("dropout probability {p} not in [0, 1)")));
    }
    if !training || p == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = T::of(1.0 / (1.0 - p));
    let mut mask = DenseMatrix::zeros(x.rows(), x.cols());
    for m in mask.data_mut() {
        *m = if rng.gen::<f64>() < p { T::zero() } else { keep };
    }
    let mut out = x.clone();
    for (o, &m) in out.data_mut().iter_mut().zip(mask.data()) {
        *o = *o * m;
    }
    Ok((out, Some(mask)))
}

/// Mean binary cross-entropy over logits, and its gradient `(σ(z) − y)/N`.
pub fn bce_with_logits<T: Scalar>(logits: &[T], labels: &[T]) -> Result<(T, Vec<T>)> {
    if logits.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} logits vs {} labels",
            logits.len(),
            labels.len()
        )));
    }
    if logits.is_empty() {
        return Err(Error::Batch("empty batch".into()));
    }
    let n = T::of(logits.len() as f64);
    let two = T::of(2.0);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.iter().zip(labels) {
        let sign = two * y - T::one();
        loss = loss + softplus(-sign * z);
        grad.push((sigmoid_scalar(z) - y) / n);
    }
    Ok((loss / n, grad))
}
