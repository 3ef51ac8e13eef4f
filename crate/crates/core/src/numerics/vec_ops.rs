//! Small dense-vector helpers shared by the pooling, memory, and head code.

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_l2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Scale `v` to unit Euclidean norm, preserving direction.
///
/// An exactly zero vector is an error: a zero pooled feature means an
/// upstream mask emptied out, and the caller must decide what to do.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm_l2(v);
    if n == 0.0 {
        return Err(Error::ZeroVector("l2_normalize input"));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// In-place variant of [`l2_normalize`].
pub fn l2_normalize_in_place(v: &mut [f64]) -> Result<()> {
    let n = norm_l2(v);
    if n == 0.0 {
        return Err(Error::ZeroVector("l2_normalize input"));
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    Ok(())
}

/// Backward pass of l2 normalization.
///
/// With `y = raw / ||raw||` and upstream gradient `g` with respect to `y`,
/// the gradient with respect to `raw` is `(g - (g . y) y) / ||raw||`.
pub fn l2_normalize_backward(raw: &[f64], grad_out: &[f64]) -> Vec<f64> {
    let n = norm_l2(raw);
    debug_assert!(n > 0.0);
    let y: Vec<f64> = raw.iter().map(|x| x / n).collect();
    let g_dot_y = dot(grad_out, &y);
    grad_out
        .iter()
        .zip(&y)
        .map(|(g, yi)| (g - g_dot_y * yi) / n)
        .collect()
}

/// Mean of a set of equally sized vectors.
pub fn mean_vector(vectors: &[&[f64]]) -> Result<Vec<f64>> {
    let first = vectors.first().ok_or(Error::EmptyInput("mean_vector"))?;
    let dim = first.len();
    let mut out = vec![0.0; dim];
    for v in vectors {
        debug_assert_eq!(v.len(), dim);
        for (o, x) in out.iter_mut().zip(*v) {
            *o += x;
        }
    }
    let inv = 1.0 / vectors.len() as f64;
    for o in out.iter_mut() {
        *o *= inv;
    }
    Ok(out)
}

/// Numerically stable log(sum(exp(x))).
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Softmax of a logit slice.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
