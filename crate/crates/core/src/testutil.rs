//! Shared helpers for unit tests: seeded RNG and a central-difference
//! gradient checker independent of any backward-pass code.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform value in (-1, 1).
pub fn unif(r: &mut ChaCha8Rng) -> f64 {
    r.gen_range(-1.0..1.0)
}

/// Central finite-difference gradient of `eval` at `x`.
pub fn fd_grad<F: Fn(&[f64]) -> f64>(x: &[f64], eval: F, step: f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let plus = eval(&probe);
        probe[i] = x[i] - step;
        let minus = eval(&probe);
        probe[i] = x[i];
        grad.push((plus - minus) / (2.0 * step));
    }
    grad
}

/// Relative error between two gradient vectors, norm-based.
pub fn grad_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let mut diff = 0.0;
    let mut na = 0.0;
    let mut nn = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        diff += (a - n) * (a - n);
        na += a * a;
        nn += n * n;
    }
    diff.sqrt() / na.sqrt().max(nn.sqrt()).max(1e-10)
}

/// Assert that `analytic` matches central differences of `eval` at `x`.
pub fn fd_check<F: Fn(&[f64]) -> f64>(
    x: &[f64],
    analytic: &[f64],
    eval: F,
    step: f64,
    tol: f64,
) {
    let numeric = fd_grad(x, eval, step);
    let err = grad_rel_err(analytic, &numeric);
    assert!(
        err < tol,
        "gradient mismatch: rel err {err:.3e} >= {tol:.1e}"
    );
}
