//! `e^{tQ} f` by uniformization.

use crate::error::{Error, Result};
use crate::exact::SparseGenerator;

/// Headroom over the largest exit rate, so no row of `P = I + Q/Λ` is a
/// pure self-loop.
pub const UNIFORMIZATION_HEADROOM: f64 = 1.05;

/// Computes `e^{tQ} f = Σ_k Pois(k; Λt) P^k f`, truncating the Poisson sum
/// once the tail mass times `‖f‖_∞` drops below `tol`.
pub fn semigroup_apply(q: &SparseGenerator, f: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::Input(format!("tolerance must be positive, got {tol}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Input(format!("time must be finite and nonnegative, got {t}")));
    }
    if f.len() != q.len() {
        return Err(Error::Input("function length does not match sector".into()));
    }
    let lambda = UNIFORMIZATION_HEADROOM * q.lambda_max();
    if t == 0.0 || lambda == 0.0 {
        return Ok(f.to_vec());
    }
    let norm = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if norm == 0.0 {
        return Ok(f.to_vec());
    }
    let mu = lambda * t;
    let ln_mu = mu.ln();
    let mut log_w = -mu;
    let mut v = f.to_vec();
    let mut out = vec![0.0; f.len()];
    let mut k = 0u64;
    loop {
        let w = log_w.exp();
        for (o, x) in out.iter_mut().zip(&v) {
            *o += w * x;
        }
        // tail Σ_{j>k} Pois(j) ≤ Pois(k+1) / (1 − μ/(k+2)) once k+2 > μ
        let next = log_w + ln_mu - ((k + 1) as f64).ln();
        if (k + 2) as f64 > mu {
            let tail = next.exp() / (1.0 - mu / (k + 2) as f64);
            if tail * norm < tol {
                break;
            }
        }
        let qv = q.apply(&v);
        for (x, d) in v.iter_mut().zip(qv) {
            *x += d / lambda;
        }
        log_w = next;
        k += 1;
        if k > 100_000_000 {
            return Err(Error::NonConvergence("uniformization exceeded 1e8 terms".into()));
        }
    }
    Ok(out)
}
