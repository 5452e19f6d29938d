//! Chi-square quantiles by Newton iteration on the regularised incomplete gamma.

use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{ElError, Result};

const MAX_ITERS: usize = 200;

/// `c` with `P(χ²_df ≤ c) = prob`.
pub fn chisq_quantile(df: usize, prob: f64) -> Result<f64> {
    if df == 0 {
        return Err(ElError::Domain("degrees of freedom must be positive".into()));
    }
    if !(prob > 0.0 && prob < 1.0) {
        return Err(ElError::Domain(format!("probability must lie in (0, 1), got {prob}")));
    }
    let k = df as f64;
    let shape = 0.5 * k;
    let log_norm = shape * std::f64::consts::LN_2 + ln_gamma(shape);
    let cdf = |x: f64| gamma_lr(shape, 0.5 * x);
    let pdf = |x: f64| ((shape - 1.0) * x.ln() - 0.5 * x - log_norm).exp();

    // Wilson–Hilferty start.
    let z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * prob);
    let v = 2.0 / (9.0 * k);
    let mut x = k * (1.0 - v + z * v.sqrt()).powi(3);
    if !(x > 0.0) {
        x = k * prob.powf(2.0 / k).max(1e-300);
    }

    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    for _ in 0..MAX_ITERS {
        let f = cdf(x) - prob;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let density = pdf(x);
        let mut next = x - f / density;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(lo) + 1.0 };
        }
        if (next - x).abs() <= 1e-15 * x.max(1e-300) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}
