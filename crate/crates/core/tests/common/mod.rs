//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use eel_core::simulate::{sample, substream, ProductDist};
use eel_core::TwoSampleData;

/// One-sample log-likelihood ratio for a scalar mean, by bisection on the
/// multiplier. `+∞` outside the open hull.
pub fn one_sample_1d(x: &[f64], mu: f64) -> f64 {
    let lo_x = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_x = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(mu > lo_x && mu < hi_x) {
        return f64::INFINITY;
    }
    let score = |lam: f64| x.iter().map(|xi| (xi - mu) / (1.0 + lam * (xi - mu))).sum::<f64>();
    let mut a = -1.0 / (hi_x - mu);
    let mut b = 1.0 / (mu - lo_x);
    for _ in 0..300 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        if score(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let lam = 0.5 * (a + b);
    2.0 * x.iter().map(|xi| (1.0 + lam * (xi - mu)).ln()).sum::<f64>()
}

/// Two-sample ratio for scalar data: minimise `l_X(μ) + l_Y(μ + θ)` over μ by
/// repeated grid refinement (the profile is convex in μ).
pub fn two_sample_1d(x: &[f64], y: &[f64], theta: f64) -> f64 {
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = min(x).max(min(y) - theta);
    let mut hi = max(x).min(max(y) - theta);
    if !(lo < hi) {
        return f64::INFINITY;
    }
    let f = |mu: f64| one_sample_1d(x, mu) + one_sample_1d(y, mu + theta);
    let points = 2001;
    let mut best = f64::INFINITY;
    for _ in 0..30 {
        let step = (hi - lo) / (points as f64 - 1.0);
        let mut arg = 0;
        best = f64::INFINITY;
        for k in 0..points {
            let v = f(lo + step * k as f64);
            if v < best {
                best = v;
                arg = k;
            }
        }
        let centre = lo + step * arg as f64;
        lo = (centre - 2.0 * step).max(lo);
        hi = (centre + 2.0 * step).min(hi);
        if hi - lo < 1e-14 {
            break;
        }
    }
    best
}

/// Toy data X = {0, 1}, Y = {2, 3}: `l(2 + a) = −4 log(1 − a²)` for |a| < 1.
pub fn toy_closed_form(theta: f64) -> f64 {
    let a = theta - 2.0;
    if a.abs() < 1.0 {
        -4.0 * (1.0 - a * a).ln()
    } else {
        f64::INFINITY
    }
}

/// Brute force over the weight simplex for the toy data: `p = (1 − t, t)`,
/// `q` fixed by the constraint, `points` values of `t`.
pub fn toy_grid(theta: f64, points: usize) -> f64 {
    let a = theta - 2.0;
    let (t_lo, t_hi) = ((-a).max(0.0), (1.0 - a).min(1.0));
    let mut best = f64::NEG_INFINITY;
    for k in 1..points {
        let t = t_lo + (t_hi - t_lo) * k as f64 / points as f64;
        let q2 = t + a;
        let v = (2.0 * (1.0 - t)).ln() + (2.0 * t).ln() + (2.0 * (1.0 - q2)).ln() + (2.0 * q2).ln();
        best = best.max(v);
    }
    -2.0 * best
}

pub fn seeded_data(x: &ProductDist, y: &ProductDist, m: usize, n: usize, seed: u64) -> TwoSampleData {
    let mut rng = substream(seed, &[m as u64, n as u64]);
    let xs = sample(x, m, &mut rng);
    let ys = sample(y, n, &mut rng);
    TwoSampleData::new(xs, ys).unwrap()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `Γ(k/2)` for integer `k ≥ 1` by the half-integer recursion.
fn gamma_half(k: usize) -> f64 {
    let (mut g, mut a) = if k % 2 == 0 { (1.0, 1.0) } else { (std::f64::consts::PI.sqrt(), 0.5) };
    while a + 0.5 < k as f64 / 2.0 {
        g *= a;
        a += 1.0;
    }
    g
}

/// Chi-square CDF by composite Simpson quadrature in `u = √x`, which removes
/// the singularity of the density at zero.
pub fn chisq_cdf_simpson(df: usize, q: f64) -> f64 {
    let k = df as f64;
    let norm = 2.0 / (2f64.powf(k / 2.0) * gamma_half(df));
    let f = |u: f64| norm * u.powf(k - 1.0) * (-u * u / 2.0).exp();
    let b = q.sqrt();
    let steps = 20_000;
    let h = b / steps as f64;
    let mut acc = f(0.0) + f(b);
    for i in 1..steps {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    acc * h / 3.0
}

/// Quantile by bisection on [`chisq_cdf_simpson`].
pub fn chisq_quantile_oracle(df: usize, prob: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 200.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if chisq_cdf_simpson(df, mid) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `θ̂ + 3·diag(se)·z`: a point at the sampling-error scale of the MELE,
/// with `se²` the per-coordinate variance of the mean difference.
pub fn theta_at_se_scale(data: &TwoSampleData, z: &[f64]) -> Vec<f64> {
    let (sx, sy) = (data.x().covariance(), data.y().covariance());
    let (m, n) = (data.m() as f64, data.n() as f64);
    data.mele()
        .iter()
        .enumerate()
        .map(|(c, h)| h + 3.0 * (sx[(c, c)] / m + sy[(c, c)] / n).sqrt() * z[c])
        .collect()
}
