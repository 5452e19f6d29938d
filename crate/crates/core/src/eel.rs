//! Composite similarity mapping and the extended log-likelihood ratio.
//!
//! The mapping `h(θ) = θ̂ + γ(N, l(θ))(θ − θ̂)` stretches every contour of
//! `l` about the MELE by a factor depending only on its level. It maps the
//! open domain of `l` onto all of `ℝ^d`, so `l*(θ) = l(h⁻¹(θ))` is finite
//! everywhere. The inverse is found one ray at a time: `h⁻¹(θ) = θ̂ + s(θ − θ̂)`
//! where `s` is the root of `g(s) = s·γ(N, l(θ̂ + s(θ − θ̂))) − 1`.

use crate::data::TwoSampleData;
use crate::error::{ElError, Result};
use crate::oel::{oel_logratio, DualState, OelSolver, SolverOptions};

const INITIAL_BRACKET: f64 = 0.9;
const MAX_BRACKET_STEPS: usize = 60;
const ROOT_TOL: f64 = 1e-10;
const WIDTH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MappingOrder {
    /// `γ = 1 + l/(2N)`.
    FirstOrder,
    /// `γ = 1 + η l^δ/(2N)`.
    SecondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MappingSpec {
    pub order: MappingOrder,
    pub eta: f64,
    pub delta: f64,
}

impl MappingSpec {
    pub fn first_order() -> Self {
        Self { order: MappingOrder::FirstOrder, eta: 0.0, delta: 0.0 }
    }

    pub fn second_order(eta: f64, delta: f64) -> Result<Self> {
        let spec = Self { order: MappingOrder::SecondOrder, eta, delta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self.order {
            MappingOrder::FirstOrder => Ok(()),
            MappingOrder::SecondOrder => {
                if !(self.eta > 0.0 && self.eta.is_finite()) {
                    return Err(ElError::Domain(format!("eta must be positive, got {}", self.eta)));
                }
                if !(self.delta > 0.0 && self.delta <= 1.0) {
                    return Err(ElError::Domain(format!("delta must lie in (0, 1], got {}", self.delta)));
                }
                Ok(())
            }
        }
    }
}

/// Expansion factor `γ(N, l)`; at least one for every admissible spec.
pub fn gamma(n_total: usize, l: f64, spec: &MappingSpec) -> Result<f64> {
    if !(l >= 0.0) {
        return Err(ElError::Domain(format!("log-likelihood ratio must be nonnegative, got {l}")));
    }
    if n_total < 2 {
        return Err(ElError::Domain("N must be at least 2".into()));
    }
    let two_n = 2.0 * n_total as f64;
    Ok(match spec.order {
        MappingOrder::FirstOrder => 1.0 + l / two_n,
        MappingOrder::SecondOrder => 1.0 + spec.eta / two_n * l.powf(spec.delta),
    })
}

/// `min(m, n)^(-1/2)`, the default exponent of the second-order factor.
pub fn delta_default(m: usize, n: usize) -> f64 {
    (m.min(n) as f64).powf(-0.5)
}

/// `h(θ)`; `θ` must lie in the open domain of `l`.
pub fn forward_map(
    data: &TwoSampleData,
    theta: &[f64],
    spec: &MappingSpec,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    spec.validate()?;
    data.check_theta(theta)?;
    let l = oel_logratio(data, theta, opts);
    if !l.is_finite() {
        return Err(ElError::Domain("theta lies outside the open domain of the likelihood ratio".into()));
    }
    let g = gamma(data.total(), l, spec)?;
    let centre = data.mele();
    Ok(centre.iter().zip(theta).map(|(c, t)| c + g * (t - c)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseResult {
    pub theta_prime: Vec<f64>,
    /// Ray parameter: `θ' = θ̂ + s(θ − θ̂)`.
    pub s: f64,
    /// `l(θ')`. When `θ'` lies too close to the boundary for `l` to be
    /// evaluated, the value implied by the root equation `γ(N, l) = 1/s`.
    pub l_at_prime: f64,
    pub bracket_width: f64,
}

/// `h⁻¹(θ)` for any finite `θ`.
pub fn inverse_map(
    data: &TwoSampleData,
    theta: &[f64],
    spec: &MappingSpec,
    opts: &SolverOptions,
) -> Result<InverseResult> {
    spec.validate()?;
    data.check_theta(theta)?;
    let centre = data.mele();
    if theta == centre.as_slice() {
        return Ok(InverseResult { theta_prime: centre, s: 0.0, l_at_prime: 0.0, bracket_width: 0.0 });
    }
    let solver = OelSolver::new(data, opts.clone())?;
    let point = |s: f64| -> Vec<f64> { centre.iter().zip(theta).map(|(c, t)| c + s * (t - c)).collect() };
    let ray = solve_ray(data.total(), spec, |s, warm| match solver.solve_from(&point(s), warm) {
        Ok(sol) => (sol.log_ratio, Some(sol.state)),
        Err(_) => (f64::INFINITY, None),
    })?;
    Ok(InverseResult {
        theta_prime: point(ray.s),
        s: ray.s,
        l_at_prime: ray.l,
        bracket_width: ray.width,
    })
}

/// `l*(θ) = l(h⁻¹(θ))`.
pub fn eel_logratio(
    data: &TwoSampleData,
    theta: &[f64],
    spec: &MappingSpec,
    opts: &SolverOptions,
) -> Result<f64> {
    Ok(inverse_map(data, theta, spec, opts)?.l_at_prime)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RaySolution {
    pub s: f64,
    pub l: f64,
    pub width: f64,
}

/// Root of `g(s) = s·γ(N, l(s)) − 1` on `[0, 1)`.
///
/// `l_at(s, warm)` returns the likelihood ratio at ray parameter `s` (`+∞`
/// past the domain) and a warm start for later evaluations. The bracket is
/// grown as `0.9, 0.95, …` toward one and then bisected; the returned point
/// always has `g ≤ 0` so its likelihood ratio is finite.
pub(crate) fn solve_ray<F>(n_total: usize, spec: &MappingSpec, mut l_at: F) -> Result<RaySolution>
where
    F: FnMut(f64, Option<&DualState>) -> (f64, Option<DualState>),
{
    let g_of = |s: f64, l: f64| -> Result<f64> {
        if l.is_finite() {
            Ok(s * gamma(n_total, l, spec)? - 1.0)
        } else {
            Ok(f64::INFINITY)
        }
    };

    let (mut lo, mut lo_l, mut lo_warm) = (0.0_f64, 0.0_f64, None::<DualState>);
    let mut hi = 1.0_f64;
    let mut s = INITIAL_BRACKET;
    for _ in 0..MAX_BRACKET_STEPS {
        let (l, warm) = l_at(s, lo_warm.as_ref());
        let g = g_of(s, l)?;
        if g > 0.0 {
            hi = s;
            break;
        }
        (lo, lo_l, lo_warm) = (s, l, warm.or(lo_warm));
        if g.abs() <= ROOT_TOL {
            return Ok(RaySolution { s, l, width: 0.0 });
        }
        s = 0.5 * (1.0 + s);
    }

    while hi - lo > WIDTH_TOL {
        let mid = 0.5 * (lo + hi);
        let (l, warm) = l_at(mid, lo_warm.as_ref());
        let g = g_of(mid, l)?;
        if g > 0.0 {
            hi = mid;
        } else {
            (lo, lo_l, lo_warm) = (mid, l, warm.or(lo_warm));
            if g.abs() <= ROOT_TOL {
                break;
            }
        }
    }
    let g_lo = g_of(lo, lo_l)?;
    if g_lo.abs() > ROOT_TOL && lo > 0.0 && hi < 1.0 {
        // The bracket closed on a point where l could not be evaluated; the
        // root equation itself gives l at the root.
        lo_l = gamma_inverse(n_total, 1.0 / lo, spec).max(lo_l);
    }
    Ok(RaySolution { s: lo, l: lo_l, width: hi - lo })
}

/// Level `l` with `γ(N, l) = target`, for `target ≥ 1`.
fn gamma_inverse(n_total: usize, target: f64, spec: &MappingSpec) -> f64 {
    let excess = (target - 1.0).max(0.0) * 2.0 * n_total as f64;
    match spec.order {
        MappingOrder::FirstOrder => excess,
        MappingOrder::SecondOrder => (excess / spec.eta).powf(1.0 / spec.delta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        let first = MappingSpec::first_order();
        assert_eq!(gamma(40, 0.0, &first).unwrap(), 1.0);
        assert!((gamma(40, 4.0, &first).unwrap() - 1.05).abs() < 1e-15);
        let second = MappingSpec::second_order(2.0, 0.2236).unwrap();
        assert!((gamma(40, 1.0, &second).unwrap() - 1.025).abs() < 1e-15);
        assert!(gamma(40, -1.0, &first).is_err());
    }

    #[test]
    fn second_order_spec_validation() {
        assert!(MappingSpec::second_order(0.0, 0.2).is_err());
        assert!(MappingSpec::second_order(1.0, 0.0).is_err());
        assert!(MappingSpec::second_order(1.0, 1.5).is_err());
        assert!(MappingSpec::second_order(1.0, 1.0).is_ok());
    }

    #[test]
    fn delta_defaults() {
        assert!((delta_default(20, 20) - 0.223_606_797_749_979).abs() < 1e-15);
        assert!((delta_default(40, 10) - 10f64.powf(-0.5)).abs() < 1e-15);
        let seq: Vec<f64> = [10, 100, 10_000, 1_000_000].iter().map(|&k| delta_default(k, k)).collect();
        assert!(seq.windows(2).all(|w| w[1] < w[0]));
        assert!(seq[3] <= 1e-3);
    }

    #[test]
    fn constant_likelihood_ray() {
        let spec = MappingSpec::first_order();
        let ray = solve_ray(40, &spec, |_, _| (4.0, None)).unwrap();
        assert!((ray.s - 1.0 / 1.05).abs() <= 1e-10, "{}", ray.s);
        assert_eq!(ray.l, 4.0);
    }

    #[test]
    fn ray_treats_infinite_as_positive() {
        // Finite only below s = 0.5, where l grows without bound.
        let spec = MappingSpec::first_order();
        let ray = solve_ray(10, &spec, |s, _| {
            if s < 0.5 {
                (-20.0 * (1.0 - 2.0 * s).ln(), None)
            } else {
                (f64::INFINITY, None)
            }
        })
        .unwrap();
        let g = ray.s * (1.0 + ray.l / 20.0) - 1.0;
        assert!(g.abs() < 1e-9 && ray.s < 0.5);
    }

    #[test]
    fn unresolved_root_uses_root_equation() {
        // l is capped at 30 before the boundary at s = 0.5, so g never reaches zero.
        let spec = MappingSpec::first_order();
        let ray = solve_ray(10, &spec, |s, _| if s < 0.5 { (30.0 * s, None) } else { (f64::INFINITY, None) }).unwrap();
        assert!((ray.s - 0.5).abs() < 1e-11);
        assert!((ray.l - 20.0 * (1.0 / ray.s - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn centre_is_fixed() {
        let data = TwoSampleData::univariate(&[0.0, 1.0], &[2.0, 3.0]).unwrap();
        let opts = SolverOptions::default();
        let spec = MappingSpec::first_order();
        let inv = inverse_map(&data, &[2.0], &spec, &opts).unwrap();
        assert_eq!(inv.s, 0.0);
        assert_eq!(inv.theta_prime, vec![2.0]);
        assert_eq!(forward_map(&data, &[2.0], &spec, &opts).unwrap(), vec![2.0]);
        assert_eq!(eel_logratio(&data, &[2.0], &spec, &opts).unwrap(), 0.0);
    }

    #[test]
    fn forward_rejects_boundary() {
        let data = TwoSampleData::univariate(&[0.0, 1.0], &[2.0, 3.0]).unwrap();
        let err = forward_map(&data, &[3.0], &MappingSpec::first_order(), &SolverOptions::default());
        assert!(matches!(err, Err(ElError::Domain(_))));
    }

    #[test]
    fn far_points_have_finite_extension() {
        let data = TwoSampleData::univariate(&[0.0, 1.0, 0.4], &[2.0, 3.0, 2.2]).unwrap();
        let opts = SolverOptions::default();
        let spec = MappingSpec::first_order();
        let near = eel_logratio(&data, &[3.5], &spec, &opts).unwrap();
        let far = eel_logratio(&data, &[8.0], &spec, &opts).unwrap();
        assert!(near.is_finite() && far.is_finite());
        assert!(far > near);
    }
}
