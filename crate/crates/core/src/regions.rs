//! Calibrated statistics, membership tests and confidence-set tracing.
//!
//! Every method's statistic is normalised so that it is compared against the
//! plain chi-square quantile: the Bartlett correction divides `l` by
//! `1 + η/N` instead of inflating the threshold.

use rayon::prelude::*;
use serde::Serialize;

pub use crate::chisq::chisq_quantile;
use crate::data::TwoSampleData;
use crate::eel::{eel_logratio, gamma, MappingSpec};
use crate::error::{ElError, Result};
use crate::oel::{oel_logratio, SolverOptions};

const MAX_DOUBLINGS: usize = 60;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Method {
    Oel,
    Eel1,
    Bel { eta: f64 },
    Eel2 { eta: f64, delta: f64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Oel => "oel",
            Method::Eel1 => "eel1",
            Method::Bel { .. } => "bel",
            Method::Eel2 { .. } => "eel2",
        }
    }

    pub fn eta(&self) -> Option<f64> {
        match *self {
            Method::Bel { eta } | Method::Eel2 { eta, .. } => Some(eta),
            _ => None,
        }
    }

    /// Extended methods use the similarity mapping and are finite everywhere.
    pub fn is_extended(&self) -> bool {
        matches!(self, Method::Eel1 | Method::Eel2 { .. })
    }

    fn mapping(&self) -> Result<Option<MappingSpec>> {
        match *self {
            Method::Oel => Ok(None),
            Method::Bel { eta } => {
                if !(eta >= 0.0 && eta.is_finite()) {
                    return Err(ElError::Domain(format!("Bartlett constant must be nonnegative, got {eta}")));
                }
                Ok(None)
            }
            Method::Eel1 => Ok(Some(MappingSpec::first_order())),
            Method::Eel2 { eta, delta } => MappingSpec::second_order(eta, delta).map(Some),
        }
    }

    fn bartlett_factor(&self, n_total: usize) -> f64 {
        match *self {
            Method::Bel { eta } => 1.0 + eta / n_total as f64,
            _ => 1.0,
        }
    }
}

/// The method's statistic at `θ`, to be compared against `c_α`.
pub fn method_statistic(data: &TwoSampleData, theta: &[f64], method: &Method, opts: &SolverOptions) -> Result<f64> {
    data.check_theta(theta)?;
    match method.mapping()? {
        Some(spec) => eel_logratio(data, theta, &spec, opts),
        None => Ok(oel_logratio(data, theta, opts) / method.bartlett_factor(data.total())),
    }
}

/// Whether `θ` lies in the `100(1−α)%` confidence set of `method`.
///
/// For the extended methods this uses `l*(θ) ≤ c ⟺ l(θ̂ + (θ − θ̂)/γ(N, c)) ≤ c`,
/// which holds because `l` increases strictly along rays from the MELE and
/// `γ` is nondecreasing; a single inner solve replaces the ray inversion.
pub fn contains(data: &TwoSampleData, theta: &[f64], alpha: f64, method: &Method, opts: &SolverOptions) -> Result<bool> {
    data.check_theta(theta)?;
    let c = threshold_for(data.d(), alpha)?;
    match method.mapping()? {
        Some(spec) => {
            let g = gamma(data.total(), c, &spec)?;
            let centre = data.mele();
            let shrunk: Vec<f64> = centre.iter().zip(theta).map(|(h, t)| h + (t - h) / g).collect();
            Ok(oel_logratio(data, &shrunk, opts) <= c)
        }
        None => Ok(oel_logratio(data, theta, opts) <= c * method.bartlett_factor(data.total())),
    }
}

fn threshold_for(d: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ElError::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    chisq_quantile(d, 1.0 - alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourPoint {
    pub phi: f64,
    pub r: f64,
    pub theta: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionResult {
    pub method: Method,
    pub alpha: Option<f64>,
    /// Level the normalised statistic is compared to.
    pub level: f64,
    /// Threshold on the raw `l` scale: `c_α(1 + η/N)` for the Bartlett method.
    pub threshold: f64,
    pub center: Vec<f64>,
    pub d1_interval: Option<(f64, f64)>,
    pub d2_polyline: Option<Vec<ContourPoint>>,
}

/// Two-sided interval `{θ : statistic(θ) ≤ c_α}` for univariate data.
pub fn interval_1d(data: &TwoSampleData, alpha: f64, method: &Method, opts: &SolverOptions) -> Result<RegionResult> {
    if data.d() != 1 {
        return Err(ElError::DimensionMismatch(format!("interval requires d = 1, data have d = {}", data.d())));
    }
    method.mapping()?;
    let level = threshold_for(1, alpha)?;
    let centre = data.mele()[0];
    let (x, y) = (data.x().as_slice(), data.y().as_slice());
    let (min_x, max_x) = min_max(x);
    let (min_y, max_y) = min_max(y);
    let tol = 1e-9 * (1.0 + centre.abs());

    let mut ends = [0.0; 2];
    for (slot, (dir, reach)) in [(-1.0, centre - (min_y - max_x)), (1.0, (max_y - min_x) - centre)].into_iter().enumerate() {
        let stat = |r: f64| method_statistic(data, &[centre + dir * r], method, opts);
        let r = radial_crossing(stat, level, reach, method.is_extended(), tol, None)?;
        ends[slot] = centre + dir * r;
    }
    Ok(RegionResult {
        method: *method,
        alpha: Some(alpha),
        level,
        threshold: level * method.bartlett_factor(data.total()),
        center: vec![centre],
        d1_interval: Some((ends[0], ends[1])),
        d2_polyline: None,
    })
}

/// Level set `{θ : statistic(θ) = level}` traced along `n_angles` uniform rays.
pub fn contour_2d(
    data: &TwoSampleData,
    level: f64,
    method: &Method,
    n_angles: usize,
    opts: &SolverOptions,
) -> Result<RegionResult> {
    if data.d() != 2 {
        return Err(ElError::DimensionMismatch(format!("contour requires d = 2, data have d = {}", data.d())));
    }
    if !(level > 0.0 && level.is_finite()) {
        return Err(ElError::Domain(format!("level must be positive, got {level}")));
    }
    if n_angles < 8 {
        return Err(ElError::Config(format!("at least 8 angles required, got {n_angles}")));
    }
    method.mapping()?;
    let centre = data.mele();
    // Any ray leaves the bounding box of the domain within its diagonal.
    let reach = {
        let mut sq = 0.0;
        for k in 0..2 {
            let col = |m: &crate::data::RowMatrix| m.iter_rows().map(|r| r[k]).collect::<Vec<_>>();
            let (min_x, max_x) = min_max(&col(data.x()));
            let (min_y, max_y) = min_max(&col(data.y()));
            sq += ((max_y - min_x) - (min_y - max_x)).powi(2);
        }
        1.01 * sq.sqrt()
    };
    let tol = 1e-12 * reach;

    let points: Result<Vec<ContourPoint>> = (0..n_angles)
        .into_par_iter()
        .map(|k| {
            let phi = std::f64::consts::TAU * k as f64 / n_angles as f64;
            let (sin, cos) = phi.sin_cos();
            let at = |r: f64| [centre[0] + r * cos, centre[1] + r * sin];
            let stat = |r: f64| method_statistic(data, &at(r), method, opts);
            let r = radial_crossing(stat, level, reach, method.is_extended(), tol, Some(k))?;
            Ok(ContourPoint { phi, r, theta: at(r) })
        })
        .collect();
    Ok(RegionResult {
        method: *method,
        alpha: None,
        level,
        threshold: level * method.bartlett_factor(data.total()),
        center: centre,
        d1_interval: None,
        d2_polyline: Some(points?),
    })
}

/// Radius where a ray statistic, nondecreasing from zero at `r = 0`, crosses
/// `level`. The initial upper bracket is `reach`; when `expand` is set it is
/// doubled until the statistic exceeds the level.
fn radial_crossing<F>(stat: F, level: f64, reach: f64, expand: bool, tol: f64, angle_index: Option<usize>) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut lo = 0.0;
    let mut hi = reach.max(tol);
    let mut doublings = 0;
    while stat(hi)? <= level {
        if !expand || doublings >= MAX_DOUBLINGS {
            return Err(ElError::BracketFailure { angle_index });
        }
        lo = hi;
        hi *= 2.0;
        doublings += 1;
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if stat(mid)? <= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}
