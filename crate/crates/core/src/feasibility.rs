//! Membership of a candidate mean difference in the likelihood domain.
//!
//! A difference `θ` is attainable when `θ = Σ q_j Y_j − Σ p_i X_i` for some
//! probability vectors `p`, `q`. The slack is the largest achievable value of
//! `min(p_i, q_j)`: positive in the open interior, zero on the boundary and
//! negative outside.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::data::TwoSampleData;
use crate::error::{ElError, Result};

pub const DEFAULT_INTERIOR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityClass {
    Interior,
    Boundary,
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub class: FeasibilityClass,
    /// Maximal achievable minimum weight; `-inf` when even weights of `-1`
    /// cannot reach `θ`.
    pub slack: f64,
}

impl Feasibility {
    pub fn is_interior(&self) -> bool {
        self.class == FeasibilityClass::Interior
    }
}

/// Solves `max s` subject to `p_i ≥ s`, `q_j ≥ s`, `Σp = Σq = 1` and
/// `Σ q_j Y_j − Σ p_i X_i = θ`, then classifies `θ` from the optimal `s`.
pub fn classify_feasibility(data: &TwoSampleData, theta: &[f64], tol_interior: f64) -> Result<Feasibility> {
    data.check_theta(theta)?;
    let slack = max_min_weight(data, theta)?;
    let class = match slack {
        Some(s) if s > tol_interior => FeasibilityClass::Interior,
        Some(s) if s >= -tol_interior => FeasibilityClass::Boundary,
        _ => FeasibilityClass::Exterior,
    };
    Ok(Feasibility { class, slack: slack.unwrap_or(f64::NEG_INFINITY) })
}

/// The LP works on mean-centred samples scaled to unit size; weights are
/// written as `p_i = s + u_i` with `u_i ≥ 0`.
fn max_min_weight(data: &TwoSampleData, theta: &[f64]) -> Result<Option<f64>> {
    let (m, n, d) = (data.m(), data.n(), data.d());
    let scale = data.scale();
    let mele = data.mele();
    let target: Vec<f64> = theta.iter().zip(&mele).map(|(t, h)| (t - h) / scale).collect();

    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let s = lp.add_var(1.0, (-1.0, 1.0));
    let u: Vec<_> = (0..m).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let v: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();

    let mut row: Vec<_> = u.iter().map(|&var| (var, 1.0)).collect();
    row.push((s, m as f64));
    lp.add_constraint(&row, ComparisonOp::Eq, 1.0);

    let mut row: Vec<_> = v.iter().map(|&var| (var, 1.0)).collect();
    row.push((s, n as f64));
    lp.add_constraint(&row, ComparisonOp::Eq, 1.0);

    for k in 0..d {
        let mut row = Vec::with_capacity(m + n + 1);
        let mut s_coef = 0.0;
        for (j, &var) in v.iter().enumerate() {
            let c = data.yc.row(j)[k] / scale;
            row.push((var, c));
            s_coef += c;
        }
        for (i, &var) in u.iter().enumerate() {
            let c = data.xc.row(i)[k] / scale;
            row.push((var, -c));
            s_coef -= c;
        }
        row.push((s, s_coef));
        lp.add_constraint(&row, ComparisonOp::Eq, target[k]);
    }

    match lp.solve() {
        Ok(outcome) => match outcome.into_solution() {
            Ok(sol) => Ok(Some(sol.var_value(s))),
            Err(_) => Err(ElError::LinearProgram("solve interrupted without a solution".into())),
        },
        Err(microlp::Error::Infeasible) => Ok(None),
        Err(e) => Err(ElError::LinearProgram(e.to_string())),
    }
}
