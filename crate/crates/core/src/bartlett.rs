//! Bootstrap estimate of the Bartlett constant.
//!
//! Under Bartlett correctability `E[l(θ₀)] = d(1 + η/N) + O(N⁻²)`. Resampling
//! each sample with replacement and evaluating `l` at the original MELE (the
//! true difference of the resampling distribution) gives
//! `η̂ = N (mean l* / d − 1)`.

use rand::Rng;
use rayon::prelude::*;

use crate::data::{compute_diagnostics, TwoSampleData};
use crate::error::{ElError, Result};
use crate::oel::{OelSolver, SolverOptions};
use crate::simulate::substream;

pub const MIN_REPLICATES: usize = 100;
/// Estimates at or below zero are replaced by this value.
pub const ETA_FLOOR: f64 = 1e-6;
const MAX_DISCARD_FRACTION: f64 = 0.2;
const BOOTSTRAP_TAG: u64 = 0xB007;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BartlettEstimate {
    pub eta: f64,
    pub raw_eta: f64,
    pub replicates: usize,
    pub discarded: usize,
    /// True when the raw estimate was not positive and `eta` was floored.
    pub clamped: bool,
}

pub fn estimate_bartlett_bootstrap(
    data: &TwoSampleData,
    replicates: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<BartlettEstimate> {
    if replicates < MIN_REPLICATES {
        return Err(ElError::Config(format!(
            "bootstrap needs at least {MIN_REPLICATES} replicates, got {replicates}"
        )));
    }
    if !compute_diagnostics(data).rank_ok {
        return Err(ElError::RankDeficient);
    }
    opts.validate()?;
    let theta_hat = data.mele();
    let (m, n) = (data.m(), data.n());

    let values: Vec<Option<f64>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, &[BOOTSTRAP_TAG, b as u64]);
            let ix: Vec<usize> = (0..m).map(|_| rng.random_range(0..m)).collect();
            let iy: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let boot = TwoSampleData::new(data.x().select_rows(&ix), data.y().select_rows(&iy)).ok()?;
            let solver = OelSolver::new(&boot, opts.clone()).ok()?;
            solver.solve(&theta_hat).ok().map(|s| s.log_ratio)
        })
        .collect();

    let kept: Vec<f64> = values.into_iter().flatten().collect();
    let discarded = replicates - kept.len();
    if discarded as f64 > MAX_DISCARD_FRACTION * replicates as f64 {
        return Err(ElError::TooFewReplicates { failed: discarded, total: replicates });
    }
    let mean = kept.iter().sum::<f64>() / kept.len() as f64;
    let raw_eta = data.total() as f64 * (mean / data.d() as f64 - 1.0);
    let clamped = !(raw_eta > 0.0);
    if clamped {
        log::warn!("bootstrap Bartlett estimate {raw_eta:.4} is not positive; using {ETA_FLOOR}");
    }
    Ok(BartlettEstimate {
        eta: if clamped { ETA_FLOOR } else { raw_eta },
        raw_eta,
        replicates,
        discarded,
        clamped,
    })
}
