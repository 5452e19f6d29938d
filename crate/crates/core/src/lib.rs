//! Two-sample empirical likelihood for the difference of multivariate means.
//!
//! The crate provides the original log-likelihood ratio `l(θ)` ([`oel`]), its
//! extension to all of `ℝ^d` through the composite similarity mapping
//! ([`eel`]), a bootstrap estimate of the Bartlett constant ([`bartlett`]),
//! chi-square calibrated confidence sets ([`regions`]) and a Monte Carlo
//! coverage harness ([`simulate`]).

pub mod bartlett;
pub mod chisq;
pub mod cli;
pub mod data;
pub mod eel;
pub mod error;
pub mod feasibility;
pub mod oel;
pub mod regions;
pub mod simulate;

pub use data::{compute_diagnostics, DataDiagnostics, RowMatrix, TwoSampleData};
pub use eel::{eel_logratio, forward_map, gamma, inverse_map, InverseResult, MappingOrder, MappingSpec};
pub use error::{ElError, Result};
pub use feasibility::{classify_feasibility, Feasibility, FeasibilityClass};
pub use oel::{oel_logratio, solve_profile, DualState, ElSolution, OelSolver, SolverOptions};
pub use regions::{chisq_quantile, contains, method_statistic, Method, RegionResult};
