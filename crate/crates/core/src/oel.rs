//! The original two-sample empirical log-likelihood ratio.
//!
//! For a fixed difference `θ` the inner problem maximises
//! `Σ log(m p_i) + Σ log(n q_j)` over probability vectors with
//! `Σ q_j Y_j − Σ p_i X_i = θ`. It is solved through its convex dual in the
//! unknowns `(α, β, t)`:
//!
//! ```text
//! D(α, β, t) = −Σ log(α + tᵀX̃_i) − Σ log(β − tᵀỸ_j) + α + β − tᵀ(θ − θ̂) − N
//! ```
//!
//! on mean-centred samples, with `p_i = 1/(α + tᵀX̃_i)` and
//! `q_j = 1/(β − tᵀỸ_j)`. The gradient of `D` is exactly the primal residual
//! (normalisation of `p`, `q` and the mean-difference constraint), so a damped
//! Newton iteration on `D` drives those equations to zero. At the optimum the
//! multiplier of the `(λ, μ_x, μ_y)` parametrisation is `λ = −t/N` and
//!
//! ```text
//! l(θ) = 2 [ Σ log{1 − f_m λᵀ(X_i − μ_x)} + Σ log{1 + f_n λᵀ(Y_j − μ_y)} ].
//! ```

use nalgebra::{DMatrix, DVector};

use crate::data::{compute_diagnostics, TwoSampleData};
use crate::error::{ElError, Result};
use crate::feasibility::{classify_feasibility, DEFAULT_INTERIOR_TOL};

/// Smallest admissible normalised log argument during line search.
const MIN_LOG_ARG: f64 = 1e-12;
const MAX_HALVINGS: usize = 40;
/// Residual accepted once the Newton decrement is at rounding level.
const STALL_RESIDUAL: f64 = 1e-8;
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Max-norm tolerance on the (scaled) estimating equations.
    pub tol_residual: f64,
    pub max_newton_iters: usize,
    /// Budget of warm-started sub-solves along the segment from the MELE.
    pub max_continuation_steps: usize,
    /// Line-search contraction factor.
    pub step_shrink: f64,
    /// Once weak duality proves `l(θ)` exceeds this value the solve is
    /// abandoned and `θ` treated as outside the domain.
    pub divergence_bound: f64,
    /// Slack threshold separating interior from boundary points.
    pub tol_interior: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_residual: 1e-10,
            max_newton_iters: 50,
            max_continuation_steps: 64,
            step_shrink: 0.5,
            divergence_bound: 1e7,
            tol_interior: DEFAULT_INTERIOR_TOL,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol_residual > 0.0
            && self.max_newton_iters > 0
            && self.max_continuation_steps > 0
            && self.step_shrink > 0.0
            && self.step_shrink < 1.0
            && self.divergence_bound > 0.0
            && self.tol_interior > 0.0;
        if ok {
            Ok(())
        } else {
            Err(ElError::Config(format!("invalid solver options: {self:?}")))
        }
    }
}

/// Dual iterate; usable as a warm start for nearby differences.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub alpha: f64,
    pub beta: f64,
    pub tilt: Vec<f64>,
}

impl DualState {
    /// Uniform weights: the solution at the MELE.
    pub fn uniform(data: &TwoSampleData) -> Self {
        Self { alpha: data.m() as f64, beta: data.n() as f64, tilt: vec![0.0; data.d()] }
    }
}

/// Converged solution of the inner problem at one `θ`.
#[derive(Debug, Clone)]
pub struct ElSolution {
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu_x: Vec<f64>,
    pub mu_y: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub log_ratio: f64,
    /// Optimal dual objective; equals `Σ log p_i + Σ log q_j` at convergence.
    pub dual_value: f64,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
    pub state: DualState,
}

impl ElSolution {
    /// `−2[Σ log(m p_i) + Σ log(n q_j)]` evaluated from the stored weights.
    pub fn primal_log_ratio(&self) -> f64 {
        let m = self.p.len() as f64;
        let n = self.q.len() as f64;
        let sp: f64 = self.p.iter().map(|p| (m * p).ln()).sum();
        let sq: f64 = self.q.iter().map(|q| (n * q).ln()).sum();
        -2.0 * (sp + sq)
    }
}

/// Solves the inner problem; see [`OelSolver::solve`].
pub fn solve_profile(data: &TwoSampleData, theta: &[f64], opts: &SolverOptions) -> Result<ElSolution> {
    OelSolver::new(data, opts.clone())?.solve(theta)
}

/// `l(θ)`, with `+∞` for boundary and exterior points or when the solve fails.
pub fn oel_logratio(data: &TwoSampleData, theta: &[f64], opts: &SolverOptions) -> f64 {
    match OelSolver::new(data, opts.clone()) {
        Ok(solver) => solver.logratio(theta),
        Err(_) => f64::INFINITY,
    }
}

/// Reusable solver bound to one data set.
#[derive(Debug, Clone)]
pub struct OelSolver<'a> {
    data: &'a TwoSampleData,
    opts: SolverOptions,
}

struct NewtonRun {
    state: DualState,
    objective: f64,
    iterations: usize,
    residual: f64,
    status: NewtonStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NewtonStatus {
    Converged,
    Exhausted,
    /// Weak duality already puts `l` above the divergence bound.
    Diverged,
    Singular,
}

impl<'a> OelSolver<'a> {
    /// Fails with `RankDeficient` when either sample covariance is singular.
    pub fn new(data: &'a TwoSampleData, opts: SolverOptions) -> Result<Self> {
        opts.validate()?;
        if !compute_diagnostics(data).rank_ok {
            return Err(ElError::RankDeficient);
        }
        Ok(Self { data, opts })
    }

    pub fn data(&self) -> &TwoSampleData {
        self.data
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    pub fn logratio(&self, theta: &[f64]) -> f64 {
        self.solve(theta).map(|s| s.log_ratio).unwrap_or(f64::INFINITY)
    }

    /// Solves from uniform weights, falling back to continuation from the MELE
    /// when the direct damped Newton run does not converge at an interior point.
    pub fn solve(&self, theta: &[f64]) -> Result<ElSolution> {
        self.solve_from(theta, None)
    }

    pub fn solve_from(&self, theta: &[f64], warm: Option<&DualState>) -> Result<ElSolution> {
        let data = self.data;
        data.check_theta(theta)?;
        let target: Vec<f64> = theta.iter().zip(data.mele()).map(|(t, h)| t - h).collect();
        let start = match warm {
            Some(w) if w.tilt.len() == data.d() => w.clone(),
            _ => DualState::uniform(data),
        };
        let run = self.newton(&target, start);
        let run = match run.status {
            NewtonStatus::Converged => run,
            NewtonStatus::Diverged => return Err(not_converged(&run)),
            NewtonStatus::Singular | NewtonStatus::Exhausted => {
                let feas = classify_feasibility(data, theta, self.opts.tol_interior)?;
                if !feas.is_interior() {
                    return Err(not_converged(&run));
                }
                self.continuation(&target)?
            }
        };
        Ok(self.finish(theta, run))
    }

    fn continuation(&self, target: &[f64]) -> Result<NewtonRun> {
        let mut state = DualState::uniform(self.data);
        let mut t = 0.0_f64;
        let mut dt = 0.25_f64;
        let mut total_iters = 0;
        let mut last: Option<NewtonRun> = None;
        for _ in 0..self.opts.max_continuation_steps {
            let t_next = (t + dt).min(1.0);
            let partial: Vec<f64> = target.iter().map(|v| v * t_next).collect();
            let run = self.newton(&partial, state.clone());
            total_iters += run.iterations;
            match run.status {
                NewtonStatus::Converged => {
                    t = t_next;
                    state = run.state.clone();
                    if t >= 1.0 {
                        return Ok(NewtonRun { iterations: total_iters, ..run });
                    }
                    dt *= 2.0;
                }
                NewtonStatus::Diverged => return Err(not_converged(&run)),
                _ => dt *= 0.5,
            }
            last = Some(run);
        }
        Err(ElError::NotConverged {
            iterations: total_iters,
            residual: last.map(|r| r.residual).unwrap_or(f64::INFINITY),
        })
    }

    /// Damped Newton on the dual objective with step halving that keeps every
    /// log argument above `MIN_LOG_ARG`.
    fn newton(&self, target: &[f64], mut state: DualState) -> NewtonRun {
        let data = self.data;
        let d = data.d();
        let k = d + 2;
        let bound_offset = {
            let (m, n) = (data.m() as f64, data.n() as f64);
            m * m.ln() + n * n.ln()
        };
        let mut grad = DVector::zeros(k);
        let mut hess = DMatrix::zeros(k, k);

        let Some(mut objective) = self.objective(target, &state) else {
            return NewtonRun {
                state,
                objective: f64::NAN,
                iterations: 0,
                residual: f64::INFINITY,
                status: NewtonStatus::Exhausted,
            };
        };

        let mut iterations = 0;
        loop {
            self.derivatives(target, &state, &mut grad, &mut hess);
            let residual = self.scaled_residual(&grad);
            if residual <= self.opts.tol_residual {
                return NewtonRun { state, objective, iterations, residual, status: NewtonStatus::Converged };
            }
            if -2.0 * (objective + bound_offset) > self.opts.divergence_bound || self.separates(target, &state.tilt) {
                return NewtonRun { state, objective, iterations, residual, status: NewtonStatus::Diverged };
            }
            if iterations >= self.opts.max_newton_iters {
                return NewtonRun { state, objective, iterations, residual, status: NewtonStatus::Exhausted };
            }
            iterations += 1;

            let Some(chol) = hess.clone().cholesky() else {
                return NewtonRun { state, objective, iterations, residual, status: NewtonStatus::Singular };
            };
            let step = chol.solve(&(-&grad));
            let slope = grad.dot(&step);
            let tiny_decrement = -slope < 64.0 * f64::EPSILON * (1.0 + objective.abs());
            if tiny_decrement && residual <= STALL_RESIDUAL {
                return NewtonRun { state, objective, iterations, residual, status: NewtonStatus::Converged };
            }

            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let trial = DualState {
                    alpha: state.alpha + t * step[0],
                    beta: state.beta + t * step[1],
                    tilt: state.tilt.iter().enumerate().map(|(c, v)| v + t * step[2 + c]).collect(),
                };
                if let Some(obj) = self.objective(target, &trial) {
                    if obj <= objective + ARMIJO * t * slope || tiny_decrement {
                        accepted = Some((trial, obj));
                        break;
                    }
                }
                t *= self.opts.step_shrink;
            }
            match accepted {
                Some((trial, obj)) => {
                    state = trial;
                    objective = obj;
                }
                None => {
                    return NewtonRun { state, objective, iterations, residual, status: NewtonStatus::Exhausted };
                }
            }
        }
    }

    /// True when the tilt strictly separates the target from every attainable
    /// difference: `tᵀ(θ − θ̂) > max_j tᵀỸ_j − min_i tᵀX̃_i`.
    fn separates(&self, target: &[f64], tilt: &[f64]) -> bool {
        let norm = dot(tilt, tilt).sqrt();
        if norm == 0.0 {
            return false;
        }
        let max_y = self.data.yc.iter_rows().map(|r| dot(tilt, r)).fold(f64::NEG_INFINITY, f64::max);
        let min_x = self.data.xc.iter_rows().map(|r| dot(tilt, r)).fold(f64::INFINITY, f64::min);
        dot(tilt, target) - (max_y - min_x) > 1e-9 * norm * self.data.scale()
    }

    /// Dual objective, or `None` when a log argument leaves the admissible region.
    fn objective(&self, target: &[f64], state: &DualState) -> Option<f64> {
        let data = self.data;
        let (m, n) = (data.m() as f64, data.n() as f64);
        let mut acc = 0.0;
        for row in data.xc.iter_rows() {
            let a = state.alpha + dot(&state.tilt, row);
            if !(a > MIN_LOG_ARG * m) {
                return None;
            }
            acc -= a.ln();
        }
        for row in data.yc.iter_rows() {
            let b = state.beta - dot(&state.tilt, row);
            if !(b > MIN_LOG_ARG * n) {
                return None;
            }
            acc -= b.ln();
        }
        Some(acc + state.alpha + state.beta - dot(&state.tilt, target) - (m + n))
    }

    fn derivatives(&self, target: &[f64], state: &DualState, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) {
        let data = self.data;
        let d = data.d();
        grad.fill(0.0);
        hess.fill(0.0);
        grad[0] = 1.0;
        grad[1] = 1.0;
        for c in 0..d {
            grad[2 + c] = -target[c];
        }
        for row in data.xc.iter_rows() {
            let w = 1.0 / (state.alpha + dot(&state.tilt, row));
            let w2 = w * w;
            grad[0] -= w;
            hess[(0, 0)] += w2;
            for a in 0..d {
                grad[2 + a] -= w * row[a];
                hess[(0, 2 + a)] += w2 * row[a];
                for b in 0..=a {
                    hess[(2 + a, 2 + b)] += w2 * row[a] * row[b];
                }
            }
        }
        for row in data.yc.iter_rows() {
            let w = 1.0 / (state.beta - dot(&state.tilt, row));
            let w2 = w * w;
            grad[1] -= w;
            hess[(1, 1)] += w2;
            for a in 0..d {
                grad[2 + a] += w * row[a];
                hess[(1, 2 + a)] -= w2 * row[a];
                for b in 0..=a {
                    hess[(2 + a, 2 + b)] += w2 * row[a] * row[b];
                }
            }
        }
        for a in 0..d + 2 {
            for b in 0..a {
                if a >= 2 && b >= 2 {
                    hess[(b, a)] = hess[(a, b)];
                } else {
                    hess[(a, b)] = hess[(b, a)];
                }
            }
        }
    }

    fn scaled_residual(&self, grad: &DVector<f64>) -> f64 {
        let scale = self.data.scale();
        let mut r = grad[0].abs().max(grad[1].abs());
        for v in grad.iter().skip(2) {
            r = r.max(v.abs() / scale);
        }
        r
    }

    /// Maps the dual optimum back to `(λ, μ_x, μ_y, p, q)` and evaluates the
    /// log-ratio and estimating-equation residuals.
    fn finish(&self, theta: &[f64], run: NewtonRun) -> ElSolution {
        let data = self.data;
        let d = data.d();
        let (m, n) = (data.m() as f64, data.n() as f64);
        let total = data.total() as f64;
        let state = &run.state;

        let mut mux_c = vec![0.0; d];
        let mut sum_p = 0.0;
        for row in data.xc.iter_rows() {
            let w = 1.0 / (state.alpha + dot(&state.tilt, row));
            sum_p += w;
            for c in 0..d {
                mux_c[c] += w * row[c];
            }
        }
        let mut muy_c = vec![0.0; d];
        let mut sum_q = 0.0;
        for row in data.yc.iter_rows() {
            let w = 1.0 / (state.beta - dot(&state.tilt, row));
            sum_q += w;
            for c in 0..d {
                muy_c[c] += w * row[c];
            }
        }
        mux_c.iter_mut().for_each(|v| *v /= sum_p);
        muy_c.iter_mut().for_each(|v| *v /= sum_q);

        let lambda: Vec<f64> = state.tilt.iter().map(|t| -t / total).collect();
        let (f_m, f_n) = (data.f_m(), data.f_n());

        let mut r1 = vec![0.0; d];
        let mut r2 = vec![0.0; d];
        let mut r3: Vec<f64> = vec![0.0; d];
        let mut dev = vec![0.0; d];

        let p: Vec<f64> = data
            .xc
            .iter_rows()
            .map(|row| {
                for c in 0..d {
                    dev[c] = row[c] - mux_c[c];
                }
                let u = 1.0 - f_m * dot(&lambda, &dev);
                let p = 1.0 / (m * u);
                for c in 0..d {
                    r1[c] += dev[c] / u;
                    r3[c] -= p * row[c];
                }
                p
            })
            .collect();
        let q: Vec<f64> = data
            .yc
            .iter_rows()
            .map(|row| {
                for c in 0..d {
                    dev[c] = row[c] - muy_c[c];
                }
                let v = 1.0 + f_n * dot(&lambda, &dev);
                let q = 1.0 / (n * v);
                for c in 0..d {
                    r2[c] += dev[c] / v;
                    r3[c] += q * row[c];
                }
                q
            })
            .collect();

        let mele = data.mele();
        let scale = data.scale();
        let sp: f64 = p.iter().sum();
        let sq: f64 = q.iter().sum();
        let mut residual_norm = (sp - 1.0).abs().max((sq - 1.0).abs());
        for c in 0..d {
            // Centred sums: Σ q Ỹ − Σ p X̃ targets θ − θ̂.
            r3[c] -= theta[c] - mele[c];
            residual_norm = residual_norm
                .max((r1[c] / m).abs() / scale)
                .max((r2[c] / n).abs() / scale)
                .max(r3[c].abs() / scale);
        }

        let mu_x: Vec<f64> = data.mean_x().iter().zip(&mux_c).map(|(a, b)| a + b).collect();
        let mu_y: Vec<f64> = data.mean_y().iter().zip(&muy_c).map(|(a, b)| a + b).collect();

        ElSolution {
            theta: theta.to_vec(),
            lambda,
            mu_x,
            mu_y,
            p,
            q,
            log_ratio: (-2.0 * (run.objective + m * m.ln() + n * n.ln())).max(0.0),
            dual_value: run.objective,
            iterations: run.iterations,
            residual_norm,
            converged: true,
            state: run.state,
        }
    }
}

fn not_converged(run: &NewtonRun) -> ElError {
    ElError::NotConverged { iterations: run.iterations, residual: run.residual }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
