//! Modified primal-dual hybrid gradient iteration for the discrete saddle
//! problem `inf_w sup_a L(w, a)`.
//!
//! Each iteration takes a gradient-ascent step in the controls, extrapolates
//! `a_bar = 2 a_new - a_old`, and applies the closed-form proximal step in
//! the price:
//!
//! ```text
//! a   <- a + (tau_a M N / T) grad_a L(w, a)
//! w_l <- (w_l + tau_w (mean_m a_bar[m][l] - Q_l)) / (1 + tau_w sigma)
//! ```
//!
//! With `sigma = 0` the price step is the plain proximal update.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{ControlMatrix, PriceVector, StateMatrix, SupplyVector};
use crate::error::{ensure_len, Error, Result};
use crate::grad::{agent_cost_gradient, grad_alpha, GradientBackend};
use crate::grid::TimeGrid;
use crate::objective::{agent_cost, lagrangian, rollout, Problem};
use crate::potential::CostModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Init {
    /// Standard-normal price then controls (row-major) from `ChaCha8Rng`.
    SeededNormal {
        seed: u64,
    },
    Zeros,
    Explicit {
        omega: Vec<f64>,
        alpha: Vec<Vec<f64>>,
    },
}

impl Default for Init {
    fn default() -> Self {
        Init::SeededNormal { seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tau_alpha: f64,
    pub tau_omega: f64,
    pub iterations: usize,
    /// Dual damping; 0 gives the undamped proximal price step.
    #[serde(default)]
    pub sigma: f64,
    /// Stop once the clearing residual sup-norm drops to this value; 0 disables.
    #[serde(default)]
    pub clearing_tol: f64,
    #[serde(default)]
    pub init: Init,
    #[serde(default)]
    pub backend: GradientBackend,
    /// Record the objective every this many iterations (and at the last one).
    #[serde(default = "one")]
    pub trace_every: usize,
}

fn one() -> usize {
    1
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau_alpha: 0.05,
            tau_omega: 0.5,
            iterations: 10_000,
            sigma: 0.0,
            clearing_tol: 0.0,
            init: Init::default(),
            backend: GradientBackend::Adjoint,
            trace_every: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("tau_alpha", self.tau_alpha)?;
        positive("tau_omega", self.tau_omega)?;
        if self.iterations == 0 {
            return Err(Error::InvalidParameter(
                "iterations must be at least 1".into(),
            ));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if !(self.clearing_tol.is_finite() && self.clearing_tol >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "clearing_tol must be >= 0, got {}",
                self.clearing_tol
            )));
        }
        if self.trace_every == 0 {
            return Err(Error::InvalidParameter(
                "trace_every must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn seed(&self) -> Option<u64> {
        match self.init {
            Init::SeededNormal { seed } => Some(seed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub omega: PriceVector,
    pub alpha: ControlMatrix,
    pub states: StateMatrix,
    pub clearing_residual_sup: f64,
    /// Lagrangian value at each recorded iteration.
    pub objective_trace: Vec<f64>,
    /// Iteration index (0-based) of each trace entry.
    pub trace_iterations: Vec<usize>,
    pub iterations_run: usize,
    pub config: SolverConfig,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearingResidual {
    /// `(1/M) sum_m alpha[m][l] - Q[l]`
    pub per_step: Vec<f64>,
    pub sup: f64,
}

pub fn clearing_residual(alpha: &ControlMatrix, supply: &SupplyVector) -> Result<ClearingResidual> {
    ensure_len("supply vector", alpha.steps(), supply.len())?;
    let per_step: Vec<f64> = alpha
        .column_means()
        .iter()
        .zip(supply.as_slice())
        .map(|(mean, q)| mean - q)
        .collect();
    let sup = per_step.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
    Ok(ClearingResidual { per_step, sup })
}

/// Closed-form proximal price step given the column means of the
/// extrapolated controls.
pub fn dual_update(
    omega: &mut [f64],
    bar_means: &[f64],
    supply: &[f64],
    tau_omega: f64,
    sigma: f64,
) {
    let denom = 1.0 + tau_omega * sigma;
    for ((w, mean), q) in omega.iter_mut().zip(bar_means).zip(supply) {
        *w = (*w + tau_omega * (mean - q)) / denom;
    }
}

fn initial_iterates(problem: &Problem, init: &Init) -> Result<(PriceVector, ControlMatrix)> {
    let (m, n) = (problem.agents(), problem.steps());
    match init {
        Init::Zeros => Ok((PriceVector::zeros(n), ControlMatrix::zeros(m, n))),
        Init::SeededNormal { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut draw = |k: usize| -> Vec<f64> {
                (0..k).map(|_| StandardNormal.sample(&mut rng)).collect()
            };
            let omega = PriceVector::new(draw(n))?;
            let alpha = ControlMatrix::from_vec(m, n, draw(m * n))?;
            Ok((omega, alpha))
        }
        Init::Explicit { omega, alpha } => {
            let omega = PriceVector::new(omega.clone())?;
            let alpha = ControlMatrix::from_rows(alpha)?;
            problem.check_price(&omega)?;
            problem.check_controls(&alpha)?;
            Ok((omega, alpha))
        }
    }
}

/// Runs the modified PDHG iteration for `cfg.iterations` steps (or until the
/// clearing residual reaches `cfg.clearing_tol`).
pub fn pdhg_solve(problem: &Problem, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let (m, n) = (problem.agents(), problem.steps());
    let (mut omega, mut alpha) = initial_iterates(problem, &cfg.init)?;
    let ascent = cfg.tau_alpha * m as f64 * n as f64 / problem.grid.horizon();
    let supply = problem.supply.as_slice();

    let mut trace = Vec::new();
    let mut trace_iterations = Vec::new();
    let mut next = ControlMatrix::zeros(m, n);
    let mut bar_sums = vec![0.0; n];
    let mut iterations_run = 0;

    for k in 0..cfg.iterations {
        let diverged = |e: Error| match e {
            Error::NonFinite { .. } => Error::Diverged { iteration: k },
            other => other,
        };
        let grad = grad_alpha(cfg.backend, problem, &omega, &alpha).map_err(diverged)?;

        bar_sums.iter_mut().for_each(|s| *s = 0.0);
        for row in 0..m {
            let old = alpha.row(row);
            let g = grad.row(row);
            let new = next.row_mut(row);
            for l in 0..n {
                new[l] = old[l] + ascent * g[l];
                bar_sums[l] += 2.0 * new[l] - old[l];
            }
        }
        bar_sums.iter_mut().for_each(|s| *s /= m as f64);
        dual_update(
            omega.as_mut_slice(),
            &bar_sums,
            supply,
            cfg.tau_omega,
            cfg.sigma,
        );
        std::mem::swap(&mut alpha, &mut next);
        iterations_run = k + 1;

        if alpha.as_slice().iter().any(|v| !v.is_finite())
            || omega.as_slice().iter().any(|v| !v.is_finite())
        {
            return Err(Error::Diverged { iteration: k });
        }

        let last = k + 1 == cfg.iterations;
        if k % cfg.trace_every == 0 || last {
            let value = lagrangian(problem, &omega, &alpha).map_err(diverged)?;
            trace.push(value.total);
            trace_iterations.push(k);
        }
        if cfg.clearing_tol > 0.0
            && clearing_residual(&alpha, &problem.supply)?.sup <= cfg.clearing_tol
        {
            if !last {
                let value = lagrangian(problem, &omega, &alpha).map_err(diverged)?;
                if trace_iterations.last() != Some(&k) {
                    trace.push(value.total);
                    trace_iterations.push(k);
                }
            }
            break;
        }
    }

    let states = rollout(&alpha, &problem.initial, &problem.grid)?;
    let clearing_residual_sup = clearing_residual(&alpha, &problem.supply)?.sup;
    Ok(SolveReport {
        omega,
        alpha,
        states,
        clearing_residual_sup,
        objective_trace: trace,
        trace_iterations,
        iterations_run,
        config: cfg.clone(),
        seed: cfg.seed(),
    })
}

/// Budget for the per-agent minimizations inside [`evaluate_i`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerSolveConfig {
    pub max_iterations: usize,
    /// Target sup-norm of the grid-weighted gradient `(1/dt) dphi/dalpha`.
    pub tolerance: f64,
    /// Descent step in the grid-weighted metric.
    pub step: f64,
}

impl Default for InnerSolveConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200_000,
            tolerance: 1e-8,
            step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentOptimum {
    pub controls: Vec<f64>,
    pub cost: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Minimizes one agent's discretized cost by gradient descent on the
/// discrete adjoint gradient, starting from `start`.
pub fn optimize_agent(
    cost: &CostModel,
    grid: &TimeGrid,
    x0: f64,
    omega: &[f64],
    start: &[f64],
    inner: &InnerSolveConfig,
    agent: usize,
) -> Result<AgentOptimum> {
    let dt = grid.dt();
    let mut controls = start.to_vec();
    let mut grad = vec![0.0; controls.len()];
    let mut grad_norm = f64::INFINITY;
    for it in 0..=inner.max_iterations {
        agent_cost_gradient(cost, dt, x0, &controls, omega, &mut grad);
        grad_norm = grad.iter().fold(0.0f64, |acc, g| acc.max((g / dt).abs()));
        if !grad_norm.is_finite() {
            break;
        }
        if grad_norm <= inner.tolerance {
            return Ok(AgentOptimum {
                cost: agent_cost(cost, grid, x0, &controls, omega),
                controls,
                grad_norm,
                iterations: it,
            });
        }
        if it == inner.max_iterations {
            break;
        }
        for (a, g) in controls.iter_mut().zip(&grad) {
            *a -= inner.step * g / dt;
        }
    }
    Err(Error::InnerSolve {
        agent,
        iterations: inner.max_iterations,
        best_value: agent_cost(cost, grid, x0, &controls, omega),
        grad_norm,
    })
}

/// `I[w] = dt sum_l w[l] Q[l] - (1/M) sum_m phi_w(x_m)` with each `phi_w(x_m)`
/// obtained by [`optimize_agent`] from a zero control.
pub fn evaluate_i(problem: &Problem, omega: &PriceVector, inner: &InnerSolveConfig) -> Result<f64> {
    problem.check_price(omega)?;
    let n = problem.steps();
    let zeros = vec![0.0; n];
    let mut total_cost = 0.0;
    for (m, &x0) in problem.initial.as_slice().iter().enumerate() {
        let opt = optimize_agent(
            &problem.cost,
            &problem.grid,
            x0,
            omega.as_slice(),
            &zeros,
            inner,
            m,
        )?;
        total_cost += opt.cost;
    }
    let supply_term = problem.grid.dt()
        * omega
            .as_slice()
            .iter()
            .zip(problem.supply.as_slice())
            .map(|(w, q)| w * q)
            .sum::<f64>();
    Ok(supply_term - total_cost / problem.agents() as f64)
}
