//! Direct transcription of the price-formation saddle problem: forward-Euler
//! rollout and the discrete Lagrangian
//!
//! ```text
//! L(w, a) = dt sum_l w[l] Q[l]
//!         - (1/M) sum_m [ dt sum_l (c0 a[m][l]^2/2 + V(z[m][l]) + a[m][l] w[l]) + g(z[m][N]) ]
//! ```

use rayon::prelude::*;

use crate::data::{ControlMatrix, InitialStates, PriceVector, StateMatrix, SupplyVector};
use crate::error::{ensure_len, Error, Result};
use crate::grid::TimeGrid;
use crate::potential::CostModel;

/// Everything about an instance except the iterates.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: TimeGrid,
    pub cost: CostModel,
    pub initial: InitialStates,
    pub supply: SupplyVector,
}

impl Problem {
    pub fn new(
        grid: TimeGrid,
        cost: CostModel,
        initial: InitialStates,
        supply: SupplyVector,
    ) -> Result<Self> {
        cost.validate()?;
        ensure_len("supply vector", grid.steps(), supply.len())?;
        Ok(Self {
            grid,
            cost,
            initial,
            supply,
        })
    }

    pub fn agents(&self) -> usize {
        self.initial.len()
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub(crate) fn check_price(&self, omega: &PriceVector) -> Result<()> {
        ensure_len("price vector", self.steps(), omega.len())
    }

    pub(crate) fn check_controls(&self, alpha: &ControlMatrix) -> Result<()> {
        ensure_len("control matrix rows", self.agents(), alpha.agents())?;
        ensure_len("control matrix columns", self.steps(), alpha.steps())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    /// `supply_term - mean(per_agent_cost)`
    pub total: f64,
    /// Each agent's discretized individual cost.
    pub per_agent_cost: Vec<f64>,
    /// `dt sum_l w[l] Q[l]`
    pub supply_term: f64,
}

/// Forward-Euler states for one agent into `out` (length `N + 1`).
pub(crate) fn rollout_row(x0: f64, controls: &[f64], dt: f64, out: &mut [f64]) {
    out[0] = x0;
    for (l, a) in controls.iter().enumerate() {
        out[l + 1] = out[l] + dt * a;
    }
}

/// `z[m][0] = x_m`, `z[m][l+1] = z[m][l] + dt alpha[m][l]`.
pub fn rollout(
    alpha: &ControlMatrix,
    initial: &InitialStates,
    grid: &TimeGrid,
) -> Result<StateMatrix> {
    ensure_len("control matrix rows", initial.len(), alpha.agents())?;
    ensure_len("control matrix columns", grid.steps(), alpha.steps())?;
    let nodes = grid.steps() + 1;
    let dt = grid.dt();
    let mut data = vec![0.0; alpha.agents() * nodes];
    for ((out, row), &x0) in data
        .chunks_exact_mut(nodes)
        .zip(alpha.rows())
        .zip(initial.as_slice())
    {
        rollout_row(x0, row, dt, out);
    }
    Ok(StateMatrix::from_vec(alpha.agents(), nodes, data))
}

/// Individual cost of one agent starting at `x0` with control row `controls`.
pub fn agent_cost(
    cost: &CostModel,
    grid: &TimeGrid,
    x0: f64,
    controls: &[f64],
    omega: &[f64],
) -> f64 {
    let dt = grid.dt();
    let mut z = x0;
    let mut running = 0.0;
    for (&a, &w) in controls.iter().zip(omega) {
        running += cost.running_cost(z, a) + a * w;
        z += dt * a;
    }
    dt * running + cost.terminal.eval(z)
}

pub fn lagrangian(
    problem: &Problem,
    omega: &PriceVector,
    alpha: &ControlMatrix,
) -> Result<ObjectiveValue> {
    problem.check_price(omega)?;
    problem.check_controls(alpha)?;
    let w = omega.as_slice();
    let per_agent_cost: Vec<f64> = (0..problem.agents())
        .into_par_iter()
        .map(|m| {
            agent_cost(
                &problem.cost,
                &problem.grid,
                problem.initial.as_slice()[m],
                alpha.row(m),
                w,
            )
        })
        .collect();
    if let Some(index) = per_agent_cost.iter().position(|c| !c.is_finite()) {
        return Err(Error::NonFinite {
            what: "per-agent cost",
            index,
        });
    }
    let supply_term = problem.grid.dt()
        * w.iter()
            .zip(problem.supply.as_slice())
            .map(|(w, q)| w * q)
            .sum::<f64>();
    let mean_cost = per_agent_cost.iter().sum::<f64>() / per_agent_cost.len() as f64;
    let total = supply_term - mean_cost;
    if !total.is_finite() {
        return Err(Error::NonFinite {
            what: "objective total",
            index: 0,
        });
    }
    Ok(ObjectiveValue {
        total,
        per_agent_cost,
        supply_term,
    })
}

/// `dL/dw[l] = dt (Q[l] - (1/M) sum_m alpha[m][l])`; the Lagrangian is affine in the price.
pub fn grad_omega(problem: &Problem, alpha: &ControlMatrix) -> Result<Vec<f64>> {
    problem.check_controls(alpha)?;
    let dt = problem.grid.dt();
    Ok(alpha
        .column_means()
        .iter()
        .zip(problem.supply.as_slice())
        .map(|(mean, q)| dt * (q - mean))
        .collect())
}
