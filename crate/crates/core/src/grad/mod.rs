//! Gradient of the transcribed Lagrangian with respect to the controls.
//!
//! Three interchangeable backends: a reverse-mode tape, the hand-derived
//! discrete adjoint recursion, and central finite differences. Each agent's
//! row is independent, so rows are filled in parallel; no cross-row
//! reduction happens here, which keeps results identical for any thread
//! count.

pub mod tape;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ControlMatrix, PriceVector};
use crate::error::{Error, Result};
use crate::objective::{agent_cost, Problem};
use crate::potential::CostModel;

pub use tape::{record_agent_cost, record_lagrangian, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GradientBackend {
    Tape,
    #[default]
    Adjoint,
    /// Central differences with step `step * (1 + |alpha[m][l]|)`.
    FiniteDifference {
        step: f64,
    },
}

/// `dL/dalpha[m][l]` as an `M x N` matrix.
pub fn grad_alpha(
    backend: GradientBackend,
    problem: &Problem,
    omega: &PriceVector,
    alpha: &ControlMatrix,
) -> Result<ControlMatrix> {
    problem.check_price(omega)?;
    problem.check_controls(alpha)?;
    if let GradientBackend::FiniteDifference { step } = backend {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "finite-difference step must be positive, got {step}"
            )));
        }
    }
    let (agents, steps) = (alpha.agents(), alpha.steps());
    let scale = -1.0 / agents as f64;
    let dt = problem.grid.dt();
    let w = omega.as_slice();
    let x = problem.initial.as_slice();
    let mut grad = ControlMatrix::zeros(agents, steps);
    grad.as_mut_slice()
        .par_chunks_mut(steps.max(1))
        .enumerate()
        .try_for_each(|(m, out)| -> Result<()> {
            let row = alpha.row(m);
            match backend {
                GradientBackend::Adjoint => {
                    adjoint_row(&problem.cost, dt, x[m], row, w, scale, out)
                }
                GradientBackend::Tape => {
                    let mut t = Tape::with_capacity(8 * steps + 4);
                    let cost = record_agent_cost(&mut t, &problem.cost, dt, x[m], row, w);
                    out.copy_from_slice(&t.leaf_gradients(cost, scale));
                }
                GradientBackend::FiniteDifference { step } => {
                    fd_row(problem, m, row, w, step, scale, out)?
                }
            }
            Ok(())
        })?;
    if let Some(index) = grad.as_slice().iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            what: "gradient",
            index,
        });
    }
    Ok(grad)
}

/// Discrete adjoint for one agent. With `p[l] = dt sum_{j>l} V'(z[j]) + g'(z[N])`
/// running backwards from `p[N-1] = g'(z[N])`,
///
/// `dL/dalpha[l] = -(1/M) dt (c0 alpha[l] + omega[l] + p[l])`.
pub(crate) fn adjoint_row(
    cost: &CostModel,
    dt: f64,
    x0: f64,
    controls: &[f64],
    omega: &[f64],
    scale: f64,
    out: &mut [f64],
) {
    let n = controls.len();
    let mut z = Vec::with_capacity(n + 1);
    z.push(x0);
    for (l, a) in controls.iter().enumerate() {
        z.push(z[l] + dt * a);
    }
    let mut costate = cost.terminal.d1(z[n]);
    for l in (0..n).rev() {
        out[l] = scale * dt * (cost.c0 * controls[l] + omega[l] + costate);
        costate += dt * cost.running.d1(z[l]);
    }
}

/// Per-agent gradient of the individual cost (not of the Lagrangian).
pub fn agent_cost_gradient(
    cost: &CostModel,
    dt: f64,
    x0: f64,
    controls: &[f64],
    omega: &[f64],
    out: &mut [f64],
) {
    adjoint_row(cost, dt, x0, controls, omega, 1.0, out)
}

fn fd_row(
    problem: &Problem,
    m: usize,
    row: &[f64],
    omega: &[f64],
    step: f64,
    scale: f64,
    out: &mut [f64],
) -> Result<()> {
    let x0 = problem.initial.as_slice()[m];
    let mut probe = row.to_vec();
    for (l, slot) in out.iter_mut().enumerate() {
        let h = step * (1.0 + row[l].abs());
        let (up, down) = (row[l] + h, row[l] - h);
        if up == row[l] || down == row[l] {
            return Err(Error::StepUnderflow { agent: m, step: l });
        }
        probe[l] = up;
        let c_up = agent_cost(&problem.cost, &problem.grid, x0, &probe, omega);
        probe[l] = down;
        let c_down = agent_cost(&problem.cost, &problem.grid, x0, &probe, omega);
        probe[l] = row[l];
        *slot = scale * (c_up - c_down) / (up - down);
    }
    Ok(())
}
