//! A small reverse-mode differentiation tape.
//!
//! Nodes are appended in evaluation order, so every node's inputs precede
//! it and a single reverse sweep accumulates all adjoints. Only the
//! operations the transcribed objective needs are supported; potentials
//! enter as single nodes carrying their analytic slope.

use crate::data::{ControlMatrix, PriceVector};
use crate::error::Result;
use crate::objective::Problem;
use crate::potential::{CostModel, Potential};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    Const,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Square(usize),
    /// `scale * x + shift`
    Affine {
        x: usize,
        scale: f64,
    },
    Sum {
        start: usize,
        len: usize,
    },
    Mean {
        start: usize,
        len: usize,
    },
    /// `p(x)` with the local derivative `p'(x)` recorded at evaluation time.
    Potential {
        x: usize,
        slope: f64,
    },
}

#[derive(Debug, Default)]
pub struct Tape {
    ops: Vec<Op>,
    values: Vec<f64>,
    /// Operand lists for the reductions.
    args: Vec<usize>,
    leaves: Vec<usize>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize) -> Self {
        Self {
            ops: Vec::with_capacity(nodes),
            values: Vec::with_capacity(nodes),
            args: Vec::new(),
            leaves: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn push(&mut self, op: Op, value: f64) -> Var {
        self.ops.push(op);
        self.values.push(value);
        Var(self.ops.len() - 1)
    }

    pub fn value(&self, v: Var) -> f64 {
        self.values[v.0]
    }

    /// A differentiable input. Gradients are reported in leaf creation order.
    pub fn leaf(&mut self, value: f64) -> Var {
        let v = self.push(Op::Leaf, value);
        self.leaves.push(v.0);
        v
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.push(Op::Const, value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.values[a.0] + self.values[b.0];
        self.push(Op::Add(a.0, b.0), value)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.values[a.0] - self.values[b.0];
        self.push(Op::Sub(a.0, b.0), value)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.values[a.0] * self.values[b.0];
        self.push(Op::Mul(a.0, b.0), value)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let x = self.values[a.0];
        self.push(Op::Square(a.0), x * x)
    }

    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let value = scale * self.values[a.0] + shift;
        self.push(Op::Affine { x: a.0, scale }, value)
    }

    pub fn sum(&mut self, terms: &[Var]) -> Var {
        let start = self.args.len();
        self.args.extend(terms.iter().map(|v| v.0));
        let value = terms.iter().map(|v| self.values[v.0]).sum();
        self.push(
            Op::Sum {
                start,
                len: terms.len(),
            },
            value,
        )
    }

    pub fn mean(&mut self, terms: &[Var]) -> Var {
        assert!(!terms.is_empty(), "mean of no terms");
        let start = self.args.len();
        self.args.extend(terms.iter().map(|v| v.0));
        let value = terms.iter().map(|v| self.values[v.0]).sum::<f64>() / terms.len() as f64;
        self.push(
            Op::Mean {
                start,
                len: terms.len(),
            },
            value,
        )
    }

    pub fn potential(&mut self, p: &Potential, a: Var) -> Var {
        let x = self.values[a.0];
        self.push(
            Op::Potential {
                x: a.0,
                slope: p.d1(x),
            },
            p.eval(x),
        )
    }

    /// Reverse sweep from `output` seeded with `seed`; returns the adjoint of
    /// every node.
    pub fn backward(&self, output: Var, seed: f64) -> Vec<f64> {
        let mut adj = vec![0.0; self.ops.len()];
        adj[output.0] = seed;
        for i in (0..=output.0).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            match self.ops[i] {
                Op::Leaf | Op::Const => {}
                Op::Add(a, b) => {
                    adj[a] += g;
                    adj[b] += g;
                }
                Op::Sub(a, b) => {
                    adj[a] += g;
                    adj[b] -= g;
                }
                Op::Mul(a, b) => {
                    adj[a] += g * self.values[b];
                    adj[b] += g * self.values[a];
                }
                Op::Square(a) => adj[a] += g * 2.0 * self.values[a],
                Op::Affine { x, scale } => adj[x] += g * scale,
                Op::Sum { start, len } => {
                    for &a in &self.args[start..start + len] {
                        adj[a] += g;
                    }
                }
                Op::Mean { start, len } => {
                    let share = g / len as f64;
                    for &a in &self.args[start..start + len] {
                        adj[a] += share;
                    }
                }
                Op::Potential { x, slope } => adj[x] += g * slope,
            }
        }
        adj
    }

    /// Gradient of `output` with respect to every leaf, in creation order.
    pub fn leaf_gradients(&self, output: Var, seed: f64) -> Vec<f64> {
        let adj = self.backward(output, seed);
        self.leaves.iter().map(|&i| adj[i]).collect()
    }
}

/// Records one agent's discretized individual cost with the controls as leaves.
pub fn record_agent_cost(
    tape: &mut Tape,
    cost: &CostModel,
    dt: f64,
    x0: f64,
    controls: &[f64],
    omega: &[f64],
) -> Var {
    let mut z = tape.constant(x0);
    let mut terms = Vec::with_capacity(controls.len());
    for (&a, &w) in controls.iter().zip(omega) {
        let a = tape.leaf(a);
        let sq = tape.square(a);
        let kinetic = tape.affine(sq, 0.5 * cost.c0, 0.0);
        let potential = tape.potential(&cost.running, z);
        let trade = tape.affine(a, w, 0.0);
        let lagr = tape.add(kinetic, potential);
        terms.push(tape.add(lagr, trade));
        let step = tape.affine(a, dt, 0.0);
        z = tape.add(z, step);
    }
    let sum = tape.sum(&terms);
    let running = tape.affine(sum, dt, 0.0);
    let terminal = tape.potential(&cost.terminal, z);
    tape.add(running, terminal)
}

/// Records the whole Lagrangian on one tape: supply term minus the mean of
/// the per-agent costs. Leaves are the controls in row-major order.
pub fn record_lagrangian(
    tape: &mut Tape,
    problem: &Problem,
    omega: &PriceVector,
    alpha: &ControlMatrix,
) -> Result<Var> {
    problem.check_price(omega)?;
    problem.check_controls(alpha)?;
    let dt = problem.grid.dt();
    let w = omega.as_slice();
    let costs: Vec<Var> = alpha
        .rows()
        .zip(problem.initial.as_slice())
        .map(|(row, &x0)| record_agent_cost(tape, &problem.cost, dt, x0, row, w))
        .collect();
    let products: Vec<Var> = w
        .iter()
        .zip(problem.supply.as_slice())
        .map(|(&w, &q)| {
            let wv = tape.constant(w);
            let qv = tape.constant(q);
            tape.mul(wv, qv)
        })
        .collect();
    let supply_sum = tape.sum(&products);
    let supply_term = tape.affine(supply_sum, dt, 0.0);
    let population = tape.mean(&costs);
    Ok(tape.sub(supply_term, population))
}
