//! Closed-form equilibrium for linear-quadratic costs
//! `V(z) = (r1/2)(z - y1)^2`, `g(z) = (r2/2)(z - y2)^2`.
//!
//! Price:
//! ```text
//! w*(t) = r2(y2 - xbar) + r1(T - t)(y1 - xbar) - c0 Q(t)
//!       + int_0^T [-(r2 + r1 T) + r1 max(s, t)] Q(s) ds
//! ```
//! Trajectories, with `k = sqrt(r1/c0)` and
//! `B = r2(y2 - y1) + int_0^T w(s) [(r2/c0) cosh k(T-s) + k sinh k(T-s)] ds`:
//! ```text
//! k = 0:  z(t) = x + t (B - r2(x - y1)) / (c0 + r2 T) - (1/c0) int_0^t w
//! k > 0:  z(t) = y1 + (x - y1) cosh kt
//!              + sinh kt (B - (x - y1)(c0 k sinh kT + r2 cosh kT)) / (c0 k cosh kT + r2 sinh kT)
//!              - (1/c0) int_0^t w(s) cosh k(t - s) ds
//! ```
//! Integrals are evaluated on the solver's own grid. [`Quadrature::LeftEndpoint`]
//! is the rectangle rule the forward-Euler transcription implies, and makes the
//! oracle coincide with the discrete equilibrium whenever `r1 = 0`.

use serde::{Deserialize, Serialize};

use crate::data::{InitialStates, PriceVector, SupplyVector};
use crate::error::{ensure_len, Error, Result};
use crate::grid::TimeGrid;
use crate::potential::{CostModel, Potential};

/// Largest `k T` accepted before cosh/sinh are considered unsafe.
pub const MAX_KT: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// `dt sum_{l<N} f(t_l)`
    #[default]
    LeftEndpoint,
    /// Trapezoid over `t_0..t_N`, the grid function extended to `t_N` by its
    /// last value.
    Trapezoid,
}

impl Quadrature {
    /// Nodes, weights and sampled values on `[0, T]` for a left-endpoint grid function.
    fn rule(&self, values: &[f64], grid: &TimeGrid) -> Vec<(f64, f64, f64)> {
        let n = grid.steps();
        let dt = grid.dt();
        match self {
            Quadrature::LeftEndpoint => (0..n).map(|l| (grid.time(l), dt, values[l])).collect(),
            Quadrature::Trapezoid => (0..=n)
                .map(|l| {
                    let w = if l == 0 || l == n { 0.5 * dt } else { dt };
                    (grid.time(l), w, values[l.min(n - 1)])
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LQParams {
    pub c0: f64,
    pub r1: f64,
    pub r2: f64,
    pub y1: f64,
    pub y2: f64,
}

impl LQParams {
    pub fn new(c0: f64, r1: f64, r2: f64, y1: f64, y2: f64) -> Result<Self> {
        let p = Self { c0, r1, r2, y1, y2 };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.c0.is_finite() && self.c0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "c0 must be positive, got {}",
                self.c0
            )));
        }
        if !(self.r1.is_finite() && self.r1 >= 0.0 && self.r2.is_finite() && self.r2 >= 0.0) {
            return Err(Error::InvalidParameter(
                "r1, r2 must be finite and >= 0".into(),
            ));
        }
        if !(self.y1.is_finite() && self.y2.is_finite()) {
            return Err(Error::InvalidParameter("y1, y2 must be finite".into()));
        }
        Ok(())
    }

    /// Reads `(r1, y1)` from the running potential and `(r2, y2)` from the
    /// terminal one; `Zero` maps to weight 0.
    pub fn from_cost(cost: &CostModel) -> Result<Self> {
        let split = |p: &Potential, which: &'static str| match *p {
            Potential::Zero => Ok((0.0, 0.0)),
            Potential::Quadratic { r, y } => Ok((r, y)),
            Potential::DoubleWell { .. } => Err(Error::NotLinearQuadratic(which)),
        };
        let (r1, y1) = split(&cost.running, "running cost is a double well")?;
        let (r2, y2) = split(&cost.terminal, "terminal cost is a double well")?;
        Self::new(cost.c0, r1, r2, y1, y2)
    }

    pub fn to_cost(&self) -> CostModel {
        let pot = |r: f64, y: f64| {
            if r == 0.0 {
                Potential::Zero
            } else {
                Potential::Quadratic { r, y }
            }
        };
        CostModel {
            c0: self.c0,
            running: pot(self.r1, self.y1),
            terminal: pot(self.r2, self.y2),
        }
    }

    pub fn k(&self) -> f64 {
        (self.r1 / self.c0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LQConstants {
    /// Empirical mean of the initial states.
    pub x_bar0: f64,
    pub k: f64,
    pub b: f64,
}

/// Smooth part `w* + c0 Q`, continuously differentiable for any square-integrable `Q`.
pub fn analytic_price_regular_part(
    p: &LQParams,
    initial: &InitialStates,
    supply: &SupplyVector,
    grid: &TimeGrid,
    rule: Quadrature,
) -> Result<Vec<f64>> {
    ensure_len("supply vector", grid.steps(), supply.len())?;
    let xbar = initial.mean();
    let t_end = grid.horizon();
    let nodes = rule.rule(supply.as_slice(), grid);
    let total: f64 = nodes.iter().map(|&(_, w, q)| w * q).sum();

    // sum_i w_i max(s_i, t) q_i = t * sum_{s_i <= t} w_i q_i + sum_{s_i > t} w_i s_i q_i
    let mut suffix = vec![0.0; nodes.len() + 1];
    for i in (0..nodes.len()).rev() {
        let (s, w, q) = nodes[i];
        suffix[i] = suffix[i + 1] + w * s * q;
    }
    let mut prefix = 0.0;
    let mut out = Vec::with_capacity(grid.steps());
    for l in 0..grid.steps() {
        let t = grid.time(l);
        let (_, w, q) = nodes[l];
        prefix += w * q;
        let max_term = t * prefix + suffix[l + 1];
        out.push(
            p.r2 * (p.y2 - xbar) + p.r1 * (t_end - t) * (p.y1 - xbar)
                - (p.r2 + p.r1 * t_end) * total
                + p.r1 * max_term,
        );
    }
    Ok(out)
}

/// Equilibrium price sampled at the left endpoints.
pub fn analytic_price(
    p: &LQParams,
    initial: &InitialStates,
    supply: &SupplyVector,
    grid: &TimeGrid,
    rule: Quadrature,
) -> Result<PriceVector> {
    let smooth = analytic_price_regular_part(p, initial, supply, grid, rule)?;
    PriceVector::new(
        smooth
            .iter()
            .zip(supply.as_slice())
            .map(|(s, q)| s - p.c0 * q)
            .collect(),
    )
}

pub fn lq_constants(
    p: &LQParams,
    initial: &InitialStates,
    omega: &PriceVector,
    grid: &TimeGrid,
    rule: Quadrature,
) -> Result<LQConstants> {
    ensure_len("price vector", grid.steps(), omega.len())?;
    let k = p.k();
    let t_end = grid.horizon();
    if k * t_end > MAX_KT {
        return Err(Error::HyperbolicRange(k * t_end));
    }
    let integral: f64 = rule
        .rule(omega.as_slice(), grid)
        .iter()
        .map(|&(s, w, v)| {
            let tau = k * (t_end - s);
            w * v * (p.r2 / p.c0 * tau.cosh() + k * tau.sinh())
        })
        .sum();
    Ok(LQConstants {
        x_bar0: initial.mean(),
        k,
        b: p.r2 * (p.y2 - p.y1) + integral,
    })
}

/// Optimal trajectories for a fixed price; the price forcing term
/// `int_0^{t_l} w(s) cosh k(t_l - s) ds` is shared by every starting point.
#[derive(Debug, Clone)]
pub struct AnalyticTrajectories {
    params: LQParams,
    consts: LQConstants,
    grid: TimeGrid,
    forcing: Vec<f64>,
}

impl AnalyticTrajectories {
    pub fn new(
        p: &LQParams,
        consts: &LQConstants,
        omega: &PriceVector,
        grid: &TimeGrid,
        rule: Quadrature,
    ) -> Result<Self> {
        ensure_len("price vector", grid.steps(), omega.len())?;
        let k = consts.k;
        if k * grid.horizon() > MAX_KT {
            return Err(Error::HyperbolicRange(k * grid.horizon()));
        }
        let n = grid.steps();
        let dt = grid.dt();
        let w = omega.as_slice();
        // direct sums; cosh(a - b) = cosh a cosh b - sinh a sinh b cancels badly for large k
        let forcing = (0..=n)
            .map(|l| {
                let t = grid.time(l);
                let f = |i: usize| w[i.min(n - 1)] * (k * (t - grid.time(i))).cosh();
                match rule {
                    Quadrature::LeftEndpoint => dt * (0..l).map(f).sum::<f64>(),
                    Quadrature::Trapezoid if l == 0 => 0.0,
                    Quadrature::Trapezoid => {
                        dt * ((0..=l).map(f).sum::<f64>() - 0.5 * (f(0) + f(l)))
                    }
                }
            })
            .collect();
        Ok(Self {
            params: *p,
            consts: *consts,
            grid: *grid,
            forcing,
        })
    }

    /// `z(t_l, x0)` for `l = 0..=N`.
    pub fn trajectory(&self, x0: f64) -> Vec<f64> {
        let p = &self.params;
        let LQConstants { k, b, .. } = self.consts;
        let t_end = self.grid.horizon();
        (0..=self.grid.steps())
            .map(|l| {
                let t = self.grid.time(l);
                let forced = self.forcing[l] / p.c0;
                if k == 0.0 {
                    x0 + t * (b - p.r2 * (x0 - p.y1)) / (p.c0 + p.r2 * t_end) - forced
                } else {
                    let (ch_t, sh_t) = ((k * t).cosh(), (k * t).sinh());
                    let (ch_end, sh_end) = ((k * t_end).cosh(), (k * t_end).sinh());
                    let d = x0 - p.y1;
                    let coef = (b - d * (p.c0 * k * sh_end + p.r2 * ch_end))
                        / (p.c0 * k * ch_end + p.r2 * sh_end);
                    p.y1 + d * ch_t + coef * sh_t - forced
                }
            })
            .collect()
    }
}

/// Optimal trajectory `z(t_l, x0)`, `l = 0..=N`, under price `omega`.
pub fn analytic_trajectory(
    p: &LQParams,
    consts: &LQConstants,
    omega: &PriceVector,
    x0: f64,
    grid: &TimeGrid,
    rule: Quadrature,
) -> Result<Vec<f64>> {
    Ok(AnalyticTrajectories::new(p, consts, omega, grid, rule)?.trajectory(x0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    fn xs(mean: f64) -> InitialStates {
        InitialStates::explicit(vec![mean - 0.25, mean, mean + 0.25]).unwrap()
    }

    #[test]
    fn terminal_only_price_is_constant() {
        let p = LQParams::new(1.0, 0.0, 10.0, 0.0, 0.0).unwrap();
        let g = grid(50);
        for rule in [Quadrature::LeftEndpoint, Quadrature::Trapezoid] {
            let w = analytic_price(&p, &xs(0.5), &SupplyVector::zeros(50), &g, rule).unwrap();
            assert!(w.as_slice().iter().all(|&v| v == -5.0));
        }
    }

    #[test]
    fn running_only_price_is_linear() {
        let p = LQParams::new(1.0, 10.0, 0.0, 1.0, 0.0).unwrap();
        let g = grid(20);
        let w = analytic_price(
            &p,
            &xs(0.0),
            &SupplyVector::zeros(20),
            &g,
            Quadrature::LeftEndpoint,
        )
        .unwrap();
        for (l, v) in w.as_slice().iter().enumerate() {
            assert!((v - 10.0 * (1.0 - g.time(l))).abs() < 1e-14);
        }
    }

    #[test]
    fn price_matches_quadratic_sum() {
        // O(N) prefix/suffix evaluation against the direct double sum
        let p = LQParams::new(1.5, 3.0, 2.0, 0.2, -0.4).unwrap();
        let g = grid(37);
        let q: Vec<f64> = (0..37)
            .map(|l| (l as f64 * 0.3).cos() + 0.1 * l as f64)
            .collect();
        let supply = SupplyVector::new(q.clone()).unwrap();
        let x = xs(0.3);
        for rule in [Quadrature::LeftEndpoint, Quadrature::Trapezoid] {
            let fast = analytic_price(&p, &x, &supply, &g, rule).unwrap();
            let nodes = rule.rule(&q, &g);
            for l in 0..37 {
                let t = g.time(l);
                let integral: f64 = nodes
                    .iter()
                    .map(|&(s, w, v)| w * (-(p.r2 + p.r1) + p.r1 * s.max(t)) * v)
                    .sum();
                let direct =
                    p.r2 * (p.y2 - 0.3) + p.r1 * (1.0 - t) * (p.y1 - 0.3) - p.c0 * q[l] + integral;
                assert!(
                    (fast.as_slice()[l] - direct).abs() < 1e-13,
                    "{rule:?} l={l}"
                );
            }
        }
    }

    #[test]
    fn constants() {
        let p = LQParams::new(1.0, 10.0, 0.0, 0.0, 0.0).unwrap();
        let g = grid(10);
        let c = lq_constants(
            &p,
            &xs(0.5),
            &PriceVector::zeros(10),
            &g,
            Quadrature::LeftEndpoint,
        )
        .unwrap();
        assert_eq!(c.k, 10f64.sqrt());
        assert_eq!(c.b, 0.0);
        assert_eq!(c.x_bar0, 0.5);

        let p = LQParams::new(1.0, 0.0, 10.0, 0.0, 0.0).unwrap();
        let ones = PriceVector::new(vec![1.0; 10]).unwrap();
        for rule in [Quadrature::LeftEndpoint, Quadrature::Trapezoid] {
            let c = lq_constants(&p, &xs(0.5), &ones, &g, rule).unwrap();
            assert!((c.b - 10.0).abs() < 1e-13, "{rule:?}: {}", c.b);
        }
    }

    #[test]
    fn stiff_exponent_is_rejected() {
        let p = LQParams::new(1.0, 500.0, 0.0, 0.0, 0.0).unwrap();
        let g = grid(10);
        let err = lq_constants(
            &p,
            &xs(0.0),
            &PriceVector::zeros(10),
            &g,
            Quadrature::LeftEndpoint,
        );
        assert!(matches!(err, Err(Error::HyperbolicRange(_))));
    }

    #[test]
    fn double_well_is_not_lq() {
        let cost = CostModel::new(
            1.0,
            Potential::Zero,
            Potential::DoubleWell {
                r: 50.0,
                y_a: 0.25,
                y_b: 0.75,
            },
        )
        .unwrap();
        assert!(matches!(
            LQParams::from_cost(&cost),
            Err(Error::NotLinearQuadratic(_))
        ));
        let lq = LQParams::new(2.0, 0.0, 10.0, 0.0, 0.3).unwrap();
        assert_eq!(LQParams::from_cost(&lq.to_cost()).unwrap().r2, 10.0);
    }

    #[test]
    fn free_agent_stays_put() {
        let p = LQParams::new(1.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        let g = grid(16);
        let w = PriceVector::zeros(16);
        let c = lq_constants(&p, &xs(0.0), &w, &g, Quadrature::Trapezoid).unwrap();
        let z = analytic_trajectory(&p, &c, &w, 0.7, &g, Quadrature::Trapezoid).unwrap();
        assert_eq!(z.len(), 17);
        assert!(z.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn agent_at_well_bottom_stays() {
        let p = LQParams::new(1.0, 10.0, 3.0, 0.4, 0.4).unwrap();
        let g = grid(16);
        let w = PriceVector::zeros(16);
        let c = lq_constants(&p, &xs(0.0), &w, &g, Quadrature::LeftEndpoint).unwrap();
        assert_eq!(c.b, 0.0);
        let z = analytic_trajectory(&p, &c, &w, 0.4, &g, Quadrature::LeftEndpoint).unwrap();
        assert!(z.iter().all(|&v| (v - 0.4).abs() < 1e-15), "{z:?}");
    }
}
