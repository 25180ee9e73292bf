//! Discretized prices, supply, controls and states, plus the grid-weighted
//! norms that make the discrete problem consistent with the continuous one.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::grid::TimeGrid;

/// Where the initial asset levels came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    EvenlySpaced { a: f64, b: f64 },
    FromFile,
    Explicit,
}

/// Empirical sample `x_1..x_M` of the initial asset distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialStates {
    samples: Vec<f64>,
    provenance: Provenance,
}

impl InitialStates {
    /// `x_m = a + (m-1)(b-a)/(M-1)`, or the midpoint when `M = 1`.
    pub fn evenly_spaced(a: f64, b: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParameter("need at least one agent".into()));
        }
        let samples = if count == 1 {
            vec![0.5 * (a + b)]
        } else {
            let span = (count - 1) as f64;
            (0..count).map(|m| a + m as f64 * (b - a) / span).collect()
        };
        ensure_finite("initial states", &samples)?;
        Ok(Self {
            samples,
            provenance: Provenance::EvenlySpaced { a, b },
        })
    }

    pub fn explicit(samples: Vec<f64>) -> Result<Self> {
        Self::with_provenance(samples, Provenance::Explicit)
    }

    /// One value per row, optional non-numeric header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let samples = crate::supply::read_column(path)?;
        Self::with_provenance(samples, Provenance::FromFile)
    }

    fn with_provenance(samples: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("need at least one agent".into()));
        }
        ensure_finite("initial states", &samples)?;
        Ok(Self {
            samples,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.samples
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }
}

macro_rules! time_vector {
    ($(#[$doc:meta])* $name:ident, $what:literal) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Result<Self> {
                ensure_finite($what, &values)?;
                Ok(Self(values))
            }

            pub fn zeros(len: usize) -> Self {
                Self(vec![0.0; len])
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.0
            }

            #[allow(dead_code)]
            pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }
    };
}

time_vector!(
    /// Price `omega[l]` at the left endpoints `t_0..t_{N-1}`.
    PriceVector,
    "price"
);
time_vector!(
    /// Supply `Q[l]` at the left endpoints `t_0..t_{N-1}`.
    SupplyVector,
    "supply"
);

/// Row-major `M x N` control matrix; row `m` holds agent `m`'s trading rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlMatrix {
    agents: usize,
    steps: usize,
    data: Vec<f64>,
}

impl ControlMatrix {
    pub fn zeros(agents: usize, steps: usize) -> Self {
        Self {
            agents,
            steps,
            data: vec![0.0; agents * steps],
        }
    }

    pub fn from_vec(agents: usize, steps: usize, data: Vec<f64>) -> Result<Self> {
        ensure_len("control matrix entries", agents * steps, data.len())?;
        ensure_finite("control matrix", &data)?;
        Ok(Self {
            agents,
            steps,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let steps = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * steps);
        for row in rows {
            ensure_len("control row", steps, row.len())?;
            data.extend_from_slice(row);
        }
        Self::from_vec(rows.len(), steps, data)
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.steps..(m + 1) * self.steps]
    }

    pub fn row_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.data[m * self.steps..(m + 1) * self.steps]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics; an empty matrix has no rows either way
        self.data.chunks_exact(self.steps.max(1)).take(self.agents)
    }

    pub fn get(&self, m: usize, l: usize) -> f64 {
        self.data[m * self.steps + l]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `(1/M) sum_m alpha[m][l]`, summed over agents in index order.
    pub fn column_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.steps];
        for row in self.rows() {
            for (s, a) in sums.iter_mut().zip(row) {
                *s += a;
            }
        }
        let inv = self.agents as f64;
        sums.iter_mut().for_each(|s| *s /= inv);
        sums
    }
}

/// Row-major `M x (N + 1)` state matrix produced by [`crate::objective::rollout`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    agents: usize,
    nodes: usize,
    data: Vec<f64>,
}

impl StateMatrix {
    pub(crate) fn from_vec(agents: usize, nodes: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), agents * nodes);
        Self {
            agents,
            nodes,
            data,
        }
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    /// `N + 1`
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.nodes..(m + 1) * self.nodes]
    }

    pub fn get(&self, m: usize, l: usize) -> f64 {
        self.data[m * self.nodes + l]
    }

    pub fn terminal(&self) -> Vec<f64> {
        (0..self.agents)
            .map(|m| self.get(m, self.nodes - 1))
            .collect()
    }
}

/// `sqrt((T/N) sum_l omega[l]^2)`
pub fn norm_price(omega: &PriceVector, grid: &TimeGrid) -> Result<f64> {
    ensure_len("price vector", grid.steps(), omega.len())?;
    let ss: f64 = omega.as_slice().iter().map(|w| w * w).sum();
    Ok((grid.dt() * ss).sqrt())
}

/// `sqrt(T/(M N) sum_{m,l} alpha[m][l]^2)`
pub fn norm_control(alpha: &ControlMatrix, grid: &TimeGrid) -> Result<f64> {
    ensure_len("control matrix columns", grid.steps(), alpha.steps())?;
    let ss: f64 = alpha.as_slice().iter().map(|a| a * a).sum();
    Ok((grid.dt() * ss / alpha.agents() as f64).sqrt())
}
