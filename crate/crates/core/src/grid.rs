use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition `0 = t_0 < t_1 < ... < t_N = T` of the trading horizon.
///
/// Controls, prices and supply live on the left endpoints `t_0..t_{N-1}`;
/// states live on all `N + 1` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    horizon: f64,
    steps: usize,
}

impl TryFrom<RawGrid> for TimeGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        TimeGrid::new(raw.horizon, raw.steps)
    }
}

impl From<TimeGrid> for RawGrid {
    fn from(g: TimeGrid) -> Self {
        RawGrid {
            horizon: g.horizon,
            steps: g.steps,
        }
    }
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidParameter(
                "grid needs at least one step".into(),
            ));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Node time `t_l = l * T / N`, computed directly rather than accumulated.
    pub fn time(&self, l: usize) -> f64 {
        l as f64 * self.horizon / self.steps as f64
    }

    /// The `N` left-endpoint times where controls and prices are sampled.
    pub fn left_times(&self) -> Vec<f64> {
        (0..self.steps).map(|l| self.time(l)).collect()
    }

    /// All `N + 1` node times.
    pub fn node_times(&self) -> Vec<f64> {
        (0..=self.steps).map(|l| self.time(l)).collect()
    }
}
