//! Running and terminal costs.
//!
//! Potentials form a closed set of variants so every gradient backend can
//! pair a potential with its exact analytic derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    Zero,
    /// `(r/2)(z - y)^2`
    Quadratic {
        r: f64,
        y: f64,
    },
    /// `(r/2)(z - y_a)^2 (z - y_b)^2`
    DoubleWell {
        r: f64,
        y_a: f64,
        y_b: f64,
    },
}

impl Potential {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            Potential::Zero => 0.0,
            Potential::Quadratic { r, y } => 0.5 * r * (z - y) * (z - y),
            Potential::DoubleWell { r, y_a, y_b } => {
                let p = (z - y_a) * (z - y_b);
                0.5 * r * p * p
            }
        }
    }

    pub fn d1(&self, z: f64) -> f64 {
        match *self {
            Potential::Zero => 0.0,
            Potential::Quadratic { r, y } => r * (z - y),
            Potential::DoubleWell { r, y_a, y_b } => {
                r * (z - y_a) * (z - y_b) * (2.0 * z - y_a - y_b)
            }
        }
    }

    pub fn d2(&self, z: f64) -> f64 {
        match *self {
            Potential::Zero => 0.0,
            Potential::Quadratic { r, .. } => r,
            Potential::DoubleWell { r, y_a, y_b } => {
                let s = 2.0 * z - y_a - y_b;
                r * (s * s + 2.0 * (z - y_a) * (z - y_b))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (weight, finite) = match *self {
            Potential::Zero => (0.0, true),
            Potential::Quadratic { r, y } => (r, y.is_finite()),
            Potential::DoubleWell { r, y_a, y_b } => (r, y_a.is_finite() && y_b.is_finite()),
        };
        if !(weight.is_finite() && weight >= 0.0 && finite) {
            return Err(Error::InvalidParameter(format!(
                "potential {self:?} needs a finite weight r >= 0 and finite centers"
            )));
        }
        Ok(())
    }
}

/// `L(z, a) = c0 a^2 / 2 + V(z)` with terminal cost `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub c0: f64,
    pub running: Potential,
    pub terminal: Potential,
}

impl CostModel {
    pub fn new(c0: f64, running: Potential, terminal: Potential) -> Result<Self> {
        let model = Self {
            c0,
            running,
            terminal,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0.is_finite() && self.c0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "control penalty c0 must be positive, got {}",
                self.c0
            )));
        }
        self.running.validate()?;
        self.terminal.validate()
    }

    pub fn running_cost(&self, z: f64, alpha: f64) -> f64 {
        0.5 * self.c0 * alpha * alpha + self.running.eval(z)
    }
}
