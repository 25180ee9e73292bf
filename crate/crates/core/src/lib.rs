//! Equilibrium prices for a mean-field-game price-formation model.
//!
//! A continuum of agents trades one asset at rates `alpha`, paying
//! `c0 alpha^2/2 + V(z)` along the way plus a terminal cost `g(z(T))`, and the
//! price `omega` must clear the market: the mean trading rate equals the
//! supply `Q(t)` at every time. Equilibrium prices minimize a convex
//! functional, which after direct transcription becomes the saddle problem
//! solved by [`solver::pdhg_solve`].
//!
//! Modules:
//! - [`grid`], [`potential`], [`data`]: time grid, cost model, discretized vectors and norms
//! - [`supply`]: sinusoidal, Wiener and file-backed supply
//! - [`objective`]: Euler rollout and the discrete Lagrangian
//! - [`grad`]: control gradients via tape, discrete adjoint or finite differences
//! - [`solver`]: the primal-dual iteration, clearing residual and the `I` functional
//! - [`analytic`]: closed-form linear-quadratic equilibrium used as an oracle

pub mod analytic;
pub mod data;
pub mod error;
pub mod grad;
pub mod grid;
pub mod objective;
pub mod potential;
pub mod solver;
pub mod supply;

pub use data::{
    norm_control, norm_price, ControlMatrix, InitialStates, PriceVector, Provenance, StateMatrix,
    SupplyVector,
};
pub use error::{Error, Result};
pub use grad::{grad_alpha, GradientBackend};
pub use grid::TimeGrid;
pub use objective::{lagrangian, rollout, ObjectiveValue, Problem};
pub use potential::{CostModel, Potential};
pub use solver::{
    clearing_residual, evaluate_i, pdhg_solve, Init, InnerSolveConfig, SolveReport, SolverConfig,
};
pub use supply::{generate_supply, SupplySpec};
