//! Backward hedging of European and American options under the Heston model.
//!
//! The solver works backward over trading dates. At every node of a per-date
//! state grid it picks the holdings in spot and variance swap that minimise
//! the risk of the terminal hedging error, given the already solved future
//! policy, and prices the option out of sample with the frozen policy.

pub mod accounting;
pub mod engine;
pub mod error;
pub mod grid;
pub mod lattice;
pub mod model;
pub mod risk;
pub mod scalar;
pub mod simplex;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Params = model::HestonParams<f64>;
pub type Tree = model::VarianceTree<f64>;
pub type Bundle = model::PathBundle<f64>;
pub type Axis = grid::GridAxis<f64>;
pub type Policy = grid::PolicyTable<f64>;

pub type Config = engine::EngineConfig<f64>;
pub type Outcome = engine::HedgeOutcome<f64>;
