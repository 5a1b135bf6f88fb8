//! Coupled electricity/gas distribution simulation with power-to-gas plants.
//!
//! The engine steps a radial electric network (backward/forward sweep), a
//! transient gas network and a set of electrolysis + methanation plants on a
//! fixed time grid, coordinating plant dispatch from reverse power flow and
//! gas-side injection capacity, then levelizes the resulting SNG cost.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coordinator;
pub mod economics;
pub mod electric;
pub mod gas;
pub mod plant;
pub mod scenario;
pub mod sim;

pub use scenario::{load_scenario, Scenario, ScenarioError};
pub use sim::{run, SimError, SimulationResult};
