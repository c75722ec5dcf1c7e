//! eUnit stochastic user equilibrium: route choice under bounded,
//! exponentiated-uniform perceived travel times.
//!
//! The core is generic over the float type ([`Scalar`], implemented for
//! `f32` and `f64`); the aliases at the crate root fix it to `f64`.

pub mod choice;
pub mod error;
pub mod harness;
pub mod network;
pub mod scenario;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Link = network::Link<f64>;
pub type Network = network::Network<f64>;
pub type OdPair = network::OdPair<f64>;
pub type RouteSet = network::RouteSet<f64>;
pub type FlowState = network::FlowState<f64>;
pub type SolverOptions = solver::SolverOptions<f64>;
pub type EquilibriumSolution = solver::EquilibriumSolution<f64>;
pub type EUnitSueSpec<'a> = solver::EUnitSueSpec<'a, f64>;
pub type ChoiceModelParams = choice::ChoiceModelParams<f64>;
