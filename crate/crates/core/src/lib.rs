//! Budget-constrained multi-year maintenance planning for infrastructure
//! networks.
//!
//! The crate bundles a distribution-level deterioration simulator, a
//! hierarchical soft actor-critic planner (budget planner + maintenance
//! planner + exact knapsack projection), a deep Q-learning baseline over
//! enumerated feasible actions, and an exact enumeration oracle.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64`/`*32` aliases below fix the common choices.

pub mod budget;
pub mod dataset;
pub mod dql;
pub mod error;
pub mod hdrl;
pub mod knapsack;
pub mod network;
pub mod nn;
pub mod oracle;
pub mod report;
pub mod scalar;
pub mod simulator;
pub mod synthetic;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type NetworkSpec64 = network::NetworkSpec<f64>;
pub type BudgetSpec64 = network::BudgetSpec<f64>;
pub type PlanMatrix64 = network::PlanMatrix<f64>;
pub type Mlp64 = nn::Mlp<f64>;
pub type AgentBundle64 = hdrl::AgentBundle<f64>;

pub type NetworkSpec32 = network::NetworkSpec<f32>;
pub type BudgetSpec32 = network::BudgetSpec<f32>;
pub type PlanMatrix32 = network::PlanMatrix<f32>;
pub type Mlp32 = nn::Mlp<f32>;
pub type AgentBundle32 = hdrl::AgentBundle<f32>;
