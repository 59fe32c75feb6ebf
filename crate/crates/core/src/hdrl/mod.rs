//! Hierarchical soft actor-critic: a budget planner picks the annual budget,
//! a maintenance planner scores assets, and an exact knapsack turns the
//! scores into a feasible work plan.

mod agent;
mod replay;
mod train;

pub use agent::{project_year, ActOutput, ActorGradients, AgentBundle, LossReport, YearPlan};
pub use replay::{ReplayBuffer, TransitionRecord};
pub use train::{train, train_with, BestPlan, FeasibilityTally, HyperParams, TrainOutcome};
pub(crate) use train::{offer, Rollout};
