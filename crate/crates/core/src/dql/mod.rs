//! Deep Q-learning over the enumerated budget-feasible annual actions, with
//! prioritized replay and lifecycle masking.

mod per;
mod train;

pub use per::{PrioritizedBuffer, PrioritySample};
pub use train::{dql_train, dql_train_with, DqlHyperParams, DqlOutcome, DqlRecord};

use rand::Rng;

use crate::error::{Error, Result};
use crate::knapsack::Subset;
use crate::network::{BudgetSpec, NetworkSpec};
use crate::nn::Mlp;
use crate::oracle::{feasible_actions, CostArithmetic, YearActions};
use crate::scalar::Scalar;
use crate::simulator::CURRENCY_TOL;

/// Per-year budget-feasible subsets; an action id indexes a year's list.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleActionTable<T> {
    years: Vec<YearActions<T>>,
    /// `future_min[t]` is the cheapest spend over years `t..h`.
    future_min: Vec<T>,
    total: T,
}

impl<T: Scalar> FeasibleActionTable<T> {
    pub fn build(network: &NetworkSpec<T>, budget: &BudgetSpec<T>) -> Result<Self> {
        let years = feasible_actions(network, budget, CostArithmetic::Exact)?;
        if let Some(t) = years.iter().position(|y| y.is_empty()) {
            return Err(Error::NoFeasibleAction(format!("year {} has no subset within its annual bounds", t + 1)));
        }
        let mut future_min = vec![T::zero(); years.len() + 1];
        for t in (0..years.len()).rev() {
            let min = years[t].costs.iter().copied().fold(T::infinity(), T::min);
            future_min[t] = future_min[t + 1] + min;
        }
        if future_min[0] > budget.total() + T::lit(CURRENCY_TOL) {
            return Err(Error::NoFeasibleAction("cheapest schedule exceeds the lifecycle budget".into()));
        }
        Ok(Self { years, future_min, total: budget.total() })
    }

    /// Width of the Q-network output: the largest yearly list.
    pub fn len(&self) -> usize {
        self.years.iter().map(|y| y.len()).max().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn year(&self, t: usize) -> &YearActions<T> {
        &self.years[t]
    }

    pub fn subset(&self, t: usize, id: usize) -> Subset {
        self.years[t].subsets[id]
    }

    /// Actions of year `t` affordable after `spent` while every later year
    /// can still buy its cheapest feasible action.
    pub fn mask(&self, t: usize, spent: T) -> Vec<bool> {
        let cap = self.total - spent - self.future_min[t + 1] + T::lit(CURRENCY_TOL);
        let mut mask: Vec<bool> = self.years[t].costs.iter().map(|&c| c <= cap).collect();
        mask.resize(self.len(), false);
        mask
    }
}

/// Q-network with one output per action id of the widest year.
pub fn q_network<T: Scalar, R: Rng>(obs_dim: usize, table: &FeasibleActionTable<T>, hidden: usize, rng: &mut R) -> Mlp<T> {
    Mlp::init(&[obs_dim, hidden, hidden, table.len()], 1.0, rng)
}

/// Q-values of every action id for one observation.
pub fn q_forward<T: Scalar>(net: &Mlp<T>, obs: &[T]) -> Result<Vec<T>> {
    net.forward(obs, 1)
}

/// ε-greedy choice restricted to `mask`; greedy ties go to the lowest id.
pub fn select_action<T: Scalar, R: Rng>(q: &[T], mask: &[bool], epsilon: f64, rng: &mut R) -> Result<usize> {
    if q.len() != mask.len() {
        return Err(Error::Dimension { expected: q.len(), got: mask.len() });
    }
    let allowed: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if allowed.is_empty() {
        return Err(Error::NoFeasibleAction("action mask is empty".into()));
    }
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return Ok(allowed[rng.gen_range(0..allowed.len())]);
    }
    let mut best = allowed[0];
    for &i in &allowed[1..] {
        if q[i] > q[best] {
            best = i;
        }
    }
    Ok(best)
}
