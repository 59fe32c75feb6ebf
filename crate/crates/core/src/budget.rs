//! Maps the budget planner's scalar action in `[-1, 1]` to an annual budget.

use crate::error::{Error, Result};
use crate::network::BudgetSpec;
use crate::scalar::Scalar;
use crate::simulator::CURRENCY_TOL;

/// How the affine budget proposal is reconciled with the remaining funds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MappingMode {
    /// Clamp into `[lower_t, min(upper_t, cap)]`; keeps every later year's
    /// minimum coverable.
    #[default]
    Clamp,
    /// `max(raw, cap)` as literally printed. Kept for comparison studies; it
    /// can exceed the annual upper bound.
    LiteralMax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetDecision<T> {
    pub fraction: T,
    pub annual_budget: T,
    /// Funds left after spending the whole annual budget.
    pub remaining_after: T,
}

/// Remaining-funds cap for `year`: `total - spent - Σ_{k>year} lower_k`.
pub fn funds_cap<T: Scalar>(budget: &BudgetSpec<T>, year: usize, spent: T) -> T {
    budget.total() - spent - budget.future_lower(year)
}

pub fn map_budget<T: Scalar>(fraction: T, year: usize, spent: T, budget: &BudgetSpec<T>) -> Result<BudgetDecision<T>> {
    map_budget_with(fraction, year, spent, budget, MappingMode::Clamp)
}

pub fn map_budget_with<T: Scalar>(
    fraction: T,
    year: usize,
    spent: T,
    budget: &BudgetSpec<T>,
    mode: MappingMode,
) -> Result<BudgetDecision<T>> {
    if year >= budget.horizon() {
        return Err(Error::EpisodeFinished { year, horizon: budget.horizon() });
    }
    let one = T::one();
    let fraction = fraction.max(-one).min(one);
    let lo = budget.lower()[year];
    let hi = budget.upper()[year];
    let raw = lo + (fraction + one) * (hi - lo) / T::lit(2.0);
    let cap = funds_cap(budget, year, spent);
    let annual_budget = match mode {
        MappingMode::Clamp => {
            if cap < lo - T::lit(CURRENCY_TOL) {
                return Err(Error::InfeasibleBudget {
                    year,
                    cap: cap.to_f64_lossy(),
                    lower: lo.to_f64_lossy(),
                });
            }
            raw.min(hi).min(cap).max(lo)
        }
        MappingMode::LiteralMax => raw.max(cap),
    };
    Ok(BudgetDecision {
        fraction,
        annual_budget,
        remaining_after: budget.total() - spent - annual_budget,
    })
}
