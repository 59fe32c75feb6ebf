//! Exhaustive ground truth for small instances: feasible-plan counting,
//! optimal schedules by exact rollout, and plan evaluation.

use std::thread;

use crate::error::{Error, Result};
use crate::knapsack::{enumerate_feasible_subsets, Subset};
use crate::network::{expected_score, BudgetSpec, NetworkSpec, PlanMatrix};
use crate::scalar::Scalar;
use crate::simulator::{check_year, episode_return, Simulator, Violations, CURRENCY_TOL};

/// Largest number of multi-year action tuples the oracle will walk.
pub const MAX_PLAN_PRODUCT: u128 = 100_000_000;

/// How per-asset treatment costs enter the budget checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CostArithmetic {
    /// `unit_cost * weight` as given.
    #[default]
    Exact,
    /// Each asset's yearly cost truncated to whole currency units.
    WholeUnits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    pub arithmetic: CostArithmetic,
    /// Cut branches whose spend plus the cheapest completion exceeds the
    /// lifecycle budget.
    pub prune: bool,
    /// Worker threads over the first year's actions.
    pub jobs: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { arithmetic: CostArithmetic::Exact, prune: true, jobs: 1 }
    }
}

/// Feasible annual actions of one year with their costs.
#[derive(Debug, Clone, PartialEq)]
pub struct YearActions<T> {
    pub subsets: Vec<Subset>,
    pub costs: Vec<T>,
}

impl<T> YearActions<T> {
    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }
}

pub fn asset_costs<T: Scalar>(network: &NetworkSpec<T>, year: usize, arithmetic: CostArithmetic) -> Vec<T> {
    let costs = network.costs(year);
    match arithmetic {
        CostArithmetic::Exact => costs,
        CostArithmetic::WholeUnits => costs.into_iter().map(|c| c.floor()).collect(),
    }
}

/// Per-year subsets within the annual bounds, ascending by bitmask.
pub fn feasible_actions<T: Scalar>(
    network: &NetworkSpec<T>,
    budget: &BudgetSpec<T>,
    arithmetic: CostArithmetic,
) -> Result<Vec<YearActions<T>>> {
    budget.check_compatible(network)?;
    (0..network.horizon())
        .map(|t| {
            let costs = asset_costs(network, t, arithmetic);
            let subsets = enumerate_feasible_subsets(&costs, budget.lower()[t], budget.upper()[t])?;
            let action_costs = subsets.iter().map(|s| s.sum(&costs)).collect();
            Ok(YearActions { subsets, costs: action_costs })
        })
        .collect()
}

fn check_scale<T>(actions: &[YearActions<T>]) -> Result<()> {
    let mut product: u128 = 1;
    for a in actions {
        product = product.saturating_mul(a.len() as u128);
    }
    if product > MAX_PLAN_PRODUCT {
        return Err(Error::Scale { what: "multi-year action tuples", got: product, limit: MAX_PLAN_PRODUCT });
    }
    Ok(())
}

/// `suffix[t]` is the cheapest spend over years `t..h`.
fn cheapest_completion<T: Scalar>(actions: &[YearActions<T>]) -> Vec<T> {
    let mut suffix = vec![T::zero(); actions.len() + 1];
    for t in (0..actions.len()).rev() {
        let min = actions[t].costs.iter().copied().fold(T::infinity(), T::min);
        suffix[t] = suffix[t + 1] + min;
    }
    suffix
}

/// Splits `0..len` into at most `jobs` contiguous ranges.
fn chunks(len: usize, jobs: usize) -> Vec<std::ops::Range<usize>> {
    let jobs = jobs.clamp(1, len.max(1));
    let size = len.div_ceil(jobs);
    (0..jobs).map(|j| j * size..((j + 1) * size).min(len)).filter(|r| !r.is_empty()).collect()
}

fn run_chunks<R: Send, F>(len: usize, jobs: usize, work: F) -> Vec<R>
where
    F: Fn(std::ops::Range<usize>) -> R + Sync,
{
    let ranges = chunks(len, jobs);
    if ranges.len() <= 1 {
        return ranges.into_iter().map(&work).collect();
    }
    thread::scope(|s| {
        let handles: Vec<_> = ranges.into_iter().map(|r| s.spawn(|| work(r))).collect();
        handles.into_iter().map(|h| h.join().expect("oracle worker panicked")).collect()
    })
}

struct Counter<'a, T> {
    actions: &'a [YearActions<T>],
    suffix: Vec<T>,
    /// Last year's action costs, ascending.
    last_sorted: Vec<T>,
    limit: T,
    prune: bool,
}

impl<T: Scalar> Counter<'_, T> {
    fn count(&self, year: usize, spent: T) -> u64 {
        let h = self.actions.len();
        if year == h {
            return u64::from(spent <= self.limit);
        }
        if self.prune {
            if spent + self.suffix[year] > self.limit {
                return 0;
            }
            if year + 1 == h {
                return self.last_sorted.partition_point(|&c| spent + c <= self.limit) as u64;
            }
        }
        self.actions[year].costs.iter().map(|&c| self.count(year + 1, spent + c)).sum()
    }
}

/// Number of `h`-year schedules whose every year meets the annual bounds and
/// whose total spend stays within the lifecycle budget.
pub fn count_feasible_plans<T: Scalar>(network: &NetworkSpec<T>, budget: &BudgetSpec<T>, options: &OracleOptions) -> Result<u64> {
    let actions = feasible_actions(network, budget, options.arithmetic)?;
    count_action_tuples(&actions, budget.total(), options)
}

/// Number of one-action-per-year tuples over `actions` with total cost
/// within `total`.
pub fn count_action_tuples<T: Scalar>(actions: &[YearActions<T>], total: T, options: &OracleOptions) -> Result<u64> {
    check_scale(actions)?;
    let Some(last) = actions.last() else { return Ok(u64::from(total >= T::zero())) };
    let mut last_sorted = last.costs.clone();
    last_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let counter = Counter {
        suffix: cheapest_completion(actions),
        actions,
        last_sorted,
        limit: total + T::lit(CURRENCY_TOL),
        prune: options.prune,
    };
    let first = &actions[0].costs;
    let parts = run_chunks(first.len(), options.jobs, |r| r.map(|i| counter.count(1, first[i])).sum::<u64>());
    Ok(parts.into_iter().sum())
}

/// Average condition on the `1..=k` scale equivalent to an average level of
/// service.
pub fn average_condition<T: Scalar>(k: usize, los: T) -> T {
    let k = T::from_usize(k).unwrap();
    k - (k - T::one()) * los
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalPlan<T> {
    pub plan: PlanMatrix<T>,
    /// Average level of service over the horizon.
    pub objective: T,
    pub average_condition: T,
    /// Complete feasible schedules that were rolled out.
    pub plans_evaluated: u64,
}

/// Flat distribution rollout shared by every search branch.
struct Search<'a, T> {
    network: &'a NetworkSpec<T>,
    actions: &'a [YearActions<T>],
    suffix: Vec<T>,
    limit: T,
    prune: bool,
    /// `w_i / W`.
    share: Vec<T>,
    /// Expected-score coefficient of each state.
    score: Vec<T>,
}

struct Branch<T> {
    /// Distributions per depth, `n * k` each.
    levels: Vec<Vec<T>>,
    path: Vec<usize>,
    best: Option<(T, Vec<usize>)>,
    evaluated: u64,
}

impl<T: Scalar> Search<'_, T> {
    /// Propagates depth `year` into depth `year + 1` under `subset` and
    /// returns the resulting level of service.
    fn advance(&self, b: &mut Branch<T>, year: usize, subset: Subset) -> T {
        let k = self.network.k();
        let (done, rest) = b.levels.split_at_mut(year + 1);
        let (src, dst) = (&done[year], &mut rest[0]);
        let mut los = T::zero();
        for (i, asset) in self.network.assets().iter().enumerate() {
            let m = if subset.contains(i) { &asset.maintenance } else { &asset.deterioration };
            let from = &src[i * k..(i + 1) * k];
            let to = &mut dst[i * k..(i + 1) * k];
            to.fill(T::zero());
            for (r, &p) in from.iter().enumerate() {
                if p != T::zero() {
                    for (o, &q) in to.iter_mut().zip(m.row(r)) {
                        *o = *o + p * q;
                    }
                }
            }
            let s: T = to.iter().zip(&self.score).map(|(&p, &c)| p * c).sum();
            los = los + self.share[i] * s;
        }
        los
    }

    fn descend(&self, b: &mut Branch<T>, year: usize, spent: T, reward_sum: T, range: std::ops::Range<usize>) {
        let h = self.actions.len();
        if year == h {
            if spent > self.limit {
                return;
            }
            b.evaluated += 1;
            if b.best.as_ref().map_or(true, |(s, _)| reward_sum > *s) {
                b.best = Some((reward_sum, b.path.clone()));
            }
            return;
        }
        if self.prune && spent + self.suffix[year] > self.limit {
            return;
        }
        let acts = &self.actions[year];
        for idx in range {
            let los = self.advance(b, year, acts.subsets[idx]);
            b.path.push(idx);
            let next = if year + 1 < h { 0..self.actions[year + 1].len() } else { 0..0 };
            self.descend(b, year + 1, spent + acts.costs[idx], reward_sum + los, next);
            b.path.pop();
        }
    }
}

/// Schedule maximizing the average level of service among all feasible
/// schedules; ties go to the lexicographically smallest sequence of annual
/// bitmasks. `None` when no schedule is feasible.
pub fn solve_optimal_plan<T: Scalar>(
    network: &NetworkSpec<T>,
    budget: &BudgetSpec<T>,
    options: &OracleOptions,
) -> Result<Option<OptimalPlan<T>>> {
    let actions = feasible_actions(network, budget, options.arithmetic)?;
    check_scale(&actions)?;
    let k = network.k();
    let total_weight = network.total_weight();
    let search = Search {
        network,
        actions: &actions,
        suffix: cheapest_completion(&actions),
        limit: budget.total() + T::lit(CURRENCY_TOL),
        prune: options.prune,
        share: network.assets().iter().map(|a| a.weight / total_weight).collect(),
        score: (0..k).map(|j| T::from_usize(k - 1 - j).unwrap() / T::from_usize(k - 1).unwrap()).collect(),
    };
    let h = network.horizon();
    let root: Vec<T> = network.initial_distributions().iter().flat_map(|d| d.probs().to_vec()).collect();
    let parts = run_chunks(actions[0].len(), options.jobs, |range| {
        let mut b = Branch {
            levels: (0..=h).map(|t| if t == 0 { root.clone() } else { vec![T::zero(); root.len()] }).collect(),
            path: Vec::with_capacity(h),
            best: None,
            evaluated: 0,
        };
        search.descend(&mut b, 0, T::zero(), T::zero(), range);
        (b.best, b.evaluated)
    });

    let mut best: Option<(T, Vec<usize>)> = None;
    let mut evaluated = 0;
    for (candidate, count) in parts {
        evaluated += count;
        if let Some((s, p)) = candidate {
            if best.as_ref().map_or(true, |(bs, _)| s > *bs) {
                best = Some((s, p));
            }
        }
    }
    let Some((sum, path)) = best else { return Ok(None) };
    let rows = path.iter().enumerate().map(|(t, &i)| actions[t].subsets[i].to_bools(network.n())).collect();
    let objective = sum / T::from_usize(h).unwrap();
    Ok(Some(OptimalPlan {
        plan: PlanMatrix::new(network, rows)?,
        objective,
        average_condition: average_condition(k, objective),
        plans_evaluated: evaluated,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanEvaluation<T> {
    /// Average level of service over the horizon.
    pub objective: T,
    pub average_condition: T,
    pub annual_costs: Vec<T>,
    pub total_cost: T,
    pub violations: Vec<Violations>,
}

impl<T> PlanEvaluation<T> {
    pub fn is_feasible(&self) -> bool {
        self.violations.iter().all(|v| !v.any())
    }
}

/// Exact rollout of `plan` with a per-year constraint report.
pub fn evaluate_plan<T: Scalar>(network: &NetworkSpec<T>, budget: &BudgetSpec<T>, plan: &PlanMatrix<T>) -> Result<PlanEvaluation<T>> {
    if plan.horizon() != network.horizon() {
        return Err(Error::Dimension { expected: network.horizon(), got: plan.horizon() });
    }
    let sim = Simulator::new(network, budget)?;
    let steps = sim.rollout(plan.x())?;
    let rewards: Vec<T> = steps.iter().map(|s| s.reward).collect();
    let (_, objective) = episode_return(&rewards);
    let violations = steps
        .iter()
        .enumerate()
        .map(|(t, s)| check_year(budget, t, s.annual_cost, s.next.spent))
        .collect();
    Ok(PlanEvaluation {
        objective,
        average_condition: average_condition(network.k(), objective),
        annual_costs: plan.annual_cost().to_vec(),
        total_cost: plan.total_cost(),
        violations,
    })
}

/// Weighted average condition of the initial distributions.
pub fn network_condition<T: Scalar>(network: &NetworkSpec<T>) -> T {
    let w = network.total_weight();
    let los: T = network
        .assets()
        .iter()
        .map(|a| a.weight / w * expected_score(&a.initial))
        .sum();
    average_condition(network.k(), los)
}
