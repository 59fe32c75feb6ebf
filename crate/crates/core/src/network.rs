//! Network model: condition distributions, transition matrices, assets,
//! budgets, plans, and the cost and performance arithmetic built on them.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probability mass must sum to one within this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-9;
/// Sums within this distance of one are renormalized on construction.
pub const RENORMALIZE_TOL: f64 = 1e-6;
/// Default number of condition states.
pub const DEFAULT_STATES: usize = 5;

fn normalize_probs<T: Scalar>(probs: &mut [T], location: &str) -> Result<()> {
    for (j, p) in probs.iter().enumerate() {
        if !p.is_finite() || *p < T::zero() || *p > T::one() {
            return Err(Error::invariant(
                location,
                format!("entry {} = {} is outside [0, 1]", j + 1, p),
            ));
        }
    }
    let sum: T = probs.iter().copied().sum();
    let dev = (sum - T::one()).abs().to_f64_lossy();
    if dev > RENORMALIZE_TOL {
        return Err(Error::invariant(
            location,
            format!("entries sum to {sum}, expected 1"),
        ));
    }
    if dev > STOCHASTIC_TOL {
        probs.iter_mut().for_each(|p| *p = *p / sum);
    }
    Ok(())
}

/// Probability distribution over condition states `1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionDistribution<T> {
    probs: Vec<T>,
}

impl<T: Scalar> ConditionDistribution<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        Self::with_location(probs, "condition distribution")
    }

    pub(crate) fn with_location(mut probs: Vec<T>, location: &str) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::invariant(location, "at least 2 condition states required"));
        }
        normalize_probs(&mut probs, location)?;
        Ok(Self { probs })
    }

    /// All mass on `state` (1-based).
    pub fn point_mass(k: usize, state: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invariant("condition distribution", "at least 2 condition states required"));
        }
        if state == 0 || state > k {
            return Err(Error::StateOutOfRange { state, k });
        }
        let mut probs = vec![T::zero(); k];
        probs[state - 1] = T::one();
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        let p = T::one() / T::from_usize(k).unwrap();
        Self::new(vec![p; k])
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    /// One year of dynamics: the row vector times `matrix`.
    pub fn propagate(&self, matrix: &TransitionMatrix<T>) -> Self {
        debug_assert_eq!(self.k(), matrix.k());
        let k = self.k();
        let mut out = vec![T::zero(); k];
        for (i, &p) in self.probs.iter().enumerate() {
            if p == T::zero() {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(matrix.row(i)) {
                *o = *o + p * m;
            }
        }
        Self { probs: out }
    }

    /// Convex combination `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Self, lambda: T) -> Result<Self> {
        if self.k() != other.k() {
            return Err(Error::Dimension { expected: self.k(), got: other.k() });
        }
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(&p, &q)| lambda * p + (T::one() - lambda) * q)
            .collect();
        Self::new(probs)
    }
}

/// Row-stochastic `K x K` matrix of annual transition probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<T> {
    k: usize,
    data: Vec<T>,
}

impl<T: Scalar> TransitionMatrix<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        Self::with_location(rows, "transition matrix")
    }

    pub(crate) fn with_location(rows: Vec<Vec<T>>, location: &str) -> Result<Self> {
        let k = rows.len();
        if k < 2 {
            return Err(Error::invariant(location, "at least 2 condition states required"));
        }
        let mut data = Vec::with_capacity(k * k);
        for (i, mut row) in rows.into_iter().enumerate() {
            let at = format!("{location} row {}", i + 1);
            if row.len() != k {
                return Err(Error::invariant(at, format!("has {} entries, expected {k}", row.len())));
            }
            normalize_probs(&mut row, &at)?;
            data.extend(row);
        }
        Ok(Self { k, data })
    }

    pub fn identity(k: usize) -> Self {
        let mut data = vec![T::zero(); k * k];
        for i in 0..k {
            data[i * k + i] = T::one();
        }
        Self { k, data }
    }

    /// Every state moves to state 1 (prime condition).
    pub fn reset_to_prime(k: usize) -> Self {
        let mut data = vec![T::zero(); k * k];
        for i in 0..k {
            data[i * k] = T::one();
        }
        Self { k, data }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.k).map(|r| r.to_vec()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssetSpec<T> {
    pub id: String,
    /// Relative weight (length, area or importance).
    pub weight: T,
    /// Treatment cost per weight unit, one entry per planning year.
    pub unit_cost: Vec<T>,
    pub deterioration: TransitionMatrix<T>,
    pub maintenance: TransitionMatrix<T>,
    pub initial: ConditionDistribution<T>,
}

impl<T: Scalar> AssetSpec<T> {
    /// Cost of treating this asset in `year`.
    pub fn cost(&self, year: usize) -> T {
        self.unit_cost[year] * self.weight
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec<T> {
    k: usize,
    horizon: usize,
    assets: Vec<AssetSpec<T>>,
}

impl<T: Scalar> NetworkSpec<T> {
    pub fn new(k: usize, horizon: usize, assets: Vec<AssetSpec<T>>) -> Result<Self> {
        if assets.is_empty() {
            return Err(Error::invariant("network", "n ≥ 1 required"));
        }
        if k < 2 {
            return Err(Error::invariant("network", "K ≥ 2 required"));
        }
        if horizon == 0 {
            return Err(Error::invariant("network", "horizon ≥ 1 required"));
        }
        let mut seen = std::collections::HashSet::new();
        for a in &assets {
            let at = |field: &str| format!("asset {} {field}", a.id);
            if !seen.insert(a.id.as_str()) {
                return Err(Error::invariant(at("id"), "duplicate asset id"));
            }
            if !(a.weight > T::zero()) || !a.weight.is_finite() {
                return Err(Error::invariant(at("weight"), format!("must be positive, got {}", a.weight)));
            }
            if a.unit_cost.len() != horizon {
                return Err(Error::invariant(
                    at("unit_cost"),
                    format!("has {} entries, expected horizon {horizon}", a.unit_cost.len()),
                ));
            }
            if let Some(c) = a.unit_cost.iter().find(|c| !(**c > T::zero()) || !c.is_finite()) {
                return Err(Error::invariant(at("unit_cost"), format!("must be positive, got {c}")));
            }
            for (field, dim) in [
                ("deterioration", a.deterioration.k()),
                ("maintenance", a.maintenance.k()),
                ("initial", a.initial.k()),
            ] {
                if dim != k {
                    return Err(Error::invariant(at(field), format!("has {dim} states, expected K = {k}")));
                }
            }
        }
        Ok(Self { k, horizon, assets })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n(&self) -> usize {
        self.assets.len()
    }

    pub fn assets(&self) -> &[AssetSpec<T>] {
        &self.assets
    }

    pub fn total_weight(&self) -> T {
        self.assets.iter().map(|a| a.weight).sum()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.assets
            .iter()
            .position(|a| a.id == id)
            .ok_or_else(|| Error::UnknownAsset(id.to_string()))
    }

    /// Per-asset treatment costs for `year`.
    pub fn costs(&self, year: usize) -> Vec<T> {
        self.assets.iter().map(|a| a.cost(year)).collect()
    }

    pub fn initial_distributions(&self) -> Vec<ConditionDistribution<T>> {
        self.assets.iter().map(|a| a.initial.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetSpec<T> {
    horizon: usize,
    lower: Vec<T>,
    upper: Vec<T>,
    total: T,
}

impl<T: Scalar> BudgetSpec<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>, total: T) -> Result<Self> {
        let horizon = lower.len();
        if horizon == 0 {
            return Err(Error::invariant("budget", "horizon ≥ 1 required"));
        }
        if upper.len() != horizon {
            return Err(Error::invariant(
                "budget upper",
                format!("has {} entries, expected {horizon}", upper.len()),
            ));
        }
        for (t, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !(l >= T::zero()) || !(u >= l) || !u.is_finite() {
                return Err(Error::invariant(
                    format!("budget year {}", t + 1),
                    format!("requires 0 ≤ lower ≤ upper, got [{l}, {u}]"),
                ));
            }
        }
        let min_total: T = lower.iter().copied().sum();
        if !(total >= T::zero()) || !total.is_finite() {
            return Err(Error::invariant("budget total", format!("must be non-negative, got {total}")));
        }
        if min_total > total {
            return Err(Error::invariant(
                "budget total",
                format!("sum of annual lower bounds {min_total} exceeds lifecycle cap {total}; instance is infeasible"),
            ));
        }
        Ok(Self { horizon, lower, upper, total })
    }

    /// Same bounds every year.
    pub fn uniform(horizon: usize, lower: T, upper: T, total: T) -> Result<Self> {
        Self::new(vec![lower; horizon], vec![upper; horizon], total)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn total(&self) -> T {
        self.total
    }

    /// `Σ_{k > year} lower_k`: funds that must stay reserved for later years.
    pub fn future_lower(&self, year: usize) -> T {
        self.lower.iter().skip(year + 1).copied().sum()
    }

    pub fn check_compatible(&self, network: &NetworkSpec<T>) -> Result<()> {
        if self.horizon != network.horizon() {
            return Err(Error::invariant(
                "budget horizon",
                format!("{} does not match network horizon {}", self.horizon, network.horizon()),
            ));
        }
        Ok(())
    }
}

/// Binary `h x n` treatment schedule with its costs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanMatrix<T> {
    x: Vec<Vec<bool>>,
    annual_cost: Vec<T>,
    total_cost: T,
}

impl<T: Scalar> PlanMatrix<T> {
    pub fn new(network: &NetworkSpec<T>, x: Vec<Vec<bool>>) -> Result<Self> {
        if x.len() != network.horizon() {
            return Err(Error::Dimension { expected: network.horizon(), got: x.len() });
        }
        let annual_cost = x
            .iter()
            .enumerate()
            .map(|(t, row)| action_cost(network, t, row))
            .collect::<Result<Vec<_>>>()?;
        let total_cost = annual_cost.iter().copied().sum();
        Ok(Self { x, annual_cost, total_cost })
    }

    pub fn x(&self) -> &[Vec<bool>] {
        &self.x
    }

    pub fn annual_cost(&self) -> &[T] {
        &self.annual_cost
    }

    pub fn total_cost(&self) -> T {
        self.total_cost
    }

    pub fn horizon(&self) -> usize {
        self.x.len()
    }
}

/// Linear condition score: state 1 maps to 1, state `k` maps to 0.
pub fn kappa<T: Scalar>(state: usize, k: usize) -> Result<T> {
    if k < 2 || state == 0 || state > k {
        return Err(Error::StateOutOfRange { state, k });
    }
    Ok(T::from_usize(k - state).unwrap() / T::from_usize(k - 1).unwrap())
}

/// `E[kappa(s)]` under `dist`.
pub fn expected_score<T: Scalar>(dist: &ConditionDistribution<T>) -> T {
    let k = dist.k();
    let denom = T::from_usize(k - 1).unwrap();
    dist.probs()
        .iter()
        .enumerate()
        .map(|(j, &p)| p * T::from_usize(k - 1 - j).unwrap() / denom)
        .sum()
}

/// `Σ_{i ∈ selected} c_{i,t} w_i`.
pub fn action_cost<T: Scalar>(network: &NetworkSpec<T>, year: usize, selected: &[bool]) -> Result<T> {
    if year >= network.horizon() {
        return Err(Error::EpisodeFinished { year, horizon: network.horizon() });
    }
    if selected.len() != network.n() {
        return Err(Error::Dimension { expected: network.n(), got: selected.len() });
    }
    Ok(network
        .assets()
        .iter()
        .zip(selected)
        .filter(|(_, &s)| s)
        .map(|(a, _)| a.cost(year))
        .sum())
}

/// [`action_cost`] addressed by asset id.
pub fn action_cost_of_ids<T: Scalar>(network: &NetworkSpec<T>, year: usize, ids: &[&str]) -> Result<T> {
    let mut selected = vec![false; network.n()];
    for id in ids {
        selected[network.index_of(id)?] = true;
    }
    action_cost(network, year, &selected)
}
