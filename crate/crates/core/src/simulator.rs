//! Distribution-level deterioration simulator.
//!
//! Each asset carries an exact condition distribution that is propagated by
//! its maintenance matrix when treated and by its deterioration matrix
//! otherwise. The level of service is the weight-normalized expected score.

use crate::error::{Error, Result};
use crate::network::{action_cost, expected_score, BudgetSpec, ConditionDistribution, NetworkSpec};
use crate::scalar::Scalar;

/// Absolute tolerance for currency comparisons.
pub const CURRENCY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState<T> {
    pub dists: Vec<ConditionDistribution<T>>,
    /// 0-based year; equals the horizon once the episode is over.
    pub year: usize,
    pub spent: T,
    pub los: T,
}

/// Flat network input: `n*K` distribution entries, then LoS, `t/h`, and the
/// remaining-budget ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T>(pub Vec<T>);

impl<T> Observation<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<T> {
    pub reward: T,
    pub next: EnvState<T>,
    pub annual_cost: T,
    pub violated: bool,
}

/// Which budget constraint families a year broke.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Violations {
    pub annual_lower: bool,
    pub annual_upper: bool,
    pub lifecycle: bool,
}

impl Violations {
    pub fn any(&self) -> bool {
        self.annual_lower || self.annual_upper || self.lifecycle
    }
}

/// Checks one year's spend against the annual bounds and the lifecycle cap.
pub fn check_year<T: Scalar>(budget: &BudgetSpec<T>, year: usize, cost: T, spent_after: T) -> Violations {
    let tol = T::lit(CURRENCY_TOL);
    Violations {
        annual_lower: cost < budget.lower()[year] - tol,
        annual_upper: cost > budget.upper()[year] + tol,
        lifecycle: spent_after > budget.total() + tol,
    }
}

/// Weight-normalized level of service.
pub fn los<T: Scalar>(network: &NetworkSpec<T>, dists: &[ConditionDistribution<T>]) -> T {
    debug_assert_eq!(dists.len(), network.n());
    let total = network.total_weight();
    network
        .assets()
        .iter()
        .zip(dists)
        .map(|(a, d)| a.weight / total * expected_score(d))
        .sum()
}

/// Undiscounted episode return and its per-year average.
pub fn episode_return<T: Scalar>(rewards: &[T]) -> (T, T) {
    let sum: T = rewards.iter().copied().sum();
    let avg = if rewards.is_empty() {
        T::zero()
    } else {
        sum / T::from_usize(rewards.len()).unwrap()
    };
    (sum, avg)
}

#[derive(Debug, Clone, Copy)]
pub struct Simulator<'a, T> {
    pub network: &'a NetworkSpec<T>,
    pub budget: &'a BudgetSpec<T>,
}

impl<'a, T: Scalar> Simulator<'a, T> {
    pub fn new(network: &'a NetworkSpec<T>, budget: &'a BudgetSpec<T>) -> Result<Self> {
        budget.check_compatible(network)?;
        Ok(Self { network, budget })
    }

    pub fn horizon(&self) -> usize {
        self.network.horizon()
    }

    /// Length of [`Observation`] vectors.
    pub fn obs_dim(&self) -> usize {
        self.network.n() * self.network.k() + 3
    }

    pub fn reset(&self) -> EnvState<T> {
        let dists = self.network.initial_distributions();
        let los = los(self.network, &dists);
        EnvState { dists, year: 0, spent: T::zero(), los }
    }

    pub fn step(&self, state: &EnvState<T>, selected: &[bool]) -> Result<StepResult<T>> {
        let h = self.horizon();
        if state.year >= h {
            return Err(Error::EpisodeFinished { year: state.year, horizon: h });
        }
        let annual_cost = action_cost(self.network, state.year, selected)?;
        let dists: Vec<_> = self
            .network
            .assets()
            .iter()
            .zip(&state.dists)
            .zip(selected)
            .map(|((a, d), &s)| d.propagate(if s { &a.maintenance } else { &a.deterioration }))
            .collect();
        let reward = los(self.network, &dists);
        let spent = state.spent + annual_cost;
        let violated = check_year(self.budget, state.year, annual_cost, spent).any();
        Ok(StepResult {
            reward,
            next: EnvState { dists, year: state.year + 1, spent, los: reward },
            annual_cost,
            violated,
        })
    }

    pub fn observe(&self, state: &EnvState<T>) -> Observation<T> {
        let mut v = Vec::with_capacity(self.obs_dim());
        for d in &state.dists {
            v.extend_from_slice(d.probs());
        }
        v.push(state.los);
        v.push(T::from_usize(state.year).unwrap() / T::from_usize(self.horizon()).unwrap());
        v.push(remaining_ratio(self.budget, state.spent));
        Observation(v)
    }

    /// Rolls out a whole schedule and returns the per-year step results.
    pub fn rollout(&self, plan: &[Vec<bool>]) -> Result<Vec<StepResult<T>>> {
        let mut state = self.reset();
        let mut out = Vec::with_capacity(plan.len());
        for row in plan {
            let r = self.step(&state, row)?;
            state = r.next.clone();
            out.push(r);
        }
        Ok(out)
    }
}

/// `(total - spent) / total`, clamped to `[0, 1]`.
pub fn remaining_ratio<T: Scalar>(budget: &BudgetSpec<T>, spent: T) -> T {
    if budget.total() <= T::zero() {
        return T::zero();
    }
    ((budget.total() - spent) / budget.total()).max(T::zero()).min(T::one())
}

/// One row of a rollout trace export.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub episode: usize,
    pub year: usize,
    pub annual_cost: f64,
    pub reward: f64,
    pub los: f64,
    pub b_r: f64,
    pub selected_ids: Vec<String>,
}

impl TraceRow {
    pub fn from_step<T: Scalar>(
        sim: &Simulator<'_, T>,
        episode: usize,
        year: usize,
        selected: &[bool],
        step: &StepResult<T>,
    ) -> Self {
        Self {
            episode,
            year,
            annual_cost: step.annual_cost.to_f64_lossy(),
            reward: step.reward.to_f64_lossy(),
            los: step.next.los.to_f64_lossy(),
            b_r: remaining_ratio(sim.budget, step.next.spent).to_f64_lossy(),
            selected_ids: sim
                .network
                .assets()
                .iter()
                .zip(selected)
                .filter(|(_, &s)| s)
                .map(|(a, _)| a.id.clone())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{AssetSpec, TransitionMatrix};

    fn asset(id: &str, w: f64, det: TransitionMatrix<f64>, init: ConditionDistribution<f64>) -> AssetSpec<f64> {
        AssetSpec {
            id: id.into(),
            weight: w,
            unit_cost: vec![1.0; 5],
            deterioration: det,
            maintenance: TransitionMatrix::reset_to_prime(5),
            initial: init,
        }
    }

    fn pm(s: usize) -> ConditionDistribution<f64> {
        ConditionDistribution::point_mass(5, s).unwrap()
    }

    #[test]
    fn los_examples() {
        let id = TransitionMatrix::identity(5);
        let net = NetworkSpec::new(5, 5, vec![asset("a", 3.0, id.clone(), pm(1)), asset("b", 1.0, id, pm(5))]).unwrap();
        assert!((los(&net, &[pm(1), pm(5)]) - 0.75).abs() < 1e-15);
        assert_eq!(los(&net, &[pm(1), pm(1)]), 1.0);
        let u = ConditionDistribution::uniform(5).unwrap();
        assert!((los(&net, &[u.clone(), u]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reset_equal_weights() {
        let id = TransitionMatrix::identity(5);
        let net = NetworkSpec::new(5, 5, vec![asset("a", 1.0, id.clone(), pm(1)), asset("b", 1.0, id, pm(5))]).unwrap();
        let b = BudgetSpec::uniform(5, 0.0, 10.0, 50.0).unwrap();
        let s = Simulator::new(&net, &b).unwrap().reset();
        assert_eq!(s.year, 0);
        assert_eq!(s.spent, 0.0);
        assert_eq!(s.los, 0.5);
    }

    #[test]
    fn step_examples() {
        let mut rows = TransitionMatrix::<f64>::identity(5).rows();
        rows[0] = vec![0.6, 0.4, 0.0, 0.0, 0.0];
        let det = TransitionMatrix::new(rows).unwrap();
        let net = NetworkSpec::new(5, 5, vec![asset("a", 1.0, det, pm(1))]).unwrap();
        let b = BudgetSpec::uniform(5, 0.0, 10.0, 50.0).unwrap();
        let sim = Simulator::new(&net, &b).unwrap();
        let r = sim.step(&sim.reset(), &[false]).unwrap();
        assert_eq!(r.next.dists[0].probs(), &[0.6, 0.4, 0.0, 0.0, 0.0]);
        assert!((r.reward - 0.9).abs() < 1e-15);
        assert!(!r.violated);

        // treatment resets to prime
        let r2 = sim.step(&r.next, &[true]).unwrap();
        assert_eq!(r2.reward, 1.0);
        assert_eq!(r2.annual_cost, 1.0);
    }

    #[test]
    fn step_after_horizon_fails() {
        let net = NetworkSpec::new(5, 5, vec![asset("a", 1.0, TransitionMatrix::identity(5), pm(2))]).unwrap();
        let b = BudgetSpec::uniform(5, 0.0, 10.0, 50.0).unwrap();
        let sim = Simulator::new(&net, &b).unwrap();
        let mut s = sim.reset();
        for _ in 0..5 {
            let r = sim.step(&s, &[false]).unwrap();
            assert_eq!(r.reward, s.los);
            s = r.next;
        }
        assert!(matches!(sim.step(&s, &[false]), Err(Error::EpisodeFinished { .. })));
    }

    #[test]
    fn violation_flags() {
        let net = NetworkSpec::new(5, 5, vec![asset("a", 4.0, TransitionMatrix::identity(5), pm(2))]).unwrap();
        let b = BudgetSpec::uniform(5, 1.0, 5.0, 10.0).unwrap();
        let sim = Simulator::new(&net, &b).unwrap();
        let s0 = sim.reset();
        assert!(sim.step(&s0, &[false]).unwrap().violated); // below lower
        let s1 = sim.step(&s0, &[true]).unwrap();
        assert!(!s1.violated);
        let s2 = sim.step(&s1.next, &[true]).unwrap();
        assert!(!s2.violated);
        let s3 = sim.step(&s2.next, &[true]).unwrap();
        assert!(s3.violated); // 12 > 10 lifecycle
        assert!(check_year(&b, 0, 6.0, 6.0).annual_upper);
    }

    #[test]
    fn observe_layout() {
        let net = NetworkSpec::new(5, 5, vec![asset("a", 1.0, TransitionMatrix::identity(5), pm(2))]).unwrap();
        let b = BudgetSpec::uniform(5, 0.0, 200_000.0, 500_000.0).unwrap();
        let sim = Simulator::new(&net, &b).unwrap();
        let mut s = sim.reset();
        let o = sim.observe(&s);
        assert_eq!(o.len(), 5 + 3);
        assert_eq!(&o.0[..5], &[0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(o.0[5], 0.75);
        assert_eq!(o.0[6], 0.0);
        assert_eq!(o.0[7], 1.0);
        s.spent = 100_000.0;
        s.year = 4;
        let o = sim.observe(&s);
        assert!((o.0[7] - 0.8).abs() < 1e-15);
        assert!((o.0[6] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn episode_return_examples() {
        assert_eq!(episode_return(&[1.0f64; 5]), (5.0, 1.0));
        let (s, a) = episode_return(&[0.9f64, 0.8, 0.7, 0.6, 0.5]);
        assert!((s - 3.5).abs() < 1e-12 && (a - 0.7).abs() < 1e-12);
        let (s2, _) = episode_return(&[0.5f64, 0.7, 0.9, 0.6, 0.8]);
        assert!((s - s2).abs() < 1e-12);
    }
}
