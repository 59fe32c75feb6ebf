use std::ops::ControlFlow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::agent::AgentBundle;
use super::replay::{ReplayBuffer, TransitionRecord};
use crate::budget::MappingMode;
use crate::error::{Error, Result};
use crate::network::{BudgetSpec, NetworkSpec, PlanMatrix};
use crate::report::EpisodeMetrics;
use crate::scalar::Scalar;
use crate::simulator::{episode_return, Simulator, CURRENCY_TOL};

/// Training configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub lr_actor1: f64,
    pub lr_actor2: f64,
    pub lr_critic: f64,
    pub lr_alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    pub batch: usize,
    pub capacity: usize,
    pub episodes: usize,
    pub hidden: usize,
    pub alpha_init: f64,
    /// `None` means `-(1 + n)`.
    pub target_entropy: Option<f64>,
    /// Greedy evaluation rollout every this many episodes (0 disables).
    pub eval_every: usize,
    pub mapping: MappingMode,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            lr_actor1: 8e-4,
            lr_actor2: 8e-6,
            lr_critic: 1.6e-3,
            lr_alpha: 1.2e-3,
            gamma: 1.0,
            tau: 0.005,
            batch: 256,
            capacity: 100_000,
            episodes: 5_000,
            hidden: crate::nn::HIDDEN,
            alpha_init: 0.1,
            target_entropy: None,
            eval_every: 10,
            mapping: MappingMode::Clamp,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn target_entropy_for(&self, n: usize) -> f64 {
        self.target_entropy.unwrap_or(-(1.0 + n as f64))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::invariant(format!("hyperparameter {field}"), msg.to_string()));
        for (name, lr) in [
            ("lr_actor1", self.lr_actor1),
            ("lr_actor2", self.lr_actor2),
            ("lr_critic", self.lr_critic),
            ("lr_alpha", self.lr_alpha),
        ] {
            if !(lr > 0.0) {
                return bad(name, "must be positive");
            }
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau", "must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1]");
        }
        if self.batch == 0 || self.capacity < self.batch {
            return bad("batch", "must be positive and no larger than capacity");
        }
        if self.hidden == 0 {
            return bad("hidden", "must be positive");
        }
        if !(self.alpha_init > 0.0) {
            return bad("alpha_init", "must be positive");
        }
        Ok(())
    }
}

/// Best budget-feasible plan seen during training.
#[derive(Debug, Clone, PartialEq)]
pub struct BestPlan<T> {
    pub plan: PlanMatrix<T>,
    pub ret: T,
    /// Average level of service over the horizon.
    pub objective: T,
    pub episode: usize,
    pub greedy: bool,
}

/// Per-year budget compliance of every executed training year.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeasibilityTally {
    pub years: usize,
    /// Years where no subset met the annual minimum under the mapped budget.
    pub relaxed_years: usize,
    /// Non-relaxed years breaking `lower ≤ cost ≤ b_t ≤ upper` or the
    /// lifecycle cap.
    pub violations: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub bundle: AgentBundle<T>,
    pub best: Option<BestPlan<T>>,
    pub log: Vec<EpisodeMetrics>,
    pub feasibility: FeasibilityTally,
}

pub fn train<T: Scalar>(network: &NetworkSpec<T>, budget: &BudgetSpec<T>, hyper: &HyperParams) -> Result<TrainOutcome<T>> {
    train_with(network, budget, hyper, |_, _| ControlFlow::Continue(()))
}

/// Runs the training loop, reporting every episode to `sink`. The sink may
/// stop training early by returning `Break`.
pub fn train_with<T: Scalar, F>(
    network: &NetworkSpec<T>,
    budget: &BudgetSpec<T>,
    hyper: &HyperParams,
    mut sink: F,
) -> Result<TrainOutcome<T>>
where
    F: FnMut(&EpisodeMetrics, Option<&BestPlan<T>>) -> ControlFlow<()>,
{
    hyper.validate()?;
    let sim = Simulator::new(network, budget)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut bundle = AgentBundle::<T>::new(sim.obs_dim(), network.n(), hyper, &mut rng);
    let mut buffer = ReplayBuffer::new(hyper.capacity);
    let mut best: Option<BestPlan<T>> = None;
    let mut log = Vec::with_capacity(hyper.episodes);
    let mut tally = FeasibilityTally::default();
    let h = sim.horizon();
    let tol = T::lit(CURRENCY_TOL);

    for episode in 0..hyper.episodes {
        let mut state = sim.reset();
        let mut rewards = Vec::with_capacity(h);
        let mut rows = Vec::with_capacity(h);
        let mut feasible = true;
        let mut max_critic: Option<f64> = None;
        let mut actor_sums = (0.0, 0.0, 0usize);

        for t in 0..h {
            let obs = sim.observe(&state);
            let year = bundle.plan_year(network, budget, &state, obs.as_slice(), &mut rng, false, hyper.mapping)?;
            let selected = year.selected.to_bools(network.n());
            let step = sim.step(&state, &selected)?;

            tally.years += 1;
            if year.solution.relaxed_lower {
                tally.relaxed_years += 1;
            } else {
                let b_t = year.decision.annual_budget;
                let ok = step.annual_cost >= budget.lower()[t] - tol
                    && step.annual_cost <= b_t + tol
                    && b_t <= budget.upper()[t] + tol
                    && step.next.spent <= budget.total() + tol;
                if !ok || step.violated {
                    tally.violations += 1;
                }
            }
            feasible &= !step.violated;

            let next_obs = sim.observe(&step.next);
            buffer.push(TransitionRecord {
                obs: obs.0,
                a1: year.action.a1,
                a2: year.action.a2,
                reward: step.reward,
                next_obs: next_obs.0,
                terminal: t + 1 == h,
            });
            if buffer.len() >= hyper.batch {
                let batch = buffer.sample(hyper.batch, &mut rng);
                let report = bundle.update(&batch, hyper, &mut rng)?;
                let worst = report.critic1.max(report.critic2).to_f64_lossy();
                max_critic = Some(max_critic.map_or(worst, |m: f64| m.max(worst)));
                actor_sums.0 += report.actor1.to_f64_lossy();
                actor_sums.1 += report.actor2.to_f64_lossy();
                actor_sums.2 += 1;
            }
            rewards.push(step.reward);
            rows.push(selected);
            state = step.next;
        }

        let (ret, avg) = episode_return(&rewards);
        if feasible {
            offer(&mut best, network, rows, ret, avg, episode, false)?;
        }
        if hyper.eval_every > 0 && (episode + 1) % hyper.eval_every == 0 {
            if let Some((rows, ret, avg)) = greedy_rollout(&bundle, &sim, hyper)? {
                offer(&mut best, network, rows, ret, avg, episode, true)?;
            }
        }

        let updates = actor_sums.2;
        let metrics = EpisodeMetrics {
            episode: episode + 1,
            ret: ret.to_f64_lossy(),
            alpha: Some(bundle.alpha().to_f64_lossy()),
            max_critic_loss: max_critic,
            actor1_loss: (updates > 0).then(|| actor_sums.0 / updates as f64),
            actor2_loss: (updates > 0).then(|| actor_sums.1 / updates as f64),
            best_return_so_far: best.as_ref().map_or(f64::NAN, |b| b.ret.to_f64_lossy()),
        };
        let flow = sink(&metrics, best.as_ref());
        log.push(metrics);
        if flow.is_break() {
            break;
        }
    }
    Ok(TrainOutcome { bundle, best, log, feasibility: tally })
}

/// Schedule rows, return and average level of service.
pub(crate) type Rollout<T> = (Vec<Vec<bool>>, T, T);

/// Deterministic-policy episode; `None` if it broke a budget constraint.
fn greedy_rollout<T: Scalar>(bundle: &AgentBundle<T>, sim: &Simulator<'_, T>, hyper: &HyperParams) -> Result<Option<Rollout<T>>> {
    // deterministic mode draws no noise, so any rng works here
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut state = sim.reset();
    let mut rewards = Vec::new();
    let mut rows = Vec::new();
    for _ in 0..sim.horizon() {
        let obs = sim.observe(&state);
        let year = bundle.plan_year(sim.network, sim.budget, &state, obs.as_slice(), &mut rng, true, hyper.mapping)?;
        let selected = year.selected.to_bools(sim.network.n());
        let step = sim.step(&state, &selected)?;
        if step.violated {
            return Ok(None);
        }
        rewards.push(step.reward);
        rows.push(selected);
        state = step.next;
    }
    let (ret, avg) = episode_return(&rewards);
    Ok(Some((rows, ret, avg)))
}

/// Keeps `best` as the highest-return plan offered so far.
pub(crate) fn offer<T: Scalar>(
    best: &mut Option<BestPlan<T>>,
    network: &NetworkSpec<T>,
    rows: Vec<Vec<bool>>,
    ret: T,
    avg: T,
    episode: usize,
    greedy: bool,
) -> Result<()> {
    if best.as_ref().map_or(true, |b| ret > b.ret) {
        *best = Some(BestPlan { plan: PlanMatrix::new(network, rows)?, ret, objective: avg, episode, greedy });
    }
    Ok(())
}
