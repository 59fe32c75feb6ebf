use std::ops::ControlFlow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{q_forward, q_network, select_action, FeasibleActionTable, PrioritizedBuffer};
use crate::error::{Error, Result};
use crate::hdrl::{offer, BestPlan, FeasibilityTally, Rollout};
use crate::network::{BudgetSpec, NetworkSpec};
use crate::nn::{Adam, Mlp, Tape};
use crate::report::EpisodeMetrics;
use crate::scalar::Scalar;
use crate::simulator::{check_year, episode_return, Simulator};

#[derive(Debug, Clone, PartialEq)]
pub struct DqlHyperParams {
    pub lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub batch: usize,
    pub capacity: usize,
    pub episodes: usize,
    pub hidden: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Share of episodes over which ε decays linearly.
    pub epsilon_fraction: f64,
    pub per_alpha: f64,
    pub per_beta_start: f64,
    pub per_beta_end: f64,
    pub per_eps: f64,
    /// Greedy evaluation rollout every this many episodes (0 disables).
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for DqlHyperParams {
    fn default() -> Self {
        Self {
            lr: 8e-5,
            gamma: 1.0,
            tau: 0.005,
            batch: 256,
            capacity: 100_000,
            episodes: 5_000,
            hidden: crate::nn::HIDDEN,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_fraction: 0.4,
            per_alpha: 0.6,
            per_beta_start: 0.4,
            per_beta_end: 1.0,
            per_eps: 1e-6,
            eval_every: 10,
            seed: 0,
        }
    }
}

impl DqlHyperParams {
    pub fn epsilon(&self, episode: usize) -> f64 {
        let span = (self.epsilon_fraction * self.episodes as f64).max(1.0);
        let f = (episode as f64 / span).min(1.0);
        self.epsilon_start + f * (self.epsilon_end - self.epsilon_start)
    }

    pub fn beta(&self, episode: usize) -> f64 {
        let f = if self.episodes <= 1 { 1.0 } else { episode as f64 / (self.episodes - 1) as f64 };
        self.per_beta_start + f.min(1.0) * (self.per_beta_end - self.per_beta_start)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::invariant(format!("hyperparameter {field}"), msg.to_string()));
        if !(self.lr > 0.0) {
            return bad("lr", "must be positive");
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
        for (name, v) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(name, "must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

/// Replay record; the next state's mask is rebuilt from `next_year` and
/// `next_spent` rather than stored.
#[derive(Debug, Clone, PartialEq)]
pub struct DqlRecord<T> {
    pub obs: Vec<T>,
    pub action: usize,
    pub reward: T,
    pub next_obs: Vec<T>,
    pub next_year: usize,
    pub next_spent: T,
    pub terminal: bool,
}

#[derive(Debug, Clone)]
pub struct DqlOutcome<T> {
    pub q: Mlp<T>,
    pub table: FeasibleActionTable<T>,
    pub best: Option<BestPlan<T>>,
    pub log: Vec<EpisodeMetrics>,
    pub feasibility: FeasibilityTally,
}

pub fn dql_train<T: Scalar>(network: &NetworkSpec<T>, budget: &BudgetSpec<T>, hyper: &DqlHyperParams) -> Result<DqlOutcome<T>> {
    dql_train_with(network, budget, hyper, |_, _| ControlFlow::Continue(()))
}

struct Learner<T> {
    q: Mlp<T>,
    target: Mlp<T>,
    opt: Adam<T>,
}

impl<T: Scalar> Learner<T> {
    /// One prioritized TD step; returns the weighted loss and TD errors.
    fn update(
        &mut self,
        buffer: &PrioritizedBuffer<DqlRecord<T>>,
        table: &FeasibleActionTable<T>,
        hyper: &DqlHyperParams,
        beta: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<(T, Vec<usize>, Vec<f64>)> {
        let sample = buffer.sample(hyper.batch, beta, rng);
        let batch: Vec<&DqlRecord<T>> = sample.indices.iter().map(|&i| buffer.get(i)).collect();
        let b = batch.len();
        let width = table.len();
        let obs: Vec<T> = batch.iter().flat_map(|r| r.obs.iter().copied()).collect();
        let next: Vec<T> = batch.iter().flat_map(|r| r.next_obs.iter().copied()).collect();
        let q_next = self.target.forward(&next, b)?;
        let gamma = T::lit(hyper.gamma);
        let targets: Vec<T> = batch
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if r.terminal {
                    return r.reward;
                }
                let mask = table.mask(r.next_year, r.next_spent);
                let row = &q_next[i * width..(i + 1) * width];
                let best = row.iter().zip(&mask).filter(|(_, &m)| m).map(|(&q, _)| q).fold(T::neg_infinity(), T::max);
                r.reward + gamma * best
            })
            .collect();

        let mut tape = Tape::new();
        let q = self.q.forward_recorded(&obs, b, &mut tape)?;
        let bt = T::from_usize(b).unwrap();
        let mut grad = vec![T::zero(); b * width];
        let mut loss = T::zero();
        let mut td = Vec::with_capacity(b);
        for (i, r) in batch.iter().enumerate() {
            let w = T::lit(sample.weights[i]);
            let delta = q[i * width + r.action] - targets[i];
            loss = loss + w * delta * delta / bt;
            grad[i * width + r.action] = T::lit(2.0) * w * delta / bt;
            td.push(delta.to_f64_lossy());
        }
        let mut grads = vec![T::zero(); self.q.num_params()];
        self.q.backward(&tape, &grad, &mut grads)?;
        self.opt.step(self.q.params_mut(), &grads);
        self.target.polyak_from(&self.q, T::lit(hyper.tau));
        Ok((loss, sample.indices, td))
    }
}

/// Runs the DQL loop, reporting every episode to `sink`; `Break` stops early.
pub fn dql_train_with<T: Scalar, F>(
    network: &NetworkSpec<T>,
    budget: &BudgetSpec<T>,
    hyper: &DqlHyperParams,
    mut sink: F,
) -> Result<DqlOutcome<T>>
where
    F: FnMut(&EpisodeMetrics, Option<&BestPlan<T>>) -> ControlFlow<()>,
{
    hyper.validate()?;
    let sim = Simulator::new(network, budget)?;
    let table = FeasibleActionTable::build(network, budget)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let q = q_network(sim.obs_dim(), &table, hyper.hidden, &mut rng);
    let mut learner = Learner { target: q.clone(), opt: Adam::new(q.num_params(), T::lit(hyper.lr)), q };
    let mut buffer = PrioritizedBuffer::new(hyper.capacity, hyper.per_alpha);
    let mut best: Option<BestPlan<T>> = None;
    let mut log = Vec::with_capacity(hyper.episodes);
    let mut tally = FeasibilityTally::default();
    let n = network.n();

    for episode in 0..hyper.episodes {
        let epsilon = hyper.epsilon(episode);
        let beta = hyper.beta(episode);
        let mut state = sim.reset();
        let mut rewards = Vec::new();
        let mut rows = Vec::new();
        let mut feasible = true;
        let mut max_loss: Option<f64> = None;

        for t in 0..sim.horizon() {
            let obs = sim.observe(&state);
            let mask = table.mask(t, state.spent);
            let qs = q_forward(&learner.q, obs.as_slice())?;
            let action = select_action(&qs, &mask, epsilon, &mut rng)?;
            let selected = table.subset(t, action).to_bools(n);
            let step = sim.step(&state, &selected)?;
            tally.years += 1;
            if check_year(budget, t, step.annual_cost, step.next.spent).any() {
                tally.violations += 1;
                feasible = false;
            }
            let next_obs = sim.observe(&step.next);
            let terminal = t + 1 == sim.horizon();
            buffer.push(DqlRecord {
                obs: obs.0,
                action,
                reward: step.reward,
                next_obs: next_obs.0,
                next_year: t + 1,
                next_spent: step.next.spent,
                terminal,
            });
            if buffer.len() >= hyper.batch {
                let (loss, indices, td) = learner.update(&buffer, &table, hyper, beta, &mut rng)?;
                buffer.update_priorities(&indices, &td, hyper.per_eps);
                let l = loss.to_f64_lossy();
                max_loss = Some(max_loss.map_or(l, |m: f64| m.max(l)));
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
            if let Some((rows, ret, avg)) = greedy_rollout(&learner.q, &table, &sim)? {
                offer(&mut best, network, rows, ret, avg, episode, true)?;
            }
        }
        let metrics = EpisodeMetrics {
            episode: episode + 1,
            ret: ret.to_f64_lossy(),
            alpha: None,
            max_critic_loss: max_loss,
            actor1_loss: None,
            actor2_loss: None,
            best_return_so_far: best.as_ref().map_or(f64::NAN, |b| b.ret.to_f64_lossy()),
        };
        let flow = sink(&metrics, best.as_ref());
        log.push(metrics);
        if flow.is_break() {
            break;
        }
    }
    Ok(DqlOutcome { q: learner.q, table, best, log, feasibility: tally })
}

fn greedy_rollout<T: Scalar>(q: &Mlp<T>, table: &FeasibleActionTable<T>, sim: &Simulator<'_, T>) -> Result<Option<Rollout<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut state = sim.reset();
    let mut rewards = Vec::new();
    let mut rows = Vec::new();
    for t in 0..sim.horizon() {
        let qs = q_forward(q, sim.observe(&state).as_slice())?;
        let action = select_action(&qs, &table.mask(t, state.spent), 0.0, &mut rng)?;
        let selected = table.subset(t, action).to_bools(sim.network.n());
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
