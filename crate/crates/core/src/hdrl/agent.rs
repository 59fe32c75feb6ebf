use rand::Rng;
use rand_distr::StandardNormal;

use super::replay::TransitionRecord;
use super::train::HyperParams;
use crate::budget::{map_budget_with, BudgetDecision, MappingMode};
use crate::error::{Error, Result};
use crate::knapsack::{gain, solve, KnapsackInstance, KnapsackSolution, Subset};
use crate::network::{BudgetSpec, NetworkSpec};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::{sample_squashed, squashed_backward, Adam, GaussianHeadOutput, Mlp, SquashedSample, Tape};
use crate::scalar::Scalar;
use crate::simulator::EnvState;

/// Actors, twin critics with Polyak targets, temperature, and optimizer state.
#[derive(Debug, Clone)]
pub struct AgentBundle<T> {
    /// Budget planner: observation -> Gaussian over one budget fraction.
    pub actor1: Mlp<T>,
    /// Maintenance planner: observation ⊕ fraction -> Gaussian over n priorities.
    pub actor2: Mlp<T>,
    pub critic1: Mlp<T>,
    pub critic2: Mlp<T>,
    pub target1: Mlp<T>,
    pub target2: Mlp<T>,
    log_alpha: T,
    opt_actor1: Adam<T>,
    opt_actor2: Adam<T>,
    opt_critic1: Adam<T>,
    opt_critic2: Adam<T>,
    obs_dim: usize,
    n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActOutput<T> {
    pub a1: T,
    pub a2: Vec<T>,
    pub log_prob1: T,
    pub log_prob2: T,
}

/// Everything decided for one year.
#[derive(Debug, Clone, PartialEq)]
pub struct YearPlan<T> {
    pub selected: Subset,
    pub decision: BudgetDecision<T>,
    pub solution: KnapsackSolution<T>,
    pub action: ActOutput<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport<T> {
    pub critic1: T,
    pub critic2: T,
    pub actor1: T,
    pub actor2: T,
    pub alpha_loss: T,
    pub alpha: T,
}

/// Actor losses with their parameter gradients.
#[derive(Debug, Clone)]
pub struct ActorGradients<T> {
    pub loss1: T,
    pub loss2: T,
    pub actor1: Vec<T>,
    pub actor2: Vec<T>,
    /// `log π1 + log π2` per batch row.
    pub log_probs: Vec<T>,
}

/// Outputs of a batched policy pass.
struct PolicyPass<T> {
    tape: Tape<T>,
    heads: Vec<GaussianHeadOutput<T>>,
    noise: Vec<Vec<T>>,
    samples: Vec<SquashedSample<T>>,
}

fn normal_noise<T: Scalar, R: Rng>(rng: &mut R, dim: usize) -> Vec<T> {
    (0..dim).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect()
}

fn policy_pass<T: Scalar>(net: &Mlp<T>, input: &[T], batch: usize, noise: Vec<Vec<T>>) -> Result<PolicyPass<T>> {
    let mut tape = Tape::new();
    let raw = net.forward_recorded(input, batch, &mut tape)?;
    let heads: Vec<_> = raw.chunks(net.output_dim()).map(GaussianHeadOutput::from_raw).collect();
    let samples = heads.iter().zip(&noise).map(|(h, e)| sample_squashed(h, e)).collect();
    Ok(PolicyPass { tape, heads, noise, samples })
}

/// Row-wise concatenation of `obs` rows with per-row extras.
fn concat_rows<T: Scalar>(rows: &[&[T]], extra: &[&[T]]) -> Vec<T> {
    let mut out = Vec::new();
    for (r, e) in rows.iter().zip(extra) {
        out.extend_from_slice(r);
        out.extend_from_slice(e);
    }
    out
}

fn mean<T: Scalar>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::from_usize(v.len()).unwrap()
}

/// Budget mapping followed by the knapsack projection for fixed actions.
pub fn project_year<T: Scalar>(
    network: &NetworkSpec<T>,
    budget: &BudgetSpec<T>,
    state: &EnvState<T>,
    a1: T,
    a2: &[T],
    mode: MappingMode,
) -> Result<(BudgetDecision<T>, KnapsackSolution<T>)> {
    if a2.len() != network.n() {
        return Err(Error::Dimension { expected: network.n(), got: a2.len() });
    }
    let t = state.year;
    let decision = map_budget_with(a1, t, state.spent, budget, mode)?;
    let values = network
        .assets()
        .iter()
        .zip(&state.dists)
        .zip(a2)
        .map(|((asset, dist), &p)| p * gain(asset, dist))
        .collect();
    let upper = decision.annual_budget.min(budget.upper()[t]).max(budget.lower()[t]);
    let instance = KnapsackInstance::new(values, network.costs(t), budget.lower()[t], upper)?;
    Ok((decision, solve(&instance)?))
}

impl<T: Scalar> AgentBundle<T> {
    pub fn new<R: Rng>(obs_dim: usize, n: usize, hyper: &HyperParams, rng: &mut R) -> Self {
        let h = hyper.hidden;
        let actor1 = Mlp::init(&[obs_dim, h, h, 2], 1e-2, rng);
        let actor2 = Mlp::init(&[obs_dim + 1, h, h, 2 * n], 1e-2, rng);
        let critic_in = obs_dim + 1 + n;
        let critic1 = Mlp::init(&[critic_in, h, h, 1], 1.0, rng);
        let critic2 = Mlp::init(&[critic_in, h, h, 1], 1.0, rng);
        Self {
            opt_actor1: Adam::new(actor1.num_params(), T::lit(hyper.lr_actor1)),
            opt_actor2: Adam::new(actor2.num_params(), T::lit(hyper.lr_actor2)),
            opt_critic1: Adam::new(critic1.num_params(), T::lit(hyper.lr_critic)),
            opt_critic2: Adam::new(critic2.num_params(), T::lit(hyper.lr_critic)),
            target1: critic1.clone(),
            target2: critic2.clone(),
            actor1,
            actor2,
            critic1,
            critic2,
            log_alpha: T::lit(hyper.alpha_init.ln()),
            obs_dim,
            n,
        }
    }

    pub fn alpha(&self) -> T {
        self.log_alpha.exp()
    }

    pub fn set_alpha(&mut self, alpha: T) {
        assert!(alpha > T::zero(), "temperature must be positive");
        self.log_alpha = alpha.ln();
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Output widths of the two actors' action spaces: `(1, n)`.
    pub fn action_dims(&self) -> (usize, usize) {
        (self.actor1.output_dim() / 2, self.actor2.output_dim() / 2)
    }

    /// Samples the budget fraction, then the priority vector conditioned on
    /// it. Deterministic mode returns `tanh(mean)` and draws no noise.
    pub fn act<R: Rng>(&self, obs: &[T], rng: &mut R, deterministic: bool) -> Result<ActOutput<T>> {
        if obs.len() != self.obs_dim {
            return Err(Error::Dimension { expected: self.obs_dim, got: obs.len() });
        }
        let head1 = GaussianHeadOutput::from_raw(&self.actor1.forward(obs, 1)?);
        let e1 = if deterministic { vec![T::zero()] } else { normal_noise(rng, 1) };
        let s1 = sample_squashed(&head1, &e1);
        let a1 = if deterministic { head1.mode()[0] } else { s1.action[0] };
        let input2 = concat_rows(&[obs], &[&[a1]]);
        let head2 = GaussianHeadOutput::from_raw(&self.actor2.forward(&input2, 1)?);
        let e2 = if deterministic { vec![T::zero(); self.n] } else { normal_noise(rng, self.n) };
        let s2 = sample_squashed(&head2, &e2);
        let a2 = if deterministic { head2.mode() } else { s2.action };
        Ok(ActOutput { a1, a2, log_prob1: s1.log_prob, log_prob2: s2.log_prob })
    }

    /// Actions -> annual budget -> knapsack selection for the current year.
    pub fn plan_year<R: Rng>(
        &self,
        network: &NetworkSpec<T>,
        budget: &BudgetSpec<T>,
        state: &EnvState<T>,
        obs: &[T],
        rng: &mut R,
        deterministic: bool,
        mode: MappingMode,
    ) -> Result<YearPlan<T>> {
        if state.year >= network.horizon() {
            return Err(Error::EpisodeFinished { year: state.year, horizon: network.horizon() });
        }
        let action = self.act(obs, rng, deterministic)?;
        let (decision, solution) = project_year(network, budget, state, action.a1, &action.a2, mode)?;
        Ok(YearPlan { selected: solution.selected, decision, solution, action })
    }

    fn critic_input(&self, obs: &[&[T]], a1: &[T], a2: &[&[T]]) -> Vec<T> {
        let mut out = Vec::with_capacity(obs.len() * (self.obs_dim + 1 + self.n));
        for ((o, &x), y) in obs.iter().zip(a1).zip(a2) {
            out.extend_from_slice(o);
            out.push(x);
            out.extend_from_slice(y);
        }
        out
    }

    /// Soft Bellman targets `r + γ [min_k Q̄_k(s', a') - α (log π1 + log π2)]`
    /// with `a'` freshly sampled from the current actors at `s'`.
    pub fn critic_targets<R: Rng>(&self, batch: &[&TransitionRecord<T>], gamma: T, rng: &mut R) -> Result<Vec<T>> {
        let b = batch.len();
        let next: Vec<&[T]> = batch.iter().map(|r| r.next_obs.as_slice()).collect();
        let noise1: Vec<Vec<T>> = (0..b).map(|_| normal_noise(rng, 1)).collect();
        let noise2: Vec<Vec<T>> = (0..b).map(|_| normal_noise(rng, self.n)).collect();
        let p1 = policy_pass(&self.actor1, &next.concat(), b, noise1)?;
        let a1: Vec<T> = p1.samples.iter().map(|s| s.action[0]).collect();
        let a1_rows: Vec<[T; 1]> = a1.iter().map(|&x| [x]).collect();
        let a1_refs: Vec<&[T]> = a1_rows.iter().map(|r| r.as_slice()).collect();
        let p2 = policy_pass(&self.actor2, &concat_rows(&next, &a1_refs), b, noise2)?;
        let a2: Vec<&[T]> = p2.samples.iter().map(|s| s.action.as_slice()).collect();
        let input = self.critic_input(&next, &a1, &a2);
        let q1 = self.target1.forward(&input, b)?;
        let q2 = self.target2.forward(&input, b)?;
        let alpha = self.alpha();
        Ok(batch
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if r.terminal {
                    r.reward
                } else {
                    let ent = p1.samples[i].log_prob + p2.samples[i].log_prob;
                    r.reward + gamma * (q1[i].min(q2[i]) - alpha * ent)
                }
            })
            .collect())
    }

    /// Mean squared error of both critics against `targets`.
    pub fn critic_losses(&self, batch: &[&TransitionRecord<T>], targets: &[T]) -> Result<(T, T)> {
        let (input, b) = self.replay_input(batch);
        let l = |net: &Mlp<T>| -> Result<T> {
            let q = net.forward(&input, b)?;
            Ok(mean(&q.iter().zip(targets).map(|(q, y)| (*q - *y) * (*q - *y)).collect::<Vec<_>>()))
        };
        Ok((l(&self.critic1)?, l(&self.critic2)?))
    }

    fn replay_input(&self, batch: &[&TransitionRecord<T>]) -> (Vec<T>, usize) {
        let obs: Vec<&[T]> = batch.iter().map(|r| r.obs.as_slice()).collect();
        let a1: Vec<T> = batch.iter().map(|r| r.a1).collect();
        let a2: Vec<&[T]> = batch.iter().map(|r| r.a2.as_slice()).collect();
        (self.critic_input(&obs, &a1, &a2), batch.len())
    }

    /// One Adam step of each critic towards `targets`; returns the
    /// pre-step losses.
    pub fn update_critics(&mut self, batch: &[&TransitionRecord<T>], targets: &[T]) -> Result<(T, T)> {
        let (input, b) = self.replay_input(batch);
        let scale = T::lit(2.0) / T::from_usize(b).unwrap();
        let mut losses = [T::zero(); 2];
        for (j, loss) in losses.iter_mut().enumerate() {
            let (net, opt) = match j {
                0 => (&mut self.critic1, &mut self.opt_critic1),
                _ => (&mut self.critic2, &mut self.opt_critic2),
            };
            let mut tape = Tape::new();
            let q = net.forward_recorded(&input, b, &mut tape)?;
            let diff: Vec<T> = q.iter().zip(targets).map(|(q, y)| *q - *y).collect();
            *loss = mean(&diff.iter().map(|d| *d * *d).collect::<Vec<_>>());
            let dq: Vec<T> = diff.iter().map(|d| *d * scale).collect();
            let mut grads = vec![T::zero(); net.num_params()];
            net.backward(&tape, &dq, &mut grads)?;
            opt.step(net.params_mut(), &grads);
        }
        Ok((losses[0], losses[1]))
    }

    /// Full update: critics, both actors, temperature, then Polyak targets.
    pub fn update<R: Rng>(&mut self, batch: &[&TransitionRecord<T>], hyper: &HyperParams, rng: &mut R) -> Result<LossReport<T>> {
        let gamma = T::lit(hyper.gamma);
        let targets = self.critic_targets(batch, gamma, rng)?;
        let (critic1, critic2) = self.update_critics(batch, &targets)?;
        let (actor1, actor2, log_probs) = self.update_actors(batch, rng)?;

        // temperature, in log space
        let target_entropy = T::lit(hyper.target_entropy_for(self.n));
        let alpha = self.alpha();
        let terms: Vec<T> = log_probs.iter().map(|&lp| lp + target_entropy).collect();
        let grad = -mean(&terms);
        let alpha_loss = -alpha * mean(&terms);
        self.log_alpha = self.log_alpha - T::lit(hyper.lr_alpha) * grad;

        let tau = T::lit(hyper.tau);
        self.target1.polyak_from(&self.critic1, tau);
        self.target2.polyak_from(&self.critic2, tau);
        Ok(LossReport { critic1, critic2, actor1, actor2, alpha_loss, alpha: self.alpha() })
    }

    fn update_actors<R: Rng>(&mut self, batch: &[&TransitionRecord<T>], rng: &mut R) -> Result<(T, T, Vec<T>)> {
        let b = batch.len();
        let noise1: Vec<Vec<T>> = (0..b).map(|_| normal_noise(rng, 1)).collect();
        let noise2: Vec<Vec<T>> = (0..b).map(|_| normal_noise(rng, self.n)).collect();
        let g = self.actor_gradients(batch, noise1, noise2)?;
        self.opt_actor1.step(self.actor1.params_mut(), &g.actor1);
        self.opt_actor2.step(self.actor2.params_mut(), &g.actor2);
        Ok((g.loss1, g.loss2, g.log_probs))
    }

    /// Actor losses and their exact gradients for fixed reparameterization
    /// noise (`noise1`: one entry per row, `noise2`: `n` entries per row).
    ///
    /// The budget planner's gradient includes the path through the
    /// maintenance planner's input, since `a2` is sampled given `a1`.
    pub fn actor_gradients(
        &self,
        batch: &[&TransitionRecord<T>],
        noise1: Vec<Vec<T>>,
        noise2: Vec<Vec<T>>,
    ) -> Result<ActorGradients<T>> {
        let b = batch.len();
        let n = self.n;
        let bt = T::from_usize(b).unwrap();
        let alpha = self.alpha();
        let obs: Vec<&[T]> = batch.iter().map(|r| r.obs.as_slice()).collect();

        let p1 = policy_pass(&self.actor1, &obs.concat(), b, noise1)?;
        let a1: Vec<T> = p1.samples.iter().map(|s| s.action[0]).collect();
        let a1_rows: Vec<[T; 1]> = a1.iter().map(|&x| [x]).collect();
        let a1_refs: Vec<&[T]> = a1_rows.iter().map(|r| r.as_slice()).collect();
        let p2 = policy_pass(&self.actor2, &concat_rows(&obs, &a1_refs), b, noise2)?;
        let a2: Vec<&[T]> = p2.samples.iter().map(|s| s.action.as_slice()).collect();

        let input = self.critic_input(&obs, &a1, &a2);
        let mut t1 = Tape::new();
        let mut t2 = Tape::new();
        let q1 = self.critic1.forward_recorded(&input, b, &mut t1)?;
        let q2 = self.critic2.forward_recorded(&input, b, &mut t2)?;
        let use_first: Vec<bool> = q1.iter().zip(&q2).map(|(x, y)| x <= y).collect();

        let lp1: Vec<T> = p1.samples.iter().map(|s| s.log_prob).collect();
        let lp2: Vec<T> = p2.samples.iter().map(|s| s.log_prob).collect();
        let mut loss1 = T::zero();
        let mut loss2 = T::zero();
        for i in 0..b {
            let q = q1[i].min(q2[i]);
            loss1 = loss1 + alpha * lp1[i] - q;
            loss2 = loss2 + alpha * lp2[i] - q;
        }

        // d(-mean min Q)/d(critic input), routed through the smaller critic
        let neg = -T::one() / bt;
        let g1: Vec<T> = use_first.iter().map(|&f| if f { neg } else { T::zero() }).collect();
        let g2: Vec<T> = use_first.iter().map(|&f| if f { T::zero() } else { neg }).collect();
        let mut scratch = vec![T::zero(); self.critic1.num_params()];
        let dx1 = self.critic1.backward(&t1, &g1, &mut scratch)?;
        let dx2 = self.critic2.backward(&t2, &g2, &mut scratch)?;
        let width = self.obs_dim + 1 + n;
        let d_input: Vec<T> = dx1.iter().zip(&dx2).map(|(a, b)| *a + *b).collect();

        let alpha_b = alpha / bt;
        let mut d_raw2 = Vec::with_capacity(b * 2 * n);
        let mut d_raw2_q = Vec::with_capacity(b * 2 * n);
        for i in 0..b {
            let d_a2 = &d_input[i * width + self.obs_dim + 1..(i + 1) * width];
            d_raw2.extend(squashed_backward(&p2.heads[i], &p2.noise[i], &p2.samples[i], d_a2, alpha_b));
            d_raw2_q.extend(squashed_backward(&p2.heads[i], &p2.noise[i], &p2.samples[i], d_a2, T::zero()));
        }
        let mut actor2 = vec![T::zero(); self.actor2.num_params()];
        self.actor2.backward(&p2.tape, &d_raw2, &mut actor2)?;

        // a2 depends on a1 through the maintenance planner's input
        let mut scratch2 = vec![T::zero(); self.actor2.num_params()];
        let d_in2 = self.actor2.backward(&p2.tape, &d_raw2_q, &mut scratch2)?;
        let mut d_raw1 = Vec::with_capacity(b * 2);
        for i in 0..b {
            let d_a1 = d_input[i * width + self.obs_dim] + d_in2[i * (self.obs_dim + 1) + self.obs_dim];
            d_raw1.extend(squashed_backward(&p1.heads[i], &p1.noise[i], &p1.samples[i], &[d_a1], alpha_b));
        }
        let mut actor1 = vec![T::zero(); self.actor1.num_params()];
        self.actor1.backward(&p1.tape, &d_raw1, &mut actor1)?;

        Ok(ActorGradients {
            loss1: loss1 / bt,
            loss2: loss2 / bt,
            actor1,
            actor2,
            log_probs: lp1.iter().zip(&lp2).map(|(a, b)| *a + *b).collect(),
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint<T> {
        let mut c = Checkpoint::new();
        c.push_mlp("actor1", &self.actor1);
        c.push_mlp("actor2", &self.actor2);
        c.push_mlp("critic1", &self.critic1);
        c.push_mlp("critic2", &self.critic2);
        c.push_mlp("target1", &self.target1);
        c.push_mlp("target2", &self.target2);
        c.push_scalar("log_alpha", self.log_alpha);
        c
    }

    /// Restores networks and temperature; optimizer moments start fresh.
    pub fn from_checkpoint(c: &Checkpoint<T>, hyper: &HyperParams) -> Result<Self> {
        let actor1 = c.mlp("actor1")?;
        let actor2 = c.mlp("actor2")?;
        let critic1 = c.mlp("critic1")?;
        let critic2 = c.mlp("critic2")?;
        let obs_dim = actor1.input_dim();
        let n = actor2.output_dim() / 2;
        if actor2.input_dim() != obs_dim + 1 || critic1.input_dim() != obs_dim + 1 + n {
            return Err(Error::Checkpoint("actor/critic dimensions do not agree".into()));
        }
        Ok(Self {
            opt_actor1: Adam::new(actor1.num_params(), T::lit(hyper.lr_actor1)),
            opt_actor2: Adam::new(actor2.num_params(), T::lit(hyper.lr_actor2)),
            opt_critic1: Adam::new(critic1.num_params(), T::lit(hyper.lr_critic)),
            opt_critic2: Adam::new(critic2.num_params(), T::lit(hyper.lr_critic)),
            target1: c.mlp("target1")?,
            target2: c.mlp("target2")?,
            actor1,
            actor2,
            critic1,
            critic2,
            log_alpha: c.scalar_value("log_alpha")?,
            obs_dim,
            n,
        })
    }
}
