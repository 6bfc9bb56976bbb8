//! Soft actor-critic: squashed-Gaussian policy, twin soft Q-functions with
//! slowly tracking targets, entropy temperature tuning and a replay buffer.
//!
//! Loss functions are exposed with their gradients so they can be checked
//! against finite differences; the `*_update` functions take one optimizer
//! step on them.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::approximator::{Adam, Mlp};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Guard inside log(1 − a² + ε) of the tanh change of variables.
pub const SQUASH_EPS: f64 = 1e-6;

/// When gradient updates run during a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateCadence {
    /// One update after every environment step once the buffer holds a batch.
    PerStep,
    /// One update at the end of every episode.
    PerEpisode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct SacConfig<T> {
    /// Discount γ.
    pub gamma: T,
    /// Soft-update rate τ.
    pub tau: T,
    pub lr_q: T,
    pub lr_pi: T,
    /// Learning rate of log β; defaults to `lr_pi` when absent.
    #[serde(default)]
    pub lr_beta: Option<T>,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Target entropy H̄; defaults to −(action dimension) when absent.
    #[serde(default)]
    pub target_entropy: Option<T>,
    pub beta_init: T,
    pub episodes: usize,
    pub hidden: Vec<usize>,
    pub cadence: UpdateCadence,
}

impl<T: Scalar> SacConfig<T> {
    pub fn table_one() -> Self {
        Self {
            gamma: T::lit(0.9),
            tau: T::lit(0.005),
            lr_q: T::lit(1e-4),
            lr_pi: T::lit(1e-4),
            lr_beta: None,
            batch_size: 64,
            buffer_capacity: 1_000_000,
            target_entropy: None,
            beta_init: T::lit(0.2),
            episodes: 4000,
            hidden: vec![128, 128],
            cadence: UpdateCadence::PerStep,
        }
    }

    pub fn lr_beta(&self) -> T {
        self.lr_beta.unwrap_or(self.lr_pi)
    }

    pub fn target_entropy(&self, action_dim: usize) -> T {
        self.target_entropy
            .unwrap_or_else(|| -T::from_usize_lossy(action_dim))
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.gamma > T::zero() && self.gamma < T::one()) {
            v.push(format!("discount must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.tau > T::zero() && self.tau <= T::one()) {
            v.push(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        for (name, lr) in [("lr_q", self.lr_q), ("lr_pi", self.lr_pi), ("lr_beta", self.lr_beta())] {
            if !(lr > T::zero() && lr.is_finite()) {
                v.push(format!("{name} must be positive, got {lr}"));
            }
        }
        if self.batch_size == 0 {
            v.push("batch size must be at least 1".into());
        }
        if self.buffer_capacity < self.batch_size {
            v.push(format!(
                "buffer capacity {} is below the batch size {}",
                self.buffer_capacity, self.batch_size
            ));
        }
        if !(self.beta_init > T::zero() && self.beta_init.is_finite()) {
            v.push(format!("beta_init must be positive, got {}", self.beta_init));
        }
        if self.hidden.contains(&0) {
            v.push("hidden layer sizes must be positive".into());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition<T> {
    pub state: Vec<T>,
    pub action: Vec<T>,
    pub reward: T,
    pub next_state: Vec<T>,
    pub done: bool,
}

/// FIFO ring of transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: Vec<Transition<T>>,
    /// Slot overwritten by the next push once full.
    cursor: usize,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay buffer capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::new(),
            cursor: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition<T>) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
            self.cursor = (self.cursor + 1) % self.capacity;
        }
    }

    /// Transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition<T>> {
        let (newer, older) = self.items.split_at(self.cursor);
        older.iter().chain(newer)
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Vec<&Transition<T>>> {
        if self.items.len() < size || size == 0 {
            return Err(Error::BufferUnderfilled {
                size: self.items.len(),
                requested: size,
            });
        }
        Ok((0..size)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput<T> {
    pub mean: Vec<T>,
    /// After clamping to [LOG_STD_MIN, LOG_STD_MAX].
    pub log_std: Vec<T>,
    pub action: Vec<T>,
    pub log_prob: T,
}

/// Standard normal noise vector.
pub fn standard_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<T> {
    (0..n)
        .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

/// tanh kept strictly inside (−1, 1); in floating point it rounds to ±1
/// once |u| is large enough.
fn open_tanh<T: Scalar>(u: T) -> T {
    let edge = T::one() - T::epsilon();
    u.tanh().max(-edge).min(edge)
}

fn half_log_two_pi<T: Scalar>() -> T {
    T::lit(0.5 * (2.0 * std::f64::consts::PI).ln())
}

/// Squashed Gaussian from raw network output `[mean; log_std]`.
fn squash<T: Scalar>(raw: &[T], noise: &[T]) -> Result<PolicyOutput<T>> {
    let n = noise.len();
    if raw.len() != 2 * n {
        return Err(Error::Dimension(format!(
            "policy output has length {}, expected {} for a {n}-dimensional action",
            raw.len(),
            2 * n
        )));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("policy network output".into()));
    }
    let mean = raw[..n].to_vec();
    let log_std: Vec<T> = raw[n..]
        .iter()
        .map(|&v| v.max(T::lit(LOG_STD_MIN)).min(T::lit(LOG_STD_MAX)))
        .collect();
    let mut action = Vec::with_capacity(n);
    let mut log_prob = T::zero();
    for k in 0..n {
        let a = open_tanh(mean[k] + log_std[k].exp() * noise[k]);
        log_prob = log_prob - T::lit(0.5) * noise[k] * noise[k] - log_std[k] - half_log_two_pi()
            - (T::one() - a * a + T::lit(SQUASH_EPS)).ln();
        action.push(a);
    }
    Ok(PolicyOutput {
        mean,
        log_std,
        action,
        log_prob,
    })
}

/// a = tanh(μ(s) + σ(s)⊙ε) with its log-density.
pub fn policy_sample<T: Scalar>(policy: &Mlp<T>, state: &[T], noise: &[T]) -> Result<PolicyOutput<T>> {
    squash(&policy.forward(state)?, noise)
}

/// Deterministic action tanh(μ(s)).
pub fn greedy_action<T: Scalar>(policy: &Mlp<T>, state: &[T]) -> Result<Vec<T>> {
    let out = policy.forward(state)?;
    let n = out.len() / 2;
    if out[..n].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("policy network output".into()));
    }
    Ok(out[..n].iter().map(|&m| open_tanh(m)).collect())
}

fn q_input<T: Scalar>(state: &[T], action: &[T]) -> Vec<T> {
    state.iter().chain(action).copied().collect()
}

pub fn q_value<T: Scalar>(q: &Mlp<T>, state: &[T], action: &[T]) -> Result<T> {
    Ok(q.forward(&q_input(state, action))?[0])
}

/// y = r + (1 − done)·γ·(min(Q′₁, Q′₂)(s′, a′) − β log π(a′|s′)), a′ drawn
/// with `noise[i]` for batch item i.
pub fn q_target<T: Scalar>(
    batch: &[&Transition<T>],
    target1: &Mlp<T>,
    target2: &Mlp<T>,
    policy: &Mlp<T>,
    beta: T,
    gamma: T,
    noise: &[Vec<T>],
) -> Result<Vec<T>> {
    if noise.len() != batch.len() {
        return Err(Error::Dimension(format!(
            "{} noise vectors for a batch of {}",
            noise.len(),
            batch.len()
        )));
    }
    batch
        .iter()
        .zip(noise)
        .map(|(t, eps)| {
            if t.done {
                return Ok(t.reward);
            }
            let next = policy_sample(policy, &t.next_state, eps)?;
            let q1 = q_value(target1, &t.next_state, &next.action)?;
            let q2 = q_value(target2, &t.next_state, &next.action)?;
            Ok(t.reward + gamma * (q1.min(q2) - beta * next.log_prob))
        })
        .collect()
}

/// ½·mean (Q(s,a) − y)² and its parameter gradient.
pub fn critic_loss<T: Scalar>(q: &Mlp<T>, batch: &[&Transition<T>], targets: &[T]) -> Result<(T, Vec<T>)> {
    if targets.len() != batch.len() || batch.is_empty() {
        return Err(Error::Dimension(format!(
            "{} targets for a batch of {}",
            targets.len(),
            batch.len()
        )));
    }
    let scale = T::one() / T::from_usize_lossy(batch.len());
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); q.params().len()];
    for (t, &y) in batch.iter().zip(targets) {
        let tape = q.forward_tape(&q_input(&t.state, &t.action))?;
        let err = tape.output()[0] - y;
        loss = loss + T::lit(0.5) * err * err * scale;
        let g = q.backward(&tape, &[err * scale])?;
        for (acc, v) in grad.iter_mut().zip(g.params) {
            *acc = *acc + v;
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("critic loss".into()));
    }
    Ok((loss, grad))
}

pub fn critic_update<T: Scalar>(
    q: &mut Mlp<T>,
    opt: &mut Adam<T>,
    batch: &[&Transition<T>],
    targets: &[T],
) -> Result<T> {
    let (loss, grad) = critic_loss(q, batch, targets)?;
    opt.step(q, &grad)?;
    Ok(loss)
}

/// Actor objective with its gradient and the per-sample log-probabilities.
#[derive(Debug, Clone)]
pub struct ActorLoss<T> {
    pub loss: T,
    pub grad: Vec<T>,
    pub log_probs: Vec<T>,
}

/// mean of β·log π(f(ε; s)|s) − min_i Q_i(s, f(ε; s)), differentiated through
/// the reparameterized action with the critics held fixed.
pub fn actor_loss<T: Scalar>(
    policy: &Mlp<T>,
    q1: &Mlp<T>,
    q2: &Mlp<T>,
    states: &[&[T]],
    noise: &[Vec<T>],
    beta: T,
) -> Result<ActorLoss<T>> {
    if noise.len() != states.len() || states.is_empty() {
        return Err(Error::Dimension(format!(
            "{} noise vectors for {} states",
            noise.len(),
            states.len()
        )));
    }
    let scale = T::one() / T::from_usize_lossy(states.len());
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); policy.params().len()];
    let mut log_probs = Vec::with_capacity(states.len());
    for (&s, eps) in states.iter().zip(noise) {
        let tape = policy.forward_tape(s)?;
        let raw = tape.output();
        let out = squash(raw, eps)?;
        let n = out.action.len();
        let input = q_input(s, &out.action);
        let t1 = q1.forward_tape(&input)?;
        let t2 = q2.forward_tape(&input)?;
        let (critic, tape_q, q_min) = if t1.output()[0] <= t2.output()[0] {
            (q1, &t1, t1.output()[0])
        } else {
            (q2, &t2, t2.output()[0])
        };
        let dq = critic.backward(tape_q, &[T::one()])?.input;
        let dq_da = &dq[s.len()..];
        loss = loss + (beta * out.log_prob - q_min) * scale;
        log_probs.push(out.log_prob);

        let mut upstream = vec![T::zero(); 2 * n];
        for k in 0..n {
            let a = out.action[k];
            let one_minus = T::one() - a * a;
            // ∂/∂a of β·(−ln(1 − a² + ε)) − Q_min.
            let dl_da = beta * T::lit(2.0) * a / (one_minus + T::lit(SQUASH_EPS)) - dq_da[k];
            let dl_du = dl_da * one_minus;
            upstream[k] = dl_du * scale;
            let raw_ls = raw[n + k];
            let inside = raw_ls >= T::lit(LOG_STD_MIN) && raw_ls <= T::lit(LOG_STD_MAX);
            if inside {
                // log π carries −log σ; u = μ + σε moves with σ.
                let dl_dls = -beta + dl_du * out.log_std[k].exp() * eps[k];
                upstream[n + k] = dl_dls * scale;
            }
        }
        let g = policy.backward(&tape, &upstream)?;
        for (acc, v) in grad.iter_mut().zip(g.params) {
            *acc = *acc + v;
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("actor loss".into()));
    }
    Ok(ActorLoss {
        loss,
        grad,
        log_probs,
    })
}

pub fn actor_update<T: Scalar>(
    policy: &mut Mlp<T>,
    opt: &mut Adam<T>,
    q1: &Mlp<T>,
    q2: &Mlp<T>,
    states: &[&[T]],
    noise: &[Vec<T>],
    beta: T,
) -> Result<ActorLoss<T>> {
    let out = actor_loss(policy, q1, q2, states, noise, beta)?;
    opt.step(policy, &out.grad)?;
    Ok(out)
}

/// mean(−β·(log π + H̄)) with β = exp(log β), and its derivative in log β.
pub fn temperature_loss<T: Scalar>(log_beta: T, log_probs: &[T], target_entropy: T) -> Result<(T, T)> {
    if log_probs.is_empty() {
        return Err(Error::Dimension("no log-probabilities for the temperature loss".into()));
    }
    let mean = log_probs
        .iter()
        .fold(T::zero(), |acc, &lp| acc + lp + target_entropy)
        / T::from_usize_lossy(log_probs.len());
    let beta = log_beta.exp();
    let loss = -beta * mean;
    if !loss.is_finite() {
        return Err(Error::NonFinite("temperature loss".into()));
    }
    Ok((loss, loss))
}

/// One optimizer step on log β; returns the new β.
pub fn temperature_update<T: Scalar>(
    log_beta: &mut T,
    opt: &mut Adam<T>,
    log_probs: &[T],
    target_entropy: T,
) -> Result<T> {
    let (_, grad) = temperature_loss(*log_beta, log_probs, target_entropy)?;
    let mut p = [*log_beta];
    opt.step_with(&mut p, &[grad], |_| "log temperature".into())?;
    *log_beta = p[0];
    Ok(log_beta.exp())
}

/// θ′ ← τθ + (1−τ)θ′.
pub fn soft_update<T: Scalar>(target: &mut Mlp<T>, source: &Mlp<T>, tau: T) -> Result<()> {
    target.soft_update_from(source, tau)
}

/// Losses of one gradient update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats<T> {
    pub critic1: T,
    pub critic2: T,
    pub actor: T,
    pub beta: T,
}

/// Networks, optimizers and temperature of one learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SacAgent<T> {
    pub config: SacConfig<T>,
    pub state_dim: usize,
    pub action_dim: usize,
    pub policy: Mlp<T>,
    pub q1: Mlp<T>,
    pub q2: Mlp<T>,
    pub q1_target: Mlp<T>,
    pub q2_target: Mlp<T>,
    pub policy_opt: Adam<T>,
    pub q1_opt: Adam<T>,
    pub q2_opt: Adam<T>,
    pub beta_opt: Adam<T>,
    pub log_beta: T,
}

impl<T: Scalar> SacAgent<T> {
    /// Fresh networks drawn from `rng`: policy, then Q₁, then Q₂. Targets
    /// start as copies.
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        config: SacConfig<T>,
        rng: &mut R,
    ) -> Result<Self> {
        let v = config.violations();
        if !v.is_empty() {
            return Err(Error::Config(v.join("; ")));
        }
        let layers = |input: usize, output: usize| -> Vec<usize> {
            std::iter::once(input)
                .chain(config.hidden.iter().copied())
                .chain(std::iter::once(output))
                .collect()
        };
        let policy = Mlp::init(&layers(state_dim, 2 * action_dim), rng)?;
        let q1 = Mlp::init(&layers(state_dim + action_dim, 1), rng)?;
        let q2 = Mlp::init(&layers(state_dim + action_dim, 1), rng)?;
        Ok(Self {
            policy_opt: Adam::for_net(config.lr_pi, &policy),
            q1_opt: Adam::for_net(config.lr_q, &q1),
            q2_opt: Adam::for_net(config.lr_q, &q2),
            beta_opt: Adam::new(config.lr_beta(), 1),
            log_beta: config.beta_init.ln(),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            policy,
            q1,
            q2,
            state_dim,
            action_dim,
            config,
        })
    }

    pub fn beta(&self) -> T {
        self.log_beta.exp()
    }

    pub fn target_entropy(&self) -> T {
        self.config.target_entropy(self.action_dim)
    }

    fn check_state(&self, state: &[T]) -> Result<()> {
        if state.len() != self.state_dim {
            return Err(Error::Dimension(format!(
                "state has length {}, agent expects {}",
                state.len(),
                self.state_dim
            )));
        }
        Ok(())
    }

    /// Stochastic action for exploration.
    pub fn act<R: Rng + ?Sized>(&self, state: &[T], rng: &mut R) -> Result<Vec<T>> {
        self.check_state(state)?;
        let eps = standard_normal(rng, self.action_dim);
        Ok(policy_sample(&self.policy, state, &eps)?.action)
    }

    pub fn act_greedy(&self, state: &[T]) -> Result<Vec<T>> {
        self.check_state(state)?;
        greedy_action(&self.policy, state)
    }

    /// One round of critic, actor, temperature and target updates on a batch
    /// drawn from `buffer`. `sample_rng` picks the batch, `noise_rng` drives
    /// the reparameterized actions.
    pub fn update<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer<T>,
        sample_rng: &mut R1,
        noise_rng: &mut R2,
    ) -> Result<UpdateStats<T>> {
        let batch = buffer.sample(self.config.batch_size, sample_rng)?;
        let beta = self.beta();
        let next_noise: Vec<Vec<T>> = (0..batch.len())
            .map(|_| standard_normal(noise_rng, self.action_dim))
            .collect();
        let y = q_target(
            &batch,
            &self.q1_target,
            &self.q2_target,
            &self.policy,
            beta,
            self.config.gamma,
            &next_noise,
        )?;
        let critic1 = critic_update(&mut self.q1, &mut self.q1_opt, &batch, &y)?;
        let critic2 = critic_update(&mut self.q2, &mut self.q2_opt, &batch, &y)?;

        let states: Vec<&[T]> = batch.iter().map(|t| t.state.as_slice()).collect();
        let noise: Vec<Vec<T>> = (0..batch.len())
            .map(|_| standard_normal(noise_rng, self.action_dim))
            .collect();
        let actor = actor_update(
            &mut self.policy,
            &mut self.policy_opt,
            &self.q1,
            &self.q2,
            &states,
            &noise,
            beta,
        )?;
        let target_entropy = self.target_entropy();
        let beta = temperature_update(&mut self.log_beta, &mut self.beta_opt, &actor.log_probs, target_entropy)?;
        soft_update(&mut self.q1_target, &self.q1, self.config.tau)?;
        soft_update(&mut self.q2_target, &self.q2, self.config.tau)?;
        Ok(UpdateStats {
            critic1,
            critic2,
            actor: actor.loss,
            beta,
        })
    }
}
