//! The trajectory and scheduling MDP.
//!
//! Each step moves the UAV, schedules one user, solves the slot's power
//! control with [`solver::solve_slot_pinned`] and pays
//! `λ₁·r^c + λ₂·r^d`. The state carries the previous slot's rate and MSE,
//! since the current slot's values are only known after acting.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::{channel_snapshot, ChannelParams};
use crate::error::{Error, Result};
use crate::phy::PowerLimits;
use crate::scenario::{distance2, validate, Point2, Scenario};
use crate::solver::{self, Pins, SlotSolution, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Arrival bonus R_f.
    pub arrival_bonus: f64,
    /// Rate entry of the state vector is R / rate_scale.
    pub rate_scale: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 0.01,
            arrival_bonus: 100.0,
            rate_scale: 1.0,
        }
    }
}

impl RewardConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            v.push("reward weights must be non-negative".into());
        }
        if !(self.arrival_bonus >= 0.0) {
            v.push("arrival bonus must be non-negative".into());
        }
        if !(self.rate_scale > 0.0 && self.rate_scale.is_finite()) {
            v.push("rate_scale must be positive".into());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpState {
    pub sched_counts: Vec<usize>,
    pub last_rate: f64,
    pub last_mse: f64,
    pub uav_xy: Point2,
    /// Slots already flown.
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub rate: f64,
    pub mse: f64,
    pub feasible: bool,
    pub scheduled: usize,
    pub raw_displacement: Point2,
    pub displacement: Point2,
    pub solution: SlotSolution<f64>,
    pub r_c: f64,
    pub r_d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: MdpState,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One line of the per-episode JSONL trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub n: usize,
    pub xy: Point2,
    pub m: usize,
    pub p: f64,
    pub b: Vec<f64>,
    pub eta: f64,
    pub rate: f64,
    pub mse: f64,
    pub r_c: f64,
    pub r_d: f64,
    pub reward: f64,
}

impl TraceRecord {
    pub fn new(outcome: &StepOutcome) -> Self {
        let d = &outcome.info.solution.decision;
        Self {
            n: outcome.next_state.slot,
            xy: outcome.next_state.uav_xy,
            m: outcome.info.scheduled,
            p: d.user_power,
            b: d.sensor_coeffs.clone(),
            eta: d.eta,
            rate: outcome.info.rate,
            mse: outcome.info.mse,
            r_c: outcome.info.r_c,
            r_d: outcome.info.r_d,
            reward: outcome.reward,
        }
    }
}

/// Writes records as JSON lines.
pub fn write_trace<W: Write>(mut w: W, records: &[TraceRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Displacement and user index from a raw action in (−1, 1)^(M+2).
///
/// The first two entries scale to meters and are projected onto the disk of
/// radius `max_step`; the user is the first maximal entry of the rest.
pub fn decode_action(raw: &[f64], max_step: f64) -> Result<(Point2, usize)> {
    if raw.len() < 3 {
        return Err(Error::Dimension(format!(
            "action has length {}, need 2 movement entries and at least one user",
            raw.len()
        )));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("action".into()));
    }
    let mut d = [raw[0] * max_step, raw[1] * max_step];
    let norm = d[0].hypot(d[1]);
    if norm > max_step {
        d = [d[0] * max_step / norm, d[1] * max_step / norm];
    }
    let mut m = 0;
    for (i, &v) in raw[2..].iter().enumerate() {
        if v > raw[2 + m] {
            m = i;
        }
    }
    Ok((d, m))
}

/// Σ_m max(0, floor − count_m) ≤ remaining.
pub fn fairness_attainable(counts: &[usize], floor: usize, remaining: usize) -> bool {
    counts.iter().map(|&c| floor.saturating_sub(c)).sum::<usize>() <= remaining
}

/// r^d for the UAV at `q` after `n` of `num_slots` slots.
pub fn trajectory_reward(q: Point2, q_f: Point2, n: usize, num_slots: usize, max_step: f64, arrival_bonus: f64) -> f64 {
    let dist = distance2(q, q_f);
    if n == num_slots && dist <= max_step {
        arrival_bonus
    } else {
        -(n as f64) * dist
    }
}

/// r^c: the slot's rate when its decision meets every constraint and the
/// fairness floor is still reachable; zero otherwise.
pub fn scheduling_reward(
    sol: &SlotSolution<f64>,
    limits: &PowerLimits<f64>,
    gamma: f64,
    fairness_ok: bool,
) -> f64 {
    let valid = sol.feasible && sol.mse <= gamma + 1e-9 && sol.decision.within_limits(limits, 1e-12);
    if valid && fairness_ok {
        sol.rate
    } else {
        0.0
    }
}

/// [counts/⌊N/M⌋; R/R_scale; MSE/Γ; x/side; y/side]. A count entry of 1
/// means that user's floor is met.
pub fn build_state_vector(state: &MdpState, scenario: &Scenario, rewards: &RewardConfig, gamma: f64) -> Vec<f64> {
    let n = scenario.config.fairness_floor().max(1) as f64;
    let side = scenario.config.area_side;
    state
        .sched_counts
        .iter()
        .map(|&c| c as f64 / n)
        .chain([
            state.last_rate / rewards.rate_scale,
            state.last_mse / gamma,
            state.uav_xy[0] / side,
            state.uav_xy[1] / side,
        ])
        .collect()
}

pub fn clamp_to_area(p: Point2, side: f64) -> Point2 {
    [p[0].clamp(0.0, side), p[1].clamp(0.0, side)]
}

/// Everything a rollout needs besides the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Env {
    pub scenario: Scenario,
    pub channel: ChannelParams<f64>,
    pub limits: PowerLimits<f64>,
    pub solver: SolverConfig<f64>,
    pub rewards: RewardConfig,
    pub pins: Pins<f64>,
    state: MdpState,
}

impl Env {
    pub fn new(
        scenario: Scenario,
        channel: ChannelParams<f64>,
        limits: PowerLimits<f64>,
        solver: SolverConfig<f64>,
        rewards: RewardConfig,
    ) -> Result<Self> {
        let v: Vec<String> = validate(&scenario)
            .into_iter()
            .chain(channel.violations())
            .chain(limits.violations())
            .chain(solver.violations())
            .chain(rewards.violations())
            .collect();
        if !v.is_empty() {
            return Err(Error::Config(v.join("; ")));
        }
        let state = Self::initial_state(&scenario);
        Ok(Self {
            scenario,
            channel,
            limits,
            solver,
            rewards,
            pins: Pins::default(),
            state,
        })
    }

    pub fn with_pins(mut self, pins: Pins<f64>) -> Self {
        self.pins = pins;
        self
    }

    fn initial_state(scenario: &Scenario) -> MdpState {
        MdpState {
            sched_counts: vec![0; scenario.num_users()],
            last_rate: 0.0,
            last_mse: 0.0,
            uav_xy: scenario.config.start,
            slot: 0,
        }
    }

    pub fn num_users(&self) -> usize {
        self.scenario.num_users()
    }

    pub fn state_dim(&self) -> usize {
        self.num_users() + 4
    }

    pub fn action_dim(&self) -> usize {
        self.num_users() + 2
    }

    pub fn num_slots(&self) -> usize {
        self.scenario.config.num_slots
    }

    pub fn max_step(&self) -> f64 {
        self.scenario.config.max_step()
    }

    pub fn state(&self) -> &MdpState {
        &self.state
    }

    pub fn reset(&mut self) -> &MdpState {
        self.state = Self::initial_state(&self.scenario);
        &self.state
    }

    pub fn observation(&self) -> Vec<f64> {
        build_state_vector(&self.state, &self.scenario, &self.rewards, self.solver.gamma)
    }

    pub fn is_done(&self) -> bool {
        self.state.slot >= self.num_slots()
    }

    /// Applies a raw policy action.
    pub fn step(&mut self, raw: &[f64]) -> Result<StepOutcome> {
        if raw.len() != self.action_dim() {
            return Err(Error::Dimension(format!(
                "action has length {}, expected {}",
                raw.len(),
                self.action_dim()
            )));
        }
        let (d, m) = decode_action(raw, self.max_step())?;
        let xy = self.state.uav_xy;
        let target = clamp_to_area([xy[0] + d[0], xy[1] + d[1]], self.scenario.config.area_side);
        self.advance(target, m, d)
    }

    /// Flies straight to `target` (which must be within one step, up to
    /// rounding) and schedules user `m`.
    pub fn step_to(&mut self, target: Point2, m: usize) -> Result<StepOutcome> {
        let xy = self.state.uav_xy;
        let d = [target[0] - xy[0], target[1] - xy[1]];
        if d[0].hypot(d[1]) > self.max_step() + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "waypoint {target:?} is more than one step from {xy:?}"
            )));
        }
        if !self.scenario.config.contains(target) {
            return Err(Error::InvalidArgument(format!("waypoint {target:?} outside area")));
        }
        self.advance(target, m, d)
    }

    fn advance(&mut self, target: Point2, m: usize, raw_d: Point2) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::InvalidArgument("episode already finished".into()));
        }
        if m >= self.num_users() {
            return Err(Error::InvalidArgument(format!("user {m} out of range")));
        }
        let n = self.state.slot;
        let wrap = |e: Error| Error::Step {
            episode: 0,
            slot: n,
            source: Box::new(e),
        };
        let cfg = &self.scenario.config;
        let uav = [target[0], target[1], cfg.uav_altitude];
        let chan = channel_snapshot(&self.scenario, uav, &self.channel).map_err(wrap)?;
        let sol = solver::solve_slot_pinned(&chan, Some(m), &self.limits, &self.solver, &self.pins, None)
            .map_err(wrap)?;

        let mut counts = self.state.sched_counts.clone();
        counts[m] += 1;
        let slots_done = n + 1;
        let fairness_ok = fairness_attainable(&counts, cfg.fairness_floor(), cfg.num_slots - slots_done);
        let r_c = scheduling_reward(&sol, &self.limits, self.solver.gamma, fairness_ok);
        let r_d = trajectory_reward(
            target,
            cfg.end,
            slots_done,
            cfg.num_slots,
            cfg.max_step(),
            self.rewards.arrival_bonus,
        );
        let reward = self.rewards.lambda1 * r_c + self.rewards.lambda2 * r_d;
        let xy = self.state.uav_xy;
        let next_state = MdpState {
            sched_counts: counts,
            last_rate: sol.rate,
            last_mse: sol.mse,
            uav_xy: target,
            slot: slots_done,
        };
        self.state = next_state.clone();
        Ok(StepOutcome {
            done: slots_done == cfg.num_slots,
            reward,
            info: StepInfo {
                rate: sol.rate,
                mse: sol.mse,
                feasible: sol.feasible,
                scheduled: m,
                raw_displacement: raw_d,
                displacement: [target[0] - xy[0], target[1] - xy[1]],
                solution: sol,
                r_c,
                r_d,
            },
            next_state,
        })
    }
}

/// Per-episode summary shared by training, evaluation and baselines.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode_return: f64,
    /// Σ_n R_n over slots whose decision meets the MSE budget.
    pub sum_rate: f64,
    pub mse_violations: usize,
    pub fairness_satisfied: bool,
    pub arrived: bool,
}

impl EpisodeSummary {
    pub fn add(&mut self, outcome: &StepOutcome) {
        self.episode_return += outcome.reward;
        if outcome.info.feasible {
            self.sum_rate += outcome.info.rate;
        } else {
            self.mse_violations += 1;
        }
    }

    /// Fills the end-of-episode flags from the environment's final state.
    pub fn finish(&mut self, env: &Env) {
        let cfg = &env.scenario.config;
        let s = env.state();
        self.fairness_satisfied = s.sched_counts.iter().all(|&c| c >= cfg.fairness_floor());
        self.arrived = distance2(s.uav_xy, cfg.end) <= cfg.max_step();
    }
}
