//! Run configuration, training and evaluation loops, sweeps and the files
//! they write.
//!
//! A run directory holds `config.json`, `scenario.json`, `metrics.csv` (one
//! row per finished episode, flushed as it goes), `wall_time.csv` and, once
//! training ends, `checkpoint.json`. Everything except `wall_time.csv` is a
//! function of the configuration and seed alone.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, BaselineKind};
use crate::channel::{ChannelParams, SPEED_OF_LIGHT};
use crate::env::{write_trace, Env, EpisodeSummary, RewardConfig, TraceRecord};
use crate::error::{Error, Result};
use crate::phy::PowerLimits;
use crate::rng::{stream, Purpose, StreamState};
use crate::sac::{ReplayBuffer, SacAgent, SacConfig, Transition, UpdateCadence};
use crate::scenario::{generate_topology, Scenario, ScenarioConfig, TopologyKind};
use crate::solver::SolverConfig;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Channel constants as written in a config file; noise is in dBm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub carrier_freq_hz: f64,
    #[serde(default = "default_light_speed")]
    pub light_speed: f64,
    pub env_a: f64,
    pub env_b: f64,
    pub loss_los_db: f64,
    pub loss_nlos_db: f64,
    pub noise_dbm: f64,
}

fn default_light_speed() -> f64 {
    SPEED_OF_LIGHT
}

impl ChannelConfig {
    pub fn table_one() -> Self {
        Self {
            carrier_freq_hz: 2e9,
            light_speed: SPEED_OF_LIGHT,
            env_a: 9.613,
            env_b: 0.158,
            loss_los_db: 1.0,
            loss_nlos_db: 20.0,
            noise_dbm: -95.0,
        }
    }

    pub fn params(&self) -> ChannelParams<f64> {
        ChannelParams {
            carrier_freq: self.carrier_freq_hz,
            light_speed: self.light_speed,
            env_a: self.env_a,
            env_b: self.env_b,
            loss_los_db: self.loss_los_db,
            loss_nlos_db: self.loss_nlos_db,
            noise_power: dbm_to_watts(self.noise_dbm),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub channel: ChannelConfig,
    pub limits: PowerLimits<f64>,
    pub solver: SolverConfig<f64>,
    pub sac: SacConfig<f64>,
    pub rewards: RewardConfig,
    pub eval_episodes: usize,
    /// Root of every training random stream. The topology has its own seed
    /// inside `scenario`.
    pub seed: u64,
}

impl RunConfig {
    /// The paper-scale setup.
    pub fn table_one() -> Self {
        Self {
            scenario: ScenarioConfig {
                area_side: 1000.0,
                num_users: 15,
                num_sensors: 36,
                uav_altitude: 100.0,
                v_max: 30.0,
                mission_time: 60.0,
                num_slots: 60,
                start: [0.0, 0.0],
                end: [1000.0, 1000.0],
                topology_kind: TopologyKind::Uniform,
                seed: 1,
            },
            channel: ChannelConfig::table_one(),
            limits: PowerLimits {
                p_max: 0.2,
                pb_max: 0.05,
            },
            solver: SolverConfig::with_gamma(0.015),
            sac: SacConfig::table_one(),
            rewards: RewardConfig::default(),
            eval_episodes: 20,
            seed: 0,
        }
    }

    /// Small profile that trains in minutes on one core.
    ///
    /// The area is shrunk so every point sees the sensors, and the mission
    /// ends at the centre, where the rate is near its peak. Rewards are
    /// reweighted for the shorter episode; learning rates are raised to
    /// suit the 500-episode budget.
    pub fn desk() -> Self {
        let mut c = Self::table_one();
        c.scenario = ScenarioConfig {
            area_side: 300.0,
            num_users: 4,
            num_sensors: 6,
            uav_altitude: 100.0,
            v_max: 30.0,
            mission_time: 30.0,
            num_slots: 30,
            start: [0.0, 0.0],
            end: [150.0, 150.0],
            topology_kind: TopologyKind::Uniform,
            seed: 1,
        };
        c.rewards = RewardConfig {
            lambda1: 30.0,
            lambda2: 1e-4,
            arrival_bonus: 3e5,
            rate_scale: 0.1,
        };
        c.sac.lr_q = 3e-4;
        c.sac.lr_pi = 3e-4;
        c.sac.episodes = 500;
        c.sac.buffer_capacity = 100_000;
        c
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        let v = c.violations();
        if !v.is_empty() {
            return Err(Error::Config(v.join("; ")));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = self.scenario.violations();
        v.extend(self.channel.params().violations());
        v.extend(self.limits.violations());
        v.extend(self.solver.violations());
        v.extend(self.sac.violations());
        v.extend(self.rewards.violations());
        v
    }

    pub fn scenario(&self) -> Result<Scenario> {
        generate_topology(&self.scenario)
    }

    pub fn env_for(&self, scenario: Scenario) -> Result<Env> {
        Env::new(
            scenario,
            self.channel.params(),
            self.limits,
            self.solver.clone(),
            self.rewards.clone(),
        )
    }

    pub fn env(&self) -> Result<Env> {
        self.env_for(self.scenario()?)
    }
}

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub episode_return: f64,
    pub sum_rate: f64,
    pub mse_violations: usize,
    pub fairness_satisfied: bool,
    pub arrived: bool,
    pub updates: usize,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub beta: f64,
}

/// Everything needed to resume or evaluate a trained agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub scenario: Scenario,
    pub episodes_done: usize,
    pub agent: SacAgent<f64>,
    pub rng: Vec<StreamState>,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub metrics: Vec<MetricsRow>,
    pub checkpoint: Checkpoint,
    pub out_dir: PathBuf,
}

/// Tags an error with the episode and slot it happened in.
fn at(e: Error, episode: usize, slot: usize) -> Error {
    match e {
        Error::Step { slot, source, .. } => Error::Step { episode, slot, source },
        other => Error::Step {
            episode,
            slot,
            source: Box::new(other),
        },
    }
}

#[derive(Default)]
struct LossTally {
    updates: usize,
    critic: f64,
    actor: f64,
}

/// Runs training end to end and writes the run directory.
pub fn train(config: &RunConfig, out_dir: &Path) -> Result<TrainReport> {
    let v = config.violations();
    if !v.is_empty() {
        return Err(Error::Config(v.join("; ")));
    }
    fs::create_dir_all(out_dir)?;
    let scenario = config.scenario()?;
    fs::write(out_dir.join("config.json"), serde_json::to_string_pretty(config)?)?;
    fs::write(out_dir.join("scenario.json"), scenario.to_json()?)?;

    let mut env = config.env_for(scenario.clone())?;
    let mut init_rng = stream(config.seed, Purpose::NetworkInit);
    let mut noise_rng = stream(config.seed, Purpose::PolicyNoise);
    let mut sample_rng = stream(config.seed, Purpose::BufferSampling);
    let mut agent = SacAgent::new(env.state_dim(), env.action_dim(), config.sac.clone(), &mut init_rng)?;
    let mut buffer = ReplayBuffer::new(config.sac.buffer_capacity)?;

    let mut metrics_csv = csv::Writer::from_path(out_dir.join("metrics.csv"))?;
    let mut wall = BufWriter::new(File::create(out_dir.join("wall_time.csv"))?);
    writeln!(wall, "episode,seconds")?;
    let mut metrics = Vec::with_capacity(config.sac.episodes);

    for episode in 1..=config.sac.episodes {
        let started = Instant::now();
        env.reset();
        let mut summary = EpisodeSummary::default();
        let mut tally = LossTally::default();
        let mut state = env.observation();
        loop {
            let slot = env.state().slot;
            let action = agent.act(&state, &mut noise_rng).map_err(|e| at(e, episode, slot))?;
            let out = env.step(&action).map_err(|e| at(e, episode, slot))?;
            summary.add(&out);
            let next = env.observation();
            buffer.push(Transition {
                state: std::mem::replace(&mut state, next.clone()),
                action,
                reward: out.reward,
                next_state: next,
                done: out.done,
            });
            if config.sac.cadence == UpdateCadence::PerStep && buffer.len() >= config.sac.batch_size {
                let s = agent
                    .update(&buffer, &mut sample_rng, &mut noise_rng)
                    .map_err(|e| at(e, episode, slot))?;
                tally.updates += 1;
                tally.critic += 0.5 * (s.critic1 + s.critic2);
                tally.actor += s.actor;
            }
            if out.done {
                break;
            }
        }
        if config.sac.cadence == UpdateCadence::PerEpisode && buffer.len() >= config.sac.batch_size {
            let s = agent
                .update(&buffer, &mut sample_rng, &mut noise_rng)
                .map_err(|e| at(e, episode, env.num_slots()))?;
            tally.updates += 1;
            tally.critic += 0.5 * (s.critic1 + s.critic2);
            tally.actor += s.actor;
        }
        summary.finish(&env);
        let per = |x: f64| if tally.updates > 0 { x / tally.updates as f64 } else { 0.0 };
        let row = MetricsRow {
            episode,
            episode_return: summary.episode_return,
            sum_rate: summary.sum_rate,
            mse_violations: summary.mse_violations,
            fairness_satisfied: summary.fairness_satisfied,
            arrived: summary.arrived,
            updates: tally.updates,
            critic_loss: per(tally.critic),
            actor_loss: per(tally.actor),
            beta: agent.beta(),
        };
        metrics_csv.serialize(&row)?;
        metrics_csv.flush()?;
        writeln!(wall, "{episode},{:.6}", started.elapsed().as_secs_f64())?;
        wall.flush()?;
        metrics.push(row);
    }

    let checkpoint = Checkpoint {
        config: config.clone(),
        scenario,
        episodes_done: config.sac.episodes,
        agent,
        rng: vec![
            StreamState::capture(config.seed, Purpose::PolicyNoise, &noise_rng),
            StreamState::capture(config.seed, Purpose::BufferSampling, &sample_rng),
        ],
    };
    checkpoint.save(&out_dir.join("checkpoint.json"))?;
    Ok(TrainReport {
        metrics,
        checkpoint,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Reads a `metrics.csv` back.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<MetricsRow>, _>>()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub mean_sum_rate: f64,
    pub mean_return: f64,
    pub arrival_pct: f64,
    pub fairness_pct: f64,
    pub per_episode: Vec<EpisodeSummary>,
}

impl EvalReport {
    pub fn from_summaries(per_episode: Vec<EpisodeSummary>) -> Self {
        let k = per_episode.len().max(1) as f64;
        let mean = |f: &dyn Fn(&EpisodeSummary) -> f64| per_episode.iter().map(f).sum::<f64>() / k;
        Self {
            episodes: per_episode.len(),
            mean_sum_rate: mean(&|s| s.sum_rate),
            mean_return: mean(&|s| s.episode_return),
            arrival_pct: 100.0 * mean(&|s| f64::from(u8::from(s.arrived))),
            fairness_pct: 100.0 * mean(&|s| f64::from(u8::from(s.fairness_satisfied))),
            per_episode,
        }
    }
}

/// One greedy episode, action = tanh(μ(s)).
pub fn greedy_episode(agent: &SacAgent<f64>, env: &mut Env) -> Result<(EpisodeSummary, Vec<TraceRecord>)> {
    env.reset();
    let mut summary = EpisodeSummary::default();
    let mut trace = Vec::with_capacity(env.num_slots());
    while !env.is_done() {
        let action = agent.act_greedy(&env.observation())?;
        let out = env.step(&action)?;
        summary.add(&out);
        trace.push(TraceRecord::new(&out));
    }
    summary.finish(env);
    Ok((summary, trace))
}

/// Greedy rollouts of a trained agent on `scenario`, using the checkpoint's
/// channel, power, solver and reward settings.
pub fn evaluate(
    checkpoint: &Checkpoint,
    scenario: Scenario,
    episodes: usize,
) -> Result<(EvalReport, Vec<Vec<TraceRecord>>)> {
    let mut env = checkpoint.config.env_for(scenario)?;
    if env.state_dim() != checkpoint.agent.state_dim || env.action_dim() != checkpoint.agent.action_dim {
        return Err(Error::Dimension(format!(
            "checkpoint expects {} users, scenario has {}",
            checkpoint.agent.state_dim.saturating_sub(4),
            env.num_users()
        )));
    }
    let mut summaries = Vec::with_capacity(episodes);
    let mut traces = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let (s, t) = greedy_episode(&checkpoint.agent, &mut env)?;
        summaries.push(s);
        traces.push(t);
    }
    Ok((EvalReport::from_summaries(summaries), traces))
}

/// Writes one JSONL trace file per episode into `dir`.
pub fn write_traces(dir: &Path, prefix: &str, traces: &[Vec<TraceRecord>]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, t) in traces.iter().enumerate() {
        let f = BufWriter::new(File::create(dir.join(format!("{prefix}_{:04}.jsonl", i + 1)))?);
        write_trace(f, t)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub method: String,
    pub sum_rate: f64,
}

/// Sum-rate per (Γ, method): every baseline, plus a trained and greedily
/// evaluated agent per Γ when `with_sac` is set.
pub fn sweep(config: &RunConfig, gammas: &[f64], with_sac: Option<&Path>) -> Result<Vec<SweepRow>> {
    if gammas.len() < 2 {
        return Err(Error::InvalidArgument("a sweep needs at least two MSE thresholds".into()));
    }
    let scenario = config.scenario()?;
    let mut rows = Vec::new();
    for &gamma in gammas {
        let mut c = config.clone();
        c.solver.gamma = gamma;
        let v = c.violations();
        if !v.is_empty() {
            return Err(Error::Config(v.join("; ")));
        }
        let env = c.env_for(scenario.clone())?;
        for kind in BaselineKind::ALL {
            let (s, _) = run_baseline(kind, &env)?;
            rows.push(SweepRow {
                gamma,
                method: kind.name().to_string(),
                sum_rate: s.sum_rate,
            });
        }
        if let Some(root) = with_sac {
            let report = train(&c, &root.join(format!("gamma_{gamma}")))?;
            let (eval, _) = evaluate(&report.checkpoint, scenario.clone(), c.eval_episodes)?;
            rows.push(SweepRow {
                gamma,
                method: "sac".into(),
                sum_rate: eval.mean_sum_rate,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sweep<R: std::io::Read>(r: R) -> Result<Vec<SweepRow>> {
    let mut rd = csv::Reader::from_reader(r);
    Ok(rd.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>()?)
}
