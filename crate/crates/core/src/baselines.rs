//! Non-learning comparison schemes.

use serde::{Deserialize, Serialize};

use crate::env::{fairness_attainable, Env, EpisodeSummary, TraceRecord};
use crate::error::{Error, Result};
use crate::scenario::{distance2, Point2};
use crate::solver::Pins;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    StraightLineNearest,
    FixedUserPower,
    FixedSensorPower,
    FixedPosition,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::StraightLineNearest,
        BaselineKind::FixedUserPower,
        BaselineKind::FixedSensorPower,
        BaselineKind::FixedPosition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::StraightLineNearest => "straight_line_nearest",
            BaselineKind::FixedUserPower => "fixed_user_power",
            BaselineKind::FixedSensorPower => "fixed_sensor_power",
            BaselineKind::FixedPosition => "fixed_position",
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = BaselineKind::ALL.iter().map(|k| k.name()).collect();
                Error::InvalidArgument(format!("unknown baseline {s:?}, expected one of {}", names.join(", ")))
            })
    }
}

/// q_o + (q_f − q_o)·n/N, landing exactly on q_f at n = N.
pub fn straight_line_waypoint(n: usize, num_slots: usize, q_o: Point2, q_f: Point2) -> Point2 {
    if n >= num_slots {
        return q_f;
    }
    let f = n as f64 / num_slots as f64;
    [q_o[0] + (q_f[0] - q_o[0]) * f, q_o[1] + (q_f[1] - q_o[1]) * f]
}

/// Closest user (ties to the lowest index) among those whose selection keeps
/// every fairness floor reachable in the `remaining` slots after this one.
/// When no choice keeps it reachable, the closest user overall.
pub fn nearest_user(uav_xy: Point2, users: &[Point2], counts: &[usize], floor: usize, remaining: usize) -> usize {
    let keeps_fair = |m: usize| {
        let mut c = counts.to_vec();
        c[m] += 1;
        fairness_attainable(&c, floor, remaining)
    };
    let closest = |allowed: &dyn Fn(usize) -> bool| {
        let mut best: Option<(usize, f64)> = None;
        for (m, &u) in users.iter().enumerate() {
            if !allowed(m) {
                continue;
            }
            let d = distance2(uav_xy, u);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((m, d));
            }
        }
        best.map(|(m, _)| m)
    };
    closest(&keeps_fair).or_else(|| closest(&|_| true)).unwrap_or(0)
}

/// Runs one episode of `kind` on a copy of `env`.
///
/// Power pins apply on the straight-line trajectory with nearest-user
/// scheduling. The fixed-position scheme hovers at the area centroid for the
/// whole mission, treated as both its start and end point.
pub fn run_baseline(kind: BaselineKind, env: &Env) -> Result<(EpisodeSummary, Vec<TraceRecord>)> {
    let mut env = env.clone();
    match kind {
        BaselineKind::StraightLineNearest => {}
        BaselineKind::FixedUserPower => {
            env.pins = Pins {
                user_power: Some(env.limits.p_max),
                sensor_coeff: None,
            };
        }
        BaselineKind::FixedSensorPower => {
            env.pins = Pins {
                user_power: None,
                sensor_coeff: Some(env.limits.sensor_amp_max()),
            };
        }
        BaselineKind::FixedPosition => {
            let c = env.scenario.centroid();
            env.scenario.config.start = c;
            env.scenario.config.end = c;
        }
    }
    env.reset();
    let cfg = env.scenario.config.clone();
    let mut summary = EpisodeSummary::default();
    let mut trace = Vec::with_capacity(cfg.num_slots);
    for n in 1..=cfg.num_slots {
        let target = straight_line_waypoint(n, cfg.num_slots, cfg.start, cfg.end);
        let m = nearest_user(
            target,
            &env.scenario.users,
            &env.state().sched_counts,
            cfg.fairness_floor(),
            cfg.num_slots - n,
        );
        let out = env.step_to(target, m)?;
        summary.add(&out);
        trace.push(TraceRecord::new(&out));
    }
    summary.finish(&env);
    Ok((summary, trace))
}
