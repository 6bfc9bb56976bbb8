//! Static network topologies and mission timing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Ground-plane point in meters.
pub type Point2 = [f64; 2];

pub fn distance2(a: Point2, b: Point2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    /// Sensors in the left 40% strip, users in the right 40% strip.
    Separated,
    /// Users and sensors share the centered square covering half of the area.
    Mixed,
    /// Everything uniform over the whole area.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub area_side: f64,
    pub num_users: usize,
    pub num_sensors: usize,
    pub uav_altitude: f64,
    pub v_max: f64,
    pub mission_time: f64,
    pub num_slots: usize,
    pub start: Point2,
    pub end: Point2,
    pub topology_kind: TopologyKind,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Slot length δ = T/N.
    pub fn slot_length(&self) -> f64 {
        self.mission_time / self.num_slots as f64
    }

    /// Largest displacement per slot, v_max·δ.
    pub fn max_step(&self) -> f64 {
        self.v_max * self.slot_length()
    }

    pub fn contains(&self, p: Point2) -> bool {
        (0.0..=self.area_side).contains(&p[0]) && (0.0..=self.area_side).contains(&p[1])
    }

    /// Fairness floor ⌊N/M⌋.
    pub fn fairness_floor(&self) -> usize {
        self.num_slots / self.num_users.max(1)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.area_side > 0.0 && self.area_side.is_finite()) {
            out.push("area_side must be positive".to_string());
        }
        if self.num_users < 1 {
            out.push("at least one user required".to_string());
        }
        if self.num_sensors < 1 {
            out.push("at least one sensor required".to_string());
        }
        if self.num_slots < 1 {
            out.push("at least one slot required".to_string());
        }
        if !(self.uav_altitude > 0.0 && self.uav_altitude.is_finite()) {
            out.push("uav_altitude must be positive".to_string());
        }
        if !(self.num_slots >= 1 && self.max_step() > 0.0 && self.max_step().is_finite()) {
            out.push("v_max * slot length must be positive".to_string());
        }
        if !self.contains(self.start) {
            out.push("start outside area".to_string());
        }
        if !self.contains(self.end) {
            out.push("destination outside area".to_string());
        }
        if self.num_slots >= 1
            && distance2(self.start, self.end) > self.num_slots as f64 * self.max_step()
        {
            out.push("destination unreachable".to_string());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub users: Vec<Point2>,
    pub sensors: Vec<Point2>,
    pub config: ScenarioConfig,
}

impl Scenario {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point2 {
        let half = self.config.area_side / 2.0;
        [half, half]
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(s)?;
        let v = validate(&sc);
        if v.is_empty() {
            Ok(sc)
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Axis-aligned sampling rectangle [x0, x1] x [y0, y1].
#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Rect {
    fn sample<R: Rng>(&self, rng: &mut R) -> Point2 {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        [
            self.x0 + (self.x1 - self.x0) * u,
            self.y0 + (self.y1 - self.y0) * v,
        ]
    }
}

fn regions(kind: TopologyKind, side: f64) -> (Rect, Rect) {
    let full = Rect {
        x0: 0.0,
        x1: side,
        y0: 0.0,
        y1: side,
    };
    match kind {
        TopologyKind::Uniform => (full, full),
        TopologyKind::Separated => (
            Rect {
                x0: 0.6 * side,
                ..full
            },
            Rect {
                x1: 0.4 * side,
                ..full
            },
        ),
        TopologyKind::Mixed => {
            let half_width = side / (2.0 * std::f64::consts::SQRT_2);
            let c = side / 2.0;
            let r = Rect {
                x0: c - half_width,
                x1: c + half_width,
                y0: c - half_width,
                y1: c + half_width,
            };
            (r, r)
        }
    }
}

/// Draws user and sensor positions for `config`.
///
/// Users are drawn first, then sensors, each point as (x, y) from the
/// topology stream of `config.seed`.
pub fn generate_topology(config: &ScenarioConfig) -> Result<Scenario> {
    let v = config.violations();
    if !v.is_empty() {
        return Err(Error::Config(v.join("; ")));
    }
    let (user_rect, sensor_rect) = regions(config.topology_kind, config.area_side);
    let mut rng = rng::stream(config.seed, Purpose::Topology);
    let users = (0..config.num_users)
        .map(|_| user_rect.sample(&mut rng))
        .collect();
    let sensors = (0..config.num_sensors)
        .map(|_| sensor_rect.sample(&mut rng))
        .collect();
    Ok(Scenario {
        users,
        sensors,
        config: config.clone(),
    })
}

/// Lists every violated invariant; empty iff the scenario is valid.
pub fn validate(scenario: &Scenario) -> Vec<String> {
    let cfg = &scenario.config;
    let mut out = cfg.violations();
    if scenario.users.len() != cfg.num_users {
        out.push(format!(
            "expected {} users, found {}",
            cfg.num_users,
            scenario.users.len()
        ));
    }
    if scenario.sensors.len() != cfg.num_sensors {
        out.push(format!(
            "expected {} sensors, found {}",
            cfg.num_sensors,
            scenario.sensors.len()
        ));
    }
    for (i, u) in scenario.users.iter().enumerate() {
        if !cfg.contains(*u) {
            out.push(format!("user {i} outside area"));
        }
    }
    for (j, s) in scenario.sensors.iter().enumerate() {
        if !cfg.contains(*s) {
            out.push(format!("sensor {j} outside area"));
        }
    }
    out
}
