//! Probabilistic line-of-sight air-to-ground channel.
//!
//! Gains are stored as linear *amplitudes* `10^(-G/20)`; their squares are
//! the power gains that enter the MSE and rate expressions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scenario::Scenario;

/// Point in meters, z up.
pub type Point3<T> = [T; 3];

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ChannelParams<T> {
    pub carrier_freq: T,
    pub light_speed: T,
    pub env_a: T,
    pub env_b: T,
    pub loss_los_db: T,
    pub loss_nlos_db: T,
    /// Noise power σ² in watts.
    pub noise_power: T,
}

impl<T: Scalar> ChannelParams<T> {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let z = T::zero();
        if !(self.carrier_freq > z) {
            out.push("carrier_freq must be positive".into());
        }
        if !(self.light_speed > z) {
            out.push("light_speed must be positive".into());
        }
        if !(self.env_a > z && self.env_b > z) {
            out.push("environment constants A, B must be positive".into());
        }
        if !(self.loss_nlos_db >= self.loss_los_db && self.loss_los_db >= z) {
            out.push("need 0 <= loss_los_db <= loss_nlos_db".into());
        }
        if !(self.noise_power > z) {
            out.push("noise_power must be positive".into());
        }
        out
    }
}

/// Per-slot channel amplitudes toward the UAV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ChannelState<T> {
    /// g_m, one per user.
    pub user_amp: Vec<T>,
    /// h_j, one per sensor.
    pub sensor_amp: Vec<T>,
    pub noise_power: T,
}

impl<T: Scalar> ChannelState<T> {
    pub fn num_sensors(&self) -> usize {
        self.sensor_amp.len()
    }

    pub fn is_valid(&self) -> bool {
        let ok = |x: &T| x.is_finite() && *x > T::zero();
        self.user_amp.iter().all(ok) && self.sensor_amp.iter().all(ok) && ok(&self.noise_power)
    }
}

fn distance<T: Scalar>(a: Point3<T>, b: Point3<T>) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn checked_distance<T: Scalar>(uav: Point3<T>, ground: Point3<T>) -> Result<T> {
    let d = distance(uav, ground);
    if !(d > T::zero()) || !d.is_finite() {
        return Err(Error::Geometry(format!(
            "UAV and ground device coincide or are non-finite (distance {d})"
        )));
    }
    Ok(d)
}

/// LoS probability from the elevation angle in degrees.
pub fn los_probability<T: Scalar>(
    uav: Point3<T>,
    ground: Point3<T>,
    params: &ChannelParams<T>,
) -> Result<T> {
    let d = checked_distance(uav, ground)?;
    let rel_height = uav[2] - ground[2];
    let ratio = (rel_height / d).max(-T::one()).min(T::one());
    let elevation_deg = ratio.asin().to_degrees();
    let a = params.env_a;
    let b = params.env_b;
    Ok(T::one() / (T::one() + a * (-(b * (elevation_deg - a))).exp()))
}

/// Mean path loss in dB: free-space term plus the LoS/NLoS-weighted excess.
pub fn path_loss_db<T: Scalar>(
    uav: Point3<T>,
    ground: Point3<T>,
    params: &ChannelParams<T>,
) -> Result<T> {
    let d = checked_distance(uav, ground)?;
    let p_los = los_probability(uav, ground, params)?;
    let four_pi = T::lit(4.0 * std::f64::consts::PI);
    let free_space = T::lit(20.0) * (four_pi * params.carrier_freq / params.light_speed * d).log10();
    Ok(free_space + p_los * params.loss_los_db + (T::one() - p_los) * params.loss_nlos_db)
}

pub fn db_to_amplitude<T: Scalar>(loss_db: T) -> T {
    T::lit(10.0).powf(-loss_db / T::lit(20.0))
}

pub fn amplitude_gain<T: Scalar>(
    uav: Point3<T>,
    ground: Point3<T>,
    params: &ChannelParams<T>,
) -> Result<T> {
    path_loss_db(uav, ground, params).map(db_to_amplitude)
}

/// Amplitudes from a UAV at `uav` to every user and sensor of `scenario`.
pub fn channel_snapshot<T: Scalar>(
    scenario: &Scenario,
    uav: Point3<T>,
    params: &ChannelParams<T>,
) -> Result<ChannelState<T>> {
    let ground = |p: &[f64; 2]| [T::lit(p[0]), T::lit(p[1]), T::zero()];
    let user_amp = scenario
        .users
        .iter()
        .map(|u| amplitude_gain(uav, ground(u), params))
        .collect::<Result<Vec<_>>>()?;
    let sensor_amp = scenario
        .sensors
        .iter()
        .map(|s| amplitude_gain(uav, ground(s), params))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelState {
        user_amp,
        sensor_amp,
        noise_power: params.noise_power,
    })
}
