//! Per-slot AirComp MSE, uplink rate and the MSE-optimal normalizing factor.
//!
//! All quantities are expectation-domain: symbols are unit-variance and
//! uncorrelated, so only channel amplitudes, powers and η enter.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct PowerLimits<T> {
    /// User peak power, watts.
    pub p_max: T,
    /// Sensor peak power, bound on b_j².
    pub pb_max: T,
}

impl<T: Scalar> PowerLimits<T> {
    pub fn sensor_amp_max(&self) -> T {
        self.pb_max.sqrt()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.p_max > T::zero()) {
            out.push("p_max must be positive".into());
        }
        if !(self.pb_max > T::zero()) {
            out.push("pb_max must be positive".into());
        }
        out
    }
}

/// One slot's control tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SlotDecision<T> {
    pub scheduled: Option<usize>,
    pub user_power: T,
    pub sensor_coeffs: Vec<T>,
    pub eta: T,
}

impl<T: Scalar> SlotDecision<T> {
    /// True when every power bound and η ≥ 0 hold, with slack `tol` on the
    /// squared sensor coefficients.
    pub fn within_limits(&self, limits: &PowerLimits<T>, tol: T) -> bool {
        self.user_power >= T::zero()
            && self.user_power <= limits.p_max
            && self.eta >= T::zero()
            && self
                .sensor_coeffs
                .iter()
                .all(|b| *b >= T::zero() && *b * *b <= limits.pb_max + tol)
    }
}

/// |g_m|² p when a user is scheduled, zero otherwise.
fn user_power_at_uav<T: Scalar>(chan: &ChannelState<T>, scheduled: Option<usize>, p: T) -> T {
    match scheduled {
        Some(m) => {
            let g = chan.user_amp[m];
            g * g * p
        }
        None => T::zero(),
    }
}

/// AirComp mean-square error of the sensor average.
pub fn aircomp_mse<T: Scalar>(chan: &ChannelState<T>, dec: &SlotDecision<T>) -> T {
    let j = T::from_usize_lossy(chan.num_sensors());
    let eta = dec.eta;
    let misalign = dec
        .sensor_coeffs
        .iter()
        .zip(&chan.sensor_amp)
        .fold(T::zero(), |acc, (&b, &h)| {
            let e = eta * b * h - T::one();
            acc + e * e
        });
    let interference = user_power_at_uav(chan, dec.scheduled, dec.user_power) + chan.noise_power;
    (misalign + eta * eta * interference) / (j * j)
}

/// Uplink rate of the scheduled user in bits/s/Hz (unit bandwidth).
///
/// η cancels between the signal and interference terms, so the ratio is
/// evaluated in its η-free form. η = 0 yields 0.
pub fn user_rate<T: Scalar>(chan: &ChannelState<T>, dec: &SlotDecision<T>) -> T {
    let Some(m) = dec.scheduled else {
        return T::zero();
    };
    if !(dec.eta > T::zero()) || !(dec.user_power > T::zero()) {
        return T::zero();
    }
    let g = chan.user_amp[m];
    let aircomp = dec
        .sensor_coeffs
        .iter()
        .zip(&chan.sensor_amp)
        .fold(T::zero(), |acc, (&b, &h)| acc + b * b * h * h);
    let sinr = g * g * dec.user_power / (aircomp + chan.noise_power);
    sinr.ln_1p() / T::lit(std::f64::consts::LN_2)
}

/// MSE-minimizing normalizing factor for fixed powers.
pub fn optimal_eta<T: Scalar>(
    chan: &ChannelState<T>,
    user_power: T,
    sensor_coeffs: &[T],
    scheduled: Option<usize>,
) -> T {
    let (num, den) = sensor_coeffs
        .iter()
        .zip(&chan.sensor_amp)
        .fold((T::zero(), T::zero()), |(n, d), (&b, &h)| {
            let x = b * h;
            (n + x, d + x * x)
        });
    if num == T::zero() {
        return T::zero();
    }
    num / (den + user_power_at_uav(chan, scheduled, user_power) + chan.noise_power)
}
