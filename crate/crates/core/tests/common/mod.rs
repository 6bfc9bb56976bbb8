//! Test-only oracles. Nothing here calls into the solver.
#![allow(dead_code)]

pub mod fd;

use rand::Rng;
use uav_aircomp::channel::{amplitude_gain, SPEED_OF_LIGHT};
use uav_aircomp::{ChannelParams, ChannelState, PowerLimits};

pub fn table_channel() -> ChannelParams {
    ChannelParams {
        carrier_freq: 2e9,
        light_speed: SPEED_OF_LIGHT,
        env_a: 9.613,
        env_b: 0.158,
        loss_los_db: 1.0,
        loss_nlos_db: 20.0,
        noise_power: 10f64.powf(-12.5),
    }
}

pub fn table_limits() -> PowerLimits {
    PowerLimits {
        p_max: 0.2,
        pb_max: 0.05,
    }
}

/// One user and `j` sensors scattered at up to 600 m horizontal range from a
/// UAV at 100 m, plus an MSE threshold drawn log-uniformly in [0.005, 0.3].
pub fn random_instance<R: Rng>(rng: &mut R, j: usize) -> (ChannelState, f64) {
    let params = table_channel();
    let amp = |rng: &mut R| {
        let r = rng.random_range(0.0..600.0);
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        amplitude_gain([0.0, 0.0, 100.0], [r * a.cos(), r * a.sin(), 0.0], &params).unwrap()
    };
    let g = amp(rng);
    let h = (0..j).map(|_| amp(rng)).collect();
    let gamma = 10f64.powf(rng.random_range(0.005f64.log10()..0.3f64.log10()));
    (
        ChannelState {
            user_amp: vec![g],
            sensor_amp: h,
            noise_power: params.noise_power,
        },
        gamma,
    )
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Best grid point found by the oracle.
#[derive(Debug, Clone)]
pub struct GridBest {
    pub rate: f64,
    pub p: f64,
    pub b: Vec<f64>,
}

fn for_each_b(levels: &[f64], j: usize, mut f: impl FnMut(&[f64])) {
    let mut idx = vec![0usize; j];
    let mut b = vec![levels[0]; j];
    loop {
        for k in 0..j {
            b[k] = levels[idx[k]];
        }
        f(&b);
        let mut k = 0;
        loop {
            if k == j {
                return;
            }
            idx[k] += 1;
            if idx[k] < levels.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn rate_bits(g2p: f64, sum_bh2: f64, sigma2: f64) -> f64 {
    (1.0 + g2p / (sum_bh2 + sigma2)).log2()
}

/// Exhaustive grid over p x b_1 x ... x b_J with η set to its MSE-minimizing
/// value at every grid point.
///
/// For fixed b both the rate and the η-minimized MSE increase with p, so the
/// best p on the grid is the largest feasible one; it is located by bisection
/// over the p grid instead of a linear scan.
pub fn grid_oracle_eta_free(
    chan: &ChannelState,
    limits: &PowerLimits,
    gamma: f64,
    points: usize,
) -> GridBest {
    let j = chan.sensor_amp.len();
    let jf = j as f64;
    let g2 = chan.user_amp[0] * chan.user_amp[0];
    let s2 = chan.noise_power;
    let ps = linspace(0.0, limits.p_max, points);
    let bs = linspace(0.0, limits.pb_max.sqrt(), points);
    let mut best = GridBest {
        rate: f64::NEG_INFINITY,
        p: 0.0,
        b: vec![],
    };
    for_each_b(&bs, j, |b| {
        let mut sx = 0.0;
        let mut sx2 = 0.0;
        for (bj, hj) in b.iter().zip(&chan.sensor_amp) {
            sx += bj * hj;
            sx2 += bj * bj * hj * hj;
        }
        let mse_at = |p: f64| {
            let den = sx2 + g2 * p + s2;
            let eta = sx / den;
            let mut acc = 0.0;
            for (bj, hj) in b.iter().zip(&chan.sensor_amp) {
                let e = eta * bj * hj - 1.0;
                acc += e * e;
            }
            (acc + eta * eta * (g2 * p + s2)) / (jf * jf)
        };
        if mse_at(0.0) > gamma {
            return;
        }
        let (mut lo, mut hi) = (0usize, points - 1);
        if mse_at(ps[hi]) <= gamma {
            lo = hi;
        } else {
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if mse_at(ps[mid]) <= gamma {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let r = rate_bits(g2 * ps[lo], sx2, s2);
        if r > best.rate {
            best = GridBest {
                rate: r,
                p: ps[lo],
                b: b.to_vec(),
            };
        }
    });
    best
}

/// Plain exhaustive version of [`grid_oracle_eta_free`] without the
/// monotone p search; used to cross-check it on small grids.
pub fn grid_oracle_eta_free_linear(
    chan: &ChannelState,
    limits: &PowerLimits,
    gamma: f64,
    points: usize,
) -> f64 {
    let j = chan.sensor_amp.len();
    let jf = j as f64;
    let g2 = chan.user_amp[0] * chan.user_amp[0];
    let s2 = chan.noise_power;
    let ps = linspace(0.0, limits.p_max, points);
    let bs = linspace(0.0, limits.pb_max.sqrt(), points);
    let mut best = f64::NEG_INFINITY;
    for_each_b(&bs, j, |b| {
        for &p in &ps {
            let mut sx = 0.0;
            let mut sx2 = 0.0;
            for (bj, hj) in b.iter().zip(&chan.sensor_amp) {
                sx += bj * hj;
                sx2 += bj * bj * hj * hj;
            }
            let eta = sx / (sx2 + g2 * p + s2);
            let mut acc = 0.0;
            for (bj, hj) in b.iter().zip(&chan.sensor_amp) {
                let e = eta * bj * hj - 1.0;
                acc += e * e;
            }
            let mse = (acc + eta * eta * (g2 * p + s2)) / (jf * jf);
            if mse <= gamma {
                best = best.max(rate_bits(g2 * p, sx2, s2));
            }
        }
    });
    best
}

/// Exhaustive grid over p x b with η held fixed.
pub fn grid_oracle_eta_fixed(
    chan: &ChannelState,
    limits: &PowerLimits,
    gamma: f64,
    eta: f64,
    points: usize,
) -> f64 {
    let j = chan.sensor_amp.len();
    let jf = j as f64;
    let g2 = chan.user_amp[0] * chan.user_amp[0];
    let s2 = chan.noise_power;
    let ps = linspace(0.0, limits.p_max, points);
    let bs = linspace(0.0, limits.pb_max.sqrt(), points);
    let mut best = f64::NEG_INFINITY;
    for_each_b(&bs, j, |b| {
        let mut mis = 0.0;
        let mut sx2 = 0.0;
        for (bj, hj) in b.iter().zip(&chan.sensor_amp) {
            let e = eta * bj * hj - 1.0;
            mis += e * e;
            sx2 += bj * bj * hj * hj;
        }
        for &p in &ps {
            let mse = (mis + eta * eta * (g2 * p + s2)) / (jf * jf);
            if mse <= gamma {
                best = best.max(rate_bits(g2 * p, sx2, s2));
            }
        }
    });
    best
}

/// The two-sensor toy instance used throughout the solver tests, with
/// σ² = 1e-8 so that Γ = 0.02 is attainable.
pub fn toy_instance() -> (ChannelState, PowerLimits, f64) {
    (
        ChannelState {
            user_amp: vec![1e-2],
            sensor_amp: vec![1e-2, 1e-2],
            noise_power: 1e-8,
        },
        table_limits(),
        0.02,
    )
}

/// Fixed-η oracle on a fine grid over b only: for each b the best p is the
/// largest one the MSE budget allows, `min(p_max, slack / (η² g²))`, because
/// the rate increases with p.
pub fn fine_oracle_eta_fixed(
    chan: &ChannelState,
    limits: &PowerLimits,
    gamma: f64,
    eta: f64,
    points: usize,
) -> f64 {
    let j = chan.sensor_amp.len();
    let jf = j as f64;
    let g2 = chan.user_amp[0] * chan.user_amp[0];
    let s2 = chan.noise_power;
    let bs = linspace(0.0, limits.pb_max.sqrt(), points);
    let mut best = f64::NEG_INFINITY;
    for_each_b(&bs, j, |b| {
        let mut mis = 0.0;
        let mut sx2 = 0.0;
        for (bj, hj) in b.iter().zip(&chan.sensor_amp) {
            let e = eta * bj * hj - 1.0;
            mis += e * e;
            sx2 += bj * bj * hj * hj;
        }
        let slack = jf * jf * gamma - mis - eta * eta * s2;
        if slack >= 0.0 {
            let p = (slack / (eta * eta * g2)).min(limits.p_max);
            best = best.max(rate_bits(g2 * p, sx2, s2));
        }
    });
    best
}
