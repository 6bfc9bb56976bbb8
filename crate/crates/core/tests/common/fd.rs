//! Finite-difference checks for the SAC losses on tiny random networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uav_aircomp::sac::{actor_loss, critic_loss, standard_normal, temperature_loss};
use uav_aircomp::{Mlp, Transition};

pub const S: usize = 3;
pub const A: usize = 2;

/// Central differences of `f` around `params`, step scaled per entry.
pub fn central_diff(params: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let h = 1e-6 * p[i].abs().max(1e-2);
            let x = p[i];
            p[i] = x + h;
            let up = f(&p);
            p[i] = x - h;
            let down = f(&p);
            p[i] = x;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// max |a − n| over max(|a|, |n|), both taken over the whole vector.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic.iter().chain(numeric).fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = analytic.iter().zip(numeric).fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    diff / scale.max(1e-300)
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> Vec<Transition> {
    (0..n)
        .map(|_| Transition {
            state: (0..S).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action: (0..A).map(|_| rng.random_range(-0.9..0.9)).collect(),
            reward: rng.random_range(-1.0..1.0),
            next_state: (0..S).map(|_| rng.random_range(-1.0..1.0)).collect(),
            done: rng.random_bool(0.2),
        })
        .collect()
}

/// Network with every parameter, biases included, uniform in (−1, 1).
/// Zero biases would park a dead layer's successors exactly on the ReLU kink.
fn random_net(sizes: &[usize], rng: &mut ChaCha8Rng) -> Mlp {
    let n = Mlp::zeros(sizes).unwrap().params().len();
    Mlp::from_params(sizes, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Policy and two critics with two hidden units per layer.
fn nets(rng: &mut ChaCha8Rng) -> (Mlp, Mlp, Mlp) {
    let policy = random_net(&[S, 2, 2, 2 * A], rng);
    let q1 = random_net(&[S + A, 2, 2, 1], rng);
    let q2 = random_net(&[S + A, 2, 2, 1], rng);
    (policy, q1, q2)
}

pub fn critic_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, q, _) = nets(&mut rng);
    let batch = random_batch(&mut rng, 8);
    let refs: Vec<&Transition> = batch.iter().collect();
    let targets: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
    let (_, grad) = critic_loss(&q, &refs, &targets).unwrap();
    let fd = central_diff(q.params(), |p| {
        let net = Mlp::from_params(q.sizes(), p.to_vec()).unwrap();
        critic_loss(&net, &refs, &targets).unwrap().0
    });
    max_rel_err(&grad, &fd)
}

pub fn actor_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let (policy, q1, q2) = nets(&mut rng);
    let states: Vec<Vec<f64>> = (0..8).map(|_| (0..S).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
    let noise: Vec<Vec<f64>> = (0..8).map(|_| standard_normal(&mut rng, A)).collect();
    let beta = rng.random_range(0.05..1.0);
    let out = actor_loss(&policy, &q1, &q2, &refs, &noise, beta).unwrap();
    let fd = central_diff(policy.params(), |p| {
        let net = Mlp::from_params(policy.sizes(), p.to_vec()).unwrap();
        actor_loss(&net, &q1, &q2, &refs, &noise, beta).unwrap().loss
    });
    max_rel_err(&out.grad, &fd)
}

pub fn temperature_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
    let log_probs: Vec<f64> = (0..16).map(|_| rng.random_range(-6.0..3.0)).collect();
    let log_beta = rng.random_range(-4.0..1.0);
    let target = -(A as f64);
    let (_, g) = temperature_loss(log_beta, &log_probs, target).unwrap();
    let fd = central_diff(&[log_beta], |p| temperature_loss(p[0], &log_probs, target).unwrap().0);
    max_rel_err(&[g], &fd)
}
