//! Per-slot alternating optimization of user power, sensor coefficients and
//! the receive normalizing factor.
//!
//! The outer loop alternates a transmission subproblem at fixed η with the
//! closed-form MSE-optimal η. The transmission subproblem maximizes
//! `ln(η²g²p + Ψ) − tΨ + ln t + 1` over (p, b, Ψ) for fixed t and refreshes
//! `t = 1/Ψ` until (p, b) settle.
//!
//! Inside, everything is expressed in receive-side amplitudes
//! `x_j = η b_j h_j` and `u = η² g² p`. With t fixed, the best (u, Ψ) for a
//! given x is closed-form, and the objective depends on x only through
//! `Σ(x_j − 1)²` and `Σx_j²`, decreasing in both. Every Pareto-minimal x is a
//! clip `x_j = clamp(w, lo_j, hi_j)` of a common level w ∈ [0, 1], and between
//! consecutive clip breakpoints x is affine in w, so the concave objective is
//! concave on each piece and a golden-section search per piece is exact.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::phy::{aircomp_mse, optimal_eta, user_rate, PowerLimits, SlotDecision};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct SolverConfig<T> {
    /// MSE threshold Γ.
    pub gamma: T,
    /// Convergence accuracy ξ.
    pub tol: T,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Iteration cap of the one-dimensional searches inside the
    /// transmission subproblem.
    #[serde(alias = "max_pgd_steps")]
    pub max_line_search_steps: usize,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn with_gamma(gamma: T) -> Self {
        Self {
            gamma,
            tol: T::lit(1e-3),
            max_outer: 50,
            max_inner: 50,
            max_line_search_steps: 200,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.gamma > T::zero()) {
            out.push("gamma must be positive".into());
        }
        if !(self.tol > T::zero()) {
            out.push("tol must be positive".into());
        }
        if self.max_outer < 1 || self.max_inner < 1 || self.max_line_search_steps < 1 {
            out.push("iteration caps must be at least 1".into());
        }
        out
    }
}

/// Optional fixed transmit settings, used by the ablation baselines.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Pins<T> {
    pub user_power: Option<T>,
    pub sensor_coeff: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SlotSolution<T> {
    pub decision: SlotDecision<T>,
    pub rate: T,
    pub mse: T,
    pub feasible: bool,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility<T> {
    pub feasible: bool,
    pub min_mse: T,
    /// Minimizer of the MSE with the user at its lowest allowed power.
    pub eta: T,
    pub sensor_coeffs: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transmission<T> {
    pub user_power: T,
    pub sensor_coeffs: Vec<T>,
    pub psi: T,
    pub t: T,
    /// Subproblem objective at the returned point.
    pub objective: T,
    pub feasible: bool,
    pub iterations: usize,
    /// Objective after each t-refresh.
    pub objective_trace: Vec<T>,
}

/// Closed-form auxiliary update t = 1/Ψ.
pub fn update_t<T: Scalar>(psi: T) -> Result<T> {
    if !(psi > T::zero()) || !psi.is_finite() {
        return Err(Error::InvalidArgument(format!("psi must be positive, got {psi}")));
    }
    Ok(T::one() / psi)
}

/// Power bounds of one slot after applying pins.
#[derive(Debug, Clone, Copy)]
struct Bounds<T> {
    p_lo: T,
    p_hi: T,
    b_lo: T,
    b_hi: T,
}

impl<T: Scalar> Bounds<T> {
    fn new(limits: &PowerLimits<T>, pins: &Pins<T>) -> Self {
        let b_max = limits.sensor_amp_max();
        let (p_lo, p_hi) = match pins.user_power {
            Some(p) => {
                let p = p.max(T::zero()).min(limits.p_max);
                (p, p)
            }
            None => (T::zero(), limits.p_max),
        };
        let (b_lo, b_hi) = match pins.sensor_coeff {
            Some(b) => {
                let b = b.max(T::zero()).min(b_max);
                (b, b)
            }
            None => (T::zero(), b_max),
        };
        Self {
            p_lo,
            p_hi,
            b_lo,
            b_hi,
        }
    }
}

fn user_gain_sq<T: Scalar>(chan: &ChannelState<T>, scheduled: Option<usize>) -> T {
    scheduled.map_or(T::zero(), |m| chan.user_amp[m] * chan.user_amp[m])
}

fn clamp<T: Scalar>(x: T, lo: T, hi: T) -> T {
    x.max(lo).min(hi)
}

/// Minimizes `Σ_j dist(1, [a_j η, c_j η])² + K η²` over η ≥ 0.
///
/// Each summand is a squared distance to a ray-scaled interval, convex in η,
/// and quadratic between the breakpoints 1/c_j and 1/a_j; the minimum is
/// found exactly piece by piece.
fn min_misalignment<T: Scalar>(a: &[T], c: &[T], k: T) -> (T, T) {
    let eval = |eta: T| -> T {
        a.iter().zip(c).fold(k * eta * eta, |acc, (&aj, &cj)| {
            let lo = aj * eta;
            let hi = cj * eta;
            let d = if hi < T::one() {
                T::one() - hi
            } else if lo > T::one() {
                lo - T::one()
            } else {
                T::zero()
            };
            acc + d * d
        })
    };
    let mut knots: Vec<T> = vec![T::zero()];
    for (&aj, &cj) in a.iter().zip(c) {
        if cj > T::zero() {
            knots.push(T::one() / cj);
        }
        if aj > T::zero() {
            knots.push(T::one() / aj);
        }
    }
    knots.sort_by(|x, y| x.partial_cmp(y).expect("finite knots"));
    knots.dedup();
    let mut best = (T::zero(), eval(T::zero()));
    for (i, &left) in knots.iter().enumerate() {
        let right = knots.get(i + 1).copied();
        let probe = match right {
            Some(r) => (left + r) / T::lit(2.0),
            None => left + T::one(),
        };
        let (mut alpha, mut beta) = (k, T::zero());
        for (&aj, &cj) in a.iter().zip(c) {
            if cj * probe < T::one() {
                alpha = alpha + cj * cj;
                beta = beta + cj;
            } else if aj * probe > T::one() {
                alpha = alpha + aj * aj;
                beta = beta + aj;
            }
        }
        let mut eta = if alpha > T::zero() { beta / alpha } else { left };
        eta = eta.max(left);
        if let Some(r) = right {
            eta = eta.min(r);
        }
        let val = eval(eta);
        if val < best.1 {
            best = (eta, val);
        }
    }
    best
}

fn feasibility_with_bounds<T: Scalar>(
    chan: &ChannelState<T>,
    scheduled: Option<usize>,
    bounds: &Bounds<T>,
    gamma: T,
) -> Feasibility<T> {
    let j = T::from_usize_lossy(chan.num_sensors());
    let a: Vec<T> = chan.sensor_amp.iter().map(|&h| bounds.b_lo * h).collect();
    let c: Vec<T> = chan.sensor_amp.iter().map(|&h| bounds.b_hi * h).collect();
    let k = user_gain_sq(chan, scheduled) * bounds.p_lo + chan.noise_power;
    let (eta, val) = min_misalignment(&a, &c, k);
    let sensor_coeffs = chan
        .sensor_amp
        .iter()
        .map(|&h| {
            if eta > T::zero() {
                clamp(T::one() / (eta * h), bounds.b_lo, bounds.b_hi)
            } else {
                bounds.b_hi
            }
        })
        .collect();
    let min_mse = val / (j * j);
    Feasibility {
        feasible: min_mse <= gamma,
        min_mse,
        eta,
        sensor_coeffs,
    }
}

/// Smallest MSE reachable with the user silent, and whether it meets Γ.
///
/// A silent user is MSE-optimal because its interference term is
/// non-negative.
pub fn check_feasibility<T: Scalar>(
    chan: &ChannelState<T>,
    scheduled: Option<usize>,
    limits: &PowerLimits<T>,
    gamma: T,
) -> Feasibility<T> {
    feasibility_with_bounds(chan, scheduled, &Bounds::new(limits, &Pins::default()), gamma)
}

/// The transmission subproblem at fixed η and fixed t, in scaled variables.
struct Subproblem<'a, T> {
    lo: Vec<T>,
    hi: Vec<T>,
    /// η²σ².
    noise: T,
    /// J²Γ.
    budget: T,
    u_lo: T,
    u_hi: T,
    steps: usize,
    chan: &'a ChannelState<T>,
    eta: T,
    gain_sq: T,
    bounds: Bounds<T>,
}

/// Point of the scaled subproblem.
#[derive(Debug, Clone)]
struct Scaled<T> {
    x: Vec<T>,
    u: T,
    psi: T,
    value: T,
}

impl<'a, T: Scalar> Subproblem<'a, T> {
    fn new(
        chan: &'a ChannelState<T>,
        scheduled: Option<usize>,
        eta: T,
        bounds: Bounds<T>,
        gamma: T,
        steps: usize,
    ) -> Self {
        let j = T::from_usize_lossy(chan.num_sensors());
        let gain_sq = user_gain_sq(chan, scheduled);
        let eg = eta * eta * gain_sq;
        Self {
            lo: chan.sensor_amp.iter().map(|&h| eta * bounds.b_lo * h).collect(),
            hi: chan.sensor_amp.iter().map(|&h| eta * bounds.b_hi * h).collect(),
            noise: eta * eta * chan.noise_power,
            budget: j * j * gamma,
            u_lo: eg * bounds.p_lo,
            u_hi: eg * bounds.p_hi,
            steps,
            chan,
            eta,
            gain_sq,
            bounds,
        }
    }

    fn clip(&self, w: T) -> Vec<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| clamp(w, l, h))
            .collect()
    }

    fn misalignment(x: &[T]) -> T {
        x.iter().fold(T::zero(), |acc, &v| acc + (v - T::one()) * (v - T::one()))
    }

    fn interference(&self, x: &[T]) -> T {
        x.iter().fold(self.noise, |acc, &v| acc + v * v)
    }

    /// Remaining budget for the user term at x.
    fn slack(&self, x: &[T]) -> T {
        self.budget - self.noise - Self::misalignment(x)
    }

    fn slack_tolerance(&self) -> T {
        T::lit(64.0) * T::epsilon() * self.budget
    }

    fn feasible_at(&self, x: &[T]) -> bool {
        self.slack(x) >= self.u_lo - self.slack_tolerance()
    }

    fn mse_minimizer(&self) -> Vec<T> {
        self.clip(T::one())
    }

    /// Best (u, Ψ) for x at fixed t, and the resulting objective.
    fn evaluate(&self, x: Vec<T>, t: T) -> Scaled<T> {
        let slack = self.slack(&x);
        let u = clamp(slack, self.u_lo, self.u_hi).max(self.u_lo);
        let floor = self.interference(&x);
        let psi = floor.max(T::one() / t - u);
        // ln(u + Ψ) − tΨ + ln t + 1, grouped to avoid cancellation.
        let value = (t * (u + psi)).ln() + (T::one() - t * psi);
        Scaled { x, u, psi, value }
    }

    /// Lowest clip level whose point is still feasible.
    fn lowest_feasible_level(&self) -> T {
        if self.feasible_at(&self.clip(T::zero())) {
            return T::zero();
        }
        let (mut lo, mut hi) = (T::zero(), T::one());
        for _ in 0..self.steps.max(80) {
            let mid = (lo + hi) / T::lit(2.0);
            if self.feasible_at(&self.clip(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= T::epsilon() {
                break;
            }
        }
        hi
    }

    /// Maximizes the subproblem objective over the clip curve for fixed t.
    ///
    /// Where Ψ sits above its lower bound the objective is flat in x; ties
    /// (within a few ulps of the objective) go to the lowest clip level, the
    /// least-interference maximizer.
    fn maximize(&self, t: T) -> Scaled<T> {
        let knots = self.knots();
        let w_min = knots[0];
        let tie = |v: T| T::lit(1e3) * T::epsilon() * (T::one() + v.abs());
        let better = |cand: &Scaled<T>, inc: &Scaled<T>| cand.value > inc.value + tie(inc.value);
        let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
        // (clip level, point) pairs, left to right.
        let mut candidates = Vec::with_capacity(4 * knots.len());
        for seg in knots.windows(2) {
            let (mut a, mut b) = (seg[0], seg[1]);
            let mut c = b - inv_phi * (b - a);
            let mut d = a + inv_phi * (b - a);
            let mut fc = self.evaluate(self.clip(c), t);
            let mut fd = self.evaluate(self.clip(d), t);
            for _ in 0..self.steps {
                if b - a <= T::lit(16.0) * T::epsilon() {
                    break;
                }
                if !better(&fd, &fc) {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - inv_phi * (b - a);
                    fc = self.evaluate(self.clip(c), t);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + inv_phi * (b - a);
                    fd = self.evaluate(self.clip(d), t);
                }
            }
            candidates.push((seg[0], self.evaluate(self.clip(seg[0]), t)));
            candidates.push((c, fc));
            candidates.push((d, fd));
            candidates.push((seg[1], self.evaluate(self.clip(seg[1]), t)));
        }
        if candidates.is_empty() {
            return self.evaluate(self.clip(w_min), t);
        }
        let top = candidates
            .iter()
            .map(|(_, p)| p.value)
            .fold(T::neg_infinity(), T::max);
        let margin = T::lit(16.0) * tie(top);
        candidates
            .into_iter()
            .filter(|(_, p)| p.value >= top - margin)
            .min_by(|x, y| x.0.partial_cmp(&y.0).expect("finite levels"))
            .map(|(_, p)| p)
            .expect("non-empty candidate set")
    }

    /// Clip-curve knots from the lowest feasible level up to 1.
    fn knots(&self) -> Vec<T> {
        let w_min = self.lowest_feasible_level();
        let mut knots = vec![w_min, T::one()];
        for &v in self.lo.iter().chain(&self.hi) {
            if v > w_min && v < T::one() {
                knots.push(v);
            }
        }
        knots.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
        knots.dedup();
        knots
    }

    /// Signal-to-interference ratio u/I at clip level w.
    fn ratio(&self, w: T) -> T {
        let x = self.clip(w);
        let u = clamp(self.slack(&x), self.u_lo, self.u_hi).max(self.u_lo);
        u / self.interference(&x)
    }

    /// Clip level with the largest true ratio: a coarse scan of every
    /// segment refined by golden section around the best sample.
    fn best_ratio_level(&self) -> T {
        const SAMPLES: usize = 24;
        let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
        let mut best = (T::neg_infinity(), T::one());
        for seg in self.knots().windows(2) {
            let (lo, hi) = (seg[0], seg[1]);
            let step = (hi - lo) / T::from_usize_lossy(SAMPLES);
            let mut k_best = 0;
            let mut v_best = T::neg_infinity();
            for k in 0..=SAMPLES {
                let v = self.ratio(lo + step * T::from_usize_lossy(k));
                if v > v_best {
                    v_best = v;
                    k_best = k;
                }
            }
            let mut a = lo + step * T::from_usize_lossy(k_best.saturating_sub(1));
            let mut b = (lo + step * T::from_usize_lossy(k_best + 1)).min(hi);
            let mut c = b - inv_phi * (b - a);
            let mut d = a + inv_phi * (b - a);
            let (mut fc, mut fd) = (self.ratio(c), self.ratio(d));
            for _ in 0..self.steps {
                if b - a <= T::lit(16.0) * T::epsilon() {
                    break;
                }
                if fc >= fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - inv_phi * (b - a);
                    fc = self.ratio(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + inv_phi * (b - a);
                    fd = self.ratio(d);
                }
            }
            for (w, v) in [(lo + step * T::from_usize_lossy(k_best), v_best), (c, fc), (d, fd)] {
                if v > best.0 || (v == best.0 && w < best.1) {
                    best = (v, w);
                }
            }
        }
        best.1
    }

    fn user_power(&self, u: T) -> T {
        let eg = self.eta * self.eta * self.gain_sq;
        if eg > T::zero() {
            clamp(u / eg, self.bounds.p_lo, self.bounds.p_hi)
        } else {
            self.bounds.p_lo
        }
    }

    fn sensor_coeffs(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(&self.chan.sensor_amp)
            .map(|(&v, &h)| clamp(v / (self.eta * h), self.bounds.b_lo, self.bounds.b_hi))
            .collect()
    }
}

fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

fn transmission_with_bounds<T: Scalar>(
    chan: &ChannelState<T>,
    scheduled: Option<usize>,
    eta: T,
    bounds: Bounds<T>,
    cfg: &SolverConfig<T>,
) -> Result<Transmission<T>> {
    if !(eta > T::zero()) || !eta.is_finite() {
        return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    let sub = Subproblem::new(chan, scheduled, eta, bounds, cfg.gamma, cfg.max_line_search_steps);
    let x0 = sub.mse_minimizer();
    if !sub.feasible_at(&x0) {
        let psi = sub.interference(&x0);
        return Ok(Transmission {
            user_power: bounds.p_lo,
            sensor_coeffs: sub.sensor_coeffs(&x0),
            psi,
            t: T::one() / psi,
            objective: T::neg_infinity(),
            feasible: false,
            iterations: 0,
            objective_trace: Vec::new(),
        });
    }

    // The t-alternation only reaches a stationary point of the rate, and the
    // rate along the clip curve can have several. It runs once from the user
    // at its floor with full sensor amplitudes and once from the best point
    // of a direct scan of the curve; the better end point wins.
    let x_full: Vec<T> = chan.sensor_amp.iter().map(|&h| eta * bounds.b_hi * h).collect();
    let from_full = alternate_t(&sub, bounds.p_lo, vec![bounds.b_hi; chan.num_sensors()], &x_full, cfg)?;
    let x_scan = sub.clip(sub.best_ratio_level());
    let u_scan = clamp(sub.slack(&x_scan), sub.u_lo, sub.u_hi).max(sub.u_lo);
    let from_scan = alternate_t(&sub, sub.user_power(u_scan), sub.sensor_coeffs(&x_scan), &x_scan, cfg)?;
    let rate_of = |tr: &Transmission<T>| {
        user_rate(chan, &decision(scheduled, tr.user_power, tr.sensor_coeffs.clone(), eta))
    };
    let best = if rate_of(&from_scan) > rate_of(&from_full) {
        from_scan
    } else {
        from_full
    };
    Ok(best)
}

fn alternate_t<T: Scalar>(
    sub: &Subproblem<'_, T>,
    p0: T,
    b0: Vec<T>,
    x0: &[T],
    cfg: &SolverConfig<T>,
) -> Result<Transmission<T>> {
    let mut p = p0;
    let mut b = b0;
    let mut psi = sub.interference(x0);
    let mut t = update_t(psi)?;
    let mut objective = T::neg_infinity();
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..cfg.max_inner {
        iterations += 1;
        t = update_t(psi)?;
        let best = sub.maximize(t);
        let p_new = sub.user_power(best.u);
        let b_new = sub.sensor_coeffs(&best.x);
        // Ψ can keep shrinking while (p, b) sit still, so it joins the test.
        let delta = (p_new - p)
            .abs()
            .max(max_abs_diff(&b_new, &b))
            .max((best.psi - psi).abs() / psi);
        p = p_new;
        b = b_new;
        psi = best.psi;
        objective = best.value;
        trace.push(objective);
        if delta <= cfg.tol {
            break;
        }
    }
    Ok(Transmission {
        user_power: p,
        sensor_coeffs: b,
        psi,
        t,
        objective,
        feasible: true,
        iterations,
        objective_trace: trace,
    })
}

/// Maximizes the scheduled user's rate over (p, b) at fixed η by alternating
/// the t-update with the (p, b, Ψ) subproblem.
///
/// When no (p, b) meets Γ at this η, returns the user at zero power and the
/// MSE-minimizing coefficients, flagged infeasible.
pub fn solve_transmission<T: Scalar>(
    chan: &ChannelState<T>,
    scheduled: Option<usize>,
    eta: T,
    limits: &PowerLimits<T>,
    cfg: &SolverConfig<T>,
) -> Result<Transmission<T>> {
    transmission_with_bounds(chan, scheduled, eta, Bounds::new(limits, &Pins::default()), cfg)
}

fn decision<T: Scalar>(scheduled: Option<usize>, p: T, b: Vec<T>, eta: T) -> SlotDecision<T> {
    SlotDecision {
        scheduled,
        user_power: p,
        sensor_coeffs: b,
        eta,
    }
}

fn finish<T: Scalar>(
    chan: &ChannelState<T>,
    dec: SlotDecision<T>,
    feasible: bool,
    outer: usize,
    inner: usize,
) -> SlotSolution<T> {
    SlotSolution {
        rate: user_rate(chan, &dec),
        mse: aircomp_mse(chan, &dec),
        decision: dec,
        feasible,
        outer_iterations: outer,
        inner_iterations: inner,
    }
}

fn validate_inputs<T: Scalar>(
    chan: &ChannelState<T>,
    scheduled: Option<usize>,
    limits: &PowerLimits<T>,
    cfg: &SolverConfig<T>,
) -> Result<()> {
    if chan.num_sensors() == 0 {
        return Err(Error::InvalidArgument("no sensors in channel state".into()));
    }
    if !chan.is_valid() {
        return Err(Error::InvalidArgument(
            "channel amplitudes and noise power must be positive and finite".into(),
        ));
    }
    if let Some(m) = scheduled {
        if m >= chan.user_amp.len() {
            return Err(Error::InvalidArgument(format!(
                "scheduled user {m} out of range ({} users)",
                chan.user_amp.len()
            )));
        }
    }
    let v: Vec<String> = limits.violations().into_iter().chain(cfg.violations()).collect();
    if !v.is_empty() {
        return Err(Error::Config(v.join("; ")));
    }
    Ok(())
}

/// Alternating optimization for one slot, optionally with pinned powers.
///
/// `trace`, when given, receives the rate after every outer iteration.
pub fn solve_slot_pinned<T: Scalar>(
    chan: &ChannelState<T>,
    scheduled: Option<usize>,
    limits: &PowerLimits<T>,
    cfg: &SolverConfig<T>,
    pins: &Pins<T>,
    mut trace: Option<&mut Vec<T>>,
) -> Result<SlotSolution<T>> {
    validate_inputs(chan, scheduled, limits, cfg)?;
    let bounds = Bounds::new(limits, pins);
    let floor = feasibility_with_bounds(chan, scheduled, &bounds, cfg.gamma);
    let min_point = decision(scheduled, bounds.p_lo, floor.sensor_coeffs.clone(), floor.eta);
    if !floor.feasible || scheduled.is_none() {
        return Ok(finish(chan, min_point, floor.feasible, 0, 0));
    }

    let mut p = bounds.p_lo;
    let mut b = vec![bounds.b_hi; chan.num_sensors()];
    let mut eta = optimal_eta(chan, p, &b, scheduled);
    let mut rate = T::neg_infinity();
    let mut have_feasible = false;
    let mut inner_total = 0;
    let mut outer = 0;
    for _ in 0..cfg.max_outer {
        outer += 1;
        let tr = transmission_with_bounds(chan, scheduled, eta, bounds, cfg)?;
        inner_total += tr.iterations;
        let (p_new, b_new, eta_new) = if tr.feasible {
            // With every sensor silent the MSE-optimal η is 0; the current η
            // is then still feasible and keeps the user decodable.
            let e = match optimal_eta(chan, tr.user_power, &tr.sensor_coeffs, scheduled) {
                e if e > T::zero() => e,
                _ => eta,
            };
            let cand = decision(scheduled, tr.user_power, tr.sensor_coeffs, e);
            let cand_rate = user_rate(chan, &cand);
            if have_feasible && cand_rate < rate {
                // Keep the incumbent: it is feasible at the current η.
                (p, b.clone(), eta)
            } else {
                have_feasible = true;
                rate = cand_rate;
                (cand.user_power, cand.sensor_coeffs, cand.eta)
            }
        } else if !have_feasible {
            // η infeasible for any (p, b): restart from the MSE-minimizing
            // point, which is feasible because the slot is.
            (bounds.p_lo, floor.sensor_coeffs.clone(), floor.eta)
        } else {
            (p, b.clone(), eta)
        };
        let delta = (p_new - p)
            .abs()
            .max(max_abs_diff(&b_new, &b))
            .max((eta_new - eta).abs() / eta.max(T::min_positive_value()));
        p = p_new;
        b = b_new;
        eta = eta_new;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(if have_feasible { rate } else { T::zero() });
        }
        if have_feasible && delta <= cfg.tol {
            break;
        }
    }
    if !have_feasible {
        return Ok(finish(chan, min_point, true, outer, inner_total));
    }
    let sol = finish(chan, decision(scheduled, p, b, eta), true, outer, inner_total);
    Ok(sol)
}

/// Alternating optimization for one slot.
pub fn solve_slot<T: Scalar>(
    chan: &ChannelState<T>,
    scheduled: Option<usize>,
    limits: &PowerLimits<T>,
    cfg: &SolverConfig<T>,
) -> Result<SlotSolution<T>> {
    solve_slot_pinned(chan, scheduled, limits, cfg, &Pins::default(), None)
}

/// JSON instance accepted by the `solve-slot` command: one user, J sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotInstance {
    pub g: f64,
    pub h: Vec<f64>,
    pub sigma2: f64,
    pub gamma: f64,
    pub p_max: f64,
    pub pb_max: f64,
}

impl SlotInstance {
    pub fn solve(&self) -> Result<SlotSolution<f64>> {
        let chan = ChannelState {
            user_amp: vec![self.g],
            sensor_amp: self.h.clone(),
            noise_power: self.sigma2,
        };
        let limits = PowerLimits {
            p_max: self.p_max,
            pb_max: self.pb_max,
        };
        solve_slot(&chan, Some(0), &limits, &SolverConfig::with_gamma(self.gamma))
    }
}
