//! Transition waves for fields whose coefficients depend on time only.
//!
//! Here `f(t, j, u) = f(t, u)` and `d` is constant, so the linearization at 0
//! is explicit: `phi = exp(-mu (j - C(t)))` solves it exactly when
//! `C' = c(t) = (d (e^mu + e^-mu - 2) + f(t, 0)) / mu`. The correction
//! `phi1 = exp(A(t) - mu~ (j - C(t)))` needs an auxiliary exponent `A` with
//! `A' + B >= delta > 0`, built here by running reflection.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coeffs::{window_average_extremes, CoefficientField};
use crate::error::{Error, Result};
use crate::lattice::{
    compute_entire_solution_window, Boundary, EntireOptions, EntireSolution, FramePosition, Integrator, LatticeState,
    RightGhost, SimOptions, TailRatio,
};
use crate::metrics::{front_location, Envelope, FrontTrace, WaveAuditInput, WaveSample};
use crate::numerics::{bisect, cumulative_gauss, golden_section, hermite, lerp_uniform, ls_slope, step_count};
use crate::waves_periodic::TIGHT_REGION;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeHetOptions {
    /// Mean speed is `c0~ + gamma_offset` unless `gamma` is set.
    pub gamma_offset: f64,
    pub gamma: Option<f64>,
    /// Averages of `f(., 0)` are taken over `[-horizon, horizon]`.
    pub horizon: f64,
    pub d: f64,
    pub safety: f64,
    /// `delta = delta_fraction * B_inf`; must stay below 1/2.
    pub delta_fraction: f64,
    pub t_out: f64,
    pub x_min: i64,
    pub x_max: i64,
    pub h_step: f64,
    pub n_max: usize,
    pub tol: f64,
    /// Time between stored samples of `U`.
    pub sample_every: f64,
    pub theta: f64,
    pub uplus_tol: f64,
}

impl Default for TimeHetOptions {
    fn default() -> Self {
        TimeHetOptions {
            gamma_offset: 0.5,
            gamma: None,
            horizon: 200.0,
            d: 1.0,
            safety: 2.0,
            delta_fraction: 0.25,
            t_out: 50.0,
            x_min: -40,
            x_max: 80,
            h_step: 1.0,
            n_max: 200,
            tol: 1e-6,
            sample_every: 0.1,
            theta: 0.5,
            uplus_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FBarStats {
    pub f_bar_inf: f64,
    pub f_bar_sup: f64,
    pub f_bar_inf_plus: f64,
    pub f_bar_sup_plus: f64,
    pub horizon: f64,
    pub window_policy: String,
    /// The constant dispersal rate `d`.
    pub dispersal: f64,
}

impl FBarStats {
    /// Statistics of a constant growth rate.
    pub fn constant(r: f64, dispersal: f64) -> Self {
        FBarStats {
            f_bar_inf: r,
            f_bar_sup: r,
            f_bar_inf_plus: r,
            f_bar_sup_plus: r,
            horizon: f64::INFINITY,
            window_policy: "exact".into(),
            dispersal,
        }
    }
}

/// Dispersal rate of a field that has no spatial structure; errors otherwise.
pub fn constant_dispersal(field: &CoefficientField) -> Result<f64> {
    if field.structure().site_period() != 1 {
        return Err(Error::Parameter(format!("field {} depends on the site", field.name())));
    }
    let d = field.d(0.0, 0);
    for k in 0..200 {
        let t = -50.0 + 0.5 * k as f64;
        if (field.d(t, 0) - d).abs() > 1e-14 * d.abs().max(1.0) {
            return Err(Error::Parameter("dispersal must be constant in time".into()));
        }
    }
    Ok(d)
}

/// Extremes of window averages of `g` over `[-horizon, horizon]` (windows of
/// length at least `horizon/4`) and over `[0, horizon]` for the plus variants.
fn average_stats(g: impl Fn(f64) -> f64, horizon: f64, dt: f64) -> Result<(f64, f64, f64, f64)> {
    let n = step_count(2.0 * horizon, dt);
    let h = 2.0 * horizon / n as f64;
    let samples: Vec<f64> = (0..=n).map(|k| g(-horizon + k as f64 * h)).collect();
    if let Some(k) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::MalformedField(format!("non-finite sample at t = {}", -horizon + k as f64 * h)));
    }
    let min_len = horizon / 4.0;
    let (lo, hi) = window_average_extremes(&samples, h, min_len);
    let (lo_p, hi_p) = window_average_extremes(&samples[n / 2..], h, min_len);
    Ok((lo, hi, lo_p, hi_p))
}

pub fn estimate_fbar(field: &CoefficientField, horizon: f64, dt: f64) -> Result<FBarStats> {
    if horizon < 50.0 {
        return Err(Error::InsufficientGrid(format!("horizon {horizon} is below 50")));
    }
    let dispersal = constant_dispersal(field)?;
    let (lo, hi, lo_p, hi_p) = average_stats(|t| field.f0(t, 0), horizon, dt)?;
    Ok(FBarStats {
        f_bar_inf: lo,
        f_bar_sup: hi,
        f_bar_inf_plus: lo_p,
        f_bar_sup_plus: hi_p,
        horizon,
        window_policy: format!("windows in [-{horizon}, {horizon}] of length >= {}", horizon / 4.0),
        dispersal,
    })
}

/// `(d (e^mu + e^-mu - 2) + f) / mu`.
pub fn mean_speed(d: f64, f: f64, mu: f64) -> f64 {
    (d * (2.0 * mu.cosh() - 2.0) + f) / mu
}

/// Sign changes of `mean_speed - gamma` on a uniform scan of `(0, 10]`.
pub fn speed_roots(stats: &FBarStats, gamma: f64) -> usize {
    let g = |m: f64| mean_speed(stats.dispersal, stats.f_bar_inf, m) - gamma;
    let n = 10_000;
    let vals: Vec<f64> = (1..=n).map(|k| g(10.0 * k as f64 / n as f64)).collect();
    vals.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count()
}

/// `c0~ = inf_mu mean_speed(mu)` and its minimizer.
pub fn c0_tilde(stats: &FBarStats) -> Result<(f64, f64)> {
    if !(stats.f_bar_inf > 0.0) {
        return Err(Error::Parameter(format!(
            "average growth f_inf = {} is not positive; the averaged hypothesis fails",
            stats.f_bar_inf
        )));
    }
    let (mu, c) = golden_section(|m| mean_speed(stats.dispersal, stats.f_bar_inf, m), 1e-3, 10.0, 1e-12);
    let roots = speed_roots(stats, c + 0.5);
    if roots != 2 {
        return Err(Error::Domain(format!("expected two tilts for speed c0~ + 0.5, found {roots}")));
    }
    Ok((c, mu))
}

/// The smaller root `mu < mu*` of `mean_speed(mu) = gamma`.
pub fn mu_for_gamma(stats: &FBarStats, gamma: f64) -> Result<f64> {
    let (c0, mu_star) = c0_tilde(stats)?;
    if !(gamma > c0) {
        return Err(Error::Parameter(format!("gamma {gamma} must exceed c0~ = {c0}")));
    }
    let g = |m: f64| mean_speed(stats.dispersal, stats.f_bar_inf, m) - gamma;
    let mut lo = mu_star * 0.5;
    while g(lo) <= 0.0 {
        lo *= 0.5;
    }
    bisect(g, lo, mu_star, 1e-14).ok_or_else(|| Error::Parameter(format!("no tilt for gamma {gamma}")))
}

/// Uniformly sampled `A(t)` and `B(t)`.
#[derive(Clone, Debug, Serialize)]
pub struct AExponent {
    pub t0: f64,
    pub h: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub delta: f64,
    /// `min (A_{k+1} - A_k)/h + (B_k + B_{k+1})/2`.
    pub margin: f64,
    pub sup: f64,
}

impl AExponent {
    pub fn value(&self, t: f64) -> f64 {
        lerp_uniform(&self.a, self.t0, self.h, t)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.a.len()).map(|k| self.t0 + k as f64 * self.h).collect()
    }
}

/// `A(t) = max(0, sup_{s <= t} int_s^t (delta - B))` on the sample grid of `b`.
pub fn reflect_exponent(b: &[f64], t0: f64, h: f64, delta: f64) -> Result<AExponent> {
    if b.len() < 2 || !(delta > 0.0) {
        return Err(Error::Parameter("reflection needs two samples and delta > 0".into()));
    }
    let mut a = Vec::with_capacity(b.len());
    a.push(0.0);
    for w in b.windows(2) {
        let last = *a.last().unwrap();
        a.push((last + h * (delta - 0.5 * (w[0] + w[1]))).max(0.0));
    }
    let horizon = h * (b.len() - 1) as f64;
    let sup = a.iter().copied().fold(0.0, f64::max);
    if sup > 10.0 * horizon * delta {
        return Err(Error::Construction(format!("A reaches {sup}; use a smaller delta")));
    }
    // A linear trend over the second half means the average of B is below delta.
    let half = a.len() / 2;
    let ts: Vec<f64> = (half..a.len()).map(|k| k as f64 * h).collect();
    let slope = ls_slope(&ts, &a[half..]);
    if slope > 0.1 * delta {
        return Err(Error::Construction(format!("A grows at rate {slope}; delta exceeds the average of B")));
    }
    let margin =
        (0..b.len() - 1).map(|k| (a[k + 1] - a[k]) / h + 0.5 * (b[k] + b[k + 1])).fold(f64::INFINITY, f64::min);
    Ok(AExponent { t0, h, a, b: b.to_vec(), delta, margin, sup })
}

/// `B(t) = -d (e^mu~ + e^-mu~ - 2) + c(t) mu~ - f(t, 0)`.
pub fn defect_b(field: &CoefficientField, d: f64, mu: f64, mu_tilde: f64, t: f64) -> f64 {
    let f = field.f0(t, 0);
    -d * (2.0 * mu_tilde.cosh() - 2.0) + mean_speed(d, f, mu) * mu_tilde - f
}

/// Sample `B` on `[t0, t1]` and reflect it.
pub fn build_a(
    field: &CoefficientField,
    mu: f64,
    mu_tilde: f64,
    delta: f64,
    t0: f64,
    t1: f64,
    h: f64,
) -> Result<AExponent> {
    let d = constant_dispersal(field)?;
    let n = step_count(t1 - t0, h);
    let h = (t1 - t0) / n as f64;
    let b: Vec<f64> = (0..=n).map(|k| defect_b(field, d, mu, mu_tilde, t0 + k as f64 * h)).collect();
    reflect_exponent(&b, t0, h, delta)
}

/// `c(t)` and `C(t) = int_0^t c`, Hermite-interpolated with `C' = c`.
#[derive(Clone, Debug, Serialize)]
pub struct SpeedTrace {
    pub t0: f64,
    pub h: f64,
    pub c: Vec<f64>,
    pub cum: Vec<f64>,
}

impl SpeedTrace {
    pub fn new(c_of: impl Fn(f64) -> f64, t0: f64, t1: f64, h: f64) -> Self {
        let n = step_count(t1 - t0, h);
        let h = (t1 - t0) / n as f64;
        let mut cum = cumulative_gauss(&c_of, t0, h, n);
        // Shift so that C(0) = 0.
        let k0 = ((-t0 / h).floor() as usize).min(n - 1);
        let at0 = hermite(
            cum[k0],
            c_of(t0 + k0 as f64 * h),
            cum[k0 + 1],
            c_of(t0 + (k0 + 1) as f64 * h),
            h,
            (-t0 / h) - k0 as f64,
        );
        cum.iter_mut().for_each(|v| *v -= at0);
        let c = (0..=n).map(|k| c_of(t0 + k as f64 * h)).collect();
        SpeedTrace { t0, h, c, cum }
    }

    pub fn integral(&self, t: f64) -> f64 {
        let n = self.c.len() - 1;
        let s = ((t - self.t0) / self.h).clamp(0.0, n as f64);
        let k = (s.floor() as usize).min(n - 1);
        hermite(self.cum[k], self.c[k], self.cum[k + 1], self.c[k + 1], self.h, s - k as f64)
    }

    pub fn speed(&self, t: f64) -> f64 {
        lerp_uniform(&self.c, self.t0, self.h, t)
    }
}

/// `phi`, `phi1` and the constants of the time-heterogeneous construction.
#[derive(Clone, Debug, Serialize)]
pub struct TimeHetEnvelopes {
    pub mu: f64,
    pub mu_tilde: f64,
    pub gamma: f64,
    pub d: f64,
    pub d1: f64,
    pub delta: f64,
    pub b_inf: f64,
    pub speed: Arc<SpeedTrace>,
    pub a: Arc<AExponent>,
}

impl TimeHetEnvelopes {
    pub fn phi(&self, t: f64, j: i64) -> f64 {
        (-self.mu * (j as f64 - self.speed.integral(t))).exp()
    }

    pub fn phi1(&self, t: f64, j: i64) -> f64 {
        (self.a.value(t) - self.mu_tilde * (j as f64 - self.speed.integral(t))).exp()
    }

    pub fn upper(&self, t: f64, j: i64) -> f64 {
        self.d * self.phi(t, j) + self.d1 * self.phi1(t, j)
    }

    pub fn lower(&self, t: f64, j: i64) -> f64 {
        self.d * self.phi(t, j) - self.d1 * self.phi1(t, j)
    }

    /// `max(U - upper, lower - U)` over a sample.
    pub fn violation(&self, s: &WaveSample) -> (f64, i64) {
        let mut worst = (f64::NEG_INFINITY, s.offset);
        for (i, &u) in s.values.iter().enumerate() {
            let j = s.offset + i as i64;
            let v = (u - self.upper(s.time, j)).max(self.lower(s.time, j) - u);
            if v > worst.0 {
                worst = (v, j);
            }
        }
        worst
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TimeHetWave {
    pub stats: FBarStats,
    pub c0_tilde: f64,
    pub mu_star: f64,
    pub envelopes: TimeHetEnvelopes,
    /// Samples of `U` for `t` in `[0, t_out]`.
    pub samples: Vec<WaveSample>,
    pub history: Vec<f64>,
    pub iterations: usize,
    /// Worst envelope violation over every pullback run.
    pub envelope_violation: f64,
    /// Tight envelope constant where `phi1/phi >= 1e-3`.
    pub d1_star: f64,
    pub retried: bool,
    pub front: Option<FrontTrace>,
    /// `max |X(t) - X(0) - C(t)|`.
    pub front_deviation: f64,
    /// `max |U/(d phi) - 1|` where `phi1/phi < 1e-3`.
    pub decay_deviation: f64,
    pub failures: Vec<String>,
    #[serde(skip)]
    pub uplus: Arc<EntireSolution>,
    #[serde(skip)]
    pub field: CoefficientField,
}

impl TimeHetWave {
    pub fn mu(&self) -> f64 {
        self.envelopes.mu
    }

    pub fn gamma(&self) -> f64 {
        self.envelopes.gamma
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn frame(&self, x_min: i64) -> FramePosition {
        let sp = self.envelopes.speed.clone();
        Arc::new(move |t| x_min as f64 + sp.integral(t))
    }

    pub fn tail(&self) -> TailRatio {
        let e = (-self.envelopes.mu).exp();
        Arc::new(move |_, _| e)
    }

    pub fn audit_input(&self, x_min: i64, runs: usize, seed: u64, sim: &SimOptions) -> WaveAuditInput {
        let (ea, eb) = (Arc::new(self.envelopes.clone()), Arc::new(self.envelopes.clone()));
        let phi: Envelope = Arc::new(move |t, j| ea.phi(t, j));
        let phi1: Envelope = Arc::new(move |t, j| eb.phi1(t, j));
        let stride = (self.samples.len() / 50).max(1);
        WaveAuditInput {
            field: self.field.clone(),
            samples: self.samples.iter().step_by(stride).cloned().collect(),
            phi,
            phi1,
            d_star: self.envelopes.d,
            d1_star: self.d1_star,
            uplus: self.uplus.clone(),
            frame: self.frame(x_min),
            tail: self.tail(),
            theta: 0.5,
            trapped_runs: runs,
            seed,
            sim: sim.clone(),
        }
    }
}

pub const ENVELOPE_LIMIT: f64 = 1e-8;

/// Front-following pullback construction. `gamma = None` uses the options.
pub fn build_transition_wave(
    field: &CoefficientField,
    gamma: Option<f64>,
    opts: &TimeHetOptions,
    sim: &SimOptions,
) -> Result<TimeHetWave> {
    sim.validate(field)?;
    let stats = estimate_fbar(field, opts.horizon, sim.dt)?;
    let (c0, mu_star) = c0_tilde(&stats)?;
    let gamma = gamma.or(opts.gamma).unwrap_or(c0 + opts.gamma_offset);
    let mu = mu_for_gamma(&stats, gamma)?;
    let d = stats.dispersal;

    // mu~ maximizes the averaged defect; kept strictly inside (mu, 2 mu).
    let mu_tilde = (gamma / (2.0 * d)).asinh().clamp(1.05 * mu, 1.95 * mu);
    let t_lo = -(opts.n_max as f64) * opts.h_step - 1.0;
    let t_hi = opts.t_out + 1.0;
    let (b_inf, _, _, _) = average_stats(|t| defect_b(field, d, mu, mu_tilde, t), opts.horizon, sim.dt)?;
    if !(b_inf > 0.0) {
        return Err(Error::Construction(format!("averaged defect {b_inf} is not positive for mu~ = {mu_tilde}")));
    }
    if !(opts.delta_fraction > 0.0 && opts.delta_fraction < 0.5) {
        return Err(Error::Parameter("delta_fraction must lie in (0, 1/2)".into()));
    }
    let delta = opts.delta_fraction * b_inf;
    let a = Arc::new(build_a(field, mu, mu_tilde, delta, t_lo, t_hi, sim.dt)?);
    let speed = Arc::new(SpeedTrace::new(|t| mean_speed(d, field.f0(t, 0), mu), t_lo, t_hi, sim.dt));

    let entire = EntireOptions { tol: opts.uplus_tol, ..Default::default() };
    let uplus = Arc::new(compute_entire_solution_window(field, t_lo, t_hi, &entire, sim)?);

    let lip = field.bounds().slope_bound;
    let d1 = opts.safety * (1.0f64).max(lip * opts.d / delta) * opts.d;
    let mut env = TimeHetEnvelopes { mu, mu_tilde, gamma, d: opts.d, d1, delta, b_inf, speed, a };
    let mut retried = false;
    let result = loop {
        match pullback(field, &env, &uplus, opts, sim) {
            Err(Error::Envelope { .. }) if !retried => {
                retried = true;
                env.d1 *= 4.0;
            }
            other => break other?,
        }
    };
    let (samples, history, iterations, envelope_violation) = result;

    let d1_star = samples
        .iter()
        .flat_map(|s| {
            let env = &env;
            s.values.iter().enumerate().filter_map(move |(i, &u)| {
                let j = s.offset + i as i64;
                let (p, p1) = (env.phi(s.time, j), env.phi1(s.time, j));
                (p1 / p >= TIGHT_REGION).then(|| (u - env.d * p).abs() / p1)
            })
        })
        .fold(0.0, f64::max);
    let front = front_location(&samples, &uplus, opts.theta).ok();
    let front_deviation = match &front {
        Some(tr) => tr
            .times
            .iter()
            .zip(&tr.x)
            .map(|(&t, &x)| (x as f64 - tr.x[0] as f64 - env.speed.integral(t)).abs())
            .fold(0.0, f64::max),
        None => f64::INFINITY,
    };
    let mut decay = 0.0f64;
    for s in &samples {
        for (i, &u) in s.values.iter().enumerate() {
            let j = s.offset + i as i64;
            let (p, p1) = (env.phi(s.time, j), env.phi1(s.time, j));
            if p1 / p < 1e-3 {
                decay = decay.max((u / (env.d * p) - 1.0).abs());
            }
        }
    }
    let mut failures = Vec::new();
    if envelope_violation > ENVELOPE_LIMIT {
        failures.push(format!("envelope violated by {envelope_violation:e}"));
    }
    if front_deviation > 3.0 {
        failures.push(format!("front drifts {front_deviation} sites from the integrated speed"));
    }
    if env.a.margin < 0.5 * delta {
        failures.push(format!("A margin {} below delta/2", env.a.margin));
    }
    if decay >= 0.05 {
        failures.push(format!("decay ratio deviates by {decay}"));
    }
    Ok(TimeHetWave {
        stats,
        c0_tilde: c0,
        mu_star,
        envelopes: env,
        samples,
        history,
        iterations,
        envelope_violation,
        d1_star,
        retried,
        front,
        front_deviation,
        decay_deviation: decay,
        failures,
        uplus,
        field: field.clone(),
    })
}

type PullbackOut = (Vec<WaveSample>, Vec<f64>, usize, f64);

fn pullback(
    field: &CoefficientField,
    env: &TimeHetEnvelopes,
    uplus: &Arc<EntireSolution>,
    opts: &TimeHetOptions,
    sim: &SimOptions,
) -> Result<PullbackOut> {
    let width = (opts.x_max - opts.x_min) as usize + 2;
    let sp = env.speed.clone();
    let x_min = opts.x_min as f64;
    let frame: FramePosition = Arc::new(move |t| x_min + sp.integral(t));
    let e = (-env.mu).exp();
    let tail: TailRatio = Arc::new(move |_, _| e);
    let stride = step_count(opts.sample_every, sim.dt).max(1);
    let sim = SimOptions { output_stride: stride, ..sim.clone() };
    let mut prev: Option<Vec<WaveSample>> = None;
    let mut history = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for n in 1..=opts.n_max {
        let t0 = -(n as f64) * opts.h_step;
        let offset = frame(t0).floor() as i64;
        let values = (0..width)
            .map(|i| {
                let j = offset + i as i64;
                env.upper(t0, j).min(uplus.value(t0, j))
            })
            .collect();
        let boundary = Boundary::Front { uplus: uplus.clone(), right: RightGhost::Tail(tail.clone()) };
        let mut state = LatticeState::new(offset, values, t0, boundary)?;
        let mut integ = Integrator::new(field, &sim)?.with_frame(frame.clone());
        let mut out = Vec::new();
        integ.advance(&mut state, opts.t_out, &mut |s| {
            let sample = WaveSample::from_state(s);
            let (v, j) = env.violation(&sample);
            worst = worst.max(v);
            if v > ENVELOPE_LIMIT {
                return Err(Error::Envelope { time: s.time, site: j, violation: v });
            }
            if s.time >= -1e-12 {
                out.push(sample);
            }
            Ok(())
        })?;
        if let Some(p) = &prev {
            let delta = p
                .iter()
                .zip(&out)
                .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max);
            history.push(delta);
            if delta < opts.tol {
                return Ok((out, history, n, worst));
            }
        }
        prev = Some(out);
    }
    Err(Error::Convergence { history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{make_family, FamilyParams};

    #[test]
    fn constant_growth_gives_exact_statistics() {
        let f =
            make_family(&FamilyParams::TimeOnly { d: 1.0, r0: 1.3, amplitudes: vec![], frequencies: vec![], a: 1.0 })
                .unwrap();
        let s = estimate_fbar(&f, 60.0, 0.01).unwrap();
        for v in [s.f_bar_inf, s.f_bar_sup, s.f_bar_inf_plus, s.f_bar_sup_plus] {
            assert!((v - 1.3).abs() < 1e-10);
        }
    }

    #[test]
    fn c0_grows_with_average_growth() {
        let (c1, _) = c0_tilde(&FBarStats::constant(1.0, 1.0)).unwrap();
        let (c2, _) = c0_tilde(&FBarStats::constant(2.0, 1.0)).unwrap();
        assert!(c2 > c1);
        assert!(c0_tilde(&FBarStats::constant(0.0, 1.0)).is_err());
        assert_eq!(speed_roots(&FBarStats::constant(1.0, 1.0), c1 + 0.5), 2);
    }

    #[test]
    fn constant_defect_needs_no_correction() {
        let a = reflect_exponent(&[0.7; 101], 0.0, 0.01, 0.2).unwrap();
        assert!(a.a.iter().all(|&v| v == 0.0));
        assert!((a.margin - 0.7).abs() < 1e-14);
    }

    #[test]
    fn speed_trace_integrates_constant_speed() {
        let s = SpeedTrace::new(|_| 2.5, -10.0, 5.0, 0.01);
        for t in [-7.3, 0.0, 0.123, 4.9] {
            assert!((s.integral(t) - 2.5 * t).abs() < 1e-10);
        }
    }

    /// `G(t) - min_{t0 <= s <= t} G(s)` with `G = int_t0^t (delta - b0 - beta sin(2 pi s)) ds`.
    fn sinusoid_reflection(b0: f64, beta: f64, delta: f64, t0: f64, t: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI;
        let g = |t: f64| (delta - b0) * (t - t0) + beta * ((w * t).cos() - (w * t0).cos()) / w;
        let n = 20_000;
        let run_min = (0..=n).map(|k| g(t0 + (t - t0) * k as f64 / n as f64)).fold(0.0, f64::min);
        g(t) - run_min
    }

    #[test]
    fn sinusoid_reflection_matches_closed_form() {
        let (b0, beta, delta, h) = (0.5, 1.0, 0.2, 1e-3);
        let b: Vec<f64> = (0..=10_000).map(|k| b0 + beta * (2.0 * std::f64::consts::PI * k as f64 * h).sin()).collect();
        let a = reflect_exponent(&b, 0.0, h, delta).unwrap();
        assert!(a.margin >= delta / 2.0);
        for k in [1234, 5000, 7777, 10_000] {
            let exact = sinusoid_reflection(b0, beta, delta, 0.0, k as f64 * h);
            assert!((a.a[k] - exact).abs() < 1e-4, "{} vs {exact}", a.a[k]);
        }
        // Periodic after the first period.
        assert!((a.a[2000] - a.a[9000]).abs() < 1e-6);
        assert!(reflect_exponent(&b, 0.0, h, 0.8).is_err());
    }
}
