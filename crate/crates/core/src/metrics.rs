//! Part metric, ratio norms, front tracking and the audit of the stability
//! hypotheses for a constructed wave.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coeffs::{ClauseResult, CoefficientField};
use crate::error::{Error, Result};
use crate::lattice::{
    Boundary, EntireSolution, FramePosition, Integrator, LatticeState, RightGhost, SimOptions, TailRatio,
};

/// `max_j |ln u_j - ln v_j|`, the smallest `ln a` with `v/a <= u <= a v`.
pub fn part_metric(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Domain(format!("length mismatch {} vs {}", u.len(), v.len())));
    }
    let mut rho = 0.0f64;
    for (j, (a, b)) in u.iter().zip(v).enumerate() {
        if !(*a > 0.0 && *b > 0.0) {
            return Err(Error::Domain(format!("non-positive entry at index {j}: ({a}, {b})")));
        }
        rho = rho.max((a.ln() - b.ln()).abs());
    }
    Ok(rho)
}

/// `sup_j |u_j / U_j - 1|`.
pub fn ratio_norm(u: &[f64], big_u: &[f64]) -> Result<f64> {
    if u.len() != big_u.len() {
        return Err(Error::Domain(format!("length mismatch {} vs {}", u.len(), big_u.len())));
    }
    let mut r = 0.0f64;
    for (j, (a, b)) in u.iter().zip(big_u).enumerate() {
        if *b == 0.0 || !b.is_finite() {
            return Err(Error::Domain(format!("reference vanishes at index {j}")));
        }
        r = r.max((a / b - 1.0).abs());
    }
    Ok(r)
}

/// One sampled snapshot of a windowed trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct WaveSample {
    pub time: f64,
    pub offset: i64,
    pub values: Vec<f64>,
}

impl WaveSample {
    pub fn from_state(s: &LatticeState) -> Self {
        WaveSample { time: s.time, offset: s.offset, values: s.values.clone() }
    }

    pub fn get(&self, j: i64) -> Option<f64> {
        let i = j - self.offset;
        (i >= 0 && (i as usize) < self.values.len()).then(|| self.values[i as usize])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FrontTrace {
    pub times: Vec<f64>,
    pub x: Vec<i64>,
    pub theta: f64,
    /// `sup |X(t) - X(s)|` over sampled `|t - s| <= 1`.
    pub shift_bound: i64,
}

/// Largest site with `u_j >= theta u+_j(t)` at each sample.
pub fn front_location(samples: &[WaveSample], uplus: &EntireSolution, theta: f64) -> Result<FrontTrace> {
    let mut times = Vec::with_capacity(samples.len());
    let mut x = Vec::with_capacity(samples.len());
    let mut last_valid = f64::NAN;
    for s in samples {
        let n = s.values.len();
        let hit = (0..n).rev().find(|&i| s.values[i] >= theta * uplus.value(s.time, s.offset + i as i64));
        match hit {
            Some(i) if i + 1 < n => {
                times.push(s.time);
                x.push(s.offset + i as i64);
                last_valid = s.time;
            }
            _ => return Err(Error::WindowExit { last_valid }),
        }
    }
    let shift_bound = bounded_shift(&times, &x, 1.0);
    Ok(FrontTrace { times, x, theta, shift_bound })
}

fn bounded_shift(times: &[f64], x: &[i64], tau: f64) -> i64 {
    let mut best = 0;
    for a in 0..times.len() {
        for b in a + 1..times.len() {
            if times[b] - times[a] > tau + 1e-12 {
                break;
            }
            best = best.max((x[b] - x[a]).abs());
        }
    }
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct MonitorTrace {
    pub times: Vec<f64>,
    pub rho: Vec<f64>,
    /// Largest single-step increase of `rho`.
    pub max_increase: f64,
    /// Minimum of `rho(t) - rho(t + tau)` over samples with `rho(t) >= sigma`.
    pub decrement: Option<f64>,
}

impl MonitorTrace {
    pub fn non_increasing(&self, slack: f64) -> bool {
        self.max_increase <= slack
    }
}

/// Evolve two positive states with identical steps on a periodic window and
/// record their part-metric distance.
#[allow(clippy::too_many_arguments)]
pub fn part_metric_monitor(
    field: &CoefficientField,
    u0: &[f64],
    v0: &[f64],
    t0: f64,
    t1: f64,
    opts: &SimOptions,
    sigma: f64,
    tau: f64,
) -> Result<MonitorTrace> {
    let mut integ = Integrator::new(field, opts)?;
    let mut su = LatticeState::new(0, u0.to_vec(), t0, Boundary::Periodic)?;
    let mut sv = LatticeState::new(0, v0.to_vec(), t0, Boundary::Periodic)?;
    let mut tu = Vec::new();
    integ.advance(&mut su, t1, &mut |s| {
        tu.push((s.time, s.values.clone()));
        Ok(())
    })?;
    let mut times = Vec::new();
    let mut rho = Vec::new();
    let mut k = 0;
    let mut err = None;
    integ.advance(&mut sv, t1, &mut |s| {
        let (t, u) = &tu[k];
        k += 1;
        match part_metric(u, &s.values) {
            Ok(r) => {
                times.push(*t);
                rho.push(r);
            }
            Err(_) if err.is_none() => err = Some(s.time),
            Err(_) => {}
        }
        Ok(())
    })?;
    if let Some(t) = err {
        return Err(Error::Domain(format!("positivity lost at t = {t}")));
    }
    let max_increase = rho.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let mut decrement: Option<f64> = None;
    for a in 0..times.len() {
        if rho[a] < sigma {
            continue;
        }
        if let Some(b) = (a..times.len()).find(|&b| times[b] >= times[a] + tau - 1e-9) {
            let d = rho[a] - rho[b];
            decrement = Some(decrement.map_or(d, |x: f64| x.min(d)));
        }
    }
    Ok(MonitorTrace { times, rho, max_increase, decrement })
}

pub type Envelope = Arc<dyn Fn(f64, i64) -> f64 + Send + Sync>;

/// Everything the hypothesis audit needs to know about a wave.
#[derive(Clone)]
pub struct WaveAuditInput {
    pub field: CoefficientField,
    pub samples: Vec<WaveSample>,
    pub phi: Envelope,
    pub phi1: Envelope,
    pub d_star: f64,
    pub d1_star: f64,
    pub uplus: Arc<EntireSolution>,
    /// Window motion and right tail used when evolving trapped data.
    pub frame: FramePosition,
    pub tail: TailRatio,
    pub theta: f64,
    pub trapped_runs: usize,
    pub seed: u64,
    pub sim: SimOptions,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub clauses: Vec<ClauseResult>,
    pub ratio_decay_rate: f64,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn clause(&self, name: &str) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| c.clause == name)
    }
}

pub const ENVELOPE_TOLERANCE: f64 = 1e-8;

/// Worst violation of `d phi - d1 phi1 <= u <= d phi + d1 phi1` on a sample.
pub fn envelope_violation(s: &WaveSample, phi: &Envelope, phi1: &Envelope, d: f64, d1: f64) -> (f64, i64) {
    let mut worst = (f64::NEG_INFINITY, s.offset);
    for (i, &u) in s.values.iter().enumerate() {
        let j = s.offset + i as i64;
        let (p, p1) = (phi(s.time, j), phi1(s.time, j));
        let v = (u - (d * p + d1 * p1)).max(d * p - d1 * p1 - u);
        if v > worst.0 {
            worst = (v, j);
        }
    }
    worst
}

/// Check the stability hypotheses on the sampled wave. Report only.
pub fn audit_stability_hypotheses(input: &WaveAuditInput) -> HypothesisReport {
    let mut clauses = Vec::new();
    let samples = &input.samples;

    let trace = front_location(samples, &input.uplus, input.theta);
    clauses.push(match &trace {
        Ok(tr) => ClauseResult {
            clause: "bounded-shift".into(),
            passed: true,
            value: tr.shift_bound as f64,
            witness: "sup |X(t)-X(s)| over |t-s| <= 1".into(),
        },
        Err(e) => {
            ClauseResult { clause: "bounded-shift".into(), passed: false, value: f64::NAN, witness: e.to_string() }
        }
    });

    let mut limits_ok = true;
    let mut limit_witness = String::new();
    for s in samples {
        let (l, r) = (s.offset, s.offset + s.values.len() as i64 - 1);
        let ok = (input.phi)(s.time, l) > (input.phi)(s.time, r)
            && (input.phi1)(s.time, l) > (input.phi1)(s.time, r)
            && (input.phi)(s.time, r) < 1.0
            && (input.phi)(s.time, l) > 1.0;
        if !ok && limits_ok {
            limits_ok = false;
            limit_witness = format!("t={}", s.time);
        }
    }
    clauses.push(ClauseResult {
        clause: "envelope-limits".into(),
        passed: limits_ok,
        value: if limits_ok { 1.0 } else { 0.0 },
        witness: limit_witness,
    });

    // ln(phi/phi1) against j over the left part of the window.
    let mut rate = f64::INFINITY;
    if let Ok(tr) = &trace {
        for (s, &x) in samples.iter().zip(&tr.x) {
            let js: Vec<f64> = (s.offset..=x).map(|j| j as f64).collect();
            if js.len() < 3 {
                continue;
            }
            let ys: Vec<f64> =
                (s.offset..=x).map(|j| ((input.phi)(s.time, j) / (input.phi1)(s.time, j)).ln()).collect();
            rate = rate.min(crate::numerics::ls_slope(&js, &ys));
        }
    }
    clauses.push(ClauseResult {
        clause: "ratio-decay".into(),
        passed: rate.is_finite() && rate > 0.0,
        value: rate,
        witness: "least-squares rate of ln(phi/phi1) left of X(t)".into(),
    });

    let mut worst = (f64::NEG_INFINITY, 0.0, 0i64);
    for s in samples {
        let (v, j) = envelope_violation(s, &input.phi, &input.phi1, input.d_star, input.d1_star);
        if v > worst.0 {
            worst = (v, s.time, j);
        }
    }
    clauses.push(ClauseResult {
        clause: "envelope-bound".into(),
        passed: worst.0 <= ENVELOPE_TOLERANCE,
        value: worst.0,
        witness: format!("t={}, j={}", worst.1, worst.2),
    });

    clauses.push(trapped_invariance(input));
    HypothesisReport { clauses, ratio_decay_rate: rate }
}

fn trapped_invariance(input: &WaveAuditInput) -> ClauseResult {
    let name = "trapped-invariance";
    let (Some(first), Some(last)) = (input.samples.first(), input.samples.last()) else {
        return ClauseResult { clause: name.into(), passed: false, value: f64::NAN, witness: "no samples".into() };
    };
    let mut rng = ChaCha8Rng::seed_from_u64(input.seed);
    let inits: Vec<Vec<f64>> = (0..input.trapped_runs)
        .map(|_| {
            first
                .values
                .iter()
                .enumerate()
                .map(|(i, _)| {
                    let j = first.offset + i as i64;
                    let (p, p1) = ((input.phi)(first.time, j), (input.phi1)(first.time, j));
                    let lo = (input.d_star * p - input.d1_star * p1).max(0.0);
                    let hi = (input.d_star * p + input.d1_star * p1).min(input.uplus.value(first.time, j)).max(lo);
                    lo + rng.gen::<f64>() * (hi - lo)
                })
                .collect()
        })
        .collect();
    let results = crate::par::map_slice(&inits, |u0| -> Result<(f64, f64, i64)> {
        let boundary = Boundary::Front { uplus: input.uplus.clone(), right: RightGhost::Tail(input.tail.clone()) };
        let mut st = LatticeState::new(first.offset, u0.clone(), first.time, boundary)?;
        let mut integ = Integrator::new(&input.field, &input.sim)?.with_frame(input.frame.clone());
        let mut worst = (f64::NEG_INFINITY, 0.0, 0);
        integ.advance(&mut st, last.time, &mut |s| {
            let (v, j) =
                envelope_violation(&WaveSample::from_state(s), &input.phi, &input.phi1, input.d_star, input.d1_star);
            if v > worst.0 {
                worst = (v, s.time, j);
            }
            Ok(())
        })?;
        Ok(worst)
    });
    let mut worst = (f64::NEG_INFINITY, 0.0, 0i64);
    for r in results {
        match r {
            Ok(w) if w.0 > worst.0 => worst = w,
            Ok(_) => {}
            Err(e) => {
                return ClauseResult { clause: name.into(), passed: false, value: f64::NAN, witness: e.to_string() }
            }
        }
    }
    ClauseResult {
        clause: name.into(),
        passed: worst.0 <= ENVELOPE_TOLERANCE,
        value: worst.0,
        witness: format!("{} runs; worst at t={}, j={}", input.trapped_runs, worst.1, worst.2),
    }
}

/// Ratio-norm distance between a wave and a perturbed copy over time.
#[derive(Clone, Debug, Serialize)]
pub struct RatioTrace {
    pub times: Vec<f64>,
    pub ratio: Vec<f64>,
    pub burn_in: f64,
    /// Largest single-sample increase of the ratio after `burn_in`.
    pub max_increase: f64,
}

impl RatioTrace {
    pub fn final_ratio(&self) -> f64 {
        *self.ratio.last().unwrap_or(&f64::NAN)
    }
}

/// Settings of [`ratio_convergence`].
#[derive(Clone)]
pub struct PerturbationRun {
    pub t_end: f64,
    pub burn_in: f64,
    /// Multiplicative noise range on the left half of the window.
    pub noise: (f64, f64),
    pub seed: u64,
    pub boundary: Boundary,
    pub frame: FramePosition,
    pub sim: SimOptions,
}

/// Perturb `start` by factors in `noise` on the left half of its window
/// (ratio exactly 1 on the right half) and follow `|u/U - 1|` while both
/// evolve with identical steps and window motion.
pub fn ratio_convergence(field: &CoefficientField, start: &WaveSample, run: &PerturbationRun) -> Result<RatioTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let half = start.values.len() / 2;
    let perturbed: Vec<f64> = start
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| if i < half { v * rng.gen_range(run.noise.0..=run.noise.1) } else { v })
        .collect();
    let inits = [start.values.clone(), perturbed];
    let traces = crate::par::map_slice(&inits, |u0| -> Result<Vec<WaveSample>> {
        let mut st = LatticeState::new(start.offset, u0.clone(), start.time, run.boundary.clone())?;
        let mut integ = Integrator::new(field, &run.sim)?.with_frame(run.frame.clone());
        let mut out = Vec::new();
        integ.advance(&mut st, start.time + run.t_end, &mut |s| {
            out.push(WaveSample::from_state(s));
            Ok(())
        })?;
        Ok(out)
    });
    let mut traces = traces.into_iter();
    let (base, pert) = (traces.next().unwrap()?, traces.next().unwrap()?);
    let mut times = Vec::with_capacity(base.len());
    let mut ratio = Vec::with_capacity(base.len());
    for (b, p) in base.iter().zip(&pert) {
        times.push(b.time - start.time);
        ratio.push(ratio_norm(&p.values, &b.values)?);
    }
    let max_increase = (1..ratio.len())
        .filter(|&k| times[k - 1] >= run.burn_in)
        .map(|k| ratio[k] - ratio[k - 1])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RatioTrace { times, ratio, burn_in: run.burn_in, max_increase })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn part_metric_examples() {
        let v = [0.3, 1.7, 2.2];
        let u: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
        assert!((part_metric(&u, &v).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(part_metric(&v, &v).unwrap(), 0.0);
        assert!((part_metric(&[1.0, 4.0], &[2.0, 2.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(part_metric(&[1.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn ratio_norm_examples() {
        let big = [0.5, 1.0, 2.0];
        assert_eq!(ratio_norm(&big, &big).unwrap(), 0.0);
        let u: Vec<f64> = big.iter().map(|x| 1.1 * x).collect();
        assert!((ratio_norm(&u, &big).unwrap() - 0.1).abs() < 1e-12);
        assert!(ratio_norm(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn front_location_of_steps() {
        let uplus = EntireSolution::constant(1.0);
        let step = |shift: i64| WaveSample {
            time: 0.0,
            offset: -10,
            values: (-10..20).map(|j| if j <= shift { 1.0 } else { 0.0 }).collect(),
        };
        let tr = front_location(&[step(0)], &uplus, 0.5).unwrap();
        assert_eq!(tr.x, vec![0]);
        let tr = front_location(&[step(5)], &uplus, 0.5).unwrap();
        assert_eq!(tr.x, vec![5]);
        assert!(matches!(front_location(&[step(-20)], &uplus, 0.5), Err(Error::WindowExit { .. })));
    }
}
