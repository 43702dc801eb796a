//! Periodic traveling waves in time-space periodic media.
//!
//! The wave is obtained by monotone iteration of the space-continuous system
//! with shift parameter `z`, started from the explicit super-solution
//! `min(d phi + d1 phi1, u+)` and the explicit sub-solution built from
//! `d phi - d1 phi1` and a plateau `b psi^0`.
//!
//! The continuous system decouples into lattice chains `x + Z`: the chain
//! through `x` with shift `z` evolves exactly like the lattice equation on
//! sites `k = floor(x + z) + i`, started from the envelope with a fractional
//! phase `s = x + ct - k`. Every iterate `w_n(x, t, z)` is therefore a lattice
//! run from time `-nT` to `t` with phase `s`, and no interpolation in `x` or
//! `z` is needed, including for non-integer `cT`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coeffs::{CoefficientField, SiteTable};
use crate::error::{Error, Result};
use crate::floquet::{FloquetOptions, FloquetResult, FloquetSolver, SpeedResult};
use crate::lattice::{
    compute_entire_solution, rhs_into, Boundary, EntireOptions, EntireSolution, FramePosition, Integrator,
    LatticeState, RightGhost, SimOptions, TailRatio,
};
use crate::metrics::{front_location, Envelope, WaveAuditInput, WaveSample};
use crate::numerics::{central_derivative, ls_slope};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveOptions {
    /// Wave speed is `c* + speed_offset`.
    pub speed_offset: f64,
    /// Cells per unit length of the profile grid (`h = 1/m`).
    pub m: usize,
    pub x_min: i64,
    pub x_max: i64,
    /// Number of profile times in `[0, T]`, endpoints included.
    pub time_samples: usize,
    pub tol: f64,
    pub n_max: usize,
    pub d: f64,
    /// `d1 = safety * d0 * d`.
    pub safety: f64,
    pub b_start: f64,
    /// Length of the reconstructed `U(t, j)` trajectory in periods.
    pub trajectory_periods: usize,
    pub theta: f64,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub floquet_dt: f64,
    pub uplus_tol: f64,
    /// `tail` (exponential extrapolation along `phi`) or `zero`.
    pub right_ghost: String,
}

impl Default for WaveOptions {
    fn default() -> Self {
        WaveOptions {
            speed_offset: 0.5,
            m: 8,
            x_min: -40,
            x_max: 80,
            time_samples: 3,
            tol: 1e-6,
            n_max: 80,
            d: 1.0,
            safety: 2.0,
            b_start: 0.1,
            trajectory_periods: 5,
            theta: 0.5,
            mu_lo: 0.05,
            mu_hi: 5.0,
            floquet_dt: 1e-3,
            uplus_tol: 1e-10,
            right_ghost: "tail".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SubSuperParams {
    pub d: f64,
    pub d1: f64,
    pub b: f64,
    /// Plateau geometry: `b psi^0 <= d phi - d1 phi1` for `big_n <= x <= big_m`.
    pub big_m: f64,
    pub big_n: f64,
    pub mu: f64,
    pub mu_prime: f64,
    pub c: f64,
}

/// `max(max psi^mu / min psi^mu', L max(psi^mu)^2 / ((mu' c - lambda(mu')) min psi^mu'))`.
pub fn compute_d0(slope_bound: f64, c: f64, fl_mu: &FloquetResult, fl_mu_prime: &FloquetResult) -> Result<f64> {
    let denom = fl_mu_prime.mu * c - fl_mu_prime.lambda;
    if !(denom > 0.0) {
        return Err(Error::InadmissibleTilt(denom));
    }
    let (max_psi, min_psi1) = (fl_mu.max_psi(), fl_mu_prime.min_psi());
    Ok((max_psi / min_psi1).max(slope_bound * max_psi * max_psi / (denom * min_psi1)))
}

/// Largest `b <= b_start` (halving) with `b <= lambda(0) / (L max psi^0)` and
/// an interval `[N, M]` of length at least 2 where `b max psi^0` lies below
/// the worst case of `d phi - d1 phi1`.
pub fn find_geometry(
    d: f64,
    d1: f64,
    b_start: f64,
    slope_bound: f64,
    fl_mu: &FloquetResult,
    fl_mu_prime: &FloquetResult,
    fl_zero: &FloquetResult,
) -> Result<(f64, f64, f64)> {
    let (mu, mu1) = (fl_mu.mu, fl_mu_prime.mu);
    let (pmin, p1max, p0max) = (fl_mu.min_psi(), fl_mu_prime.max_psi(), fl_zero.max_psi());
    let cap = if slope_bound > 0.0 { fl_zero.lambda / (slope_bound * p0max) } else { f64::INFINITY };
    let lower = |x: f64| d * (-mu * x).exp() * pmin - d1 * (-mu1 * x).exp() * p1max;
    let mut b = b_start;
    while b > 1e-12 {
        if b <= cap {
            let level = b * p0max;
            let xs: Vec<f64> = (0..=40_000).map(|k| k as f64 * 0.005).collect();
            let inside: Vec<usize> = (0..xs.len()).filter(|&k| lower(xs[k]) >= level).collect();
            if let (Some(&a), Some(&z)) = (inside.first(), inside.last()) {
                if xs[z] - xs[a] >= 2.0 && inside.len() == z - a + 1 {
                    return Ok((b, xs[a], xs[z]));
                }
            }
        }
        b *= 0.5;
    }
    Err(Error::Geometry { b_min: b })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Upper,
    Lower,
}

/// Everything fixed before the iteration: speed, tilts, Floquet data, `u+`
/// and the sub/super-solution constants.
#[derive(Clone)]
pub struct PeriodicSetup {
    pub field: CoefficientField,
    pub period: f64,
    pub sites: usize,
    pub speed: SpeedResult,
    pub params: SubSuperParams,
    pub d0: f64,
    pub fl_mu: Arc<FloquetResult>,
    pub fl_mu_prime: Arc<FloquetResult>,
    pub fl_zero: Arc<FloquetResult>,
    pub uplus: Arc<EntireSolution>,
    pub sim: SimOptions,
    pub opts: WaveOptions,
}

impl PeriodicSetup {
    pub fn new(field: &CoefficientField, opts: &WaveOptions, sim: &SimOptions) -> Result<Self> {
        let fl_opts = FloquetOptions { dt: opts.floquet_dt, ..Default::default() };
        let solver = FloquetSolver::new(field, &fl_opts)?;
        let speed = solver.find_mu_star((opts.mu_lo, opts.mu_hi))?;
        Self::with_speed(field, &solver, speed, None, opts, sim)
    }

    /// Setup for an explicit speed `c > c*`.
    pub fn with_speed(
        field: &CoefficientField,
        solver: &FloquetSolver,
        speed: SpeedResult,
        c: Option<f64>,
        opts: &WaveOptions,
        sim: &SimOptions,
    ) -> Result<Self> {
        if opts.m < 4 {
            return Err(Error::Resolution { candidate: 1.0 / opts.m as f64, required: 0.25 });
        }
        if opts.x_max - opts.x_min < 10 || opts.time_samples < 2 {
            return Err(Error::Parameter("profile window or time grid too small".into()));
        }
        let c = c.unwrap_or(speed.c_star + opts.speed_offset);
        let mu = solver.mu_for_speed(&speed, c)?;
        let mu_prime = solver.select_mu_prime(&speed, mu)?;
        let fl_mu = Arc::new(solver.solve(mu)?);
        let fl_mu_prime = Arc::new(solver.solve(mu_prime)?);
        let fl_zero = Arc::new(solver.solve(0.0)?);
        let entire_opts = EntireOptions { tol: opts.uplus_tol, ..Default::default() };
        let uplus = Arc::new(compute_entire_solution(field, solver.period(), &entire_opts, sim)?);
        let slope = field.bounds().slope_bound;
        let d0 = compute_d0(slope, c, &fl_mu, &fl_mu_prime)?;
        let d = opts.d;
        let d1 = opts.safety * d0 * d;
        let (b, big_n, big_m) = find_geometry(d, d1, opts.b_start, slope, &fl_mu, &fl_mu_prime, &fl_zero)?;
        Ok(PeriodicSetup {
            field: field.clone(),
            period: solver.period(),
            sites: solver.sites(),
            speed,
            params: SubSuperParams { d, d1, b, big_m, big_n, mu, mu_prime, c },
            d0,
            fl_mu,
            fl_mu_prime,
            fl_zero,
            uplus,
            sim: sim.clone(),
            opts: opts.clone(),
        })
    }

    pub fn c(&self) -> f64 {
        self.params.c
    }

    /// `e^{-mu (j + s - ct)} psi^mu(t, j)`.
    pub fn phi(&self, t: f64, j: i64, s: f64) -> f64 {
        let x = j as f64 + s - self.params.c * t;
        (-self.params.mu * x).exp() * self.fl_mu.psi_at(t, j)
    }

    pub fn phi1(&self, t: f64, j: i64, s: f64) -> f64 {
        let x = j as f64 + s - self.params.c * t;
        (-self.params.mu_prime * x).exp() * self.fl_mu_prime.psi_at(t, j)
    }

    /// Super-solution `min(d phi + d1 phi1, u+)` along the chain with phase `s`.
    pub fn upper_envelope(&self, t: f64, j: i64, s: f64) -> f64 {
        let p = &self.params;
        (p.d * self.phi(t, j, s) + p.d1 * self.phi1(t, j, s)).min(self.uplus.value(t, j))
    }

    /// Sub-solution: `max(b psi^0, d phi - d1 phi1)` for `x <= M`, `d phi - d1 phi1` beyond.
    pub fn lower_envelope(&self, t: f64, j: i64, s: f64) -> f64 {
        let p = &self.params;
        let x = j as f64 + s - p.c * t;
        let v = p.d * self.phi(t, j, s) - p.d1 * self.phi1(t, j, s);
        if x <= p.big_m {
            v.max(p.b * self.fl_zero.psi_at(t, j))
        } else {
            v
        }
    }

    pub fn envelope(&self, side: Side, t: f64, j: i64, s: f64) -> f64 {
        match side {
            Side::Upper => self.upper_envelope(t, j, s),
            Side::Lower => self.lower_envelope(t, j, s),
        }
    }

    /// Ratio `u_{j+1}/u_j` of the tail `d phi`.
    pub fn tail_ratio(&self) -> TailRatio {
        let fl = self.fl_mu.clone();
        let e = (-self.params.mu).exp();
        Arc::new(move |t, j| e * fl.psi_at(t, j + 1) / fl.psi_at(t, j))
    }

    pub fn boundary(&self) -> Boundary {
        let right =
            if self.opts.right_ghost == "zero" { RightGhost::Zero } else { RightGhost::Tail(self.tail_ratio()) };
        Boundary::Front { uplus: self.uplus.clone(), right }
    }

    /// Window follows `x_min + c t - s`.
    pub fn frame(&self, s: f64) -> FramePosition {
        let (x0, c) = (self.opts.x_min as f64, self.params.c);
        Arc::new(move |t| x0 + c * t - s)
    }

    fn width(&self) -> usize {
        (self.opts.x_max - self.opts.x_min) as usize + 2
    }

    /// Evolve the envelope of `side` with phase `s` from `-n T` to `t_obs`.
    pub fn run_phase(&self, side: Side, s: f64, n: usize, t_obs: f64) -> Result<PhaseRun> {
        let t0 = -(n as f64) * self.period;
        let frame = self.frame(s);
        let offset = frame(t0).floor() as i64;
        let values: Vec<f64> = (0..self.width()).map(|i| self.envelope(side, t0, offset + i as i64, s)).collect();
        let mut state = LatticeState::new(offset, values, t0, self.boundary())?;
        let mut integ = Integrator::new(&self.field, &self.sim)?.with_frame(frame);
        integ.advance(&mut state, t_obs, &mut |_| Ok(()))?;
        Ok(PhaseRun { offset: state.offset, values: state.values })
    }

    pub fn sub_super(&self, shift: i64) -> (SubSolution, SuperSolution) {
        (SubSolution { setup: self.clone(), shift }, SuperSolution { setup: self.clone(), shift })
    }
}

/// `u_(t, j; i)` on the lattice.
#[derive(Clone)]
pub struct SubSolution {
    setup: PeriodicSetup,
    shift: i64,
}

impl SubSolution {
    pub fn value(&self, t: f64, j: i64) -> f64 {
        self.setup.lower_envelope(t, j + self.shift, -(self.shift as f64))
    }
}

/// `u^-(t, j; i) = min(v(t, j; i), u+_{j+i}(t))` on the lattice.
#[derive(Clone)]
pub struct SuperSolution {
    setup: PeriodicSetup,
    shift: i64,
}

impl SuperSolution {
    pub fn value(&self, t: f64, j: i64) -> f64 {
        self.setup.upper_envelope(t, j + self.shift, -(self.shift as f64))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseRun {
    pub offset: i64,
    pub values: Vec<f64>,
}

impl PhaseRun {
    pub fn get(&self, j: i64) -> Option<f64> {
        let i = j - self.offset;
        (i >= 0 && (i as usize) < self.values.len()).then(|| self.values[i as usize])
    }
}

/// Sampled `Psi(x, t, z)` from one side of the iteration.
#[derive(Clone, Debug, Serialize)]
pub struct WaveProfile {
    pub side: Side,
    pub x_grid: Vec<f64>,
    pub z_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `values[(a * nz + l) * nx + i]` at `(x_i, t_a, z_l)`.
    pub values: Vec<f64>,
    pub iterates_delta: Vec<f64>,
    pub iterations: usize,
    /// Violations above 1e-10 of monotonicity in `n` from the second iterate on.
    pub monotonicity_violations: usize,
    pub max_monotonicity_violation: f64,
    /// Largest violation between the initial envelope and the first iterate.
    pub preasymptotic_violation: f64,
    /// `min` of iterates over `x <= M`, all iterations.
    pub plateau_floor: f64,
    /// `sup |Psi(x,T,z) - Psi(x,0,z)|`.
    pub time_defect: f64,
    /// `sup |Psi(x,0,J) - Psi(x,0,0)|`.
    pub space_defect: f64,
    #[serde(skip)]
    runs: Vec<PhaseRun>,
}

impl WaveProfile {
    pub fn value(&self, a: usize, l: usize, i: usize) -> f64 {
        self.values[(a * self.z_grid.len() + l) * self.x_grid.len() + i]
    }

    /// `U(0, j)` sites and values from the phase-0 run at `t = 0`.
    pub fn phase_zero(&self) -> &PhaseRun {
        &self.runs[0]
    }
}

struct RunPlan {
    /// `(time index, phase)`, canonical runs first: `a * J m + r`.
    specs: Vec<(usize, f64)>,
    canonical: usize,
    t_grid: Vec<f64>,
}

fn plan(setup: &PeriodicSetup) -> RunPlan {
    let (m, jm) = (setup.opts.m as i64, (setup.opts.m * setup.sites) as i64);
    let c = setup.c();
    let t_grid: Vec<f64> =
        (0..setup.opts.time_samples).map(|a| setup.period * a as f64 / (setup.opts.time_samples - 1) as f64).collect();
    let mut specs = Vec::new();
    for (a, &t) in t_grid.iter().enumerate() {
        for r in 0..jm {
            specs.push((a, c * t + r as f64 / m as f64));
        }
    }
    let canonical = specs.len();
    // Direct runs for the z = J slice at t = 0: p = -Jm + e.
    for e in 0..m {
        specs.push((0, (-jm + e) as f64 / m as f64));
    }
    RunPlan { specs, canonical, t_grid }
}

struct SideState {
    side: Side,
    prev: Option<Vec<PhaseRun>>,
    history: Vec<f64>,
    violations: usize,
    max_violation: f64,
    pre: f64,
    floor: f64,
    done: Option<(usize, Vec<PhaseRun>)>,
}

fn max_abs_diff(a: &[PhaseRun], b: &[PhaseRun]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.values.iter().zip(&y.values).map(|(p, q)| (p - q).abs())).fold(0.0, f64::max)
}

/// Largest amount by which `hi` falls below `lo`.
fn order_violation(lo: &[PhaseRun], hi: &[PhaseRun]) -> f64 {
    lo.iter()
        .zip(hi)
        .flat_map(|(x, y)| x.values.iter().zip(&y.values).map(|(p, q)| p - q))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub const MONOTONE_SLACK: f64 = 1e-10;
pub const INTEGRITY_LIMIT: f64 = 1e-8;

/// Report of the joint iteration besides the two profiles.
#[derive(Clone, Debug, Serialize)]
pub struct IterationReport {
    /// Largest `lower_n - upper_n` over all rounds where both were computed.
    pub max_cross_violation: f64,
}

/// Run the monotone iteration for the requested sides in lockstep.
pub fn iterate_profiles(setup: &PeriodicSetup, sides: &[Side]) -> Result<(Vec<WaveProfile>, IterationReport)> {
    let plan = plan(setup);
    let t_of = |a: usize| plan.t_grid[a];
    let mut states: Vec<SideState> = sides
        .iter()
        .map(|&side| SideState {
            side,
            prev: None,
            history: Vec::new(),
            violations: 0,
            max_violation: 0.0,
            pre: 0.0,
            floor: f64::INFINITY,
            done: None,
        })
        .collect();
    let mut cross = f64::NEG_INFINITY;
    let (c, big_m) = (setup.c(), setup.params.big_m);
    for n in 0..=setup.opts.n_max {
        let mut current: Vec<Option<Vec<PhaseRun>>> = Vec::new();
        for st in states.iter_mut() {
            if st.done.is_some() {
                current.push(None);
                continue;
            }
            let runs = crate::par::try_map_indexed(plan.specs.len(), |k| {
                let (a, s) = plan.specs[k];
                setup.run_phase(st.side, s, n, t_of(a))
            })?;
            for (k, run) in runs.iter().enumerate() {
                let (a, s) = plan.specs[k];
                for (i, &v) in run.values.iter().enumerate() {
                    let x = (run.offset + i as i64) as f64 + s - c * t_of(a);
                    if x <= big_m {
                        st.floor = st.floor.min(v);
                    }
                }
            }
            if let Some(prev) = &st.prev {
                let delta = max_abs_diff(prev, &runs);
                st.history.push(delta);
                let viol = match st.side {
                    Side::Upper => order_violation(&runs, prev),
                    Side::Lower => order_violation(prev, &runs),
                };
                if n == 1 {
                    st.pre = viol.max(0.0);
                } else {
                    if viol > MONOTONE_SLACK {
                        st.violations += 1;
                    }
                    st.max_violation = st.max_violation.max(viol);
                    if viol > INTEGRITY_LIMIT {
                        return Err(Error::IterationIntegrity { iterate: n, violation: viol });
                    }
                }
                if delta < setup.opts.tol {
                    st.done = Some((n, runs.clone()));
                }
            }
            current.push(Some(runs.clone()));
            st.prev = Some(runs);
        }
        // Lower iterates stay below upper ones (or below the upper limit once it converged).
        if let (Some(up), Some(lo)) =
            (states.iter().position(|s| s.side == Side::Upper), states.iter().position(|s| s.side == Side::Lower))
        {
            let u = current[up].as_ref().or(states[up].prev.as_ref());
            let l = current[lo].as_ref().or(states[lo].prev.as_ref());
            if let (Some(u), Some(l)) = (u, l) {
                cross = cross.max(order_violation(l, u));
            }
        }
        if states.iter().all(|s| s.done.is_some()) {
            break;
        }
    }
    let mut out = Vec::new();
    for st in states {
        let Some((iterations, runs)) = st.done else {
            return Err(Error::Convergence { history: st.history });
        };
        let (values, time_defect, space_defect) = assemble_profile(setup, &plan, &runs)?;
        let m = setup.opts.m;
        out.push(WaveProfile {
            side: st.side,
            x_grid: (0..=(setup.opts.x_max - setup.opts.x_min) as usize * m)
                .map(|i| setup.opts.x_min as f64 + i as f64 / m as f64)
                .collect(),
            z_grid: (0..setup.sites * m).map(|l| l as f64 / m as f64).collect(),
            t_grid: plan.t_grid.clone(),
            values,
            iterates_delta: st.history,
            iterations,
            monotonicity_violations: st.violations,
            max_monotonicity_violation: st.max_violation,
            preasymptotic_violation: st.pre,
            plateau_floor: st.floor,
            time_defect,
            space_defect,
            runs,
        });
    }
    Ok((out, IterationReport { max_cross_violation: cross }))
}

/// Single-side iteration.
pub fn iterate_profile(setup: &PeriodicSetup, side: Side) -> Result<WaveProfile> {
    Ok(iterate_profiles(setup, &[side])?.0.remove(0))
}

fn assemble_profile(setup: &PeriodicSetup, plan: &RunPlan, runs: &[PhaseRun]) -> Result<(Vec<f64>, f64, f64)> {
    let m = setup.opts.m as i64;
    let jp = setup.sites as i64;
    let jm = jp * m;
    let nx = ((setup.opts.x_max - setup.opts.x_min) * m + 1) as usize;
    let nz = jm as usize;
    let x0 = setup.opts.x_min * m;
    let lookup = |a: usize, xi: i64, zl: i64| -> Result<f64> {
        let big_x = x0 + xi;
        let k = (big_x + zl).div_euclid(m);
        let p = big_x - m * k;
        let r = p.rem_euclid(jm);
        let q = (p - r) / jm;
        runs[a * jm as usize + r as usize]
            .get(k + q * jp)
            .ok_or_else(|| Error::Domain(format!("profile lookup outside the run window (x index {xi})")))
    };
    let mut values = Vec::with_capacity(plan.t_grid.len() * nz * nx);
    for a in 0..plan.t_grid.len() {
        for l in 0..nz as i64 {
            for i in 0..nx as i64 {
                values.push(lookup(a, i, l)?);
            }
        }
    }
    let last = plan.t_grid.len() - 1;
    let mut time_defect = 0.0f64;
    for k in 0..nz * nx {
        time_defect = time_defect.max((values[last * nz * nx + k] - values[k]).abs());
    }
    // z = J slice at t = 0 from the direct runs.
    let mut space_defect = 0.0f64;
    for i in 0..nx as i64 {
        let big_x = x0 + i;
        let k = (big_x + jm).div_euclid(m);
        let p = big_x - m * k;
        let e = p + jm;
        let run = &runs[plan.canonical + e as usize];
        let v = run.get(k).ok_or_else(|| Error::Domain("z-shift lookup outside the run window".into()))?;
        space_defect = space_defect.max((v - values[i as usize]).abs());
    }
    Ok((values, time_defect, space_defect))
}

#[derive(Clone, Debug, Serialize)]
pub struct WaveDiagnostics {
    /// Worst `max(U - (d phi + d1 phi1), (d phi - d1 phi1) - U)` with the constructed `d1`.
    pub envelope_violation: f64,
    /// Smallest `d1` for which the envelope holds where `phi1/phi >= 1e-3`.
    /// Further right `U - d phi` is below round-off relative to `phi`.
    pub d1_tight: f64,
    /// `max |U / (d phi) - 1|` where `phi1/phi < 1e-3`.
    pub decay_deviation: f64,
    /// Same quantity on the upper profile samples.
    pub profile_decay_deviation: f64,
    /// `max |U - u+|` on the two leftmost sites.
    pub left_limit: f64,
    pub ode_residual: f64,
    pub gap: f64,
    pub time_defect_upper: f64,
    pub time_defect_lower: f64,
    pub space_defect_upper: f64,
    pub space_defect_lower: f64,
    /// Max of `|X(t) - X(0) - c t|` over the trajectory.
    pub speed_deviation: f64,
    pub speed_bound: f64,
    pub front_slope: f64,
    /// Homogeneous fields only: `U` non-increasing in `j`.
    pub monotone_in_j: Option<bool>,
    pub max_cross_violation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PeriodicWave {
    pub params: SubSuperParams,
    pub d0: f64,
    pub c_star: f64,
    pub mu_star: f64,
    pub trajectory: Vec<WaveSample>,
    pub diagnostics: WaveDiagnostics,
    pub failures: Vec<String>,
}

impl PeriodicWave {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Evolve `U(0, .)` forward on the co-moving window of phase 0.
pub fn wave_trajectory(setup: &PeriodicSetup, start: &PhaseRun, t_end: f64, stride: usize) -> Result<Vec<WaveSample>> {
    let mut state = LatticeState::new(start.offset, start.values.clone(), 0.0, setup.boundary())?;
    let sim = SimOptions { output_stride: stride, ..setup.sim.clone() };
    let mut integ = Integrator::new(&setup.field, &sim)?.with_frame(setup.frame(0.0));
    let mut out = Vec::new();
    integ.advance(&mut state, t_end, &mut |s| {
        out.push(WaveSample::from_state(s));
        Ok(())
    })?;
    Ok(out)
}

/// Sup over interior sites and times of `|U_t - N(U)|`, with `U_t` from
/// central differences of the samples.
pub fn ode_residual(field: &CoefficientField, samples: &[WaveSample], h: f64) -> f64 {
    let mut table = SiteTable::default();
    let mut worst = 0.0f64;
    let mut series = [0.0; 7];
    for k in 3..samples.len().saturating_sub(3) {
        let s = &samples[k];
        field.fill_table(s.time, &mut table);
        let n = s.values.len();
        let mut rhs = vec![0.0; n];
        rhs_into(field, &table, s.time, s.offset, &s.values, s.values[0], s.values[n - 1], &mut rhs);
        'site: for i in 1..n - 1 {
            let j = s.offset + i as i64;
            for (q, slot) in series.iter_mut().enumerate() {
                match samples[k + q - 3].get(j) {
                    Some(v) => *slot = v,
                    None => continue 'site,
                }
            }
            if let Some(fd) = central_derivative(&series, 3, h) {
                worst = worst.max((fd - rhs[i]).abs());
            }
        }
    }
    worst
}

pub const ENVELOPE_LIMIT: f64 = 1e-8;
/// `phi1/phi` threshold separating the fitted region from the decay region.
pub const TIGHT_REGION: f64 = 1e-3;
pub const DECAY_LIMIT: f64 = 0.05;
pub const LEFT_LIMIT: f64 = 1e-3;
pub const RESIDUAL_LIMIT: f64 = 1e-6;
pub const GAP_LIMIT: f64 = 1e-4;
pub const PERIODICITY_LIMIT: f64 = 1e-5;

/// Reconstruct `U(t, j)` and run the wave diagnostics.
pub fn assemble_wave(
    setup: &PeriodicSetup,
    upper: &WaveProfile,
    lower: &WaveProfile,
    report: &IterationReport,
) -> Result<PeriodicWave> {
    let p = setup.params;
    let t_end = setup.period * setup.opts.trajectory_periods.max(1) as f64;
    let traj = wave_trajectory(setup, upper.phase_zero(), t_end, 1)?;
    let h = traj[1].time - traj[0].time;

    let mut env = f64::NEG_INFINITY;
    let mut d1_tight = 0.0f64;
    let mut decay = 0.0f64;
    let mut left = 0.0f64;
    let mut monotone = true;
    for s in &traj {
        for (i, &u) in s.values.iter().enumerate() {
            let j = s.offset + i as i64;
            let (phi, phi1) = (setup.phi(s.time, j, 0.0), setup.phi1(s.time, j, 0.0));
            env = env.max(u - (p.d * phi + p.d1 * phi1)).max(p.d * phi - p.d1 * phi1 - u);
            if phi1 / phi >= TIGHT_REGION {
                d1_tight = d1_tight.max((u - p.d * phi).abs() / phi1);
            } else {
                decay = decay.max((u / (p.d * phi) - 1.0).abs());
            }
            if i < 2 {
                left = left.max((u - setup.uplus.value(s.time, j)).abs());
            }
            if i > 0 && u > s.values[i - 1] + 1e-12 {
                monotone = false;
            }
        }
    }
    let mut profile_decay = 0.0f64;
    for (a, &t) in upper.t_grid.iter().enumerate() {
        for (l, &z) in upper.z_grid.iter().enumerate() {
            for (i, &x) in upper.x_grid.iter().enumerate() {
                let j = (x + z).floor() as i64;
                let ratio =
                    (-(p.mu_prime - p.mu) * x).exp() * setup.fl_mu_prime.psi_at(t, j) / setup.fl_mu.psi_at(t, j);
                if ratio < 1e-3 {
                    let base = p.d * (-p.mu * x).exp() * setup.fl_mu.psi_at(t, j);
                    profile_decay = profile_decay.max((upper.value(a, l, i) / base - 1.0).abs());
                }
            }
        }
    }
    let residual = ode_residual(&setup.field, &traj, h);
    let gap = upper.values.iter().zip(&lower.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let (speed_dev, slope) = match front_location(&traj, &setup.uplus, setup.opts.theta) {
        Ok(tr) => {
            let x0 = tr.x[0] as f64;
            let dev = tr.times.iter().zip(&tr.x).map(|(t, x)| (*x as f64 - x0 - p.c * t).abs()).fold(0.0, f64::max);
            let xs: Vec<f64> = tr.x.iter().map(|&x| x as f64).collect();
            (dev, ls_slope(&tr.times, &xs))
        }
        Err(_) => (f64::INFINITY, f64::NAN),
    };
    let homogeneous = matches!(setup.field.structure(), crate::coeffs::Structure::Homogeneous);
    let diagnostics = WaveDiagnostics {
        envelope_violation: env,
        d1_tight,
        decay_deviation: decay,
        profile_decay_deviation: profile_decay,
        left_limit: left,
        ode_residual: residual,
        gap,
        time_defect_upper: upper.time_defect,
        time_defect_lower: lower.time_defect,
        space_defect_upper: upper.space_defect,
        space_defect_lower: lower.space_defect,
        speed_deviation: speed_dev,
        speed_bound: 2.0 + p.c * setup.period,
        front_slope: slope,
        monotone_in_j: homogeneous.then_some(monotone),
        max_cross_violation: report.max_cross_violation,
    };
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            failures.push(what);
        }
    };
    let dg = &diagnostics;
    check(dg.envelope_violation <= ENVELOPE_LIMIT, format!("envelope violated by {:e}", dg.envelope_violation));
    check(dg.decay_deviation < DECAY_LIMIT, format!("decay ratio deviates by {}", dg.decay_deviation));
    check(dg.left_limit < LEFT_LIMIT, format!("left limit off by {:e}", dg.left_limit));
    check(dg.ode_residual < RESIDUAL_LIMIT, format!("ODE residual {:e}", dg.ode_residual));
    check(dg.gap < GAP_LIMIT, format!("upper/lower gap {:e}", dg.gap));
    for (name, v) in [
        ("upper time", dg.time_defect_upper),
        ("lower time", dg.time_defect_lower),
        ("upper z", dg.space_defect_upper),
        ("lower z", dg.space_defect_lower),
    ] {
        check(v < PERIODICITY_LIMIT, format!("{name} periodicity defect {v:e}"));
    }
    check(dg.speed_deviation <= dg.speed_bound, format!("front drifts {} from c t", dg.speed_deviation));
    check(dg.max_cross_violation <= MONOTONE_SLACK, format!("lower above upper by {:e}", dg.max_cross_violation));
    Ok(PeriodicWave {
        params: p,
        d0: setup.d0,
        c_star: setup.speed.c_star,
        mu_star: setup.speed.mu_star,
        trajectory: traj,
        diagnostics,
        failures,
    })
}

/// Build setup, both profiles and the assembled wave.
pub fn build_periodic_wave(
    field: &CoefficientField,
    opts: &WaveOptions,
    sim: &SimOptions,
) -> Result<(PeriodicSetup, WaveProfile, WaveProfile, PeriodicWave)> {
    let setup = PeriodicSetup::new(field, opts, sim)?;
    let (mut profiles, report) = iterate_profiles(&setup, &[Side::Upper, Side::Lower])?;
    let lower = profiles.pop().unwrap();
    let upper = profiles.pop().unwrap();
    let wave = assemble_wave(&setup, &upper, &lower, &report)?;
    Ok((setup, upper, lower, wave))
}

impl PeriodicSetup {
    /// Audit input for the stability hypotheses, with a given `d1*`.
    pub fn audit_input(&self, wave: &PeriodicWave, d1_star: f64, runs: usize, seed: u64) -> WaveAuditInput {
        let (fa, fb) = (Arc::new(self.clone()), Arc::new(self.clone()));
        let phi: Envelope = Arc::new(move |t, j| fa.phi(t, j, 0.0));
        let phi1: Envelope = Arc::new(move |t, j| fb.phi1(t, j, 0.0));
        let stride = (wave.trajectory.len() / 50).max(1);
        WaveAuditInput {
            field: self.field.clone(),
            samples: wave.trajectory.iter().step_by(stride).cloned().collect(),
            phi,
            phi1,
            d_star: self.params.d,
            d1_star,
            uplus: self.uplus.clone(),
            frame: self.frame(0.0),
            tail: self.tail_ratio(),
            theta: self.opts.theta,
            trapped_runs: runs,
            seed,
            sim: self.sim.clone(),
        }
    }
}

/// Space-continuous extension: coefficients constant on `[j, j+1)`, state on
/// the grid `x_i = i / m`.
#[derive(Clone, Debug)]
pub struct ContinuumField {
    pub field: CoefficientField,
    pub m: usize,
}

pub fn continuum_extend(field: &CoefficientField, m: usize) -> Result<ContinuumField> {
    if m < 4 {
        return Err(Error::Resolution { candidate: 1.0 / m as f64, required: 0.25 });
    }
    Ok(ContinuumField { field: field.clone(), m })
}

impl ContinuumField {
    pub fn d(&self, t: f64, x: f64) -> f64 {
        self.field.d(t, x.floor() as i64)
    }

    pub fn f(&self, t: f64, x: f64, u: f64) -> f64 {
        self.field.f(t, x.floor() as i64, u)
    }

    /// Integrate the shifted continuum system on a periodic grid of `L m`
    /// cells (`L` a multiple of the site period) from `t0` to `t1`.
    pub fn integrate_periodic(
        &self,
        values: &[f64],
        zeta: f64,
        t0: f64,
        t1: f64,
        sim: &SimOptions,
    ) -> Result<Vec<f64>> {
        let m = self.m;
        let n = values.len();
        if !n.is_multiple_of(m * self.field.structure().site_period()) {
            return Err(Error::Parameter("grid length must cover whole site periods".into()));
        }
        sim.validate(&self.field)?;
        let site = |i: usize, shift: i64| ((i as f64 / m as f64) + zeta).floor() as i64 + shift;
        let rhs = |t: f64, u: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let (ip, im) = ((i + m) % n, (i + n - m) % n);
                out[i] = self.field.d(t, site(i, 1)) * (u[ip] - u[i])
                    + self.field.d(t, site(i, -1)) * (u[im] - u[i])
                    + u[i] * self.field.f(t, site(i, 0), u[i]);
            }
        };
        let steps = crate::numerics::step_count(t1 - t0, sim.dt);
        let h = (t1 - t0) / steps.max(1) as f64;
        let mut u = values.to_vec();
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for s in 0..steps {
            let t = t0 + s as f64 * h;
            rhs(t, &u, &mut k1);
            for i in 0..n {
                tmp[i] = u[i] + 0.5 * h * k1[i];
            }
            rhs(t + 0.5 * h, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = u[i] + 0.5 * h * k2[i];
            }
            rhs(t + 0.5 * h, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = u[i] + h * k3[i];
            }
            rhs(t + h, &tmp, &mut k4);
            for i in 0..n {
                u[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
            }
        }
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{make_family, FamilyParams};

    #[test]
    fn d0_collapses_for_constant_eigenfunctions() {
        let f = make_family(&FamilyParams::Homogeneous { d: 1.0, r: 1.0, a: 1.0 }).unwrap();
        let s = FloquetSolver::new(&f, &FloquetOptions::default()).unwrap();
        let sp = s.find_mu_star((0.05, 5.0)).unwrap();
        let c = sp.c_star + 0.5;
        let mu = s.mu_for_speed(&sp, c).unwrap();
        let mp = s.select_mu_prime(&sp, mu).unwrap();
        let (a, b) = (s.solve(mu).unwrap(), s.solve(mp).unwrap());
        let d0 = compute_d0(1.0, c, &a, &b).unwrap();
        let denom = mp * c - b.lambda;
        assert!((d0 - 1f64.max(1.0 / denom)).abs() < 1e-9);
        assert!(compute_d0(2.0, c, &a, &b).unwrap() >= d0);
        assert!(matches!(compute_d0(1.0, 0.1, &a, &b), Err(Error::InadmissibleTilt(_))));
    }

    #[test]
    fn continuum_requires_four_cells() {
        let f = make_family(&FamilyParams::Homogeneous { d: 1.0, r: 1.0, a: 1.0 }).unwrap();
        assert!(continuum_extend(&f, 3).is_err());
        let c = continuum_extend(&f, 8).unwrap();
        assert_eq!(c.d(0.0, 2.5), f.d(0.0, 2));
    }
}
