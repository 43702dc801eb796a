//! Method-of-lines integration of the lattice equation on finite windows,
//! sub/super-solution defect checks and the positive entire solution `u+`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coeffs::{CoefficientField, SiteTable};
use crate::error::{Error, Result};
use crate::numerics::{central_derivative, hermite, step_count};

/// Multiplier `k(t, j)` with `u_{j+1} = k u_j` in a prescribed exponential tail.
pub type TailRatio = Arc<dyn Fn(f64, i64) -> f64 + Send + Sync>;
/// Moving-frame position; the window's leftmost site follows `floor(position(t))`.
pub type FramePosition = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum RightGhost {
    Zero,
    /// Extrapolate past the last site with the given tail ratio.
    Tail(TailRatio),
}

#[derive(Clone)]
pub enum Boundary {
    /// Wrap around; the window length must be a multiple of the site period.
    Periodic,
    /// Both ghost sites hold a fixed value.
    ClampBoth(f64),
    /// Left ghost follows `u+`, right ghost from `right`.
    Front { uplus: Arc<EntireSolution>, right: RightGhost },
}

impl fmt::Debug for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Periodic => write!(f, "Periodic"),
            Boundary::ClampBoth(v) => write!(f, "ClampBoth({v})"),
            Boundary::Front { right: RightGhost::Zero, .. } => write!(f, "Front(u+, 0)"),
            Boundary::Front { right: RightGhost::Tail(_), .. } => write!(f, "Front(u+, tail)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LatticeState {
    /// Index of the leftmost site in the window.
    pub offset: i64,
    pub values: Vec<f64>,
    pub time: f64,
    pub boundary: Boundary,
}

impl LatticeState {
    pub fn new(offset: i64, values: Vec<f64>, time: f64, boundary: Boundary) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::Parameter(format!("window needs at least 3 sites, got {}", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("non-finite initial value {v}")));
        }
        Ok(LatticeState { offset, values, time, boundary })
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.values.len()).map(move |i| self.offset + i as i64)
    }

    /// Value at site `j` if it lies in the window.
    pub fn get(&self, j: i64) -> Option<f64> {
        let i = j - self.offset;
        if i >= 0 && (i as usize) < self.values.len() {
            Some(self.values[i as usize])
        } else {
            None
        }
    }

    pub fn last_site(&self) -> i64 {
        self.offset + self.values.len() as i64 - 1
    }

    fn ghosts(&self, t: f64, values: &[f64]) -> (f64, f64) {
        ghosts(&self.boundary, t, self.offset, values)
    }
}

fn ghosts(boundary: &Boundary, t: f64, offset: i64, values: &[f64]) -> (f64, f64) {
    let n = values.len();
    match boundary {
        Boundary::Periodic => (values[n - 1], values[0]),
        Boundary::ClampBoth(v) => (*v, *v),
        Boundary::Front { uplus, right } => {
            let left = uplus.value(t, offset - 1);
            let r = match right {
                RightGhost::Zero => 0.0,
                RightGhost::Tail(k) => k(t, offset + n as i64 - 1) * values[n - 1],
            };
            (left, r)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rk4Fixed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    pub dt: f64,
    pub method: Method,
    /// Steps between observer calls.
    pub output_stride: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { dt: 0.01, method: Method::Rk4Fixed, output_stride: 1 }
    }
}

impl SimOptions {
    pub fn with_dt(dt: f64) -> Self {
        SimOptions { dt, ..Default::default() }
    }

    pub fn stability_bound(field: &CoefficientField) -> f64 {
        let b = field.bounds();
        0.25 / (2.0 * b.d_max + b.reaction_lipschitz)
    }

    pub fn validate(&self, field: &CoefficientField) -> Result<()> {
        let bound = Self::stability_bound(field);
        if !(self.dt > 0.0) || self.dt > bound {
            return Err(Error::Stability { dt: self.dt, bound });
        }
        if self.output_stride == 0 {
            return Err(Error::Parameter("output_stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Evaluate the right-hand side for sites `offset..offset+u.len()` with the
/// given ghost values, using coefficients tabulated at time `t`.
#[allow(clippy::too_many_arguments)]
pub fn rhs_into(
    field: &CoefficientField,
    table: &SiteTable,
    t: f64,
    offset: i64,
    u: &[f64],
    ghost_left: f64,
    ghost_right: f64,
    out: &mut [f64],
) {
    let n = u.len();
    let p = table.period;
    let mut k = offset.rem_euclid(p as i64) as usize;
    let mut km = (k + p - 1) % p;
    let mut kp = (k + 1) % p;
    let logistic = !table.a.is_empty();
    for i in 0..n {
        let ui = u[i];
        let ul = if i == 0 { ghost_left } else { u[i - 1] };
        let ur = if i + 1 == n { ghost_right } else { u[i + 1] };
        let f = if logistic {
            table.r[k] - table.a[k] * ui.max(0.0)
        } else {
            field.f_tabled(table, t, offset + i as i64, ui)
        };
        out[i] = table.d[kp] * (ur - ui) + table.d[km] * (ul - ui) + ui * f;
        km = k;
        k = kp;
        kp = if kp + 1 == p { 0 } else { kp + 1 };
    }
}

/// Site derivatives of the lattice equation for a state.
pub fn rhs(state: &LatticeState, field: &CoefficientField) -> Vec<f64> {
    let mut table = SiteTable::default();
    field.fill_table(state.time, &mut table);
    let (gl, gr) = state.ghosts(state.time, &state.values);
    let mut out = vec![0.0; state.values.len()];
    rhs_into(field, &table, state.time, state.offset, &state.values, gl, gr, &mut out);
    out
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct IntegrationStats {
    pub steps: usize,
    /// Values in `[-1e-12, 0)` reset to zero.
    pub clamped: usize,
    pub shifts: i64,
}

pub const UNDERSHOOT_TOLERANCE: f64 = 1e-12;

/// Fixed-step RK4 integrator with optional co-moving window.
pub struct Integrator<'a> {
    field: &'a CoefficientField,
    opts: SimOptions,
    frame: Option<FramePosition>,
    tables: [SiteTable; 3],
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a> Integrator<'a> {
    pub fn new(field: &'a CoefficientField, opts: &SimOptions) -> Result<Self> {
        opts.validate(field)?;
        Ok(Integrator {
            field,
            opts: opts.clone(),
            frame: None,
            tables: Default::default(),
            k: Default::default(),
            tmp: Vec::new(),
        })
    }

    /// Keep the window's leftmost site at `floor(position(t))`, shifting after every step.
    pub fn with_frame(mut self, position: FramePosition) -> Self {
        self.frame = Some(position);
        self
    }

    pub fn options(&self) -> &SimOptions {
        &self.opts
    }

    /// Advance `state` to `t1`, calling `observer` on the initial state, every
    /// `output_stride` steps and on the final state.
    pub fn advance(
        &mut self,
        state: &mut LatticeState,
        t1: f64,
        observer: &mut dyn FnMut(&LatticeState) -> Result<()>,
    ) -> Result<IntegrationStats> {
        let t0 = state.time;
        if t1 < t0 {
            return Err(Error::Parameter(format!("cannot integrate backward from {t0} to {t1}")));
        }
        if let Boundary::Periodic = state.boundary {
            let p = self.field.structure().site_period();
            if !state.values.len().is_multiple_of(p) {
                return Err(Error::Parameter(format!(
                    "periodic window of {} sites is not a multiple of the site period {p}",
                    state.values.len()
                )));
            }
            if self.frame.is_some() {
                return Err(Error::Parameter("periodic windows cannot move".into()));
            }
        }
        let mut stats = IntegrationStats::default();
        self.align_frame(state, &mut stats);
        observer(state)?;
        let n = step_count(t1 - t0, self.opts.dt);
        if n == 0 {
            return Ok(stats);
        }
        let h = (t1 - t0) / n as f64;
        for s in 0..n {
            let t = t0 + s as f64 * h;
            self.step(state, t, h)?;
            state.time = if s + 1 == n { t1 } else { t0 + (s + 1) as f64 * h };
            stats.steps += 1;
            stats.clamped += sanitize(state)?;
            self.align_frame(state, &mut stats);
            if (s + 1) % self.opts.output_stride == 0 || s + 1 == n {
                observer(state)?;
            }
        }
        Ok(stats)
    }

    fn step(&mut self, state: &mut LatticeState, t: f64, h: f64) -> Result<()> {
        let n = state.values.len();
        for k in self.k.iter_mut() {
            k.resize(n, 0.0);
        }
        self.tmp.resize(n, 0.0);
        let field = self.field;
        field.fill_table(t, &mut self.tables[0]);
        field.fill_table(t + 0.5 * h, &mut self.tables[1]);
        field.fill_table(t + h, &mut self.tables[2]);
        let off = state.offset;
        let b = &state.boundary;
        let u = &state.values;
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;

        let (gl, gr) = ghosts(b, t, off, u);
        rhs_into(field, &self.tables[0], t, off, u, gl, gr, k1);
        for i in 0..n {
            tmp[i] = u[i] + 0.5 * h * k1[i];
        }
        let tm = t + 0.5 * h;
        let (gl, gr) = ghosts(b, tm, off, tmp);
        rhs_into(field, &self.tables[1], tm, off, tmp, gl, gr, k2);
        for i in 0..n {
            tmp[i] = u[i] + 0.5 * h * k2[i];
        }
        let (gl, gr) = ghosts(b, tm, off, tmp);
        rhs_into(field, &self.tables[1], tm, off, tmp, gl, gr, k3);
        for i in 0..n {
            tmp[i] = u[i] + h * k3[i];
        }
        let (gl, gr) = ghosts(b, t + h, off, tmp);
        rhs_into(field, &self.tables[2], t + h, off, tmp, gl, gr, k4);
        let u = &mut state.values;
        for i in 0..n {
            u[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
            if !u[i].is_finite() {
                return Err(Error::BlowUp { time: t + h });
            }
        }
        Ok(())
    }

    fn align_frame(&self, state: &mut LatticeState, stats: &mut IntegrationStats) {
        let Some(pos) = &self.frame else { return };
        let target = pos(state.time).floor() as i64;
        while state.offset < target {
            let t = state.time;
            let last = *state.values.last().unwrap();
            let j_last = state.last_site();
            let next = match &state.boundary {
                Boundary::Front { right: RightGhost::Tail(k), .. } => k(t, j_last) * last,
                Boundary::Front { right: RightGhost::Zero, .. } => 0.0,
                Boundary::ClampBoth(v) => *v,
                Boundary::Periodic => unreachable!(),
            };
            state.values.remove(0);
            state.values.push(next);
            state.offset += 1;
            stats.shifts += 1;
        }
        while state.offset > target {
            let t = state.time;
            let prev = match &state.boundary {
                Boundary::Front { uplus, .. } => uplus.value(t, state.offset - 1),
                Boundary::ClampBoth(v) => *v,
                Boundary::Periodic => unreachable!(),
            };
            state.values.pop();
            state.values.insert(0, prev);
            state.offset -= 1;
            stats.shifts -= 1;
        }
    }
}

fn sanitize(state: &mut LatticeState) -> Result<usize> {
    let mut clamped = 0;
    for (i, v) in state.values.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v >= -UNDERSHOOT_TOLERANCE {
                *v = 0.0;
                clamped += 1;
            } else {
                return Err(Error::Undershoot { time: state.time, site: state.offset + i as i64, value: *v });
            }
        }
    }
    Ok(clamped)
}

/// Integrate `state` to `t1` on a fixed window.
pub fn integrate(state: &LatticeState, field: &CoefficientField, t1: f64, opts: &SimOptions) -> Result<LatticeState> {
    let mut s = state.clone();
    Integrator::new(field, opts)?.advance(&mut s, t1, &mut |_| Ok(()))?;
    Ok(s)
}

/// Integrate and collect the observed states.
pub fn integrate_trajectory(
    state: &LatticeState,
    field: &CoefficientField,
    t1: f64,
    opts: &SimOptions,
) -> Result<Vec<LatticeState>> {
    let mut s = state.clone();
    let mut out = Vec::new();
    Integrator::new(field, opts)?.advance(&mut s, t1, &mut |st| {
        out.push(st.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Uniformly time-sampled values on a fixed set of sites.
#[derive(Clone, Debug)]
pub struct TimeGridFunction {
    pub t0: f64,
    pub dt: f64,
    pub offset: i64,
    /// `values[k][i]` at time `t0 + k dt`, site `offset + i`.
    pub values: Vec<Vec<f64>>,
}

impl TimeGridFunction {
    pub fn from_fn(t0: f64, dt: f64, steps: usize, offset: i64, sites: usize, f: impl Fn(f64, i64) -> f64) -> Self {
        let values = (0..=steps)
            .map(|k| {
                let t = t0 + k as f64 * dt;
                (0..sites).map(|i| f(t, offset + i as i64)).collect()
            })
            .collect();
        TimeGridFunction { t0, dt, offset, values }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubSuperKind {
    Sub,
    Super,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub kind: SubSuperKind,
    pub min_defect: f64,
    pub min_at: (f64, i64),
    pub max_defect: f64,
    pub max_at: (f64, i64),
    pub tolerance: f64,
    /// Defect sign agrees with `kind` up to `tolerance`.
    pub consistent: bool,
}

/// Defect `v_t - N(v)` of a candidate over interior sites and the times of
/// `window` where a central difference is available.
pub fn check_sub_super(
    candidate: &TimeGridFunction,
    field: &CoefficientField,
    kind: SubSuperKind,
    window: (f64, f64),
    opts: &SimOptions,
    tol: f64,
) -> Result<ResidualReport> {
    if candidate.dt > opts.dt * (1.0 + 1e-12) {
        return Err(Error::Resolution { candidate: candidate.dt, required: opts.dt });
    }
    let nt = candidate.values.len();
    let ns = candidate.values.first().map(|v| v.len()).unwrap_or(0);
    if nt < 5 || ns < 3 {
        return Err(Error::InsufficientGrid("candidate needs at least 5 times and 3 sites".into()));
    }
    let mut series = vec![0.0; nt];
    let mut rep = ResidualReport {
        kind,
        min_defect: f64::INFINITY,
        min_at: (0.0, 0),
        max_defect: f64::NEG_INFINITY,
        max_at: (0.0, 0),
        tolerance: tol,
        consistent: true,
    };
    for i in 1..ns - 1 {
        for (k, row) in candidate.values.iter().enumerate() {
            series[k] = row[i];
        }
        let j = candidate.offset + i as i64;
        for k in 0..nt {
            let t = candidate.t0 + k as f64 * candidate.dt;
            if t < window.0 - 1e-12 || t > window.1 + 1e-12 {
                continue;
            }
            let Some(vt) = central_derivative(&series, k, candidate.dt) else { continue };
            let row = &candidate.values[k];
            let v = row[i];
            let n = field.d(t, j - 1) * (row[i - 1] - v) + field.d(t, j + 1) * (row[i + 1] - v) + v * field.f(t, j, v);
            let defect = vt - n;
            if defect < rep.min_defect {
                rep.min_defect = defect;
                rep.min_at = (t, j);
            }
            if defect > rep.max_defect {
                rep.max_defect = defect;
                rep.max_at = (t, j);
            }
        }
    }
    if !rep.min_defect.is_finite() {
        return Err(Error::InsufficientGrid("no interior sample inside the time window".into()));
    }
    rep.consistent = match kind {
        SubSuperKind::Super => rep.min_defect >= -tol,
        SubSuperKind::Sub => rep.max_defect <= tol,
    };
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum EntireKind {
    /// One period `[0, T]`, extended periodically.
    Periodic { period: f64 },
    /// The interval `[t_start, t_start + span]`; values outside are clamped to the ends.
    Window { t_start: f64 },
}

/// The positive entire solution, sampled on one spatial period of sites.
#[derive(Clone, Debug, Serialize)]
pub struct EntireSolution {
    pub kind: EntireKind,
    pub site_period: usize,
    pub h: f64,
    /// `samples[k][j]` at time `k h` from the start of the sampled interval.
    pub samples: Vec<Vec<f64>>,
    pub derivatives: Vec<Vec<f64>>,
    /// Sup-norm difference of successive pullback iterates.
    pub history: Vec<f64>,
    pub inf: f64,
    pub sup: f64,
    /// Pullback start value `M`.
    pub start_level: f64,
}

impl EntireSolution {
    /// A constant entire solution (for fields with a known equilibrium).
    pub fn constant(value: f64) -> Self {
        EntireSolution {
            kind: EntireKind::Periodic { period: 1.0 },
            site_period: 1,
            h: 1.0,
            samples: vec![vec![value]; 2],
            derivatives: vec![vec![0.0]; 2],
            history: Vec::new(),
            inf: value,
            sup: value,
            start_level: value,
        }
    }

    /// `u+_j(t)` by cubic Hermite interpolation between samples.
    pub fn value(&self, t: f64, j: i64) -> f64 {
        let p = self.site_period;
        let kj = if p == 1 { 0 } else { j.rem_euclid(p as i64) as usize };
        let n = self.samples.len() - 1;
        let tau = match self.kind {
            EntireKind::Periodic { period } => t.rem_euclid(period),
            EntireKind::Window { t_start } => (t - t_start).clamp(0.0, n as f64 * self.h),
        };
        let s = tau / self.h;
        let k = (s.floor() as usize).min(n - 1);
        let th = s - k as f64;
        hermite(
            self.samples[k][kj],
            self.derivatives[k][kj],
            self.samples[k + 1][kj],
            self.derivatives[k + 1][kj],
            self.h,
            th,
        )
    }

    pub fn times(&self) -> Vec<f64> {
        let t0 = match self.kind {
            EntireKind::Periodic { .. } => 0.0,
            EntireKind::Window { t_start } => t_start,
        };
        (0..self.samples.len()).map(|k| t0 + k as f64 * self.h).collect()
    }

    /// Sup over sampled sites of `|u(t_end) - u(t_start)|` for the periodic case.
    pub fn periodicity_defect(&self) -> f64 {
        let first = &self.samples[0];
        let last = &self.samples[self.samples.len() - 1];
        first.iter().zip(last).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntireOptions {
    pub tol: f64,
    pub n_max: usize,
    /// Pullback step for fields without a time period.
    pub h_step: f64,
}

impl Default for EntireOptions {
    fn default() -> Self {
        EntireOptions { tol: 1e-8, n_max: 500, h_step: 1.0 }
    }
}

fn sample_derivatives(field: &CoefficientField, times: &[f64], samples: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut table = SiteTable::default();
    times
        .iter()
        .zip(samples)
        .map(|(&t, u)| {
            field.fill_table(t, &mut table);
            let n = u.len();
            let mut out = vec![0.0; n];
            rhs_into(field, &table, t, 0, u, u[n - 1], u[0], &mut out);
            out
        })
        .collect()
}

fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs())).fold(0.0, f64::max)
}

fn periodic_window(field: &CoefficientField) -> usize {
    // At least 3 sites; a multiple of the site period.
    let p = field.structure().site_period();
    p * 3usize.div_ceil(p)
}

fn wrap_samples(samples: Vec<Vec<f64>>, p: usize) -> Vec<Vec<f64>> {
    samples.into_iter().map(|row| row[..p].to_vec()).collect()
}

/// Pullback construction of `u+`: one period for periodic (or
/// time-independent) fields, `[0, horizon]` otherwise.
pub fn compute_entire_solution(
    field: &CoefficientField,
    horizon: f64,
    opts: &EntireOptions,
    sim: &SimOptions,
) -> Result<EntireSolution> {
    match field.structure().floquet_periods() {
        Some((period, _)) => periodic_entire(field, period, opts, sim),
        None => compute_entire_solution_window(field, 0.0, horizon, opts, sim),
    }
}

fn periodic_entire(
    field: &CoefficientField,
    period: f64,
    opts: &EntireOptions,
    sim: &SimOptions,
) -> Result<EntireSolution> {
    let p = field.structure().site_period();
    let width = periodic_window(field);
    let m = field.m0();
    let mut integ = Integrator::new(field, sim)?;
    let mut state = LatticeState::new(0, vec![m; width], 0.0, Boundary::Periodic)?;
    let mut prev: Option<Vec<Vec<f64>>> = None;
    let mut history = Vec::new();
    for _ in 0..opts.n_max {
        state.time = 0.0;
        let mut traj = Vec::new();
        integ.advance(&mut state, period, &mut |s| {
            traj.push(s.values.clone());
            Ok(())
        })?;
        if let Some(pr) = &prev {
            let delta = max_diff(pr, &traj);
            history.push(delta);
            if delta < opts.tol {
                let samples = wrap_samples(traj, p);
                let n = samples.len() - 1;
                let h = period / n as f64;
                let times: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
                return finish_entire(field, EntireKind::Periodic { period }, h, samples, &times, history, m);
            }
        }
        prev = Some(traj);
    }
    Err(Error::Convergence { history })
}

/// Pullback over `[t_start, t_end]` from starts `t_start - n h_step`.
pub fn compute_entire_solution_window(
    field: &CoefficientField,
    t_start: f64,
    t_end: f64,
    opts: &EntireOptions,
    sim: &SimOptions,
) -> Result<EntireSolution> {
    if !(t_end > t_start) {
        return Err(Error::Parameter(format!("empty window [{t_start}, {t_end}]")));
    }
    let p = field.structure().site_period();
    let width = periodic_window(field);
    let m = field.m0();
    let mut integ = Integrator::new(field, sim)?;
    let mut prev: Option<Vec<Vec<f64>>> = None;
    let mut history = Vec::new();
    for n in 1..=opts.n_max {
        let t0 = t_start - n as f64 * opts.h_step;
        let mut state = LatticeState::new(0, vec![m; width], t0, Boundary::Periodic)?;
        integ.advance(&mut state, t_start, &mut |_| Ok(()))?;
        let mut traj = Vec::new();
        integ.advance(&mut state, t_end, &mut |s| {
            traj.push(s.values.clone());
            Ok(())
        })?;
        if let Some(pr) = &prev {
            let delta = max_diff(pr, &traj);
            history.push(delta);
            if delta < opts.tol {
                let samples = wrap_samples(traj, p);
                let k = samples.len() - 1;
                let h = (t_end - t_start) / k as f64;
                let times: Vec<f64> = (0..=k).map(|i| t_start + i as f64 * h).collect();
                return finish_entire(field, EntireKind::Window { t_start }, h, samples, &times, history, m);
            }
        }
        prev = Some(traj);
    }
    Err(Error::Convergence { history })
}

fn finish_entire(
    field: &CoefficientField,
    kind: EntireKind,
    h: f64,
    samples: Vec<Vec<f64>>,
    times: &[f64],
    history: Vec<f64>,
    start_level: f64,
) -> Result<EntireSolution> {
    let derivatives = sample_derivatives(field, times, &samples);
    let inf = samples.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let sup = samples.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(inf > 0.0) {
        return Err(Error::Domain(format!("pullback limit is not strictly positive (inf {inf})")));
    }
    Ok(EntireSolution { kind, site_period: samples[0].len(), h, samples, derivatives, history, inf, sup, start_level })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{make_family, FamilyParams};

    fn logistic() -> CoefficientField {
        make_family(&FamilyParams::Homogeneous { d: 1.0, r: 1.0, a: 1.0 }).unwrap()
    }

    #[test]
    fn rhs_equilibria_and_hand_value() {
        let f = logistic();
        let s = LatticeState::new(0, vec![1.0; 5], 0.0, Boundary::ClampBoth(1.0)).unwrap();
        assert!(rhs(&s, &f).iter().all(|&v| v == 0.0));
        let s = LatticeState::new(0, vec![0.0; 5], 0.0, Boundary::ClampBoth(0.0)).unwrap();
        assert!(rhs(&s, &f).iter().all(|&v| v == 0.0));
        let s = LatticeState::new(-1, vec![0.0, 1.0, 0.0], 0.0, Boundary::ClampBoth(0.0)).unwrap();
        assert_eq!(rhs(&s, &f)[1], -2.0);
    }

    #[test]
    fn homogeneous_data_follow_scalar_logistic() {
        let f = make_family(&FamilyParams::Homogeneous { d: 3.0, r: 1.0, a: 1.0 }).unwrap();
        let s = LatticeState::new(0, vec![0.5; 8], 0.0, Boundary::Periodic).unwrap();
        let out = integrate(&s, &f, 1.0, &SimOptions::default()).unwrap();
        let e = std::f64::consts::E;
        let exact = 0.5 * e / (1.0 - 0.5 + 0.5 * e);
        assert!((exact - 0.731059).abs() < 1e-6);
        for v in out.values {
            assert!((v - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_stays_zero() {
        let f = logistic();
        let s = LatticeState::new(0, vec![0.0; 10], 0.0, Boundary::ClampBoth(0.0)).unwrap();
        let out = integrate(&s, &f, 2.0, &SimOptions::default()).unwrap();
        assert!(out.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_size_bound_is_enforced() {
        let f = logistic();
        let s = LatticeState::new(0, vec![0.5; 4], 0.0, Boundary::Periodic).unwrap();
        assert!(matches!(integrate(&s, &f, 1.0, &SimOptions::with_dt(0.2)), Err(Error::Stability { .. })));
    }

    #[test]
    fn exact_trajectory_is_both_sub_and_super() {
        let f = logistic();
        let init: Vec<f64> = (0..21).map(|i| 1.0 / (1.0 + (0.5 * (i as f64 - 10.0)).exp())).collect();
        let s = LatticeState::new(-10, init, 0.0, Boundary::ClampBoth(0.0)).unwrap();
        let traj = integrate_trajectory(&s, &f, 1.0, &SimOptions::default()).unwrap();
        let grid = TimeGridFunction {
            t0: 0.0,
            dt: 0.01,
            offset: -10,
            values: traj.iter().map(|s| s.values.clone()).collect(),
        };
        let rep = check_sub_super(&grid, &f, SubSuperKind::Super, (0.0, 1.0), &SimOptions::default(), 1e-6).unwrap();
        assert!(rep.min_defect.abs() < 1e-6 && rep.max_defect.abs() < 1e-6, "{rep:?}");
        let coarse = TimeGridFunction { dt: 0.02, ..grid };
        assert!(matches!(
            check_sub_super(&coarse, &f, SubSuperKind::Sub, (0.0, 1.0), &SimOptions::default(), 1e-6),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn homogeneous_entire_solution_is_one() {
        let f = logistic();
        let opts = EntireOptions { tol: 1e-10, ..Default::default() };
        let u = compute_entire_solution(&f, 1.0, &opts, &SimOptions::default()).unwrap();
        assert!((u.value(0.3, 7) - 1.0).abs() < 1e-10);
        assert!(u.inf > 0.0);
    }

    #[test]
    fn co_moving_window_shifts_with_frame() {
        let f = logistic();
        let init: Vec<f64> = (0..30).map(|i| if i < 10 { 1.0 } else { 0.0 }).collect();
        let uplus = Arc::new(EntireSolution::constant(1.0));
        let s = LatticeState::new(0, init, 0.0, Boundary::Front { uplus, right: RightGhost::Zero }).unwrap();
        let mut st = s.clone();
        let mut integ = Integrator::new(&f, &SimOptions::default()).unwrap().with_frame(Arc::new(|t| 2.0 * t));
        let stats = integ.advance(&mut st, 3.0, &mut |_| Ok(())).unwrap();
        assert_eq!(st.offset, 6);
        assert_eq!(stats.shifts, 6);
        assert_eq!(st.values.len(), 30);
    }
}
