//! Coefficient fields `d(t,j)` and `f(t,j,u)`, builtin logistic families and
//! the audit of the standing hypotheses on them.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::cumulative_trapezoid;

pub type SiteFn = Arc<dyn Fn(f64, i64) -> f64 + Send + Sync>;
pub type ReactionFn = Arc<dyn Fn(f64, i64, f64) -> f64 + Send + Sync>;

/// Per-capita growth law.
#[derive(Clone)]
pub enum Growth {
    /// `f = r(t,j) - a(t,j) max(u, 0)`.
    Logistic { r: SiteFn, a: SiteFn },
    /// Arbitrary `f(t,j,u)`; the field clamps `u <= 0` to `u = 0` before calling it.
    General(ReactionFn),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Structure {
    Homogeneous,
    TimePeriodic { period: f64 },
    SpacePeriodic { period: usize },
    TimeSpacePeriodic { time_period: f64, space_period: usize },
    TimeOnly,
}

impl Structure {
    pub fn time_period(&self) -> Option<f64> {
        match *self {
            Structure::TimePeriodic { period } => Some(period),
            Structure::TimeSpacePeriodic { time_period, .. } => Some(time_period),
            _ => None,
        }
    }

    /// Period in `j` of the coefficients; 1 for fields constant in space.
    pub fn site_period(&self) -> usize {
        match *self {
            Structure::SpacePeriodic { period } => period,
            Structure::TimeSpacePeriodic { space_period, .. } => space_period,
            _ => 1,
        }
    }

    pub fn is_time_independent(&self) -> bool {
        matches!(self, Structure::Homogeneous | Structure::SpacePeriodic { .. })
    }

    /// `(T, J)` for the Floquet machinery. Time-independent fields use `T = 1`.
    pub fn floquet_periods(&self) -> Option<(f64, usize)> {
        match *self {
            Structure::Homogeneous => Some((1.0, 1)),
            Structure::TimePeriodic { period } => Some((period, 1)),
            Structure::SpacePeriodic { period } => Some((1.0, period)),
            Structure::TimeSpacePeriodic { time_period, space_period } => Some((time_period, space_period)),
            Structure::TimeOnly => None,
        }
    }
}

/// Declared constants of a field.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FieldBounds {
    /// Saturation level: `f < 0` for `u > m0`.
    pub m0: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// Upper bound of `-f_u` on `[0, m0]` (and beyond for logistic laws).
    pub slope_bound: f64,
    /// Lipschitz bound of `u f(t,j,u)` on `[0, m0]`.
    pub reaction_lipschitz: f64,
}

#[derive(Clone)]
pub struct CoefficientField {
    name: String,
    dispersal: SiteFn,
    growth: Growth,
    structure: Structure,
    bounds: FieldBounds,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("name", &self.name)
            .field("structure", &self.structure)
            .field("bounds", &self.bounds)
            .finish()
    }
}

/// Coefficients of one time instant, tabulated over one spatial period.
#[derive(Clone, Debug, Default)]
pub struct SiteTable {
    pub period: usize,
    pub d: Vec<f64>,
    pub r: Vec<f64>,
    pub a: Vec<f64>,
}

impl SiteTable {
    #[inline]
    pub fn index(&self, j: i64) -> usize {
        if self.period == 1 {
            0
        } else {
            j.rem_euclid(self.period as i64) as usize
        }
    }
}

impl CoefficientField {
    pub fn new(
        name: impl Into<String>,
        dispersal: SiteFn,
        growth: Growth,
        structure: Structure,
        bounds: FieldBounds,
    ) -> Result<Self> {
        if let Some(t) = structure.time_period() {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Parameter(format!("time period must be positive, got {t}")));
            }
        }
        if structure.site_period() == 0 {
            return Err(Error::Parameter("space period must be at least 1".into()));
        }
        if !(bounds.d_min > 0.0 && bounds.d_min <= bounds.d_max) {
            return Err(Error::Parameter(format!(
                "dispersal bounds must satisfy 0 < d_min <= d_max, got [{}, {}]",
                bounds.d_min, bounds.d_max
            )));
        }
        if !(bounds.m0 > 0.0 && bounds.slope_bound >= 0.0 && bounds.reaction_lipschitz >= 0.0) {
            return Err(Error::Parameter("saturation level and Lipschitz bounds must be positive".into()));
        }
        Ok(CoefficientField { name: name.into(), dispersal, growth, structure, bounds })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn bounds(&self) -> FieldBounds {
        self.bounds
    }

    pub fn m0(&self) -> f64 {
        self.bounds.m0
    }

    pub fn growth(&self) -> &Growth {
        &self.growth
    }

    #[inline]
    pub fn d(&self, t: f64, j: i64) -> f64 {
        (self.dispersal)(t, j)
    }

    /// Per-capita growth rate; arguments `u <= 0` are evaluated at `u = 0`.
    #[inline]
    pub fn f(&self, t: f64, j: i64, u: f64) -> f64 {
        match &self.growth {
            Growth::Logistic { r, a } => r(t, j) - a(t, j) * u.max(0.0),
            Growth::General(g) => g(t, j, u.max(0.0)),
        }
    }

    #[inline]
    pub fn f0(&self, t: f64, j: i64) -> f64 {
        self.f(t, j, 0.0)
    }

    /// Tabulate `d`, and for logistic growth `r` and `a`, over one site period.
    pub fn fill_table(&self, t: f64, table: &mut SiteTable) {
        let p = self.structure.site_period();
        table.period = p;
        table.d.resize(p, 0.0);
        for k in 0..p {
            table.d[k] = (self.dispersal)(t, k as i64);
        }
        match &self.growth {
            Growth::Logistic { r, a } => {
                table.r.resize(p, 0.0);
                table.a.resize(p, 0.0);
                for k in 0..p {
                    table.r[k] = r(t, k as i64);
                    table.a[k] = a(t, k as i64);
                }
            }
            Growth::General(g) => {
                table.r.resize(p, 0.0);
                table.a.clear();
                for k in 0..p {
                    table.r[k] = g(t, k as i64, 0.0);
                }
            }
        }
    }

    /// Growth rate through a table filled at time `t`.
    #[inline]
    pub fn f_tabled(&self, table: &SiteTable, t: f64, j: i64, u: f64) -> f64 {
        match &self.growth {
            Growth::Logistic { .. } => {
                let k = table.index(j);
                table.r[k] - table.a[k] * u.max(0.0)
            }
            Growth::General(g) => {
                if u <= 0.0 {
                    table.r[table.index(j)]
                } else {
                    g(t, j, u)
                }
            }
        }
    }

    /// The same field with `f` replaced by `f + shift`.
    pub fn with_growth_shift(&self, shift: f64) -> Result<Self> {
        let growth = match &self.growth {
            Growth::Logistic { r, a } => {
                let r = r.clone();
                Growth::Logistic { r: Arc::new(move |t, j| r(t, j) + shift), a: a.clone() }
            }
            Growth::General(g) => {
                let g = g.clone();
                Growth::General(Arc::new(move |t, j, u| g(t, j, u) + shift))
            }
        };
        let mut bounds = self.bounds;
        if let Growth::Logistic { a, .. } = &self.growth {
            // M0 = sup r / inf a moves by shift / inf a.
            bounds.m0 += shift / self.sample_inf(|t, j| a(t, j));
        }
        bounds.reaction_lipschitz += shift.abs();
        if bounds.m0 <= 0.0 {
            return Err(Error::Parameter("shifted growth has no positive saturation level".into()));
        }
        CoefficientField::new(format!("{}+{shift}", self.name), self.dispersal.clone(), growth, self.structure, bounds)
    }

    fn sample_inf(&self, g: impl Fn(f64, i64) -> f64) -> f64 {
        let (t_end, p) = (self.structure.time_period().unwrap_or(1.0), self.structure.site_period());
        let mut inf = f64::INFINITY;
        for k in 0..=200 {
            let t = t_end * k as f64 / 200.0;
            for j in 0..p as i64 {
                inf = inf.min(g(t, j));
            }
        }
        inf
    }
}

/// Builtin logistic families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Homogeneous,
    TimePeriodic,
    SpacePeriodic,
    TimeSpacePeriodic,
    TimeOnly,
}

/// Parameters of the builtin families; `kind` selects the variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyParams {
    /// `d`, `f = r - a u`.
    Homogeneous {
        #[serde(default = "one")]
        d: f64,
        #[serde(default = "one")]
        r: f64,
        #[serde(default = "one")]
        a: f64,
    },
    /// `f = r0 + r_amp sin(2 pi t / period) - a u`, constant `d`.
    TimePeriodic {
        #[serde(default = "one")]
        period: f64,
        #[serde(default = "one")]
        d: f64,
        #[serde(default = "one")]
        r0: f64,
        #[serde(default)]
        r_amp: f64,
        #[serde(default = "one")]
        a: f64,
    },
    /// `d = d0 + d_amp cos(2 pi j / J)`, `f = r0 + r_amp cos(2 pi j / J) - a u`.
    SpacePeriodic {
        space_period: usize,
        #[serde(default = "one")]
        d0: f64,
        #[serde(default)]
        d_amp: f64,
        #[serde(default = "one")]
        r0: f64,
        #[serde(default)]
        r_amp: f64,
        #[serde(default = "one")]
        a: f64,
    },
    /// `d = d0 + d_amp cos(2 pi t / T) cos(2 pi j / J)`,
    /// `f = r0 + r_amp_t sin(2 pi t / T) + r_amp_j cos(2 pi j / J) - a u`.
    TimeSpacePeriodic {
        #[serde(default = "one")]
        period: f64,
        space_period: usize,
        #[serde(default = "one")]
        d0: f64,
        #[serde(default)]
        d_amp: f64,
        #[serde(default = "one")]
        r0: f64,
        #[serde(default)]
        r_amp_t: f64,
        #[serde(default)]
        r_amp_j: f64,
        #[serde(default = "one")]
        a: f64,
    },
    /// `f = r0 + sum_k amplitudes[k] sin(frequencies[k] t) - a u`, constant `d`.
    TimeOnly {
        #[serde(default = "one")]
        d: f64,
        #[serde(default = "one")]
        r0: f64,
        #[serde(default)]
        amplitudes: Vec<f64>,
        #[serde(default)]
        frequencies: Vec<f64>,
        #[serde(default = "one")]
        a: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl FamilyParams {
    pub fn kind(&self) -> FamilyKind {
        match self {
            FamilyParams::Homogeneous { .. } => FamilyKind::Homogeneous,
            FamilyParams::TimePeriodic { .. } => FamilyKind::TimePeriodic,
            FamilyParams::SpacePeriodic { .. } => FamilyKind::SpacePeriodic,
            FamilyParams::TimeSpacePeriodic { .. } => FamilyKind::TimeSpacePeriodic,
            FamilyParams::TimeOnly { .. } => FamilyKind::TimeOnly,
        }
    }

    /// The time-space periodic field used by the periodic wave experiments.
    pub fn shipped_time_space_periodic() -> Self {
        FamilyParams::TimeSpacePeriodic {
            period: 1.0,
            space_period: 2,
            d0: 1.0,
            d_amp: 0.25,
            r0: 1.0,
            r_amp_t: 0.5,
            r_amp_j: 0.3,
            a: 1.0,
        }
    }

    /// `r(t) = 1 + 0.3 sin t + 0.3 sin(sqrt(2) t)`.
    pub fn shipped_quasi_periodic() -> Self {
        FamilyParams::TimeOnly {
            d: 1.0,
            r0: 1.0,
            amplitudes: vec![0.3, 0.3],
            frequencies: vec![1.0, 2f64.sqrt()],
            a: 1.0,
        }
    }
}

fn logistic_bounds(d_min: f64, d_max: f64, r_sup: f64, r_inf: f64, a: f64) -> FieldBounds {
    let m0 = r_sup / a;
    // |d/du (u (r - a u))| = |r - 2 a u| on [0, m0].
    let lip = r_sup.abs().max(r_inf.abs()).max(2.0 * a * m0 - r_inf);
    FieldBounds { m0, d_min, d_max, slope_bound: a, reaction_lipschitz: lip }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Build one of the builtin logistic fields.
pub fn make_family(params: &FamilyParams) -> Result<CoefficientField> {
    match params.clone() {
        FamilyParams::Homogeneous { d, r, a } => {
            check_positive("d", d)?;
            check_positive("a", a)?;
            check_positive("r", r)?;
            let growth = Growth::Logistic { r: Arc::new(move |_, _| r), a: Arc::new(move |_, _| a) };
            CoefficientField::new(
                "homogeneous",
                Arc::new(move |_, _| d),
                growth,
                Structure::Homogeneous,
                logistic_bounds(d, d, r, r, a),
            )
        }
        FamilyParams::TimePeriodic { period, d, r0, r_amp, a } => {
            check_positive("period", period)?;
            check_positive("d", d)?;
            check_positive("a", a)?;
            check_positive("r0 + |r_amp|", r0 + r_amp.abs())?;
            let w = 2.0 * PI / period;
            let growth =
                Growth::Logistic { r: Arc::new(move |t, _| r0 + r_amp * (w * t).sin()), a: Arc::new(move |_, _| a) };
            CoefficientField::new(
                "time-periodic",
                Arc::new(move |_, _| d),
                growth,
                Structure::TimePeriodic { period },
                logistic_bounds(d, d, r0 + r_amp.abs(), r0 - r_amp.abs(), a),
            )
        }
        FamilyParams::SpacePeriodic { space_period, d0, d_amp, r0, r_amp, a } => {
            if space_period == 0 {
                return Err(Error::Parameter("space_period must be at least 1".into()));
            }
            check_positive("d0 - |d_amp|", d0 - d_amp.abs())?;
            check_positive("a", a)?;
            check_positive("r0 + |r_amp|", r0 + r_amp.abs())?;
            let jp = space_period as i64;
            let wj = 2.0 * PI / space_period as f64;
            let growth = Growth::Logistic {
                r: Arc::new(move |_, j| r0 + r_amp * (wj * j.rem_euclid(jp) as f64).cos()),
                a: Arc::new(move |_, _| a),
            };
            CoefficientField::new(
                "space-periodic",
                Arc::new(move |_, j| d0 + d_amp * (wj * j.rem_euclid(jp) as f64).cos()),
                growth,
                Structure::SpacePeriodic { period: space_period },
                logistic_bounds(d0 - d_amp.abs(), d0 + d_amp.abs(), r0 + r_amp.abs(), r0 - r_amp.abs(), a),
            )
        }
        FamilyParams::TimeSpacePeriodic { period, space_period, d0, d_amp, r0, r_amp_t, r_amp_j, a } => {
            check_positive("period", period)?;
            if space_period == 0 {
                return Err(Error::Parameter("space_period must be at least 1".into()));
            }
            check_positive("d0 - |d_amp|", d0 - d_amp.abs())?;
            check_positive("a", a)?;
            let r_sup = r0 + r_amp_t.abs() + r_amp_j.abs();
            check_positive("sup r", r_sup)?;
            let jp = space_period as i64;
            let wt = 2.0 * PI / period;
            let wj = 2.0 * PI / space_period as f64;
            let growth = Growth::Logistic {
                r: Arc::new(move |t, j| r0 + r_amp_t * (wt * t).sin() + r_amp_j * (wj * j.rem_euclid(jp) as f64).cos()),
                a: Arc::new(move |_, _| a),
            };
            CoefficientField::new(
                "time-space-periodic",
                Arc::new(move |t, j| d0 + d_amp * (wt * t).cos() * (wj * j.rem_euclid(jp) as f64).cos()),
                growth,
                Structure::TimeSpacePeriodic { time_period: period, space_period },
                logistic_bounds(d0 - d_amp.abs(), d0 + d_amp.abs(), r_sup, r0 - r_amp_t.abs() - r_amp_j.abs(), a),
            )
        }
        FamilyParams::TimeOnly { d, r0, amplitudes, frequencies, a } => {
            check_positive("d", d)?;
            check_positive("a", a)?;
            if amplitudes.len() != frequencies.len() {
                return Err(Error::Parameter("amplitudes and frequencies must have equal length".into()));
            }
            let amp_sum: f64 = amplitudes.iter().map(|x| x.abs()).sum();
            check_positive("r0 + sum |amplitudes|", r0 + amp_sum)?;
            let modes: Vec<(f64, f64)> = amplitudes.into_iter().zip(frequencies).collect();
            let growth = Growth::Logistic {
                r: Arc::new(move |t, _| r0 + modes.iter().map(|(b, w)| b * (w * t).sin()).sum::<f64>()),
                a: Arc::new(move |_, _| a),
            };
            CoefficientField::new(
                "time-only",
                Arc::new(move |_, _| d),
                growth,
                Structure::TimeOnly,
                logistic_bounds(d, d, r0 + amp_sum, r0 - amp_sum, a),
            )
        }
    }
}

/// Sample points for [`audit_h0`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub j_min: i64,
    pub j_max: i64,
    /// Densities are sampled on `[0, u_max]`; must exceed `M0`.
    pub u_max: f64,
    pub u_points: usize,
}

impl SampleGrid {
    /// A grid over `[0, horizon]` covering two site periods and densities up to `2 M0`.
    pub fn for_field(field: &CoefficientField, horizon: f64) -> Self {
        let p = field.structure().site_period() as i64;
        SampleGrid {
            t_start: 0.0,
            t_end: horizon,
            dt: 0.01,
            j_min: -p,
            j_max: 2 * p - 1,
            u_max: 2.0 * field.m0(),
            u_points: 41,
        }
    }

    fn times(&self) -> Vec<f64> {
        let n = ((self.t_end - self.t_start) / self.dt).round().max(1.0) as usize;
        let h = (self.t_end - self.t_start) / n as f64;
        (0..=n).map(|k| self.t_start + k as f64 * h).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClauseResult {
    pub clause: String,
    pub passed: bool,
    /// Extreme value of the clause's test quantity.
    pub value: f64,
    pub witness: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub clauses: Vec<ClauseResult>,
    /// Minimum window average of `inf_j f(t,j,0)`.
    pub averaged_growth: f64,
    pub window_min: f64,
    pub window_policy: String,
    /// Set when a periodic field is audited over fewer than three periods.
    pub short_horizon: bool,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn clause(&self, name: &str) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| c.clause == name)
    }
}

fn finite(v: f64, what: &str, t: f64, j: i64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::MalformedField(format!("{what} is {v} at t = {t}, j = {j}")))
    }
}

/// Minimum and maximum of window averages `(1/(t-s)) int_s^t g` over sample
/// windows with `t - s >= min_len`. Window endpoints are thinned to at most
/// about 2000 per axis.
pub fn window_average_extremes(g: &[f64], h: f64, min_len: f64) -> (f64, f64) {
    let cum = cumulative_trapezoid(g, h);
    let n = g.len();
    let min_steps = ((min_len / h) - 1e-9).ceil().max(1.0) as usize;
    let stride = (n / 2000).max(1);
    let ends: Vec<usize> = (0..n).step_by(stride).chain(std::iter::once(n - 1)).collect();
    let rows = crate::par::map_slice(&ends, |&s| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &t in ends.iter().filter(|&&t| t >= s + min_steps) {
            let avg = (cum[t] - cum[s]) / ((t - s) as f64 * h);
            lo = lo.min(avg);
            hi = hi.max(avg);
        }
        (lo, hi)
    });
    rows.into_iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (lo, hi)| (a.min(lo), b.max(hi)))
}

/// Check the standing hypotheses clause by clause on a sample grid.
pub fn audit_h0(field: &CoefficientField, grid: &SampleGrid) -> Result<AuditReport> {
    let horizon = grid.t_end - grid.t_start;
    if !(horizon > 0.0) || grid.dt <= 0.0 || grid.j_max < grid.j_min || grid.u_points < 2 {
        return Err(Error::InsufficientGrid("empty time, site or density range".into()));
    }
    let structure = field.structure();
    let mut short_horizon = false;
    if let Some(t) = structure.time_period() {
        if horizon < t {
            return Err(Error::InsufficientGrid(format!("horizon {horizon} is shorter than the period {t}")));
        }
        short_horizon = horizon < 3.0 * t;
    }
    let b = field.bounds();
    if grid.u_max <= b.m0 {
        return Err(Error::InsufficientGrid(format!("density samples stop at {} <= M0 = {}", grid.u_max, b.m0)));
    }
    let times = grid.times();
    let sites: Vec<i64> = (grid.j_min..=grid.j_max).collect();
    let us: Vec<f64> = (0..grid.u_points).map(|k| grid.u_max * k as f64 / (grid.u_points - 1) as f64).collect();

    let mut d_lo = (f64::INFINITY, String::new());
    let mut d_hi = (f64::NEG_INFINITY, String::new());
    let mut clamp_err = (0.0f64, String::new());
    let mut sat = (f64::NEG_INFINITY, String::new());
    let mut slope = (f64::NEG_INFINITY, String::new());
    let mut inf_f0 = Vec::with_capacity(times.len());
    for &t in &times {
        let mut g = f64::INFINITY;
        for &j in &sites {
            let d = finite(field.d(t, j), "d", t, j)?;
            if d < d_lo.0 {
                d_lo = (d, format!("t={t}, j={j}"));
            }
            if d > d_hi.0 {
                d_hi = (d, format!("t={t}, j={j}"));
            }
            let f0 = finite(field.f0(t, j), "f", t, j)?;
            g = g.min(f0);
            for u in [-1e-3, -1.0, -10.0] {
                let e = (finite(field.f(t, j, u), "f", t, j)? - f0).abs();
                if e > clamp_err.0 {
                    clamp_err = (e, format!("t={t}, j={j}, u={u}"));
                }
            }
            for k in 1..=8 {
                let u = b.m0 * (1.0 + 1e-6) + (grid.u_max - b.m0) * k as f64 / 8.0;
                let v = finite(field.f(t, j, u), "f", t, j)?;
                if v > sat.0 {
                    sat = (v, format!("t={t}, j={j}, u={u}"));
                }
            }
            let hu = grid.u_max / (grid.u_points - 1) as f64 * 1e-3;
            for &u in &us {
                let s = (finite(field.f(t, j, u + hu), "f", t, j)? - field.f(t, j, u)) / hu;
                if s > slope.0 {
                    slope = (s, format!("t={t}, j={j}, u={u}"));
                }
            }
        }
        inf_f0.push(g);
    }
    let h = times.get(1).map(|t1| t1 - times[0]).unwrap_or(grid.dt);
    let window_min = horizon / 4.0;
    let (avg_lo, _) = window_average_extremes(&inf_f0, h, window_min);

    let mut clauses = vec![
        ClauseResult {
            clause: "dispersal-bounds".into(),
            passed: d_lo.0 >= b.d_min * (1.0 - 1e-12) && d_hi.0 <= b.d_max * (1.0 + 1e-12) && d_lo.0 > 0.0,
            value: d_lo.0,
            witness: format!("min d at {}; max d = {} at {}", d_lo.1, d_hi.0, d_hi.1),
        },
        ClauseResult {
            clause: "clamping".into(),
            passed: clamp_err.0 == 0.0,
            value: clamp_err.0,
            witness: clamp_err.1,
        },
        ClauseResult { clause: "saturation".into(), passed: sat.0 < 0.0, value: sat.0, witness: sat.1 },
        ClauseResult { clause: "decreasing".into(), passed: slope.0 < 0.0, value: slope.0, witness: slope.1 },
        ClauseResult {
            clause: "averaged-growth".into(),
            passed: avg_lo > 0.0,
            value: avg_lo,
            witness: format!("windows of length >= {window_min}"),
        },
    ];

    let tp = structure.time_period();
    let sp = structure.site_period();
    if tp.is_some() || sp > 1 {
        let mut defect = (0.0f64, String::new());
        let probe_u = [0.0, 0.5 * b.m0, b.m0];
        for &t in times.iter().step_by((times.len() / 200).max(1)) {
            for &j in &sites {
                let d = field.d(t, j);
                let mut shifted: Vec<(f64, i64)> = Vec::new();
                if let Some(tp) = tp {
                    shifted.push((t + tp, j));
                }
                if sp > 1 {
                    shifted.push((t, j + sp as i64));
                }
                for (ts, js) in shifted {
                    let mut e = (field.d(ts, js) - d).abs();
                    for &u in &probe_u {
                        e = e.max((field.f(ts, js, u) - field.f(t, j, u)).abs());
                    }
                    if e > defect.0 {
                        defect = (e, format!("t={t}, j={j}"));
                    }
                }
            }
        }
        clauses.push(ClauseResult {
            clause: "periodicity".into(),
            passed: defect.0 <= 1e-12 * (1.0 + b.d_max + b.m0),
            value: defect.0,
            witness: defect.1,
        });
    }

    Ok(AuditReport {
        clauses,
        averaged_growth: avg_lo,
        window_min,
        window_policy: "minimum over windows of length >= horizon/4".into(),
        short_horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn homogeneous() -> CoefficientField {
        make_family(&FamilyParams::Homogeneous { d: 1.0, r: 1.0, a: 1.0 }).unwrap()
    }

    #[test]
    fn homogeneous_family_declares_m0() {
        let f = homogeneous();
        assert_eq!(f.structure(), Structure::Homogeneous);
        assert_eq!(f.m0(), 1.0);
    }

    #[test]
    fn homogeneous_audit_passes_with_unit_average() {
        let f = homogeneous();
        let grid = SampleGrid { t_start: 0.0, t_end: 10.0, dt: 0.01, j_min: -2, j_max: 2, u_max: 2.0, u_points: 41 };
        let rep = audit_h0(&f, &grid).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!((rep.averaged_growth - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_growth_fails_average_clause() {
        let f = CoefficientField::new(
            "negative",
            Arc::new(|_, _| 1.0),
            Growth::General(Arc::new(|_, _, u| -1.0 - u)),
            Structure::Homogeneous,
            FieldBounds { m0: 1.0, d_min: 1.0, d_max: 1.0, slope_bound: 1.0, reaction_lipschitz: 3.0 },
        )
        .unwrap();
        let grid = SampleGrid { t_start: 0.0, t_end: 10.0, dt: 0.01, j_min: 0, j_max: 1, u_max: 2.0, u_points: 11 };
        let rep = audit_h0(&f, &grid).unwrap();
        let c = rep.clause("averaged-growth").unwrap();
        assert!(!c.passed);
        assert!((c.value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn sinusoidal_average_matches_closed_form_windows() {
        let f = make_family(&FamilyParams::TimePeriodic { period: 1.0, d: 1.0, r0: 1.5, r_amp: 0.5, a: 1.0 }).unwrap();
        let grid = SampleGrid { t_start: 0.0, t_end: 10.0, dt: 0.01, j_min: 0, j_max: 0, u_max: 4.0, u_points: 11 };
        let rep = audit_h0(&f, &grid).unwrap();
        assert!(rep.passed());
        // Exact window averages of 1.5 + 0.5 sin(2 pi t) over the same endpoints.
        let w = 2.0 * PI;
        let n = 1000usize;
        let mut exact = f64::INFINITY;
        for s in 0..=n {
            for t in (s + 250)..=n {
                let (a, b) = (s as f64 * 0.01, t as f64 * 0.01);
                exact = exact.min(1.5 + 0.5 * ((w * a).cos() - (w * b).cos()) / (w * (b - a)));
            }
        }
        assert!((rep.averaged_growth - exact).abs() < 1e-4, "{} vs {exact}", rep.averaged_growth);
        assert!((rep.averaged_growth - 1.5).abs() <= 0.5 / (PI * 2.5));
        // One-period quadrature oracle of the mean rate.
        let m = 100_000;
        let q: f64 = (0..m).map(|k| 1.5 + 0.5 * (w * (k as f64 + 0.5) / m as f64).sin()).sum::<f64>() / m as f64;
        assert!((q - 1.5).abs() < 1e-6);
    }

    #[test]
    fn shipped_time_space_periodic_is_periodic() {
        let f = make_family(&FamilyParams::shipped_time_space_periodic()).unwrap();
        let rep = audit_h0(&f, &SampleGrid::for_field(&f, 3.0)).unwrap();
        assert!(rep.passed(), "{rep:?}");
        for k in 0..50 {
            let t = 0.037 * k as f64;
            for j in -3..3 {
                assert_eq!(f.d(t, j), f.d(t, j + 2));
                let alt = 1.0 + 0.25 * (2.0 * PI * t).cos() * if j.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                assert!((f.d(t, j) - alt).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn time_only_family_has_unit_long_average() {
        let f = make_family(&FamilyParams::shipped_quasi_periodic()).unwrap();
        assert_eq!(f.structure(), Structure::TimeOnly);
        let n = 2_000_000;
        let h = 2000.0 / n as f64;
        let avg: f64 = (0..n).map(|k| f.f0((k as f64 + 0.5) * h, 0)).sum::<f64>() * h / 2000.0;
        assert!((avg - 1.0).abs() < 2e-3);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(make_family(&FamilyParams::Homogeneous { d: 1.0, r: 1.0, a: 0.0 }).is_err());
        assert!(make_family(&FamilyParams::TimePeriodic { period: 0.0, d: 1.0, r0: 1.0, r_amp: 0.0, a: 1.0 }).is_err());
    }

    #[test]
    fn clamping_and_purity() {
        let f = make_family(&FamilyParams::shipped_time_space_periodic()).unwrap();
        for u in [-1.0, -1e-9, -100.0] {
            assert_eq!(f.f(0.3, 1, u), f.f0(0.3, 1));
        }
        assert_eq!(f.f(0.123, 5, 0.7).to_bits(), f.f(0.123, 5, 0.7).to_bits());
    }

    #[test]
    fn non_finite_coefficients_are_malformed() {
        let f = CoefficientField::new(
            "bad",
            Arc::new(|t, _| if t > 1.0 { f64::NAN } else { 1.0 }),
            Growth::General(Arc::new(|_, _, u| 1.0 - u)),
            Structure::Homogeneous,
            FieldBounds { m0: 1.0, d_min: 1.0, d_max: 1.0, slope_bound: 1.0, reaction_lipschitz: 1.0 },
        )
        .unwrap();
        let grid = SampleGrid { t_start: 0.0, t_end: 2.0, dt: 0.1, j_min: 0, j_max: 0, u_max: 2.0, u_points: 5 };
        assert!(matches!(audit_h0(&f, &grid), Err(Error::MalformedField(_))));
    }

    #[test]
    fn short_horizon_is_insufficient() {
        let f = make_family(&FamilyParams::TimePeriodic { period: 2.0, d: 1.0, r0: 1.0, r_amp: 0.2, a: 1.0 }).unwrap();
        let grid = SampleGrid { t_start: 0.0, t_end: 1.0, dt: 0.01, j_min: 0, j_max: 0, u_max: 3.0, u_points: 5 };
        assert!(matches!(audit_h0(&f, &grid), Err(Error::InsufficientGrid(_))));
    }
}
