//! Principal Floquet exponent `lambda(mu)` of the tilted linearization at zero
//!
//! ```text
//! v_j' = d(t,j-1)(e^mu v_{j-1} - v_j) + d(t,j+1)(e^-mu v_{j+1} - v_j) + f(t,j,0) v_j
//! ```
//!
//! restricted to `J`-periodic sequences, its eigenfunction `psi^mu`, the
//! minimizer `mu*` of `lambda(mu)/mu` and the auxiliary tilt `mu'`.

use serde::{Deserialize, Serialize};

use crate::coeffs::CoefficientField;
use crate::error::{Error, Result};
use crate::numerics::{bisect, central_derivative, golden_section, hermite};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FloquetOptions {
    /// Integration step for the monodromy; rounded so that it divides `T`.
    pub dt: f64,
    pub power_tol: f64,
    pub power_max_iter: usize,
    pub residual_tol: f64,
}

impl Default for FloquetOptions {
    fn default() -> Self {
        FloquetOptions { dt: 1e-3, power_tol: 1e-12, power_max_iter: 100_000, residual_tol: 1e-8 }
    }
}

/// Monodromy of the shifted system `w' = (L - sigma) w`; the monodromy of
/// the tilted system itself is `exp(log_scale) * matrix`.
#[derive(Clone, Debug, Serialize)]
pub struct Monodromy {
    /// Row-major `J x J`; column `k` is the image of the `k`-th unit sequence.
    pub matrix: Vec<Vec<f64>>,
    pub log_scale: f64,
}

impl Monodromy {
    pub fn unscaled(&self) -> Vec<Vec<f64>> {
        let s = self.log_scale.exp();
        self.matrix.iter().map(|r| r.iter().map(|v| v * s).collect()).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FloquetResult {
    pub mu: f64,
    pub lambda: f64,
    pub period: f64,
    pub sites: usize,
    /// Sample spacing in time.
    pub h: f64,
    /// `psi[k][j]` at `t = k h`, `k = 0..=n`.
    pub psi: Vec<Vec<f64>>,
    pub dpsi: Vec<Vec<f64>>,
    /// Sup-norm defect of `e^{lambda t} psi` in the tilted equation, including
    /// the mismatch `psi(T) - psi(0)`.
    pub residual: f64,
    pub power_iterations: usize,
}

impl FloquetResult {
    /// `psi^mu(t, j)` for any real `t` and integer `j`.
    pub fn psi_at(&self, t: f64, j: i64) -> f64 {
        let kj = if self.sites == 1 { 0 } else { j.rem_euclid(self.sites as i64) as usize };
        let n = self.psi.len() - 1;
        let s = t.rem_euclid(self.period) / self.h;
        let k = (s.floor() as usize).min(n - 1);
        let th = s - k as f64;
        hermite(self.psi[k][kj], self.dpsi[k][kj], self.psi[k + 1][kj], self.dpsi[k + 1][kj], self.h, th)
    }

    pub fn max_psi(&self) -> f64 {
        self.psi.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_psi(&self) -> f64 {
        self.psi.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn speed(&self) -> f64 {
        self.lambda / self.mu
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpeedResult {
    pub mu_star: f64,
    pub c_star: f64,
    /// `(mu, lambda(mu)/mu)` on the cross-check grid.
    pub scan: Vec<(f64, f64)>,
    pub grid_min: f64,
    /// Number of separated grid minima within 1e-9 of the smallest value.
    pub ties: usize,
    pub bracket: (f64, f64),
}

/// Coefficients of the linearization tabulated at every RK4 stage time, so
/// that sweeps over `mu` cost only the linear algebra.
#[derive(Clone, Debug)]
pub struct FloquetSolver {
    period: f64,
    sites: usize,
    steps: usize,
    h: f64,
    /// `d_tab[m][j]` and `f_tab[m][j]` at `t = m h / 2`, `m = 0..=2 steps`.
    d_tab: Vec<Vec<f64>>,
    f_tab: Vec<Vec<f64>>,
    opts: FloquetOptions,
}

impl FloquetSolver {
    pub fn new(field: &CoefficientField, opts: &FloquetOptions) -> Result<Self> {
        let (period, sites) = field.structure().floquet_periods().ok_or_else(|| {
            Error::Parameter("Floquet exponents need a time-periodic or time-independent field".into())
        })?;
        if sites == 0 {
            return Err(Error::Parameter("space period J must be positive".into()));
        }
        if !(opts.dt > 0.0) {
            return Err(Error::Parameter("Floquet step must be positive".into()));
        }
        let steps = ((period / opts.dt).round() as usize).max(1);
        let h = period / steps as f64;
        let rows = if field.structure().is_time_independent() { 1 } else { 2 * steps + 1 };
        let mut d_tab = Vec::with_capacity(rows);
        let mut f_tab = Vec::with_capacity(rows);
        for m in 0..rows {
            let t = m as f64 * 0.5 * h;
            d_tab.push((0..sites as i64).map(|j| field.d(t, j)).collect::<Vec<_>>());
            f_tab.push((0..sites as i64).map(|j| field.f0(t, j)).collect::<Vec<_>>());
        }
        for v in d_tab.iter().chain(f_tab.iter()).flatten() {
            if !v.is_finite() {
                return Err(Error::MalformedField("non-finite coefficient in the linearization".into()));
            }
        }
        Ok(FloquetSolver { period, sites, steps, h, d_tab, f_tab, opts: opts.clone() })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    #[inline]
    fn row(&self, m: usize) -> (&[f64], &[f64]) {
        let m = if self.d_tab.len() == 1 { 0 } else { m };
        (&self.d_tab[m], &self.f_tab[m])
    }

    /// Mean row sum of the tilted operator, used to keep iterates O(1).
    fn shift(&self, mu: f64) -> f64 {
        let (ep, em) = (mu.exp() - 1.0, (-mu).exp() - 1.0);
        let j = self.sites;
        let mut acc = 0.0;
        for (d, f) in self.d_tab.iter().zip(&self.f_tab) {
            for k in 0..j {
                acc += d[(k + j - 1) % j] * ep + d[(k + 1) % j] * em + f[k];
            }
        }
        acc / (self.d_tab.len() * j) as f64
    }

    /// `out = (L(t_m) - sigma) v`.
    #[inline]
    fn apply(&self, m: usize, mu_e: (f64, f64), sigma: f64, v: &[f64], out: &mut [f64]) {
        let (d, f) = self.row(m);
        let j = self.sites;
        let (ep, em) = mu_e;
        if j == 1 {
            out[0] = (d[0] * (ep - 1.0) + d[0] * (em - 1.0) + f[0] - sigma) * v[0];
            return;
        }
        for k in 0..j {
            let km = if k == 0 { j - 1 } else { k - 1 };
            let kp = if k + 1 == j { 0 } else { k + 1 };
            out[k] = d[km] * (ep * v[km] - v[k]) + d[kp] * (em * v[kp] - v[k]) + (f[k] - sigma) * v[k];
        }
    }

    /// One RK4 step from `t = s h` for a single vector.
    fn rk4(&self, s: usize, mu_e: (f64, f64), sigma: f64, v: &mut [f64], work: &mut [Vec<f64>; 5]) {
        let h = self.h;
        let j = self.sites;
        let [k1, k2, k3, k4, tmp] = work;
        self.apply(2 * s, mu_e, sigma, v, k1);
        for i in 0..j {
            tmp[i] = v[i] + 0.5 * h * k1[i];
        }
        self.apply(2 * s + 1, mu_e, sigma, tmp, k2);
        for i in 0..j {
            tmp[i] = v[i] + 0.5 * h * k2[i];
        }
        self.apply(2 * s + 1, mu_e, sigma, tmp, k3);
        for i in 0..j {
            tmp[i] = v[i] + h * k3[i];
        }
        self.apply(2 * s + 2, mu_e, sigma, tmp, k4);
        for i in 0..j {
            v[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
    }

    fn work(&self) -> [Vec<f64>; 5] {
        std::array::from_fn(|_| vec![0.0; self.sites])
    }

    pub fn monodromy(&self, mu: f64) -> Result<Monodromy> {
        if !mu.is_finite() {
            return Err(Error::Parameter(format!("tilt must be finite, got {mu}")));
        }
        let sigma = self.shift(mu);
        let mu_e = (mu.exp(), (-mu).exp());
        let j = self.sites;
        let mut work = self.work();
        let mut cols: Vec<Vec<f64>> =
            (0..j).map(|k| (0..j).map(|i| if i == k { 1.0 } else { 0.0 }).collect()).collect();
        for col in cols.iter_mut() {
            for s in 0..self.steps {
                self.rk4(s, mu_e, sigma, col, &mut work);
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { time: self.period });
            }
        }
        let matrix = (0..j).map(|r| (0..j).map(|c| cols[c][r]).collect()).collect();
        Ok(Monodromy { matrix, log_scale: sigma * self.period })
    }

    /// Perron root and normalized eigenvector by power iteration.
    fn perron(&self, m: &Monodromy) -> Result<(f64, Vec<f64>, usize)> {
        let j = self.sites;
        if j == 1 {
            let r = m.matrix[0][0];
            if !(r > 0.0) {
                return Err(Error::Spectral { gap: f64::NAN });
            }
            return Ok((r, vec![1.0], 0));
        }
        let mut x = vec![1.0; j];
        let mut y = vec![0.0; j];
        let mut last_change = f64::INFINITY;
        let mut ratio = 0.0;
        for it in 1..=self.opts.power_max_iter {
            for r in 0..j {
                y[r] = m.matrix[r].iter().zip(&x).map(|(a, b)| a * b).sum();
            }
            let norm = y.iter().copied().fold(0.0, f64::max);
            if !(norm > 0.0) {
                return Err(Error::Spectral { gap: f64::NAN });
            }
            let mut change = 0.0f64;
            for r in 0..j {
                let v = y[r] / norm;
                change = change.max((v - x[r]).abs());
                x[r] = v;
            }
            if change < self.opts.power_tol {
                let rho =
                    (0..j).map(|r| m.matrix[r].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()).fold(0.0, f64::max);
                return Ok((rho, x, it));
            }
            if last_change.is_finite() && last_change > 0.0 {
                ratio = change / last_change;
            }
            last_change = change;
        }
        Err(Error::Spectral { gap: ratio })
    }

    /// `lambda(mu)` only.
    pub fn lambda(&self, mu: f64) -> Result<f64> {
        let m = self.monodromy(mu)?;
        let (rho, _, _) = self.perron(&m)?;
        Ok((rho.ln() + m.log_scale) / self.period)
    }

    /// `lambda(mu)` with the eigenfunction `psi^mu` and its residual.
    pub fn solve(&self, mu: f64) -> Result<FloquetResult> {
        let m = self.monodromy(mu)?;
        let (rho, x, iterations) = self.perron(&m)?;
        let lambda = (rho.ln() + m.log_scale) / self.period;
        let sigma = m.log_scale / self.period;
        let mu_e = (mu.exp(), (-mu).exp());
        let j = self.sites;
        let mut work = self.work();
        let mut w = x.clone();
        let mut psi = Vec::with_capacity(self.steps + 1);
        psi.push(w.clone());
        for s in 0..self.steps {
            self.rk4(s, mu_e, sigma, &mut w, &mut work);
            let t = (s + 1) as f64 * self.h;
            let g = ((sigma - lambda) * t).exp();
            psi.push(w.iter().map(|v| v * g).collect::<Vec<_>>());
        }
        let mut dpsi = Vec::with_capacity(psi.len());
        let mut out = vec![0.0; j];
        for (k, p) in psi.iter().enumerate() {
            self.apply(2 * k.min(self.steps), mu_e, lambda, p, &mut out);
            dpsi.push(out.clone());
        }
        let mut residual = psi[0].iter().zip(&psi[self.steps]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let mut series = vec![0.0; psi.len()];
        for c in 0..j {
            for (k, p) in psi.iter().enumerate() {
                series[k] = p[c];
            }
            for k in 0..psi.len() {
                if let Some(fd) = central_derivative(&series, k, self.h) {
                    residual = residual.max((fd - dpsi[k][c]).abs());
                }
            }
        }
        let res = FloquetResult {
            mu,
            lambda,
            period: self.period,
            sites: j,
            h: self.h,
            psi,
            dpsi,
            residual,
            power_iterations: iterations,
        };
        if !(res.min_psi() > 0.0) {
            return Err(Error::Domain(format!("eigenfunction lost positivity at mu = {mu}")));
        }
        if residual > self.opts.residual_tol {
            return Err(Error::Domain(format!("eigenfunction residual {residual:e} exceeds tolerance at mu = {mu}")));
        }
        Ok(res)
    }

    fn speed_fn(&self, mu: f64) -> f64 {
        self.lambda(mu).map(|l| l / mu).unwrap_or(f64::INFINITY)
    }

    /// Minimize `lambda(mu)/mu`: coarse scan for a bracket, golden-section
    /// refinement to `|dmu| < 1e-8`, and a 10^4-point grid cross-check.
    pub fn find_mu_star(&self, bracket: (f64, f64)) -> Result<SpeedResult> {
        let (mut lo, mut hi) = bracket;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::Parameter(format!("bad bracket [{lo}, {hi}]")));
        }
        let coarse = 64;
        let mut attempts = 0;
        let (a, b) = loop {
            let pts: Vec<(f64, f64)> = crate::par::map_indexed(coarse + 1, |k| {
                let mu = lo + (hi - lo) * k as f64 / coarse as f64;
                (mu, self.speed_fn(mu))
            });
            let imin = argmin_first(&pts);
            if imin > 0 && imin < coarse {
                break (pts[imin - 1].0, pts[imin + 1].0);
            }
            attempts += 1;
            if attempts > 12 {
                return Err(Error::Bracket { lo, hi, scan: pts });
            }
            if imin == 0 {
                lo *= 0.25;
            } else {
                hi *= 2.0;
            }
        };
        let (mut mu_star, mut c_star) = golden_section(|m| self.speed_fn(m), a, b, 1e-9);

        let n = 10_000;
        let scan: Vec<(f64, f64)> = crate::par::map_indexed(n, |k| {
            let mu = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            (mu, self.speed_fn(mu))
        });
        let grid_min = scan.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        // Separated local minima of the grid within 1e-9 of the best value.
        let mut minima = Vec::new();
        for k in 0..n {
            let left = if k == 0 { f64::INFINITY } else { scan[k - 1].1 };
            let right = if k + 1 == n { f64::INFINITY } else { scan[k + 1].1 };
            if scan[k].1 <= left && scan[k].1 < right && scan[k].1 <= grid_min + 1e-9 {
                minima.push(k);
            }
        }
        let ties = minima.len().max(1);
        if let Some(&k0) = minima.first() {
            let step = (hi - lo) / (n - 1) as f64;
            let first = scan[k0].0;
            if first < mu_star - 2.0 * step {
                let (m, c) = golden_section(|m| self.speed_fn(m), (first - step).max(lo), first + step, 1e-9);
                if c <= c_star + 1e-9 {
                    mu_star = m;
                    c_star = c;
                }
            }
        }
        if (c_star - grid_min).abs() > 1e-6 {
            return Err(Error::CrossCheck { refined: c_star, grid: grid_min });
        }
        Ok(SpeedResult { mu_star, c_star, scan, grid_min, ties, bracket: (lo, hi) })
    }

    /// Auxiliary tilt `mu'` in `(mu, min(2 mu, mu*))` with
    /// `lambda(mu)/mu > lambda(mu')/mu' > c*`, both by at least 1e-6.
    pub fn select_mu_prime(&self, speed: &SpeedResult, mu: f64) -> Result<f64> {
        if !(mu > 0.0 && mu < speed.mu_star) {
            return Err(Error::Parameter(format!("need 0 < mu < mu* = {}, got {mu}", speed.mu_star)));
        }
        let margin = 1e-6;
        let g_mu = self.speed_fn(mu);
        let mut lo = mu;
        let mut hi = (2.0 * mu).min(speed.mu_star);
        for _ in 0..80 {
            let m = 0.5 * (lo + hi);
            let g = self.speed_fn(m);
            let below_mu = g_mu - g >= margin;
            let above_star = g - speed.c_star >= margin;
            match (below_mu, above_star) {
                (true, true) => return Ok(m),
                (false, true) => lo = m,
                (true, false) => hi = m,
                (false, false) => break,
            }
        }
        Err(Error::Margin(format!("mu = {mu} is too close to mu* = {}; use a smaller mu", speed.mu_star)))
    }

    /// The tilt `mu < mu*` with `lambda(mu)/mu = c`, for `c > c*`.
    pub fn mu_for_speed(&self, speed: &SpeedResult, c: f64) -> Result<f64> {
        if !(c > speed.c_star) {
            return Err(Error::Parameter(format!("speed {c} must exceed c* = {}", speed.c_star)));
        }
        let mut lo = speed.mu_star * 0.5;
        while self.speed_fn(lo) <= c {
            lo *= 0.5;
            if lo < 1e-12 {
                return Err(Error::Parameter(format!("no tilt reaches speed {c}")));
            }
        }
        bisect(|m| self.speed_fn(m) - c, lo, speed.mu_star, 1e-14)
            .ok_or_else(|| Error::Parameter(format!("no tilt reaches speed {c}")))
    }
}

fn argmin_first(pts: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (k, p) in pts.iter().enumerate() {
        if p.1 < pts[best].1 {
            best = k;
        }
    }
    best
}

pub fn monodromy(field: &CoefficientField, mu: f64, opts: &FloquetOptions) -> Result<Monodromy> {
    FloquetSolver::new(field, opts)?.monodromy(mu)
}

pub fn lambda_of_mu(field: &CoefficientField, mu: f64, opts: &FloquetOptions) -> Result<FloquetResult> {
    FloquetSolver::new(field, opts)?.solve(mu)
}

pub fn find_mu_star(field: &CoefficientField, bracket: (f64, f64), opts: &FloquetOptions) -> Result<SpeedResult> {
    FloquetSolver::new(field, opts)?.find_mu_star(bracket)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{make_family, FamilyParams};

    fn homogeneous(r: f64) -> CoefficientField {
        make_family(&FamilyParams::Homogeneous { d: 1.0, r, a: 1.0 }).unwrap()
    }

    #[test]
    fn scalar_monodromy_closed_forms() {
        let f = homogeneous(0.7);
        let m = monodromy(&f, 0.0, &FloquetOptions::default()).unwrap();
        assert!((m.unscaled()[0][0] - 0.7f64.exp()).abs() < 1e-12);
        let m = monodromy(&f, 1.3, &FloquetOptions::default()).unwrap();
        let l = 1.3f64.exp() + (-1.3f64).exp() - 2.0 + 0.7;
        assert!((m.unscaled()[0][0] / l.exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_closed_form_at_unit_tilt() {
        let r = lambda_of_mu(&homogeneous(1.0), 1.0, &FloquetOptions::default()).unwrap();
        let e = std::f64::consts::E;
        assert!((r.lambda - (e + 1.0 / e - 1.0)).abs() < 1e-10);
        assert!((r.lambda - 2.08616).abs() < 1e-5);
        assert_eq!(r.max_psi(), 1.0);
    }

    #[test]
    fn time_average_at_zero_tilt() {
        let f = make_family(&FamilyParams::TimePeriodic { period: 2.0, d: 1.0, r0: 0.8, r_amp: 0.6, a: 1.0 }).unwrap();
        let r = lambda_of_mu(&f, 0.0, &FloquetOptions::default()).unwrap();
        assert!((r.lambda - 0.8).abs() < 1e-10);
        assert!(r.min_psi() > 0.0);
        assert!(r.residual < 1e-8);
    }

    #[test]
    fn mu_star_and_mu_prime() {
        let s = FloquetSolver::new(&homogeneous(1.0), &FloquetOptions::default()).unwrap();
        let sp = s.find_mu_star((0.05, 5.0)).unwrap();
        let mu = sp.mu_star / 2.0;
        let mp = s.select_mu_prime(&sp, mu).unwrap();
        assert!(mp > mu && mp < (2.0 * mu).min(sp.mu_star));
        let g = |m: f64| s.lambda(m).unwrap() / m;
        assert!(g(mu) > g(mp) && g(mp) > sp.c_star);
        assert!(s.select_mu_prime(&sp, sp.mu_star * 1.01).is_err());
        let c = sp.c_star + 0.5;
        let m = s.mu_for_speed(&sp, c).unwrap();
        assert!((g(m) - c).abs() < 1e-10 && m < sp.mu_star);
    }

    #[test]
    fn faster_growth_has_larger_critical_speed() {
        let c1 = find_mu_star(&homogeneous(1.0), (0.05, 5.0), &FloquetOptions::default()).unwrap().c_star;
        let c2 = find_mu_star(&homogeneous(2.0), (0.05, 5.0), &FloquetOptions::default()).unwrap().c_star;
        assert!(c2 > c1);
    }
}
