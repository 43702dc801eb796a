//! Small numerical kernels shared by the modules: scalar minimization,
//! root bracketing, interpolation, quadrature and finite differences.

/// Golden-section search for a minimizer of `f` on `[a, b]`, stopping once
/// the bracket is narrower than `tol`. Returns `(x, f(x))`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Bisection for a sign change of `g` on `[a, b]`; `g(a)` and `g(b)` must
/// have opposite signs.
pub fn bisect<F: FnMut(f64) -> f64>(mut g: F, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut ga = g(a);
    let gb = g(b);
    if ga == 0.0 {
        return Some(a);
    }
    if gb == 0.0 {
        return Some(b);
    }
    if ga.signum() == gb.signum() || !ga.is_finite() || !gb.is_finite() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a) <= tol {
            return Some(m);
        }
        let gm = g(m);
        if gm == 0.0 {
            return Some(m);
        }
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Cubic Hermite interpolation on `[0, h]` at `theta * h`.
#[inline]
pub fn hermite(y0: f64, dy0: f64, y1: f64, dy1: f64, h: f64, theta: f64) -> f64 {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * dy0 + h01 * y1 + h11 * h * dy1
}

/// Time derivative at sample `k` of a uniformly sampled series.
///
/// Sixth-order central stencil where three neighbours exist on both sides,
/// fourth-order where two exist; `None` closer to the ends.
pub fn central_derivative(samples: &[f64], k: usize, h: f64) -> Option<f64> {
    let n = samples.len();
    if k >= 3 && k + 3 < n {
        let s = samples;
        Some((45.0 * (s[k + 1] - s[k - 1]) - 9.0 * (s[k + 2] - s[k - 2]) + (s[k + 3] - s[k - 3])) / (60.0 * h))
    } else if k >= 2 && k + 2 < n {
        let s = samples;
        Some((8.0 * (s[k + 1] - s[k - 1]) - (s[k + 2] - s[k - 2])) / (12.0 * h))
    } else {
        None
    }
}

/// Cumulative trapezoid integral of uniformly spaced samples, starting at 0.
pub fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Cumulative integral of `f` on the uniform grid `t0 + k h`, `k = 0..=n`,
/// using three-point Gauss-Legendre on each cell.
pub fn cumulative_gauss<F: Fn(f64) -> f64>(f: F, t0: f64, h: f64, n: usize) -> Vec<f64> {
    let x = (0.6f64).sqrt() / 2.0;
    let nodes = [0.5 - x, 0.5, 0.5 + x];
    let weights = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 0..n {
        let a = t0 + k as f64 * h;
        let cell: f64 = nodes.iter().zip(weights.iter()).map(|(s, w)| w * f(a + s * h)).sum();
        acc += h * cell;
        out.push(acc);
    }
    out
}

/// Linear interpolation of uniformly sampled data; clamps outside the grid.
pub fn lerp_uniform(values: &[f64], t0: f64, h: f64, t: f64) -> f64 {
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let s = (t - t0) / h;
    if s <= 0.0 {
        return values[0];
    }
    let k = s.floor() as usize;
    if k >= n - 1 {
        return values[n - 1];
    }
    let th = s - k as f64;
    values[k] + th * (values[k + 1] - values[k])
}

/// Number of uniform steps of size at most `dt` covering `span`.
pub fn step_count(span: f64, dt: f64) -> usize {
    if span <= 0.0 {
        return 0;
    }
    ((span / dt) - 1e-9).ceil().max(1.0) as usize
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let (x, fx) = golden_section(|x| (x - 0.3) * (x - 0.3) + 2.0, -1.0, 2.0, 1e-10);
        // f is flat to rounding within ~sqrt(eps) of the vertex.
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bisect_square_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, 0.0, 2.0, 1e-14).is_none());
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let p = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t * t;
        let dp = |t: f64| -2.0 + 1.5 * t * t;
        let h = 0.7;
        for k in 0..=10 {
            let th = k as f64 / 10.0;
            let v = hermite(p(0.0), dp(0.0), p(h), dp(h), h, th);
            assert!((v - p(th * h)).abs() < 1e-14);
        }
    }

    #[test]
    fn central_derivative_of_exponential() {
        let h = 1e-2;
        let s: Vec<f64> = (0..20).map(|k| (k as f64 * h).exp()).collect();
        let d = central_derivative(&s, 10, h).unwrap();
        assert!((d - (0.1f64).exp()).abs() < 1e-12);
        assert!(central_derivative(&s, 1, h).is_none());
    }

    #[test]
    fn gauss_quadrature_of_sine() {
        let n = 1000;
        let h = 10.0 / n as f64;
        let c = cumulative_gauss(f64::sin, 0.0, h, n);
        assert!((c[n] - (1.0 - 10f64.cos())).abs() < 1e-12);
    }
}
