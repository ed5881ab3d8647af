//! Quadrature building blocks: Gauss-Legendre rules, adaptive Simpson,
//! and trapezoid helpers on sampled grids.

use crate::error::{Error, Result};

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Roots of the Legendre polynomial are found by Newton iteration from the
/// Chebyshev initial guess; weights are 2 / ((1 - x^2) P_n'(x)^2).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 1..n {
                let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule shared through a process-wide cache. Node construction
/// is O(n^2), so the kinetic-entropy quadratures (which request the same rule
/// once per state) would otherwise dominate the run.
pub fn gauss_legendre_cached(n: usize) -> std::sync::Arc<(Vec<f64>, Vec<f64>)> {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("quadrature cache poisoned");
    map.entry(n)
        .or_insert_with(|| std::sync::Arc::new(gauss_legendre(n)))
        .clone()
}

/// Integrate f over [a, b] with an n-point Gauss-Legendre rule.
pub fn gl_integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        sum += w * f(mid + half * x);
    }
    sum * half
}

/// Adaptive composite Simpson integration of f over [a, b] to relative
/// tolerance `rel_tol` (with a small absolute floor for near-zero integrals).
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::invalid(format!("bad integration range [{a}, {b}]")));
    }
    // Seed with a coarse scan so narrow features are not stepped over.
    let seed = 64;
    let h = (b - a) / seed as f64;
    let mut total = 0.0;
    let mut scale = 0.0f64;
    for i in 0..seed {
        let x0 = a + i as f64 * h;
        scale = scale.max(f(x0).abs()).max(f(x0 + 0.5 * h).abs());
    }
    let tol_abs = rel_tol * (scale * (b - a)).max(1e-300);
    for i in 0..seed {
        let x0 = a + i as f64 * h;
        let x1 = x0 + h;
        let fm = f(0.5 * (x0 + x1));
        total += simpson_rec(
            f,
            x0,
            x1,
            f(x0),
            fm,
            f(x1),
            tol_abs / seed as f64,
            40,
        )?;
    }
    Ok(total)
}

/// Adaptive Simpson with an absolute error budget and no coarse pre-scan.
/// Suited to integrands that are smooth on the given interval.
pub fn adaptive_simpson_abs(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol_abs: f64) -> f64 {
    let m = 0.5 * (a + b);
    simpson_abs_rec(f, a, b, f(a), f(m), f(b), tol_abs, 24)
}

// Panels that bottom out at the depth cap are accepted with the Richardson
// extrapolation. The per-level tolerance halving makes corner panels (where
// the integrand has a kink) chase an ever-shrinking target even though their
// actual remaining error is O(h^2) of a width-2^-24 panel, i.e. negligible.
#[allow(clippy::too_many_arguments)]
fn simpson_abs_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let flm = f(0.5 * (a + m));
    let frm = f(0.5 * (m + b));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol || depth == 0 || (b - a) < 1e-14 {
        return left + right + err / 15.0;
    }
    simpson_abs_rec(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1)
        + simpson_abs_rec(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let flm = f(0.5 * (a + m));
    let frm = f(0.5 * (m + b));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol || (b - a) < 1e-14 {
        return Ok(left + right + err / 15.0);
    }
    if depth == 0 {
        return Err(Error::invalid(
            "adaptive quadrature failed to converge (recursion limit)",
        ));
    }
    Ok(simpson_rec(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1)?
        + simpson_rec(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1)?)
}

/// Trapezoid rule over uniformly spaced samples.
pub fn trapezoid_uniform(values: &[f64], dx: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    dx * (0.5 * (values[0] + values[values.len() - 1]) + inner)
}

/// Trapezoid rule over arbitrarily spaced samples.
pub fn trapezoid(xs: &[f64], values: &[f64]) -> f64 {
    assert_eq!(xs.len(), values.len());
    let mut sum = 0.0;
    for i in 1..xs.len() {
        sum += 0.5 * (values[i] + values[i - 1]) * (xs[i] - xs[i - 1]);
    }
    sum
}

/// Cumulative trapezoid integral over uniformly spaced samples. Output has the
/// same length as the input; entry 0 is zero.
pub fn cumulative_trapezoid_uniform(values: &[f64], dx: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..values.len() {
        acc += 0.5 * (values[i] + values[i - 1]) * dx;
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        // An n-point rule integrates degree-(2n-1) polynomials exactly; the
        // odd top power integrates to zero over [-1, 1].
        for n in [2usize, 5, 8, 13] {
            let deg = 2 * n - 1;
            let f = |x: f64| x.powi(deg as i32) + 3.0 * x * x + 1.0;
            let got = gl_integrate(&f, -1.0, 1.0, n);
            assert_relative_eq!(got, 4.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn gauss_legendre_weights_sum_to_interval_length() {
        for n in [1usize, 4, 33, 64, 128] {
            let (_, w) = gauss_legendre(n);
            let sum: f64 = w.iter().sum();
            assert_relative_eq!(sum, 2.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn adaptive_simpson_gaussian_quarter() {
        // Frozen oracle: integral of exp(-x^2)/4 over the real line is sqrt(pi)/4.
        let f = |x: f64| (-x * x).exp() / 4.0;
        let got = adaptive_simpson(&f, -12.0, 12.0, 1e-12).unwrap();
        let exact = std::f64::consts::PI.sqrt() / 4.0;
        assert_relative_eq!(got, exact, max_relative = 1e-10);
        assert_relative_eq!(got, 0.443_113_462_726_379, max_relative = 1e-9);
    }

    #[test]
    fn adaptive_simpson_handles_narrow_spike() {
        let f = |x: f64| (-(x / 0.01).powi(2)).exp();
        let got = adaptive_simpson(&f, -5.0, 5.0, 1e-10).unwrap();
        let exact = 0.01 * std::f64::consts::PI.sqrt();
        assert_relative_eq!(got, exact, max_relative = 1e-8);
    }

    #[test]
    fn trapezoid_matches_uniform_variant() {
        let xs: Vec<f64> = (0..101).map(|i| i as f64 * 0.03).collect();
        let vals: Vec<f64> = xs.iter().map(|x| x.sin() + 2.0).collect();
        let a = trapezoid(&xs, &vals);
        let b = trapezoid_uniform(&vals, 0.03);
        assert_relative_eq!(a, b, max_relative = 1e-13);
    }

    #[test]
    fn cumulative_trapezoid_end_value_matches_total() {
        let vals: Vec<f64> = (0..500).map(|i| ((i as f64) * 0.01).cos().abs()).collect();
        let cum = cumulative_trapezoid_uniform(&vals, 0.01);
        let total = trapezoid_uniform(&vals, 0.01);
        assert_relative_eq!(cum[cum.len() - 1], total, max_relative = 1e-13);
    }
}
