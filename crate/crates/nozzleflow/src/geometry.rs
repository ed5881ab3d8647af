//! Nozzle cross-section profiles and the damping coefficient they induce.
//!
//! A duct of area A(x) enters the one-dimensional flow equations only through
//! a(x) = -A'(x)/A(x). Admissibility of a geometry is decided by the L1 norm
//! of a dominating envelope a0 >= |a|, compared against a mode-dependent
//! threshold: (1-theta)/(1+theta) for isentropic flow, 1/2 for isothermal.

use crate::error::{Error, Result};
use crate::gas::{FlowMode, GasModel};
use crate::quad;
use serde::Serialize;

/// Shape families. Analytic kinds carry closed forms for A and a; tabulated
/// data is interpolated with a monotone cubic spline.
#[derive(Debug, Clone)]
pub enum GeometrySpec {
    /// Straight duct, a == 0.
    Constant { area: f64 },
    /// Exponential of a compactly supported sigmoid: A = exp(kappa * S((x-center)/width)).
    /// S ramps smoothly from 0 to 1 across [-1, 1], so a = -kappa S' / width has
    /// compact support and |kappa| is the exact L1 norm of a.
    ExpMonotone { kappa: f64, center: f64, width: f64 },
    /// Converging-diverging profile A = area_inf - depth * exp(-((x-center)/width)^2).
    LavalBump {
        area_inf: f64,
        depth: f64,
        width: f64,
        center: f64,
    },
    /// Sampled area profile, strictly ascending in x.
    Tabulated { xs: Vec<f64>, areas: Vec<f64> },
}

/// Smooth compactly supported bump exp(-1/(1-t^2)) on (-1, 1).
fn bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (-1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

/// Mass of the bump profile over (-1, 1), computed once.
fn bump_mass() -> f64 {
    static MASS: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *MASS.get_or_init(|| quad::gl_integrate(&bump, -1.0, 1.0, 64))
}

/// Sigmoid S(y) ramping 0 -> 1 over [-1, 1] with S' = bump / bump_mass.
fn bump_sigmoid(y: f64) -> f64 {
    if y <= -1.0 {
        0.0
    } else if y >= 1.0 {
        1.0
    } else {
        quad::gl_integrate(&bump, -1.0, y, 64) / bump_mass()
    }
}

/// Monotone cubic interpolant (Fritsch-Carlson slope limiting) with an
/// analytic first derivative.
#[derive(Debug, Clone)]
struct MonotoneSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneSpline {
    fn build(xs: &[f64], ys: &[f64]) -> Self {
        let n = xs.len();
        let mut secants = vec![0.0; n - 1];
        for i in 0..n - 1 {
            secants[i] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
        }
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            if secants[i - 1] * secants[i] <= 0.0 {
                slopes[i] = 0.0;
            } else {
                // Harmonic mean keeps the interpolant monotone on each panel.
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                slopes[i] = (w1 + w2) / (w1 / secants[i - 1] + w2 / secants[i]);
            }
        }
        MonotoneSpline {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            slopes,
        }
    }

    fn panel(&self, x: f64) -> usize {
        match self
            .xs
            .binary_search_by(|v| v.partial_cmp(&x).unwrap())
        {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i.clamp(1, self.xs.len() - 1) - 1,
        }
    }

    fn value(&self, x: f64) -> f64 {
        let x = x.clamp(self.xs[0], self.xs[self.xs.len() - 1]);
        let i = self.panel(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }

    fn derivative(&self, x: f64) -> f64 {
        let x = x.clamp(self.xs[0], self.xs[self.xs.len() - 1]);
        let i = self.panel(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let dh00 = (6.0 * t * t - 6.0 * t) / h;
        let dh10 = 3.0 * t * t - 4.0 * t + 1.0;
        let dh01 = (-6.0 * t * t + 6.0 * t) / h;
        let dh11 = 3.0 * t * t - 2.0 * t;
        dh00 * self.ys[i] + dh10 * self.slopes[i] + dh01 * self.ys[i + 1] + dh11 * self.slopes[i + 1]
    }
}

/// A geometry bound to a domain, with the damping coefficient a(x) and its
/// dominating envelope a0(x) ready for evaluation.
#[derive(Debug, Clone)]
pub struct NozzleGeometry {
    pub spec: GeometrySpec,
    pub x_min: f64,
    pub x_max: f64,
    pub a0_scale: f64,
    sample_xs: Vec<f64>,
    /// Piecewise-linear samples of the smoothed-and-maximized envelope,
    /// before the a0_scale factor.
    a0_samples: Vec<f64>,
    /// Cumulative integral of a0_scale * (piecewise-linear envelope).
    a0_cumulative: Vec<f64>,
    spline: Option<MonotoneSpline>,
    a0_l1: f64,
}

pub const DEFAULT_GEOMETRY_SAMPLES: usize = 4096;

impl NozzleGeometry {
    pub fn build(spec: GeometrySpec, x_min: f64, x_max: f64) -> Result<Self> {
        Self::build_with(spec, x_min, x_max, DEFAULT_GEOMETRY_SAMPLES, 1.0)
    }

    pub fn build_with(
        spec: GeometrySpec,
        x_min: f64,
        x_max: f64,
        n_samples: usize,
        a0_scale: f64,
    ) -> Result<Self> {
        if !(x_max > x_min) {
            return Err(Error::invalid("geometry domain must have x_max > x_min"));
        }
        if n_samples < 64 {
            return Err(Error::invalid("geometry sampling needs at least 64 points"));
        }
        if !(a0_scale >= 1.0) {
            return Err(Error::invalid(
                "a0_scale below 1 would break the envelope domination a0 >= |a|",
            ));
        }
        let spline = match &spec {
            GeometrySpec::Tabulated { xs, areas } => {
                if xs.len() < 4 {
                    return Err(Error::invalid("tabulated geometry needs at least 4 samples"));
                }
                if xs.len() != areas.len() {
                    return Err(Error::invalid("tabulated geometry: column length mismatch"));
                }
                if xs.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid("tabulated geometry: x must be strictly ascending"));
                }
                if areas.iter().any(|&a| !(a > 0.0)) {
                    return Err(Error::invalid("tabulated geometry: areas must be positive"));
                }
                Some(MonotoneSpline::build(xs, areas))
            }
            GeometrySpec::Constant { area } => {
                if !(*area > 0.0) {
                    return Err(Error::invalid("constant geometry needs positive area"));
                }
                None
            }
            GeometrySpec::ExpMonotone { width, .. } => {
                if !(*width > 0.0) {
                    return Err(Error::invalid("exp-monotone geometry needs positive width"));
                }
                None
            }
            GeometrySpec::LavalBump {
                area_inf,
                depth,
                width,
                ..
            } => {
                if !(*width > 0.0) || !(*depth >= 0.0) || !(*area_inf > *depth) {
                    return Err(Error::invalid(
                        "laval-bump geometry needs width > 0 and area_inf > depth >= 0",
                    ));
                }
                None
            }
        };

        let mut geom = NozzleGeometry {
            spec,
            x_min,
            x_max,
            a0_scale,
            sample_xs: Vec::new(),
            a0_samples: Vec::new(),
            a0_cumulative: Vec::new(),
            spline,
            a0_l1: 0.0,
        };

        let dx = (x_max - x_min) / (n_samples - 1) as f64;
        geom.sample_xs = (0..n_samples).map(|i| x_min + i as f64 * dx).collect();
        let abs_a: Vec<f64> = geom.sample_xs.iter().map(|&x| geom.a(x).abs()).collect();

        // One mollification pass of |a| (bump kernel, width = 2 sample cells),
        // then a pointwise max against |a| so the envelope dominates.
        let half = 2usize;
        let mut kernel = Vec::with_capacity(2 * half + 1);
        for k in -(half as i64)..=half as i64 {
            kernel.push(bump(k as f64 / (half as f64 + 0.5)));
        }
        let ksum: f64 = kernel.iter().sum();
        for k in kernel.iter_mut() {
            *k /= ksum;
        }
        geom.a0_samples = (0..n_samples)
            .map(|i| {
                let mut acc = 0.0;
                for (j, kw) in kernel.iter().enumerate() {
                    let idx = (i as i64 + j as i64 - half as i64).clamp(0, n_samples as i64 - 1);
                    acc += kw * abs_a[idx as usize];
                }
                acc.max(abs_a[i])
            })
            .collect();

        let scaled: Vec<f64> = geom.a0_samples.iter().map(|v| v * a0_scale).collect();
        geom.a0_cumulative = quad::cumulative_trapezoid_uniform(&scaled, dx);

        geom.validate_area_positive()?;
        geom.validate_boundary_quiet()?;
        // The envelope is piecewise linear between samples (with smooth |a|
        // corrections), so integrate it cell by cell with a shared absolute
        // budget; a single adaptive pass over the whole domain would recurse
        // at every sample kink.
        let rough = geom.a0_integral_total().max(1e-300);
        let tol_cell = 1e-10 * rough / (n_samples - 1) as f64;
        let mut total = 0.0;
        for i in 0..n_samples - 1 {
            total += quad::adaptive_simpson_abs(
                &|x| geom.a0(x),
                geom.sample_xs[i],
                geom.sample_xs[i + 1],
                tol_cell,
            );
        }
        geom.a0_l1 = total;
        Ok(geom)
    }

    fn validate_area_positive(&self) -> Result<()> {
        for &x in &self.sample_xs {
            let a = self.area(x);
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::invalid(format!(
                    "cross-section must stay positive; A({x}) = {a}"
                )));
            }
        }
        Ok(())
    }

    fn validate_boundary_quiet(&self) -> Result<()> {
        let n = self.sample_xs.len();
        let edge = (n as f64 * 0.05).ceil() as usize;
        for i in (0..edge).chain(n - edge..n) {
            let x = self.sample_xs[i];
            if self.a(x).abs() >= 1e-12 {
                return Err(Error::invalid(format!(
                    "a(x) must vanish near the domain boundary; |a({x})| = {:e}",
                    self.a(x).abs()
                )));
            }
        }
        Ok(())
    }

    /// Cross-section area.
    pub fn area(&self, x: f64) -> f64 {
        match &self.spec {
            GeometrySpec::Constant { area } => *area,
            GeometrySpec::ExpMonotone {
                kappa,
                center,
                width,
            } => (kappa * bump_sigmoid((x - center) / width)).exp(),
            GeometrySpec::LavalBump {
                area_inf,
                depth,
                width,
                center,
            } => {
                let xi = (x - center) / width;
                area_inf - depth * (-xi * xi).exp()
            }
            GeometrySpec::Tabulated { .. } => self.spline.as_ref().unwrap().value(x),
        }
    }

    /// Damping coefficient a(x) = -A'(x)/A(x).
    pub fn a(&self, x: f64) -> f64 {
        match &self.spec {
            GeometrySpec::Constant { .. } => 0.0,
            GeometrySpec::ExpMonotone {
                kappa,
                center,
                width,
            } => {
                let y = (x - center) / width;
                -kappa * bump(y) / (bump_mass() * width)
            }
            GeometrySpec::LavalBump {
                area_inf,
                depth,
                width,
                center,
            } => {
                let xi = (x - center) / width;
                let e = (-xi * xi).exp();
                -2.0 * xi * depth * e / (width * (area_inf - depth * e))
            }
            GeometrySpec::Tabulated { .. } => {
                let s = self.spline.as_ref().unwrap();
                -s.derivative(x) / s.value(x)
            }
        }
    }

    /// Dominating envelope a0(x) >= |a(x)|.
    pub fn a0(&self, x: f64) -> f64 {
        self.envelope_linear(x).max(self.a(x).abs())
    }

    fn envelope_linear(&self, x: f64) -> f64 {
        let xs = &self.sample_xs;
        if x <= xs[0] {
            return self.a0_scale * self.a0_samples[0];
        }
        if x >= xs[xs.len() - 1] {
            return self.a0_scale * self.a0_samples[xs.len() - 1];
        }
        let dx = xs[1] - xs[0];
        let i = (((x - xs[0]) / dx) as usize).min(xs.len() - 2);
        let t = (x - xs[i]) / dx;
        self.a0_scale * ((1.0 - t) * self.a0_samples[i] + t * self.a0_samples[i + 1])
    }

    /// Integral of the envelope from the left domain edge to x, consistent to
    /// machine precision with `a0_l1_total` (the two sum exactly).
    pub fn a0_integral_from_left(&self, x: f64) -> f64 {
        let xs = &self.sample_xs;
        if x <= xs[0] {
            return 0.0;
        }
        if x >= xs[xs.len() - 1] {
            return self.a0_cumulative[xs.len() - 1];
        }
        let dx = xs[1] - xs[0];
        let i = (((x - xs[0]) / dx) as usize).min(xs.len() - 2);
        let s = x - xs[i];
        let v0 = self.a0_scale * self.a0_samples[i];
        let v1 = self.a0_scale * self.a0_samples[i + 1];
        self.a0_cumulative[i] + v0 * s + 0.5 * (v1 - v0) * s * s / dx
    }

    /// Total envelope integral from the cumulative table.
    pub fn a0_integral_total(&self) -> f64 {
        self.a0_cumulative[self.a0_cumulative.len() - 1]
    }

    /// The piecewise-linear part of the envelope: the exact derivative of
    /// `a0_integral_from_left`. Differs from `a0` only between samples,
    /// where `a0` additionally takes a max against |a|.
    pub fn a0_pl(&self, x: f64) -> f64 {
        self.envelope_linear(x)
    }

    /// Slope of the piecewise-linear envelope part at x (the exact second
    /// derivative of `a0_integral_from_left` away from sample kinks; zero
    /// outside the sampled domain).
    pub fn a0_pl_slope(&self, x: f64) -> f64 {
        let xs = &self.sample_xs;
        if x <= xs[0] || x >= xs[xs.len() - 1] {
            return 0.0;
        }
        let dx = xs[1] - xs[0];
        let i = (((x - xs[0]) / dx) as usize).min(xs.len() - 2);
        self.a0_scale * (self.a0_samples[i + 1] - self.a0_samples[i]) / dx
    }

    /// L1 norm of the envelope over the domain (adaptive quadrature).
    pub fn a0_l1(&self) -> f64 {
        self.a0_l1
    }

    /// Largest envelope slope, measured by finite differences on the
    /// sampling grid.
    pub fn a0_prime_sup(&self) -> f64 {
        let dx = self.sample_xs[1] - self.sample_xs[0];
        self.a0_samples
            .windows(2)
            .fold(0.0f64, |acc, w| acc.max((w[1] - w[0]).abs() / dx))
            * self.a0_scale
    }

    /// Integral of a(x) between two points (adaptive quadrature).
    pub fn a_integral(&self, x1: f64, x2: f64) -> Result<f64> {
        if x1 == x2 {
            return Ok(0.0);
        }
        let (lo, hi, sign) = if x1 < x2 { (x1, x2, 1.0) } else { (x2, x1, -1.0) };
        Ok(sign * quad::adaptive_simpson(&|x| self.a(x), lo, hi, 1e-11)?)
    }
}

/// Admissibility verdict for a geometry under a gas model.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub gamma: f64,
    pub threshold: f64,
    pub a0_l1: f64,
    pub admissible: bool,
    /// Guaranteed bound on max A / min A along the duct: exp(||a0||_1).
    pub area_ratio_bound: f64,
}

/// Threshold on ||a0||_1 below which the geometry is admissible.
pub fn admissibility_threshold(gas: &GasModel) -> f64 {
    match gas.mode {
        FlowMode::Isentropic => (1.0 - gas.theta) / (1.0 + gas.theta),
        FlowMode::Isothermal => 0.5,
    }
}

pub fn check_admissible(geom: &NozzleGeometry, gas: &GasModel) -> AdmissibilityReport {
    let threshold = admissibility_threshold(gas);
    let a0_l1 = geom.a0_l1();
    AdmissibilityReport {
        gamma: gas.gamma,
        threshold,
        a0_l1,
        // Comparison slack sits at quadrature accuracy so that geometries
        // fitted exactly onto the threshold count as the boundary case.
        admissible: a0_l1 <= threshold * (1.0 + 1e-9) + 1e-12,
        area_ratio_bound: a0_l1.exp(),
    }
}

/// Parse a two-column "x A" text table. Lines starting with '#' are comments.
pub fn read_area_table(path: &std::path::Path) -> Result<GeometrySpec> {
    let text = std::fs::read_to_string(path)?;
    parse_area_table(&text)
}

pub fn parse_area_table(text: &str) -> Result<GeometrySpec> {
    let mut xs = Vec::new();
    let mut areas = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (x, a) = match (parts.next(), parts.next()) {
            (Some(x), Some(a)) => (x, a),
            _ => {
                return Err(Error::invalid(format!(
                    "area table line {}: expected two columns",
                    lineno + 1
                )))
            }
        };
        let x: f64 = x.parse().map_err(|_| {
            Error::invalid(format!("area table line {}: bad x value", lineno + 1))
        })?;
        let a: f64 = a.parse().map_err(|_| {
            Error::invalid(format!("area table line {}: bad area value", lineno + 1))
        })?;
        xs.push(x);
        areas.push(a);
    }
    Ok(GeometrySpec::Tabulated { xs, areas })
}

/// Rescale the amplitude parameter of an analytic geometry (depth for
/// laval-bump, kappa for exp-monotone) so the built envelope satisfies
/// ||a0||_1 = target. Bisection on the built geometry.
pub fn fit_to_a0_l1(
    spec: GeometrySpec,
    x_min: f64,
    x_max: f64,
    n_samples: usize,
    a0_scale: f64,
    target: f64,
) -> Result<NozzleGeometry> {
    if !(target > 0.0) {
        return Err(Error::invalid("target L1 norm must be positive"));
    }
    let with_amplitude = |amp: f64| -> GeometrySpec {
        match &spec {
            GeometrySpec::ExpMonotone { center, width, kappa } => GeometrySpec::ExpMonotone {
                kappa: amp * kappa.signum(),
                center: *center,
                width: *width,
            },
            GeometrySpec::LavalBump {
                area_inf,
                width,
                center,
                ..
            } => GeometrySpec::LavalBump {
                area_inf: *area_inf,
                depth: amp,
                width: *width,
                center: *center,
            },
            other => other.clone(),
        }
    };
    match spec {
        GeometrySpec::Constant { .. } | GeometrySpec::Tabulated { .. } => Err(Error::invalid(
            "only analytic geometry kinds support amplitude fitting",
        )),
        _ => {
            let max_amp = match &spec {
                GeometrySpec::LavalBump { area_inf, .. } => area_inf * (1.0 - 1e-6),
                _ => {
                    // kappa = target already gives ||a||_1 = target; leave
                    // headroom for the envelope inflation.
                    2.0 * target
                }
            };
            let eval = |amp: f64| -> Result<f64> {
                let g = NozzleGeometry::build_with(with_amplitude(amp), x_min, x_max, n_samples, a0_scale)?;
                Ok(g.a0_l1())
            };
            let mut lo = 0.0;
            let mut hi = max_amp;
            if eval(hi)? < target {
                return Err(Error::invalid(
                    "target L1 norm unreachable within the geometry's amplitude range",
                ));
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if eval(mid)? < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-14 * max_amp {
                    break;
                }
            }
            NozzleGeometry::build_with(with_amplitude(0.5 * (lo + hi)), x_min, x_max, n_samples, a0_scale)
        }
    }
}
