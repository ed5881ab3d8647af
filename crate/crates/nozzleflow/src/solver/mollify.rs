//! Initial-data smoothing: discrete convolution with a compactly supported
//! bump kernel, plus the density lift that keeps viscous runs away from vacuum.

use super::FieldState;
use crate::error::{Error, Result};

/// Convolution kernel description. The profile is the standard bump
/// exp(-1/(1 - (x/width)^2)) restricted to |x| < width, discretized on the
/// grid spacing and normalized so the discrete weights sum to one exactly.
#[derive(Debug, Clone, Copy)]
pub struct MollifierSpec {
    pub width: f64,
}

impl MollifierSpec {
    /// Default width for a viscosity-epsilon run: epsilon, clamped below at
    /// two grid cells so the discrete kernel always has interior support.
    pub fn for_epsilon(epsilon: f64, dx: f64) -> Self {
        MollifierSpec {
            width: epsilon.max(2.0 * dx),
        }
    }

    pub fn weights(&self, dx: f64) -> Result<Vec<f64>> {
        if !(self.width > 0.0) {
            return Err(Error::invalid("mollifier width must be positive"));
        }
        let half = (self.width / dx).ceil() as usize;
        let mut w = Vec::with_capacity(2 * half + 1);
        for k in -(half as i64)..=half as i64 {
            let t = k as f64 * dx / self.width;
            w.push(if t.abs() < 1.0 {
                (-1.0 / (1.0 - t * t)).exp()
            } else {
                0.0
            });
        }
        let sum: f64 = w.iter().sum();
        for v in w.iter_mut() {
            *v /= sum;
        }
        Ok(w)
    }
}

/// Convolve one sampled profile with the kernel, extending by the edge values
/// (the far field is constant).
pub fn mollify_profile(values: &[f64], dx: f64, spec: MollifierSpec) -> Result<Vec<f64>> {
    let w = spec.weights(dx)?;
    let half = w.len() / 2;
    let n = values.len();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &kw) in w.iter().enumerate() {
            let idx = (i as i64 + j as i64 - half as i64).clamp(0, n as i64 - 1);
            acc += kw * values[idx as usize];
        }
        *o = acc;
    }
    Ok(out)
}

/// Smooth raw initial data: add `lift` to the density, then convolve both
/// fields with the kernel.
pub fn mollify_initial(
    raw: &FieldState,
    spec: MollifierSpec,
    lift: f64,
) -> Result<FieldState> {
    let lifted: Vec<f64> = raw.density.iter().map(|r| r + lift).collect();
    let density = mollify_profile(&lifted, raw.grid.dx(), spec)?;
    let momentum = mollify_profile(&raw.momentum, raw.grid.dx(), spec)?;
    FieldState::new(raw.grid, raw.t, density, momentum)
}
