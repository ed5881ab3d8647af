//! Gas law, characteristic speeds, and Riemann-invariant coordinates.
//!
//! Isentropic flow uses p(rho) = p0 rho^gamma with p0 = theta^2 / gamma,
//! theta = (gamma - 1) / 2, so that the invariants take the normalized form
//! w = u + rho^theta, z = u - rho^theta. Isothermal flow (gamma = 1) uses
//! p = rho and logarithmic invariants w = u + ln rho, z = u - ln rho.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowMode {
    Isentropic,
    Isothermal,
}

/// Conserved state at one point: density and momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conserved {
    pub density: f64,
    pub momentum: f64,
}

/// Riemann invariants at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantPair {
    pub w: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GasModel {
    pub mode: FlowMode,
    pub gamma: f64,
    /// (gamma - 1) / 2; zero in isothermal mode.
    pub theta: f64,
    /// Pressure prefactor theta^2 / gamma; unity in isothermal mode.
    pub p0: f64,
}

/// x^e for x > 0 with exponent-specific fast paths for the exponents that
/// show up in pressure laws, falling back to exp(e ln x).
#[inline]
pub fn pow_pos(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else if e == 2.0 {
        x * x
    } else if e == 0.5 {
        x.sqrt()
    } else if e == 1.5 {
        x * x.sqrt()
    } else if e == 1.0 / 3.0 {
        x.cbrt()
    } else if e == 2.0 / 3.0 {
        x.cbrt() * x.cbrt()
    } else if e == 5.0 / 3.0 {
        x * x.cbrt() * x.cbrt()
    } else if e == 0.25 {
        x.sqrt().sqrt()
    } else {
        (e * x.ln()).exp()
    }
}

impl GasModel {
    /// Isentropic model. The adiabatic exponent must lie strictly between 1 and 3.
    pub fn isentropic(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0 && gamma < 3.0) {
            return Err(Error::Config(format!(
                "gamma must satisfy 1 < gamma < 3 for isentropic flow, got {gamma}"
            )));
        }
        let theta = 0.5 * (gamma - 1.0);
        Ok(GasModel {
            mode: FlowMode::Isentropic,
            gamma,
            theta,
            p0: theta * theta / gamma,
        })
    }

    /// Isothermal model (gamma = 1, p = rho).
    pub fn isothermal() -> Self {
        GasModel {
            mode: FlowMode::Isothermal,
            gamma: 1.0,
            theta: 0.0,
            p0: 1.0,
        }
    }

    /// rho^theta, with the vacuum limit pinned to 0.
    pub fn density_pow_theta(&self, density: f64) -> f64 {
        if density == 0.0 {
            0.0
        } else {
            pow_pos(density, self.theta)
        }
    }

    pub fn pressure(&self, density: f64) -> f64 {
        match self.mode {
            FlowMode::Isentropic => {
                if density == 0.0 {
                    0.0
                } else {
                    self.p0 * pow_pos(density, self.gamma)
                }
            }
            FlowMode::Isothermal => density,
        }
    }

    /// d p / d rho.
    pub fn pressure_derivative(&self, density: f64) -> f64 {
        match self.mode {
            FlowMode::Isentropic => {
                if density == 0.0 {
                    0.0
                } else {
                    self.p0 * self.gamma * pow_pos(density, self.gamma - 1.0)
                }
            }
            FlowMode::Isothermal => 1.0,
        }
    }

    /// Characteristic speeds (lambda_1, lambda_2) of the inviscid system.
    pub fn eigenvalues(&self, u: Conserved) -> Result<(f64, f64)> {
        if u.density <= 0.0 {
            return Err(Error::invalid(format!(
                "eigenvalues need positive density, got {}",
                u.density
            )));
        }
        let vel = u.momentum / u.density;
        let c = match self.mode {
            FlowMode::Isentropic => self.theta * self.density_pow_theta(u.density),
            FlowMode::Isothermal => 1.0,
        };
        Ok((vel - c, vel + c))
    }

    pub fn to_riemann(&self, u: Conserved) -> Result<InvariantPair> {
        if u.density <= 0.0 {
            return Err(Error::invalid(format!(
                "Riemann invariants need positive density, got {}",
                u.density
            )));
        }
        let vel = u.momentum / u.density;
        let s = match self.mode {
            FlowMode::Isentropic => self.density_pow_theta(u.density),
            FlowMode::Isothermal => u.density.ln(),
        };
        Ok(InvariantPair {
            w: vel + s,
            z: vel - s,
        })
    }

    pub fn from_riemann(&self, inv: InvariantPair) -> Result<Conserved> {
        let half_diff = 0.5 * (inv.w - inv.z);
        let density = match self.mode {
            FlowMode::Isentropic => {
                if half_diff < 0.0 {
                    return Err(Error::invalid(format!(
                        "invariants must satisfy w >= z, got w={} z={}",
                        inv.w, inv.z
                    )));
                }
                if half_diff == 0.0 {
                    0.0
                } else {
                    (half_diff.ln() / self.theta).exp()
                }
            }
            FlowMode::Isothermal => half_diff.exp(),
        };
        Ok(Conserved {
            density,
            momentum: density * 0.5 * (inv.w + inv.z),
        })
    }
}

/// Characteristic speeds of the perturbed isothermal flux used with floor
/// parameter delta: u -/+ (n - delta)/n.
pub fn eigenvalues_delta(n: f64, j: f64, delta: f64) -> Result<(f64, f64)> {
    if n < delta || n <= 0.0 {
        return Err(Error::invalid(format!(
            "perturbed eigenvalues need n >= delta > 0, got n={n}, delta={delta}"
        )));
    }
    let vel = j / n;
    let c = (n - delta) / n;
    Ok((vel - c, vel + c))
}
