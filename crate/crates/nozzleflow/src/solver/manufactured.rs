//! Manufactured travelling-wave solutions for convergence studies.
//!
//! The exact fields are a sinusoidal density and velocity wave. Substituting
//! them into the viscous equations leaves a residual; feeding that residual
//! back as a forcing term makes the wave an exact solution of the forced
//! system, so the distance between it and the computed fields is pure
//! discretisation error and its decay under refinement measures the order of
//! the scheme.

use super::rhs::Forcing;
use super::run::{run_with, RunOptions};
use super::{FieldState, Grid, SolutionTrace, SolverConfig};
use crate::error::Result;
use crate::gas::{FlowMode, GasModel};
use crate::geometry::NozzleGeometry;
use crate::monitor::build_controls;
use std::sync::Arc;

/// rho = r0 + r1 sin(k x - omega t), u = u0 + u1 cos(k x - omega t).
#[derive(Debug, Clone, Copy)]
pub struct WaveSolution {
    pub r0: f64,
    pub r1: f64,
    pub u0: f64,
    pub u1: f64,
    pub k: f64,
    pub omega: f64,
}

impl WaveSolution {
    /// Gentle subsonic wave, density well away from zero.
    pub fn standard() -> Self {
        WaveSolution {
            r0: 1.0,
            r1: 0.2,
            u0: 0.3,
            u1: 0.2,
            k: 0.5,
            omega: 0.7,
        }
    }

    pub fn density(&self, x: f64, t: f64) -> f64 {
        self.r0 + self.r1 * (self.k * x - self.omega * t).sin()
    }

    pub fn velocity(&self, x: f64, t: f64) -> f64 {
        self.u0 + self.u1 * (self.k * x - self.omega * t).cos()
    }

    pub fn momentum(&self, x: f64, t: f64) -> f64 {
        self.density(x, t) * self.velocity(x, t)
    }

    pub fn state(&self, grid: Grid, t: f64) -> FieldState {
        let xs = grid.nodes();
        FieldState {
            grid,
            t,
            density: xs.iter().map(|&x| self.density(x, t)).collect(),
            momentum: xs.iter().map(|&x| self.momentum(x, t)).collect(),
        }
    }

    /// All pointwise derivatives the residual needs, at (x, t).
    fn parts(&self, x: f64, t: f64) -> WaveParts {
        let phase = self.k * x - self.omega * t;
        let (s, c) = phase.sin_cos();
        let rho = self.r0 + self.r1 * s;
        let u = self.u0 + self.u1 * c;
        let rho_x = self.r1 * self.k * c;
        let rho_t = -self.r1 * self.omega * c;
        let rho_xx = -self.r1 * self.k * self.k * s;
        let u_x = -self.u1 * self.k * s;
        let u_t = self.u1 * self.omega * s;
        let u_xx = -self.u1 * self.k * self.k * c;
        WaveParts {
            rho,
            u,
            rho_x,
            rho_t,
            rho_xx,
            u_x,
            u_t,
            u_xx,
        }
    }

    /// Residual forcing that turns the wave into an exact solution of the
    /// viscous system with geometry `geom` and damping envelope b(x).
    pub fn forcing(
        &self,
        gas: GasModel,
        geom: &NozzleGeometry,
        b: Arc<dyn Fn(f64) -> f64 + Sync + Send>,
        epsilon: f64,
        delta: f64,
    ) -> Forcing {
        let wave = *self;
        let geom_r = Arc::new(geom.clone());
        let geom_m = Arc::clone(&geom_r);
        let b_m = Arc::clone(&b);
        let wave_end = *self;
        let density: Box<dyn Fn(f64, f64) -> f64 + Sync> = match gas.mode {
            FlowMode::Isentropic => Box::new(move |x, t| {
                let p = wave.parts(x, t);
                let m = p.rho * p.u;
                let m_x = p.rho_x * p.u + p.rho * p.u_x;
                p.rho_t + m_x - geom_r.a(x) * m - epsilon * p.rho_xx
            }),
            FlowMode::Isothermal => Box::new(move |x, t| {
                let p = wave.parts(x, t);
                let j_x = p.rho_x * p.u + p.rho * p.u_x;
                // flux is J - delta u, so its derivative picks up -delta u_x.
                p.rho_t + j_x - delta * p.u_x - epsilon * p.rho_xx
            }),
        };
        let momentum: Box<dyn Fn(f64, f64) -> f64 + Sync> = match gas.mode {
            FlowMode::Isentropic => Box::new(move |x, t| {
                let p = wave.parts(x, t);
                let m = p.rho * p.u;
                let m_t = p.rho_t * p.u + p.rho * p.u_t;
                let m_xx = p.rho_xx * p.u + 2.0 * p.rho_x * p.u_x + p.rho * p.u_xx;
                let flux_x = p.rho_x * p.u * p.u
                    + 2.0 * p.rho * p.u * p.u_x
                    + gas.pressure_derivative(p.rho) * p.rho_x;
                let a = geom_m.a(x);
                m_t + flux_x - a * m * p.u - epsilon * m_xx + 2.0 * epsilon * b_m(x) * p.rho_x
            }),
            FlowMode::Isothermal => Box::new(move |x, t| {
                let p = wave.parts(x, t);
                let j = p.rho * p.u;
                let j_x = p.rho_x * p.u + p.rho * p.u_x;
                let j_t = p.rho_t * p.u + p.rho * p.u_t;
                let j_xx = p.rho_xx * p.u + 2.0 * p.rho_x * p.u_x + p.rho * p.u_xx;
                // flux is J u - delta u^2 / 2 + P_delta(n).
                let flux_x = j_x * p.u + j * p.u_x - delta * p.u * p.u_x
                    + (1.0 - delta / p.rho) * p.rho_x;
                let a = geom_m.a(x);
                let bx = b_m(x);
                j_t + flux_x - epsilon * j_xx + a * (p.rho - delta) - 2.0 * bx * delta * p.u
                    + 4.0 * epsilon * bx * p.rho_x
            }),
        };
        Forcing {
            density,
            momentum,
            exact_boundary: Some(Box::new(move |x, t| {
                (wave_end.density(x, t), wave_end.momentum(x, t))
            })),
        }
    }
}

struct WaveParts {
    rho: f64,
    u: f64,
    rho_x: f64,
    rho_t: f64,
    rho_xx: f64,
    u_x: f64,
    u_t: f64,
    u_xx: f64,
}

/// Discrete L2 distance between the final snapshot and the exact wave,
/// density and momentum errors combined.
pub fn l2_error(trace: &SolutionTrace, wave: &WaveSolution) -> f64 {
    let last = trace.last();
    let exact = wave.state(trace.grid, last.t);
    let dx = trace.grid.dx();
    let mut sum = 0.0;
    for i in 0..trace.grid.n_cells {
        let dr = last.density[i] - exact.density[i];
        let dm = last.momentum[i] - exact.momentum[i];
        sum += (dr * dr + dm * dm) * dx;
    }
    sum.sqrt()
}

/// Run the forced system from exact initial data on `n_cells` nodes and
/// return the final-time L2 error.
pub fn mms_error(
    gas: &GasModel,
    geom: &NozzleGeometry,
    wave: &WaveSolution,
    epsilon: f64,
    t_end: f64,
    n_cells: usize,
) -> Result<f64> {
    let grid = Grid::new(geom.x_min, geom.x_max, n_cells)?;
    let init = wave.state(grid, 0.0);
    let mut cfg = SolverConfig::new(epsilon, t_end);
    cfg.snapshot_dt = t_end / 4.0;
    let controls = build_controls(gas, geom, &init, epsilon, 1e-3)?;
    let ctl = Arc::new(controls.clone());
    let b: Arc<dyn Fn(f64) -> f64 + Sync + Send> = Arc::new(move |x| ctl.b(x));
    let forcing = wave.forcing(*gas, geom, b, epsilon, cfg.delta_value());
    let trace = run_with(
        &init,
        gas,
        geom,
        &controls,
        &cfg,
        RunOptions {
            forcing: Some(&forcing),
            ..RunOptions::default()
        },
    )?;
    Ok(l2_error(&trace, wave))
}

/// log2 ratios of consecutive errors for a resolution doubling ladder.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometrySpec;
    use crate::solver::rhs::RhsContext;
    use crate::solver::advance;

    fn small_geom() -> NozzleGeometry {
        NozzleGeometry::build(
            GeometrySpec::LavalBump {
                area_inf: 2.0,
                depth: 0.2,
                width: 1.0,
                center: 0.0,
            },
            -8.0,
            8.0,
        )
        .unwrap()
    }

    #[test]
    fn forcing_cancels_the_residual_at_the_exact_solution() {
        // One tiny forced step from exact data: the discrete increment over
        // dt should match the analytic time derivative up to the O(dx^2)
        // spatial truncation plus O(dt).
        for gas in [GasModel::isentropic(2.0).unwrap(), GasModel::isothermal()] {
            let geom = small_geom();
            let wave = WaveSolution::standard();
            let grid = Grid::new(-8.0, 8.0, 513).unwrap();
            let epsilon = 0.1;
            let cfg = SolverConfig::new(epsilon, 0.1);
            let init = wave.state(grid, 0.0);
            let controls = build_controls(&gas, &geom, &init, epsilon, 1e-3).unwrap();
            let ctl = Arc::new(controls.clone());
            let b: Arc<dyn Fn(f64) -> f64 + Sync + Send> = Arc::new(move |x| ctl.b(x));
            let forcing = wave.forcing(gas, &geom, b, epsilon, cfg.delta_value());
            let ctx = RhsContext::new(
                gas,
                &geom,
                &|x| controls.b(x),
                grid,
                epsilon,
                cfg.delta_value(),
                cfg.boundary,
            )
            .with_forcing(&forcing);
            let dt = 1e-7;
            let next = advance(&init, dt, &ctx).unwrap();
            let mut worst: f64 = 0.0;
            for i in 1..grid.n_cells - 1 {
                let x = grid.node(i);
                let p = wave.parts(x, 0.0);
                let exact_rt = p.rho_t;
                let exact_mt = p.rho_t * p.u + p.rho * p.u_t;
                worst = worst.max(((next.density[i] - init.density[i]) / dt - exact_rt).abs());
                worst = worst.max(((next.momentum[i] - init.momentum[i]) / dt - exact_mt).abs());
            }
            assert!(worst < 5e-3, "mode {:?}: residual {worst}", gas.mode);
        }
    }

    #[test]
    fn wave_state_samples_the_closed_form() {
        let wave = WaveSolution::standard();
        let grid = Grid::new(-8.0, 8.0, 33).unwrap();
        let s = wave.state(grid, 0.25);
        let x = grid.node(7);
        assert!((s.density[7] - wave.density(x, 0.25)).abs() < 1e-15);
        assert!((s.momentum[7] - wave.momentum(x, 0.25)).abs() < 1e-15);
    }

    #[test]
    fn observed_orders_recover_a_quadratic_ladder() {
        let orders = observed_orders(&[1.0e-2, 2.5e-3, 6.25e-4]);
        assert!((orders[0] - 2.0).abs() < 1e-12);
        assert!((orders[1] - 2.0).abs() < 1e-12);
    }
}
