//! Discrete right-hand sides for the viscous systems, the stable-step bound,
//! and the two-stage time integrator.

use super::{Boundary, FieldState, Grid, SolverConfig};
use crate::error::{Error, Result};
use crate::gas::{FlowMode, GasModel};
use crate::geometry::NozzleGeometry;

/// Optional manufactured-solution hooks: source terms added to both equations
/// and, when present, exact boundary values that override the edge treatment.
pub struct Forcing {
    pub density: Box<dyn Fn(f64, f64) -> f64 + Sync>,
    pub momentum: Box<dyn Fn(f64, f64) -> f64 + Sync>,
    pub exact_boundary: Option<Box<dyn Fn(f64, f64) -> (f64, f64) + Sync>>,
}

/// Grid-sampled coefficients shared by every step of a run.
pub struct RhsContext<'f> {
    pub gas: GasModel,
    pub epsilon: f64,
    pub delta: f64,
    pub boundary: Boundary,
    pub grid: Grid,
    a: Vec<f64>,
    b: Vec<f64>,
    forcing: Option<&'f Forcing>,
}

impl<'f> RhsContext<'f> {
    pub fn new(
        gas: GasModel,
        geom: &NozzleGeometry,
        b: &dyn Fn(f64) -> f64,
        grid: Grid,
        epsilon: f64,
        delta: f64,
        boundary: Boundary,
    ) -> Self {
        let xs = grid.nodes();
        RhsContext {
            gas,
            epsilon,
            delta,
            boundary,
            grid,
            a: xs.iter().map(|&x| geom.a(x)).collect(),
            b: xs.iter().map(|&x| b(x)).collect(),
            forcing: None,
        }
    }

    pub fn with_forcing(mut self, forcing: &'f Forcing) -> Self {
        self.forcing = Some(forcing);
        self
    }

    fn eval(&self, density: &[f64], momentum: &[f64], t: f64, out_r: &mut [f64], out_m: &mut [f64]) -> Result<()> {
        match self.gas.mode {
            FlowMode::Isentropic => self.eval_isentropic(density, momentum, t, out_r, out_m),
            FlowMode::Isothermal => self.eval_isothermal(density, momentum, t, out_r, out_m),
        }
    }

    fn eval_isentropic(
        &self,
        r: &[f64],
        m: &[f64],
        t: f64,
        out_r: &mut [f64],
        out_m: &mut [f64],
    ) -> Result<()> {
        let n = r.len();
        let dx = self.grid.dx();
        let inv2dx = 0.5 / dx;
        let invdx2 = 1.0 / (dx * dx);
        let eps = self.epsilon;
        let mut flux = vec![0.0; n];
        for i in 0..n {
            if !(r[i] > 0.0) {
                return Err(Error::numeric(
                    t,
                    format!("density positivity lost at node {i} (rho = {})", r[i]),
                ));
            }
            flux[i] = m[i] * m[i] / r[i] + self.gas.pressure(r[i]);
        }
        let at = |idx: i64| -> usize { idx.clamp(0, n as i64 - 1) as usize };
        let (lo, hi) = match self.boundary {
            Boundary::FarFieldDirichlet => (1, n - 1),
            Boundary::ZeroGradient => (0, n),
        };
        out_r[0] = 0.0;
        out_m[0] = 0.0;
        out_r[n - 1] = 0.0;
        out_m[n - 1] = 0.0;
        for i in lo..hi {
            let (im, ip) = (at(i as i64 - 1), at(i as i64 + 1));
            let rho_x = (r[ip] - r[im]) * inv2dx;
            let m_x = (m[ip] - m[im]) * inv2dx;
            let flux_x = (flux[ip] - flux[im]) * inv2dx;
            let lap_r = (r[ip] - 2.0 * r[i] + r[im]) * invdx2;
            let lap_m = (m[ip] - 2.0 * m[i] + m[im]) * invdx2;
            out_r[i] = -m_x + self.a[i] * m[i] + eps * lap_r;
            out_m[i] =
                -flux_x + self.a[i] * m[i] * m[i] / r[i] + eps * lap_m - 2.0 * eps * self.b[i] * rho_x;
        }
        if let Some(f) = self.forcing {
            for i in lo..hi {
                let x = self.grid.node(i);
                out_r[i] += (f.density)(x, t);
                out_m[i] += (f.momentum)(x, t);
            }
        }
        Ok(())
    }

    fn eval_isothermal(
        &self,
        nn: &[f64],
        jj: &[f64],
        t: f64,
        out_n: &mut [f64],
        out_j: &mut [f64],
    ) -> Result<()> {
        let n = nn.len();
        let dx = self.grid.dx();
        let inv2dx = 0.5 / dx;
        let invdx2 = 1.0 / (dx * dx);
        let eps = self.epsilon;
        let delta = self.delta;
        let mut flux_n = vec![0.0; n];
        let mut flux_j = vec![0.0; n];
        for i in 0..n {
            if !(nn[i] > 0.0) {
                return Err(Error::numeric(
                    t,
                    format!("density positivity lost at node {i} (n = {})", nn[i]),
                ));
            }
            let u = jj[i] / nn[i];
            flux_n[i] = jj[i] - delta * u;
            flux_j[i] = jj[i] * u - 0.5 * delta * u * u + pressure_delta(nn[i], delta);
        }
        let at = |idx: i64| -> usize { idx.clamp(0, n as i64 - 1) as usize };
        let (lo, hi) = match self.boundary {
            Boundary::FarFieldDirichlet => (1, n - 1),
            Boundary::ZeroGradient => (0, n),
        };
        out_n[0] = 0.0;
        out_j[0] = 0.0;
        out_n[n - 1] = 0.0;
        out_j[n - 1] = 0.0;
        for i in lo..hi {
            let (im, ip) = (at(i as i64 - 1), at(i as i64 + 1));
            let n_x = (nn[ip] - nn[im]) * inv2dx;
            let fn_x = (flux_n[ip] - flux_n[im]) * inv2dx;
            let fj_x = (flux_j[ip] - flux_j[im]) * inv2dx;
            let lap_n = (nn[ip] - 2.0 * nn[i] + nn[im]) * invdx2;
            let lap_j = (jj[ip] - 2.0 * jj[i] + jj[im]) * invdx2;
            out_n[i] = -fn_x + eps * lap_n;
            out_j[i] = -fj_x + eps * lap_j - self.a[i] * (nn[i] - delta)
                + 2.0 * self.b[i] * delta * jj[i] / nn[i]
                - 4.0 * eps * self.b[i] * n_x;
        }
        if let Some(f) = self.forcing {
            for i in lo..hi {
                let x = self.grid.node(i);
                out_n[i] += (f.density)(x, t);
                out_j[i] += (f.momentum)(x, t);
            }
        }
        Ok(())
    }

    fn pin_exact(&self, state: &mut FieldState, t: f64) {
        if let Some(f) = self.forcing.and_then(|f| f.exact_boundary.as_ref()) {
            let n = state.grid.n_cells;
            let (r0, m0) = f(state.grid.node(0), t);
            let (r1, m1) = f(state.grid.node(n - 1), t);
            state.density[0] = r0;
            state.momentum[0] = m0;
            state.density[n - 1] = r1;
            state.momentum[n - 1] = m1;
        }
    }
}

/// Perturbed isothermal pressure with floor delta:
/// P_delta(n) = (n - delta) - delta ln(n / delta).
pub fn pressure_delta(n: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        n
    } else {
        (n - delta) - delta * (n / delta).ln()
    }
}

/// Right-hand side of the viscous isentropic system sampled on the grid of `s`.
pub fn rhs_isentropic(
    s: &FieldState,
    gas: &GasModel,
    geom: &NozzleGeometry,
    b: &dyn Fn(f64) -> f64,
    epsilon: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let ctx = RhsContext::new(
        *gas,
        geom,
        b,
        s.grid,
        epsilon,
        0.0,
        Boundary::FarFieldDirichlet,
    );
    let mut out_r = vec![0.0; s.grid.n_cells];
    let mut out_m = vec![0.0; s.grid.n_cells];
    ctx.eval(&s.density, &s.momentum, s.t, &mut out_r, &mut out_m)?;
    Ok((out_r, out_m))
}

/// Right-hand side of the viscous isothermal system with floor delta.
pub fn rhs_isothermal(
    s: &FieldState,
    geom: &NozzleGeometry,
    b: &dyn Fn(f64) -> f64,
    epsilon: f64,
    delta: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let ctx = RhsContext::new(
        GasModel::isothermal(),
        geom,
        b,
        s.grid,
        epsilon,
        delta,
        Boundary::FarFieldDirichlet,
    );
    let mut out_n = vec![0.0; s.grid.n_cells];
    let mut out_j = vec![0.0; s.grid.n_cells];
    ctx.eval(&s.density, &s.momentum, s.t, &mut out_n, &mut out_j)?;
    Ok((out_n, out_j))
}

/// Largest characteristic speed over the grid.
pub fn max_wave_speed(s: &FieldState, gas: &GasModel, delta: f64) -> Result<f64> {
    let mut speed = 0.0f64;
    match gas.mode {
        FlowMode::Isentropic => {
            for (r, m) in s.density.iter().zip(&s.momentum) {
                if !(*r > 0.0) {
                    return Err(Error::numeric(
                        s.t,
                        format!("density positivity lost (rho = {r})"),
                    ));
                }
                let c = gas.theta * gas.density_pow_theta(*r);
                speed = speed.max((m / r).abs() + c);
            }
        }
        FlowMode::Isothermal => {
            for (n, j) in s.density.iter().zip(&s.momentum) {
                if !(*n > 0.0) {
                    return Err(Error::numeric(
                        s.t,
                        format!("density positivity lost (n = {n})"),
                    ));
                }
                let c = ((n - delta) / n).max(0.0);
                speed = speed.max((j / n).abs() + c);
            }
        }
    }
    Ok(speed)
}

/// Stable time step: min of the advective CFL bound and the diffusive bound
/// diff_safety * dx^2 / (2 epsilon).
pub fn stable_dt(s: &FieldState, gas: &GasModel, cfg: &SolverConfig) -> Result<f64> {
    let dx = s.grid.dx();
    let speed = max_wave_speed(s, gas, cfg.delta_value())?;
    let advective = if speed > 0.0 {
        cfg.cfl * dx / speed
    } else {
        f64::INFINITY
    };
    let diffusive = cfg.diff_safety * dx * dx / (2.0 * cfg.epsilon);
    let dt = advective.min(diffusive);
    if !dt.is_finite() || !(dt > 0.0) {
        return Err(Error::numeric(s.t, format!("no stable step (dt = {dt})")));
    }
    Ok(dt)
}

/// One Heun step (predictor + trapezoidal corrector), second order in time.
pub fn advance(s: &FieldState, dt: f64, ctx: &RhsContext) -> Result<FieldState> {
    let mut next = s.clone();
    advance_in_place(&mut next, dt, ctx, &mut StepScratch::new(s.grid.n_cells))?;
    Ok(next)
}

pub(super) struct StepScratch {
    k1r: Vec<f64>,
    k1m: Vec<f64>,
    k2r: Vec<f64>,
    k2m: Vec<f64>,
    pr: Vec<f64>,
    pm: Vec<f64>,
}

impl StepScratch {
    pub(super) fn new(n: usize) -> Self {
        StepScratch {
            k1r: vec![0.0; n],
            k1m: vec![0.0; n],
            k2r: vec![0.0; n],
            k2m: vec![0.0; n],
            pr: vec![0.0; n],
            pm: vec![0.0; n],
        }
    }
}

pub(super) fn advance_in_place(
    s: &mut FieldState,
    dt: f64,
    ctx: &RhsContext,
    scratch: &mut StepScratch,
) -> Result<()> {
    let n = s.grid.n_cells;
    let t = s.t;
    ctx.eval(&s.density, &s.momentum, t, &mut scratch.k1r, &mut scratch.k1m)?;
    for i in 0..n {
        scratch.pr[i] = s.density[i] + dt * scratch.k1r[i];
        scratch.pm[i] = s.momentum[i] + dt * scratch.k1m[i];
    }
    let mut predictor = FieldState {
        grid: s.grid,
        t: t + dt,
        density: std::mem::take(&mut scratch.pr),
        momentum: std::mem::take(&mut scratch.pm),
    };
    ctx.pin_exact(&mut predictor, t + dt);
    let eval2 = ctx.eval(
        &predictor.density,
        &predictor.momentum,
        t + dt,
        &mut scratch.k2r,
        &mut scratch.k2m,
    );
    scratch.pr = predictor.density;
    scratch.pm = predictor.momentum;
    eval2?;
    for i in 0..n {
        s.density[i] += 0.5 * dt * (scratch.k1r[i] + scratch.k2r[i]);
        s.momentum[i] += 0.5 * dt * (scratch.k1m[i] + scratch.k2m[i]);
    }
    s.t = t + dt;
    ctx.pin_exact(s, s.t);
    Ok(())
}
