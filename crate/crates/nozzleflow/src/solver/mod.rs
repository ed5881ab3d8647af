//! Viscous finite-difference solver for nozzle flow.
//!
//! Second-order central differences in space, Heun (two-stage Runge-Kutta)
//! in time, with the time step limited by both the advective CFL condition
//! and the diffusive stability bound. Time stepping is clipped to a fixed
//! lattice of checkpoint times (multiples of `snapshot_dt`), which makes a
//! trajectory over [0, T] bitwise independent of the final time requested.

pub mod manufactured;
mod mollify;
mod presets;
mod rhs;
mod run;

pub use mollify::{mollify_initial, mollify_profile, MollifierSpec};
pub use presets::{build_initial, read_state_table, InitialPreset};
pub use rhs::{
    advance, pressure_delta, rhs_isentropic, rhs_isothermal, stable_dt, Forcing, RhsContext,
};
pub use run::{prepare_initial, run, run_with, RunOptions, SnapshotSink};

use crate::error::{Error, Result};
use crate::gas::FlowMode;
use serde::{Deserialize, Serialize};

/// Uniform node grid over [x_min, x_max], endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if !(x_max > x_min) {
            return Err(Error::invalid("grid needs x_max > x_min"));
        }
        if n_cells < 16 {
            return Err(Error::invalid("grid needs at least 16 cells"));
        }
        Ok(Grid {
            x_min,
            x_max,
            n_cells,
        })
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_cells - 1) as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.node(i)).collect()
    }
}

/// Boundary treatment at the domain edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// End nodes stay pinned at their initial far-field values.
    FarFieldDirichlet,
    /// One-sided ghost extension; end nodes evolve.
    ZeroGradient,
}

/// Time-integration parameters for one viscous run.
#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    /// Isothermal density floor; defaults to epsilon^3.
    pub delta: Option<f64>,
    pub cfl: f64,
    pub diff_safety: f64,
    pub t_end: f64,
    /// Checkpoint quantum. Steps never cross a multiple of snapshot_dt and
    /// t_end must itself sit on the checkpoint lattice.
    pub snapshot_dt: f64,
    /// Record every k-th checkpoint into the trace.
    pub snapshot_stride: usize,
    pub boundary: Boundary,
}

impl SolverConfig {
    pub fn new(epsilon: f64, t_end: f64) -> Self {
        SolverConfig {
            epsilon,
            delta: None,
            cfl: 0.5,
            diff_safety: 0.5,
            t_end,
            snapshot_dt: 0.05,
            snapshot_stride: 1,
            boundary: Boundary::FarFieldDirichlet,
        }
    }

    pub fn delta_value(&self) -> f64 {
        self.delta
            .unwrap_or(self.epsilon * self.epsilon * self.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config("cfl must lie in (0, 1]".into()));
        }
        if !(self.diff_safety > 0.0 && self.diff_safety <= 1.0) {
            return Err(Error::Config("diff_safety must lie in (0, 1]".into()));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::Config("t_end must be positive".into()));
        }
        if !(self.snapshot_dt > 0.0) {
            return Err(Error::Config("snapshot_dt must be positive".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Config("snapshot_stride must be at least 1".into()));
        }
        let ratio = self.t_end / self.snapshot_dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Config(
                "t_end must be an integer multiple of snapshot_dt".into(),
            ));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(Error::Config("delta must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Flow fields at one instant.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub grid: Grid,
    pub t: f64,
    pub density: Vec<f64>,
    pub momentum: Vec<f64>,
}

impl FieldState {
    pub fn new(grid: Grid, t: f64, density: Vec<f64>, momentum: Vec<f64>) -> Result<Self> {
        if density.len() != grid.n_cells || momentum.len() != grid.n_cells {
            return Err(Error::invalid("field length does not match grid"));
        }
        Ok(FieldState {
            grid,
            t,
            density,
            momentum,
        })
    }

    pub fn constant(grid: Grid, density: f64, momentum: f64) -> Self {
        FieldState {
            grid,
            t: 0.0,
            density: vec![density; grid.n_cells],
            momentum: vec![momentum; grid.n_cells],
        }
    }

    /// Index of the first non-finite value in either field, if any.
    pub fn first_bad_node(&self) -> Option<usize> {
        self.density
            .iter()
            .zip(&self.momentum)
            .position(|(r, m)| !r.is_finite() || !m.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        self.density
            .iter()
            .chain(&self.momentum)
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn min_density(&self) -> f64 {
        self.density.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Recorded history of one run, with monitor output.
#[derive(Debug, Clone)]
pub struct SolutionTrace {
    pub mode: FlowMode,
    pub grid: Grid,
    pub epsilon: f64,
    pub delta: f64,
    pub snapshots: Vec<FieldState>,
    pub bound_reports: Vec<crate::monitor::BoundReport>,
    pub dt_max: f64,
    pub dt_min: f64,
    pub steps: usize,
    /// Smallest density seen at any checkpoint.
    pub floor_min: f64,
}

impl SolutionTrace {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &FieldState {
        self.snapshots.last().expect("trace holds at least t = 0")
    }

    /// Sign tolerance used by the invariant-region verdicts: 10 (dx + dt).
    pub fn sign_tolerance(&self) -> f64 {
        10.0 * (self.grid.dx() + self.dt_max)
    }
}
