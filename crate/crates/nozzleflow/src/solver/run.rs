//! The checkpointed time loop with in-flight monitors.

use super::mollify::{mollify_initial, MollifierSpec};
use super::rhs::{advance_in_place, stable_dt, Forcing, RhsContext, StepScratch};
use super::{FieldState, SolutionTrace, SolverConfig};
use crate::error::{Error, Result};
use crate::gas::{FlowMode, GasModel};
use crate::geometry::{check_admissible, NozzleGeometry};
use crate::monitor::{check_bounds, ControlFunctionSet};

/// Receives every recorded snapshot as the run progresses, so large runs can
/// stream to disk instead of holding everything in memory twice.
pub trait SnapshotSink {
    fn record(
        &mut self,
        state: &FieldState,
        gas: &GasModel,
        controls: &ControlFunctionSet,
    ) -> Result<()>;
}

pub struct RunOptions<'a> {
    /// Integrate even if the geometry fails the admissibility comparison or
    /// the control constraints; monitors still report.
    pub admissibility_override: bool,
    pub forcing: Option<&'a Forcing>,
    pub sink: Option<&'a mut dyn SnapshotSink>,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        RunOptions {
            admissibility_override: false,
            forcing: None,
            sink: None,
        }
    }
}

/// Lift the density and smooth raw initial data the way a viscosity-epsilon
/// run expects: lift = epsilon (isentropic) or the floor delta (isothermal),
/// kernel width = epsilon clamped below at two cells.
pub fn prepare_initial(
    raw: &FieldState,
    gas: &GasModel,
    cfg: &SolverConfig,
    lift_override: Option<f64>,
    spec_override: Option<MollifierSpec>,
) -> Result<FieldState> {
    let lift = lift_override.unwrap_or(match gas.mode {
        FlowMode::Isentropic => cfg.epsilon,
        FlowMode::Isothermal => cfg.delta_value(),
    });
    let spec = spec_override.unwrap_or(MollifierSpec::for_epsilon(cfg.epsilon, raw.grid.dx()));
    mollify_initial(raw, spec, lift)
}

/// Integrate prepared initial data to `cfg.t_end`, recording snapshots on the
/// checkpoint lattice and running the invariant-region monitors.
pub fn run(
    initial: &FieldState,
    gas: &GasModel,
    geom: &NozzleGeometry,
    controls: &ControlFunctionSet,
    cfg: &SolverConfig,
) -> Result<SolutionTrace> {
    run_with(initial, gas, geom, controls, cfg, RunOptions::default())
}

pub fn run_with(
    initial: &FieldState,
    gas: &GasModel,
    geom: &NozzleGeometry,
    controls: &ControlFunctionSet,
    cfg: &SolverConfig,
    mut opts: RunOptions,
) -> Result<SolutionTrace> {
    cfg.validate()?;
    let delta = match gas.mode {
        FlowMode::Isentropic => 0.0,
        FlowMode::Isothermal => cfg.delta_value(),
    };
    if !opts.admissibility_override {
        let adm = check_admissible(geom, gas);
        if !adm.admissible {
            return Err(Error::Admissibility(format!(
                "||a0||_1 = {:.6} exceeds the threshold {:.6} for gamma = {}",
                adm.a0_l1, adm.threshold, gas.gamma
            )));
        }
        if !controls.constraints.satisfied {
            return Err(Error::Admissibility(format!(
                "control constraints failed: {}",
                controls.constraints.first_failure()
            )));
        }
        let smallness = cfg.epsilon * controls.b_prime_sup * cfg.t_end;
        if smallness > 1.0 + 1e-9 {
            return Err(Error::Admissibility(format!(
                "epsilon ||b'|| t_end = {smallness:.3} exceeds 1; shorten the run or reduce epsilon"
            )));
        }
    }

    let mut state = initial.clone();
    state.t = 0.0;
    let mut scratch = StepScratch::new(state.grid.n_cells);
    let ctx = {
        let base = RhsContext::new(
            *gas,
            geom,
            &|x| controls.b(x),
            state.grid,
            cfg.epsilon,
            delta,
            cfg.boundary,
        );
        match opts.forcing {
            Some(f) => base.with_forcing(f),
            None => base,
        }
    };

    let n_checkpoints = (cfg.t_end / cfg.snapshot_dt).round() as usize;
    let dx = state.grid.dx();
    let mut trace = SolutionTrace {
        mode: gas.mode,
        grid: state.grid,
        epsilon: cfg.epsilon,
        delta,
        snapshots: Vec::with_capacity(n_checkpoints / cfg.snapshot_stride + 2),
        bound_reports: Vec::new(),
        dt_max: 0.0,
        dt_min: f64::INFINITY,
        steps: 0,
        floor_min: state.min_density(),
    };

    let record = |trace: &mut SolutionTrace,
                      state: &FieldState,
                      sink: &mut Option<&mut dyn SnapshotSink>|
     -> Result<()> {
        let tol = 10.0 * (dx + if trace.dt_max > 0.0 { trace.dt_max } else { 0.0 });
        trace
            .bound_reports
            .push(check_bounds(state, controls, gas, tol));
        trace.snapshots.push(state.clone());
        if let Some(s) = sink {
            s.record(state, gas, controls)?;
        }
        Ok(())
    };

    record(&mut trace, &state, &mut opts.sink)?;
    let mut prev_sup = state.sup_norm();
    const MAX_STEPS: usize = 50_000_000;

    for k in 1..=n_checkpoints {
        let target = k as f64 * cfg.snapshot_dt;
        while state.t < target {
            let dts = stable_dt(&state, gas, cfg)?;
            let remaining = target - state.t;
            let dt = if remaining <= dts * (1.0 + 1e-9) {
                remaining
            } else {
                dts
            };
            advance_in_place(&mut state, dt, &ctx, &mut scratch)?;
            if dt == remaining {
                state.t = target;
            }
            trace.steps += 1;
            trace.dt_max = trace.dt_max.max(dt);
            trace.dt_min = trace.dt_min.min(dt);
            if trace.steps > MAX_STEPS {
                return Err(Error::numeric(state.t, "step limit exceeded"));
            }
        }

        if let Some(i) = state.first_bad_node() {
            return Err(Error::numeric(
                state.t,
                format!("non-finite value at node {i}"),
            ));
        }
        let sup = state.sup_norm();
        if sup > 2.0 * prev_sup.max(1.0) {
            return Err(Error::numeric(
                state.t,
                format!("blow-up suspected: sup norm jumped {prev_sup:.3e} -> {sup:.3e} within one checkpoint"),
            ));
        }
        prev_sup = sup;
        let min_density = state.min_density();
        trace.floor_min = trace.floor_min.min(min_density);
        match gas.mode {
            FlowMode::Isentropic => {
                if !(min_density > 0.0) {
                    return Err(Error::numeric(
                        state.t,
                        format!("density floor violated (min rho = {min_density:.3e})"),
                    ));
                }
            }
            FlowMode::Isothermal => {
                if min_density < delta * (1.0 - 1e-9) {
                    return Err(Error::numeric(
                        state.t,
                        format!(
                            "density floor violated (min n = {min_density:.6e} < delta = {delta:.6e})"
                        ),
                    ));
                }
            }
        }

        if k % cfg.snapshot_stride == 0 || k == n_checkpoints {
            record(&mut trace, &state, &mut opts.sink)?;
        }
    }

    if trace.dt_min > trace.dt_max {
        trace.dt_min = 0.0;
    }
    Ok(trace)
}
