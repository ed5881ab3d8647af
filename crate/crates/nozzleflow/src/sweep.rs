//! Viscosity ladders: the same scenario run at descending epsilon, with
//! pairwise distances between consecutive solutions measured on a fixed
//! interior window. Solutions of a well-behaved family should form a Cauchy
//! sequence there, so the distance ladder contracts; the report also carries
//! per-run bound summaries and dissipation integrals, whose uniformity in
//! epsilon is checked by the acceptance gate.
//!
//! Initial data are shared exactly: every run samples the same preset on its
//! own grid, with no per-epsilon smoothing or density lift. Presets with a
//! positive background need neither, and sharing keeps the sup-norm summaries
//! comparable across the ladder.

use crate::entropy::{dissipation_integral, Window, XiEntropySpec};
use crate::error::{Error, Result};
use crate::gas::{Conserved, FlowMode, GasModel};
use crate::geometry::NozzleGeometry;
use crate::monitor::build_controls;
use crate::solver::{build_initial, run, FieldState, Grid, InitialPreset, SolutionTrace, SolverConfig};
use rayon::prelude::*;
use serde::Serialize;

/// Build a rayon pool honoring the NOZZLE_THREADS cap. Unset, empty, or
/// unparsable values fall back to one thread per core.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let cap = std::env::var("NOZZLE_THREADS")
        .ok()
        .and_then(|raw| raw.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    worker_pool_with(cap)
}

pub fn worker_pool_with(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))
}

/// What every ladder member runs: one gas, one nozzle, one initial preset,
/// one horizon. The window used for distances, sups, and dissipation shrinks
/// the domain by `margin` on each side in space and time.
pub struct SweepScenario {
    pub gas: GasModel,
    pub geom: NozzleGeometry,
    pub initial: InitialPreset,
    pub t_end: f64,
    pub snapshot_dt: f64,
    pub margin: f64,
    /// Exponential entropy index for isothermal dissipation integrals.
    pub xi_index: f64,
}

impl SweepScenario {
    pub fn new(gas: GasModel, geom: NozzleGeometry, initial: InitialPreset, t_end: f64) -> Self {
        SweepScenario {
            gas,
            geom,
            initial,
            t_end,
            snapshot_dt: t_end / 100.0,
            margin: 0.1,
            xi_index: 0.5,
        }
    }

    pub fn window(&self) -> Window {
        Window::with_margins(self.geom.x_min, self.geom.x_max, self.t_end, self.margin)
    }
}

pub struct SweepConfig {
    /// Strictly descending viscosities.
    pub epsilons: Vec<f64>,
    /// Grid policy dx = epsilon / points_per_epsilon, so the viscous layer
    /// stays resolved at every level.
    pub points_per_epsilon: f64,
    pub min_cells: usize,
    pub max_cells: usize,
    pub ratio_bound: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            epsilons: vec![0.1, 0.05, 0.025, 0.0125, 0.00625],
            points_per_epsilon: 8.0,
            min_cells: 129,
            max_cells: 10241,
            ratio_bound: 0.95,
        }
    }
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        if self.epsilons.len() < 2 {
            return Err(Error::invalid("sweep needs at least two viscosities"));
        }
        for pair in self.epsilons.windows(2) {
            if !(pair[1] > 0.0 && pair[1] < pair[0]) {
                return Err(Error::invalid(
                    "sweep viscosities must be positive and strictly descending",
                ));
            }
        }
        if !(self.points_per_epsilon > 0.0) {
            return Err(Error::invalid("points_per_epsilon must be positive"));
        }
        if self.min_cells < 3 || self.max_cells < self.min_cells {
            return Err(Error::invalid("sweep cell bounds are inconsistent"));
        }
        Ok(())
    }

    pub fn cells_for(&self, span: f64, epsilon: f64) -> usize {
        let wanted = (span * self.points_per_epsilon / epsilon).round() as usize + 1;
        wanted.clamp(self.min_cells, self.max_cells)
    }
}

/// Per-run summary kept in the report.
#[derive(Debug, Clone, Serialize)]
pub struct SweepBounds {
    pub epsilon: f64,
    pub delta: f64,
    pub n_cells: usize,
    /// sup of w over the window.
    pub sup_w: f64,
    /// sup of -z over the window, so both bounds grow the same way.
    pub neg_inf_z: f64,
    pub min_density: f64,
    pub monitors_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub epsilons: Vec<f64>,
    pub distances_l1: Vec<f64>,
    pub distances_l2: Vec<f64>,
    pub ratios: Vec<f64>,
    pub bounds: Vec<SweepBounds>,
    pub dissipation: Vec<f64>,
    pub verdict: String,
}

impl SweepReport {
    pub fn converging(&self) -> bool {
        self.verdict == "converging"
    }

    pub fn distances_decreasing(&self) -> bool {
        self.distances_l1.windows(2).all(|w| w[1] <= w[0] + 1e-30)
    }

    /// Largest relative spread of the windowed sup bounds across the ladder.
    pub fn bound_variation(&self) -> f64 {
        let spread = |take: fn(&SweepBounds) -> f64| -> f64 {
            let vals: Vec<f64> = self.bounds.iter().map(take).collect();
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            (hi - lo) / hi.abs().max(lo.abs()).max(1e-30)
        };
        spread(|b| b.sup_w).max(spread(|b| b.neg_inf_z))
    }

    /// True when no dissipation integral exceeds `growth` times the value at
    /// the largest viscosity.
    pub fn dissipation_uniform(&self, growth: f64) -> bool {
        match self.dissipation.first() {
            Some(&head) => self.dissipation.iter().all(|&d| d <= growth * head.max(1e-300)),
            None => false,
        }
    }
}

/// Space-time Lp distance of the conserved fields of two runs over a window,
/// p in {1, 2}. The quadrature lives on the finer run's sample points; the
/// coarser run is interpolated linearly in space and time.
pub fn lp_local_distance(
    a: &SolutionTrace,
    b: &SolutionTrace,
    window: &Window,
    p: u32,
) -> Result<f64> {
    if !(p == 1 || p == 2) {
        return Err(Error::invalid("distance order must be 1 or 2"));
    }
    if window.x_min >= window.x_max || window.t_min >= window.t_max {
        return Err(Error::invalid("window must have positive extent"));
    }
    for trace in [a, b] {
        if window.x_min < trace.grid.x_min - 1e-9
            || window.x_max > trace.grid.x_max + 1e-9
            || window.t_max > trace.last().t + 1e-9
        {
            return Err(Error::invalid(
                "distance window is not covered by both runs",
            ));
        }
    }
    let (fine, coarse) = if a.grid.n_cells >= b.grid.n_cells {
        (a, b)
    } else {
        (b, a)
    };
    let coarse = TraceSampler::new(coarse);

    let grid = fine.grid;
    let dx = grid.dx();
    let i_lo = ((window.x_min - grid.x_min) / dx - 1e-9).ceil().max(0.0) as usize;
    let i_hi = (((window.x_max - grid.x_min) / dx + 1e-9).floor() as usize).min(grid.n_cells - 1);
    if i_hi < i_lo + 1 {
        return Err(Error::invalid("window is narrower than two grid cells"));
    }
    let snaps: Vec<&FieldState> = fine
        .snapshots
        .iter()
        .filter(|s| s.t >= window.t_min - 1e-9 && s.t <= window.t_max + 1e-9)
        .collect();
    if snaps.len() < 2 {
        return Err(Error::invalid("window covers fewer than two snapshots"));
    }

    let mut total = 0.0f64;
    for (k, snap) in snaps.iter().enumerate() {
        // Trapezoid weight in time.
        let wt = if k == 0 {
            0.5 * (snaps[1].t - snaps[0].t)
        } else if k == snaps.len() - 1 {
            0.5 * (snaps[k].t - snaps[k - 1].t)
        } else {
            0.5 * (snaps[k + 1].t - snaps[k - 1].t)
        };
        let mut slice = 0.0f64;
        for i in i_lo..=i_hi {
            let wx = if i == i_lo || i == i_hi { 0.5 * dx } else { dx };
            let x = grid.node(i);
            let dr = snap.density[i] - coarse.density(x, snap.t);
            let dm = snap.momentum[i] - coarse.momentum(x, snap.t);
            let val = match p {
                1 => dr.abs() + dm.abs(),
                _ => dr * dr + dm * dm,
            };
            slice += wx * val;
        }
        total += wt * slice;
    }
    Ok(match p {
        1 => total,
        _ => total.sqrt(),
    })
}

/// Linear-in-space, linear-in-time sampler over a recorded run, clamped to
/// the recorded extent on both axes.
struct TraceSampler<'a> {
    trace: &'a SolutionTrace,
    times: Vec<f64>,
}

impl<'a> TraceSampler<'a> {
    fn new(trace: &'a SolutionTrace) -> Self {
        TraceSampler {
            trace,
            times: trace.times(),
        }
    }

    fn density(&self, x: f64, t: f64) -> f64 {
        self.eval(x, t, |s| &s.density)
    }

    fn momentum(&self, x: f64, t: f64) -> f64 {
        self.eval(x, t, |s| &s.momentum)
    }

    fn eval(&self, x: f64, t: f64, get: impl Fn(&FieldState) -> &[f64]) -> f64 {
        let grid = self.trace.grid;
        let s = ((x - grid.x_min) / grid.dx()).clamp(0.0, (grid.n_cells - 1) as f64);
        let i = (s as usize).min(grid.n_cells - 2);
        let wx = s - i as f64;
        let row = |k: usize| -> f64 {
            let vals = get(&self.trace.snapshots[k]);
            (1.0 - wx) * vals[i] + wx * vals[i + 1]
        };
        let m = self.times.len();
        if m == 1 || t <= self.times[0] {
            return row(0);
        }
        if t >= self.times[m - 1] {
            return row(m - 1);
        }
        let k = self.times.partition_point(|&s| s <= t).min(m - 1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        (1.0 - w) * row(k - 1) + w * row(k)
    }
}

fn window_sups(
    trace: &SolutionTrace,
    gas: &GasModel,
    window: &Window,
) -> Result<(f64, f64, f64)> {
    let grid = trace.grid;
    let dx = grid.dx();
    let i_lo = ((window.x_min - grid.x_min) / dx - 1e-9).ceil().max(0.0) as usize;
    let i_hi = (((window.x_max - grid.x_min) / dx + 1e-9).floor() as usize).min(grid.n_cells - 1);
    let mut sup_w = f64::NEG_INFINITY;
    let mut inf_z = f64::INFINITY;
    let mut min_density = f64::INFINITY;
    for snap in &trace.snapshots {
        if snap.t < window.t_min - 1e-9 || snap.t > window.t_max + 1e-9 {
            continue;
        }
        for i in i_lo..=i_hi {
            let inv = gas.to_riemann(Conserved {
                density: snap.density[i],
                momentum: snap.momentum[i],
            })?;
            sup_w = sup_w.max(inv.w);
            inf_z = inf_z.min(inv.z);
            min_density = min_density.min(snap.density[i]);
        }
    }
    Ok((sup_w, -inf_z, min_density))
}

struct MemberOutput {
    trace: SolutionTrace,
    bounds: SweepBounds,
    dissipation: f64,
}

fn run_member(scenario: &SweepScenario, cfg: &SweepConfig, epsilon: f64) -> Result<MemberOutput> {
    let geom = &scenario.geom;
    let span = geom.x_max - geom.x_min;
    let n_cells = cfg.cells_for(span, epsilon);
    let grid = Grid::new(geom.x_min, geom.x_max, n_cells)?;
    let initial = build_initial(&scenario.initial, grid)?;
    let mut solver_cfg = SolverConfig::new(epsilon, scenario.t_end);
    solver_cfg.snapshot_dt = scenario.snapshot_dt;
    let controls = build_controls(&scenario.gas, geom, &initial, epsilon, 1e-3)?;
    let trace = run(&initial, &scenario.gas, geom, &controls, &solver_cfg)?;

    let monitors_ok = trace
        .bound_reports
        .iter()
        .all(|r| r.region_ok && r.ceiling_ok);
    if !monitors_ok {
        return Err(Error::Verification(format!(
            "sweep member epsilon = {epsilon} lost its invariant bounds"
        )));
    }
    let window = scenario.window();
    let (sup_w, neg_inf_z, min_density) = window_sups(&trace, &scenario.gas, &window)?;
    let xi;
    let xi_ref = match scenario.gas.mode {
        FlowMode::Isentropic => None,
        FlowMode::Isothermal => {
            xi = XiEntropySpec::new(scenario.xi_index)?;
            Some(&xi)
        }
    };
    let dissipation = dissipation_integral(&trace, &scenario.gas, &window, xi_ref)?;
    let bounds = SweepBounds {
        epsilon,
        delta: trace.delta,
        n_cells,
        sup_w,
        neg_inf_z,
        min_density,
        monitors_ok,
    };
    Ok(MemberOutput {
        trace,
        bounds,
        dissipation,
    })
}

/// Run the whole ladder (members in parallel, capped by NOZZLE_THREADS) and
/// assemble distances, contraction ratios, bound summaries, and dissipation
/// integrals. The verdict is "converging" when every ratio of consecutive
/// L1 distances is at most `cfg.ratio_bound`.
pub fn epsilon_sweep(scenario: &SweepScenario, cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    if !(scenario.t_end > 0.0) {
        return Err(Error::invalid("sweep horizon must be positive"));
    }
    if !(scenario.margin > 0.0 && scenario.margin < 0.5) {
        return Err(Error::invalid("window margin must sit in (0, 0.5)"));
    }
    let pool = worker_pool()?;
    let members: Result<Vec<MemberOutput>> = pool.install(|| {
        cfg.epsilons
            .par_iter()
            .map(|&eps| run_member(scenario, cfg, eps))
            .collect()
    });
    let members = members?;

    let window = scenario.window();
    let mut distances_l1 = Vec::new();
    let mut distances_l2 = Vec::new();
    for pair in members.windows(2) {
        distances_l1.push(lp_local_distance(&pair[0].trace, &pair[1].trace, &window, 1)?);
        distances_l2.push(lp_local_distance(&pair[0].trace, &pair[1].trace, &window, 2)?);
    }
    let ratios: Vec<f64> = distances_l1
        .windows(2)
        .map(|d| {
            if d[0] <= 1e-30 {
                if d[1] <= 1e-30 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                d[1] / d[0]
            }
        })
        .collect();
    let converging = ratios.iter().all(|&r| r <= cfg.ratio_bound);
    Ok(SweepReport {
        epsilons: cfg.epsilons.clone(),
        distances_l1,
        distances_l2,
        ratios,
        bounds: members.iter().map(|m| m.bounds.clone()).collect(),
        dissipation: members.iter().map(|m| m.dissipation).collect(),
        verdict: if converging { "converging" } else { "not-converging" }.into(),
    })
}

/// Like `epsilon_sweep`, but hands back the traces as well, so callers that
/// need further diagnostics (entropy audits on sweep members, for one) avoid
/// rerunning the ladder.
pub fn epsilon_sweep_with_traces(
    scenario: &SweepScenario,
    cfg: &SweepConfig,
) -> Result<(SweepReport, Vec<SolutionTrace>)> {
    cfg.validate()?;
    let report = epsilon_sweep(scenario, cfg)?;
    let pool = worker_pool()?;
    let traces: Result<Vec<SolutionTrace>> = pool.install(|| {
        cfg.epsilons
            .par_iter()
            .map(|&eps| run_member(scenario, cfg, eps).map(|m| m.trace))
            .collect()
    });
    Ok((report, traces?))
}
