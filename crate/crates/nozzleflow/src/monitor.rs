//! Invariant-region controls and run-time bound monitors.
//!
//! A run is certified through a pair of control functions phi, psi built from
//! the geometry envelope: the shifted invariants wbar = w - phi and
//! zbar = z + psi must keep their signs for all time, which pins w and z
//! inside a region whose size never grows with t_end. The controls are
//!
//!   isentropic: phi = C0 + eps ||b'|| t + int_{left}^x b,   b = M0 a0,
//!   isothermal: phi = M + 2 eps ||b'|| t + 2 int_{left}^x b, b = a0,
//!
//! with psi the mirror image integrating from x to the right edge. Both sum
//! to an x-independent function by construction.

use crate::error::{Error, Result};
use crate::gas::{FlowMode, GasModel};
use crate::geometry::{admissibility_threshold, NozzleGeometry};
use crate::solver::FieldState;
use serde::Serialize;

/// One named inequality of the control constraint set.
#[derive(Debug, Clone, Serialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintReport {
    pub checks: Vec<ConstraintCheck>,
    pub satisfied: bool,
}

impl ConstraintReport {
    fn from_checks(checks: Vec<ConstraintCheck>) -> Self {
        let satisfied = checks.iter().all(|c| c.satisfied);
        ConstraintReport { checks, satisfied }
    }

    pub fn first_failure(&self) -> String {
        self.checks
            .iter()
            .find(|c| !c.satisfied)
            .map(|c| format!("{}: {:.6} > {:.6}", c.name, c.lhs, c.rhs))
            .unwrap_or_else(|| "all constraints satisfied".into())
    }
}

fn check(name: &str, lhs: f64, rhs: f64) -> ConstraintCheck {
    ConstraintCheck {
        name: name.to_string(),
        lhs,
        rhs,
        satisfied: lhs <= rhs * (1.0 + 1e-9) + 1e-12,
    }
}

/// Control functions for one run, together with the constants and the
/// verified constraint set they came from.
#[derive(Debug, Clone)]
pub struct ControlFunctionSet {
    pub mode: FlowMode,
    pub epsilon: f64,
    /// C0 (isentropic) or M (isothermal): covers the initial invariants.
    pub c0: f64,
    /// Envelope multiplier: b = m0 * a0. Unity in isothermal mode.
    pub m0: f64,
    pub b_l1: f64,
    pub b_prime_sup: f64,
    pub constraints: ConstraintReport,
    geom: NozzleGeometry,
    int_factor: f64,
    time_factor: f64,
    b_total: f64,
}

impl ControlFunctionSet {
    pub fn b(&self, x: f64) -> f64 {
        self.m0 * self.geom.a0(x)
    }

    fn time_term(&self, t: f64) -> f64 {
        self.time_factor * self.epsilon * self.b_prime_sup * t
    }

    pub fn phi(&self, x: f64, t: f64) -> f64 {
        self.c0 + self.time_term(t) + self.int_factor * self.m0 * self.geom.a0_integral_from_left(x)
    }

    pub fn psi(&self, x: f64, t: f64) -> f64 {
        self.c0
            + self.time_term(t)
            + self.int_factor * (self.b_total - self.m0 * self.geom.a0_integral_from_left(x))
    }

    /// Time-uniform bound on w and -z, valid while eps ||b'|| t <= 1:
    /// C0 + ||b||_1 + 1 (isentropic), M + 2 ||b||_1 + 2 (isothermal).
    pub fn ceiling(&self) -> f64 {
        self.c0 + self.int_factor * self.b_l1 + self.time_factor
    }

    /// Exact x-derivative of phi: the piecewise-linear envelope part times
    /// the mode's integral factor (phi integrates only that part, so this
    /// is its derivative to machine precision, not an approximation of b).
    pub fn phi_x(&self, x: f64) -> f64 {
        self.int_factor * self.m0 * self.geom.a0_pl(x)
    }

    pub fn psi_x(&self, x: f64) -> f64 {
        -self.phi_x(x)
    }

    /// Exact second x-derivative of phi away from envelope sample kinks.
    pub fn phi_xx(&self, x: f64) -> f64 {
        self.int_factor * self.m0 * self.geom.a0_pl_slope(x)
    }

    pub fn psi_xx(&self, x: f64) -> f64 {
        -self.phi_xx(x)
    }

    /// Time slope of both controls (they grow at the same constant rate).
    pub fn phi_t(&self) -> f64 {
        self.time_factor * self.epsilon * self.b_prime_sup
    }

    /// Damping coefficient a(x) of the geometry the controls were built on.
    pub fn damping(&self, x: f64) -> f64 {
        self.geom.a(x)
    }
}

/// Largest initial invariant magnitude max(sup w, -inf z).
fn data_bound(gas: &GasModel, initial: &FieldState) -> Result<f64> {
    let mut sup_w = f64::NEG_INFINITY;
    let mut inf_z = f64::INFINITY;
    for (r, m) in initial.density.iter().zip(&initial.momentum) {
        let inv = gas.to_riemann(crate::gas::Conserved {
            density: *r,
            momentum: *m,
        })?;
        sup_w = sup_w.max(inv.w);
        inf_z = inf_z.min(inv.z);
    }
    Ok(sup_w.max(-inf_z))
}

/// Build isentropic controls from the state a run will start from.
///
/// C0 covers the initial invariants with `c0_margin` to spare, and is floored
/// at (1 + theta) / (2 theta): with the linear choice
/// M0 = C0 (3 theta^2 + theta)/(1 - theta), that floor is exactly what makes
/// the constraint window reach the admissibility threshold (1-theta)/(1+theta).
pub fn build_controls_isentropic(
    gas: &GasModel,
    geom: &NozzleGeometry,
    initial: &FieldState,
    epsilon: f64,
    c0_margin: f64,
) -> Result<ControlFunctionSet> {
    if gas.mode != FlowMode::Isentropic {
        return Err(Error::invalid("isentropic controls need an isentropic gas model"));
    }
    let theta = gas.theta;
    let c0 = data_bound(gas, initial)?
        .max((1.0 + theta) / (2.0 * theta))
        + c0_margin;
    let m0 = c0 * (3.0 * theta * theta + theta) / (1.0 - theta);
    let a0_l1 = geom.a0_l1();
    let checks = vec![
        check("||a0||_1 <= 1", a0_l1, 1.0),
        check(
            "||a0||_1 <= 2 theta C0 / (theta C0 + M0)",
            a0_l1,
            2.0 * theta * c0 / (theta * c0 + m0),
        ),
        check(
            "||a0||_1 <= (1-theta)/theta - (C0+1)/M0",
            a0_l1,
            (1.0 - theta) / theta - (c0 + 1.0) / m0,
        ),
    ];
    Ok(ControlFunctionSet {
        mode: FlowMode::Isentropic,
        epsilon,
        c0,
        m0,
        b_l1: m0 * a0_l1,
        b_prime_sup: m0 * geom.a0_prime_sup(),
        constraints: ConstraintReport::from_checks(checks),
        geom: geom.clone(),
        int_factor: 1.0,
        time_factor: 1.0,
        b_total: m0 * geom.a0_integral_total(),
    })
}

/// Build isothermal controls: b = a0 and the admissibility demand is
/// ||a0||_1 <= 1/2.
pub fn build_controls_isothermal(
    geom: &NozzleGeometry,
    initial: &FieldState,
    epsilon: f64,
    margin: f64,
) -> Result<ControlFunctionSet> {
    let gas = GasModel::isothermal();
    let m = data_bound(&gas, initial)? + margin;
    let a0_l1 = geom.a0_l1();
    let checks = vec![check("||a0||_1 <= 1/2", a0_l1, 0.5)];
    Ok(ControlFunctionSet {
        mode: FlowMode::Isothermal,
        epsilon,
        c0: m,
        m0: 1.0,
        b_l1: a0_l1,
        b_prime_sup: geom.a0_prime_sup(),
        constraints: ConstraintReport::from_checks(checks),
        geom: geom.clone(),
        int_factor: 2.0,
        time_factor: 2.0,
        b_total: geom.a0_integral_total(),
    })
}

pub fn build_controls(
    gas: &GasModel,
    geom: &NozzleGeometry,
    initial: &FieldState,
    epsilon: f64,
    margin: f64,
) -> Result<ControlFunctionSet> {
    match gas.mode {
        FlowMode::Isentropic => build_controls_isentropic(gas, geom, initial, epsilon, margin),
        FlowMode::Isothermal => build_controls_isothermal(geom, initial, epsilon, margin),
    }
}

/// Shifted invariants (wbar, zbar) = (w - phi, z + psi) samplewise.
pub fn modified_invariants(
    s: &FieldState,
    controls: &ControlFunctionSet,
    gas: &GasModel,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = s.grid.n_cells;
    let mut wbar = vec![0.0; n];
    let mut zbar = vec![0.0; n];
    for i in 0..n {
        let x = s.grid.node(i);
        let inv = gas.to_riemann(crate::gas::Conserved {
            density: s.density[i],
            momentum: s.momentum[i],
        })?;
        wbar[i] = inv.w - controls.phi(x, s.t);
        zbar[i] = inv.z + controls.psi(x, s.t);
    }
    Ok((wbar, zbar))
}

/// Snapshot verdict of the invariant-region monitors.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub t: f64,
    pub tol: f64,
    pub max_wbar: f64,
    pub min_zbar: f64,
    pub max_w: f64,
    pub min_z: f64,
    pub min_density: f64,
    pub ceiling: f64,
    /// wbar <= tol and zbar >= -tol everywhere.
    pub region_ok: bool,
    /// max(w, -z) <= ceiling + tol.
    pub ceiling_ok: bool,
}

pub fn check_bounds(
    s: &FieldState,
    controls: &ControlFunctionSet,
    gas: &GasModel,
    tol: f64,
) -> BoundReport {
    let mut max_wbar = f64::NEG_INFINITY;
    let mut min_zbar = f64::INFINITY;
    let mut max_w = f64::NEG_INFINITY;
    let mut min_z = f64::INFINITY;
    let mut min_density = f64::INFINITY;
    for i in 0..s.grid.n_cells {
        let x = s.grid.node(i);
        min_density = min_density.min(s.density[i]);
        let inv = match gas.to_riemann(crate::gas::Conserved {
            density: s.density[i],
            momentum: s.momentum[i],
        }) {
            Ok(v) => v,
            Err(_) => {
                // Density at or below zero: report the worst possible verdict.
                return BoundReport {
                    t: s.t,
                    tol,
                    max_wbar: f64::INFINITY,
                    min_zbar: f64::NEG_INFINITY,
                    max_w: f64::INFINITY,
                    min_z: f64::NEG_INFINITY,
                    min_density,
                    ceiling: controls.ceiling(),
                    region_ok: false,
                    ceiling_ok: false,
                };
            }
        };
        max_wbar = max_wbar.max(inv.w - controls.phi(x, s.t));
        min_zbar = min_zbar.min(inv.z + controls.psi(x, s.t));
        max_w = max_w.max(inv.w);
        min_z = min_z.min(inv.z);
    }
    let ceiling = controls.ceiling();
    BoundReport {
        t: s.t,
        tol,
        max_wbar,
        min_zbar,
        max_w,
        min_z,
        min_density,
        ceiling,
        region_ok: max_wbar <= tol && min_zbar >= -tol,
        ceiling_ok: max_w <= ceiling + tol && min_z >= -(ceiling + tol),
    }
}

/// Smallest density and whether it clears the theoretical floor:
/// strictly positive (isentropic) or delta up to rounding (isothermal).
pub fn density_floor_check(s: &FieldState, mode: FlowMode, delta: f64) -> (f64, bool) {
    let min = s.min_density();
    let ok = match mode {
        FlowMode::Isentropic => min > 0.0,
        FlowMode::Isothermal => min >= delta * (1.0 - 1e-10),
    };
    (min, ok)
}

/// True when the geometry is admissible for the gas: threshold comparison on
/// the envelope L1 norm.
pub fn is_admissible(gas: &GasModel, geom: &NozzleGeometry) -> bool {
    geom.a0_l1() <= admissibility_threshold(gas) * (1.0 + 1e-9) + 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{fit_to_a0_l1, GeometrySpec, DEFAULT_GEOMETRY_SAMPLES};
    use crate::solver::{build_initial, Grid, InitialPreset};
    use approx::assert_relative_eq;

    fn laval(target: f64) -> NozzleGeometry {
        fit_to_a0_l1(
            GeometrySpec::LavalBump {
                area_inf: 2.0,
                depth: 0.5,
                width: 1.0,
                center: 0.0,
            },
            -16.0,
            16.0,
            DEFAULT_GEOMETRY_SAMPLES,
            1.0,
            target,
        )
        .unwrap()
    }

    fn bump_state(grid: Grid, gas: &GasModel, peak_w: f64) -> FieldState {
        // Peak density such that sup w = peak_w with zero velocity.
        let peak = if gas.theta > 0.0 {
            (peak_w.ln() / gas.theta).exp()
        } else {
            peak_w.exp()
        };
        build_initial(
            &InitialPreset::Bump {
                background: 1.0,
                amplitude: peak - 1.0,
                width: 1.0,
                center: 0.0,
                velocity: 0.0,
            },
            grid,
        )
        .unwrap()
    }

    #[test]
    fn linear_choice_reduces_to_c0_at_five_thirds() {
        let gas = GasModel::isentropic(5.0 / 3.0).unwrap();
        let geom = laval(0.4);
        let grid = Grid::new(-16.0, 16.0, 257).unwrap();
        let s = bump_state(grid, &gas, 2.0);
        let c = build_controls_isentropic(&gas, &geom, &s, 0.05, 1e-6).unwrap();
        assert_relative_eq!(c.m0, c.c0, max_relative = 1e-12);
        assert!(c.constraints.satisfied);
    }

    #[test]
    fn threshold_identity_for_linear_choice() {
        for gamma in [1.2, 1.5, 5.0 / 3.0, 2.0, 2.5] {
            let gas = GasModel::isentropic(gamma).unwrap();
            let theta = gas.theta;
            let c0 = 3.7;
            let m0 = c0 * (3.0 * theta * theta + theta) / (1.0 - theta);
            let lhs = 2.0 * theta * c0 / (theta * c0 + m0);
            let rhs = (1.0 - theta) / (1.0 + theta);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn flat_geometry_gives_constant_controls() {
        let gas = GasModel::isentropic(2.0).unwrap();
        let geom = NozzleGeometry::build(GeometrySpec::Constant { area: 1.0 }, -8.0, 8.0).unwrap();
        let grid = Grid::new(-8.0, 8.0, 129).unwrap();
        let s = FieldState::constant(grid, 1.0, 0.0);
        let c = build_controls_isentropic(&gas, &geom, &s, 0.05, 1e-6).unwrap();
        for x in [-7.0, -1.3, 0.0, 4.2] {
            assert_eq!(c.b(x), 0.0);
            assert_relative_eq!(c.phi(x, 0.0), c.c0);
            assert_relative_eq!(c.psi(x, 0.0), c.c0);
        }
    }

    #[test]
    fn control_sum_is_independent_of_x() {
        let gas = GasModel::isentropic(1.5).unwrap();
        let geom = laval(0.45);
        let grid = Grid::new(-16.0, 16.0, 257).unwrap();
        let s = bump_state(grid, &gas, 2.0);
        let c = build_controls_isentropic(&gas, &geom, &s, 0.05, 1e-6).unwrap();
        let reference = c.phi(-16.0, 0.7) + c.psi(-16.0, 0.7);
        for i in 0..grid.n_cells {
            let x = grid.node(i);
            let sum = c.phi(x, 0.7) + c.psi(x, 0.7);
            assert!((sum - reference).abs() < 1e-12 * reference.abs());
        }
    }

    #[test]
    fn control_slope_matches_envelope() {
        let gas = GasModel::isentropic(1.5).unwrap();
        let geom = laval(0.45);
        let grid = Grid::new(-16.0, 16.0, 257).unwrap();
        let s = bump_state(grid, &gas, 2.0);
        let c = build_controls_isentropic(&gas, &geom, &s, 0.05, 1e-6).unwrap();
        let h = 1e-5;
        for x in [-3.0, -0.8, 0.0, 1.1, 2.6] {
            let slope_phi = (c.phi(x + h, 0.0) - c.phi(x - h, 0.0)) / (2.0 * h);
            let slope_psi = (c.psi(x + h, 0.0) - c.psi(x - h, 0.0)) / (2.0 * h);
            assert!((slope_phi - c.b(x)).abs() < 1e-4 * c.b(x).abs().max(1e-3));
            assert!((slope_psi + c.b(x)).abs() < 1e-4 * c.b(x).abs().max(1e-3));
        }
    }

    #[test]
    fn initial_shifted_invariants_have_strict_signs() {
        let gas = GasModel::isentropic(5.0 / 3.0).unwrap();
        let geom = laval(0.4);
        let grid = Grid::new(-16.0, 16.0, 513).unwrap();
        let s = bump_state(grid, &gas, 2.0);
        let margin = 1e-4;
        let c = build_controls_isentropic(&gas, &geom, &s, 0.05, margin).unwrap();
        let (wbar, zbar) = modified_invariants(&s, &c, &gas).unwrap();
        let max_wbar = wbar.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min_zbar = zbar.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max_wbar <= -0.5 * margin, "max wbar = {max_wbar}");
        assert!(min_zbar >= 0.5 * margin, "min zbar = {min_zbar}");
    }

    #[test]
    fn isothermal_controls_have_doubled_tails() {
        // kappa = ||a||_1 for this profile; keep it under the 1/2 admissibility
        // cap with room for the envelope overshoot.
        let geom = NozzleGeometry::build(
            GeometrySpec::ExpMonotone {
                kappa: 0.45,
                center: 0.0,
                width: 1.0,
            },
            -12.0,
            12.0,
        )
        .unwrap();
        let grid = Grid::new(-12.0, 12.0, 257).unwrap();
        let s = FieldState::constant(grid, 2.0, 0.0);
        let c = build_controls_isothermal(&geom, &s, 0.05, 1e-6).unwrap();
        assert_relative_eq!(c.c0, 2.0f64.ln() + 1e-6, max_relative = 1e-9);
        // Left edge: phi = M, psi = M + 2 ||b||_1; swapped at the right edge.
        assert_relative_eq!(c.phi(-12.0, 0.0), c.c0, max_relative = 1e-12);
        assert_relative_eq!(
            c.psi(-12.0, 0.0) - c.c0,
            2.0 * c.geom.a0_integral_total(),
            max_relative = 1e-12
        );
        assert_relative_eq!(c.phi(12.0, 0.0) - c.c0, 2.0 * c.geom.a0_integral_total(), max_relative = 1e-12);
        assert!(c.constraints.satisfied);
        assert_relative_eq!(c.ceiling(), c.c0 + 2.0 * c.b_l1 + 2.0, max_relative = 1e-12);
    }

    #[test]
    fn constraints_fail_above_threshold() {
        let gas = GasModel::isentropic(2.0).unwrap();
        let geom = laval(0.9);
        let grid = Grid::new(-16.0, 16.0, 129).unwrap();
        let s = bump_state(grid, &gas, 2.0);
        let c = build_controls_isentropic(&gas, &geom, &s, 0.05, 1e-6).unwrap();
        assert!(!c.constraints.satisfied);
        assert!(c.constraints.first_failure().contains("theta"));
        assert!(!is_admissible(&gas, &geom));
    }

    #[test]
    fn bound_report_on_covered_state() {
        let gas = GasModel::isentropic(2.0).unwrap();
        let geom = laval(0.2);
        let grid = Grid::new(-16.0, 16.0, 257).unwrap();
        let s = bump_state(grid, &gas, 2.0);
        let c = build_controls_isentropic(&gas, &geom, &s, 0.05, 1e-6).unwrap();
        let rep = check_bounds(&s, &c, &gas, 1e-9);
        assert!(rep.region_ok);
        assert!(rep.ceiling_ok);
        assert!(rep.max_w <= rep.ceiling);
        assert!(rep.min_density > 0.0);
    }

    #[test]
    fn floor_check_modes() {
        let grid = Grid::new(-1.0, 1.0, 16).unwrap();
        let s = FieldState::constant(grid, 1e-4, 0.0);
        let (min, ok) = density_floor_check(&s, FlowMode::Isentropic, 0.0);
        assert_eq!(min, 1e-4);
        assert!(ok);
        let (_, ok) = density_floor_check(&s, FlowMode::Isothermal, 1e-3);
        assert!(!ok);
        let (_, ok) = density_floor_check(&s, FlowMode::Isothermal, 1e-4);
        assert!(ok);
    }

    #[test]
    fn data_coverage_error_surfaces() {
        let gas = GasModel::isentropic(2.0).unwrap();
        let grid = Grid::new(-1.0, 1.0, 16).unwrap();
        let mut s = FieldState::constant(grid, 1.0, 0.0);
        s.density[3] = -1.0;
        assert!(build_controls_isentropic(&gas, &laval(0.2), &s, 0.05, 1e-6).is_err());
    }
}
