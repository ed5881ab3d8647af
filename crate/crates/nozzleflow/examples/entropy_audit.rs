//! Runs a short isentropic scenario, then tests the entropy inequality
//! against a batch of random compactly supported bumps and evaluates the
//! dissipation integral over an interior window.
//!
//! The residual for a convex pair should only be negative by a discretisation
//! allowance, which shrinks with the mesh and the viscosity.

use nozzleflow::entropy::{
    dissipation_integral, entropy_residual, BumpTestFunction, ChiFunction, PairFamily,
    WeakEntropySpec, Window,
};
use nozzleflow::gas::GasModel;
use nozzleflow::geometry::{admissibility_threshold, fit_to_a0_l1, GeometrySpec};
use nozzleflow::monitor::build_controls;
use nozzleflow::solver::{
    build_initial, prepare_initial, run, Grid, InitialPreset, SolverConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), nozzleflow::Error> {
    let gas = GasModel::isentropic(2.0)?;
    let geom = fit_to_a0_l1(
        GeometrySpec::LavalBump {
            area_inf: 2.0,
            depth: 0.5,
            width: 1.0,
            center: 0.0,
        },
        -16.0,
        16.0,
        4096,
        1.0,
        0.8 * admissibility_threshold(&gas),
    )?;
    let grid = Grid::new(-16.0, 16.0, 1025)?;
    let raw = build_initial(
        &InitialPreset::Bump {
            background: 1.0,
            amplitude: 1.2,
            width: 1.5,
            center: 0.0,
            velocity: 0.3,
        },
        grid,
    )?;
    let epsilon = 0.05;
    let mut cfg = SolverConfig::new(epsilon, 1.0);
    cfg.snapshot_dt = 0.01;
    let init = prepare_initial(&raw, &gas, &cfg, None, None)?;
    let controls = build_controls(&gas, &geom, &init, epsilon, 1e-3)?;
    let trace = run(&init, &gas, &geom, &controls, &cfg)?;

    let window = Window::with_margins(-16.0, 16.0, 1.0, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let bumps: Vec<BumpTestFunction> = (0..12)
        .map(|_| BumpTestFunction::random(&mut rng, &window))
        .collect();
    let allowance = 10.0 * (epsilon + grid.dx());

    let families = [
        PairFamily::Mechanical,
        PairFamily::Weak(WeakEntropySpec::new(ChiFunction::constant(), 2.0, 2048)?),
        PairFamily::Weak(WeakEntropySpec::new(ChiFunction::bump(0.0, 0.5)?, 2.0, 2048)?),
    ];
    for family in &families {
        let residuals = entropy_residual(&trace, family, &gas, &geom, &bumps)?;
        let worst = bumps
            .iter()
            .zip(&residuals)
            .map(|(b, r)| r / b.c1_norm())
            .fold(f64::INFINITY, f64::min);
        println!(
            "{:<24} worst scaled residual = {:+.4e} (floor = {:-.4e})",
            family.label(),
            worst,
            -allowance
        );
    }

    let d = dissipation_integral(&trace, &gas, &window, None)?;
    println!("dissipation integral over the window: {:.6e}", d);
    Ok(())
}
