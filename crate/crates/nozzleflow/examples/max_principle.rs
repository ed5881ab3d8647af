//! Sign-preservation lab in three stages.
//!
//! First two synthetic parabolic systems with known behaviour: the decoupled
//! heat pair keeps its signs, while a preset with a constant upward push on
//! the negative component loses them. Then a real viscous trace: the shifted
//! invariants of the flow are fed through the same machinery, and the
//! coefficient conditions plus the barrier certificate confirm why the bounds
//! hold.

use nozzleflow::gas::GasModel;
use nozzleflow::geometry::{admissibility_threshold, fit_to_a0_l1, GeometrySpec};
use nozzleflow::maxprinciple::{synthetic_preset, verify_system, verify_trace};
use nozzleflow::monitor::build_controls;
use nozzleflow::solver::{
    build_initial, prepare_initial, run, Grid, InitialPreset, SolverConfig,
};

fn main() -> Result<(), nozzleflow::Error> {
    for name in ["heat", "push-up"] {
        let case = synthetic_preset(name)?;
        let verdict = verify_system(
            &case.system,
            &case.grid,
            &case.p0,
            &case.q0,
            case.t_end,
            None,
        )?;
        print!(
            "{name}: conditions {} / signs {}",
            if verdict.conditions.pass { "pass" } else { "fail" },
            if verdict.signs.preserved { "held" } else { "lost" },
        );
        match &verdict.signs.first_violation {
            Some(v) => println!(
                " (witness: {} = {:+.3e} at x = {:.2}, t = {:.3})",
                v.component, v.value, v.x, v.t
            ),
            None => println!(),
        }
    }

    // A short flow run through the same lab.
    let gas = GasModel::isentropic(2.0)?;
    let geom = fit_to_a0_l1(
        GeometrySpec::LavalBump {
            area_inf: 2.0,
            depth: 0.5,
            width: 2.0,
            center: 0.0,
        },
        -16.0,
        16.0,
        4096,
        1.0,
        0.8 * admissibility_threshold(&gas),
    )?;
    let grid = Grid::new(-16.0, 16.0, 513)?;
    let raw = build_initial(
        &InitialPreset::Bump {
            background: 1.0,
            amplitude: 1.5,
            width: 2.0,
            center: 0.0,
            velocity: 0.0,
        },
        grid,
    )?;
    let mut cfg = SolverConfig::new(0.05, 1.0);
    cfg.snapshot_dt = 0.05;
    let init = prepare_initial(&raw, &gas, &cfg, None, None)?;
    let controls = build_controls(&gas, &geom, &init, cfg.epsilon, 1e-3)?;
    let trace = run(&init, &gas, &geom, &controls, &cfg)?;

    let verdict = verify_trace(&trace, &gas, &controls, 129)?;
    println!(
        "flow trace: conditions {}, signs {}, excursions dominated to t = {:.3e} (margin {:+.3e})",
        if verdict.conditions.pass { "pass" } else { "fail" },
        if verdict.signs.preserved { "held" } else { "lost" },
        verdict.barrier.horizon,
        verdict.barrier.min_margin,
    );
    Ok(())
}
