//! One complete viscous run: converging-diverging nozzle, isentropic gas with
//! gamma = 2, smooth bump initial data. Prints the invariant-region monitor at
//! every checkpoint and writes the snapshot table as CSV next to the target
//! directory.

use nozzleflow::gas::GasModel;
use nozzleflow::geometry::{admissibility_threshold, fit_to_a0_l1, GeometrySpec};
use nozzleflow::monitor::build_controls;
use nozzleflow::report::CsvSnapshotSink;
use nozzleflow::solver::{
    build_initial, prepare_initial, run_with, Grid, InitialPreset, RunOptions, SolverConfig,
};
use std::io::BufWriter;

fn main() -> Result<(), nozzleflow::Error> {
    let gas = GasModel::isentropic(2.0)?;
    let spec = GeometrySpec::LavalBump {
        area_inf: 2.0,
        depth: 0.5,
        width: 1.0,
        center: 0.0,
    };
    // Keep the total area variation safely below the admissibility threshold.
    let geom = fit_to_a0_l1(
        spec,
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
            amplitude: 1.0,
            width: 2.0,
            center: 0.0,
            velocity: 0.0,
        },
        grid,
    )?;

    let mut cfg = SolverConfig::new(0.05, 2.0);
    cfg.snapshot_dt = 0.1;
    let init = prepare_initial(&raw, &gas, &cfg, None, None)?;
    let controls = build_controls(&gas, &geom, &init, cfg.epsilon, 1e-3)?;
    println!(
        "controls: c0 = {:.4}, ceiling = {:.4}",
        controls.c0,
        controls.ceiling()
    );

    let csv_path = std::env::temp_dir().join("nozzleflow_single_run.csv");
    let mut sink = CsvSnapshotSink::new(BufWriter::new(std::fs::File::create(&csv_path)?));
    let trace = run_with(
        &init,
        &gas,
        &geom,
        &controls,
        &cfg,
        RunOptions {
            sink: Some(&mut sink),
            ..RunOptions::default()
        },
    )?;

    println!("steps = {}, dt in [{:.2e}, {:.2e}]", trace.steps, trace.dt_min, trace.dt_max);
    println!("   t      max wbar    min zbar   min density  region");
    for r in &trace.bound_reports {
        println!(
            "{:5.2}  {:+.3e}  {:+.3e}  {:.4e}   {}",
            r.t,
            r.max_wbar,
            r.min_zbar,
            r.min_density,
            if r.region_ok { "ok" } else { "VIOLATED" }
        );
    }
    println!("snapshots written to {}", csv_path.display());
    Ok(())
}
