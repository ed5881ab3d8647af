//! Refines the artificial viscosity over a ladder of epsilons with shared
//! initial data and reports the local distances between consecutive members.
//! If the family is Cauchy, the distances contract.

use nozzleflow::gas::GasModel;
use nozzleflow::geometry::{admissibility_threshold, fit_to_a0_l1, GeometrySpec};
use nozzleflow::solver::InitialPreset;
use nozzleflow::sweep::{epsilon_sweep, SweepConfig, SweepScenario};

fn main() -> Result<(), nozzleflow::Error> {
    let gas = GasModel::isentropic(2.0)?;
    let geom = fit_to_a0_l1(
        GeometrySpec::LavalBump {
            area_inf: 2.0,
            depth: 0.3,
            width: 2.0,
            center: 0.0,
        },
        -16.0,
        16.0,
        4096,
        1.0,
        0.5 * admissibility_threshold(&gas),
    )?;
    let initial = InitialPreset::Bump {
        background: 1.0,
        amplitude: 0.6,
        width: 3.0,
        center: 0.0,
        velocity: 0.0,
    };
    let scenario = SweepScenario::new(gas, geom, initial, 0.6);

    let cfg = SweepConfig {
        epsilons: vec![0.1, 0.05, 0.025],
        max_cells: 1025,
        ..SweepConfig::default()
    };

    let report = epsilon_sweep(&scenario, &cfg)?;
    println!("epsilon    cells   L1 distance to next    sup w      -inf z");
    for (i, b) in report.bounds.iter().enumerate() {
        let dist = report
            .distances_l1
            .get(i)
            .map(|d| format!("{d:.6e}"))
            .unwrap_or_else(|| "-".to_string());
        println!(
            "{:<9.4} {:>6}   {:<20} {:.6}   {:.6}",
            b.epsilon, b.n_cells, dist, b.sup_w, b.neg_inf_z
        );
    }
    println!("ratios: {:?}", report.ratios);
    println!("verdict: {}", report.verdict);
    Ok(())
}
