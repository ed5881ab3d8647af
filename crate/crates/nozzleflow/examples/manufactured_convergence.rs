//! Grid convergence study against a manufactured travelling wave.
//!
//! The wave is substituted into the viscous equations and the leftover terms
//! are fed back as forcing, so the wave solves the forced system exactly.
//! Halving dx should then divide the final-time L2 error by about four:
//! central differences in space, Heun in time, and the step size follows the
//! diffusive stability bound dt ~ dx^2.

use nozzleflow::gas::GasModel;
use nozzleflow::geometry::{GeometrySpec, NozzleGeometry};
use nozzleflow::solver::manufactured::{mms_error, observed_orders, WaveSolution};

fn main() -> Result<(), nozzleflow::Error> {
    let geom = NozzleGeometry::build(
        GeometrySpec::LavalBump {
            area_inf: 2.0,
            depth: 0.2,
            width: 1.0,
            center: 0.0,
        },
        -8.0,
        8.0,
    )?;
    let wave = WaveSolution::standard();
    let resolutions = [257usize, 513, 1025];

    for gas in [GasModel::isentropic(2.0)?, GasModel::isothermal()] {
        let mut errors = Vec::new();
        println!("{:?}:", gas.mode);
        for &n in &resolutions {
            let e = mms_error(&gas, &geom, &wave, 0.1, 0.25, n)?;
            println!("  n = {n:4}  L2 error = {e:.6e}");
            errors.push(e);
        }
        let orders = observed_orders(&errors);
        println!("  observed orders: {orders:.3?}");
    }
    Ok(())
}
