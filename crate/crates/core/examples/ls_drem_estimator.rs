//! Least squares on the extended parameter followed by determinant mixing.
//! Prints Δ(t) next to ‖θ̃(t)‖, then the excitation summary.

use ltv_observer::estimator::excitation_report;
use ltv_observer::{make_example_scenario, simulate};

fn main() -> Result<(), ltv_observer::Error> {
    let sc = make_example_scenario();
    let traj = simulate(&sc)?;
    for rec in traj.records.iter().step_by(100) {
        println!("t = {:>5.1}  Delta = {:.6}  |theta_err| = {:.5e}", rec.t, rec.delta, rec.param_err);
    }
    let times = traj.times();
    let deltas: Vec<f64> = traj.records.iter().map(|r| r.delta).collect();
    let rows: Vec<Vec<f64>> = traj.records.iter().map(|r| r.regressor(&sc).row()).collect();
    let ex = excitation_report(&times, &deltas, &rows, 10.0)?;
    println!("Gram over [0, 10]: min eigenvalue {:e}", ex.gram_min_eig);
    for (thr, t) in &ex.first_crossing {
        println!("Delta first exceeds {thr:e} at {t:?}");
    }
    Ok(())
}
