//! Open-loop plant sampled once per second, with the time-varying
//! parameters and the disturbance alongside the state.

use std::sync::Arc;

use ltv_observer::make_example_scenario;
use ltv_observer::ode::{integrate, CompositeState, IntegrationConfig, Layout};
use ltv_observer::truth::{truth_rhs, TruthState};

fn main() -> Result<(), ltv_observer::Error> {
    let sc = make_example_scenario();
    let d = sc.dims;
    let layout = Arc::new(Layout::new([("truth", TruthState::flat_len(&d))]));
    let s0 = CompositeState::new(layout, 0.0, sc.initial_truth().to_flat())?;
    let rhs = |t: f64, v: &[f64]| Ok(truth_rhs(&sc, t, &TruthState::from_flat(&d, v)).to_flat());
    let cfg = IntegrationConfig::new(1e-3, 10.0, 1000)?;
    println!("{:>5} {:>12} {:>12} {:>10} {:>10} {:>10}", "t", "x1", "x2", "theta1", "B1", "delta");
    integrate(&rhs, s0, &cfg, |_, s| {
        let ts = TruthState::from_flat(&d, s.as_slice());
        println!(
            "{:>5.1} {:>12.5} {:>12.5} {:>10.5} {:>10.5} {:>10.5}",
            s.t,
            ts.x[0],
            ts.x[1],
            ts.theta_tv(&sc)[0],
            ts.b_tv(&sc)[0],
            ts.disturbance(&sc)
        );
    })?;
    Ok(())
}
