//! Closed-loop run of the worked example with the observer's final
//! estimates printed.

use ltv_observer::observer::recover_rho;
use ltv_observer::{make_example_scenario, simulate, RunReport};

fn main() -> Result<(), ltv_observer::Error> {
    let sc = make_example_scenario();
    let traj = simulate(&sc)?;
    let last = traj.last();
    println!("t = {}", last.t);
    println!("x      = {:?}", last.state.truth.x);
    println!("x_hat  = {:?}", last.xhat);
    println!("theta  = {:?}", sc.theta_true());
    println!("theta^ = {:?}", last.state.est.theta);
    let rho = recover_rho(&sc, &last.state.est.theta[sc.dims.n_x0()..]);
    println!("rho^   = {:?}", rho.rho);
    println!();
    print!("{}", RunReport::from_trajectory(&traj).to_kv());
    Ok(())
}
