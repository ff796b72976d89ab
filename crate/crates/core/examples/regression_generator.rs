//! The filter bank turns (y, u) into a regression Y = Ω_Lᵀθ + Ω_Nᵀ𝒦(θ) + ε.
//! The residual at the true θ decays exponentially.

use ltv_observer::verify::{fit_exponential_decay, regression_residual_series};
use ltv_observer::{make_example_scenario, simulate};

fn main() -> Result<(), ltv_observer::Error> {
    let mut sc = make_example_scenario();
    sc.sim.t_final = 30.0;
    let traj = simulate(&sc)?;
    for rec in traj.records.iter().step_by(50) {
        let s = rec.regressor(&sc);
        println!(
            "t = {:>5.1}  Y = {:>12.5e}  |Omega| = {:>10.4e}  eps(theta) = {:>10.3e}",
            rec.t,
            s.y,
            ltv_observer::linalg::norm2(&s.row()),
            s.residual(&sc.dims, &sc.theta_true())
        );
    }
    let fit = fit_exponential_decay(&regression_residual_series(&traj), (2.0, 25.0))?;
    println!("log-slope of |eps| over [2, 25]: {:.4}", fit.slope);
    Ok(())
}
