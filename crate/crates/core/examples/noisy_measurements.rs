//! Bounded measurement noise: late-time parameter error for several seeds.

use ltv_observer::{make_example_scenario, simulate};
use rayon::prelude::*;

fn late_mean(traj: &ltv_observer::Trajectory) -> f64 {
    let late: Vec<f64> = traj.records.iter().filter(|r| r.t >= 80.0).map(|r| r.param_err).collect();
    late.iter().sum::<f64>() / late.len() as f64
}

fn main() -> Result<(), ltv_observer::Error> {
    let runs: Vec<(Option<u64>, ltv_observer::Result<ltv_observer::Trajectory>)> = [None, Some(1), Some(2), Some(3)]
        .into_par_iter()
        .map(|seed| {
            let mut sc = make_example_scenario();
            if let Some(s) = seed {
                sc.noise.amplitude = 0.05;
                sc.noise.seed = s;
            }
            (seed, simulate(&sc))
        })
        .collect();
    for (seed, traj) in runs {
        let traj = traj?;
        let label = seed.map_or("noise-free".to_string(), |s| format!("seed {s}"));
        println!(
            "{label:>10}: mean |th_err| over [80, 100] = {:.5e}, final |x_err| = {:.5e}",
            late_mean(&traj),
            traj.last().state_err
        );
    }
    Ok(())
}
