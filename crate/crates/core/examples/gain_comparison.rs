//! Fast and slow estimator tunings side by side.

use ltv_observer::sim::time_to_threshold;
use ltv_observer::{make_example_scenario, simulate};

fn main() -> Result<(), ltv_observer::Error> {
    let fast = make_example_scenario();
    let slow = make_example_scenario().with_slow_gains();
    let (a, b) = rayon::join(|| simulate(&fast), || simulate(&slow));
    let (a, b) = (a?, b?);
    println!("{:>6} {:>14} {:>14}", "t", "fast |th_err|", "slow |th_err|");
    for (ra, rb) in a.records.iter().zip(&b.records).step_by(100) {
        println!("{:>6.1} {:>14.5e} {:>14.5e}", ra.t, ra.param_err, rb.param_err);
    }
    for thr in [1.0, 1e-1, 1e-2] {
        println!(
            "time to |th_err| < {thr:e}: fast {:?}, slow {:?}",
            time_to_threshold(&a, thr),
            time_to_threshold(&b, thr)
        );
    }
    Ok(())
}
