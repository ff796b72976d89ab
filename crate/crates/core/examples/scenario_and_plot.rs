//! Scenario file round trip, then CSV and SVG output in a scratch directory
//! (first argument, default `./example_output`).

use std::path::PathBuf;

use ltv_observer::plot::plot_csv;
use ltv_observer::scenario_file::{load_scenario, save_scenario};
use ltv_observer::sim::write_csv_file;
use ltv_observer::{make_example_scenario, simulate};

fn main() -> Result<(), ltv_observer::Error> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "example_output".into()));
    std::fs::create_dir_all(&out).map_err(|e| ltv_observer::Error::Config(e.to_string()))?;
    let path = out.join("scenario.toml");
    let mut sc = make_example_scenario();
    sc.sim.t_final = 20.0;
    save_scenario(&sc, &path)?;
    let back = load_scenario(&path)?;
    assert_eq!(back, sc);
    let traj = simulate(&back)?;
    let csv = out.join("run.csv");
    write_csv_file(&traj, &csv)?;
    let summary = plot_csv(&csv, &out)?;
    println!("wrote {} and {}", path.display(), csv.display());
    for f in summary.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
