//! Implementations behind the command-line subcommands.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::plot::{plot_csv, PlotSummary};
use crate::scenario_file::{load_scenario, save_scenario};
use crate::sim::{simulate, write_csv_file, RunReport};
use crate::truth::{make_example_scenario, Scenario};
use crate::verify::{verify_all, VerifyReport};

pub fn cmd_example(out: &Path, slow_gains: bool) -> Result<Scenario> {
    let mut sc = make_example_scenario();
    if slow_gains {
        sc = sc.with_slow_gains();
    }
    save_scenario(&sc, out)?;
    Ok(sc)
}

/// Command-line overrides applied to an in-memory copy of the scenario.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SimOverrides {
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub noise_amplitude: Option<f64>,
    pub seed: Option<u64>,
}

impl SimOverrides {
    pub fn apply(&self, sc: &mut Scenario) {
        if let Some(v) = self.t_final {
            sc.sim.t_final = v;
        }
        if let Some(v) = self.dt {
            sc.sim.dt = v;
        }
        if let Some(v) = self.noise_amplitude {
            sc.noise.amplitude = v;
        }
        if let Some(v) = self.seed {
            sc.noise.seed = v;
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimulateOutcome {
    pub report: RunReport,
    pub warnings: Vec<String>,
}

pub fn cmd_simulate(scenario: &Path, overrides: &SimOverrides, out_csv: Option<&Path>) -> Result<SimulateOutcome> {
    let mut sc = load_scenario(scenario)?;
    overrides.apply(&mut sc);
    let warnings = sc.validate()?;
    let traj = simulate(&sc)?;
    if let Some(path) = out_csv {
        write_csv_file(&traj, path)?;
    }
    Ok(SimulateOutcome {
        report: RunReport::from_trajectory(&traj),
        warnings,
    })
}

pub const DEFAULT_VERIFY_REPORT: &str = "verify_report.txt";

/// Runs the whole verification suite and writes the key=value report.
pub fn cmd_verify(scenario: &Path, report_path: &Path) -> Result<VerifyReport> {
    let sc = load_scenario(scenario)?;
    let report = verify_all(&sc)?;
    std::fs::write(report_path, report.to_kv()).map_err(|e| Error::io(report_path, e))?;
    Ok(report)
}

pub fn cmd_plot(csv: &Path, out_dir: &Path) -> Result<PlotSummary> {
    plot_csv(csv, out_dir)
}

/// Keys a sweep grid may vary.
pub const SWEEP_KEYS: [&str; 7] = ["alpha", "gamma", "f0", "noise", "seed", "t_final", "dt"];

/// Parses `key=v1,v2;key2=v3` into ordered axes.
pub fn parse_grid(spec: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let mut axes = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, values) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("grid axis `{part}` must look like key=v1,v2")))?;
        let key = key.trim();
        if !SWEEP_KEYS.contains(&key) {
            return Err(Error::Config(format!(
                "unknown grid key `{key}`; expected one of {}",
                SWEEP_KEYS.join(", ")
            )));
        }
        let values: Vec<f64> = values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("grid value `{}` for `{key}` is not a number", v.trim())))
            })
            .collect::<Result<_>>()?;
        if values.is_empty() {
            return Err(Error::Config(format!("grid axis `{key}` has no values")));
        }
        if axes.iter().any(|(k, _): &(String, Vec<f64>)| k == key) {
            return Err(Error::Config(format!("grid key `{key}` given twice")));
        }
        axes.push((key.to_string(), values));
    }
    if axes.is_empty() {
        return Err(Error::Config("empty grid".into()));
    }
    Ok(axes)
}

/// Cartesian product of the axes, first axis varying slowest.
pub fn grid_points(axes: &[(String, Vec<f64>)]) -> Vec<Vec<(String, f64)>> {
    axes.iter().fold(vec![Vec::new()], |acc, (k, vals)| {
        acc.iter()
            .flat_map(|prefix| {
                vals.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push((k.clone(), v));
                    p
                })
            })
            .collect()
    })
}

fn apply_point(sc: &mut Scenario, point: &[(String, f64)]) -> Result<()> {
    for (k, v) in point {
        match k.as_str() {
            "alpha" => sc.gains.alpha = *v,
            "gamma" => sc.gains.gamma = *v,
            "f0" => sc.gains.f0 = *v,
            "noise" => sc.noise.amplitude = *v,
            "seed" => {
                if !(*v >= 0.0 && v.fract() == 0.0) {
                    return Err(Error::Config(format!("seed must be a non-negative integer, got {v}")));
                }
                sc.noise.seed = *v as u64
            }
            "t_final" => sc.sim.t_final = *v,
            "dt" => sc.sim.dt = *v,
            other => return Err(Error::Config(format!("unknown grid key `{other}`"))),
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SweepRun {
    pub point: Vec<(String, f64)>,
    /// Run report, or the error that stopped the run.
    pub outcome: std::result::Result<RunReport, String>,
}

/// Independent runs over the grid, in parallel.
pub fn sweep(sc: &Scenario, axes: &[(String, Vec<f64>)]) -> Vec<SweepRun> {
    grid_points(axes)
        .into_par_iter()
        .map(|point| {
            let mut s = sc.clone();
            let outcome = apply_point(&mut s, &point)
                .and_then(|_| simulate(&s))
                .map(|traj| RunReport::from_trajectory(&traj))
                .map_err(|e| e.to_string());
            SweepRun { point, outcome }
        })
        .collect()
}

pub fn cmd_sweep(scenario: &Path, grid: &str) -> Result<Vec<SweepRun>> {
    let sc = load_scenario(scenario)?;
    sc.validate()?;
    let axes = parse_grid(grid)?;
    Ok(sweep(&sc, &axes))
}

/// One `key=value` block per run.
pub fn sweep_to_kv(runs: &[SweepRun]) -> String {
    let mut o = String::new();
    for (i, run) in runs.iter().enumerate() {
        for (k, v) in &run.point {
            let _ = writeln!(o, "run.{i}.{k}={v:?}");
        }
        match &run.outcome {
            Ok(r) => {
                let _ = writeln!(o, "run.{i}.status=ok");
                let _ = writeln!(o, "run.{i}.final_param_err_norm={:e}", r.final_param_err);
                let _ = writeln!(o, "run.{i}.final_state_err_norm={:e}", r.final_state_err);
                for (thr, t) in &r.time_to {
                    let v = t.map_or("not reached".to_string(), |t| format!("{t:?}"));
                    let _ = writeln!(o, "run.{i}.time_to_param_err_below_{thr:e}={v}");
                }
                let _ = writeln!(o, "run.{i}.Delta_final={:e}", r.delta_final);
            }
            Err(e) => {
                let _ = writeln!(o, "run.{i}.status=error: {e}");
            }
        }
    }
    o
}
