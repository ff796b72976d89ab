use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ltv_observer::commands::{
    cmd_example, cmd_plot, cmd_simulate, cmd_sweep, cmd_verify, sweep_to_kv, SimOverrides, DEFAULT_VERIFY_REPORT,
};

#[derive(Parser)]
#[command(name = "ltv-observer", version, about = "Adaptive observer for LTV plants with exosystem disturbances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the worked example scenario file.
    Example {
        /// Use the slow tuning f0 = 0.1, alpha = 1.
        #[arg(long)]
        slow_gains: bool,
        out: PathBuf,
    },
    /// Integrate the closed loop and print the run report.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        noise_amplitude: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Trajectory CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every numerical check; non-zero exit on any failure.
    Verify {
        scenario: PathBuf,
        #[arg(long, default_value = DEFAULT_VERIFY_REPORT)]
        report: PathBuf,
    },
    /// Render SVG figures from a simulation CSV.
    Plot { csv: PathBuf, outdir: PathBuf },
    /// Run a grid of independent simulations, e.g. --grid "alpha=1,100;f0=0.1,0.001".
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        grid: String,
    },
}

fn run(cli: Cli) -> ltv_observer::Result<bool> {
    match cli.command {
        Command::Example { slow_gains, out } => {
            cmd_example(&out, slow_gains)?;
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::Simulate {
            scenario,
            t_final,
            dt,
            noise_amplitude,
            seed,
            out,
        } => {
            let ov = SimOverrides {
                t_final,
                dt,
                noise_amplitude,
                seed,
            };
            let outcome = cmd_simulate(&scenario, &ov, out.as_deref())?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", outcome.report.to_kv());
            Ok(true)
        }
        Command::Verify { scenario, report } => {
            let r = cmd_verify(&scenario, &report)?;
            print!("{}", r.table());
            println!("report written to {}", report.display());
            Ok(r.passed())
        }
        Command::Plot { csv, outdir } => {
            let s = cmd_plot(&csv, &outdir)?;
            for f in &s.files {
                println!("wrote {}", f.display());
            }
            if s.omitted_zeros > 0 {
                println!("{} exact-zero samples omitted from the log-scale figure", s.omitted_zeros);
            }
            Ok(true)
        }
        Command::Sweep { scenario, grid } => {
            let runs = cmd_sweep(&scenario, &grid)?;
            print!("{}", sweep_to_kv(&runs));
            Ok(runs.iter().all(|r| r.outcome.is_ok()))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
