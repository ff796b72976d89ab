//! End-to-end runs of the `ltv-observer` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ltv_observer::scenario_file::load_scenario;
use ltv_observer::truth::make_example_scenario;

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltv-observer"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn example_file(dir: &Path, name: &str, edit: impl Fn(String) -> String) -> PathBuf {
    let path = dir.join(name);
    let o = bin(&["example", path.to_str().unwrap()], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, edit(text)).unwrap();
    path
}

fn kv(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("`{key}` missing from\n{text}"))
        .to_string()
}

#[test]
fn example_files_load_back() {
    let dir = tempfile::tempdir().unwrap();
    let fast = example_file(dir.path(), "fast.toml", |t| t);
    assert_eq!(load_scenario(&fast).unwrap(), make_example_scenario());

    let slow = dir.path().join("slow.toml");
    let o = bin(&["example", "--slow-gains", slow.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let sc = load_scenario(&slow).unwrap();
    assert_eq!((sc.gains.f0, sc.gains.alpha, sc.gains.gamma), (0.1, 1.0, 100.0));
}

#[test]
fn simulate_is_reproducible_and_leaves_the_file_alone() {
    let dir = tempfile::tempdir().unwrap();
    let sc = example_file(dir.path(), "ex.toml", |t| t);
    let before = std::fs::read(&sc).unwrap();
    let run = |out: &str| {
        let o = bin(
            &["simulate", "ex.toml", "--t-final", "2", "--dt", "0.002", "--out", out],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o)
    };
    let report = run("a.csv");
    run("b.csv");
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(std::fs::read(&sc).unwrap(), before);

    assert_eq!(kv(&report, "config.t_final"), "2.0");
    assert_eq!(kv(&report, "config.dt"), "0.002");
    assert_eq!(kv(&report, "time_to_param_err_below_1e-3"), "not reached");
    let text = String::from_utf8(a).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "t,u,y,x_1,x_2,xhat_1,xhat_2,thetahat_1,thetahat_2,thetahat_3,thetahat_4,thetahat_5,param_err_norm,state_err_norm,Delta"
    );
    // 1000 steps recorded every 100, plus the initial row.
    assert_eq!(text.lines().count(), 1 + 11);
}

#[test]
fn zero_horizon_writes_only_the_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    example_file(dir.path(), "ex.toml", |t| t);
    let o = bin(&["simulate", "ex.toml", "--t-final", "0", "--out", "z.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("z.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("0e0,"), "{}", rows[1]);
}

#[test]
fn noisy_measurement_stays_within_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    example_file(dir.path(), "ex.toml", |t| t.replace("sim.record_stride = 100", "sim.record_stride = 1"));
    let o = bin(
        &["simulate", "ex.toml", "--t-final", "1", "--noise-amplitude", "0.05", "--seed", "3", "--out", "n.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.path().join("n.csv")).unwrap();
    let mut worst = 0.0_f64;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let y: f64 = rec[2].parse().unwrap();
        let x1: f64 = rec[3].parse().unwrap();
        worst = worst.max((y - x1).abs());
    }
    assert!(worst > 0.0 && worst <= 0.05, "max |y - x1| = {worst}");
}

#[test]
fn invalid_scenarios_are_rejected_by_field() {
    let dir = tempfile::tempdir().unwrap();
    example_file(dir.path(), "k0.toml", |t| t.replace("gains.K = [7.5, 25.0]", "gains.K = [0.0, 0.0]"));
    let o = bin(&["simulate", "k0.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gains.K"), "{}", stderr(&o));

    example_file(dir.path(), "s.toml", |t| {
        t.replace("S = [[0.0, 1.0], [-1.0, 0.0]]", "S = [[-7.5, 1.0], [-25.0, 0.0]]")
    });
    let o = bin(&["simulate", "s.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("spectra not disjoint"), "{}", stderr(&o));

    example_file(dir.path(), "bad.toml", |t| t.replace("gains.alpha = 100.0", "gains.alpha = ["));
    let o = bin(&["simulate", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let o = bin(&["simulate", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.toml"), "{}", stderr(&o));
}

#[test]
fn plot_writes_three_figures() {
    let dir = tempfile::tempdir().unwrap();
    example_file(dir.path(), "ex.toml", |t| t);
    assert!(bin(&["simulate", "ex.toml", "--t-final", "3", "--out", "r.csv"], dir.path()).status.success());
    let o = bin(&["plot", "r.csv", "figs"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["param_error.svg", "state_error.svg", "delta.svg"] {
        let svg = std::fs::read_to_string(dir.path().join("figs").join(name)).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("<polyline"), "{name}");
    }
    // Δ(0) = 0 but ‖θ̃(0)‖ > 0, so nothing is dropped from the log axis.
    assert!(!stdout(&o).contains("omitted"));
}

#[test]
fn sweep_reports_every_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    example_file(dir.path(), "ex.toml", |t| t.replace("sim.t_final = 100.0", "sim.t_final = 1.0"));
    let o = bin(&["sweep", "ex.toml", "--grid", "alpha=1,100;f0=0.1,0.001"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for i in 0..4 {
        assert_eq!(kv(&text, &format!("run.{i}.status")), "ok");
    }
    assert_eq!(kv(&text, "run.3.alpha"), "100.0");
    assert_eq!(kv(&text, "run.3.f0"), "0.001");

    let o = bin(&["sweep", "ex.toml", "--grid", "beta=1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown grid key"));
}

#[test]
fn verify_passes_on_the_example() {
    let dir = tempfile::tempdir().unwrap();
    example_file(dir.path(), "ex.toml", |t| t);
    let o = bin(&["verify", "ex.toml"], dir.path());
    let report = std::fs::read_to_string(dir.path().join("verify_report.txt")).unwrap();
    assert!(o.status.success(), "{}\n{report}", stdout(&o));
    assert_eq!(kv(&report, "all_passed"), "true");
    assert!(stdout(&o).contains("13 checks, 0 failed"));
}
