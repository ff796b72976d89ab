//! Closed-loop run: plant and observer integrated as one RK4 state.
//!
//! Segment order: truth, Φ_θ, Φ_B, z, Ω, P, L, Q, θ̂_g, F, θ̂.

use std::cell::Cell;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::estimator::{drem_transform, estimator_rhs, EstimatorState};
use crate::gpebo::{filters_rhs, g_map, sample_at, selection_matrix, FilterBank, RegressorSample, ThetaVector};
use crate::linalg::{norm2, sub_vec, DenseMatrix};
use crate::observer::StateReconstructor;
use crate::ode::{integrate_with_hook, CompositeState, IntegrationConfig, Layout};
use crate::truth::{truth_rhs, Dims, NoiseSource, Scenario, TruthState};

/// How the mixed estimate `θ̂` is driven.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MixingMode {
    /// `θ̂̇ = γ Q_sel Δ (𝒴 − Δ G(θ̂))` with `𝒴` from the LS state.
    #[default]
    Full,
    /// `𝒴` replaced by its noise- and transient-free value `Δ G(θ_true)`.
    Exact,
}

pub fn closed_loop_layout(d: &Dims) -> Layout {
    let (p, q, nx) = (d.p(), d.q(), d.n_x0());
    Layout::new([
        ("truth", TruthState::flat_len(d)),
        ("phi_theta", d.n_theta * d.n_theta),
        ("phi_b", d.n_b * d.n_b),
        ("z", d.n),
        ("omega", d.n * d.n_theta),
        ("p", d.n * d.n_b),
        ("l", d.n_w),
        ("q", d.n_w * nx),
        ("theta_g", p),
        ("f", p * p),
        ("theta", q),
    ])
}

/// Views of one flat closed-loop state.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopState {
    pub truth: TruthState,
    pub filters: FilterBank,
    pub est: EstimatorState,
}

impl LoopState {
    pub fn initial(sc: &Scenario) -> Self {
        Self {
            truth: sc.initial_truth(),
            filters: FilterBank::initial(&sc.dims),
            est: EstimatorState::initial(sc),
        }
    }

    pub fn from_flat(d: &Dims, v: &[f64]) -> Result<Self> {
        let nt = TruthState::flat_len(d);
        let nf = FilterBank::flat_len(d);
        if v.len() != nt + nf + EstimatorState::flat_len(d) {
            return Err(Error::Structure(format!("closed-loop state has {} values", v.len())));
        }
        Ok(Self {
            truth: TruthState::from_flat(d, &v[..nt]),
            filters: FilterBank::from_flat(d, &v[nt..nt + nf])?,
            est: EstimatorState::from_flat(d, &v[nt + nf..])?,
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        [self.truth.to_flat(), self.filters.to_flat(), self.est.to_flat()].concat()
    }
}

/// Right-hand side of the closed loop. `noise` is the additive measurement
/// noise, held constant over one integration step.
pub struct ClosedLoop<'a> {
    sc: &'a Scenario,
    q_sel: DenseMatrix,
    theta_g0: Vec<f64>,
    theta_true: Vec<f64>,
    mode: MixingMode,
}

impl<'a> ClosedLoop<'a> {
    pub fn new(sc: &'a Scenario, mode: MixingMode) -> Result<Self> {
        let d = sc.dims;
        Ok(Self {
            sc,
            q_sel: selection_matrix(d.q(), d.p())?,
            theta_g0: sc.theta_g0(),
            theta_true: sc.theta_true(),
            mode,
        })
    }

    pub fn rhs(&self, t: f64, v: &[f64], noise: f64) -> Result<Vec<f64>> {
        let sc = self.sc;
        let d = &sc.dims;
        let s = LoopState::from_flat(d, v)?;
        let y = s.truth.x[0] + noise;
        let u = sc.input.value(t);
        let truth_dot = truth_rhs(sc, t, &s.truth);
        let filters_dot = filters_rhs(sc, t, &s.filters, y, u);
        let sample = sample_at(sc, t, &s.filters, y);
        let mut est_dot = estimator_rhs(d, &s.est, &sample, &sc.gains, &self.theta_g0, &self.q_sel)?;
        if self.mode == MixingMode::Exact {
            let drem = drem_transform(&s.est.f, &s.est.theta_g, &self.theta_g0, sc.gains.f0)?;
            let g_true = g_map(d, &self.theta_true);
            let g_hat = g_map(d, &s.est.theta);
            let mixed: Vec<f64> = g_true
                .iter()
                .zip(&g_hat)
                .map(|(a, b)| sc.gains.gamma * drem.delta * drem.delta * (a - b))
                .collect();
            est_dot.theta = self.q_sel.matvec(&mixed);
        }
        Ok([truth_dot.to_flat(), filters_dot.to_flat(), est_dot.to_flat()].concat())
    }
}

/// One recorded sample with the derived observer outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub t: f64,
    pub u: f64,
    /// Measurement as seen by the observer (noise included).
    pub y: f64,
    pub state: LoopState,
    pub xhat: Vec<f64>,
    pub param_err: f64,
    pub state_err: f64,
    pub delta: f64,
}

impl Record {
    pub fn regressor(&self, sc: &Scenario) -> RegressorSample {
        sample_at(sc, self.t, &self.state.filters, self.y)
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub scenario: Scenario,
    pub records: Vec<Record>,
    pub wall_clock: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn last(&self) -> &Record {
        self.records.last().expect("a trajectory always holds the initial record")
    }

    /// `(t, f(record))` pairs.
    pub fn series(&self, f: impl Fn(&Record) -> f64) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, f(r))).collect()
    }
}

pub fn simulate(sc: &Scenario) -> Result<Trajectory> {
    simulate_with(sc, MixingMode::Full)
}

pub fn simulate_with(sc: &Scenario, mode: MixingMode) -> Result<Trajectory> {
    sc.validate()?;
    let started = Instant::now();
    let d = sc.dims;
    let cfg = IntegrationConfig::new(sc.sim.dt, sc.sim.t_final, sc.sim.record_stride)?;
    let layout = Arc::new(closed_loop_layout(&d));
    let s0 = CompositeState::new(layout, 0.0, LoopState::initial(sc).to_flat())?;
    let lp = ClosedLoop::new(sc, mode)?;
    let rec = StateReconstructor::new(sc);
    let theta_true = sc.theta_true();
    let theta_g0 = sc.theta_g0();

    // Noise is drawn once per step and held across the RK4 stages.
    let held = Cell::new(0.0);
    let mut source = NoiseSource::new(sc.noise.seed);
    let amplitude = sc.noise.amplitude;
    let rhs = |t: f64, v: &[f64]| lp.rhs(t, v, held.get());
    let mut records = Vec::new();
    let mut failure = None;

    integrate_with_hook(
        &rhs,
        s0,
        &cfg,
        |_, _| {
            if amplitude != 0.0 {
                held.set(amplitude * source.sample());
            }
        },
        |_, s| {
            if failure.is_some() {
                return;
            }
            let result = (|| -> Result<Record> {
                let state = LoopState::from_flat(&d, s.as_slice())?;
                let theta = ThetaVector::from_slice(&d, &state.est.theta)?;
                let xhat = rec.reconstruct(sc, &state.filters, &theta)?;
                let delta = drem_transform(&state.est.f, &state.est.theta_g, &theta_g0, sc.gains.f0)?.delta;
                Ok(Record {
                    t: s.t,
                    u: sc.input.value(s.t),
                    y: state.truth.x[0] + held.get(),
                    param_err: norm2(&sub_vec(&state.est.theta, &theta_true)),
                    state_err: norm2(&sub_vec(&xhat, &state.truth.x)),
                    xhat,
                    delta,
                    state,
                })
            })();
            match result {
                Ok(r) => records.push(r),
                Err(e) => failure = Some(e),
            }
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Trajectory {
        scenario: sc.clone(),
        records,
        wall_clock: started.elapsed().as_secs_f64(),
    })
}

pub fn csv_header(d: &Dims) -> Vec<String> {
    let mut h = vec!["t".to_string(), "u".into(), "y".into()];
    h.extend((1..=d.n).map(|i| format!("x_{i}")));
    h.extend((1..=d.n).map(|i| format!("xhat_{i}")));
    h.extend((1..=d.q()).map(|i| format!("thetahat_{i}")));
    h.extend(["param_err_norm".into(), "state_err_norm".into(), "Delta".into()]);
    h
}

fn csv_row(r: &Record) -> Vec<String> {
    let mut row = vec![format!("{:e}", r.t), format!("{:e}", r.u), format!("{:e}", r.y)];
    row.extend(r.state.truth.x.iter().map(|v| format!("{v:e}")));
    row.extend(r.xhat.iter().map(|v| format!("{v:e}")));
    row.extend(r.state.est.theta.iter().map(|v| format!("{v:e}")));
    row.extend([r.param_err, r.state_err, r.delta].iter().map(|v| format!("{v:e}")));
    row
}

pub fn write_csv<W: std::io::Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Config(format!("CSV write failed: {e}"));
    w.write_record(csv_header(&traj.scenario.dims)).map_err(io)?;
    for r in &traj.records {
        w.write_record(csv_row(r)).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Config(format!("CSV write failed: {e}")))?;
    Ok(())
}

pub fn write_csv_file(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = std::io::BufWriter::new(file);
    write_csv(traj, &mut buf)?;
    buf.flush().map_err(|e| Error::io(path, e))
}

pub const REPORT_THRESHOLDS: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub final_param_err: f64,
    pub final_state_err: f64,
    /// `(threshold, first recorded time with ‖θ̃‖ < threshold)`.
    pub time_to: Vec<(f64, Option<f64>)>,
    pub delta_final: f64,
    pub wall_clock: f64,
    pub theta_final: Vec<f64>,
    pub gamma_final: Vec<f64>,
    pub rho_final: Option<Vec<f64>>,
    /// `(key, value)` echo of the effective configuration.
    pub config: Vec<(String, String)>,
}

/// First recorded time at which `‖θ̃‖ < thr`.
pub fn time_to_threshold(traj: &Trajectory, thr: f64) -> Option<f64> {
    traj.records.iter().find(|r| r.param_err < thr).map(|r| r.t)
}

impl RunReport {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let sc = &traj.scenario;
        let last = traj.last();
        let eta = &last.state.est.theta[sc.dims.n_x0()..];
        let rho = crate::observer::recover_rho(sc, eta);
        let config = vec![
            ("t_final".into(), format!("{:?}", sc.sim.t_final)),
            ("dt".into(), format!("{:?}", sc.sim.dt)),
            ("record_stride".into(), sc.sim.record_stride.to_string()),
            ("noise_amplitude".into(), format!("{:?}", sc.noise.amplitude)),
            ("seed".into(), sc.noise.seed.to_string()),
            ("K".into(), format!("{:?}", sc.gains.k)),
            ("f".into(), format!("{:?}", sc.gains.f)),
            ("f0".into(), format!("{:?}", sc.gains.f0)),
            ("alpha".into(), format!("{:?}", sc.gains.alpha)),
            ("gamma".into(), format!("{:?}", sc.gains.gamma)),
        ];
        Self {
            final_param_err: last.param_err,
            final_state_err: last.state_err,
            time_to: REPORT_THRESHOLDS.iter().map(|&thr| (thr, time_to_threshold(traj, thr))).collect(),
            delta_final: last.delta,
            wall_clock: traj.wall_clock,
            theta_final: last.state.est.theta.clone(),
            gamma_final: rho.gamma,
            rho_final: rho.rho,
            config,
        }
    }

    /// Flat `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "final_param_err_norm={:e}", self.final_param_err);
        let _ = writeln!(o, "final_state_err_norm={:e}", self.final_state_err);
        for (thr, t) in &self.time_to {
            match t {
                Some(t) => {
                    let _ = writeln!(o, "time_to_param_err_below_{thr:e}={t:?}");
                }
                None => {
                    let _ = writeln!(o, "time_to_param_err_below_{thr:e}=not reached");
                }
            }
        }
        let _ = writeln!(o, "Delta_final={:e}", self.delta_final);
        let _ = writeln!(o, "thetahat_final={:?}", self.theta_final);
        // `+ 0.0` maps −0 to 0.
        let gamma: Vec<f64> = self.gamma_final.iter().map(|g| g + 0.0).collect();
        let _ = writeln!(o, "Gammahat_final={gamma:?}");
        match &self.rho_final {
            Some(r) => {
                let _ = writeln!(o, "rhohat_final={r:?}");
            }
            None => {
                let _ = writeln!(o, "rhohat_final=not declared");
            }
        }
        let _ = writeln!(o, "wall_clock_s={:.3}", self.wall_clock);
        for (k, v) in &self.config {
            let _ = writeln!(o, "config.{k}={v}");
        }
        o
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truth::make_example_scenario;

    #[test]
    fn layout_order_and_size() {
        let d = make_example_scenario().dims;
        let l = closed_loop_layout(&d);
        let names: Vec<&str> = l.names().iter().map(|s| s.as_str()).collect();
        assert_eq!(
            names,
            ["truth", "phi_theta", "phi_b", "z", "omega", "p", "l", "q", "theta_g", "f", "theta"]
        );
        assert_eq!(
            l.len(),
            TruthState::flat_len(&d) + FilterBank::flat_len(&d) + EstimatorState::flat_len(&d)
        );
    }

    #[test]
    fn zero_horizon_has_only_initial_row() {
        let mut sc = make_example_scenario();
        sc.sim.t_final = 0.0;
        let traj = simulate(&sc).unwrap();
        assert_eq!(traj.records.len(), 1);
        let report = RunReport::from_trajectory(&traj);
        assert!(report.time_to.iter().all(|(_, t)| t.is_none()));
        assert!(report.to_kv().contains("not reached"));
        let mut buf = Vec::new();
        write_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("t,u,y,x_1,x_2,xhat_1,xhat_2,thetahat_1"));
        assert!(text.lines().next().unwrap().ends_with("param_err_norm,state_err_norm,Delta"));
    }

    #[test]
    fn short_run_records_on_stride() {
        let mut sc = make_example_scenario();
        sc.sim.t_final = 0.5;
        sc.sim.record_stride = 100;
        let traj = simulate(&sc).unwrap();
        let t = traj.times();
        assert_eq!(t.len(), 6);
        assert!((t[5] - 0.5).abs() < 1e-12);
        assert_eq!(traj.records[0].delta, 0.0);
        assert!(traj.records.iter().all(|r| r.state.truth.x.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn noisy_measurement_is_bounded() {
        let mut sc = make_example_scenario();
        sc.sim.t_final = 0.2;
        sc.sim.record_stride = 10;
        sc.noise.amplitude = 0.05;
        sc.noise.seed = 3;
        let traj = simulate(&sc).unwrap();
        let dev: Vec<f64> = traj.records.iter().map(|r| r.y - r.state.truth.x[0]).collect();
        assert!(dev.iter().all(|v| v.abs() <= 0.05));
        assert!(dev.iter().any(|v| *v != 0.0));
    }
}
