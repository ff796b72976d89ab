//! Numerical oracles for the identities behind the observer.
//!
//! "Exponentially decaying" is checked as a negative least-squares slope of
//! `log|v|` over a window, truncated where the signal reaches the
//! round-off floor, together with a terminal magnitude below an absolute
//! floor.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimator::extended_lre_residual;
use crate::gpebo::{filters_rhs, g_jacobian, g_map, measurables, regressor_sample, selection_matrix, FilterBank, ThetaVector};
use crate::linalg::{
    char_poly, det_adjugate, dot, norm2, solve_sylvester, spectral_abscissa, symmetric_min_eigenvalue, DenseMatrix, Lu,
};
use crate::observer::{ok_matrix, StateReconstructor};
use crate::ode::{integrate, CompositeState, IntegrationConfig, Layout};
use crate::sim::{simulate, simulate_with, MixingMode, Trajectory};
use crate::truth::{truth_rhs, Scenario, TruthState};

/// Values below this are treated as exact zeros by the log fit.
pub const LOG_FIT_ZERO: f64 = 1e-14;
/// Decay windows end where the signal stays below this fraction of its peak.
pub const ROUND_OFF_FLOOR: f64 = 1e-11;
/// Grid of the auxiliary oracle integrations.
const ORACLE_STRIDE: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub max_abs_residual: f64,
    pub samples: usize,
}

/// Least-squares line through `(t, log|v|)` for samples inside `window`.
pub fn fit_exponential_decay(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    if !(window.1 > window.0) {
        return Err(Error::InsufficientData(format!("empty window [{}, {}]", window.0, window.1)));
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, v)| *t >= window.0 && *t <= window.1 && v.is_finite() && v.abs() >= LOG_FIT_ZERO)
        .map(|&(t, v)| (t, v.abs().ln()))
        .collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} usable samples in [{}, {}], need at least 10",
            pts.len(),
            window.0,
            window.1
        )));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let lm = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - lm)).sum();
    let slope = sxy / sxx;
    let intercept = lm - slope * tm;
    let max_abs_residual = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).abs())
        .fold(0.0, f64::max);
    Ok(DecayFit {
        slope,
        intercept,
        window,
        max_abs_residual,
        samples: pts.len(),
    })
}

/// Shrinks `window` so it ends at the last sample still above
/// `ROUND_OFF_FLOOR` times the peak over the window.
pub fn floor_window(series: &[(f64, f64)], window: (f64, f64)) -> (f64, f64) {
    let inside = || series.iter().filter(|(t, _)| *t >= window.0 && *t <= window.1);
    let peak = inside().map(|(_, v)| v.abs()).fold(0.0, f64::max);
    let cutoff = ROUND_OFF_FLOOR * peak;
    let end = inside()
        .filter(|(_, v)| v.abs() >= cutoff)
        .map(|(t, _)| *t)
        .fold(window.0, f64::max);
    (window.0, end.min(window.1))
}

/// Decay fit over the floor-truncated window.
pub fn fit_until_floor(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    fit_exponential_decay(series, floor_window(series, window))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub details: Vec<(String, String)>,
}

impl CheckReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            passed: true,
            details: Vec::new(),
        }
    }

    fn detail(&mut self, key: &str, value: impl std::fmt::Display) {
        self.details.push((key.to_string(), value.to_string()));
    }

    /// Records a sub-condition and folds it into `passed`.
    fn require(&mut self, key: &str, ok: bool) {
        self.details.push((key.to_string(), if ok { "ok" } else { "FAILED" }.to_string()));
        self.passed &= ok;
    }

    fn failed(name: &str, err: &Error) -> Self {
        Self {
            name: name.to_string(),
            passed: false,
            details: vec![("error".into(), err.to_string())],
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.details.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn fit_details(r: &mut CheckReport, prefix: &str, fit: &DecayFit) {
    r.detail(&format!("{prefix}.slope"), format!("{:e}", fit.slope));
    r.detail(&format!("{prefix}.window"), format!("[{:?}, {:?}]", fit.window.0, fit.window.1));
    r.detail(&format!("{prefix}.samples"), fit.samples);
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Human-readable pass/fail table.
    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut o = String::new();
        for c in &self.checks {
            let _ = writeln!(o, "{}  {:width$}", if c.passed { "PASS" } else { "FAIL" }, c.name);
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(o, "{} checks, {} failed", self.checks.len(), failed);
        o
    }

    /// Flat `key=value` text.
    pub fn to_kv(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "all_passed={}", self.passed());
        for c in &self.checks {
            let _ = writeln!(o, "{}.passed={}", c.name, c.passed);
            for (k, v) in &c.details {
                let _ = writeln!(o, "{}.{}={}", c.name, k, v);
            }
        }
        o
    }
}

fn e_n(len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[len - 1] = 1.0;
    v
}

fn outer(a: &[f64], b: &[f64]) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(a.len(), b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            m[(i, j)] = x * y;
        }
    }
    m
}

/// Runs a small autonomous linear system `ṡ = M s` and records `f(t, s)`.
fn linear_run(
    m: &DenseMatrix,
    s0: Vec<f64>,
    h: f64,
    t_final: f64,
    f: impl Fn(f64, &[f64]) -> f64,
) -> Result<Vec<(f64, f64)>> {
    let layout = Arc::new(Layout::new([("s", s0.len())]));
    let cfg = IntegrationConfig::new(h, t_final, ORACLE_STRIDE)?;
    let mut out = Vec::new();
    integrate(
        &|_, y: &[f64]| Ok(m.matvec(y)),
        CompositeState::new(layout, 0.0, s0)?,
        &cfg,
        |_, s| out.push((s.t, f(s.t, s.as_slice()))),
    )?;
    Ok(out)
}

/// `Π` from `Π S = A_K Π + e_n h_δᵀ`.
pub fn disturbance_sylvester(sc: &Scenario) -> Result<DenseMatrix> {
    let c = outer(&e_n(sc.dims.n), &sc.h_delta);
    solve_sylvester(&sc.a_k(), &sc.s, &c)
}

/// `‖e(t) − Π w(t)‖` along `ė = A_K e + e_n h_δᵀ w`, `ẇ = S w`.
pub fn sylvester_decoupling_series(sc: &Scenario, e0: &[f64], t_final: f64) -> Result<Vec<(f64, f64)>> {
    let (n, n_w) = (sc.dims.n, sc.dims.n_w);
    let pi = disturbance_sylvester(sc)?;
    let mut m = DenseMatrix::zeros(n + n_w, n + n_w);
    let a_k = sc.a_k();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = a_k[(i, j)];
        }
    }
    for j in 0..n_w {
        m[(n - 1, n + j)] = sc.h_delta[j];
        for i in 0..n_w {
            m[(n + i, n + j)] = sc.s[(i, j)];
        }
    }
    let s0 = [e0, &sc.init.w[..]].concat();
    linear_run(&m, s0, sc.sim.dt, t_final, |_, s| {
        let pw = pi.matvec(&s[n..]);
        norm2(&s[..n].iter().zip(&pw).map(|(a, b)| a - b).collect::<Vec<_>>())
    })
}

pub fn check_sylvester_decoupling(sc: &Scenario) -> Result<CheckReport> {
    let mut r = CheckReport::new("sylvester_decoupling");
    let a_k = sc.a_k();
    let pi = disturbance_sylvester(sc)?;
    let c = outer(&e_n(sc.dims.n), &sc.h_delta);
    let resid = pi.matmul(&sc.s).sub(&a_k.matmul(&pi)).sub(&c).max_abs();
    r.detail("sylvester_residual", format!("{resid:e}"));
    r.require("sylvester_residual_below_1e-10", resid < 1e-10);

    let series = sylvester_decoupling_series(sc, &sc.init.x, sc.verify.window.1)?;
    let abscissa = spectral_abscissa(&a_k)?;
    r.detail("A_K_spectral_abscissa", format!("{abscissa:e}"));
    let eps0 = series[0].1;
    if eps0 == 0.0 {
        r.detail("initial_norm", 0.0);
        r.require("identically_zero", series.iter().all(|(_, v)| *v == 0.0));
        return Ok(r);
    }
    let fit = fit_until_floor(&series, (0.5, sc.verify.window.1))?;
    fit_details(&mut r, "fit", &fit);
    r.require("slope_negative", fit.slope < 0.0);
    r.require("slope_within_A_K_bound", fit.slope <= abscissa + 0.1);
    Ok(r)
}

/// Both evaluations of the cascade residual: direct defect and the
/// filtered-state formula.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeSeries {
    pub t: Vec<f64>,
    /// `ẋ_{n_w} − Γᵀx`.
    pub defect: Vec<f64>,
    /// `h_εᵀ ξ`.
    pub formula: Vec<f64>,
}

/// Cascade `ẇ = Sw`, `ė = A_K e`, `ẋ = A_f x + e_{n_w}(q_row·w + m_row·e)`
/// from `x(0) = 0`.
pub fn cascade_series(sc: &Scenario, q_row: &[f64], m_row: &[f64], e0: &[f64], t_final: f64) -> Result<CascadeSeries> {
    let (n, n_w) = (sc.dims.n, sc.dims.n_w);
    let a_f = sc.a_f();
    let a_k = sc.a_k();
    let pi_f = solve_sylvester(&a_f, &sc.s, &outer(&e_n(n_w), q_row))?;
    let cp = char_poly(&sc.s)?;
    let gamma = crate::linalg::gamma_from_charpoly(&cp);

    // ξ = (x − Π_f w, e), F_c = [[A_f, e_{n_w} M], [0, A_K]].
    let dim = n_w + n;
    let mut f_c = DenseMatrix::zeros(dim, dim);
    for i in 0..n_w {
        for j in 0..n_w {
            f_c[(i, j)] = a_f[(i, j)];
        }
    }
    for j in 0..n {
        f_c[(n_w - 1, n_w + j)] = m_row[j];
        for i in 0..n {
            f_c[(n_w + i, n_w + j)] = a_k[(i, j)];
        }
    }
    let mut poly = DenseMatrix::identity(dim);
    for &g in cp.coeffs() {
        poly = poly.matmul(&f_c).add(&DenseMatrix::identity(dim).scale(g));
    }
    let h_eps = poly.row(0).to_vec();

    // Full state (w, e, x).
    let total = n_w + n + n_w;
    let mut m = DenseMatrix::zeros(total, total);
    for i in 0..n_w {
        for j in 0..n_w {
            m[(i, j)] = sc.s[(i, j)];
            m[(n_w + n + i, n_w + n + j)] = a_f[(i, j)];
        }
    }
    for i in 0..n {
        for j in 0..n {
            m[(n_w + i, n_w + j)] = a_k[(i, j)];
        }
    }
    let last = n_w + n + n_w - 1;
    for j in 0..n_w {
        m[(last, j)] += q_row[j];
    }
    for j in 0..n {
        m[(last, n_w + j)] += m_row[j];
    }
    let s0 = [&sc.init.w[..], e0, &vec![0.0; n_w][..]].concat();
    let layout = Arc::new(Layout::new([("s", total)]));
    let cfg = IntegrationConfig::new(sc.sim.dt, t_final, ORACLE_STRIDE)?;
    let mut out = CascadeSeries {
        t: Vec::new(),
        defect: Vec::new(),
        formula: Vec::new(),
    };
    integrate(
        &|_, y: &[f64]| Ok(m.matvec(y)),
        CompositeState::new(layout, 0.0, s0)?,
        &cfg,
        |_, s| {
            let v = s.as_slice();
            let (w, rest) = v.split_at(n_w);
            let (e, x) = rest.split_at(n);
            let xn_dot = dot(&sc.gains.f, x) + dot(q_row, w) + dot(m_row, e);
            let defect = xn_dot - dot(&gamma, x);
            let pw = pi_f.matvec(w);
            let xi: Vec<f64> = x.iter().zip(&pw).map(|(a, b)| a - b).chain(e.iter().copied()).collect();
            out.t.push(s.t);
            out.defect.push(defect);
            out.formula.push(dot(&h_eps, &xi));
        },
    )?;
    Ok(out)
}

pub fn check_cascade(sc: &Scenario) -> Result<CheckReport> {
    let mut r = CheckReport::new("cascade_residual");
    let n = sc.dims.n;
    // Driving rows as they arise from the disturbance filter: Q = e₁ᵀΠ, M = e₁ᵀ.
    let pi = disturbance_sylvester(sc)?;
    let q_row = pi.row(0).to_vec();
    let mut m_row = vec![0.0; n];
    m_row[0] = 1.0;
    let pw0 = pi.matvec(&sc.init.w);
    let e0: Vec<f64> = sc.init.x.iter().zip(&pw0).map(|(a, b)| a - b).collect();
    let s = cascade_series(sc, &q_row, &m_row, &e0, sc.verify.window.1)?;
    let agreement = s
        .defect
        .iter()
        .zip(&s.formula)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    r.detail("dual_path_max_diff", format!("{agreement:e}"));
    r.require("dual_path_agree_1e-6", agreement <= 1e-6);
    let series: Vec<(f64, f64)> = s.t.iter().copied().zip(s.defect.iter().copied()).collect();
    let peak = series.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    r.detail("peak", format!("{peak:e}"));
    if peak == 0.0 {
        r.require("identically_zero", true);
        return Ok(r);
    }
    let fit = fit_until_floor(&series, sc.verify.window)?;
    fit_details(&mut r, "fit", &fit);
    r.require("slope_negative", fit.slope < 0.0);
    let terminal = series.last().map_or(0.0, |p| p.1.abs());
    r.detail("terminal", format!("{terminal:e}"));
    r.require("terminal_below_floor", terminal < sc.verify.floor);
    Ok(r)
}

/// Regression residual `ε = Y − Ω_Lᵀθ − Ω_Nᵀ𝒦(θ)` at the true parameter.
pub fn regression_residual_series(traj: &Trajectory) -> Vec<(f64, f64)> {
    let sc = &traj.scenario;
    let theta = sc.theta_true();
    traj.records
        .iter()
        .map(|r| (r.t, r.regressor(sc).residual(&sc.dims, &theta)))
        .collect()
}

pub fn check_regression(sc: &Scenario, traj: &Trajectory) -> Result<CheckReport> {
    let mut r = CheckReport::new("regression_residual");
    let series = regression_residual_series(traj);
    r.detail("initial", format!("{:e}", series[0].1));
    let fit = fit_until_floor(&series, sc.verify.window)?;
    fit_details(&mut r, "fit", &fit);
    r.require("slope_negative", fit.slope < 0.0);
    let after20 = series.iter().filter(|p| p.0 >= 20.0).map(|p| p.1.abs()).fold(0.0, f64::max);
    r.detail("max_abs_after_t20", format!("{after20:e}"));
    let terminal = series.last().map_or(0.0, |p| p.1.abs());
    r.detail("terminal", format!("{terminal:e}"));
    r.require("terminal_below_floor", terminal < sc.verify.floor);
    Ok(r)
}

/// Open-loop record of plant and filters with the auxiliary integrals.
#[derive(Clone, Debug, PartialEq)]
pub struct OpenLoopRecord {
    pub t: f64,
    pub truth: TruthState,
    pub filters: FilterBank,
    /// Realisable `Ψ̇ = A_f Ψ + e_{n_w}(ζ − φᵀx0)`.
    pub psi: Vec<f64>,
    /// `∫ ΩᵀΩ`.
    pub info: DenseMatrix,
    /// `∫ Ωᵀ ε`.
    pub omega_eps: Vec<f64>,
    /// Regression residual at the true parameter.
    pub eps: f64,
}

/// Truth and filters only (noise-free), integrated with their own
/// auxiliary states.
pub fn open_loop_run(sc: &Scenario, h: f64, t_final: f64, stride: usize, psi0: &[f64]) -> Result<Vec<OpenLoopRecord>> {
    let d = sc.dims;
    let (nt, nf, n_w, p) = (TruthState::flat_len(&d), FilterBank::flat_len(&d), d.n_w, d.p());
    let layout = Arc::new(Layout::new([
        ("truth", nt),
        ("filters", nf),
        ("psi", n_w),
        ("info", p * p),
        ("omega_eps", p),
    ]));
    let x0 = ThetaVector::from_slice(&d, &sc.theta_true())?.x0();
    let g_true = g_map(&d, &sc.theta_true());
    let a_f = sc.a_f();
    let split = |v: &[f64]| -> Result<(TruthState, FilterBank, Vec<f64>)> {
        Ok((
            TruthState::from_flat(&d, &v[..nt]),
            FilterBank::from_flat(&d, &v[nt..nt + nf])?,
            v[nt + nf..nt + nf + n_w].to_vec(),
        ))
    };
    let rhs = |t: f64, v: &[f64]| -> Result<Vec<f64>> {
        let (truth, fb, psi) = split(v)?;
        let y = truth.x[0];
        let u = sc.input.value(t);
        let (zeta, phi) = measurables(&fb, y);
        let sample = regressor_sample(sc, t, &fb, zeta, &phi);
        let row = sample.row();
        let eps = sample.y - dot(&row, &g_true);
        let mut psi_dot = a_f.matvec(&psi);
        psi_dot[n_w - 1] += zeta - dot(&phi, &x0);
        let mut out = truth_rhs(sc, t, &truth).to_flat();
        out.extend(filters_rhs(sc, t, &fb, y, u).to_flat());
        out.extend(psi_dot);
        out.extend(outer(&row, &row).into_vec());
        out.extend(row.iter().map(|w| w * eps));
        Ok(out)
    };
    let s0 = [
        sc.initial_truth().to_flat(),
        FilterBank::initial(&d).to_flat(),
        psi0.to_vec(),
        vec![0.0; p * p + p],
    ]
    .concat();
    let cfg = IntegrationConfig::new(h, t_final, stride)?;
    let mut out = Vec::new();
    let mut failure = None;
    integrate(&rhs, CompositeState::new(layout, 0.0, s0)?, &cfg, |_, s| {
        let v = s.as_slice();
        match split(v) {
            Ok((truth, filters, psi)) => {
                let (zeta, phi) = measurables(&filters, truth.x[0]);
                let sample = regressor_sample(sc, s.t, &filters, zeta, &phi);
                let eps = sample.y - dot(&sample.row(), &g_true);
                let base = nt + nf + n_w;
                out.push(OpenLoopRecord {
                    t: s.t,
                    truth,
                    filters,
                    psi,
                    info: DenseMatrix::from_slice(p, p, &v[base..base + p * p]),
                    omega_eps: v[base + p * p..].to_vec(),
                    eps,
                });
            }
            Err(e) => failure = Some(e),
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Fitted decay slope of the regression residual is insensitive to halving
/// the step.
pub fn check_solver_independence(sc: &Scenario) -> Result<CheckReport> {
    let mut r = CheckReport::new("regression_step_independence");
    let window = (2.0, 15.0);
    let h = sc.sim.dt;
    let mut slopes = Vec::new();
    for (label, step, stride) in [("h", h, ORACLE_STRIDE), ("h_half", 0.5 * h, 2 * ORACLE_STRIDE)] {
        let run = open_loop_run(sc, step, window.1, stride, &vec![0.0; sc.dims.n_w])?;
        let series: Vec<(f64, f64)> = run.iter().map(|o| (o.t, o.eps)).collect();
        let fit = fit_until_floor(&series, window)?;
        fit_details(&mut r, label, &fit);
        slopes.push(fit.slope);
    }
    let rel = (slopes[0] - slopes[1]).abs() / slopes[0].abs();
    r.detail("relative_slope_difference", format!("{rel:e}"));
    r.require("slopes_agree_5pct", rel <= 0.05);
    Ok(r)
}

/// `x̂` at the true parameter against the plant state.
pub fn state_formula_series(traj: &Trajectory) -> Result<Vec<(f64, f64)>> {
    let sc = &traj.scenario;
    let rec = StateReconstructor::new(sc);
    let theta = ThetaVector::from_slice(&sc.dims, &sc.theta_true())?;
    traj.records
        .iter()
        .map(|r| {
            let xhat = rec.reconstruct(sc, &r.state.filters, &theta)?;
            let err: Vec<f64> = xhat.iter().zip(&r.state.truth.x).map(|(a, b)| a - b).collect();
            Ok((r.t, norm2(&err)))
        })
        .collect()
}

pub fn check_state_formula(sc: &Scenario, traj: &Trajectory) -> Result<CheckReport> {
    let mut r = CheckReport::new("state_formula");
    let series = state_formula_series(traj)?;
    let peak = series.iter().map(|p| p.1).fold(0.0, f64::max);
    r.detail("peak", format!("{peak:e}"));
    if peak == 0.0 {
        r.require("identically_zero", true);
        return Ok(r);
    }
    let fit = fit_until_floor(&series, sc.verify.window)?;
    fit_details(&mut r, "fit", &fit);
    r.require("slope_negative", fit.slope < 0.0);
    let terminal = series.last().map_or(0.0, |p| p.1);
    r.detail("terminal", format!("{terminal:e}"));
    r.require("terminal_below_floor", terminal < sc.verify.floor);
    Ok(r)
}

/// `e = x − z − Ω x_θ0 − P x_B0` against an independent integration of
/// `ė = A_K e + e_n h_δᵀ w`.
pub fn check_gpebo_error(sc: &Scenario, traj: &Trajectory) -> Result<CheckReport> {
    let mut r = CheckReport::new("gpebo_error_identity");
    let (n, n_w) = (sc.dims.n, sc.dims.n_w);
    let theta = ThetaVector::from_slice(&sc.dims, &sc.theta_true())?;
    let recorded: Vec<Vec<f64>> = traj
        .records
        .iter()
        .map(|rec| {
            let f = &rec.state.filters;
            let om = f.omega.matvec(&theta.x_theta0);
            let pb = f.p.matvec(&theta.x_b0);
            (0..n).map(|i| rec.state.truth.x[i] - f.z[i] - om[i] - pb[i]).collect()
        })
        .collect();

    let mut m = DenseMatrix::zeros(n + n_w, n + n_w);
    let a_k = sc.a_k();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = a_k[(i, j)];
        }
    }
    for j in 0..n_w {
        m[(n - 1, n + j)] = sc.h_delta[j];
        for i in 0..n_w {
            m[(n + i, n + j)] = sc.s[(i, j)];
        }
    }
    let s0 = [&recorded[0][..], &sc.init.w[..]].concat();
    let layout = Arc::new(Layout::new([("s", n + n_w)]));
    let cfg = IntegrationConfig::new(sc.sim.dt, sc.sim.t_final, sc.sim.record_stride)?;
    let mut max_diff = 0.0_f64;
    let mut k = 0;
    integrate(
        &|_, y: &[f64]| Ok(m.matvec(y)),
        CompositeState::new(layout, 0.0, s0)?,
        &cfg,
        |_, s| {
            if let Some(e) = recorded.get(k) {
                for (a, b) in s.as_slice()[..n].iter().zip(e) {
                    max_diff = max_diff.max((a - b).abs());
                }
            }
            k += 1;
        },
    )?;
    r.detail("max_abs_diff", format!("{max_diff:e}"));
    r.require("samples_aligned", k == recorded.len());
    r.require("agree_1e-6", max_diff <= 1e-6);
    Ok(r)
}

/// Realisable `Ψ` against `L − Q x0`, from matched and perturbed initial
/// conditions.
pub fn check_psi_identity(sc: &Scenario) -> Result<CheckReport> {
    let mut r = CheckReport::new("psi_identity");
    let x0 = ThetaVector::from_slice(&sc.dims, &sc.theta_true())?.x0();
    let defect = |o: &OpenLoopRecord| -> f64 {
        let qx = o.filters.q.matvec(&x0);
        let d: Vec<f64> = o.psi.iter().zip(o.filters.l.iter().zip(&qx)).map(|(p, (l, q))| p - (l - q)).collect();
        norm2(&d)
    };
    let t_final = sc.verify.window.1;
    let exact = open_loop_run(sc, sc.sim.dt, t_final, ORACLE_STRIDE, &vec![0.0; sc.dims.n_w])?;
    let max_exact = exact.iter().map(defect).fold(0.0, f64::max);
    r.detail("matched_ic_max_defect", format!("{max_exact:e}"));
    r.require("matched_ic_defect_below_1e-9", max_exact <= 1e-9);

    let psi0: Vec<f64> = (0..sc.dims.n_w).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let perturbed = open_loop_run(sc, sc.sim.dt, t_final, ORACLE_STRIDE, &psi0)?;
    let series: Vec<(f64, f64)> = perturbed.iter().map(|o| (o.t, defect(o))).collect();
    let fit = fit_until_floor(&series, (0.5, t_final))?;
    fit_details(&mut r, "perturbed_fit", &fit);
    r.require("perturbed_defect_decays", fit.slope < 0.0);
    Ok(r)
}

/// LS bookkeeping: `F⁻¹ = f₀I + α∫ΩᵀΩ` and the extended-regression residual
/// `(I − f₀F)G − (θ̂_g − f₀Fθ_g0) = −αF∫Ωᵀε`, each against an independent
/// open-loop accumulation. Decay figures of the residual are reported.
pub fn check_extended_lre(sc: &Scenario, traj: &Trajectory) -> Result<CheckReport> {
    let mut r = CheckReport::new("extended_regression_identity");
    let d = sc.dims;
    let p = d.p();
    let open = open_loop_run(sc, sc.sim.dt, sc.sim.t_final, sc.sim.record_stride, &vec![0.0; d.n_w])?;
    r.require("samples_aligned", open.len() == traj.records.len());
    let theta_true = sc.theta_true();
    let theta_g0 = sc.theta_g0();
    let (alpha, f0) = (sc.gains.alpha, sc.gains.f0);

    let mut inv_err = 0.0_f64;
    let mut ident_err = 0.0_f64;
    let mut peak = 0.0_f64;
    let mut series = Vec::with_capacity(open.len());
    for (rec, o) in traj.records.iter().zip(&open) {
        let f = &rec.state.est.f;
        let res = extended_lre_residual(&d, f, &rec.state.est.theta_g, &theta_g0, f0, &theta_true)?;
        let nrm = norm2(&res.residual);
        series.push((rec.t, nrm));
        peak = peak.max(nrm);
        let info = DenseMatrix::identity(p).scale(f0).add(&o.info.scale(alpha));
        // Relative to ‖F‖‖F⁻¹‖; carries the RK4 truncation of the Riccati flow.
        let defect = f.matmul(&info).sub(&DenseMatrix::identity(p)).max_abs();
        inv_err = inv_err.max(defect / (f.norm_inf() * info.norm_inf()));
        let predicted = f.matvec(&o.omega_eps);
        for (a, b) in res.residual.iter().zip(&predicted) {
            ident_err = ident_err.max((a + alpha * b).abs());
        }
    }
    r.detail("F_times_information_minus_I_rel", format!("{inv_err:e}"));
    r.require("F_inverse_identity_1e-6", inv_err <= 1e-6);
    let tol = 1e-6 * (1.0 + peak);
    r.detail("residual_vs_integral_max_diff", format!("{ident_err:e}"));
    r.require("residual_equals_minus_alpha_F_int_omega_eps", ident_err <= tol);
    r.detail("residual_initial", format!("{:e}", series[0].1));
    r.require("residual_initial_exactly_zero", series[0].1 == 0.0);
    match fit_exponential_decay(&series, sc.verify.window) {
        Ok(fit) => {
            r.detail("residual_fit.slope", format!("{:e}", fit.slope));
            r.detail("residual_fit.intercept", format!("{:e}", fit.intercept));
        }
        Err(e) => r.detail("residual_fit", e),
    }
    r.detail("residual_terminal", format!("{:e}", series.last().map_or(0.0, |p| p.1)));
    Ok(r)
}

/// Δ is non-decreasing in `[0, 1]` from `Δ(0) = 0`; it crosses `1e−8` in
/// finite time and stays above it afterwards.
pub fn check_delta_excitation(traj: &Trajectory) -> CheckReport {
    let mut r = CheckReport::new("delta_excitation");
    let deltas: Vec<f64> = traj.records.iter().map(|x| x.delta).collect();
    r.detail("Delta_initial", format!("{:e}", deltas[0]));
    r.require("Delta_initial_zero", deltas[0] == 0.0);
    let worst_drop = deltas.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    r.detail("max_decrease", format!("{worst_drop:e}"));
    r.require("non_decreasing_1e-9", worst_drop <= 1e-9);
    let in_range = deltas.iter().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v));
    r.require("within_0_1", in_range);
    let crossing = traj.records.iter().position(|x| x.delta > 1e-8);
    match crossing {
        Some(i) => {
            r.detail("first_crossing_1e-8", format!("{:?}", traj.records[i].t));
            r.require("above_1e-8_after_crossing", deltas[i..].iter().all(|&v| v > 1e-8));
        }
        None => {
            r.detail("first_crossing_1e-8", "not reached");
            r.require("crossing_finite", false);
        }
    }
    r.detail("Delta_final", format!("{:e}", deltas.last().copied().unwrap_or(0.0)));
    r
}

/// `F` symmetric and `0 ≺ f₀F ⪯ I` at every record.
pub fn check_ls_gain(traj: &Trajectory) -> Result<CheckReport> {
    let mut r = CheckReport::new("ls_gain_invariants");
    let f0 = traj.scenario.gains.f0;
    let mut asym = 0.0_f64;
    let mut min_f = f64::INFINITY;
    let mut min_complement = f64::INFINITY;
    for rec in &traj.records {
        let f = &rec.state.est.f;
        let scale = f.max_abs().max(f64::MIN_POSITIVE);
        asym = asym.max(f.sub(&f.transpose()).max_abs() / scale);
        let sym = f.add(&f.transpose()).scale(0.5);
        min_f = min_f.min(symmetric_min_eigenvalue(&sym)? * f0);
        let comp = DenseMatrix::identity(f.rows()).sub(&sym.scale(f0));
        min_complement = min_complement.min(symmetric_min_eigenvalue(&comp)?);
    }
    r.detail("max_relative_asymmetry", format!("{asym:e}"));
    r.require("symmetric_1e-9", asym <= 1e-9);
    r.detail("min_eig_f0F", format!("{min_f:e}"));
    r.require("positive_definite", min_f > 0.0);
    r.detail("min_eig_I_minus_f0F", format!("{min_complement:e}"));
    r.require("f0F_below_identity", min_complement >= -1e-9);
    Ok(r)
}

/// `Q_sel∇G(θ) + ∇G(θ)ᵀQ_selᵀ = 2I` at random `θ`.
pub fn check_monotonicity_margin(sc: &Scenario, samples: usize, seed: u64) -> Result<CheckReport> {
    let mut r = CheckReport::new("monotonicity_margin");
    let d = sc.dims;
    let q_sel = selection_matrix(d.q(), d.p())?;
    let two = DenseMatrix::identity(d.q()).scale(2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let theta: Vec<f64> = (0..d.q()).map(|_| rng.random_range(-10.0..=10.0)).collect();
        let qj = q_sel.matmul(&g_jacobian(&d, &theta));
        let sym = qj.add(&qj.transpose());
        worst = worst.max(sym.sub(&two).max_abs());
    }
    r.detail("samples", samples);
    r.detail("max_deviation_from_2I", format!("{worst:e}"));
    r.require("equals_2I_1e-12", worst <= 1e-12);
    Ok(r)
}

/// Estimator driven by the exact mixed regression: `|θ̃|²/(2γ)` is
/// non-increasing and falls by six orders.
pub fn check_exact_mixing(sc: &Scenario) -> Result<CheckReport> {
    let traj = simulate_with(sc, MixingMode::Exact)?;
    Ok(exact_mixing_report(&traj))
}

pub fn exact_mixing_report(traj: &Trajectory) -> CheckReport {
    let mut r = CheckReport::new("exact_mixing_lyapunov");
    let gamma = traj.scenario.gains.gamma;
    let u: Vec<f64> = traj.records.iter().map(|x| x.param_err.powi(2) / (2.0 * gamma)).collect();
    let u0 = u[0];
    let worst_rise = u.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    r.detail("U_initial", format!("{u0:e}"));
    r.detail("U_final", format!("{:e}", u.last().copied().unwrap_or(0.0)));
    r.detail("max_increase", format!("{worst_rise:e}"));
    r.require("non_increasing", worst_rise <= 1e-12 * u0.max(f64::MIN_POSITIVE));
    r.require("U_final_below_1e-6_U0", u.last().copied().unwrap_or(0.0) < 1e-6 * u0);
    r
}

/// Random-matrix properties of the dense kernels.
pub fn check_linalg_properties(seed: u64) -> Result<CheckReport> {
    let mut r = CheckReport::new("linalg_properties");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj_err = 0.0_f64;
    let mut det_err = 0.0_f64;
    let mut singular_det = 0.0_f64;
    let mut cases = 0;
    for i in 0..500 {
        let n = 1 + i % 9;
        let mut m = DenseMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                m[(a, b)] = rng.random_range(-1.0..=1.0);
            }
        }
        let singular = i % 5 == 4 && n > 1;
        if singular {
            // Last row copies a combination of the first two.
            let c = rng.random_range(-2.0..=2.0);
            for b in 0..n {
                m[(n - 1, b)] = m[(0, b)] * c + if n > 2 { m[(1, b)] } else { 0.0 };
            }
            if n == 2 {
                for b in 0..n {
                    m[(1, b)] = c * m[(0, b)];
                }
            }
        }
        let (det, adj) = det_adjugate(&m)?;
        let scale = 1.0f64.max(adj.norm_inf() * m.norm_inf());
        let prod = adj.matmul(&m).sub(&DenseMatrix::identity(n).scale(det));
        adj_err = adj_err.max(prod.max_abs() / scale);
        let lu_det = Lu::factor(&m).map(|lu| lu.det()).unwrap_or(0.0);
        let det_scale = 1.0f64.max(m.norm_inf().powi(n as i32));
        det_err = det_err.max((det - lu_det).abs() / det_scale);
        let cp = char_poly(&m)?;
        let from_cp = if n % 2 == 0 { 1.0 } else { -1.0 } * cp.coeffs()[n - 1];
        det_err = det_err.max((from_cp - det).abs() / det_scale);
        if singular {
            singular_det = singular_det.max(det.abs() / det_scale);
        }
        cases += 1;
    }
    r.detail("cases", cases);
    r.detail("adjugate_identity_max_rel", format!("{adj_err:e}"));
    r.require("adjugate_identity_1e-10", adj_err <= 1e-10);
    r.detail("det_crosscheck_max_rel", format!("{det_err:e}"));
    r.require("det_crosscheck_1e-10", det_err <= 1e-10);
    r.detail("singular_det_max_rel", format!("{singular_det:e}"));
    r.require("singular_det_near_zero", singular_det <= 1e-10);

    let mut ok_worst = 0.0_f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=6usize);
        let k: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..=10.0)).collect();
        let ok = ok_matrix(&k);
        let mut diag_prod = 1.0;
        for a in 0..n {
            diag_prod *= ok[(a, a)];
            for b in (a + 1)..n {
                ok_worst = ok_worst.max(ok[(a, b)].abs());
            }
        }
        ok_worst = ok_worst.max((diag_prod - 1.0).abs());
    }
    r.detail("O_K_unit_triangular_max_dev", format!("{ok_worst:e}"));
    r.require("O_K_unit_determinant", ok_worst == 0.0);
    Ok(r)
}

/// Every check on a noise-free copy of `sc`. Fails early only when the
/// scenario itself is invalid.
pub fn verify_all(sc: &Scenario) -> Result<VerifyReport> {
    sc.validate()?;
    let mut clean = sc.clone();
    clean.noise.amplitude = 0.0;
    let sc = &clean;

    let (main, exact) = rayon::join(|| simulate(sc), || check_exact_mixing(sc));
    let traj = main?;
    let wrap = |name: &str, r: Result<CheckReport>| r.unwrap_or_else(|e| CheckReport::failed(name, &e));

    type Job<'a> = Box<dyn Fn() -> Result<CheckReport> + Sync + 'a>;
    let jobs: Vec<(&str, Job<'_>)> = vec![
        ("sylvester_decoupling", Box::new(|| check_sylvester_decoupling(sc))),
        ("cascade_residual", Box::new(|| check_cascade(sc))),
        ("regression_residual", Box::new(|| check_regression(sc, &traj))),
        ("regression_step_independence", Box::new(|| check_solver_independence(sc))),
        ("state_formula", Box::new(|| check_state_formula(sc, &traj))),
        ("gpebo_error_identity", Box::new(|| check_gpebo_error(sc, &traj))),
        ("psi_identity", Box::new(|| check_psi_identity(sc))),
        ("extended_regression_identity", Box::new(|| check_extended_lre(sc, &traj))),
        ("delta_excitation", Box::new(|| Ok(check_delta_excitation(&traj)))),
        ("ls_gain_invariants", Box::new(|| check_ls_gain(&traj))),
        ("monotonicity_margin", Box::new(|| check_monotonicity_margin(sc, 100, 7))),
        ("linalg_properties", Box::new(|| check_linalg_properties(11))),
    ];
    use rayon::prelude::*;
    let mut checks: Vec<CheckReport> = jobs.par_iter().map(|(name, job)| wrap(name, job())).collect();
    checks.push(wrap("exact_mixing_lyapunov", exact));
    Ok(VerifyReport { checks })
}
