//! Interlaced LS + DREM estimator.
//!
//! ```text
//! θ̂̇_g = α F Ωᵀ (Y − Ω θ̂_g)           F(0) = I / f₀
//! Ḟ    = −α F Ωᵀ Ω F
//! Δ    = det(I − f₀F),   𝒴 = adj(I − f₀F)(θ̂_g − f₀F θ_g0)
//! θ̂̇   = γ Q_sel Δ (𝒴 − Δ G(θ̂))
//! ```

use crate::error::{Error, Result};
use crate::gpebo::{g_map, RegressorSample};
use crate::linalg::{det_adjugate, dot, symmetric_min_eigenvalue, DenseMatrix};
use crate::truth::{Dims, Gains, Scenario};

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorState {
    /// LS estimate of `G(θ)`, length `p`.
    pub theta_g: Vec<f64>,
    /// `p × p` LS gain.
    pub f: DenseMatrix,
    /// Mixed estimate of `θ`, length `q`.
    pub theta: Vec<f64>,
}

impl EstimatorState {
    pub fn initial(sc: &Scenario) -> Self {
        let p = sc.dims.p();
        Self {
            theta_g: sc.theta_g0(),
            f: DenseMatrix::identity(p).scale(1.0 / sc.gains.f0),
            theta: sc.theta0(),
        }
    }

    pub fn flat_len(d: &Dims) -> usize {
        d.p() + d.p() * d.p() + d.q()
    }

    pub fn from_flat(d: &Dims, v: &[f64]) -> Result<Self> {
        let (p, q) = (d.p(), d.q());
        if v.len() != Self::flat_len(d) {
            return Err(Error::Structure(format!(
                "estimator state needs {} values, got {}",
                Self::flat_len(d),
                v.len()
            )));
        }
        Ok(Self {
            theta_g: v[..p].to_vec(),
            f: DenseMatrix::from_slice(p, p, &v[p..p + p * p]),
            theta: v[p + p * p..p + p * p + q].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        [&self.theta_g[..], self.f.as_slice(), &self.theta[..]].concat()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DremSample {
    pub delta: f64,
    /// `𝒴`, length `p`.
    pub y_mix: Vec<f64>,
}

/// `I − f₀F`.
fn mixing_matrix(f: &DenseMatrix, f0: f64) -> DenseMatrix {
    DenseMatrix::identity(f.rows()).sub(&f.scale(f0))
}

/// `θ̂_g − f₀F θ_g0`.
fn shifted_estimate(f: &DenseMatrix, theta_g: &[f64], theta_g0: &[f64], f0: f64) -> Vec<f64> {
    let ft = f.matvec(theta_g0);
    theta_g.iter().zip(&ft).map(|(a, b)| a - f0 * b).collect()
}

/// Determinant / adjugate mixing. A singular `I − f₀F` is legitimate and
/// gives `Δ = 0`.
pub fn drem_transform(f: &DenseMatrix, theta_g: &[f64], theta_g0: &[f64], f0: f64) -> Result<DremSample> {
    let (delta, adj) = det_adjugate(&mixing_matrix(f, f0))?;
    let y_mix = adj.matvec(&shifted_estimate(f, theta_g, theta_g0, f0));
    Ok(DremSample { delta, y_mix })
}

/// Derivative of the estimator state given the same-instant regressor.
pub fn estimator_rhs(
    d: &Dims,
    st: &EstimatorState,
    sample: &RegressorSample,
    gains: &Gains,
    theta_g0: &[f64],
    q_sel: &DenseMatrix,
) -> Result<EstimatorState> {
    let omega = sample.row();
    let fo = st.f.matvec(&omega);
    let err = sample.y - dot(&omega, &st.theta_g);
    let theta_g_dot: Vec<f64> = fo.iter().map(|v| gains.alpha * err * v).collect();

    // F Ωᵀ Ω F = (FΩᵀ)(FΩᵀ)ᵀ for symmetric F; written as an outer product of
    // FΩᵀ with ΩF to avoid assuming symmetry.
    let of = st.f.vecmat(&omega);
    let p = omega.len();
    let mut f_dot = DenseMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            f_dot[(i, j)] = -gains.alpha * fo[i] * of[j];
        }
    }

    let drem = drem_transform(&st.f, &st.theta_g, theta_g0, gains.f0)?;
    let g_hat = g_map(d, &st.theta);
    let mixed: Vec<f64> = drem
        .y_mix
        .iter()
        .zip(&g_hat)
        .map(|(y, g)| gains.gamma * drem.delta * (y - drem.delta * g))
        .collect();
    let theta_dot = q_sel.matvec(&mixed);

    let out = EstimatorState {
        theta_g: theta_g_dot,
        f: f_dot,
        theta: theta_dot,
    };
    if !out.to_flat().iter().all(|v| v.is_finite()) {
        return Err(Error::BlowUp {
            t: sample.t,
            detail: "non-finite estimator derivative".into(),
        });
    }
    Ok(out)
}

/// Residual of the extended regression at the true parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedResidual {
    /// `(I − f₀F)G(θ) − (θ̂_g − f₀Fθ_g0)`.
    pub residual: Vec<f64>,
    /// `𝒴 − Δ·G(θ)`, equal to `−adj(I − f₀F) · residual`.
    pub mixed: Vec<f64>,
}

pub fn extended_lre_residual(
    d: &Dims,
    f: &DenseMatrix,
    theta_g: &[f64],
    theta_g0: &[f64],
    f0: f64,
    theta_true: &[f64],
) -> Result<ExtendedResidual> {
    let g = g_map(d, theta_true);
    let m = mixing_matrix(f, f0);
    let lhs = m.matvec(&g);
    let shifted = shifted_estimate(f, theta_g, theta_g0, f0);
    let residual: Vec<f64> = lhs.iter().zip(&shifted).map(|(a, b)| a - b).collect();
    let drem = drem_transform(f, theta_g, theta_g0, f0)?;
    let mixed = drem.y_mix.iter().zip(&g).map(|(y, gi)| y - drem.delta * gi).collect();
    Ok(ExtendedResidual { residual, mixed })
}

/// Excitation diagnostics over a recorded run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExcitationReport {
    /// `∫ ΩᵀΩ dt` over `[t₀, t₀ + t_c]` (trapezoidal on the recording grid).
    pub gram: DenseMatrix,
    /// Lower bound on the smallest eigenvalue of `gram`.
    pub gram_min_eig: f64,
    /// `(threshold, first recorded time with Δ > threshold)`.
    pub first_crossing: Vec<(f64, Option<f64>)>,
    pub delta_initial: f64,
    /// Extremes of Δ over recorded times `t > t₀ + t_c`; `None` when there
    /// are no such samples.
    pub delta_after: Option<(f64, f64)>,
}

pub const DELTA_THRESHOLDS: [f64; 3] = [1e-8, 1e-6, 1e-4];

/// `times`, `deltas` and `rows` (regressor rows) share one recording grid.
pub fn excitation_report(times: &[f64], deltas: &[f64], rows: &[Vec<f64>], t_c: f64) -> Result<ExcitationReport> {
    if times.is_empty() || times.len() != deltas.len() || times.len() != rows.len() {
        return Err(Error::InsufficientData(format!(
            "excitation report needs equal non-empty series, got {} / {} / {}",
            times.len(),
            deltas.len(),
            rows.len()
        )));
    }
    let p = rows[0].len();
    let t0 = times[0];
    let mut gram = DenseMatrix::zeros(p, p);
    for i in 1..times.len() {
        if times[i] > t0 + t_c + 1e-12 {
            break;
        }
        let dt = times[i] - times[i - 1];
        for r in 0..p {
            for c in 0..p {
                gram[(r, c)] += 0.5 * dt * (rows[i - 1][r] * rows[i - 1][c] + rows[i][r] * rows[i][c]);
            }
        }
    }
    let gram_min_eig = symmetric_min_eigenvalue(&gram)?;
    let first_crossing = DELTA_THRESHOLDS
        .iter()
        .map(|&thr| (thr, times.iter().zip(deltas).find(|(_, &dv)| dv > thr).map(|(&t, _)| t)))
        .collect();
    let after: Vec<f64> = times
        .iter()
        .zip(deltas)
        .filter(|(&t, _)| t > t0 + t_c)
        .map(|(_, &dv)| dv)
        .collect();
    let delta_after = (!after.is_empty()).then(|| {
        after
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    });
    Ok(ExcitationReport {
        gram,
        gram_min_eig,
        first_crossing,
        delta_initial: deltas[0],
        delta_after,
    })
}
