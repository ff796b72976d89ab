//! Certainty-equivalent state reconstruction
//!
//! ```text
//! x̂ = z + O_K⁻¹ M_Γ̂ (L − Q x̂0) + Ω x̂_θ0 + P x̂_B0,   Γ̂ = C_Γ η̂
//! ```
//!
//! together with the read-out of the time-varying parameters and of the
//! exosystem parameter.

use crate::error::{Error, Result};
use crate::gpebo::{FilterBank, ThetaVector};
use crate::linalg::{companion_first_col, companion_last_row, DenseMatrix};
use crate::truth::Scenario;

/// Rows `e₁ᵀA_Kⁱ`, `i = 0..n−1`. Unit lower triangular for every `K`.
pub fn ok_matrix(k: &[f64]) -> DenseMatrix {
    let n = k.len();
    let a_k = companion_first_col(k, n).expect("length matches by construction");
    let mut out = DenseMatrix::zeros(n, n);
    let mut row = vec![0.0; n];
    if n > 0 {
        row[0] = 1.0;
    }
    for i in 0..n {
        for (j, &v) in row.iter().enumerate() {
            out[(i, j)] = v;
        }
        row = a_k.vecmat(&row);
    }
    out
}

/// Inverse of a unit lower-triangular matrix by forward substitution.
pub fn unit_lower_inverse(l: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    let mut inv = DenseMatrix::identity(n);
    for c in 0..n {
        for r in (c + 1)..n {
            let s: f64 = (c..r).map(|k| l[(r, k)] * inv[(k, c)]).sum();
            inv[(r, c)] = -s;
        }
    }
    inv
}

pub fn ok_inverse(k: &[f64]) -> DenseMatrix {
    unit_lower_inverse(&ok_matrix(k))
}

/// Rows `(Γ̂ − f)ᵀ A_Γ̂ⁱ`, `i = 0..n−1`; `n × n_w`.
pub fn m_gamma_matrix(gamma_hat: &[f64], f: &[f64], n: usize) -> Result<DenseMatrix> {
    let n_w = gamma_hat.len();
    if f.len() != n_w {
        return Err(Error::Dimension(format!("Γ̂ has length {n_w} but f has length {}", f.len())));
    }
    let a_gamma = companion_last_row(gamma_hat, n_w)?;
    let mut row: Vec<f64> = gamma_hat.iter().zip(f).map(|(g, fi)| g - fi).collect();
    let mut out = DenseMatrix::zeros(n, n_w);
    for i in 0..n {
        for (j, &v) in row.iter().enumerate() {
            out[(i, j)] = v;
        }
        row = a_gamma.vecmat(&row);
    }
    Ok(out)
}

/// Output map of the observer. Caches `O_K⁻¹` since `K` is fixed.
#[derive(Clone, Debug)]
pub struct StateReconstructor {
    ok_inv: DenseMatrix,
}

impl StateReconstructor {
    pub fn new(sc: &Scenario) -> Self {
        Self {
            ok_inv: ok_inverse(&sc.gains.k),
        }
    }

    pub fn ok_inverse(&self) -> &DenseMatrix {
        &self.ok_inv
    }

    pub fn reconstruct(&self, sc: &Scenario, fb: &FilterBank, theta: &ThetaVector) -> Result<Vec<f64>> {
        let x0 = theta.x0();
        let gamma_hat = sc.gamma_of(&theta.eta);
        let m = m_gamma_matrix(&gamma_hat, &sc.gains.f, sc.dims.n)?;
        let qx = fb.q.matvec(&x0);
        let psi: Vec<f64> = fb.l.iter().zip(&qx).map(|(l, q)| l - q).collect();
        let corr = self.ok_inv.matvec(&m.matvec(&psi));
        let om = fb.omega.matvec(&theta.x_theta0);
        let pb = fb.p.matvec(&theta.x_b0);
        Ok((0..sc.dims.n).map(|i| fb.z[i] + corr[i] + om[i] + pb[i]).collect())
    }

    /// Alternative folded expression `z + O_K⁻¹ M_Γ̂ {L − [Q − (Ω P)] x̂0}`,
    /// defined only when `n_w = n`. Kept for comparison with
    /// [`StateReconstructor::reconstruct`].
    pub fn reconstruct_folded(&self, sc: &Scenario, fb: &FilterBank, theta: &ThetaVector) -> Result<Vec<f64>> {
        let d = &sc.dims;
        if d.n_w != d.n {
            return Err(Error::Dimension(format!(
                "folded reconstruction needs n_w = n, got n_w = {}, n = {}",
                d.n_w, d.n
            )));
        }
        let x0 = theta.x0();
        let gamma_hat = sc.gamma_of(&theta.eta);
        let m = m_gamma_matrix(&gamma_hat, &sc.gains.f, d.n)?;
        let mut op = fb.q.clone();
        for r in 0..d.n {
            for c in 0..d.n_theta {
                op[(r, c)] -= fb.omega[(r, c)];
            }
            for c in 0..d.n_b {
                op[(r, d.n_theta + c)] -= fb.p[(r, c)];
            }
        }
        let ox = op.matvec(&x0);
        let inner: Vec<f64> = fb.l.iter().zip(&ox).map(|(l, v)| l - v).collect();
        let corr = self.ok_inv.matvec(&m.matvec(&inner));
        Ok(fb.z.iter().zip(&corr).map(|(z, c)| z + c).collect())
    }
}

/// `(θ̂(t), B̂(t)) = (h_θ Φ_θ x̂_θ0, h_B Φ_B x̂_B0)`.
pub fn recover_tv_params(sc: &Scenario, fb: &FilterBank, theta: &ThetaVector) -> (Vec<f64>, Vec<f64>) {
    let th = sc.h_theta.matvec(&fb.phi_theta.matvec(&theta.x_theta0));
    let b = sc.h_b.matvec(&fb.phi_b.matvec(&theta.x_b0));
    (th, b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RhoEstimate {
    /// `Γ̂ = C_Γ η̂`, always present.
    pub gamma: Vec<f64>,
    /// `ρ̂ = R η̂ + r₀` when a read-out is declared.
    pub rho: Option<Vec<f64>>,
    pub notice: Option<String>,
}

pub fn recover_rho(sc: &Scenario, eta: &[f64]) -> RhoEstimate {
    let gamma = sc.gamma_of(eta);
    match &sc.rho_readout {
        Some(r) => {
            let rho = r.matrix.matvec(eta).iter().zip(&r.offset).map(|(a, b)| a + b).collect();
            RhoEstimate {
                gamma,
                rho: Some(rho),
                notice: None,
            }
        }
        None => RhoEstimate {
            gamma,
            rho: None,
            notice: Some("no rho read-out declared; reporting Gamma only".into()),
        },
    }
}
