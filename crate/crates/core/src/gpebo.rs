//! Regression generator: the filter bank driven by `(y, u)`, the measurable
//! signals it produces and the separable nonlinear parameterisation
//!
//! ```text
//! Y = Ω_Lᵀ θ + Ω_Nᵀ 𝒦(θ) + ε,   G(θ) = (θ ; 𝒦(θ)),   𝒦_(k,j) = η_k · x0_j
//! ```
//!
//! with `θ = (x_θ0, x_B0, η)` and `x0 = (x_θ0, x_B0)`.

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix};
use crate::truth::{Dims, Scenario};

#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    /// `n_θ × n_θ`
    pub phi_theta: DenseMatrix,
    /// `n_B × n_B`
    pub phi_b: DenseMatrix,
    pub z: Vec<f64>,
    /// `n × n_θ`
    pub omega: DenseMatrix,
    /// `n × n_B`
    pub p: DenseMatrix,
    pub l: Vec<f64>,
    /// `n_w × (n_θ + n_B)`
    pub q: DenseMatrix,
}

impl FilterBank {
    /// Principal matrix solutions start at the identity; every other filter
    /// starts at zero.
    pub fn initial(d: &Dims) -> Self {
        Self {
            phi_theta: DenseMatrix::identity(d.n_theta),
            phi_b: DenseMatrix::identity(d.n_b),
            ..Self::zeros(d)
        }
    }

    pub fn zeros(d: &Dims) -> Self {
        Self {
            phi_theta: DenseMatrix::zeros(d.n_theta, d.n_theta),
            phi_b: DenseMatrix::zeros(d.n_b, d.n_b),
            z: vec![0.0; d.n],
            omega: DenseMatrix::zeros(d.n, d.n_theta),
            p: DenseMatrix::zeros(d.n, d.n_b),
            l: vec![0.0; d.n_w],
            q: DenseMatrix::zeros(d.n_w, d.n_x0()),
        }
    }

    pub fn flat_len(d: &Dims) -> usize {
        d.n_theta * d.n_theta + d.n_b * d.n_b + d.n + d.n * d.n_theta + d.n * d.n_b + d.n_w + d.n_w * d.n_x0()
    }

    /// Inverse of [`FilterBank::to_flat`]; matrices are row-major.
    pub fn from_flat(d: &Dims, v: &[f64]) -> Result<Self> {
        if v.len() != Self::flat_len(d) {
            return Err(Error::Structure(format!(
                "filter bank needs {} values, got {}",
                Self::flat_len(d),
                v.len()
            )));
        }
        let mut rest = v;
        let mut take = |len: usize| {
            let (head, tail) = rest.split_at(len);
            rest = tail;
            head
        };
        let mat = |r: usize, c: usize, s: &[f64]| DenseMatrix::from_slice(r, c, s);
        Ok(Self {
            phi_theta: mat(d.n_theta, d.n_theta, take(d.n_theta * d.n_theta)),
            phi_b: mat(d.n_b, d.n_b, take(d.n_b * d.n_b)),
            z: take(d.n).to_vec(),
            omega: mat(d.n, d.n_theta, take(d.n * d.n_theta)),
            p: mat(d.n, d.n_b, take(d.n * d.n_b)),
            l: take(d.n_w).to_vec(),
            q: mat(d.n_w, d.n_x0(), take(d.n_w * d.n_x0())),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        [
            self.phi_theta.as_slice(),
            self.phi_b.as_slice(),
            &self.z,
            self.omega.as_slice(),
            self.p.as_slice(),
            &self.l,
            self.q.as_slice(),
        ]
        .concat()
    }
}

/// `ζ = y − z₁` and `φ = (Ωᵀe₁ ; Pᵀe₁)`.
pub fn measurables(fb: &FilterBank, y: f64) -> (f64, Vec<f64>) {
    let zeta = y - fb.z[0];
    let phi = [fb.omega.row(0), fb.p.row(0)].concat();
    (zeta, phi)
}

/// Time derivative of every filter, with `ζ, φ` taken from `fb` at the same
/// instant.
pub fn filters_rhs(sc: &Scenario, t: f64, fb: &FilterBank, y: f64, u: f64) -> FilterBank {
    let a_k = sc.a_k();
    let a_f = sc.a_f();
    let n_w = sc.dims.n_w;
    let (zeta, phi) = measurables(fb, y);

    let z_dot: Vec<f64> = a_k
        .matvec(&fb.z)
        .iter()
        .zip(&sc.gains.k)
        .map(|(a, k)| a + k * y)
        .collect();
    let omega_dot = a_k.matmul(&fb.omega).add(&sc.h_theta.matmul(&fb.phi_theta).scale(y));
    let p_dot = a_k.matmul(&fb.p).add(&sc.h_b.matmul(&fb.phi_b).scale(u));
    let mut l_dot = a_f.matvec(&fb.l);
    l_dot[n_w - 1] += zeta;
    let mut q_dot = a_f.matmul(&fb.q);
    for (j, &v) in phi.iter().enumerate() {
        q_dot[(n_w - 1, j)] += v;
    }
    FilterBank {
        phi_theta: sc.a_theta.eval(t).matmul(&fb.phi_theta),
        phi_b: sc.a_b.eval(t).matmul(&fb.phi_b),
        z: z_dot,
        omega: omega_dot,
        p: p_dot,
        l: l_dot,
        q: q_dot,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressorSample {
    pub t: f64,
    pub y: f64,
    /// Length `q`.
    pub omega_l: Vec<f64>,
    /// Length `n_Γ · (n_θ + n_B)`, row-major over `(k, j)`.
    pub omega_n: Vec<f64>,
}

impl RegressorSample {
    /// The full regressor row `(Ω_L ; Ω_N)` of length `p`.
    pub fn row(&self) -> Vec<f64> {
        [&self.omega_l[..], &self.omega_n[..]].concat()
    }

    /// `Y − Ω_Lᵀθ − Ω_Nᵀ𝒦(θ)`.
    pub fn residual(&self, d: &Dims, theta: &[f64]) -> f64 {
        self.y - dot(&self.row(), &g_map(d, theta))
    }
}

/// `Y = ζ + Lᵀf`, `Ω_L = (Qᵀf + φ ; C_ΓᵀL)`, `Ω_N = −vec(C_ΓᵀQ)`.
pub fn regressor_sample(sc: &Scenario, t: f64, fb: &FilterBank, zeta: f64, phi: &[f64]) -> RegressorSample {
    let f = &sc.gains.f;
    let y = zeta + dot(&fb.l, f);
    let qt_f = fb.q.vecmat(f);
    let omega_l: Vec<f64> = qt_f
        .iter()
        .zip(phi)
        .map(|(a, b)| a + b)
        .chain(sc.c_gamma.vecmat(&fb.l))
        .collect();
    let omega_n: Vec<f64> = sc.c_gamma.transpose().matmul(&fb.q).as_slice().iter().map(|v| -v).collect();
    RegressorSample { t, y, omega_l, omega_n }
}

/// Convenience: measurables followed by [`regressor_sample`].
pub fn sample_at(sc: &Scenario, t: f64, fb: &FilterBank, y: f64) -> RegressorSample {
    let (zeta, phi) = measurables(fb, y);
    regressor_sample(sc, t, fb, zeta, &phi)
}

/// Constant unknowns `(x_θ0, x_B0, η)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaVector {
    pub x_theta0: Vec<f64>,
    pub x_b0: Vec<f64>,
    pub eta: Vec<f64>,
}

impl ThetaVector {
    pub fn from_slice(d: &Dims, v: &[f64]) -> Result<Self> {
        if v.len() != d.q() {
            return Err(Error::Dimension(format!("θ has length {}, expected {}", v.len(), d.q())));
        }
        Ok(Self {
            x_theta0: v[..d.n_theta].to_vec(),
            x_b0: v[d.n_theta..d.n_x0()].to_vec(),
            eta: v[d.n_x0()..].to_vec(),
        })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        [&self.x_theta0[..], &self.x_b0[..], &self.eta[..]].concat()
    }

    /// `(x_θ0 ; x_B0)`.
    pub fn x0(&self) -> Vec<f64> {
        [&self.x_theta0[..], &self.x_b0[..]].concat()
    }
}

/// `G(θ) = (θ ; 𝒦(θ))`, length `p`.
pub fn g_map(d: &Dims, theta: &[f64]) -> Vec<f64> {
    let nx = d.n_x0();
    let (x0, eta) = theta.split_at(nx);
    let mut g = theta.to_vec();
    g.reserve(d.n_gamma * nx);
    for &ek in eta {
        g.extend(x0.iter().map(|xj| ek * xj));
    }
    g
}

/// Exact `p × q` Jacobian of [`g_map`]: identity on top, bilinear below.
pub fn g_jacobian(d: &Dims, theta: &[f64]) -> DenseMatrix {
    let (q, nx) = (d.q(), d.n_x0());
    let mut j = DenseMatrix::zeros(d.p(), q);
    for i in 0..q {
        j[(i, i)] = 1.0;
    }
    for k in 0..d.n_gamma {
        for c in 0..nx {
            let row = q + k * nx + c;
            j[(row, c)] = theta[nx + k];
            j[(row, nx + k)] = theta[c];
        }
    }
    j
}

/// `[I_q | 0]`.
pub fn selection_matrix(q: usize, p: usize) -> Result<DenseMatrix> {
    if q > p {
        return Err(Error::Dimension(format!("selection needs q <= p, got q = {q}, p = {p}")));
    }
    let mut m = DenseMatrix::zeros(q, p);
    for i in 0..q {
        m[(i, i)] = 1.0;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truth::make_example_scenario;

    fn example_dims() -> Dims {
        make_example_scenario().dims
    }

    #[test]
    fn flat_round_trip() {
        let d = example_dims();
        let v: Vec<f64> = (0..FilterBank::flat_len(&d)).map(|i| i as f64 * 0.5 - 3.0).collect();
        let fb = FilterBank::from_flat(&d, &v).unwrap();
        assert_eq!(fb.to_flat(), v);
        assert!(FilterBank::from_flat(&d, &v[1..]).is_err());
    }

    #[test]
    fn measurables_examples() {
        let d = example_dims();
        let mut fb = FilterBank::zeros(&d);
        let (zeta, phi) = measurables(&fb, 3.0);
        assert_eq!(zeta, 3.0);
        assert!(phi.iter().all(|&v| v == 0.0));
        fb.z = vec![1.0, 0.0];
        assert_eq!(measurables(&fb, 1.0).0, 0.0);
    }

    #[test]
    fn regressor_examples() {
        let sc = make_example_scenario();
        let mut fb = FilterBank::zeros(&sc.dims);
        let r = regressor_sample(&sc, 0.0, &fb, 0.0, &[0.0; 4]);
        assert_eq!(r.y, 0.0);
        assert!(r.omega_l.iter().chain(&r.omega_n).all(|&v| v == 0.0));

        fb.l = vec![1.0, 2.0];
        let r = regressor_sample(&sc, 0.0, &fb, 5.0, &[0.0; 4]);
        assert_eq!(r.y, 0.0);

        fb.q = DenseMatrix::from_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let r = regressor_sample(&sc, 0.0, &fb, 0.0, &[0.0; 4]);
        assert_eq!(r.omega_n, vec![-1.0, -2.0, -3.0, -4.0]);
        assert_eq!(r.omega_l.len(), 5);
        assert_eq!(r.row().len(), 9);
    }

    #[test]
    fn filters_at_rest_keep_principal_solutions_moving() {
        let mut sc = make_example_scenario();
        sc.a_b = crate::truth::TimeVaryingMatrix::zeros(2, 2);
        let fb = FilterBank::initial(&sc.dims);
        let d = filters_rhs(&sc, 0.0, &fb, 0.0, 0.0);
        assert_eq!(d.phi_theta.as_slice(), &[-0.001, 0.0, 0.0, -0.002]);
        assert!(d.phi_b.as_slice().iter().all(|&v| v == 0.0));
        assert!(d.z.iter().chain(&d.l).all(|&v| v == 0.0));

        let zero = FilterBank::zeros(&sc.dims);
        let d = filters_rhs(&sc, 0.0, &zero, 0.0, 0.0);
        assert!(d.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn g_map_example_values() {
        let d = example_dims();
        let g = g_map(&d, &[-2.0, -1.0, 0.7, 0.2, -1.0]);
        assert_eq!(g, vec![-2.0, -1.0, 0.7, 0.2, -1.0, 2.0, 1.0, -0.7, -0.2]);
        assert_eq!(g_map(&d, &[0.0; 5]), vec![0.0; 9]);
        let j = g_jacobian(&d, &[0.0; 5]);
        for r in 0..9 {
            for c in 0..5 {
                assert_eq!(j[(r, c)], if r == c { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn selection_examples() {
        let s = selection_matrix(5, 9).unwrap();
        assert_eq!((s.rows(), s.cols()), (5, 9));
        let theta = [0.3, -1.0, 2.0, 4.0, -0.5];
        assert_eq!(s.matvec(&g_map(&example_dims(), &theta)), theta.to_vec());
        assert_eq!(selection_matrix(3, 3).unwrap(), DenseMatrix::identity(3));
        assert!(selection_matrix(4, 3).is_err());
    }

    #[test]
    fn theta_vector_split() {
        let d = example_dims();
        let t = ThetaVector::from_slice(&d, &[-2.0, -1.0, 0.7, 0.2, -1.0]).unwrap();
        assert_eq!(t.x0(), vec![-2.0, -1.0, 0.7, 0.2]);
        assert_eq!(t.eta, vec![-1.0]);
        assert_eq!(t.to_vec().len(), 5);
    }
}
