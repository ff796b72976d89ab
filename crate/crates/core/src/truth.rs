//! Ground truth: the uncertain LTV plant, the LTV parameter generators and
//! the exosystem producing the additive disturbance.
//!
//! ```text
//! ẋ   = A x + θ(t) x₁ + B(t) u(t) + eₙ δ(t),   y = x₁
//! ẋ_θ = A_θ(t) x_θ,   θ(t) = h_θ x_θ
//! ẋ_B = A_B(t) x_B,   B(t) = h_B x_B
//! ẇ   = S w,          δ(t) = h_δᵀ w
//! ```
//!
//! The observer never sees the initial conditions stored here.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    self, char_poly, companion_first_col, companion_last_row, gamma_from_charpoly, is_hurwitz,
    solve_sylvester, DenseMatrix,
};

/// `a + b·sin(ω t + φ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SinusoidEntry {
    pub a: f64,
    pub b: f64,
    pub omega: f64,
    pub phase: f64,
}

impl SinusoidEntry {
    pub fn constant(a: f64) -> Self {
        Self {
            a,
            ..Default::default()
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        if self.b == 0.0 {
            self.a
        } else {
            self.a + self.b * (self.omega * t + self.phase).sin()
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }
}

/// Matrix whose entries are each constant plus one sinusoid.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeVaryingMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<SinusoidEntry>,
}

impl TimeVaryingMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![SinusoidEntry::default(); rows * cols],
        }
    }

    pub fn constant(m: &DenseMatrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            entries: m.as_slice().iter().map(|&a| SinusoidEntry::constant(a)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, r: usize, c: usize) -> &SinusoidEntry {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, e: SinusoidEntry) {
        self.entries[r * self.cols + c] = e;
    }

    pub fn eval(&self, t: f64) -> DenseMatrix {
        let data = self.entries.iter().map(|e| e.value(t)).collect::<Vec<_>>();
        DenseMatrix::from_slice(self.rows, self.cols, &data)
    }

    fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|e| [e.a, e.b, e.omega, e.phase].iter().all(|v| v.is_finite()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SineTerm {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

/// Scalar input `u(t) = c + Σ aᵢ sin(ωᵢ t + φᵢ)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InputSignal {
    pub constant: f64,
    pub terms: Vec<SineTerm>,
}

impl InputSignal {
    pub fn value(&self, t: f64) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|s| s.amplitude * (s.omega * t + s.phase).sin())
                .sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub n_theta: usize,
    pub n_b: usize,
    pub n_w: usize,
    pub n_gamma: usize,
}

impl Dims {
    /// `n_θ + n_B`: length of the unknown initial-condition block.
    pub fn n_x0(&self) -> usize {
        self.n_theta + self.n_b
    }

    /// Length of the constant parameter vector `θ = (x_θ0, x_B0, η)`.
    pub fn q(&self) -> usize {
        self.n_x0() + self.n_gamma
    }

    /// Length of the extended parameter `G(θ)`.
    pub fn p(&self) -> usize {
        self.q() + self.n_gamma * self.n_x0()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gains {
    pub k: Vec<f64>,
    pub f: Vec<f64>,
    pub f0: f64,
    pub alpha: f64,
    pub gamma: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NoiseSpec {
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialConditions {
    pub x: Vec<f64>,
    pub x_theta: Vec<f64>,
    pub x_b: Vec<f64>,
    pub w: Vec<f64>,
}

/// Affine read-out `ρ = R η + r₀` of the exosystem parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct RhoReadout {
    pub matrix: DenseMatrix,
    pub offset: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimSettings {
    pub t_final: f64,
    pub dt: f64,
    pub record_stride: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            t_final: 100.0,
            dt: 1e-3,
            record_stride: 100,
        }
    }
}

/// Thresholds for the "exponentially decaying" checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifySettings {
    pub window: (f64, f64),
    pub floor: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            window: (5.0, 50.0),
            floor: 1e-6,
        }
    }
}

/// Full problem description. The initial conditions are hidden from the
/// observer; everything else is known to it.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub dims: Dims,
    pub a_theta: TimeVaryingMatrix,
    pub a_b: TimeVaryingMatrix,
    pub h_theta: DenseMatrix,
    pub h_b: DenseMatrix,
    pub s: DenseMatrix,
    pub h_delta: Vec<f64>,
    /// `Γ = C_Γ η`.
    pub c_gamma: DenseMatrix,
    pub eta: Vec<f64>,
    pub init: InitialConditions,
    pub input: InputSignal,
    pub gains: Gains,
    pub noise: NoiseSpec,
    /// LS initial guess for `G(θ)`; zeros when absent.
    pub theta_g0: Option<Vec<f64>>,
    /// Initial estimate of `θ`; zeros when absent.
    pub theta0: Option<Vec<f64>>,
    pub rho_readout: Option<RhoReadout>,
    pub sim: SimSettings,
    pub verify: VerifySettings,
}

/// Slow-gain variant of the example tuning.
pub const SLOW_GAINS: (f64, f64) = (0.1, 1.0);

/// The worked numerical example: a 2-state plant with slowly decaying `θ(t)`,
/// a Mathieu-type `B(t)` generator and a harmonic disturbance of unknown
/// frequency parameter `ρ = −1`.
pub fn make_example_scenario() -> Scenario {
    let dims = Dims {
        n: 2,
        n_theta: 2,
        n_b: 2,
        n_w: 2,
        n_gamma: 1,
    };
    let a_theta = TimeVaryingMatrix::constant(&DenseMatrix::diagonal(&[-0.001, -0.002]));
    let mut a_b = TimeVaryingMatrix::zeros(2, 2);
    a_b.set(0, 1, SinusoidEntry::constant(1.0));
    a_b.set(
        1,
        0,
        SinusoidEntry {
            a: -1.0,
            b: 0.1,
            omega: 1.0,
            phase: 0.0,
        },
    );
    let rho = -1.0;
    let s = DenseMatrix::from_slice(2, 2, &[0.0, 1.0, rho, 0.0]);
    Scenario {
        dims,
        a_theta,
        a_b,
        h_theta: DenseMatrix::identity(2),
        h_b: DenseMatrix::identity(2),
        s,
        h_delta: vec![1.0, 0.0],
        c_gamma: DenseMatrix::from_slice(2, 1, &[1.0, 0.0]),
        eta: vec![rho],
        init: InitialConditions {
            // Not given for the example; the plant starts at rest.
            x: vec![0.0, 0.0],
            x_theta: vec![-2.0, -1.0],
            x_b: vec![0.7, 0.2],
            w: vec![-10.0, 1.0],
        },
        input: InputSignal {
            constant: 10.0,
            terms: vec![SineTerm {
                amplitude: 1.0,
                omega: 0.5,
                phase: 0.0,
            }],
        },
        gains: Gains {
            k: vec![7.5, 25.0],
            f: vec![-1.0, -2.0],
            f0: 0.001,
            alpha: 100.0,
            gamma: 100.0,
        },
        noise: NoiseSpec::default(),
        theta_g0: None,
        theta0: None,
        rho_readout: Some(RhoReadout {
            matrix: DenseMatrix::identity(1),
            offset: vec![0.0],
        }),
        sim: SimSettings::default(),
        verify: VerifySettings::default(),
    }
}

impl Scenario {
    /// Example scenario with the slow tuning `f₀ = 0.1, α = 1`.
    pub fn with_slow_gains(mut self) -> Self {
        self.gains.f0 = SLOW_GAINS.0;
        self.gains.alpha = SLOW_GAINS.1;
        self
    }

    pub fn a_k(&self) -> DenseMatrix {
        companion_first_col(&self.gains.k, self.dims.n).expect("validated K length")
    }

    pub fn a_f(&self) -> DenseMatrix {
        companion_last_row(&self.gains.f, self.dims.n_w).expect("validated f length")
    }

    /// `Γ = C_Γ η` for an arbitrary `η`.
    pub fn gamma_of(&self, eta: &[f64]) -> Vec<f64> {
        self.c_gamma.matvec(eta)
    }

    /// True constant parameter vector `(x_θ0, x_B0, η)`.
    pub fn theta_true(&self) -> Vec<f64> {
        [&self.init.x_theta[..], &self.init.x_b[..], &self.eta[..]].concat()
    }

    pub fn theta_g0(&self) -> Vec<f64> {
        self.theta_g0.clone().unwrap_or_else(|| vec![0.0; self.dims.p()])
    }

    pub fn theta0(&self) -> Vec<f64> {
        self.theta0.clone().unwrap_or_else(|| vec![0.0; self.dims.q()])
    }

    pub fn initial_truth(&self) -> TruthState {
        TruthState {
            x: self.init.x.clone(),
            x_theta: self.init.x_theta.clone(),
            x_b: self.init.x_b.clone(),
            w: self.init.w.clone(),
        }
    }

    /// Checks shapes and the structural conditions on the tuning. Returns
    /// non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let d = &self.dims;
        for (name, v) in [
            ("dims.n", d.n),
            ("dims.n_theta", d.n_theta),
            ("dims.n_B", d.n_b),
            ("dims.n_w", d.n_w),
            ("dims.n_Gamma", d.n_gamma),
        ] {
            if v == 0 {
                return Err(Error::scenario(name, "must be positive"));
            }
        }
        let shape = |field: &str, m: &DenseMatrix, r: usize, c: usize| -> Result<()> {
            if m.rows() != r || m.cols() != c {
                return Err(Error::scenario(
                    field,
                    format!("expected {r}x{c}, got {}x{}", m.rows(), m.cols()),
                ));
            }
            if !m.is_finite() {
                return Err(Error::scenario(field, "non-finite entry"));
            }
            Ok(())
        };
        let length = |field: &str, v: &[f64], n: usize| -> Result<()> {
            if v.len() != n {
                return Err(Error::scenario(field, format!("expected length {n}, got {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::scenario(field, "non-finite entry"));
            }
            Ok(())
        };
        for (field, m, r) in [("A_theta", &self.a_theta, d.n_theta), ("A_B", &self.a_b, d.n_b)] {
            if m.rows() != r || m.cols() != r {
                return Err(Error::scenario(field, format!("expected {r}x{r}")));
            }
            if !m.is_finite() {
                return Err(Error::scenario(field, "non-finite entry"));
            }
        }
        shape("h_theta", &self.h_theta, d.n, d.n_theta)?;
        shape("h_B", &self.h_b, d.n, d.n_b)?;
        shape("S", &self.s, d.n_w, d.n_w)?;
        shape("C_Gamma", &self.c_gamma, d.n_w, d.n_gamma)?;
        length("h_delta", &self.h_delta, d.n_w)?;
        length("eta", &self.eta, d.n_gamma)?;
        length("init.x", &self.init.x, d.n)?;
        length("init.x_theta", &self.init.x_theta, d.n_theta)?;
        length("init.x_B", &self.init.x_b, d.n_b)?;
        length("init.w", &self.init.w, d.n_w)?;
        length("gains.K", &self.gains.k, d.n)?;
        length("gains.f", &self.gains.f, d.n_w)?;
        if let Some(v) = &self.theta_g0 {
            length("estimator.theta_g0", v, d.p())?;
        }
        if let Some(v) = &self.theta0 {
            length("estimator.theta0", v, d.q())?;
        }
        for (field, v) in [
            ("gains.f0", self.gains.f0),
            ("gains.alpha", self.gains.alpha),
            ("gains.gamma", self.gains.gamma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::scenario(field, format!("must be > 0, got {v}")));
            }
        }
        if !(self.noise.amplitude >= 0.0 && self.noise.amplitude.is_finite()) {
            return Err(Error::scenario("noise.amplitude", "must be >= 0"));
        }
        // Scenario files store integers as signed 64-bit.
        if self.noise.seed > i64::MAX as u64 {
            return Err(Error::scenario("noise.seed", format!("must be at most {}", i64::MAX)));
        }
        if let Some(r) = &self.rho_readout {
            if r.matrix.cols() != d.n_gamma || r.offset.len() != r.matrix.rows() {
                return Err(Error::scenario(
                    "rho",
                    format!(
                        "read-out must be (n_rho x {}) with matching offset, got {}x{} and {}",
                        d.n_gamma,
                        r.matrix.rows(),
                        r.matrix.cols(),
                        r.offset.len()
                    ),
                ));
            }
        }

        let a_k = self.a_k();
        if !is_hurwitz(&a_k).map_err(|e| Error::scenario("gains.K", e.to_string()))? {
            return Err(Error::scenario("gains.K", "A_K is not Hurwitz"));
        }
        let a_f = self.a_f();
        if !is_hurwitz(&a_f).map_err(|e| Error::scenario("gains.f", e.to_string()))? {
            return Err(Error::scenario("gains.f", "A_f is not Hurwitz"));
        }

        let mut c = DenseMatrix::zeros(d.n, d.n_w);
        for (j, &h) in self.h_delta.iter().enumerate() {
            c[(d.n - 1, j)] = h;
        }
        solve_sylvester(&a_k, &self.s, &c).map_err(|e| Error::scenario("S", format!("against A_K: {e}")))?;
        let mut c_f = DenseMatrix::zeros(d.n_w, d.n_w);
        c_f[(d.n_w - 1, 0)] = 1.0;
        solve_sylvester(&a_f, &self.s, &c_f).map_err(|e| Error::scenario("S", format!("against A_f: {e}")))?;

        let gamma = gamma_from_charpoly(&char_poly(&self.s)?);
        let declared = self.gamma_of(&self.eta);
        let mismatch = linalg::norm2(&linalg::sub_vec(&gamma, &declared));
        if mismatch > 1e-9 * (1.0 + linalg::norm2(&gamma)) {
            return Err(Error::scenario(
                "C_Gamma",
                format!("C_Gamma * eta = {declared:?} but the characteristic polynomial of S gives Gamma = {gamma:?}"),
            ));
        }

        let mut warnings = Vec::new();
        // Eigenvalues of S should have non-negative real part: −S − εI Hurwitz.
        let probe = self.s.scale(-1.0).sub(&DenseMatrix::identity(d.n_w).scale(1e-6));
        if !is_hurwitz(&probe).unwrap_or(false) {
            warnings.push("S has eigenvalues with negative real part; the disturbance has decaying modes".into());
        }
        if d.p() > 20 {
            warnings.push(format!(
                "extended parameter dimension p = {} exceeds ~20; adjugate evaluation per step is O(p^4)",
                d.p()
            ));
        }
        Ok(warnings)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthState {
    pub x: Vec<f64>,
    pub x_theta: Vec<f64>,
    pub x_b: Vec<f64>,
    pub w: Vec<f64>,
}

impl TruthState {
    pub fn flat_len(d: &Dims) -> usize {
        d.n + d.n_theta + d.n_b + d.n_w
    }

    pub fn from_flat(d: &Dims, v: &[f64]) -> Self {
        let (x, rest) = v.split_at(d.n);
        let (x_theta, rest) = rest.split_at(d.n_theta);
        let (x_b, rest) = rest.split_at(d.n_b);
        Self {
            x: x.to_vec(),
            x_theta: x_theta.to_vec(),
            x_b: x_b.to_vec(),
            w: rest[..d.n_w].to_vec(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        [&self.x[..], &self.x_theta[..], &self.x_b[..], &self.w[..]].concat()
    }

    pub fn theta_tv(&self, sc: &Scenario) -> Vec<f64> {
        sc.h_theta.matvec(&self.x_theta)
    }

    pub fn b_tv(&self, sc: &Scenario) -> Vec<f64> {
        sc.h_b.matvec(&self.x_b)
    }

    pub fn disturbance(&self, sc: &Scenario) -> f64 {
        linalg::dot(&sc.h_delta, &self.w)
    }
}

pub fn truth_rhs(sc: &Scenario, t: f64, s: &TruthState) -> TruthState {
    let n = sc.dims.n;
    let theta = s.theta_tv(sc);
    let b = s.b_tv(sc);
    let u = sc.input.value(t);
    let delta = s.disturbance(sc);
    let x1 = s.x[0];
    let mut dx: Vec<f64> = (0..n)
        .map(|i| {
            let shift = if i + 1 < n { s.x[i + 1] } else { 0.0 };
            shift + theta[i] * x1 + b[i] * u
        })
        .collect();
    dx[n - 1] += delta;
    TruthState {
        x: dx,
        x_theta: sc.a_theta.eval(t).matvec(&s.x_theta),
        x_b: sc.a_b.eval(t).matvec(&s.x_b),
        w: sc.s.matvec(&s.w),
    }
}

/// Seeded bounded measurement noise, uniform on `[−1, 1]`.
#[derive(Clone, Debug)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn sample(&mut self) -> f64 {
        self.rng.random_range(-1.0..=1.0)
    }
}

/// `y = x₁ + a·ν` with `ν` the next draw from `noise` (not drawn at all when
/// the amplitude is zero).
pub fn measure(sc: &Scenario, s: &TruthState, noise: &mut NoiseSource) -> f64 {
    if sc.noise.amplitude == 0.0 {
        s.x[0]
    } else {
        s.x[0] + sc.noise.amplitude * noise.sample()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_validates() {
        let sc = make_example_scenario();
        let warnings = sc.validate().unwrap();
        assert!(warnings.is_empty(), "{warnings:?}");
    }

    #[test]
    fn example_parameter_vector() {
        let sc = make_example_scenario();
        assert_eq!(sc.theta_true(), vec![-2.0, -1.0, 0.7, 0.2, -1.0]);
        assert_eq!(sc.dims.q(), 5);
        assert_eq!(sc.dims.p(), 9);
        assert_eq!(sc.a_b.eval(0.0).as_slice(), &[0.0, 1.0, -1.0, 0.0]);
    }

    #[test]
    fn zero_state_zero_input_has_zero_derivative() {
        let mut sc = make_example_scenario();
        sc.input = InputSignal::default();
        let z = TruthState {
            x: vec![0.0; 2],
            x_theta: vec![0.0; 2],
            x_b: vec![0.0; 2],
            w: vec![0.0; 2],
        };
        let d = truth_rhs(&sc, 1.3, &z);
        assert!(d.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn initial_disturbance() {
        let sc = make_example_scenario();
        assert_eq!(sc.initial_truth().disturbance(&sc), -10.0);
    }

    #[test]
    fn rhs_is_linear_in_state() {
        let mut sc = make_example_scenario();
        sc.input = InputSignal::default();
        let s = TruthState {
            x: vec![0.3, -1.2],
            x_theta: vec![-2.0, 0.5],
            x_b: vec![0.7, 0.1],
            w: vec![1.0, -4.0],
        };
        // θ(t)·x₁ is bilinear in (x_θ, x); with x_θ = 0 the rest is linear.
        let mut lin = s.clone();
        lin.x_theta = vec![0.0; 2];
        let alpha = 2.5;
        let scaled = TruthState::from_flat(&sc.dims, &lin.to_flat().iter().map(|v| alpha * v).collect::<Vec<_>>());
        let a = truth_rhs(&sc, 0.8, &scaled).to_flat();
        let b: Vec<f64> = truth_rhs(&sc, 0.8, &lin).to_flat().iter().map(|v| alpha * v).collect();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn exosystem_returns_after_one_period() {
        let sc = make_example_scenario();
        let layout = std::sync::Arc::new(crate::ode::Layout::new([("w", 2)]));
        let steps = 20_000;
        let cfg = crate::ode::IntegrationConfig::new(2.0 * std::f64::consts::PI / steps as f64, 2.0 * std::f64::consts::PI, steps)
            .unwrap();
        let s0 = crate::ode::CompositeState::new(layout, 0.0, sc.init.w.clone()).unwrap();
        let end = crate::ode::integrate(&|_, w: &[f64]| Ok(sc.s.matvec(w)), s0, &cfg, |_, _| {}).unwrap();
        for (a, b) in end.as_slice().iter().zip(&sc.init.w) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn noise_is_bounded_and_seeded() {
        let mut a = NoiseSource::new(7);
        let mut b = NoiseSource::new(7);
        for _ in 0..1000 {
            let (x, y) = (a.sample(), b.sample());
            assert_eq!(x, y);
            assert!((-1.0..=1.0).contains(&x));
        }
        let mut sc = make_example_scenario();
        let s = sc.initial_truth();
        let mut src = NoiseSource::new(1);
        assert_eq!(measure(&sc, &s, &mut src), s.x[0]);
        sc.noise.amplitude = 0.05;
        for _ in 0..100 {
            assert!((measure(&sc, &s, &mut src) - s.x[0]).abs() <= 0.05);
        }
    }

    #[test]
    fn validation_names_fields() {
        let mut sc = make_example_scenario();
        sc.gains.k = vec![0.0, 0.0];
        match sc.validate() {
            Err(Error::Scenario { field, .. }) => assert_eq!(field, "gains.K"),
            other => panic!("{other:?}"),
        }
        let mut sc = make_example_scenario();
        sc.noise.seed = u64::MAX;
        match sc.validate() {
            Err(Error::Scenario { field, .. }) => assert_eq!(field, "noise.seed"),
            other => panic!("{other:?}"),
        }
        let mut sc = make_example_scenario();
        sc.eta = vec![-2.0];
        match sc.validate() {
            Err(Error::Scenario { field, .. }) => assert_eq!(field, "C_Gamma"),
            other => panic!("{other:?}"),
        }
        let mut sc = make_example_scenario();
        sc.s = sc.a_k();
        match sc.validate() {
            Err(Error::Scenario { field, reason }) => {
                assert_eq!(field, "S");
                assert!(reason.contains("spectra not disjoint"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stable_exosystem_warns() {
        let mut sc = make_example_scenario();
        sc.s = DenseMatrix::from_slice(2, 2, &[0.0, 1.0, -1.0, -0.5]);
        let gamma = gamma_from_charpoly(&char_poly(&sc.s).unwrap());
        sc.c_gamma = DenseMatrix::identity(2);
        sc.dims.n_gamma = 2;
        sc.eta = gamma;
        sc.rho_readout = None;
        let w = sc.validate().unwrap();
        assert_eq!(w.len(), 1, "{w:?}");
    }
}
