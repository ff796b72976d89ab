//! Independent numerical oracles for the filter bank and the LS gain, on the
//! worked example.

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2, SMatrix, Vector2};

use ltv_observer::estimator::extended_lre_residual;
use ltv_observer::gpebo::{filters_rhs, sample_at, FilterBank};
use ltv_observer::linalg::norm2;
use ltv_observer::ode::{integrate, rk4_step, CompositeState, IntegrationConfig, Layout};
use ltv_observer::sim::{simulate, ClosedLoop, LoopState, MixingMode};
use ltv_observer::truth::{make_example_scenario, truth_rhs, Scenario, TruthState};
use ltv_observer::verify::fit_exponential_decay;

fn open_loop_rhs(sc: &Scenario) -> impl Fn(f64, &[f64]) -> ltv_observer::Result<Vec<f64>> + '_ {
    let d = sc.dims;
    let nt = TruthState::flat_len(&d);
    move |t, v| {
        let truth = TruthState::from_flat(&d, &v[..nt]);
        let fb = FilterBank::from_flat(&d, &v[nt..])?;
        let y = truth.x[0];
        let u = sc.input.value(t);
        Ok([truth_rhs(sc, t, &truth).to_flat(), filters_rhs(sc, t, &fb, y, u).to_flat()].concat())
    }
}

/// The example dynamics written out by hand, state order as in the library:
/// `x, x_θ, x_B, w, Φ_θ, Φ_B, z, Ω, P, L, Q` with matrices row-major.
fn example_rhs_by_hand(t: f64, v: &[f64]) -> Vec<f64> {
    let x = Vector2::new(v[0], v[1]);
    let x_th = Vector2::new(v[2], v[3]);
    let x_b = Vector2::new(v[4], v[5]);
    let w = Vector2::new(v[6], v[7]);
    let phi_th = Matrix2::from_row_slice(&v[8..12]);
    let phi_b = Matrix2::from_row_slice(&v[12..16]);
    let z = Vector2::new(v[16], v[17]);
    let om = Matrix2::from_row_slice(&v[18..22]);
    let p = Matrix2::from_row_slice(&v[22..26]);
    let l = Vector2::new(v[26], v[27]);
    let q = SMatrix::<f64, 2, 4>::from_row_slice(&v[28..36]);

    let u = 10.0 + (0.5 * t).sin();
    let y = x[0];
    let a_th = Matrix2::new(-0.001, 0.0, 0.0, -0.002);
    let a_b = Matrix2::new(0.0, 1.0, -1.0 + 0.1 * t.sin(), 0.0);
    let s = Matrix2::new(0.0, 1.0, -1.0, 0.0);
    let a_k = Matrix2::new(-7.5, 1.0, -25.0, 0.0);
    let a_f = Matrix2::new(0.0, 1.0, -1.0, -2.0);
    let k = Vector2::new(7.5, 25.0);
    let e2 = Vector2::new(0.0, 1.0);

    let dx = Vector2::new(x[1] + x_th[0] * x[0] + x_b[0] * u, x_th[1] * x[0] + x_b[1] * u + w[0]);
    let zeta = y - z[0];
    let phi = nalgebra::RowSVector::<f64, 4>::new(om[(0, 0)], om[(0, 1)], p[(0, 0)], p[(0, 1)]);
    let parts: Vec<Vec<f64>> = vec![
        dx.as_slice().to_vec(),
        (a_th * x_th).as_slice().to_vec(),
        (a_b * x_b).as_slice().to_vec(),
        (s * w).as_slice().to_vec(),
        row_major(&DMatrix::from_column_slice(2, 2, (a_th * phi_th).as_slice())),
        row_major(&DMatrix::from_column_slice(2, 2, (a_b * phi_b).as_slice())),
        (a_k * z + k * y).as_slice().to_vec(),
        row_major(&DMatrix::from_column_slice(2, 2, (a_k * om + phi_th * y).as_slice())),
        row_major(&DMatrix::from_column_slice(2, 2, (a_k * p + phi_b * u).as_slice())),
        (a_f * l + e2 * zeta).as_slice().to_vec(),
        row_major(&DMatrix::from_column_slice(2, 4, (a_f * q + e2 * phi).as_slice())),
    ];
    parts.concat()
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn open_loop_layout(sc: &Scenario) -> Arc<Layout> {
    let d = sc.dims;
    Arc::new(Layout::new([("truth", TruthState::flat_len(&d)), ("filters", FilterBank::flat_len(&d))]))
}

#[test]
fn one_rk4_step_matches_hand_coded_dynamics() {
    let sc = make_example_scenario();
    let layout = open_loop_layout(&sc);
    // Every entry non-zero so that each coupling term contributes.
    let v0: Vec<f64> = (0..layout.len()).map(|i| ((i as f64 + 1.0) * 0.37).sin() * 2.0).collect();
    let s0 = CompositeState::new(Arc::clone(&layout), 0.7, v0).unwrap();
    let lib = rk4_step(&open_loop_rhs(&sc), &s0, 1e-3).unwrap();
    let hand = rk4_step(&|t, v: &[f64]| Ok(example_rhs_by_hand(t, v)), &s0, 1e-3).unwrap();
    for (i, (a, b)) in lib.as_slice().iter().zip(hand.as_slice()).enumerate() {
        assert!((a - b).abs() <= 1e-12, "entry {i}: {a} vs {b}");
    }
}

#[test]
fn parameter_transition_matrix_is_diagonal_exponential() {
    let mut sc = make_example_scenario();
    sc.input = Default::default();
    let d = sc.dims;
    let layout = Arc::new(Layout::new([("filters", FilterBank::flat_len(&d))]));
    let s0 = CompositeState::new(layout, 0.0, FilterBank::initial(&d).to_flat()).unwrap();
    let rhs = |t: f64, v: &[f64]| Ok(filters_rhs(&sc, t, &FilterBank::from_flat(&d, v)?, 0.0, 0.0).to_flat());
    let cfg = IntegrationConfig::new(1e-2, 50.0, 1000).unwrap();
    let end = integrate(&rhs, s0, &cfg, |_, _| {}).unwrap();
    let fb = FilterBank::from_flat(&d, end.as_slice()).unwrap();
    let expected = [(-0.05f64).exp(), 0.0, 0.0, (-0.1f64).exp()];
    for (a, b) in fb.phi_theta.as_slice().iter().zip(&expected) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

#[test]
fn zeta_from_record_matches_reintegration() {
    let mut sc = make_example_scenario();
    sc.sim.t_final = 1.0;
    let traj = simulate(&sc).unwrap();
    let rec = traj.last();
    assert_eq!(rec.t, 1.0);
    let zeta_recorded = rec.y - rec.state.filters.z[0];

    // Plant, exosystem and the z filter only, stepped at a tenth of the step.
    let layout = Arc::new(Layout::new([("s", 10)]));
    let s0 = [sc.initial_truth().to_flat(), vec![0.0, 0.0]].concat();
    let rhs = |t: f64, v: &[f64]| {
        let mut out = example_rhs_by_hand(t, &[&v[..8], &[0.0; 20], &v[8..10], &[0.0; 8]].concat());
        out.truncate(8);
        let (y, z) = (v[0], [v[8], v[9]]);
        out.extend([-7.5 * z[0] + z[1] + 7.5 * y, -25.0 * z[0] + 25.0 * y]);
        Ok(out)
    };
    let cfg = IntegrationConfig::new(1e-4, 1.0, 10_000).unwrap();
    let end = integrate(&rhs, CompositeState::new(layout, 0.0, s0).unwrap(), &cfg, |_, _| {}).unwrap();
    let v = end.as_slice();
    let zeta_again = v[0] - v[8];
    assert!(
        (zeta_recorded - zeta_again).abs() <= 1e-9,
        "{zeta_recorded} vs {zeta_again}"
    );
}

fn inverse(m: &ltv_observer::DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice()).try_inverse().expect("F is positive definite")
}

/// `max |F⁻¹(t+h) − F⁻¹(t) − α∫ΩᵀΩ|` with the integral by the trapezoid rule.
fn inverse_gain_increment_error(sc: &Scenario, start: &LoopState, t: f64, h: f64) -> f64 {
    let d = sc.dims;
    let lp = ClosedLoop::new(sc, MixingMode::Full).unwrap();
    let layout = Arc::new(ltv_observer::sim::closed_loop_layout(&d));
    let s0 = CompositeState::new(layout, t, start.to_flat()).unwrap();
    let next = rk4_step(&|t, v: &[f64]| lp.rhs(t, v, 0.0), &s0, h).unwrap();
    let end = LoopState::from_flat(&d, next.as_slice()).unwrap();
    let outer = |s: &LoopState, t: f64| {
        let row = sample_at(sc, t, &s.filters, s.truth.x[0]).row();
        DMatrix::from_fn(row.len(), row.len(), |i, j| row[i] * row[j])
    };
    let integral = (outer(start, t) + outer(&end, t + h)) * (0.5 * h * sc.gains.alpha);
    let increment = inverse(&end.est.f) - inverse(&start.est.f);
    (increment - integral).amax()
}

#[test]
fn ls_gain_inverse_grows_by_the_regressor_gram() {
    let mut sc = make_example_scenario();
    sc.sim.t_final = 3.0;
    let traj = simulate(&sc).unwrap();
    let rec = traj.last();
    let coarse = inverse_gain_increment_error(&sc, &rec.state, rec.t, 2e-3);
    let fine = inverse_gain_increment_error(&sc, &rec.state, rec.t, 1e-3);
    // The local defect is at least second order in h.
    assert!(coarse / fine >= 4.0, "coarse {coarse:e}, fine {fine:e}");
    let scale = inverse(&rec.state.est.f).amax();
    assert!(fine <= 1e-6 * scale, "fine {fine:e} against |F⁻¹| {scale:e}");
}

#[test]
fn extended_residual_decays_from_a_perturbed_ls_start() {
    let mut sc = make_example_scenario();
    sc.sim.t_final = 50.0;
    let mut g0 = sc.theta_g0();
    for (i, v) in g0.iter_mut().enumerate() {
        *v += 0.5 * (i as f64 + 1.0).cos();
    }
    sc.theta_g0 = Some(g0.clone());
    let traj = simulate(&sc).unwrap();
    let theta_true = sc.theta_true();
    let series: Vec<(f64, f64)> = traj
        .records
        .iter()
        .map(|r| {
            let res = extended_lre_residual(&sc.dims, &r.state.est.f, &r.state.est.theta_g, &g0, sc.gains.f0, &theta_true)
                .unwrap();
            (r.t, norm2(&res.residual))
        })
        .collect();
    // f₀·(1/f₀) may differ from 1 by an ulp.
    assert!(series[0].1 <= 1e-15 * norm2(&g0), "{}", series[0].1);
    let fit = fit_exponential_decay(&series, (5.0, 50.0)).unwrap();
    assert!(fit.slope < 0.0, "slope {}", fit.slope);
}

/// At the true parameter the expanded formula tracks the plant while the
/// folded one keeps an O(100) offset, so the two are not equivalent.
#[test]
fn folded_reconstruction_is_not_the_expanded_one() {
    use ltv_observer::gpebo::ThetaVector;
    use ltv_observer::linalg::sub_vec;
    use ltv_observer::observer::StateReconstructor;
    let mut sc = make_example_scenario();
    sc.sim.t_final = 20.0;
    let traj = simulate(&sc).unwrap();
    let rec = StateReconstructor::new(&sc);
    let th = ThetaVector::from_slice(&sc.dims, &sc.theta_true()).unwrap();
    let last = traj.last();
    let expanded = rec.reconstruct(&sc, &last.state.filters, &th).unwrap();
    assert!(norm2(&sub_vec(&expanded, &last.state.truth.x)) < 1e-3);
    let worst = traj
        .records
        .iter()
        .map(|r| {
            let a = rec.reconstruct(&sc, &r.state.filters, &th).unwrap();
            let b = rec.reconstruct_folded(&sc, &r.state.filters, &th).unwrap();
            norm2(&sub_vec(&a, &b))
        })
        .fold(0.0, f64::max);
    assert!(worst > 1.0, "folded and expanded agree to {worst:e}");
}
