//! Structural invariants over random inputs.

use nalgebra::DMatrix;
use proptest::prelude::*;

use ltv_observer::gpebo::{g_jacobian, g_map, selection_matrix, FilterBank, ThetaVector};
use ltv_observer::linalg::{char_poly, det_adjugate, solve_sylvester, DenseMatrix};
use ltv_observer::observer::{ok_inverse, ok_matrix, StateReconstructor};
use ltv_observer::scenario_file::{parse_scenario, write_scenario};
use ltv_observer::truth::{make_example_scenario, Dims};

fn square(max_n: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-2.0..2.0f64, n * n).prop_map(move |v| DenseMatrix::from_row_major(n, n, v).unwrap())
    })
}

fn dims() -> impl Strategy<Value = Dims> {
    (1..4usize, 1..4usize, 1..4usize, 1..3usize).prop_map(|(n, n_theta, n_b, n_gamma)| Dims {
        n,
        n_theta,
        n_b,
        n_w: n_gamma + 1,
        n_gamma,
    })
}

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

proptest! {
    #[test]
    fn adjugate_matches_lu_determinant(m in square(7)) {
        let (det, adj) = det_adjugate(&m).unwrap();
        let n = m.rows();
        let oracle = to_na(&m).determinant();
        let scale = 1.0f64.max(m.norm_inf().powi(n as i32));
        prop_assert!((det - oracle).abs() <= 1e-10 * scale, "{} vs {}", det, oracle);
        let defect = adj.matmul(&m).sub(&DenseMatrix::identity(n).scale(det)).max_abs();
        prop_assert!(defect <= 1e-10 * 1.0f64.max(adj.norm_inf() * m.norm_inf()));
    }

    #[test]
    fn cayley_hamilton(m in square(6)) {
        let n = m.rows();
        let cp = char_poly(&m).unwrap();
        // Horner on λⁿ + c₀λⁿ⁻¹ + … + cₙ₋₁.
        let mut acc = DenseMatrix::identity(n);
        for &c in cp.coeffs() {
            acc = acc.matmul(&m).add(&DenseMatrix::identity(n).scale(c));
        }
        let scale = 1.0f64.max(m.norm_inf()).powi(n as i32);
        prop_assert!(acc.max_abs() <= 1e-9 * scale, "{}", acc.max_abs());
    }

    #[test]
    fn observer_gain_matrix_is_unit_lower_triangular(k in prop::collection::vec(-20.0..20.0f64, 1..7)) {
        let n = k.len();
        let ok = ok_matrix(&k);
        for i in 0..n {
            prop_assert_eq!(ok[(i, i)], 1.0);
            for j in (i + 1)..n {
                prop_assert_eq!(ok[(i, j)], 0.0);
            }
        }
        let (det, _) = det_adjugate(&ok).unwrap();
        prop_assert!((det - 1.0).abs() <= 1e-9 * ok.norm_inf().powi(n as i32));
        let prod = ok_inverse(&k).matmul(&ok).sub(&DenseMatrix::identity(n)).max_abs();
        prop_assert!(prod <= 1e-9 * 1.0f64.max(ok.norm_inf()).powi(n as i32));
    }

    #[test]
    fn g_jacobian_matches_central_differences(
        (d, theta) in dims().prop_flat_map(|d| (Just(d), prop::collection::vec(-5.0..5.0f64, d.q())))
    ) {
        let j = g_jacobian(&d, &theta);
        let h = 1e-4;
        for c in 0..d.q() {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[c] += h;
            down[c] -= h;
            let (gu, gd) = (g_map(&d, &up), g_map(&d, &down));
            for r in 0..d.p() {
                let fd = (gu[r] - gd[r]) / (2.0 * h);
                // G is bilinear, so central differences are exact up to round-off.
                prop_assert!((fd - j[(r, c)]).abs() <= 1e-8, "({}, {}): {} vs {}", r, c, fd, j[(r, c)]);
            }
        }
    }

    #[test]
    fn selection_recovers_theta_and_margin_is_two(
        (d, theta) in dims().prop_flat_map(|d| (Just(d), prop::collection::vec(-10.0..10.0f64, d.q())))
    ) {
        let q_sel = selection_matrix(d.q(), d.p()).unwrap();
        prop_assert_eq!(q_sel.matvec(&g_map(&d, &theta)), theta.clone());
        let qj = q_sel.matmul(&g_jacobian(&d, &theta));
        let margin = qj.add(&qj.transpose()).sub(&DenseMatrix::identity(d.q()).scale(2.0)).max_abs();
        prop_assert!(margin <= 1e-12);
    }

    #[test]
    fn reconstruction_is_affine_in_filters_and_initial_conditions(
        fa in prop::collection::vec(-3.0..3.0f64, 36),
        fb in prop::collection::vec(-3.0..3.0f64, 36),
        a in prop::collection::vec(-3.0..3.0f64, 4),
        b in prop::collection::vec(-3.0..3.0f64, 4),
        eta in -3.0..3.0f64,
        lambda in -2.0..2.0f64,
    ) {
        let sc = make_example_scenario();
        let len = FilterBank::flat_len(&sc.dims);
        let rec = StateReconstructor::new(&sc);
        let at = |filters: &[f64], x0: &[f64]| {
            let bank = FilterBank::from_flat(&sc.dims, &filters[..len]).unwrap();
            let th = ThetaVector::from_slice(&sc.dims, &[x0, &[eta]].concat()).unwrap();
            rec.reconstruct(&sc, &bank, &th).unwrap()
        };
        let mix = |u: &[f64], v: &[f64]| -> Vec<f64> {
            u.iter().zip(v).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect()
        };
        // Linear in the filter bank for fixed θ̂.
        let (ra, rb, rm) = (at(&fa, &a), at(&fb, &a), at(&mix(&fa, &fb), &a));
        let expected = mix(&ra, &rb);
        for i in 0..sc.dims.n {
            prop_assert!((rm[i] - expected[i]).abs() <= 1e-10 * (1.0 + expected[i].abs()));
        }
        // Affine in (x̂_θ0, x̂_B0) for fixed η̂.
        let (ra, rb, rm) = (at(&fa, &a), at(&fa, &b), at(&fa, &mix(&a, &b)));
        let expected = mix(&ra, &rb);
        for i in 0..sc.dims.n {
            prop_assert!((rm[i] - expected[i]).abs() <= 1e-9 * (1.0 + expected[i].abs()));
        }
    }

    #[test]
    fn sylvester_residual_is_small(
        k in prop::collection::vec(0.5..20.0f64, 2..5),
        omega in 0.1..5.0f64,
        c in prop::collection::vec(-3.0..3.0f64, 8),
    ) {
        let n = k.len();
        // Companion with all-positive coefficients of a product of stable factors.
        let mut poly = vec![1.0];
        for &r in &k {
            let mut next = vec![0.0; poly.len() + 1];
            for (i, &p) in poly.iter().enumerate() {
                next[i] += p;
                next[i + 1] += r * p;
            }
            poly = next;
        }
        let a = ltv_observer::linalg::companion_first_col(&poly[1..], n).unwrap();
        let s = DenseMatrix::from_rows(&[vec![0.0, omega], vec![-omega, 0.0]]).unwrap();
        let cm = DenseMatrix::from_row_major(n, 2, c[..2 * n].to_vec()).unwrap();
        let pi = solve_sylvester(&a, &s, &cm).unwrap();
        let resid = pi.matmul(&s).sub(&a.matmul(&pi)).sub(&cm).max_abs();
        let scale = 1.0f64.max(pi.max_abs() * (a.norm_inf() + omega));
        prop_assert!(resid <= 1e-10 * scale, "{}", resid);
    }

    #[test]
    fn scenario_text_preserves_gains(
        f0 in 1e-6..1.0f64,
        alpha in 1e-3..1e3f64,
        gamma in 1e-3..1e3f64,
        k1 in 0.1..50.0f64,
        seed in 0..=i64::MAX as u64,
    ) {
        let mut sc = make_example_scenario();
        sc.gains.f0 = f0;
        sc.gains.alpha = alpha;
        sc.gains.gamma = gamma;
        sc.gains.k[0] = k1;
        sc.noise.seed = seed;
        let back = parse_scenario(&write_scenario(&sc)).unwrap();
        prop_assert_eq!(back, sc);
    }
}
