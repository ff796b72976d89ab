//! Dense kernels on the example's matrices: adjugate, characteristic
//! polynomial, Routh test, Sylvester solve and the Γ construction.

use ltv_observer::linalg::{
    char_poly, det_adjugate, gamma_from_charpoly, is_hurwitz, solve_sylvester, spectral_abscissa, DenseMatrix,
};
use ltv_observer::make_example_scenario;

fn main() -> Result<(), ltv_observer::Error> {
    let sc = make_example_scenario();
    let a_k = sc.a_k();
    let (det, adj) = det_adjugate(&a_k)?;
    println!("A_K = {:?}", a_k.as_slice());
    println!("det(A_K) = {det}, adj(A_K) = {:?}", adj.as_slice());
    println!("char poly of A_K: {:?}", char_poly(&a_k)?.coeffs());
    println!("A_K Hurwitz: {}, spectral abscissa {:.4}", is_hurwitz(&a_k)?, spectral_abscissa(&a_k)?);

    let s_poly = char_poly(&sc.s)?;
    println!("char poly of S: {:?} -> Gamma = {:?}", s_poly.coeffs(), gamma_from_charpoly(&s_poly));

    // Π S − A_K Π = e_n h_δᵀ
    let mut c = DenseMatrix::zeros(sc.dims.n, sc.dims.n_w);
    c[(sc.dims.n - 1, 0)] = 1.0;
    let pi = solve_sylvester(&a_k, &sc.s, &c)?;
    let resid = pi.matmul(&sc.s).sub(&a_k.matmul(&pi)).sub(&c).max_abs();
    println!("Pi = {:?}, residual {resid:e}", pi.as_slice());

    let singular = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]])?;
    let (d0, adj0) = det_adjugate(&singular)?;
    println!("singular: det = {d0}, adj = {:?}", adj0.as_slice());
    Ok(())
}
