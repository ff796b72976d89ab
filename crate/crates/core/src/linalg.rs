//! Small dense linear algebra.
//!
//! Everything the observer needs is at most ~20-dimensional, so matrices are
//! plain row-major `Vec<f64>` buffers. Determinant, adjugate and characteristic
//! polynomial come out of a single Faddeev–LeVerrier pass, which stays
//! well-defined for singular input (the DREM mixing step relies on that: at
//! `t = 0` the matrix being mixed is exactly zero).

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use crate::error::{Error, Result};

/// Pivot tolerance for the Routh table, relative to the largest coefficient.
pub const ROUTH_PIVOT_TOL: f64 = 1e-12;

/// Relative pivot tolerance below which the vectorised Sylvester system is
/// treated as singular.
const SYLVESTER_PIVOT_TOL: f64 = 1e-12;

#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting bad shapes and
    /// non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry {bad}")));
        }
        Ok(Self { rows, cols, data })
    }

    /// Copies a row-major slice without validation; used on hot paths where
    /// the slice comes straight out of an integrator state.
    pub(crate) fn from_slice(rows: usize, cols: usize, data: &[f64]) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self {
            rows,
            cols,
            data: data.to_vec(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::from_row_major(r, c, rows.concat())
    }

    pub fn column_vector(v: &[f64]) -> Self {
        Self::from_slice(v.len(), 1, v)
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `vᵀ M` as a row vector.
    pub fn vecmat(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len(), "vecmat dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += vr * a;
            }
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Self { data, ..*self }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Self { data, ..*self }
    }

    pub fn scale(&self, k: f64) -> Self {
        let data = self.data.iter().map(|a| a * k).collect();
        Self { data, ..*self }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn ensure_square(&self, what: &str) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(Error::Dimension(format!(
                "{what} needs a square matrix, got {}x{}",
                self.rows, self.cols
            )))
        }
    }

    fn ensure_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite("matrix contains NaN or Inf".into()))
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &DenseMatrix {
    type Output = DenseMatrix;

    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.matmul(rhs)
    }
}

/// Monic characteristic polynomial `λⁿ + γ₁λⁿ⁻¹ + … + γₙ`, stored as
/// `[γ₁, …, γₙ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CharPoly {
    coeffs: Vec<f64>,
}

impl CharPoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// Horner evaluation of the monic polynomial at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().fold(1.0, |acc, &g| acc * x + g)
    }

    /// Coefficients of `p(λ + shift)`, i.e. the characteristic polynomial of
    /// `M − shift·I` when `self` belongs to `M`.
    pub fn shifted(&self, shift: f64) -> CharPoly {
        // Full coefficient list, highest power first.
        let mut c: Vec<f64> = std::iter::once(1.0).chain(self.coeffs.iter().copied()).collect();
        let n = self.coeffs.len();
        // Repeated synthetic division (Taylor shift).
        for i in 0..n {
            for j in 1..=(n - i) {
                c[j] += shift * c[j - 1];
            }
        }
        CharPoly::new(c[1..].to_vec())
    }
}

/// Faddeev–LeVerrier recursion. Returns `(γ, M_n)` where `M_n` is the last
/// auxiliary matrix, so that `adj(M) = (−1)ⁿ⁻¹ M_n`.
fn faddeev_leverrier(m: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = m.rows();
    let mut gammas = Vec::with_capacity(n);
    let mut aux = DenseMatrix::identity(n);
    for k in 1..=n {
        if k > 1 {
            aux = m.matmul(&aux);
            let g = gammas[k - 2];
            for i in 0..n {
                aux[(i, i)] += g;
            }
        }
        let trace = trace_of_product(m, &aux);
        gammas.push(-trace / k as f64);
    }
    (gammas, aux)
}

fn trace_of_product(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let n = a.rows();
    let mut t = 0.0;
    for i in 0..n {
        for k in 0..n {
            t += a[(i, k)] * b[(k, i)];
        }
    }
    t
}

/// Determinant and adjugate of a square matrix. Well-defined for singular
/// input; never goes through an inverse.
pub fn det_adjugate(m: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
    let n = m.ensure_square("det_adjugate")?;
    m.ensure_finite()?;
    if n == 0 {
        return Ok((1.0, DenseMatrix::zeros(0, 0)));
    }
    let (gammas, aux) = faddeev_leverrier(m);
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let det = sign * gammas[n - 1];
    let adj = aux.scale(-sign);
    Ok((det, adj))
}

pub fn char_poly(m: &DenseMatrix) -> Result<CharPoly> {
    m.ensure_square("char_poly")?;
    m.ensure_finite()?;
    Ok(CharPoly::new(faddeev_leverrier(m).0))
}

/// LU factorisation with partial pivoting, stored compactly.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
    sign: f64,
    min_pivot: f64,
}

impl Lu {
    pub fn factor(m: &DenseMatrix) -> Result<Self> {
        let n = m.ensure_square("LU")?;
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&a, &b| lu[(a, k)].abs().total_cmp(&lu[(b, k)].abs()))
                .unwrap_or(k);
            if p != k {
                for c in 0..n {
                    lu.data.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            min_pivot = min_pivot.min(pivot.abs());
            if pivot == 0.0 {
                continue;
            }
            for r in (k + 1)..n {
                let factor = lu[(r, k)] / pivot;
                lu[(r, k)] = factor;
                if factor != 0.0 {
                    for c in (k + 1)..n {
                        let v = lu[(k, c)];
                        lu[(r, c)] -= factor * v;
                    }
                }
            }
        }
        Ok(Self {
            lu,
            perm,
            sign,
            min_pivot,
        })
    }

    pub fn det(&self) -> f64 {
        (0..self.lu.rows()).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }

    /// Smallest absolute pivot met during elimination.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.lu.rows();
        if b.len() != n {
            return Err(Error::Dimension(format!("rhs length {} for {n}x{n} system", b.len())));
        }
        if self.min_pivot == 0.0 {
            return Err(Error::Singular("zero pivot in LU".into()));
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let s: f64 = (0..r).map(|c| self.lu[(r, c)] * x[c]).sum();
            x[r] -= s;
        }
        for r in (0..n).rev() {
            let s: f64 = ((r + 1)..n).map(|c| self.lu[(r, c)] * x[c]).sum();
            x[r] = (x[r] - s) / self.lu[(r, r)];
        }
        Ok(x)
    }
}

/// Solves `Π S = A Π + C` for `Π` (n×m) by Kronecker vectorisation.
pub fn solve_sylvester(a: &DenseMatrix, s: &DenseMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.ensure_square("solve_sylvester (A)")?;
    let m = s.ensure_square("solve_sylvester (S)")?;
    if c.rows() != n || c.cols() != m {
        return Err(Error::Dimension(format!(
            "C is {}x{}, expected {n}x{m}",
            c.rows(),
            c.cols()
        )));
    }
    a.ensure_finite()?;
    s.ensure_finite()?;
    c.ensure_finite()?;

    // Column-major vec: vec(Π S) = (Sᵀ ⊗ I) vec Π, vec(A Π) = (I ⊗ A) vec Π.
    let dim = n * m;
    let mut kron = DenseMatrix::zeros(dim, dim);
    for j in 0..m {
        for l in 0..m {
            let slj = s[(l, j)];
            if slj != 0.0 {
                for i in 0..n {
                    kron[(j * n + i, l * n + i)] += slj;
                }
            }
        }
        for i in 0..n {
            for k in 0..n {
                kron[(j * n + i, j * n + k)] -= a[(i, k)];
            }
        }
    }
    let rhs: Vec<f64> = (0..m).flat_map(|j| (0..n).map(move |i| (i, j))).map(|(i, j)| c[(i, j)]).collect();

    let lu = Lu::factor(&kron)?;
    let scale = kron.max_abs().max(f64::MIN_POSITIVE);
    if lu.min_pivot() <= SYLVESTER_PIVOT_TOL * scale {
        return Err(Error::SpectraNotDisjoint);
    }
    let v = lu.solve(&rhs)?;
    let mut pi = DenseMatrix::zeros(n, m);
    for j in 0..m {
        for i in 0..n {
            pi[(i, j)] = v[j * n + i];
        }
    }
    let resid = pi.matmul(s).sub(&a.matmul(&pi)).sub(c).max_abs();
    if !(resid < 1e-10 * (1.0 + c.max_abs())) {
        return Err(Error::SpectraNotDisjoint);
    }
    Ok(pi)
}

/// Routh–Hurwitz test on a monic polynomial.
///
/// A non-positive coefficient settles the question immediately (necessary
/// condition). Otherwise the Routh table is built; a near-zero pivot gives
/// [`Error::Inconclusive`].
pub fn routh_hurwitz(p: &CharPoly) -> Result<bool> {
    let n = p.degree();
    let full: Vec<f64> = std::iter::once(1.0).chain(p.coeffs().iter().copied()).collect();
    if full[1..].iter().any(|&c| c <= 0.0) {
        return Ok(false);
    }
    if n <= 2 {
        return Ok(true);
    }
    let scale = full.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let mut prev: Vec<f64> = full.iter().step_by(2).copied().collect();
    let mut cur: Vec<f64> = full.iter().skip(1).step_by(2).copied().collect();
    for _ in 0..(n - 1) {
        let pivot = cur[0];
        if pivot.abs() < ROUTH_PIVOT_TOL * scale {
            return Err(Error::Inconclusive(format!("Routh pivot {pivot:e}")));
        }
        if pivot < 0.0 {
            return Ok(false);
        }
        let width = prev.len().max(cur.len());
        let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        let next: Vec<f64> = (0..width.saturating_sub(1).max(1))
            .map(|j| (pivot * at(&prev, j + 1) - prev[0] * at(&cur, j + 1)) / pivot)
            .collect();
        prev = cur;
        cur = next;
    }
    let last = cur[0];
    if last.abs() < ROUTH_PIVOT_TOL * scale {
        return Err(Error::Inconclusive(format!("Routh pivot {last:e}")));
    }
    Ok(last > 0.0)
}

/// True iff every eigenvalue of `m` has negative real part.
pub fn is_hurwitz(m: &DenseMatrix) -> Result<bool> {
    routh_hurwitz(&char_poly(m)?)
}

/// Estimate of `max Re λ(M)` by bisection on the shift `σ` in
/// `is_hurwitz(M − σI)`. Inconclusive Routh tables count as "not Hurwitz".
pub fn spectral_abscissa(m: &DenseMatrix) -> Result<f64> {
    let p = char_poly(m)?;
    let bound = 1.0 + p.coeffs().iter().fold(0.0_f64, |a, c| a.max(c.abs()));
    let stable_for = |sigma: f64| routh_hurwitz(&p.shifted(sigma)).unwrap_or(false);
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if stable_for(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 * bound {
            break;
        }
    }
    Ok(hi)
}

/// `A_K = A − K e₁ᵀ` with `A` the upper shift: first column `−K`, ones on the
/// superdiagonal.
pub fn companion_first_col(k: &[f64], n: usize) -> Result<DenseMatrix> {
    if k.len() != n {
        return Err(Error::Dimension(format!("K has length {}, expected {n}", k.len())));
    }
    let mut m = shift_matrix(n);
    for (i, &ki) in k.iter().enumerate() {
        m[(i, 0)] -= ki;
    }
    Ok(m)
}

/// Companion matrix with identity superdiagonal block and last row `fᵀ`.
pub fn companion_last_row(f: &[f64], m: usize) -> Result<DenseMatrix> {
    if f.len() != m {
        return Err(Error::Dimension(format!("f has length {}, expected {m}", f.len())));
    }
    let mut a = shift_matrix(m);
    for (j, &fj) in f.iter().enumerate() {
        a[(m - 1, j)] = fj;
    }
    Ok(a)
}

pub fn shift_matrix(n: usize) -> DenseMatrix {
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    a
}

/// `Γ = (−γₙ, …, −γ₁)`: the last row of the companion matrix sharing the
/// spectrum of the polynomial's source matrix.
pub fn gamma_from_charpoly(p: &CharPoly) -> Vec<f64> {
    p.coeffs().iter().rev().map(|g| -g).collect()
}

/// Lower bound on the smallest eigenvalue of a symmetric matrix, by bisection
/// on the inertia of `A − σI` (count of negative `LDLᵀ` pivots).
pub fn symmetric_min_eigenvalue(a: &DenseMatrix) -> Result<f64> {
    let n = a.ensure_square("symmetric_min_eigenvalue")?;
    a.ensure_finite()?;
    if n == 0 {
        return Ok(0.0);
    }
    // Gershgorin bracket.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let radius: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
        lo = lo.min(a[(i, i)] - radius);
        hi = hi.max(a[(i, i)] + radius);
    }
    let width = (hi - lo).max(1e-300);
    let tol = 1e-13 * width.max(a.max_abs());
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if negative_pivots(a, mid) > 0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if mid == lo && mid == hi {
            break;
        }
    }
    Ok(lo)
}

/// Number of eigenvalues of symmetric `a` strictly below `sigma`
/// (Sylvester's law of inertia on an `LDLᵀ` factorisation of `a − σI`).
fn negative_pivots(a: &DenseMatrix, sigma: f64) -> usize {
    let n = a.rows();
    let mut w = a.clone();
    for i in 0..n {
        w[(i, i)] -= sigma;
    }
    let tiny = f64::EPSILON * a.max_abs().max(1.0);
    let mut count = 0;
    for k in 0..n {
        let mut d = w[(k, k)];
        if d.abs() < tiny {
            d = -tiny;
        }
        if d < 0.0 {
            count += 1;
        }
        for i in (k + 1)..n {
            let lik = w[(i, k)] / d;
            for j in (k + 1)..=i {
                let v = w[(k, j)];
                w[(i, j)] -= lik * v;
                if i != j {
                    w[(j, i)] = w[(i, j)];
                }
            }
        }
    }
    count
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sub_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
