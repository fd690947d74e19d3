//! Dense complex linear algebra shared by every module.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Systems whose Hermitian Gram matrix exceeds this condition number are
/// treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Draws one sample of CN(0, variance).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let scale = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(scale * re, scale * im)
}

pub fn complex_normal_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMatrix {
    // Column-major fill order keeps draws reproducible across nalgebra versions.
    let mut m = CMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = complex_normal(rng, variance);
        }
    }
    m
}

pub fn frobenius_sqr(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Largest entrywise deviation |A(i,j) - conj(A(j,i))|.
pub fn hermitian_asymmetry(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// (A + Aᴴ) / 2.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Real eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = hermitian_part(a)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// 2-norm condition number of a Hermitian positive semi-definite matrix.
pub fn hermitian_condition(a: &CMatrix) -> f64 {
    let ev = hermitian_eigenvalues(a);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Solves A·X = B for Hermitian positive-definite A via Cholesky.
///
/// A is symmetrized first so round-off asymmetry cannot break the factorization.
pub fn solve_hpd(a: &CMatrix, b: &CMatrix, context: &'static str) -> Result<CMatrix> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "{context}: {}x{} system with {} right-hand rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let chol = hermitian_part(a).cholesky().ok_or(Error::Singular {
        context,
        condition: f64::INFINITY,
    })?;
    Ok(chol.solve(b))
}

/// Inverse of a Hermitian Gram matrix, rejecting ill-conditioned inputs.
pub fn gram_inverse(gram: &CMatrix, context: &'static str) -> Result<CMatrix> {
    let n = gram.nrows();
    if n == 1 {
        let g = gram[(0, 0)].re;
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::Singular {
                context,
                condition: f64::INFINITY,
            });
        }
        return Ok(CMatrix::from_element(1, 1, C64::new(1.0 / g, 0.0)));
    }
    let condition = hermitian_condition(gram);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { context, condition });
    }
    solve_hpd(gram, &CMatrix::identity(n, n), context)
}

pub fn real_vec_to_diag(d: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_iterator(
        d.len(),
        d.iter().map(|&x| C64::new(x, 0.0)),
    ))
}
