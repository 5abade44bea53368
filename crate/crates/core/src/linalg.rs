//! Small Hermitian linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Cholesky factorization of a Hermitian positive-definite matrix.
///
/// The factor's diagonal must come out real and positive; nalgebra takes
/// complex square roots and would otherwise accept indefinite input.
pub fn factor(m: &CMatrix) -> Result<Cholesky<Complex64, Dyn>> {
    let chol = m.clone().cholesky().ok_or(Error::SingularMmse)?;
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-12 * d.re
    });
    if ok {
        Ok(chol)
    } else {
        Err(Error::SingularMmse)
    }
}

/// Solves `M x = rhs` for Hermitian positive-definite `M`.
pub fn hermitian_solve(m: &CMatrix, rhs: &CVector) -> Result<CVector> {
    Ok(factor(m)?.solve(rhs))
}

/// `Re(v^H M v)`.
pub fn quad_form(m: &CMatrix, v: &CVector) -> f64 {
    v.dotc(&(m * v)).re
}

/// `Re(h^H M^{-1} h)` via a Cholesky solve.
pub fn inverse_quad_form(m: &CMatrix, h: &CVector) -> Result<f64> {
    let x = hermitian_solve(m, h)?;
    Ok(h.dotc(&x).re)
}

/// Outer product `a b^H`.
pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

/// Hermitian part `(M + M^H) / 2`, removing rounding asymmetry before a
/// factorization.
pub fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}
