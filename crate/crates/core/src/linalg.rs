//! Small dense helpers over `nalgebra` complex matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CapaError, Result};

pub type CMatrix = DMatrix<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `diag(weights) * m`.
pub fn scale_rows(weights: &DVector<f64>, m: &CMatrix) -> CMatrix {
    let mut out = m.clone();
    for (mut row, &w) in out.row_iter_mut().zip(weights.iter()) {
        row *= Complex64::new(w, 0.0);
    }
    out
}

/// `m * diag(weights)`.
pub fn scale_cols(m: &CMatrix, weights: &DVector<f64>) -> CMatrix {
    let mut out = m.clone();
    for (mut col, &w) in out.column_iter_mut().zip(weights.iter()) {
        col *= Complex64::new(w, 0.0);
    }
    out
}

/// `a^H diag(weights) b`.
pub fn weighted_gram(a: &CMatrix, weights: &DVector<f64>, b: &CMatrix) -> CMatrix {
    a.adjoint() * scale_rows(weights, b)
}

/// Real part of the trace.
pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Solves `a x = b`, trying Cholesky first (for Hermitian positive definite
/// `a`) and falling back to partial-pivot LU.
pub fn solve_hermitian(a: &CMatrix, b: &CMatrix, what: &str) -> Result<CMatrix> {
    if let Some(ch) = a.clone().cholesky() {
        let x = ch.solve(b);
        if all_finite(&x) {
            return Ok(x);
        }
    }
    solve_general(a, b, what)
}

/// Partial-pivot LU solve.
pub fn solve_general(a: &CMatrix, b: &CMatrix, what: &str) -> Result<CMatrix> {
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| CapaError::Numerical(format!("{what}: singular system")))?;
    if !all_finite(&x) {
        return Err(CapaError::Numerical(format!("{what}: non-finite solution")));
    }
    Ok(x)
}

/// Explicit inverse via LU.
pub fn inverse(a: &CMatrix, what: &str) -> Result<CMatrix> {
    let n = a.nrows();
    solve_general(a, &CMatrix::identity(n, n), what)
}

/// `log det` of a Hermitian positive definite matrix, with an LU
/// `log |det|` fallback when Cholesky fails.
pub fn logdet_hermitian(a: &CMatrix) -> f64 {
    if let Some(ch) = a.clone().cholesky() {
        return 2.0 * ch.l_dirty().diagonal().iter().map(|z| z.re.ln()).sum::<f64>();
    }
    a.clone().lu().determinant().norm().ln()
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `max |a - b| / max |b|` over all entries.
pub fn max_rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let diff = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Squared Frobenius norm.
pub fn norm_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Concatenates equally tall blocks side by side.
pub fn hstack(blocks: &[CMatrix]) -> CMatrix {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), (rows, b.ncols())).copy_from(b);
        at += b.ncols();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    #[test]
    fn logdet_matches_determinant() {
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(3.0, 0.0),
                Complex64::new(1.0, 1.0),
                Complex64::new(1.0, -1.0),
                Complex64::new(2.0, 0.0),
            ],
        );
        // det = 6 - 2 = 4
        assert!((logdet_hermitian(&a) - 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn hstack_places_blocks() {
        let a = CMatrix::from_element(2, 1, ONE);
        let b = CMatrix::from_element(2, 2, ZERO);
        let s = hstack(&[a, b]);
        assert_eq!(s.shape(), (2, 3));
        assert_eq!(s[(1, 0)], ONE);
        assert_eq!(s[(1, 2)], ZERO);
    }

    #[test]
    fn singular_solve_is_an_error() {
        let a = CMatrix::zeros(2, 2);
        assert!(solve_general(&a, &CMatrix::identity(2, 2), "test").is_err());
    }
}
