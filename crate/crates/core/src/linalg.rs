//! Small dense complex linear algebra on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CVec = DVector<Complex64>;
pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn cvec(values: &[Complex64]) -> CVec {
    CVec::from_column_slice(values)
}

pub fn det(m: &CMat) -> Complex64 {
    m.clone().lu().determinant()
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().lu().try_inverse()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Lower-triangular `A` with positive diagonal and `m = A·Aᴴ`.
pub fn cholesky_lower(m: &CMat) -> Result<CMat> {
    let herm_gap = max_abs(&(m - m.adjoint()));
    if herm_gap > 1e-10 * max_abs(m).max(1.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let l = nalgebra::Cholesky::new(h).map(|ch| ch.l()).ok_or(Error::NotPositiveDefinite)?;
    // Complex square roots never fail, so check the pivots explicitly.
    let positive = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.im.abs() <= 1e-12 * d.re && d.re.is_finite()
    });
    if positive {
        Ok(l)
    } else {
        Err(Error::NotPositiveDefinite)
    }
}

/// Principal square root by the Denman–Beavers iteration. Requires no
/// eigenvalues on the closed negative real axis.
pub fn sqrtm(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let mut y = m.clone();
    let mut z = CMat::identity(n, n);
    let half = Complex64::new(0.5, 0.0);
    for _ in 0..100 {
        let yi = inverse(&y).ok_or_else(|| Error::NotConverged("sqrtm: singular iterate".into()))?;
        let zi = inverse(&z).ok_or_else(|| Error::NotConverged("sqrtm: singular iterate".into()))?;
        let y_next = (&y + zi) * half;
        let z_next = (&z + yi) * half;
        let delta = max_abs(&(&y_next - &y));
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * max_abs(&y).max(1e-300) {
            return Ok(y);
        }
    }
    Err(Error::NotConverged("sqrtm: Denman-Beavers did not converge".into()))
}

/// Least-squares solve of `X·A ≈ B` for `A` where the rows of `X` are samples.
pub fn lstsq(x: &CMat, b: &CMat) -> Result<CMat> {
    let svd = x.clone().svd(true, true);
    svd.solve(b, 1e-14)
        .map_err(|e| Error::NotConverged(format!("least squares: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reconstructs() {
        let m = CMat::from_row_slice(2, 2, &[c(4.0, 0.0), c(1.0, 1.0), c(1.0, -1.0), c(3.0, 0.0)]);
        let a = cholesky_lower(&m).unwrap();
        assert!(max_abs(&(&a * a.adjoint() - &m)) < 1e-14);
        assert!(a[(0, 1)].norm() == 0.0);
        assert!(a[(0, 0)].re > 0.0 && a[(1, 1)].re > 0.0);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        assert!(cholesky_lower(&m).is_err());
    }

    #[test]
    fn sqrtm_squares_back() {
        let m = CMat::from_row_slice(2, 2, &[c(2.0, 0.5), c(0.3, -0.2), c(-0.1, 0.4), c(1.5, -0.3)]);
        let s = sqrtm(&m).unwrap();
        assert!(max_abs(&(&s * &s - &m)) < 1e-13);
    }
}
