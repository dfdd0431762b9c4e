//! Dense matrix helpers backing the exact oracles on small systems.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// `exp(-i·scale·h)` for hermitian `h`.
pub fn expm_hermitian(h: &CMatrix, scale: f64) -> CMatrix {
    let eig = h.clone().symmetric_eigen();
    let phases = CVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&e| Complex64::from_polar(1.0, -scale * e)),
    );
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    scaled * v.adjoint()
}

/// Hermitian generator `K` with `u = exp(-i·K)` from the principal logarithm.
///
/// Refuses when an eigenphase comes within `margin` of the branch cut at ±π.
pub fn unitary_generator(u: &CMatrix, margin: f64) -> Result<CMatrix> {
    let schur = u.clone().schur();
    let (q, t) = schur.unpack();
    let n = t.nrows();
    let mut diag = Vec::with_capacity(n);
    for j in 0..n {
        let lambda = t[(j, j)];
        let phase = lambda.arg();
        if phase.abs() >= std::f64::consts::PI - margin {
            return Err(Error::Branch { phase });
        }
        // i·log λ with log λ = ln|λ| + i·phase
        diag.push(Complex64::new(-phase, lambda.norm().ln()));
    }
    let mut scaled = q.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= diag[j];
    }
    Ok(scaled * q.adjoint())
}

/// Largest entry of the anti-hermitian part.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let d = m - m.adjoint();
    d.iter().map(|z| z.norm()).fold(0.0, f64::max) * 0.5
}

pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Spectral (operator 2-) norm.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_hermitian() -> CMatrix {
        let a = CMatrix::from_fn(4, 4, |i, j| {
            c((i * 3 + j) as f64 * 0.1 - 0.4, (i as f64 - j as f64) * 0.07)
        });
        symmetrize(&a)
    }

    #[test]
    fn exp_then_log_round_trips() {
        let h = sample_hermitian();
        let u = expm_hermitian(&h, 0.5);
        let uu = &u * u.adjoint();
        assert!(max_abs(&(uu - CMatrix::identity(4, 4))) < 1e-14);
        let k = unitary_generator(&u, 0.1).unwrap() / c(0.5, 0.0);
        assert!(max_abs(&(k - h)) < 1e-12);
    }

    #[test]
    fn branch_cut_refused() {
        let h = CMatrix::from_diagonal(&CVector::from_vec(vec![c(3.1, 0.0), c(0.0, 0.0)]));
        let u = expm_hermitian(&h, 1.0);
        assert!(matches!(unitary_generator(&u, 0.1), Err(Error::Branch { .. })));
    }

    #[test]
    fn slope_of_power_law() {
        let xs = log_grid(0.01, 0.1, 7);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powi(3)).collect();
        assert!((loglog_slope(&xs, &ys) - 3.0).abs() < 1e-12);
        assert!((xs[0] - 0.01).abs() < 1e-15 && (xs[6] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(-2.0, 0.0), c(0.5, 0.0)]));
        assert!((spectral_norm(&m) - 2.0).abs() < 1e-14);
    }
}
