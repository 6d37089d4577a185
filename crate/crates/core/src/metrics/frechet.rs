use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Added to the diagonal of a singular covariance.
const RIDGE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetResult {
    pub distance: f64,
    /// Whether either covariance needed the ridge to be positive definite.
    pub regularized: bool,
}

/// Sample mean and covariance (`n - 1` denominator).
pub fn gaussian_moments(x: ArrayView2<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (n, d) = x.dim();
    if n < d + 1 || n < 2 {
        return Err(Error::Parameter(format!("{n} points cannot fit a {d}-D Gaussian")));
    }
    let mean = DVector::from_iterator(d, (0..d).map(|j| x.column(j).sum() / n as f64));
    let mut cov = DMatrix::zeros(d, d);
    for row in x.rows() {
        let c = DVector::from_iterator(d, row.iter().zip(mean.iter()).map(|(v, m)| v - m));
        cov += &c * c.transpose();
    }
    cov /= (n - 1) as f64;
    Ok((mean, cov))
}

fn positive_definite(c: &DMatrix<f64>) -> bool {
    c.clone().symmetric_eigen().eigenvalues.iter().all(|&l| l > 1e-12)
}

/// `Tr (A B)^{1/2}` for symmetric positive semi-definite `A`, `B`.
fn trace_sqrt_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.nrows() == 2 {
        // the eigenvalues of AB are real and non-negative:
        // (√λ1 + √λ2)² = tr(AB) + 2 √det(AB)
        let m = a * b;
        let tr = m.trace();
        let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).max(0.0);
        return (tr + 2.0 * det.sqrt()).max(0.0).sqrt();
    }
    let eig = a.clone().symmetric_eigen();
    let sqrt_a = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()))
        * eig.eigenvectors.transpose();
    let inner = &sqrt_a * b * &sqrt_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    inner.symmetric_eigen().eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum()
}

/// Fréchet distance between Gaussians fitted to two point sets:
/// `‖μa − μb‖² + Tr(Σa + Σb − 2 (Σa Σb)^{1/2})`.
pub fn frechet_distance(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<FrechetResult> {
    if a.ncols() != b.ncols() {
        return Err(Error::Shape(format!("{}-D vs {}-D features", a.ncols(), b.ncols())));
    }
    let (mu_a, mut cov_a) = gaussian_moments(a)?;
    let (mu_b, mut cov_b) = gaussian_moments(b)?;
    let d = a.ncols();
    let mut regularized = false;
    for c in [&mut cov_a, &mut cov_b] {
        if !positive_definite(c) {
            *c += DMatrix::identity(d, d) * RIDGE;
            regularized = true;
        }
    }
    let diff = &mu_a - &mu_b;
    let distance = diff.dot(&diff) + cov_a.trace() + cov_b.trace() - 2.0 * trace_sqrt_product(&cov_a, &cov_b);
    Ok(FrechetResult { distance: distance.max(0.0), regularized })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_matches_eigen_route() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, -0.4, -0.4, 3.0]);
        let closed = trace_sqrt_product(&a, &b);
        // embed in 3-D with a zero row/column so the eigen route runs
        let mut a3 = DMatrix::zeros(3, 3);
        let mut b3 = DMatrix::zeros(3, 3);
        a3.view_mut((0, 0), (2, 2)).copy_from(&a);
        b3.view_mut((0, 0), (2, 2)).copy_from(&b);
        let eigen = trace_sqrt_product(&a3, &b3);
        assert!((closed - eigen).abs() < 1e-10, "{closed} vs {eigen}");
    }
}
