//! Shared numerical utilities: Hermitian matrix factorizations and fixed-rule
//! Gauss-Legendre quadrature.

use crate::error::{Result, SimError};
use crate::C64;
use ndarray::prelude::*;
use ndarray_linalg::{Cholesky, Diag, Eigh, SolveTriangular, UPLO};

/// Eigenvalue summary of a Hermitian matrix, kept for diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct PsdReport {
    pub min_eig: f64,
    pub max_eig: f64,
}

impl PsdReport {
    /// Round-off tolerance: eigenvalues no more negative than this fraction
    /// of the largest one are treated as quadrature noise.
    pub const REL_TOL: f64 = 1e-9;

    pub fn is_acceptable(&self) -> bool {
        self.min_eig >= -Self::REL_TOL * self.max_eig.max(0.0)
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues; the columns of
/// the returned matrix are orthonormal eigenvectors, `A = V diag(w) V^H`.
pub fn eigh(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let (vals, vecs) = a.eigh(UPLO::Lower)?;
    // The backend hands back eigenvectors of conj(A) regardless of the
    // input's memory order; conjugate so the documented convention holds.
    Ok((vals, vecs.mapv(|z| z.conj())))
}

/// Factor `B` with `B B^H = A` for Hermitian positive semidefinite `A`,
/// via the eigendecomposition so that rank-deficient inputs are fine.
///
/// Slightly negative eigenvalues (round-off from the quadrature that built
/// the matrix) are clipped to zero and the trace is renormalized; anything
/// below `-REL_TOL * max_eig` is a real defect and errors out.
pub fn psd_sqrt(a: &Array2<C64>) -> Result<(Array2<C64>, PsdReport)> {
    let (vals, vecs) = eigh(a)?;
    let n = vals.len();
    let report = PsdReport { min_eig: vals[0], max_eig: vals[n - 1] };
    if !report.is_acceptable() {
        return Err(SimError::Numerics(format!(
            "matrix is not PSD: min eigenvalue {:.3e} vs max {:.3e}",
            report.min_eig, report.max_eig
        )));
    }
    let trace: f64 = vals.sum();
    let clipped = vals.mapv(|v| v.max(0.0));
    let clipped_sum = clipped.sum();
    let scale = if clipped_sum > 0.0 && trace > 0.0 { trace / clipped_sum } else { 1.0 };
    let mut b = vecs;
    for (mut col, v) in b.columns_mut().into_iter().zip(clipped.iter()) {
        let s = (v * scale).sqrt();
        col.mapv_inplace(|z| z * s);
    }
    Ok((b, report))
}

/// Cholesky factorization of a Hermitian positive definite matrix, holding
/// both triangles so that solves are two triangular sweeps.
#[derive(Debug, Clone)]
pub struct HermChol {
    lower: Array2<C64>,
    upper: Array2<C64>,
}

impl HermChol {
    pub fn new(a: &Array2<C64>) -> Result<Self> {
        let lower = a.cholesky(UPLO::Lower)?;
        let upper = lower.t().mapv(|z| z.conj());
        Ok(HermChol { lower, upper })
    }

    /// `A^{-1} B` for a matrix right-hand side.
    pub fn solve_mat(&self, b: &Array2<C64>) -> Result<Array2<C64>> {
        let y = self.lower.solve_triangular(UPLO::Lower, Diag::NonUnit, b)?;
        Ok(self.upper.solve_triangular(UPLO::Upper, Diag::NonUnit, &y)?)
    }

    /// `A^{-1} b` for a vector right-hand side.
    pub fn solve_vec(&self, b: &Array1<C64>) -> Result<Array1<C64>> {
        let y = self.lower.solve_triangular(UPLO::Lower, Diag::NonUnit, b)?;
        Ok(self.upper.solve_triangular(UPLO::Upper, Diag::NonUnit, &y)?)
    }
}

/// Conjugate transpose as an owned array.
pub fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
