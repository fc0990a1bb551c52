//! Thin wrappers over faer's dense decompositions.

use faer::{c64, Mat, Side};

use crate::error::{Error, Result};

/// Reduced SVD `A = U diag(s) V*`, singular values descending.
pub struct ThinSvd {
    pub u: Mat<c64>,
    pub s: Vec<f64>,
    pub v: Mat<c64>,
}

pub fn thin_svd(a: &Mat<c64>) -> Result<ThinSvd> {
    let svd = a.thin_svd().map_err(|_| Error::EigenConvergence)?;
    let s = svd.S().column_vector().iter().map(|z| z.re).collect();
    Ok(ThinSvd { u: svd.U().to_owned(), s, v: svd.V().to_owned() })
}

pub fn singular_values(a: &Mat<c64>) -> Result<Vec<f64>> {
    a.singular_values().map_err(|_| Error::EigenConvergence)
}

/// Eigenvalues and unit-norm right eigenvectors (columns) of a square matrix.
pub struct Eigen {
    pub values: Vec<c64>,
    pub vectors: Mat<c64>,
}

pub fn eig(a: &Mat<c64>) -> Result<Eigen> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidParameter("eig requires a square matrix".into()));
    }
    let e = a.eigen().map_err(|_| Error::EigenConvergence)?;
    let values = e.S().column_vector().iter().copied().collect();
    let mut vectors = e.U().to_owned();
    for j in 0..vectors.ncols() {
        let norm = vectors.col(j).norm_l2();
        if norm > 0.0 && norm.is_finite() {
            for i in 0..vectors.nrows() {
                vectors[(i, j)] /= norm;
            }
        }
    }
    Ok(Eigen { values, vectors })
}

/// Eigenvalues of a general real matrix.
pub fn real_eigenvalues(a: &Mat<f64>) -> Result<Vec<c64>> {
    a.eigenvalues().map_err(|_| Error::EigenConvergence)
}

/// Eigenvalues ascending and orthonormal eigenvectors of a symmetric matrix.
pub fn symmetric_eigen(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let e = a.self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenConvergence)?;
    Ok((e.S().column_vector().iter().copied().collect(), e.U().to_owned()))
}

/// Minimum-norm least-squares solution of `A x = b`, together with the
/// condition number `sigma_max / sigma_min` of `A`.
pub fn lstsq(a: &Mat<c64>, b: &[c64]) -> Result<(Vec<c64>, f64)> {
    if a.nrows() != b.len() {
        return Err(Error::InvalidParameter("lstsq dimension mismatch".into()));
    }
    if a.ncols() == 0 {
        return Ok((vec![], 1.0));
    }
    let svd = thin_svd(a)?;
    let smax = svd.s[0];
    let smin = *svd.s.last().expect("nonempty");
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let cutoff = f64::EPSILON * smax * a.nrows().max(a.ncols()) as f64;
    let mut x = vec![c64::new(0.0, 0.0); a.ncols()];
    for (k, &s) in svd.s.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        let mut coef = c64::new(0.0, 0.0);
        for i in 0..a.nrows() {
            coef += svd.u[(i, k)].conj() * b[i];
        }
        coef /= s;
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += svd.v[(j, k)] * coef;
        }
    }
    Ok((x, cond))
}

pub fn complexify(a: &Mat<f64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| c64::new(a[(i, j)], 0.0))
}
