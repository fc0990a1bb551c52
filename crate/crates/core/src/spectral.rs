//! Centralized ground truth: eigendecomposition of the Laplacian and
//! standard spectral clustering.

use std::io::Write;

use faer::Mat;

use crate::clustering::{bits_for_k, kmeans_assign, ClusterAssignment, ClusterMethod};
use crate::error::{Error, Result};
use crate::laplacian::Laplacian;
use crate::linalg::symmetric_eigen;

/// Largest graph the dense oracle will handle.
pub const ORACLE_LIMIT: usize = 10_000;

/// Eigenvector entries smaller than this carry no reliable sign.
pub const ZERO_ENTRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Ascending.
    pub lambdas: Vec<f64>,
    /// Column `j` is the unit-norm eigenvector of `lambdas[j]`, with its
    /// first non-negligible entry positive.
    pub vectors: Mat<f64>,
}

/// Diagonalizes the symmetric `D^(1/2) L D^(-1/2)` and maps the eigenvectors
/// back with `D^(-1/2)`.
pub fn eigendecompose(lap: &Laplacian) -> Result<EigenSystem> {
    let n = lap.n();
    if n > ORACLE_LIMIT {
        return Err(Error::OracleTooLarge { n, limit: ORACLE_LIMIT });
    }
    let sq: Vec<f64> = lap.degrees().iter().map(|d| d.sqrt()).collect();
    let mut s = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, l) in lap.row(i) {
            s[(i, j)] = l * sq[i] / sq[j];
        }
    }
    // symmetrize away rounding
    let s = Mat::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let (lambdas, y) = symmetric_eigen(&s)?;
    let mut vectors = Mat::from_fn(n, n, |i, j| y[(i, j)] / sq[i]);
    for j in 0..n {
        let norm = vectors.col(j).norm_l2();
        let sign = (0..n)
            .map(|i| vectors[(i, j)])
            .find(|v| v.abs() > ZERO_ENTRY_TOL * norm)
            .map_or(1.0, f64::signum);
        for i in 0..n {
            vectors[(i, j)] *= sign / norm;
        }
    }
    Ok(EigenSystem { lambdas, vectors })
}

impl EigenSystem {
    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    /// Eigenvector `j` (0-based: `vector(1)` is `v^(2)`).
    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.vectors.col(j).iter().copied().collect()
    }

    /// `max_j ||L v_j - lambda_j v_j||`.
    pub fn max_residual(&self, lap: &Laplacian) -> f64 {
        let n = self.n();
        let mut out = vec![0.0; n];
        (0..n)
            .map(|j| {
                let v = self.vector(j);
                lap.apply(&v, &mut out);
                out.iter().zip(&v).map(|(lv, x)| (lv - self.lambdas[j] * x).powi(2)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// CSV `index,lambda`.
    pub fn write_eigenvalues_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,lambda")?;
        for (j, l) in self.lambdas.iter().enumerate() {
            writeln!(w, "{},{l:.16e}", j + 1)?;
        }
        Ok(())
    }

    /// CSV `node,v<j>...` for the given 1-based eigenvector indices.
    pub fn write_eigenvectors_csv<W: Write>(&self, mut w: W, which: &[usize]) -> std::io::Result<()> {
        let header: Vec<String> = which.iter().map(|j| format!("v{j}")).collect();
        writeln!(w, "node,{}", header.join(","))?;
        for i in 0..self.n() {
            let row: Vec<String> = which.iter().map(|&j| format!("{:.16e}", self.vectors[(i, j - 1)])).collect();
            writeln!(w, "{i},{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn spectral_cluster(es: &EigenSystem, k: usize, method: ClusterMethod, seed: u64) -> Result<ClusterAssignment> {
    let n = es.n();
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("k must lie in [2, {n}], got {k}")));
    }
    match method {
        ClusterMethod::Signs => {
            let bits = bits_for_k(k);
            if bits + 1 > n {
                return Err(Error::InsufficientModes { needed: bits + 1, available: n });
            }
            let mut flagged = Vec::new();
            let labels = (0..n)
                .map(|i| {
                    (1..=bits)
                        .map(|j| {
                            let v = es.vectors[(i, j)];
                            if v.abs() < ZERO_ENTRY_TOL {
                                if flagged.last() != Some(&i) {
                                    flagged.push(i);
                                }
                                1 << (j - 1)
                            } else if v > 0.0 {
                                1 << (j - 1)
                            } else {
                                0
                            }
                        })
                        .sum()
                })
                .collect();
            Ok(ClusterAssignment { labels, k, method, flagged })
        }
        ClusterMethod::Kmeans => {
            let rows: Vec<Vec<f64>> = (0..n).map(|i| (1..k).map(|j| es.vectors[(i, j)]).collect()).collect();
            kmeans_assign(&rows, k, seed)
        }
    }
}

/// `argmax_{j in [2, max_k]} (lambda_{j+1} - lambda_j) / max(lambda_j, 1e-12)`
/// with 1-based `j`.
pub fn estimate_num_clusters(lambdas: &[f64], max_k: usize) -> Result<usize> {
    if lambdas.len() < 3 {
        return Err(Error::InvalidParameter("need at least 3 eigenvalues".into()));
    }
    if max_k < 2 {
        return Err(Error::InvalidParameter("max_k must be at least 2".into()));
    }
    let max_k = max_k.min(lambdas.len() - 1);
    let gap = |j: usize| (lambdas[j] - lambdas[j - 1]) / lambdas[j - 1].max(1e-12);
    Ok((2..=max_k).fold(2, |best, j| if gap(j) > gap(best) { j } else { best }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::agreement;
    use crate::graph::{generate_weak_line, karate_club, Graph, KARATE_FACTIONS};
    use crate::laplacian::build_laplacian;

    #[test]
    fn two_node() {
        let es = eigendecompose(&build_laplacian(&Graph::new(2, [(0, 1, 3.0)]).unwrap()).unwrap()).unwrap();
        assert!(es.lambdas[0].abs() < 1e-12 && (es.lambdas[1] - 2.0).abs() < 1e-12);
        let h = 0.5f64.sqrt();
        assert!((es.vectors[(0, 0)] - h).abs() < 1e-12 && (es.vectors[(1, 0)] - h).abs() < 1e-12);
        assert!((es.vectors[(0, 1)] - h).abs() < 1e-12 && (es.vectors[(1, 1)] + h).abs() < 1e-12);
    }

    #[test]
    fn karate_invariants_and_split() {
        let lap = build_laplacian(&karate_club()).unwrap();
        let es = eigendecompose(&lap).unwrap();
        assert!(es.lambdas[0].abs() <= 1e-9);
        assert!(es.lambdas.iter().all(|&l| (-1e-9..=2.0 + 1e-9).contains(&l)));
        assert!(es.max_residual(&lap) <= 1e-8);
        for j in 0..es.n() {
            assert!((es.vectors.col(j).norm_l2() - 1.0).abs() < 1e-12);
        }
        let split = spectral_cluster(&es, 2, ClusterMethod::Signs, 0).unwrap();
        let truth = ClusterAssignment { labels: KARATE_FACTIONS.to_vec(), k: 2, method: ClusterMethod::Signs, flagged: vec![] };
        assert_eq!(agreement(&split, &truth).unwrap(), 32.0 / 34.0);
    }

    #[test]
    fn weak_line_cut() {
        let lap = build_laplacian(&generate_weak_line(50, 25, 5.0, 1.0).unwrap()).unwrap();
        let es = eigendecompose(&lap).unwrap();
        let split = spectral_cluster(&es, 2, ClusterMethod::Signs, 0).unwrap();
        let left = split.labels[0];
        assert!(split.labels[..25].iter().all(|&l| l == left));
        assert!(split.labels[25..].iter().all(|&l| l != left));
        assert!(split.flagged.is_empty());
    }

    #[test]
    fn symmetric_halves_balance() {
        // two triangles joined by one edge
        let g = Graph::new(6, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0), (2, 3, 1.0)]).unwrap();
        let es = eigendecompose(&build_laplacian(&g).unwrap()).unwrap();
        for method in [ClusterMethod::Signs, ClusterMethod::Kmeans] {
            let a = spectral_cluster(&es, 2, method, 1).unwrap();
            assert_eq!(a.labels.iter().filter(|&&l| l == a.labels[0]).count(), 3);
        }
    }

    #[test]
    fn gap_examples() {
        let l = [0.0, 0.04, 0.05, 0.06, 0.9, 1.0, 1.1];
        assert_eq!(estimate_num_clusters(&l, 6).unwrap(), 4);
        assert_eq!(estimate_num_clusters(&l, 100).unwrap(), 4);
        assert_eq!(estimate_num_clusters(&[0.0, 0.1, 1.0], 5).unwrap(), 2);
        assert!(estimate_num_clusters(&[0.0, 1.0], 5).is_err());
    }

    #[test]
    fn sign_flip_invariance() {
        let lap = build_laplacian(&karate_club()).unwrap();
        let es = eigendecompose(&lap).unwrap();
        let base = spectral_cluster(&es, 4, ClusterMethod::Signs, 0).unwrap();
        let mut flipped = es.clone();
        for i in 0..flipped.n() {
            flipped.vectors[(i, 2)] *= -1.0;
        }
        let other = spectral_cluster(&flipped, 4, ClusterMethod::Signs, 0).unwrap();
        assert_eq!(agreement(&base, &other).unwrap(), 1.0);
    }

    #[test]
    fn csv_exports() {
        let es = eigendecompose(&build_laplacian(&Graph::new(2, [(0, 1, 1.0)]).unwrap()).unwrap()).unwrap();
        let mut buf = Vec::new();
        es.write_eigenvalues_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("index,lambda\n1,"));
        let mut buf = Vec::new();
        es.write_eigenvectors_csv(&mut buf, &[2]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("node,v2\n"));
    }
}
