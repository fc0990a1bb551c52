//! Row-normalized graph Laplacian `L = I - D^{-1} W`.
//!
//! For non-regular graphs this operator is not symmetric, but it is similar
//! to the symmetric normalized Laplacian, so its eigenvalues are real and
//! lie in `[0, 2]`.

use faer::Mat;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Laplacian in compressed-row form. Each row holds the diagonal entry
/// followed by the neighbor entries in adjacency order.
#[derive(Debug, Clone)]
pub struct Laplacian {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    degrees: Vec<f64>,
}

/// Builds `L_ii = 1`, `L_ij = -W_ij / sum_l W_il` for every edge.
///
/// Fails on isolated nodes and on disconnected graphs.
pub fn build_laplacian(g: &Graph) -> Result<Laplacian> {
    let n = g.n();
    if n == 0 {
        return Err(Error::InvalidGraph("graph has no nodes".into()));
    }
    let adj = g.adjacency();
    if let Some(i) = adj.iter().position(|nb| nb.is_empty()) {
        return Err(Error::IsolatedNode(i));
    }
    let components = g.components();
    if components != 1 {
        return Err(Error::Disconnected { components });
    }

    let degrees = g.degrees();
    let nnz = n + 2 * g.num_edges();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(nnz);
    let mut vals = Vec::with_capacity(nnz);
    row_ptr.push(0);
    for (i, nb) in adj.iter().enumerate() {
        cols.push(i);
        vals.push(1.0);
        for &(j, w) in nb {
            cols.push(j);
            vals.push(-w / degrees[i]);
        }
        row_ptr.push(cols.len());
    }
    Ok(Laplacian { n, row_ptr, cols, vals, degrees })
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Weighted degrees of the underlying graph.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Nonzero entries `(j, L_ij)` of row `i`, node `i` itself first.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `out = L u`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).map(|(j, l)| l * u[j]).sum();
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Max `|L_ij - L_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }
}
