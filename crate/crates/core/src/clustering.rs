//! Cluster labels from per-node spectra, and permutation-invariant comparison.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dmd::LocalSpectrum;
use crate::error::{Error, Result};
use crate::kmeans::{kmeans, KMeansOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterMethod {
    Signs,
    Kmeans,
}

impl std::fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClusterMethod::Signs => "signs",
            ClusterMethod::Kmeans => "kmeans",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
    pub method: ClusterMethod,
    /// Nodes whose label rests on a near-zero or missing coefficient.
    pub flagged: Vec<usize>,
}

impl ClusterAssignment {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// CSV with header `node,label`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "node,label")?;
        for (i, l) in self.labels.iter().enumerate() {
            writeln!(w, "{i},{l}")?;
        }
        Ok(())
    }
}

/// Bits needed to label `k` clusters.
pub fn bits_for_k(k: usize) -> usize {
    let mut bits = 0;
    while (1usize << bits) < k {
        bits += 1;
    }
    bits
}

/// `sum_{j=1..bits} A_j 2^(j-1)` where `A_j` is set when `coeffs[j] > 0`.
/// `coeffs[0]` belongs to the constant mode and is skipped.
pub fn sign_encode(coeffs: &[f64], bits: usize) -> Result<usize> {
    if coeffs.len() < bits + 1 {
        return Err(Error::InsufficientModes { needed: bits + 1, available: coeffs.len() });
    }
    Ok((1..=bits).filter(|&j| coeffs[j] > 0.0).map(|j| 1 << (j - 1)).sum())
}

/// Decentralized labels: each node encodes the signs of its own lowest
/// oscillatory coefficients.
pub fn sign_assign(spectra: &[LocalSpectrum], k: usize) -> Result<ClusterAssignment> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    let bits = bits_for_k(k);
    let mut labels = Vec::with_capacity(spectra.len());
    for s in spectra {
        let mut coeffs = vec![0.0];
        coeffs.extend(s.coefficients(bits)?);
        labels.push(sign_encode(&coeffs, bits)?);
    }
    Ok(ClusterAssignment { labels, k, method: ClusterMethod::Signs, flagged: vec![] })
}

/// Rows of real coefficients `Re a_2 .. Re a_k` per node, each column scaled
/// to unit norm. Nodes missing a mode get zeros there and are reported.
pub fn coefficient_rows(spectra: &[LocalSpectrum], k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let dim = k.saturating_sub(1);
    let mut deficient = Vec::new();
    let mut rows: Vec<Vec<f64>> = spectra
        .iter()
        .map(|s| {
            let mut r: Vec<f64> = s.oscillatory().take(dim).map(|m| m.amplitude.re).collect();
            if r.len() < dim {
                deficient.push(s.node);
                r.resize(dim, 0.0);
            }
            r
        })
        .collect();
    for j in 0..dim {
        let norm = rows.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
        if norm > 0.0 {
            for r in rows.iter_mut() {
                r[j] /= norm;
            }
        }
    }
    (rows, deficient)
}

pub fn kmeans_assign(rows: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterAssignment> {
    let fit = kmeans(rows, k, seed, &KMeansOptions::default())?;
    Ok(ClusterAssignment { labels: fit.labels, k, method: ClusterMethod::Kmeans, flagged: vec![] })
}

/// Largest fraction of nodes with matching labels over all one-to-one
/// relabelings.
pub fn agreement(a: &ClusterAssignment, b: &ClusterAssignment) -> Result<f64> {
    label_agreement(&a.labels, &b.labels)
}

pub fn label_agreement(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Ok(1.0);
    }
    let size = a.iter().chain(b).max().map_or(0, |m| m + 1);
    let mut confusion = vec![vec![0i64; size]; size];
    for (&x, &y) in a.iter().zip(b) {
        confusion[x][y] += 1;
    }
    let matched = max_assignment(&confusion);
    Ok(matched as f64 / a.len() as f64)
}

/// Maximum-weight perfect matching on a square matrix (Hungarian method on
/// the negated weights).
fn max_assignment(w: &[Vec<i64>]) -> i64 {
    let n = w.len();
    if n == 0 {
        return 0;
    }
    let big = w.iter().flatten().copied().max().unwrap_or(0);
    let cost = |i: usize, j: usize| big - w[i - 1][j - 1];
    // 1-based potentials; p[j] is the row matched to column j
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| w[p[j] - 1][j - 1]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmd::SpectralMode;
    use faer::c64;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn brute_force(a: &[usize], b: &[usize]) -> f64 {
        let size = a.iter().chain(b).max().unwrap() + 1;
        permutations(size)
            .iter()
            .map(|perm| a.iter().zip(b).filter(|(x, y)| perm[**x] == **y).count())
            .max()
            .unwrap() as f64
            / a.len() as f64
    }

    #[test]
    fn encoding_examples() {
        assert_eq!(sign_encode(&[9.0, 0.3, -0.2], 2).unwrap(), 1);
        assert_eq!(sign_encode(&[-1.0, 0.3, 0.2], 2).unwrap(), 3);
        assert_eq!(sign_encode(&[1.0, -0.3, -0.2], 2).unwrap(), 0);
        assert!(matches!(sign_encode(&[1.0, 0.3], 2), Err(Error::InsufficientModes { .. })));
        assert_eq!([1, 2, 3, 4, 5, 7, 8, 9].map(bits_for_k), [0, 1, 2, 2, 3, 3, 3, 4]);
    }

    #[test]
    fn agreement_examples() {
        let a = vec![0, 0, 1, 1, 2];
        assert_eq!(label_agreement(&a, &a).unwrap(), 1.0);
        assert_eq!(label_agreement(&a, &[2, 2, 0, 0, 1]).unwrap(), 1.0);
        let split: Vec<usize> = (0..34).map(|i| usize::from(i >= 17)).collect();
        let mut flipped = split.clone();
        flipped[5] = 1;
        assert_eq!(label_agreement(&split, &flipped).unwrap(), 33.0 / 34.0);
        assert_eq!(label_agreement(&[0], &[0, 1]).unwrap_err(), Error::LengthMismatch(1, 2));
    }

    #[test]
    fn agreement_matches_brute_force() {
        let mut state = 12345u64;
        let mut next = |m: u64| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) % m) as usize
        };
        for _ in 0..200 {
            let n = 1 + next(20);
            let ka = 1 + next(5) as u64;
            let kb = 1 + next(5) as u64;
            let a: Vec<usize> = (0..n).map(|_| next(ka)).collect();
            let b: Vec<usize> = (0..n).map(|_| next(kb)).collect();
            let got = label_agreement(&a, &b).unwrap();
            assert_eq!(got, brute_force(&a, &b));
            assert_eq!(got, label_agreement(&b, &a).unwrap());
        }
    }

    fn spectrum(node: usize, coeffs: &[f64]) -> LocalSpectrum {
        let mut modes = vec![SpectralMode { omega: 0.0, lambda: 0.0, amplitude: c64::new(1.0, 0.0) }];
        for (j, &a) in coeffs.iter().enumerate() {
            modes.push(SpectralMode { omega: 0.1 * (j + 1) as f64, lambda: 0.0, amplitude: c64::new(a, 0.3) });
        }
        LocalSpectrum { node, method: "dmd", modes }
    }

    #[test]
    fn sign_assign_invariances() {
        let coeffs = [[0.5, 0.1], [-0.2, 0.4], [0.3, -0.7], [-0.1, -0.1]];
        let spectra: Vec<LocalSpectrum> = coeffs.iter().enumerate().map(|(i, c)| spectrum(i, c)).collect();
        let base = sign_assign(&spectra, 4).unwrap();
        assert_eq!(base.labels, vec![3, 2, 1, 0]);
        let scaled: Vec<LocalSpectrum> =
            coeffs.iter().enumerate().map(|(i, c)| spectrum(i, &[2.5 * c[0], 2.5 * c[1]])).collect();
        assert_eq!(sign_assign(&scaled, 4).unwrap().labels, base.labels);
        let flipped: Vec<LocalSpectrum> = coeffs.iter().enumerate().map(|(i, c)| spectrum(i, &[-c[0], c[1]])).collect();
        assert_eq!(agreement(&sign_assign(&flipped, 4).unwrap(), &base).unwrap(), 1.0);
    }

    #[test]
    fn coefficient_rows_fill_missing() {
        let spectra = vec![spectrum(0, &[3.0, 4.0]), spectrum(1, &[4.0]), spectrum(2, &[0.0, -3.0])];
        let (rows, deficient) = coefficient_rows(&spectra, 3);
        assert_eq!(deficient, vec![1]);
        assert_eq!(rows[1][1], 0.0);
        assert!((rows[0][0] - 0.6).abs() < 1e-15 && (rows[1][0] - 0.8).abs() < 1e-15);
        assert!((rows[0][1] - 0.8).abs() < 1e-15 && (rows[2][1] + 0.6).abs() < 1e-15);
    }

    #[test]
    fn csv_export() {
        let a = ClusterAssignment { labels: vec![1, 0], k: 2, method: ClusterMethod::Signs, flagged: vec![] };
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "node,label\n0,1\n1,0\n");
    }
}
