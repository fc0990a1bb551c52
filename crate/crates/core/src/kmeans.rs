//! Seeded k-means++ with restarts.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when the relative inertia change drops below this.
    pub tol: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self { restarts: 100, max_iter: 1000, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// Labels renumbered by first appearance.
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn distinct_rows(rows: &[Vec<f64>]) -> usize {
    let mut seen: Vec<&Vec<f64>> = Vec::new();
    for r in rows {
        if !seen.contains(&r) {
            seen.push(r);
        }
    }
    seen.len()
}

/// Clusters `rows` into `k` groups. Deterministic for a fixed `seed`,
/// whatever the thread count.
pub fn kmeans(rows: &[Vec<f64>], k: usize, seed: u64, opts: &KMeansOptions) -> Result<KMeansFit> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("k-means needs at least one row".into()));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidParameter("k-means rows differ in dimension".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let distinct = distinct_rows(rows);
    if k > distinct {
        return Err(Error::TooFewDistinctRows { k, distinct });
    }
    let fits: Vec<KMeansFit> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
            lloyd(rows, plus_plus(rows, k, &mut rng), opts)
        })
        .collect();
    let best = fits
        .into_iter()
        .reduce(|best, f| if f.inertia < best.inertia { f } else { best })
        .expect("at least one restart");
    Ok(canonicalize(best))
}

fn plus_plus(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![rows[rng.random_range(0..rows.len())].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| dist2(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            WeightedIndex::new(&d2).expect("nonnegative weights with positive sum").sample(rng)
        } else {
            rng.random_range(0..rows.len())
        };
        let c = rows[pick].clone();
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(dist2(r, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(rows: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let labels = rows
        .iter()
        .map(|r| {
            let (best, d) = centroids
                .iter()
                .enumerate()
                .map(|(j, c)| (j, dist2(r, c)))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            inertia += d;
            best
        })
        .collect();
    (labels, inertia)
}

fn lloyd(rows: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, opts: &KMeansOptions) -> KMeansFit {
    let dim = rows[0].len();
    let (mut labels, mut inertia) = assign(rows, &centroids);
    for _ in 0..opts.max_iter {
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (r, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(r) {
                *s += x;
            }
        }
        for (j, c) in centroids.iter_mut().enumerate() {
            // an emptied cluster keeps its previous centroid
            if counts[j] > 0 {
                *c = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        let (new_labels, new_inertia) = assign(rows, &centroids);
        let change = (inertia - new_inertia).abs() / inertia.max(f64::MIN_POSITIVE);
        labels = new_labels;
        inertia = new_inertia;
        if change < opts.tol {
            break;
        }
    }
    KMeansFit { labels, centroids, inertia }
}

fn canonicalize(fit: KMeansFit) -> KMeansFit {
    let mut map = vec![usize::MAX; fit.centroids.len()];
    let mut next = 0;
    for &l in &fit.labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    let mut centroids = vec![Vec::new(); fit.centroids.len()];
    let mut spare = next;
    for (old, c) in fit.centroids.into_iter().enumerate() {
        if map[old] == usize::MAX {
            map[old] = spare;
            spare += 1;
        }
        centroids[map[old]] = c;
    }
    KMeansFit { labels: fit.labels.iter().map(|&l| map[l]).collect(), centroids, inertia: fit.inertia }
}
