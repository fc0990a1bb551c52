//! Discrete wave equation on a graph.
//!
//! Every node updates from its own last two values and its neighbors' last
//! value:
//!
//! ```text
//! u_i(t) = 2 u_i(t-1) - u_i(t-2) - c^2 * sum_{j in N(i) + i} L_ij u_j(t-1)
//! ```
//!
//! started from `u(-1) = u(0)`. The same recurrence written as a first-order
//! system `z(t) = M z(t-1)` with `z(t) = [u(t); u(t-1)]` is kept as an
//! independent oracle ([`WavePropagator`]).

use std::io::Write;

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::laplacian::Laplacian;
use crate::linalg::{real_eigenvalues, symmetric_eigen};

/// Default wave speed.
pub const DEFAULT_C: f64 = 1.0;

const OVERFLOW_LIMIT: f64 = 1e100;
const PARALLEL_MIN_NODES: usize = 2048;

/// Initial state `u(0)` (with `u(-1) = u(0)`).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// Independent uniform draws on `[0, 1)`, in node-index order.
    Uniform { seed: u64 },
    Explicit(Vec<f64>),
}

impl InitialCondition {
    pub fn realize(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            InitialCondition::Uniform { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..n).map(|_| rng.random::<f64>()).collect())
            }
            InitialCondition::Explicit(v) if v.len() == n => Ok(v.clone()),
            InitialCondition::Explicit(v) => Err(Error::InvalidParameter(format!(
                "initial condition has {} entries, graph has {n} nodes",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveConfig {
    pub c: f64,
    pub t_max: usize,
    pub init: InitialCondition,
}

impl WaveConfig {
    pub fn new(c: f64, t_max: usize, init: InitialCondition) -> Result<Self> {
        let cfg = Self { c, t_max, init };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_speed(self.c)?;
        if self.t_max < 2 {
            return Err(Error::InvalidParameter(format!("t_max must be >= 2, got {}", self.t_max)));
        }
        Ok(())
    }
}

fn check_speed(c: f64) -> Result<()> {
    if c > 0.0 && c < std::f64::consts::SQRT_2 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("wave speed must lie in (0, sqrt 2), got {c}")))
    }
}

/// Per-node time series, row `i` = `[u_i(0), ..., u_i(t_max - 1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMatrix {
    n: usize,
    t_max: usize,
    values: Vec<f64>,
}

impl TraceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let t_max = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t_max) {
            return Err(Error::InvalidParameter("ragged trace rows".into()));
        }
        Ok(Self { n, t_max, values: rows.into_iter().flatten().collect() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.t_max..(i + 1) * self.t_max]
    }

    pub fn at(&self, i: usize, t: usize) -> f64 {
        self.values[i * self.t_max + t]
    }

    /// State vector `u(t)` across all nodes.
    pub fn column(&self, t: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.at(i, t)).collect()
    }

    /// The first `t` samples of every node.
    pub fn truncated(&self, t: usize) -> TraceMatrix {
        let t = t.min(self.t_max);
        let values = (0..self.n).flat_map(|i| self.node(i)[..t].iter().copied()).collect();
        TraceMatrix { n: self.n, t_max: t, values }
    }

    /// One CSV row per node, `t_max` columns, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.n {
            let row: Vec<String> = self.node(i).iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// One synchronous update of a single node, given its own last two values
/// and `coupling = sum_j L_ij u_j(t-1)` over its closed neighborhood.
pub fn step_local(u_prev: f64, u_prev2: f64, coupling: f64, c: f64) -> f64 {
    2.0 * u_prev - u_prev2 - c * c * coupling
}

/// `sum_j L_ij u_j` for row `i`, using only node `i` and its neighbors.
fn coupling(lap: &Laplacian, i: usize, u: &[f64]) -> f64 {
    lap.row(i).map(|(j, l)| l * u[j]).sum()
}

/// Evolves the wave equation for `cfg.t_max` samples.
///
/// Each round reads only the previous two states, so node updates within a
/// round are independent; the result does not depend on the worker count.
pub fn propagate(lap: &Laplacian, cfg: &WaveConfig) -> Result<TraceMatrix> {
    cfg.validate()?;
    let u0 = cfg.init.realize(lap.n())?;
    evolve(lap, cfg.c, cfg.t_max, u0)
}

fn evolve(lap: &Laplacian, c: f64, t_max: usize, u0: Vec<f64>) -> Result<TraceMatrix> {
    let n = lap.n();

    let mut values = vec![0.0; n * t_max];
    for (i, &v) in u0.iter().enumerate() {
        values[i * t_max] = v;
    }
    let mut prev2 = u0.clone();
    let mut prev = u0;
    let mut next = vec![0.0; n];

    let update = |i: usize, prev: &[f64], prev2: &[f64]| {
        step_local(prev[i], prev2[i], coupling(lap, i, prev), c)
    };

    for t in 1..t_max {
        if n >= PARALLEL_MIN_NODES {
            next.par_iter_mut().enumerate().for_each(|(i, x)| *x = update(i, &prev, &prev2));
        } else {
            for (i, x) in next.iter_mut().enumerate() {
                *x = update(i, &prev, &prev2);
            }
        }
        if next.iter().any(|v| !v.is_finite() || v.abs() > OVERFLOW_LIMIT) {
            return Err(Error::NumericalOverflow { step: t });
        }
        for (i, &v) in next.iter().enumerate() {
            values[i * t_max + t] = v;
        }
        std::mem::swap(&mut prev2, &mut prev);
        std::mem::swap(&mut prev, &mut next);
    }
    Ok(TraceMatrix { n, t_max, values })
}

/// Dense first-order propagator `M = [[2I - c^2 L, -I], [I, 0]]`.
#[derive(Debug, Clone)]
pub struct WavePropagator {
    pub m: Mat<f64>,
}

pub fn build_m(lap: &Laplacian, c: f64) -> Result<WavePropagator> {
    check_speed(c)?;
    let n = lap.n();
    let mut m = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, i)] += 2.0;
        for (j, l) in lap.row(i) {
            m[(i, j)] -= c * c * l;
        }
        m[(i, n + i)] = -1.0;
        m[(n + i, i)] = 1.0;
    }
    Ok(WavePropagator { m })
}

impl WavePropagator {
    pub fn n(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        (0..self.m.nrows()).map(|i| (0..z.len()).map(|j| self.m[(i, j)] * z[j]).sum()).collect()
    }

    pub fn eigenvalues(&self) -> Result<Vec<c64>> {
        real_eigenvalues(&self.m)
    }

    /// Trace generated by `z(t) = M^t z(0)`, `z(0) = [u0; u0]`.
    pub fn power_trace(&self, u0: &[f64], t_max: usize) -> TraceMatrix {
        let n = self.n();
        let mut z: Vec<f64> = u0.iter().chain(u0.iter()).copied().collect();
        let mut rows = vec![Vec::with_capacity(t_max); n];
        for t in 0..t_max {
            if t > 0 {
                z = self.apply(&z);
            }
            for (i, r) in rows.iter_mut().enumerate() {
                r.push(z[i]);
            }
        }
        TraceMatrix::from_rows(rows).expect("rows have equal length")
    }

    /// Smallest positive frequency among the eigenvalues of `M`, skipping
    /// the (numerically split) double root at 1.
    pub fn lowest_frequency(&self) -> Result<f64> {
        self.eigenvalues()?
            .into_iter()
            .map(|a| a.arg().abs())
            .filter(|&w| w > ZERO_FREQUENCY_TOL)
            .min_by(f64::total_cmp)
            .ok_or(Error::InsufficientModes { needed: 1, available: 0 })
    }
}

/// Frequencies below this are attributed to the constant mode. The double
/// eigenvalue 1 of `M` is defective, so rounding splits it by O(sqrt(eps)).
pub const ZERO_FREQUENCY_TOL: f64 = 1e-5;

/// Eigenvalue pair of `M` belonging to Laplacian eigenvalue `lambda`.
pub fn alpha_from_lambda(lambda: f64, c: f64) -> Result<(c64, c64)> {
    check_speed(c)?;
    if !(-1e-12..=2.0 + 1e-12).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("Laplacian eigenvalue {lambda} outside [0, 2]")));
    }
    let lambda = lambda.clamp(0.0, 2.0);
    let re = (2.0 - c * c * lambda) / 2.0;
    // c^2 lambda^2 - 4 lambda <= 0 on the admissible range, so the root is imaginary.
    let im = (c / 2.0) * (4.0 * lambda - c * c * lambda * lambda).max(0.0).sqrt();
    Ok((c64::new(re, im), c64::new(re, -im)))
}

/// `omega = arccos(1 - c^2 lambda / 2)`, the argument of [`alpha_from_lambda`].
pub fn omega_from_lambda(lambda: f64, c: f64) -> f64 {
    (1.0 - c * c * lambda / 2.0).clamp(-1.0, 1.0).acos()
}

/// Inverse map `lambda = (2 - 2 cos omega) / c^2`.
pub fn lambda_from_omega(omega: f64, c: f64) -> f64 {
    (2.0 - 2.0 * omega.cos()) / (c * c)
}

/// Closed-form state `u(t)` from the orthonormal eigen-expansion
///
/// ```text
/// u(t) = sum_j (u0 . v_j) (p_j e^{i t w_j} + q_j e^{-i t w_j}) v_j,
/// p_j = (1 + i tan(w_j / 2)) / 2,  q_j = conj(p_j)
/// ```
///
/// Only valid when `L` is symmetric (regular graphs).
pub fn closed_form_trace(lap: &Laplacian, u0: &[f64], c: f64, t: usize) -> Result<Vec<f64>> {
    check_speed(c)?;
    if u0.len() != lap.n() {
        return Err(Error::InvalidParameter("u0 length differs from node count".into()));
    }
    if lap.asymmetry() > 1e-12 {
        return Err(Error::NotSymmetric);
    }
    let n = lap.n();
    let (lambdas, vecs) = symmetric_eigen(&lap.to_dense())?;
    let mut u = vec![0.0; n];
    let tf = t as f64;
    for (j, &lambda) in lambdas.iter().enumerate() {
        let proj: f64 = (0..n).map(|i| u0[i] * vecs[(i, j)]).sum();
        let w = omega_from_lambda(lambda.clamp(0.0, 2.0), c);
        let p = c64::new(0.5, 0.5 * (w / 2.0).tan());
        let q = p.conj();
        let phase = p * c64::from_polar(1.0, tf * w) + q * c64::from_polar(1.0, -tf * w);
        for (i, ui) in u.iter_mut().enumerate() {
            *ui += proj * phase.re * vecs[(i, j)];
        }
    }
    Ok(u)
}
