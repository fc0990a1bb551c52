//! Delay-embedded exact dynamic mode decomposition of a single node trace.
//!
//! Everything here sees one scalar time series and nothing else, which is
//! what makes the clustering decentralized.

use faer::{c64, Mat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig, lstsq, thin_svd};
use crate::wave::{lambda_from_omega, TraceMatrix};

/// Scalar types a trace may hold.
pub trait Sample: Copy {
    fn to_c64(self) -> c64;
}

impl Sample for f64 {
    fn to_c64(self) -> c64 {
        c64::new(self, 0.0)
    }
}

impl Sample for c64 {
    fn to_c64(self) -> c64 {
        self
    }
}

/// Hankel snapshot pair `X[r][c] = trace[r + c]`, `Y[r][c] = trace[r + c + 1]`.
#[derive(Debug, Clone)]
pub struct DelayEmbedding {
    pub k_rows: usize,
    pub m_cols: usize,
    pub x: Mat<c64>,
    pub y: Mat<c64>,
}

pub fn delay_embed<S: Sample>(trace: &[S], k_rows: usize, m_cols: usize) -> Result<DelayEmbedding> {
    if k_rows < 2 || m_cols < 2 {
        return Err(Error::InvalidParameter(format!(
            "embedding needs K > 1 and M > 1, got K={k_rows}, M={m_cols}"
        )));
    }
    if trace.len() < k_rows + m_cols {
        return Err(Error::InsufficientSamples { len: trace.len(), k_rows, m_cols });
    }
    let x = Mat::from_fn(k_rows, m_cols, |r, c| trace[r + c].to_c64());
    let y = Mat::from_fn(k_rows, m_cols, |r, c| trace[r + c + 1].to_c64());
    Ok(DelayEmbedding { k_rows, m_cols, x, y })
}

impl DelayEmbedding {
    /// First snapshot `x(0)`.
    pub fn x0(&self) -> Vec<c64> {
        self.x.col(0).iter().copied().collect()
    }
}

/// Embedding depth `K` and column count `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingShape {
    pub k_rows: usize,
    pub m_cols: usize,
}

impl EmbeddingShape {
    /// `K = min(2N, T/2)`, `M = T - K`.
    pub fn default_for(n: usize, t_max: usize) -> Self {
        let k_rows = (2 * n).min(t_max / 2);
        Self { k_rows, m_cols: t_max - k_rows }
    }

    /// `K = M = T/2`.
    pub fn square(t_max: usize) -> Self {
        Self { k_rows: t_max / 2, m_cols: t_max - t_max / 2 }
    }

    pub fn t_max(&self) -> usize {
        self.k_rows + self.m_cols
    }
}

/// Default relative singular-value cutoff.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Eigenvalues with modulus below this are treated as zero.
pub const MIN_MODULUS: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct DmdResult {
    /// Sorted by decreasing real part; the `+omega` member of a conjugate
    /// pair comes first.
    pub eigenvalues: Vec<c64>,
    /// Column `j` is the unit-norm mode of `eigenvalues[j]`.
    pub modes: Mat<c64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Least-squares solution of `modes * amplitudes_hat = x(0)`.
    pub amplitudes_hat: Vec<c64>,
    /// `a_j = modes[(0, j)] * amplitudes_hat[j]`.
    pub amplitudes: Vec<c64>,
}

pub fn exact_dmd(emb: &DelayEmbedding, rank_tol: f64) -> Result<DmdResult> {
    let svd = thin_svd(&emb.x)?;
    let sigma_max = svd.s.first().copied().unwrap_or(0.0);
    if !(sigma_max > 0.0) || !sigma_max.is_finite() {
        return Err(Error::DegenerateSignal);
    }
    let r = svd.s.iter().take_while(|&&s| s > rank_tol * sigma_max).count();
    let u_r = svd.u.subcols(0, r);
    // V Sigma^-1
    let v_sinv = Mat::from_fn(svd.v.nrows(), r, |i, j| svd.v[(i, j)] / svd.s[j]);

    let y_v_sinv = &emb.y * &v_sinv;
    let a_tilde = u_r.adjoint() * &y_v_sinv;
    let e = eig(&a_tilde)?;

    let k = emb.k_rows;
    let mut pairs: Vec<(c64, Vec<c64>)> = Vec::new();
    for (j, &mu) in e.values.iter().enumerate() {
        if mu.norm() < MIN_MODULUS {
            continue;
        }
        let phi = &y_v_sinv * e.vectors.col(j);
        let norm = phi.norm_l2();
        let scale = if norm > 0.0 { mu * norm } else { mu };
        pairs.push((mu, (0..k).map(|i| phi[i] / scale).collect()));
    }
    order_modes(&mut pairs);

    let mut modes = Mat::zeros(k, pairs.len());
    for (j, (_, phi)) in pairs.iter().enumerate() {
        for (i, &z) in phi.iter().enumerate() {
            modes[(i, j)] = z;
        }
    }
    Ok(DmdResult {
        eigenvalues: pairs.into_iter().map(|(mu, _)| mu).collect(),
        modes,
        singular_values: svd.s,
        rank: r,
        amplitudes_hat: vec![],
        amplitudes: vec![],
    })
}

const TIE_TOL: f64 = 1e-9;

/// Decreasing real part; conjugate pairs (equal real parts up to rounding)
/// put the positive imaginary part first.
fn order_modes(pairs: &mut [(c64, Vec<c64>)]) {
    pairs.sort_by(|a, b| b.0.re.total_cmp(&a.0.re).then(b.0.im.total_cmp(&a.0.im)));
    let mut i = 0;
    while i + 1 < pairs.len() {
        let (a, b) = (pairs[i].0, pairs[i + 1].0);
        if (a.re - b.re).abs() < TIE_TOL && a.im < b.im {
            pairs.swap(i, i + 1);
            i += 2;
        } else {
            i += 1;
        }
    }
}

/// Condition numbers above this mean two modes coincide.
const MAX_MODE_CONDITION: f64 = 1e14;

/// Solves `modes * a_hat = x0` and rescales by the first mode component.
pub fn solve_amplitudes(result: &mut DmdResult, x0: &[c64]) -> Result<()> {
    let (a_hat, cond) = lstsq(&result.modes, x0)?;
    if cond > MAX_MODE_CONDITION {
        return Err(Error::RankDeficientModes { cond });
    }
    result.amplitudes = (0..a_hat.len()).map(|j| result.modes[(0, j)] * a_hat[j]).collect();
    result.amplitudes_hat = a_hat;
    Ok(())
}

/// One recovered frequency at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralMode {
    pub omega: f64,
    pub lambda: f64,
    pub amplitude: c64,
}

/// Modes below this frequency belong to the constant eigenvector.
pub const CONSTANT_MODE_OMEGA: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSpectrum {
    pub node: usize,
    pub method: &'static str,
    /// Sorted by `omega` ascending.
    pub modes: Vec<SpectralMode>,
}

#[derive(Serialize, Deserialize)]
struct ModeJson {
    omega: f64,
    lambda: f64,
    re_a: f64,
    im_a: f64,
}

#[derive(Serialize, Deserialize)]
struct SpectrumJson {
    node: usize,
    method: String,
    modes: Vec<ModeJson>,
}

impl LocalSpectrum {
    /// Modes other than the constant one.
    pub fn oscillatory(&self) -> impl Iterator<Item = &SpectralMode> {
        self.modes.iter().filter(|m| m.omega >= CONSTANT_MODE_OMEGA)
    }

    /// Lowest nonzero frequency.
    pub fn omega2(&self) -> Option<f64> {
        self.oscillatory().next().map(|m| m.omega)
    }

    /// Real parts of the first `count` oscillatory amplitudes.
    pub fn coefficients(&self, count: usize) -> Result<Vec<f64>> {
        let coeffs: Vec<f64> = self.oscillatory().take(count).map(|m| m.amplitude.re).collect();
        if coeffs.len() < count {
            return Err(Error::InsufficientModes { needed: count, available: coeffs.len() });
        }
        Ok(coeffs)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let j = SpectrumJson {
            node: self.node,
            method: self.method.to_string(),
            modes: self
                .modes
                .iter()
                .map(|m| ModeJson { omega: m.omega, lambda: m.lambda, re_a: m.amplitude.re, im_a: m.amplitude.im })
                .collect(),
        };
        serde_json::to_value(j).expect("plain data serializes")
    }
}

/// Filtering applied when turning a [`DmdResult`] into a [`LocalSpectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumOptions {
    pub rank_tol: f64,
    /// Modes with `| |mu| - 1 |` above this are dropped.
    pub unit_circle_tol: f64,
    /// `|mu_a - conj(mu_b)|` below this marks a conjugate pair.
    pub conjugate_tol: f64,
    /// Frequencies closer than this are one mode.
    pub merge_tol: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { rank_tol: DEFAULT_RANK_TOL, unit_circle_tol: 0.05, conjugate_tol: 1e-8, merge_tol: 1e-3 }
    }
}

pub fn local_spectrum<S: Sample>(
    node: usize,
    trace: &[S],
    shape: EmbeddingShape,
    c: f64,
    opts: &SpectrumOptions,
) -> Result<LocalSpectrum> {
    let emb = delay_embed(trace, shape.k_rows, shape.m_cols)?;
    let mut res = exact_dmd(&emb, opts.rank_tol)?;
    solve_amplitudes(&mut res, &emb.x0())?;
    Ok(LocalSpectrum { node, method: "dmd", modes: collapse_modes(&res, c, opts) })
}

/// Drops off-circle eigenvalues, folds conjugate pairs onto `omega >= 0` and
/// merges near-duplicate frequencies.
pub fn collapse_modes(res: &DmdResult, c: f64, opts: &SpectrumOptions) -> Vec<SpectralMode> {
    let on_circle: Vec<(c64, c64)> = res
        .eigenvalues
        .iter()
        .zip(&res.amplitudes)
        .filter(|(mu, _)| (mu.norm() - 1.0).abs() <= opts.unit_circle_tol)
        .map(|(&mu, &a)| (mu, a))
        .collect();

    let mut folded: Vec<(f64, c64)> = Vec::new();
    for (idx, &(mu, a)) in on_circle.iter().enumerate() {
        if mu.im < 0.0 {
            let has_partner = on_circle
                .iter()
                .enumerate()
                .any(|(j, &(nu, _))| j != idx && nu.im >= 0.0 && (nu - mu.conj()).norm() < opts.conjugate_tol);
            if has_partner {
                continue;
            }
        }
        folded.push((mu.arg().abs(), a));
    }
    folded.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut merged: Vec<(f64, c64, f64)> = Vec::new();
    for (omega, a) in folded {
        match merged.last_mut() {
            Some(last) if omega - last.0 < opts.merge_tol => {
                if a.norm() > last.2 {
                    last.0 = omega;
                    last.2 = a.norm();
                }
                last.1 += a;
            }
            _ => merged.push((omega, a, a.norm())),
        }
    }
    merged
        .into_iter()
        .map(|(omega, amplitude, _)| SpectralMode { omega, lambda: lambda_from_omega(omega, c), amplitude })
        .collect()
}

/// Runs [`local_spectrum`] on every node of a trace matrix, in parallel.
pub fn all_local_spectra(
    traces: &TraceMatrix,
    shape: EmbeddingShape,
    c: f64,
    opts: &SpectrumOptions,
) -> Vec<Result<LocalSpectrum>> {
    (0..traces.n())
        .into_par_iter()
        .map(|i| local_spectrum(i, &traces.node(i)[..shape.t_max().min(traces.t_max())], shape, c, opts))
        .collect()
}

/// Outcome of [`adaptive_spectrum`].
#[derive(Debug, Clone)]
pub struct AdaptiveOutcome {
    pub spectrum: LocalSpectrum,
    pub t_max: usize,
    pub converged: bool,
}

/// Doubles the trace length, starting from `t_start`, until the `k` lowest
/// nonzero frequencies move by less than `tol` between rounds or `t_limit`
/// is reached. `trace_of(t)` must return at least `t` samples.
pub fn adaptive_spectrum<F>(
    node: usize,
    mut trace_of: F,
    k: usize,
    t_start: usize,
    t_limit: usize,
    c: f64,
    opts: &SpectrumOptions,
    tol: f64,
) -> Result<AdaptiveOutcome>
where
    F: FnMut(usize) -> Result<Vec<f64>>,
{
    if t_start < 4 || t_limit < t_start {
        return Err(Error::InvalidParameter("adaptive growth needs 4 <= t_start <= t_limit".into()));
    }
    let lowest = |s: &LocalSpectrum| s.oscillatory().take(k).map(|m| m.omega).collect::<Vec<_>>();
    let mut t = t_start;
    let mut previous: Option<Vec<f64>> = None;
    loop {
        let trace = trace_of(t)?;
        let spectrum = local_spectrum(node, &trace[..t], EmbeddingShape::square(t), c, opts)?;
        let current = lowest(&spectrum);
        let converged = previous.as_ref().is_some_and(|p| {
            p.len() == k && current.len() == k && p.iter().zip(&current).all(|(a, b)| (a - b).abs() < tol)
        });
        if converged || 2 * t > t_limit {
            return Ok(AdaptiveOutcome { spectrum, t_max: t, converged });
        }
        previous = Some(current);
        t *= 2;
    }
}
