//! End-to-end experiments: clustering runs, minimum-`T_max` searches and
//! frequency-error sweeps.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{
    agreement, coefficient_rows, kmeans_assign, sign_assign, ClusterAssignment, ClusterMethod,
};
use crate::dmd::{all_local_spectra, EmbeddingShape, LocalSpectrum, SpectrumOptions};
use crate::error::{Error, Result};
use crate::fft::{fft_local_spectrum, fft_omega2_estimate, Normalization, DEFAULT_THRESHOLD};
use crate::graph::{
    generate_planted_partition, generate_ring, generate_weak_line, karate_club, parse_edge_list, Graph,
    ParseOptions, PlantedPartition,
};
use crate::laplacian::{build_laplacian, Laplacian};
use crate::spectral::{eigendecompose, estimate_num_clusters, spectral_cluster, EigenSystem, ORACLE_LIMIT};
use crate::wave::{build_m, omega_from_lambda, propagate, InitialCondition, TraceMatrix, WaveConfig, DEFAULT_C};

/// Graphs above this size need an explicit opt-in.
pub const LARGE_GRAPH_NODES: usize = 2000;

/// Largest `2N` for which the dense propagator spectrum is used as the
/// frequency reference.
const PROPAGATOR_ORACLE_LIMIT: usize = 2000;

/// Where the graph comes from.
///
/// Text form: `karate`, `line[:n:weak_pos:w_strong:w_weak]`, `ring:n[:w]`,
/// `planted[:blocks:block_size:p_in:p_out:seed]`, `file:PATH`, `file1:PATH`
/// (1-based labels).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GraphSource {
    Karate,
    WeakLine { n: usize, weak_pos: usize, w_strong: f64, w_weak: f64 },
    Ring { n: usize, w: f64 },
    Planted(PlantedPartition),
    File { path: PathBuf, one_based: bool },
}

impl GraphSource {
    /// The 50-node line with a weak edge between nodes 24 and 25.
    pub fn weak_line() -> Self {
        GraphSource::WeakLine { n: 50, weak_pos: 25, w_strong: 5.0, w_weak: 1.0 }
    }

    pub fn load(&self) -> Result<LoadedGraph> {
        let (graph, truth) = match self {
            GraphSource::Karate => (karate_club(), None),
            GraphSource::WeakLine { n, weak_pos, w_strong, w_weak } => {
                (generate_weak_line(*n, *weak_pos, *w_strong, *w_weak)?, None)
            }
            GraphSource::Ring { n, w } => (generate_ring(*n, *w)?, None),
            GraphSource::Planted(p) => {
                let pg = generate_planted_partition(p)?;
                (pg.graph, Some(pg.labels))
            }
            GraphSource::File { path, one_based } => {
                let text = std::fs::read_to_string(path)?;
                (parse_edge_list(&text, ParseOptions { one_based: *one_based, ..Default::default() })?, None)
            }
        };
        Ok(LoadedGraph { graph, truth })
    }
}

#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    /// Generator labels, when the source plants clusters.
    pub truth: Option<Vec<usize>>,
}

impl fmt::Display for GraphSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSource::Karate => write!(f, "karate"),
            GraphSource::WeakLine { n, weak_pos, w_strong, w_weak } => {
                write!(f, "line:{n}:{weak_pos}:{w_strong}:{w_weak}")
            }
            GraphSource::Ring { n, w } => write!(f, "ring:{n}:{w}"),
            GraphSource::Planted(p) if p.w_in == (1.0, 2.0) && p.w_out == (0.1, 0.5) => {
                write!(f, "planted:{}:{}:{}:{}:{}", p.blocks, p.block_size, p.p_in, p.p_out, p.seed)
            }
            GraphSource::Planted(p) => write!(
                f,
                "planted:{}:{}:{}:{}:{}:{}:{}:{}:{}",
                p.blocks, p.block_size, p.p_in, p.p_out, p.seed, p.w_in.0, p.w_in.1, p.w_out.0, p.w_out.1
            ),
            GraphSource::File { path, one_based } => {
                write!(f, "{}:{}", if *one_based { "file1" } else { "file" }, path.display())
            }
        }
    }
}

impl FromStr for GraphSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unrecognized graph source '{s}'"));
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        if kind == "file" || kind == "file1" {
            if rest.is_empty() {
                return Err(bad());
            }
            return Ok(GraphSource::File { path: rest.into(), one_based: kind == "file1" });
        }
        let args: Vec<&str> = if rest.is_empty() { vec![] } else { rest.split(':').collect() };
        let num = |i: usize| args[i].parse::<f64>().map_err(|_| bad());
        let int = |i: usize| args[i].parse::<usize>().map_err(|_| bad());
        match (kind, args.len()) {
            ("karate", 0) => Ok(GraphSource::Karate),
            ("line", 0) => Ok(GraphSource::weak_line()),
            ("line", 4) => Ok(GraphSource::WeakLine { n: int(0)?, weak_pos: int(1)?, w_strong: num(2)?, w_weak: num(3)? }),
            ("ring", 1) => Ok(GraphSource::Ring { n: int(0)?, w: 1.0 }),
            ("ring", 2) => Ok(GraphSource::Ring { n: int(0)?, w: num(1)? }),
            ("planted", 0) => Ok(GraphSource::Planted(PlantedPartition::four_blocks())),
            ("planted", 5) | ("planted", 9) => {
                let mut p = PlantedPartition {
                    blocks: int(0)?,
                    block_size: int(1)?,
                    p_in: num(2)?,
                    p_out: num(3)?,
                    seed: args[4].parse().map_err(|_| bad())?,
                    ..PlantedPartition::four_blocks()
                };
                if args.len() == 9 {
                    p.w_in = (num(5)?, num(6)?);
                    p.w_out = (num(7)?, num(8)?);
                }
                Ok(GraphSource::Planted(p))
            }
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for GraphSource {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GraphSource> for String {
    fn from(g: GraphSource) -> String {
        g.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Dmd,
    Fft,
    Spectral,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Dmd => "dmd",
            Method::Fft => "fft",
            Method::Spectral => "spectral",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dmd" => Ok(Method::Dmd),
            "fft" => Ok(Method::Fft),
            "spectral" => Ok(Method::Spectral),
            _ => Err(Error::InvalidParameter(format!("unknown method '{s}'"))),
        }
    }
}

/// Everything a run depends on. All randomness derives from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    pub c: f64,
    pub t_max: usize,
    /// Embedding depth; defaults to `min(2N, T_max / 2)`.
    pub k_rows: Option<usize>,
    /// Embedding width; defaults to `T_max - K`.
    pub m_cols: Option<usize>,
    pub method: Method,
    /// Cluster count; `None` picks it from the spectral gap.
    pub k: Option<usize>,
    pub max_k: usize,
    /// Label rule; `None` means signs for two clusters and k-means otherwise.
    pub assign: Option<ClusterMethod>,
    pub seed: u64,
    pub threshold: f64,
    pub fft_normalization: Normalization,
    pub spectrum: SpectrumOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            graph: GraphSource::Karate,
            c: DEFAULT_C,
            t_max: 200,
            k_rows: None,
            m_cols: None,
            method: Method::Dmd,
            k: None,
            max_k: 10,
            assign: None,
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
            fft_normalization: Normalization::default(),
            spectrum: SpectrumOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        WaveConfig::new(self.c, self.t_max.max(2), InitialCondition::Uniform { seed: self.seed })?;
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidParameter(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        if let Some(k) = self.k {
            if k < 2 {
                return Err(Error::InvalidParameter(format!("k must be at least 2, got {k}")));
            }
        }
        if self.max_k < 2 {
            return Err(Error::InvalidParameter("max_k must be at least 2".into()));
        }
        Ok(())
    }

    /// Embedding used for a trace of `t_max` samples on `n` nodes.
    pub fn shape(&self, n: usize, t_max: usize) -> Result<EmbeddingShape> {
        let base = EmbeddingShape::default_for(n, t_max);
        let k_rows = self.k_rows.map_or(base.k_rows, |k| k.min(t_max / 2));
        let m_cols = self.m_cols.unwrap_or(t_max - k_rows);
        if k_rows + m_cols > t_max {
            return Err(Error::InsufficientSamples { len: t_max, k_rows, m_cols });
        }
        Ok(EmbeddingShape { k_rows, m_cols })
    }

    /// Wave settings for a trace of `t_max` samples.
    pub fn wave(&self, t_max: usize) -> Result<WaveConfig> {
        WaveConfig::new(self.c, t_max, InitialCondition::Uniform { seed: self.seed })
    }

    pub fn assign_method(&self, k: usize) -> ClusterMethod {
        self.assign.unwrap_or(if k == 2 { ClusterMethod::Signs } else { ClusterMethod::Kmeans })
    }
}

/// Graph, Laplacian and (when affordable) the centralized eigensystem.
pub struct Prepared {
    pub graph: Graph,
    pub truth: Option<Vec<usize>>,
    pub lap: Laplacian,
    pub oracle: Option<EigenSystem>,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    prepare_loaded(cfg.graph.load()?)
}

/// As [`prepare`] for a graph that is already loaded.
pub fn prepare_loaded(loaded: LoadedGraph) -> Result<Prepared> {
    let LoadedGraph { graph, truth } = loaded;
    let lap = build_laplacian(&graph)?;
    let oracle = if graph.n() <= ORACLE_LIMIT { Some(eigendecompose(&lap)?) } else { None };
    Ok(Prepared { graph, truth, lap, oracle })
}

/// How the cluster count was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KSource {
    Given,
    /// Majority of the per-node spectral-gap estimates.
    LocalGap,
    /// Spectral gap of the centralized eigenvalues.
    OracleGap,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterReport {
    pub graph: String,
    pub n: usize,
    pub method: Method,
    pub t_max: usize,
    pub k: usize,
    pub k_source: KSource,
    /// Spectral-gap estimate from the centralized eigenvalues.
    pub oracle_k: Option<usize>,
    pub assignment: ClusterAssignment,
    /// Spectral clustering with the same `k` and label rule.
    pub reference: Option<ClusterAssignment>,
    pub agreement: Option<f64>,
    pub truth_agreement: Option<f64>,
    /// Nodes whose spectrum lacked a mode the label rule needed.
    pub deficient_nodes: Vec<usize>,
}

impl ClusterReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Per-node spectra from the configured method.
pub fn node_spectra(cfg: &ExperimentConfig, traces: &TraceMatrix) -> Result<Vec<LocalSpectrum>> {
    match cfg.method {
        Method::Dmd => {
            let shape = cfg.shape(traces.n(), traces.t_max())?;
            all_local_spectra(traces, shape, cfg.c, &cfg.spectrum).into_iter().collect()
        }
        Method::Fft => (0..traces.n())
            .into_par_iter()
            .map(|i| {
                fft_local_spectrum(i, traces.node(i), cfg.threshold, cfg.fft_normalization)
                    .map(|s| s.to_local_spectrum(cfg.c))
            })
            .collect(),
        Method::Spectral => Err(Error::InvalidParameter("the spectral method has no node spectra".into())),
    }
}

/// Each node picks `k` from the gaps of its own recovered eigenvalues; the
/// most common answer wins (smallest on ties).
pub fn local_k_vote(spectra: &[LocalSpectrum], max_k: usize) -> Option<usize> {
    let mut votes = vec![0usize; max_k + 1];
    for s in spectra {
        let mut lambdas = vec![0.0];
        lambdas.extend(s.oscillatory().map(|m| m.lambda));
        if let Ok(k) = estimate_num_clusters(&lambdas, max_k) {
            votes[k] += 1;
        }
    }
    let best = (2..=max_k).max_by(|a, b| votes[*a].cmp(&votes[*b]).then(b.cmp(a)))?;
    (votes[best] > 0).then_some(best)
}

fn assign_from_spectra(
    spectra: &[LocalSpectrum],
    k: usize,
    method: ClusterMethod,
    seed: u64,
) -> Result<(ClusterAssignment, Vec<usize>)> {
    match method {
        ClusterMethod::Signs => Ok((sign_assign(spectra, k)?, vec![])),
        ClusterMethod::Kmeans => {
            let (rows, deficient) = coefficient_rows(spectra, k);
            let mut a = kmeans_assign(&rows, k, seed)?;
            a.flagged = deficient.clone();
            Ok((a, deficient))
        }
    }
}

/// Graph, wave propagation, local spectra, labels.
pub fn run_cluster(cfg: &ExperimentConfig) -> Result<ClusterReport> {
    let prep = prepare(cfg)?;
    run_cluster_prepared(cfg, &prep, None)
}

/// As [`run_cluster`], reusing a prepared graph and optionally a longer
/// trace (truncated to `cfg.t_max`).
pub fn run_cluster_prepared(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    traces: Option<&TraceMatrix>,
) -> Result<ClusterReport> {
    let n = prep.graph.n();
    let oracle_k = prep.oracle.as_ref().and_then(|es| estimate_num_clusters(&es.lambdas, cfg.max_k).ok());

    let (k, k_source, assignment, deficient) = if cfg.method == Method::Spectral {
        let es = prep.oracle.as_ref().ok_or(Error::OracleTooLarge { n, limit: ORACLE_LIMIT })?;
        let (k, src) = match cfg.k {
            Some(k) => (k, KSource::Given),
            None => (oracle_k.expect("oracle present"), KSource::OracleGap),
        };
        (k, src, spectral_cluster(es, k, cfg.assign_method(k), cfg.seed)?, vec![])
    } else {
        let owned;
        let traces = match traces {
            Some(t) if t.t_max() >= cfg.t_max => {
                owned = t.truncated(cfg.t_max);
                &owned
            }
            _ => {
                owned = propagate(&prep.lap, &cfg.wave(cfg.t_max)?)?;
                &owned
            }
        };
        let spectra = node_spectra(cfg, traces)?;
        let (k, src) = match cfg.k {
            Some(k) => (k, KSource::Given),
            None => {
                let k = local_k_vote(&spectra, cfg.max_k).ok_or(Error::InsufficientModes { needed: 2, available: 0 })?;
                (k, KSource::LocalGap)
            }
        };
        let (a, deficient) = assign_from_spectra(&spectra, k, cfg.assign_method(k), cfg.seed)?;
        (k, src, a, deficient)
    };

    let reference = match &prep.oracle {
        Some(es) if k <= n => Some(spectral_cluster(es, k, assignment.method, cfg.seed)?),
        _ => None,
    };
    let agreement_ = reference.as_ref().map(|r| agreement(&assignment, r)).transpose()?;
    let truth_agreement = prep
        .truth
        .as_ref()
        .map(|t| crate::clustering::label_agreement(&assignment.labels, t))
        .transpose()?;
    Ok(ClusterReport {
        graph: cfg.graph.to_string(),
        n,
        method: cfg.method,
        t_max: cfg.t_max,
        k,
        k_source,
        oracle_k,
        assignment,
        reference,
        agreement: agreement_,
        truth_agreement,
        deficient_nodes: deficient,
    })
}

/// Candidate trace lengths for [`run_min_tmax_search`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Grid {
    PowersOfTwo { start: usize, max: usize },
    Step { start: usize, step: usize, max: usize },
}

impl Grid {
    pub fn points(&self) -> Result<Vec<usize>> {
        let pts: Vec<usize> = match *self {
            Grid::PowersOfTwo { start, max } => {
                if start == 0 || !start.is_power_of_two() {
                    return Err(Error::InvalidParameter(format!("power-of-two grid must start at a power of two, got {start}")));
                }
                std::iter::successors(Some(start), |&t| t.checked_mul(2)).take_while(|&t| t <= max).collect()
            }
            Grid::Step { start, step, max } => {
                if step == 0 {
                    return Err(Error::InvalidParameter("grid step must be positive".into()));
                }
                (start..=max).step_by(step).collect()
            }
        };
        if pts.is_empty() {
            return Err(Error::InvalidParameter("grid is empty".into()));
        }
        Ok(pts)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grid::PowersOfTwo { start, max } => write!(f, "pow2:{start}:{max}"),
            Grid::Step { start, step, max } => write!(f, "step:{start}:{step}:{max}"),
        }
    }
}

impl FromStr for Grid {
    type Err = Error;
    /// `pow2:START:MAX` or `step:START:STEP:MAX`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unrecognized grid '{s}'"));
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| parts[i].parse::<usize>().map_err(|_| bad());
        match (parts[0], parts.len()) {
            ("pow2", 3) => Ok(Grid::PowersOfTwo { start: num(1)?, max: num(2)? }),
            ("step", 4) => Ok(Grid::Step { start: num(1)?, step: num(2)?, max: num(3)? }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPoint {
    pub t_max: usize,
    /// `None` when the pipeline failed at this length.
    pub agreement: Option<f64>,
    pub error: Option<String>,
}

impl GridPoint {
    pub fn success(&self) -> bool {
        self.agreement == Some(1.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub method: Method,
    pub grid: String,
    /// Smallest grid length reaching agreement 1.0, if any.
    pub minimum: Option<usize>,
    /// The grid point before `minimum` failed (vacuously true for the first).
    pub previous_fails: bool,
    pub points: Vec<GridPoint>,
    /// Grid lengths above `minimum` that failed again.
    pub monotone_violations: Vec<usize>,
}

impl SearchOutcome {
    /// `minimum` as text, `"> max"` when nothing succeeded.
    pub fn minimum_label(&self) -> String {
        match self.minimum {
            Some(t) => t.to_string(),
            None => format!("> {}", self.points.last().map_or(0, |p| p.t_max)),
        }
    }
}

/// Scans `grid` in ascending order for the shortest trace whose labels agree
/// fully with spectral clustering. One propagation to the largest length is
/// truncated for every point. With `scan_all` the scan continues past the
/// first success to check monotonicity.
pub fn run_min_tmax_search(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    method: Method,
    grid: Grid,
    scan_all: bool,
) -> Result<SearchOutcome> {
    if method == Method::Spectral {
        return Err(Error::InvalidParameter("search needs dmd or fft".into()));
    }
    let pts = grid.points()?;
    let longest = *pts.last().expect("nonempty grid");
    let traces = propagate(&prep.lap, &cfg.wave(longest)?)?;
    let mut points = Vec::new();
    let mut minimum = None;
    for &t in &pts {
        let run = ExperimentConfig { t_max: t, method, ..cfg.clone() };
        let point = match run_cluster_prepared(&run, prep, Some(&traces)) {
            Ok(r) => match r.agreement {
                Some(a) => GridPoint { t_max: t, agreement: Some(a), error: None },
                None => return Err(Error::OracleTooLarge { n: prep.graph.n(), limit: ORACLE_LIMIT }),
            },
            Err(e) if e.is_numerical() || matches!(e, Error::InsufficientSamples { .. } | Error::InvalidParameter(_)) => {
                GridPoint { t_max: t, agreement: None, error: Some(e.to_string()) }
            }
            Err(e) => return Err(e),
        };
        let ok = point.success();
        points.push(point);
        if ok && minimum.is_none() {
            minimum = Some(t);
            if !scan_all {
                break;
            }
        }
    }
    let idx = minimum.and_then(|m| points.iter().position(|p| p.t_max == m));
    let previous_fails = idx.is_none_or(|i| i == 0 || !points[i - 1].success());
    let monotone_violations = match minimum {
        Some(m) => points.iter().filter(|p| p.t_max > m && !p.success()).map(|p| p.t_max).collect(),
        None => vec![],
    };
    Ok(SearchOutcome { method, grid: grid.to_string(), minimum, previous_fails, points, monotone_violations })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t_max: usize,
    pub method: Method,
    /// `(1/N) sum_i |w2_i - w2| / w2`; NaN when some node had no estimate.
    pub mean_rel_err: f64,
    pub reason: Option<String>,
}

/// Global lowest frequency: from the spectrum of `M` for small graphs,
/// otherwise from the centralized `lambda_2`.
pub fn reference_omega2(prep: &Prepared, c: f64) -> Result<f64> {
    let n = prep.graph.n();
    if 2 * n <= PROPAGATOR_ORACLE_LIMIT {
        build_m(&prep.lap, c)?.lowest_frequency()
    } else {
        let es = prep.oracle.as_ref().ok_or(Error::OracleTooLarge { n, limit: ORACLE_LIMIT })?;
        Ok(omega_from_lambda(es.lambdas[1], c))
    }
}

/// Mean relative error of the per-node lowest-frequency estimate, per trace
/// length and method.
pub fn run_error_sweep(cfg: &ExperimentConfig, prep: &Prepared, t_grid: &[usize]) -> Result<Vec<SweepPoint>> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("sweep grid must be nonempty and ascending".into()));
    }
    let w2 = reference_omega2(prep, cfg.c)?;
    let longest = *t_grid.last().expect("nonempty");
    let all = propagate(&prep.lap, &cfg.wave(longest)?)?;
    let n = prep.graph.n();
    let mut out = Vec::new();
    for &t in t_grid {
        let traces = all.truncated(t);
        for method in [Method::Dmd, Method::Fft] {
            let estimates: Vec<Result<f64>> = match method {
                Method::Dmd => {
                    let shape = EmbeddingShape::square(t);
                    all_local_spectra(&traces, shape, cfg.c, &cfg.spectrum)
                        .into_iter()
                        .map(|s| s.and_then(|s| s.omega2().ok_or(Error::InsufficientModes { needed: 2, available: 1 })))
                        .collect()
                }
                _ => (0..n)
                    .into_par_iter()
                    .map(|i| {
                        fft_local_spectrum(i, traces.node(i), cfg.threshold, cfg.fft_normalization)
                            .and_then(|s| fft_omega2_estimate(&s))
                    })
                    .collect(),
            };
            let failure = estimates.iter().enumerate().find_map(|(i, e)| e.as_ref().err().map(|e| (i, e.clone())));
            let point = match failure {
                Some((i, e)) => SweepPoint { t_max: t, method, mean_rel_err: f64::NAN, reason: Some(format!("node {i}: {e}")) },
                None => {
                    let sum: f64 = estimates.iter().map(|e| (e.as_ref().expect("checked") - w2).abs() / w2).sum();
                    SweepPoint { t_max: t, method, mean_rel_err: sum / n as f64, reason: None }
                }
            };
            out.push(point);
        }
    }
    Ok(out)
}

/// CSV with columns `t_max,method,mean_rel_err`.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "t_max,method,mean_rel_err")?;
    for p in points {
        writeln!(w, "{},{},{:.6e}", p.t_max, p.method, p.mean_rel_err)?;
    }
    Ok(())
}

/// Whitespace-separated columns `t_max dmd fft`, readable by gnuplot.
pub fn write_sweep_gnuplot<W: Write>(points: &[SweepPoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "# t_max dmd fft")?;
    let mut ts: Vec<usize> = points.iter().map(|p| p.t_max).collect();
    ts.dedup();
    for t in ts {
        let get = |m: Method| {
            points.iter().find(|p| p.t_max == t && p.method == m).map_or(f64::NAN, |p| p.mean_rel_err)
        };
        writeln!(w, "{t} {:.6e} {:.6e}", get(Method::Dmd), get(Method::Fft))?;
    }
    Ok(())
}

/// Results of one or more searches plus an optional sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub graph: String,
    pub seed: u64,
    pub searches: Vec<SearchOutcome>,
    pub sweep: Vec<SweepPoint>,
    /// Wall-clock seconds per stage, only when timing was requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtimes: Option<Vec<(String, f64)>>,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_source_round_trip() {
        for s in ["karate", "line:50:25:5:1", "ring:8:1", "planted:4:100:0.2:0.01:7", "file:/tmp/x.txt", "file1:a b.txt"] {
            let g: GraphSource = s.parse().unwrap();
            assert_eq!(g.to_string(), s);
        }
        assert_eq!("line".parse::<GraphSource>().unwrap(), GraphSource::weak_line());
        assert_eq!("ring:8".parse::<GraphSource>().unwrap(), GraphSource::Ring { n: 8, w: 1.0 });
        assert!("ring".parse::<GraphSource>().is_err());
        assert!("nope".parse::<GraphSource>().is_err());
        assert!("line:1:2".parse::<GraphSource>().is_err());
    }

    #[test]
    fn grids() {
        assert_eq!("pow2:64:1024".parse::<Grid>().unwrap().points().unwrap(), vec![64, 128, 256, 512, 1024]);
        assert_eq!("step:20:10:60".parse::<Grid>().unwrap().points().unwrap(), vec![20, 30, 40, 50, 60]);
        assert!("pow2:60:1024".parse::<Grid>().unwrap().points().is_err());
        assert!("step:20:0:60".parse::<Grid>().unwrap().points().is_err());
        assert!("step:80:10:60".parse::<Grid>().unwrap().points().is_err());
    }

    #[test]
    fn config_shape_defaults() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.shape(34, 50).unwrap(), EmbeddingShape { k_rows: 25, m_cols: 25 });
        let cfg = ExperimentConfig { k_rows: Some(70), ..Default::default() };
        assert_eq!(cfg.shape(400, 500).unwrap(), EmbeddingShape { k_rows: 70, m_cols: 430 });
        assert_eq!(cfg.shape(400, 100).unwrap(), EmbeddingShape { k_rows: 50, m_cols: 50 });
        let cfg = ExperimentConfig { k_rows: Some(10), m_cols: Some(95), ..Default::default() };
        assert!(cfg.shape(400, 100).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig { c: 2.0, ..Default::default() }.validate().is_err());
        assert!(ExperimentConfig { k: Some(1), ..Default::default() }.validate().is_err());
        assert!(ExperimentConfig { threshold: 0.0, ..Default::default() }.validate().is_err());
        assert!(ExperimentConfig::default().validate().is_ok());
    }

    #[test]
    fn spectral_method_on_line() {
        let cfg = ExperimentConfig { graph: GraphSource::weak_line(), method: Method::Spectral, k: Some(2), ..Default::default() };
        let r = run_cluster(&cfg).unwrap();
        assert_eq!(r.agreement, Some(1.0));
        assert_eq!(r.oracle_k, Some(2));
    }
}
