//! `wavedmd`: run the wave-equation clustering pipeline from the shell.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use wavedmd::clustering::ClusterMethod;
use wavedmd::dmd::local_spectrum;
use wavedmd::fft::{fft_local_spectrum, Normalization};
use wavedmd::harness::{
    node_spectra, prepare_loaded, run_cluster_prepared, run_error_sweep, run_min_tmax_search, write_sweep_csv,
    write_sweep_gnuplot, ComparisonReport, ExperimentConfig, Grid, GraphSource, Method, Prepared, LARGE_GRAPH_NODES,
};
use wavedmd::wave::propagate;

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_DISAGREE: u8 = 3;

/// Environment variable holding the worker count.
const THREADS_VAR: &str = "WAVEDMD_THREADS";

#[derive(Parser)]
#[command(name = "wavedmd", version, about = "Decentralized graph clustering from wave-equation traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a graph and compare against spectral clustering.
    Cluster(ClusterArgs),
    /// Per-node local spectra as JSON lines.
    Spectrum(SpectrumArgs),
    /// Shortest trace length reaching full agreement with spectral clustering.
    MinTmax(MinTmaxArgs),
    /// Lowest-frequency error of DMD and FFT against trace length.
    ErrorSweep(SweepArgs),
    /// Write a graph as an edge list, with optional labels and eigensystem.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct Common {
    /// TOML file with experiment settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// karate | line[:n:pos:ws:ww] | ring:n[:w] | planted[:b:s:pin:pout:seed] | file:PATH | file1:PATH
    #[arg(long)]
    graph: Option<String>,
    /// Wave speed, in (0, sqrt 2).
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    t_max: Option<usize>,
    /// Delay-embedding rows.
    #[arg(long)]
    k_rows: Option<usize>,
    /// Delay-embedding columns.
    #[arg(long)]
    m_cols: Option<usize>,
    /// dmd | fft | spectral
    #[arg(long)]
    method: Option<String>,
    /// Cluster count; picked from the spectral gap when absent.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    max_k: Option<usize>,
    /// signs | kmeans
    #[arg(long)]
    assign: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// FFT magnitude threshold, in (0, 1).
    #[arg(long)]
    threshold: Option<f64>,
    /// global | exclude-dc
    #[arg(long)]
    fft_normalization: Option<String>,
    /// Allow graphs with more than 2000 nodes.
    #[arg(long)]
    large: bool,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    common: Common,
    /// Exit with status 3 unless agreement with spectral clustering is 1.
    #[arg(long)]
    verify: bool,
    /// Write `node,label` CSV here.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    common: Common,
    /// Only this node.
    #[arg(long)]
    node: Option<usize>,
    /// Write the raw traces as CSV here.
    #[arg(long)]
    traces: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MinTmaxArgs {
    #[command(flatten)]
    common: Common,
    /// Methods to search, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = ["dmd".to_string(), "fft".to_string()])]
    methods: Vec<String>,
    /// Grid for DMD: `step:START:STEP:MAX` or `pow2:START:MAX`.
    #[arg(long, default_value = "step:20:10:200")]
    dmd_grid: String,
    /// Grids for FFT; each is searched separately.
    #[arg(long, value_delimiter = ',', default_values_t = ["pow2:8:16384".to_string(), "step:100:100:2000".to_string()])]
    fft_grid: Vec<String>,
    /// Keep scanning after the first success to check monotonicity.
    #[arg(long)]
    scan_all: bool,
    /// Exit with status 3 when some method never succeeds.
    #[arg(long)]
    verify: bool,
    /// Include wall-clock runtimes (makes output nondeterministic).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_values_t = [64usize, 128, 256, 512, 1024])]
    t_grid: Vec<usize>,
    /// CSV `t_max,method,mean_rel_err`; stdout when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Gnuplot data file.
    #[arg(long)]
    gnuplot: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Exit with status 3 unless DMD beats FFT tenfold at every length.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    /// Edge list destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Planted labels as `node,label` CSV.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Laplacian eigenvalues as `index,lambda` CSV.
    #[arg(long)]
    eigenvalues: Option<PathBuf>,
    /// Eigenvectors as CSV, with `--vectors` choosing which (1-based).
    #[arg(long)]
    eigenvectors: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3])]
    vectors: Vec<usize>,
}

enum Failure {
    Usage(String),
    Numerical(String),
    Disagree(String),
}

impl From<wavedmd::Error> for Failure {
    fn from(e: wavedmd::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn parse_kebab<T: DeserializeOwned>(what: &str, s: &str) -> Result<T, Failure> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Failure::Usage(format!("unknown {what} '{s}'")))
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(g) = &self.graph {
            cfg.graph = g.parse::<GraphSource>()?;
        }
        if let Some(m) = &self.method {
            cfg.method = m.parse::<Method>()?;
        }
        if let Some(a) = &self.assign {
            cfg.assign = Some(parse_kebab::<ClusterMethod>("assignment rule", a)?);
        }
        if let Some(n) = &self.fft_normalization {
            cfg.fft_normalization = parse_kebab::<Normalization>("normalization", n)?;
        }
        cfg.c = self.c.unwrap_or(cfg.c);
        cfg.t_max = self.t_max.unwrap_or(cfg.t_max);
        cfg.k_rows = self.k_rows.or(cfg.k_rows);
        cfg.m_cols = self.m_cols.or(cfg.m_cols);
        cfg.k = self.k.or(cfg.k);
        cfg.max_k = self.max_k.unwrap_or(cfg.max_k);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.threshold = self.threshold.unwrap_or(cfg.threshold);
        cfg.validate()?;
        Ok(cfg)
    }

    fn setup(&self) -> Result<(ExperimentConfig, Prepared), Failure> {
        let cfg = self.config()?;
        let loaded = cfg.graph.load()?;
        let n = loaded.graph.n();
        if n > LARGE_GRAPH_NODES && !self.large {
            return Err(Failure::Usage(format!("graph has {n} nodes; pass --large to run graphs above {LARGE_GRAPH_NODES}")));
        }
        Ok((cfg, prepare_loaded(loaded)?))
    }
}

fn sink(path: Option<&Path>) -> std::io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()
}

fn cluster(args: ClusterArgs) -> Outcome {
    let (cfg, prep) = args.common.setup()?;
    let report = run_cluster_prepared(&cfg, &prep, None)?;
    if let Some(p) = &args.labels {
        write_file(p, |w| report.assignment.write_csv(w))?;
    }
    let mut out = sink(args.json.as_deref())?;
    writeln!(out, "{}", report.to_json())?;
    out.flush()?;
    if args.verify {
        match report.agreement {
            Some(1.0) => {}
            Some(a) => return Err(Failure::Disagree(format!("agreement with spectral clustering is {a}"))),
            None => return Err(Failure::Usage("--verify needs the spectral oracle, which is unavailable here".into())),
        }
    }
    Ok(())
}

fn spectrum(args: SpectrumArgs) -> Outcome {
    let (cfg, prep) = args.common.setup()?;
    if let Some(i) = args.node {
        if i >= prep.graph.n() {
            return Err(Failure::Usage(format!("node {i} out of range for {} nodes", prep.graph.n())));
        }
    }
    let traces = propagate(&prep.lap, &cfg.wave(cfg.t_max)?)?;
    if let Some(p) = &args.traces {
        write_file(p, |w| traces.write_csv(w))?;
    }
    let spectra = match args.node {
        Some(i) => vec![match cfg.method {
            Method::Dmd => {
                let shape = cfg.shape(traces.n(), traces.t_max())?;
                local_spectrum(i, traces.node(i), shape, cfg.c, &cfg.spectrum)?
            }
            Method::Fft => fft_local_spectrum(i, traces.node(i), cfg.threshold, cfg.fft_normalization)?.to_local_spectrum(cfg.c),
            Method::Spectral => return Err(Failure::Usage("the spectral method has no node spectra".into())),
        }],
        None => node_spectra(&cfg, &traces)?,
    };
    let mut out = sink(args.out.as_deref())?;
    for s in spectra {
        writeln!(out, "{}", s.to_json_value())?;
    }
    out.flush()?;
    Ok(())
}

fn min_tmax(args: MinTmaxArgs) -> Outcome {
    let (cfg, prep) = args.common.setup()?;
    let mut searches = Vec::new();
    let mut runtimes = Vec::new();
    for m in &args.methods {
        let method: Method = m.parse()?;
        let grids: Vec<&String> = match method {
            Method::Dmd => vec![&args.dmd_grid],
            Method::Fft => args.fft_grid.iter().collect(),
            Method::Spectral => return Err(Failure::Usage("min-tmax searches dmd or fft".into())),
        };
        for g in grids {
            let grid: Grid = g.parse()?;
            let start = Instant::now();
            searches.push(run_min_tmax_search(&cfg, &prep, method, grid, args.scan_all)?);
            runtimes.push((format!("{method} {grid}"), start.elapsed().as_secs_f64()));
        }
    }
    let missing: Vec<String> =
        searches.iter().filter(|s| s.minimum.is_none()).map(|s| format!("{} {}", s.method, s.grid)).collect();
    let report = ComparisonReport {
        graph: cfg.graph.to_string(),
        seed: cfg.seed,
        searches,
        sweep: vec![],
        runtimes: args.timing.then_some(runtimes),
    };
    let mut out = sink(args.json.as_deref())?;
    writeln!(out, "{}", report.to_json())?;
    out.flush()?;
    if args.verify && !missing.is_empty() {
        return Err(Failure::Disagree(format!("no grid point succeeded for {}", missing.join(", "))));
    }
    Ok(())
}

fn error_sweep(args: SweepArgs) -> Outcome {
    let (cfg, prep) = args.common.setup()?;
    let points = run_error_sweep(&cfg, &prep, &args.t_grid)?;
    let mut out = sink(args.csv.as_deref())?;
    write_sweep_csv(&points, &mut out)?;
    out.flush()?;
    if let Some(p) = &args.gnuplot {
        write_file(p, |w| write_sweep_gnuplot(&points, w))?;
    }
    if let Some(p) = &args.json {
        let report =
            ComparisonReport { graph: cfg.graph.to_string(), seed: cfg.seed, searches: vec![], sweep: points.clone(), runtimes: None };
        write_file(p, |w| writeln!(w, "{}", report.to_json()))?;
    }
    if args.verify {
        for &t in &args.t_grid {
            let err = |m| points.iter().find(|p| p.t_max == t && p.method == m).map_or(f64::NAN, |p| p.mean_rel_err);
            let (d, f) = (err(Method::Dmd), err(Method::Fft));
            if !(d * 10.0 <= f) {
                return Err(Failure::Disagree(format!("at T_max = {t}: DMD error {d:e}, FFT error {f:e}")));
            }
        }
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> Outcome {
    let (_, prep) = args.common.setup()?;
    let mut out = sink(args.out.as_deref())?;
    out.write_all(prep.graph.to_edge_list().as_bytes())?;
    out.flush()?;
    if let Some(p) = &args.labels {
        let truth = prep.truth.as_ref().ok_or_else(|| Failure::Usage("this graph source has no planted labels".into()))?;
        write_file(p, |w| {
            writeln!(w, "node,label")?;
            truth.iter().enumerate().try_for_each(|(i, l)| writeln!(w, "{i},{l}"))
        })?;
    }
    if args.eigenvalues.is_some() || args.eigenvectors.is_some() {
        let es = prep.oracle.as_ref().ok_or_else(|| Failure::Usage("graph too large for the eigensystem".into()))?;
        if let Some(p) = &args.eigenvalues {
            write_file(p, |w| es.write_eigenvalues_csv(w))?;
        }
        if let Some(p) = &args.eigenvectors {
            if let Some(bad) = args.vectors.iter().find(|&&j| j == 0 || j > es.n()) {
                return Err(Failure::Usage(format!("eigenvector index {bad} out of range 1..={}", es.n())));
            }
            write_file(p, |w| es.write_eigenvectors_csv(w, &args.vectors))?;
        }
    }
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("{THREADS_VAR} must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Cluster(a) => cluster(a),
        Command::Spectrum(a) => spectrum(a),
        Command::MinTmax(a) => min_tmax(a),
        Command::ErrorSweep(a) => error_sweep(a),
        Command::Generate(a) => generate(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(Failure::Disagree(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(EXIT_DISAGREE)
        }
    }
}
