use faer::c64;
use proptest::prelude::*;

use wavedmd::clustering::label_agreement;
use wavedmd::dmd::{all_local_spectra, delay_embed, exact_dmd, local_spectrum, EmbeddingShape, SpectrumOptions, DEFAULT_RANK_TOL};
use wavedmd::graph::{generate_weak_line, karate_club};
use wavedmd::harness::{prepare, reference_omega2, run_cluster, run_min_tmax_search, ExperimentConfig, Grid, GraphSource, Method};
use wavedmd::laplacian::build_laplacian;
use wavedmd::spectral::eigendecompose;
use wavedmd::wave::{propagate, InitialCondition, WaveConfig};

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[test]
fn line_graph_recovers_full_spectrum_near_sqrt2() {
    let c = 1.41;
    let lap = build_laplacian(&generate_weak_line(50, 25, 5.0, 1.0).unwrap()).unwrap();
    let es = eigendecompose(&lap).unwrap();
    let traces = propagate(&lap, &WaveConfig::new(c, 200, InitialCondition::Uniform { seed: 0 }).unwrap()).unwrap();
    let spectra: Vec<_> = all_local_spectra(&traces, EmbeddingShape::square(200), c, &SpectrumOptions::default())
        .into_iter()
        .collect::<Result<_, _>>()
        .unwrap();
    for s in &spectra {
        assert_eq!(s.modes.len(), 50, "node {}", s.node);
        for (m, l) in s.modes.iter().zip(&es.lambdas) {
            assert!((m.lambda - l).abs() < 1e-6, "node {}: {} vs {l}", s.node, m.lambda);
        }
    }
    // amplitudes across nodes are proportional to the eigenvectors
    for j in [1, 2] {
        let coeffs: Vec<f64> = spectra.iter().map(|s| s.modes[j].amplitude.re).collect();
        assert!(cosine(&coeffs, &es.vector(j)).abs() >= 1.0 - 1e-6, "v{}", j + 1);
    }
}

#[test]
fn every_node_sees_the_same_lowest_frequency() {
    let cfg = ExperimentConfig { graph: GraphSource::Karate, ..Default::default() };
    let prep = prepare(&cfg).unwrap();
    let w2 = reference_omega2(&prep, 1.0).unwrap();
    let traces = propagate(&prep.lap, &WaveConfig::new(1.0, 256, InitialCondition::Uniform { seed: 0 }).unwrap()).unwrap();
    for s in all_local_spectra(&traces, EmbeddingShape::square(256), 1.0, &SpectrumOptions::default()) {
        let s = s.unwrap();
        let w = s.omega2().unwrap();
        assert!((w - w2).abs() / w2 < 1e-8, "node {}: {w} vs {w2}", s.node);
    }
}

#[test]
fn karate_node_zero_eigenvalues_on_unit_circle() {
    let lap = build_laplacian(&karate_club()).unwrap();
    let traces = propagate(&lap, &WaveConfig::new(1.0, 50, InitialCondition::Uniform { seed: 0 }).unwrap()).unwrap();
    let emb = delay_embed(traces.node(0), 25, 25).unwrap();
    let res = exact_dmd(&emb, DEFAULT_RANK_TOL).unwrap();
    let prep = prepare(&ExperimentConfig { graph: GraphSource::Karate, ..Default::default() }).unwrap();
    let w2 = reference_omega2(&prep, 1.0).unwrap();
    // 25 rows cannot hold all 34 modes, so the match is approximate
    for sign in [1.0, -1.0] {
        let target = c64::from_polar(1.0, sign * w2);
        let best = res.eigenvalues.iter().map(|mu| (mu - target).norm()).fold(f64::INFINITY, f64::min);
        assert!(best < 1e-3, "distance {best}");
    }
    let local = local_spectrum(0, traces.node(0), EmbeddingShape::square(50), 1.0, &SpectrumOptions::default()).unwrap();
    assert!(local.modes.iter().all(|m| m.omega >= 0.0 && m.omega <= std::f64::consts::PI));
}

#[test]
fn cluster_output_independent_of_thread_count() {
    let cfg = ExperimentConfig {
        graph: "planted:4:20:0.5:0.02:3".parse().unwrap(),
        t_max: 300,
        k: Some(4),
        ..Default::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| run_cluster(&cfg).unwrap().to_json())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(3));
}

#[test]
fn search_reports_non_monotone_points() {
    let cfg = ExperimentConfig { graph: GraphSource::Karate, seed: 8, ..Default::default() };
    let prep = prepare(&cfg).unwrap();
    let grid = Grid::Step { start: 20, step: 10, max: 100 };
    let quick = run_min_tmax_search(&cfg, &prep, Method::Dmd, grid, false).unwrap();
    assert_eq!(quick.minimum, Some(30));
    assert!(quick.previous_fails);
    assert_eq!(quick.points.len(), 2);
    let full = run_min_tmax_search(&cfg, &prep, Method::Dmd, grid, true).unwrap();
    assert_eq!(full.minimum, Some(30));
    assert_eq!(full.points.len(), 9);
    assert!(full.monotone_violations.contains(&40));
}

#[test]
fn search_without_success_reports_beyond_grid() {
    let cfg = ExperimentConfig { graph: GraphSource::Karate, ..Default::default() };
    let prep = prepare(&cfg).unwrap();
    let out = run_min_tmax_search(&cfg, &prep, Method::Fft, Grid::PowersOfTwo { start: 8, max: 64 }, false).unwrap();
    assert_eq!(out.minimum, None);
    assert_eq!(out.minimum_label(), "> 64");
    assert_eq!(out.points.len(), 4);
}

proptest! {
    #[test]
    fn hankel_structure(trace in prop::collection::vec(-10.0f64..10.0, 4..40), k in 2usize..10) {
        prop_assume!(k + 1 < trace.len());
        let m = trace.len() - k;
        let emb = delay_embed(&trace, k, m).unwrap();
        for r in 0..k {
            for c in 0..m {
                prop_assert_eq!(emb.x[(r, c)].re, trace[r + c]);
                prop_assert_eq!(emb.y[(r, c)].re, trace[r + c + 1]);
            }
        }
    }

    #[test]
    fn agreement_properties(a in prop::collection::vec(0usize..4, 1..40), perm in Just([2usize, 0, 3, 1])) {
        let b: Vec<usize> = a.iter().map(|&l| perm[l]).collect();
        prop_assert_eq!(label_agreement(&a, &b).unwrap(), 1.0);
        let c: Vec<usize> = a.iter().rev().copied().collect();
        let ac = label_agreement(&a, &c).unwrap();
        prop_assert_eq!(ac, label_agreement(&c, &a).unwrap());
        prop_assert!(ac > 0.0 && ac <= 1.0);
    }
}

#[test]
fn planted_partition_step_100_search() {
    let cfg = ExperimentConfig {
        graph: GraphSource::Planted(wavedmd::graph::PlantedPartition::four_blocks()),
        k: Some(4),
        k_rows: Some(70),
        assign: Some(wavedmd::clustering::ClusterMethod::Kmeans),
        ..Default::default()
    };
    let prep = prepare(&cfg).unwrap();
    let out = run_min_tmax_search(&cfg, &prep, Method::Dmd, Grid::Step { start: 100, step: 100, max: 1000 }, true).unwrap();
    assert_eq!(out.minimum, Some(200));
    assert!(out.previous_fails);
    assert!(out.monotone_violations.is_empty(), "{:?}", out.monotone_violations);
}
