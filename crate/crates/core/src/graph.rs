//! Weighted undirected graphs: construction, edge-list I/O and generators.
//!
//! Nodes are indexed from 0 internally. Files using 1-based labels (the
//! SNAP convention for some datasets) are shifted at parse time.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// An undirected edge stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// Weighted undirected simple graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
}

impl Graph {
    /// Builds a graph from `(i, j, w)` triples.
    ///
    /// Exact duplicates of an unordered pair collapse into one edge; a
    /// duplicate with a different weight is an error.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut seen: HashMap<(usize, usize), f64> = HashMap::new();
        let mut out = Vec::new();
        for (idx, (a, b, w)) in edges.into_iter().enumerate() {
            let line = idx + 1;
            check_edge(a, b, w, n, line)?;
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            match seen.get(&(i, j)) {
                Some(&prev) if prev == w => continue,
                Some(&prev) => {
                    return Err(Error::ConflictingWeights { i, j, first: prev, second: w });
                }
                None => {
                    seen.insert((i, j), w);
                    out.push(Edge { i, j, w });
                }
            }
        }
        Ok(Self { n, edges: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Adjacency lists `(neighbor, weight)` per node, in edge order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.i].push((e.j, e.w));
            adj[e.j].push((e.i, e.w));
        }
        adj
    }

    /// Weighted degree `sum_l W_il` of every node.
    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for e in &self.edges {
            d[e.i] += e.w;
            d[e.j] += e.w;
        }
        d
    }

    /// Number of connected components (isolated nodes count as components).
    pub fn components(&self) -> usize {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &(v, _) in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.n > 0 && self.components() == 1
    }

    /// True when every node has the same weighted degree.
    pub fn is_regular(&self) -> bool {
        let d = self.degrees();
        d.iter().all(|&x| (x - d[0]).abs() <= 1e-12 * d[0].abs().max(1.0))
    }

    /// Serializes as `i j w` lines, 0-based, weights with 17 significant digits.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::with_capacity(self.edges.len() * 32);
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {:.16e}", e.i, e.j, e.w);
        }
        s
    }
}

fn check_edge(i: usize, j: usize, w: f64, n: usize, line: usize) -> Result<()> {
    if i >= n {
        return Err(Error::NodeOutOfRange { index: i, n });
    }
    if j >= n {
        return Err(Error::NodeOutOfRange { index: j, n });
    }
    if i == j {
        return Err(Error::SelfLoop { line, node: i });
    }
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::NonPositiveWeight { line, weight: w });
    }
    Ok(())
}

/// Options for [`parse_edge_list`].
#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub one_based: bool,
    pub default_weight: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { one_based: false, default_weight: 1.0 }
    }
}

/// Parses a whitespace-separated edge list (`i j` or `i j w` per line).
///
/// Lines starting with `#` and blank lines are skipped; LF and CRLF line
/// endings are both accepted. The node count is one more than the largest
/// index seen.
pub fn parse_edge_list(text: &str, opts: ParseOptions) -> Result<Graph> {
    let mut triples = Vec::new();
    let mut max_idx: Option<usize> = None;
    let mut seen: HashMap<(usize, usize), f64> = HashMap::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(Error::MalformedLine {
                line,
                reason: format!("expected 2 or 3 fields, found {}", fields.len()),
            });
        }
        let parse_idx = |s: &str| -> Result<usize> {
            let v: usize = s.parse().map_err(|_| Error::MalformedLine {
                line,
                reason: format!("bad node index {s:?}"),
            })?;
            if opts.one_based {
                v.checked_sub(1).ok_or_else(|| Error::MalformedLine {
                    line,
                    reason: "index 0 in a 1-based file".into(),
                })
            } else {
                Ok(v)
            }
        };
        let i = parse_idx(fields[0])?;
        let j = parse_idx(fields[1])?;
        let w = match fields.get(2) {
            Some(s) => s.parse::<f64>().map_err(|_| Error::MalformedLine {
                line,
                reason: format!("bad weight {s:?}"),
            })?,
            None => opts.default_weight,
        };
        if i == j {
            return Err(Error::SelfLoop { line, node: i });
        }
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::NonPositiveWeight { line, weight: w });
        }
        let key = (i.min(j), i.max(j));
        if let Some(&prev) = seen.get(&key) {
            if prev != w {
                return Err(Error::ConflictingWeights { i: key.0, j: key.1, first: prev, second: w });
            }
            continue;
        }
        seen.insert(key, w);
        max_idx = Some(max_idx.map_or(key.1, |m| m.max(key.1)));
        triples.push((i, j, w));
    }

    let n = max_idx.map_or(0, |m| m + 1);
    Graph::new(n, triples)
}

/// Path graph on `n` nodes whose edge `(weak_pos - 1, weak_pos)` carries
/// `w_weak` and every other edge `w_strong`.
pub fn generate_weak_line(n: usize, weak_pos: usize, w_strong: f64, w_weak: f64) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("line graph needs n >= 3, got {n}")));
    }
    if weak_pos == 0 || weak_pos >= n {
        return Err(Error::InvalidParameter(format!(
            "weak edge position {weak_pos} outside [1, {n})"
        )));
    }
    let edges = (0..n - 1).map(|i| (i, i + 1, if i + 1 == weak_pos { w_weak } else { w_strong }));
    Graph::new(n, edges)
}

/// Cycle on `n` nodes with uniform weight. Regular, so its Laplacian is symmetric.
pub fn generate_ring(n: usize, w: f64) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("ring needs n >= 3, got {n}")));
    }
    Graph::new(n, (0..n).map(|i| (i, (i + 1) % n, w)))
}

/// Parameters of the planted-partition generator.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlantedPartition {
    pub blocks: usize,
    pub block_size: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub w_in: (f64, f64),
    pub w_out: (f64, f64),
    pub seed: u64,
}

impl PlantedPartition {
    /// The 400-node, 4-block configuration used as the synthetic benchmark.
    pub fn four_blocks() -> Self {
        Self {
            blocks: 4,
            block_size: 100,
            p_in: 0.2,
            p_out: 0.01,
            w_in: (1.0, 2.0),
            w_out: (0.1, 0.5),
            seed: 7,
        }
    }
}

/// Graph plus the block label of every node.
#[derive(Debug, Clone)]
pub struct PlantedGraph {
    pub graph: Graph,
    pub labels: Vec<usize>,
}

const PLANTED_MAX_ATTEMPTS: usize = 100;

/// Samples a weighted stochastic block model, resampling until connected.
pub fn generate_planted_partition(p: &PlantedPartition) -> Result<PlantedGraph> {
    let prob_ok = |x: f64| x > 0.0 && x <= 1.0;
    if p.blocks == 0 || p.block_size == 0 {
        return Err(Error::InvalidParameter("blocks and block_size must be positive".into()));
    }
    if !prob_ok(p.p_in) || !prob_ok(p.p_out) || p.p_in <= p.p_out {
        return Err(Error::InvalidParameter(format!(
            "need 0 < p_out < p_in <= 1, got p_in={} p_out={}",
            p.p_in, p.p_out
        )));
    }
    for (lo, hi) in [p.w_in, p.w_out] {
        if !(lo > 0.0) || hi < lo || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!("bad weight interval ({lo}, {hi})")));
        }
    }

    let n = p.blocks * p.block_size;
    let labels: Vec<usize> = (0..n).map(|v| v / p.block_size).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    for _ in 0..PLANTED_MAX_ATTEMPTS {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let same = labels[i] == labels[j];
                let (prob, (lo, hi)) = if same { (p.p_in, p.w_in) } else { (p.p_out, p.w_out) };
                if rng.random::<f64>() < prob {
                    let w = if hi > lo { rng.random_range(lo..hi) } else { lo };
                    edges.push((i, j, w));
                }
            }
        }
        let graph = Graph::new(n, edges)?;
        if graph.is_connected() {
            return Ok(PlantedGraph { graph, labels });
        }
    }
    Err(Error::RetryBudgetExhausted { attempts: PLANTED_MAX_ATTEMPTS })
}

/// Zachary's karate club, 34 nodes and 78 unit-weight edges (0-based).
pub fn karate_club() -> Graph {
    Graph::new(34, KARATE_EDGES.iter().map(|&(i, j)| (i, j, 1.0))).expect("static edge list is valid")
}

/// Faction of each karate-club member after the split (0: instructor, 1: officer).
pub const KARATE_FACTIONS: [usize; 34] = [
    0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 0, 1, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1,
    1, 1,
];

const KARATE_EDGES: [(usize, usize); 78] = [
    (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6), (0, 7), (0, 8), (0, 10), (0, 11),
    (0, 12), (0, 13), (0, 17), (0, 19), (0, 21), (0, 31), (1, 2), (1, 3), (1, 7), (1, 13),
    (1, 17), (1, 19), (1, 21), (1, 30), (2, 3), (2, 7), (2, 8), (2, 9), (2, 13), (2, 27),
    (2, 28), (2, 32), (3, 7), (3, 12), (3, 13), (4, 6), (4, 10), (5, 6), (5, 10), (5, 16),
    (6, 16), (8, 30), (8, 32), (8, 33), (9, 33), (13, 33), (14, 32), (14, 33), (15, 32), (15, 33),
    (18, 32), (18, 33), (19, 33), (20, 32), (20, 33), (22, 32), (22, 33), (23, 25), (23, 27), (23, 29),
    (23, 32), (23, 33), (24, 25), (24, 27), (24, 31), (25, 31), (26, 29), (26, 33), (27, 33), (28, 31),
    (28, 33), (29, 32), (29, 33), (30, 32), (30, 33), (31, 32), (31, 33), (32, 33),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_weighted_list() {
        let g = parse_edge_list("0 1 5\n1 2 5\n", ParseOptions::default()).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges(), &[Edge { i: 0, j: 1, w: 5.0 }, Edge { i: 1, j: 2, w: 5.0 }]);
    }

    #[test]
    fn parses_one_based_with_default_weight() {
        let opts = ParseOptions { one_based: true, default_weight: 1.0 };
        let g = parse_edge_list("1 2\n2 3\n", opts).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges(), &[Edge { i: 0, j: 1, w: 1.0 }, Edge { i: 1, j: 2, w: 1.0 }]);
    }

    #[test]
    fn comments_crlf_and_duplicates() {
        let text = "# header\r\n0 1 2\r\n\r\n1 0 2\r\n# trailing\r\n1 2 3\r\n";
        let g = parse_edge_list(text, ParseOptions::default()).unwrap();
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        let o = ParseOptions::default();
        assert!(matches!(parse_edge_list("0 1\n1\n", o), Err(Error::MalformedLine { line: 2, .. })));
        assert!(matches!(parse_edge_list("0 x\n", o), Err(Error::MalformedLine { line: 1, .. })));
        assert!(matches!(parse_edge_list("0 1 -1\n", o), Err(Error::NonPositiveWeight { line: 1, .. })));
        assert!(matches!(parse_edge_list("0 1 0\n", o), Err(Error::NonPositiveWeight { .. })));
        assert!(matches!(parse_edge_list("2 2 1\n", o), Err(Error::SelfLoop { line: 1, node: 2 })));
        assert!(matches!(
            parse_edge_list("0 1 1\n1 0 2\n", o),
            Err(Error::ConflictingWeights { i: 0, j: 1, .. })
        ));
        let ob = ParseOptions { one_based: true, default_weight: 1.0 };
        assert!(matches!(parse_edge_list("0 1\n", ob), Err(Error::MalformedLine { .. })));
    }

    #[test]
    fn weak_line_small() {
        let g = generate_weak_line(3, 2, 5.0, 1.0).unwrap();
        assert_eq!(g.edges(), &[Edge { i: 0, j: 1, w: 5.0 }, Edge { i: 1, j: 2, w: 1.0 }]);
        assert!(generate_weak_line(3, 0, 5.0, 1.0).is_err());
        assert!(generate_weak_line(3, 3, 5.0, 1.0).is_err());
        assert!(generate_weak_line(2, 1, 5.0, 1.0).is_err());
    }

    #[test]
    fn weak_line_fifty() {
        let g = generate_weak_line(50, 25, 5.0, 1.0).unwrap();
        assert_eq!(g.num_edges(), 49);
        let weak: Vec<_> = g.edges().iter().filter(|e| e.w == 1.0).collect();
        assert_eq!(weak.len(), 1);
        assert_eq!((weak[0].i, weak[0].j), (24, 25));
    }

    #[test]
    fn karate_shape() {
        let g = karate_club();
        assert_eq!(g.n(), 34);
        assert_eq!(g.num_edges(), 78);
        assert!(g.is_connected());
    }

    #[test]
    fn planted_is_deterministic_and_dense_inside_blocks() {
        let p = PlantedPartition::four_blocks();
        let a = generate_planted_partition(&p).unwrap();
        let b = generate_planted_partition(&p).unwrap();
        assert_eq!(a.graph.to_edge_list(), b.graph.to_edge_list());
        assert!(a.graph.is_connected());
        assert_eq!(a.graph.n(), 400);

        let (mut inside, mut across) = (0usize, 0usize);
        for e in a.graph.edges() {
            if a.labels[e.i] == a.labels[e.j] {
                inside += 1;
                assert!(e.w >= 1.0 && e.w < 2.0);
            } else {
                across += 1;
                assert!(e.w >= 0.1 && e.w < 0.5);
            }
        }
        // Expected counts: 4 * C(100,2) * 0.2 = 3960 and 6 * 100^2 * 0.01 = 600.
        assert!((3600..4300).contains(&inside), "inside = {inside}");
        assert!((450..750).contains(&across), "across = {across}");
    }

    #[test]
    fn planted_single_block() {
        let p = PlantedPartition { blocks: 1, block_size: 30, p_in: 0.3, p_out: 0.1, ..PlantedPartition::four_blocks() };
        let g = generate_planted_partition(&p).unwrap();
        assert!(g.labels.iter().all(|&l| l == 0));
        assert!(g.graph.is_connected());
    }

    #[test]
    fn planted_gives_up() {
        let p = PlantedPartition {
            blocks: 2,
            block_size: 50,
            p_in: 0.001,
            p_out: 0.0005,
            ..PlantedPartition::four_blocks()
        };
        assert!(matches!(generate_planted_partition(&p), Err(Error::RetryBudgetExhausted { .. })));
    }

    #[test]
    fn planted_rejects_bad_parameters() {
        let base = PlantedPartition::four_blocks();
        for p in [
            PlantedPartition { p_in: 0.01, p_out: 0.2, ..base },
            PlantedPartition { p_in: 1.5, ..base },
            PlantedPartition { w_in: (0.0, 1.0), ..base },
            PlantedPartition { w_out: (2.0, 1.0), ..base },
        ] {
            assert!(matches!(generate_planted_partition(&p), Err(Error::InvalidParameter(_))));
        }
    }
}
