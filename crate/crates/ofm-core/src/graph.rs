//! Graphs, generators, and the normalized operator.
//!
//! A [`Graph`] is an undirected simple graph stored as a canonical edge list:
//! every edge oriented `u < v`, sorted, no duplicates, no self-loops. All
//! loaders and generators funnel through [`Graph::from_edges`], which enforces
//! that shape. Isolated nodes are legal and show up only through `n_nodes`.

use std::collections::VecDeque;
use std::io::BufRead;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::error::{OfmError, Result};
use crate::sparse::SparseSym;

/// Undirected simple graph with a fixed node count.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Canonicalize an edge iterator: orient `u < v`, drop self-loops, sort,
    /// deduplicate. Endpoints at or beyond `n_nodes` are an error.
    pub fn from_edges(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Graph> {
        let mut canon: Vec<(usize, usize)> = Vec::new();
        for (a, b) in edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(OfmError::InvalidArgument(format!(
                    "edge ({a}, {b}) out of range for {n_nodes} nodes"
                )));
            }
            if a == b {
                continue;
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(Graph { n_nodes, edges: canon })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list (sorted, `u < v`).
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Node degrees.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.n_nodes];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    /// Sorted adjacency lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
        }
        adj
    }
}

/// Planted community labels for a generated graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    labels: Vec<usize>,
    n_blocks: usize,
}

impl GroundTruth {
    pub fn new(labels: Vec<usize>, n_blocks: usize) -> Result<GroundTruth> {
        let mut seen = vec![false; n_blocks];
        for &l in &labels {
            if l >= n_blocks {
                return Err(OfmError::InvalidArgument(format!(
                    "label {l} out of range for {n_blocks} blocks"
                )));
            }
            seen[l] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(OfmError::InvalidArgument(
                "every block must own at least one node".into(),
            ));
        }
        Ok(GroundTruth { labels, n_blocks })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }
}

/// How `split_stream` orders edges before chunking them into parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamMode {
    /// Uniform random permutation of the edge list.
    EdgeSampling,
    /// Breadth-first discovery order from a random start node; edges whose
    /// component the walk never reaches go last, in canonical order.
    Snowball,
}

impl StreamMode {
    pub fn parse(s: &str) -> Result<StreamMode> {
        match s {
            "edge-sampling" => Ok(StreamMode::EdgeSampling),
            "snowball" => Ok(StreamMode::Snowball),
            other => Err(OfmError::InvalidArgument(format!(
                "unknown stream mode {other:?} (expected \"edge-sampling\" or \"snowball\")"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            StreamMode::EdgeSampling => "edge-sampling",
            StreamMode::Snowball => "snowball",
        }
    }
}

/// Disjoint edge parts whose union is the full edge set; prefixes of the
/// plan are the graph snapshots a streaming run consumes.
#[derive(Debug, Clone)]
pub struct StreamPlan {
    mode: StreamMode,
    parts: Vec<Vec<(usize, usize)>>,
}

impl StreamPlan {
    pub fn mode(&self) -> StreamMode {
        self.mode
    }

    pub fn n_parts(&self) -> usize {
        self.parts.len()
    }

    pub fn part(&self, s: usize) -> &[(usize, usize)] {
        &self.parts[s]
    }

    /// Union of parts `0..=upto`.
    pub fn cumulative_edges(&self, upto: usize) -> Vec<(usize, usize)> {
        let mut all = Vec::new();
        for part in &self.parts[..=upto] {
            all.extend_from_slice(part);
        }
        all
    }

    /// Graph snapshot after stage `upto` arrived.
    pub fn cumulative_graph(&self, upto: usize, n_nodes: usize) -> Result<Graph> {
        Graph::from_edges(n_nodes, self.cumulative_edges(upto))
    }
}

/// Deterministically derive an independent ChaCha seed from a base seed and a
/// purpose salt (SplitMix64 finalizer).
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Parse a whitespace-separated edge list.
///
/// Lines starting with `%` or `#` and blank lines are skipped. Every other
/// line must hold exactly two non-negative integers (0-indexed endpoints).
/// Duplicate edges and self-loops are dropped. Node count is
/// `max endpoint + 1`, or `n_hint` when given; endpoints at or beyond the
/// hint are an error.
pub fn load_edge_list(reader: impl BufRead, n_hint: Option<usize>) -> Result<Graph> {
    let mut raw: Vec<(usize, usize)> = Vec::new();
    let mut max_node: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| OfmError::Parse {
            line: line_no,
            message: format!("read failure: {e}"),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let (a, b) = match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(OfmError::Parse {
                    line: line_no,
                    message: format!("expected exactly two integers, got {trimmed:?}"),
                })
            }
        };
        let parse = |tok: &str| -> Result<usize> {
            tok.parse::<usize>().map_err(|_| OfmError::Parse {
                line: line_no,
                message: format!("not a non-negative integer: {tok:?}"),
            })
        };
        let (u, v) = (parse(a)?, parse(b)?);
        max_node = Some(max_node.map_or(u.max(v), |m| m.max(u).max(v)));
        raw.push((u, v));
    }
    let n = match n_hint {
        Some(h) => h,
        None => max_node.map_or(0, |m| m + 1),
    };
    Graph::from_edges(n, raw)
}

/// Parse a MatrixMarket `coordinate` file as an undirected graph.
///
/// Accepts `pattern`, `real`, or `integer` fields (values are ignored) with
/// `symmetric` or `general` symmetry; entries are 1-indexed. Self-loops are
/// dropped and duplicate orientations merged.
pub fn load_matrix_market(reader: impl BufRead) -> Result<Graph> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or(OfmError::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let header = header.map_err(|e| OfmError::Parse {
        line: 1,
        message: format!("read failure: {e}"),
    })?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    let ok_header = tokens.len() == 5
        && tokens[0] == "%%matrixmarket"
        && tokens[1] == "matrix"
        && tokens[2] == "coordinate"
        && matches!(tokens[3].as_str(), "pattern" | "real" | "integer")
        && matches!(tokens[4].as_str(), "symmetric" | "general");
    if !ok_header {
        return Err(OfmError::Parse {
            line: 1,
            message: format!("unsupported MatrixMarket header: {header:?}"),
        });
    }
    let has_values = tokens[3] != "pattern";

    let mut size: Option<(usize, usize, usize)> = None;
    let mut raw: Vec<(usize, usize)> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| OfmError::Parse {
            line: line_no,
            message: format!("read failure: {e}"),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let ints: std::result::Result<Vec<i64>, _> = trimmed
            .split_whitespace()
            .take(3)
            .map(|t| t.parse::<f64>().map(|v| v as i64))
            .collect();
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        if size.is_none() {
            if parts.len() != 3 {
                return Err(OfmError::Parse {
                    line: line_no,
                    message: format!("expected `rows cols nnz`, got {trimmed:?}"),
                });
            }
            let dims = ints.map_err(|_| OfmError::Parse {
                line: line_no,
                message: format!("bad size line: {trimmed:?}"),
            })?;
            let (r, c, nnz) = (dims[0], dims[1], dims[2]);
            if r != c || r < 0 || nnz < 0 {
                return Err(OfmError::Parse {
                    line: line_no,
                    message: format!("need a square matrix, got {r} x {c}"),
                });
            }
            size = Some((r as usize, c as usize, nnz as usize));
            continue;
        }
        let want = if has_values { 3 } else { 2 };
        if parts.len() != want {
            return Err(OfmError::Parse {
                line: line_no,
                message: format!("expected {want} fields per entry, got {trimmed:?}"),
            });
        }
        let i: usize = parts[0].parse().map_err(|_| OfmError::Parse {
            line: line_no,
            message: format!("bad row index {:?}", parts[0]),
        })?;
        let j: usize = parts[1].parse().map_err(|_| OfmError::Parse {
            line: line_no,
            message: format!("bad column index {:?}", parts[1]),
        })?;
        if i == 0 || j == 0 {
            return Err(OfmError::Parse {
                line: line_no,
                message: "MatrixMarket indices are 1-based".into(),
            });
        }
        raw.push((i - 1, j - 1));
    }
    let (n, _, _) = size.ok_or(OfmError::Parse {
        line: 2,
        message: "missing size line".into(),
    })?;
    Graph::from_edges(n, raw)
}

/// Sample a stochastic block model graph with planted contiguous blocks.
///
/// Nodes are assigned to `blocks` contiguous index ranges. With
/// `size_variation = 1.0` the ranges are equal up to a remainder of one;
/// larger values draw per-block weights uniformly from `[1, size_variation]`
/// and round them to sizes, so the largest/smallest size ratio stays near the
/// requested variation. Each unordered node pair receives one uniform draw,
/// kept as an edge when it falls below `p_in` (same block) or `p_out`
/// (different blocks). The pair scan runs in a fixed order, so the output is
/// a pure function of the arguments.
pub fn generate_sbm(
    n: usize,
    blocks: usize,
    p_in: f64,
    p_out: f64,
    size_variation: f64,
    seed: u64,
) -> Result<(Graph, GroundTruth)> {
    if blocks == 0 || blocks > n {
        return Err(OfmError::InvalidArgument(format!(
            "need 1 <= blocks <= n, got blocks = {blocks}, n = {n}"
        )));
    }
    if !(0.0..=1.0).contains(&p_out) || !(0.0..=1.0).contains(&p_in) || p_out > p_in {
        return Err(OfmError::InvalidArgument(format!(
            "need 0 <= p_out <= p_in <= 1, got p_in = {p_in}, p_out = {p_out}"
        )));
    }
    if !(size_variation >= 1.0) {
        return Err(OfmError::InvalidArgument(format!(
            "size_variation must be >= 1, got {size_variation}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5b0c));
    let sizes = block_sizes(n, blocks, size_variation, &mut rng);

    let mut labels = Vec::with_capacity(n);
    for (b, &s) in sizes.iter().enumerate() {
        labels.extend(std::iter::repeat(b).take(s));
    }
    let truth = GroundTruth::new(labels, blocks)?;

    let mut edge_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xed6e));
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if truth.labels[u] == truth.labels[v] { p_in } else { p_out };
            // One draw per pair regardless of p keeps the stream aligned
            // across probability settings with the same seed.
            let t: f64 = edge_rng.gen();
            if t < p {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::from_edges(n, edges)?;
    Ok((graph, truth))
}

/// Split `n` into `blocks` positive sizes whose max/min ratio approximates
/// `variation` (exact equality up to a remainder of one when `variation = 1`).
fn block_sizes(n: usize, blocks: usize, variation: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if variation == 1.0 {
        let base = n / blocks;
        let rem = n % blocks;
        return (0..blocks).map(|b| base + usize::from(b < rem)).collect();
    }
    let weights: Vec<f64> = (0..blocks).map(|_| 1.0 + rng.gen::<f64>() * (variation - 1.0)).collect();
    let total: f64 = weights.iter().sum();
    let raw: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut sizes: Vec<usize> = raw.iter().map(|r| (r.floor() as usize).max(1)).collect();
    // Largest-remainder rounding, then repair any overshoot from the max(1)
    // clamps by shaving the largest blocks.
    let mut assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..blocks).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut i = 0;
    while assigned < n {
        sizes[order[i % blocks]] += 1;
        assigned += 1;
        i += 1;
    }
    while assigned > n {
        let argmax = (0..blocks).max_by_key(|&b| (sizes[b], b)).unwrap();
        if sizes[argmax] > 1 {
            sizes[argmax] -= 1;
            assigned -= 1;
        } else {
            break;
        }
    }
    sizes
}

/// Partition a graph's edges into `parts` disjoint chunks for streaming.
///
/// Chunk sizes differ by at most one. `EdgeSampling` permutes edges
/// uniformly; `Snowball` orders them by breadth-first discovery from a
/// seeded random start node (ties by node index), with edges the walk never
/// reaches appended in canonical order.
pub fn split_stream(
    graph: &Graph,
    parts: usize,
    mode: StreamMode,
    seed: u64,
) -> Result<StreamPlan> {
    let m = graph.n_edges();
    if parts == 0 {
        return Err(OfmError::InvalidArgument("parts must be positive".into()));
    }
    if parts > m {
        return Err(OfmError::InvalidArgument(format!(
            "cannot split {m} edges into {parts} non-empty parts"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x57a6));
    let ordered: Vec<(usize, usize)> = match mode {
        StreamMode::EdgeSampling => {
            let mut idx: Vec<usize> = (0..m).collect();
            // Fisher-Yates, fixed walk so the permutation is seed-determined.
            for i in (1..m).rev() {
                let j = rng.gen_range(0..=i);
                idx.swap(i, j);
            }
            idx.into_iter().map(|i| graph.edges()[i]).collect()
        }
        StreamMode::Snowball => snowball_order(graph, rng.gen_range(0..graph.n_nodes())),
    };

    let base = m / parts;
    let rem = m % parts;
    let mut out = Vec::with_capacity(parts);
    let mut cursor = 0;
    for s in 0..parts {
        let len = base + usize::from(s < rem);
        out.push(ordered[cursor..cursor + len].to_vec());
        cursor += len;
    }
    Ok(StreamPlan { mode, parts: out })
}

/// Edge order induced by a breadth-first walk from `start`: an edge is
/// emitted the first time either endpoint scan touches it. Edges in other
/// components follow in canonical order.
fn snowball_order(graph: &Graph, start: usize) -> Vec<(usize, usize)> {
    let adj = graph.adjacency();
    let mut visited = vec![false; graph.n_nodes()];
    let mut emitted: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    let mut order = Vec::with_capacity(graph.n_edges());
    let mut queue = VecDeque::new();
    visited[start] = true;
    queue.push_back(start);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            let key = (u.min(v), u.max(v));
            if emitted.insert(key) {
                order.push(key);
            }
            if !visited[v] {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    for &e in graph.edges() {
        if !emitted.contains(&e) {
            order.push(e);
        }
    }
    order
}

/// Build the shifted normalized operator of a graph.
///
/// With `S` the adjacency matrix, `D` the degree matrix, and the convention
/// that isolated nodes contribute `D^{-1/2}_{vv} = 0`, this is
/// `-I - D^{-1/2} S D^{-1/2}`: diagonal entries are exactly `-1`, and each
/// edge `(u, v)` contributes `-1/sqrt(deg(u) deg(v))` to both orientations.
/// Its spectrum lies in `[-2, 0]`, so the bottom eigenvectors — the
/// clustering features — pair with the most negative eigenvalues.
pub fn build_shifted_operator(graph: &Graph) -> SparseSym {
    let deg = graph.degrees();
    let diagonal = vec![-1.0; graph.n_nodes()];
    let pairs: Vec<(usize, usize, f64)> = graph
        .edges()
        .iter()
        .map(|&(u, v)| {
            let w = -1.0 / ((deg[u] as f64) * (deg[v] as f64)).sqrt();
            (u, v, w)
        })
        .collect();
    SparseSym::from_pairs(graph.n_nodes(), &diagonal, &pairs)
        .expect("canonical edges cannot produce invalid pairs")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn from_edges_canonicalizes() {
        let g = Graph::from_edges(4, vec![(2, 1), (1, 2), (3, 3), (0, 3)]).unwrap();
        assert_eq!(g.edges(), &[(0, 3), (1, 2)]);
        assert!(Graph::from_edges(2, vec![(0, 2)]).is_err());
    }

    #[test]
    fn edge_list_skips_comments_and_dedups() {
        let text = "% a comment\n# another\n0 1\n1 0\n2 2\n\n1 2\n";
        let g = load_edge_list(text.as_bytes(), None).unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn edge_list_reports_malformed_line() {
        let text = "0 1\nnonsense here\n";
        match load_edge_list(text.as_bytes(), None) {
            Err(OfmError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let three = "0 1 7\n";
        assert!(matches!(
            load_edge_list(three.as_bytes(), None),
            Err(OfmError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn edge_list_honors_n_hint() {
        let g = load_edge_list("0 1\n".as_bytes(), Some(5)).unwrap();
        assert_eq!(g.n_nodes(), 5);
        assert!(load_edge_list("0 9\n".as_bytes(), Some(5)).is_err());
    }

    #[test]
    fn matrix_market_round_trip() {
        let text = "%%MatrixMarket matrix coordinate pattern symmetric\n% comment\n3 3 2\n2 1\n3 2\n";
        let g = load_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);

        let with_vals = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 0.5\n2 1 0.5\n";
        let g2 = load_matrix_market(with_vals.as_bytes()).unwrap();
        assert_eq!(g2.edges(), &[(0, 1)]);

        assert!(load_matrix_market("%%MatrixMarket matrix array real general\n".as_bytes()).is_err());
    }

    #[test]
    fn shifted_operator_single_edge() {
        let g = Graph::from_edges(2, vec![(0, 1)]).unwrap();
        let a = build_shifted_operator(&g);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(a.get(i, j), -1.0);
            }
        }
    }

    #[test]
    fn shifted_operator_path_entries() {
        // Path 0-1-2: degrees 1, 2, 1.
        let g = Graph::from_edges(3, vec![(0, 1), (1, 2)]).unwrap();
        let a = build_shifted_operator(&g);
        let w = -1.0 / 2.0_f64.sqrt();
        assert_eq!(a.get(0, 0), -1.0);
        assert_eq!(a.get(0, 1), w);
        assert_eq!(a.get(1, 2), w);
        assert_eq!(a.get(0, 2), 0.0);
        a.check_symmetric().unwrap();
    }

    #[test]
    fn shifted_operator_isolated_node_row() {
        let g = Graph::from_edges(3, vec![(0, 1)]).unwrap();
        let a = build_shifted_operator(&g);
        let (cols, vals) = a.row(2);
        assert_eq!(cols, &[2]);
        assert_eq!(vals, &[-1.0]);
    }

    #[test]
    fn shifted_operator_is_bitwise_symmetric() {
        let (g, _) = generate_sbm(60, 3, 0.3, 0.05, 1.0, 99).unwrap();
        build_shifted_operator(&g).check_symmetric().unwrap();
    }

    #[test]
    fn sbm_two_cliques() {
        let (g, truth) = generate_sbm(8, 2, 1.0, 0.0, 1.0, 7).unwrap();
        assert_eq!(truth.labels(), &[0, 0, 0, 0, 1, 1, 1, 1]);
        // Two disjoint 4-cliques: 6 edges each.
        assert_eq!(g.n_edges(), 12);
        for &(u, v) in g.edges() {
            assert_eq!(truth.labels()[u], truth.labels()[v]);
        }
    }

    #[test]
    fn sbm_is_deterministic_and_seed_sensitive() {
        let (g1, _) = generate_sbm(50, 2, 0.4, 0.1, 1.0, 5).unwrap();
        let (g2, _) = generate_sbm(50, 2, 0.4, 0.1, 1.0, 5).unwrap();
        let (g3, _) = generate_sbm(50, 2, 0.4, 0.1, 1.0, 6).unwrap();
        assert_eq!(g1, g2);
        assert_ne!(g1, g3);
    }

    #[test]
    fn sbm_edge_count_tracks_binomial_mean() {
        // One block: every pair independent with p = 0.3. Mean 234, sd ~12.8;
        // stay within five sigma.
        let (g, _) = generate_sbm(40, 1, 0.3, 0.0, 1.0, 11).unwrap();
        let mean = 780.0 * 0.3;
        let sd = (780.0_f64 * 0.3 * 0.7).sqrt();
        let count = g.n_edges() as f64;
        assert!((count - mean).abs() < 5.0 * sd, "edge count {count} too far from {mean}");
    }

    #[test]
    fn sbm_size_variation_respects_bounds() {
        for seed in 0..20 {
            let (_, truth) = generate_sbm(101, 4, 0.2, 0.01, 3.0, seed).unwrap();
            let mut sizes = vec![0usize; truth.n_blocks()];
            for &l in truth.labels() {
                sizes[l] += 1;
            }
            assert_eq!(sizes.iter().sum::<usize>(), 101);
            assert!(sizes.iter().all(|&s| s >= 1));
        }
    }

    #[test]
    fn sbm_rejects_bad_arguments() {
        assert!(generate_sbm(4, 0, 0.5, 0.1, 1.0, 0).is_err());
        assert!(generate_sbm(4, 5, 0.5, 0.1, 1.0, 0).is_err());
        assert!(generate_sbm(4, 2, 0.2, 0.5, 1.0, 0).is_err());
        assert!(generate_sbm(4, 2, 1.5, 0.1, 1.0, 0).is_err());
        assert!(generate_sbm(4, 2, 0.5, 0.1, 0.5, 0).is_err());
    }

    #[test]
    fn split_stream_balances_part_sizes() {
        let (g, _) = generate_sbm(30, 2, 0.5, 0.1, 1.0, 3).unwrap();
        let plan = split_stream(&g, 7, StreamMode::EdgeSampling, 17).unwrap();
        let sizes: Vec<usize> = (0..plan.n_parts()).map(|s| plan.part(s).len()).collect();
        let (mn, mx) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(mx - mn <= 1, "sizes {sizes:?}");
        assert_eq!(sizes.iter().sum::<usize>(), g.n_edges());
    }

    #[test]
    fn split_stream_rejects_too_many_parts() {
        let g = Graph::from_edges(3, vec![(0, 1), (1, 2)]).unwrap();
        assert!(split_stream(&g, 3, StreamMode::EdgeSampling, 0).is_err());
        assert!(split_stream(&g, 0, StreamMode::EdgeSampling, 0).is_err());
    }

    #[test]
    fn snowball_keeps_start_component_first() {
        // Two disjoint 5-cliques (10 edges each). Whichever clique holds the
        // random start node, its edges must occupy the first ten slots.
        let mut edges = Vec::new();
        for u in 0..5 {
            for v in (u + 1)..5 {
                edges.push((u, v));
                edges.push((u + 5, v + 5));
            }
        }
        let g = Graph::from_edges(10, edges).unwrap();
        for seed in 0..6 {
            let plan = split_stream(&g, 4, StreamMode::Snowball, seed).unwrap();
            let ordered: Vec<(usize, usize)> = plan.cumulative_edges(3);
            let first_clique = usize::from(ordered[0].0 >= 5);
            for (pos, &(u, v)) in ordered.iter().enumerate() {
                let clique = usize::from(u >= 5);
                assert_eq!(clique, usize::from(v >= 5));
                if pos < 10 {
                    assert_eq!(clique, first_clique, "seed {seed}: foreign edge at {pos}");
                } else {
                    assert_ne!(clique, first_clique, "seed {seed}: late edge at {pos}");
                }
            }
        }
    }

    #[test]
    fn snowball_discovery_order_is_breadth_first() {
        // Star 0-{1,2,3} plus pendant 3-4: from node 0 the star edges come in
        // index order, then the pendant once node 3 is scanned.
        let g = Graph::from_edges(5, vec![(0, 1), (0, 2), (0, 3), (3, 4)]).unwrap();
        let order = snowball_order(&g, 0);
        assert_eq!(order, vec![(0, 1), (0, 2), (0, 3), (3, 4)]);
        // From the pendant leaf the path back unrolls first.
        let order = snowball_order(&g, 4);
        assert_eq!(order[0], (3, 4));
        assert_eq!(order[1], (0, 3));
    }

    proptest! {
        #[test]
        fn stream_parts_disjoint_and_cover(
            n in 4usize..40,
            p_permille in 100usize..900,
            parts in 1usize..6,
            seed in 0u64..500,
            snowball in proptest::bool::ANY,
        ) {
            let (g, _) = generate_sbm(n, 2.min(n), p_permille as f64 / 1000.0, 0.05, 1.0, seed).unwrap();
            prop_assume!(g.n_edges() >= parts);
            let mode = if snowball { StreamMode::Snowball } else { StreamMode::EdgeSampling };
            let plan = split_stream(&g, parts, mode, seed ^ 0xabcd).unwrap();
            let mut all: Vec<(usize, usize)> = plan.cumulative_edges(plan.n_parts() - 1);
            all.sort_unstable();
            let mut expect = g.edges().to_vec();
            expect.sort_unstable();
            prop_assert_eq!(all, expect);
        }
    }
}
