//! Underlying graphs for replay experiments: connected Erdős–Rényi G(n, m)
//! and Barabási–Albert graphs trimmed or topped up to an exact edge count.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::Rng;
use thiserror::Error;

/// ER rejection-sampling cap used when none is given.
pub const DEFAULT_MAX_RETRIES: u32 = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("no simple connected graph has {n} nodes and {m} edges")]
    Infeasible { n: usize, m: usize },
    #[error("no connected G({n}, {m}) sample within {attempts} attempts")]
    MaxRetriesExceeded { n: usize, m: usize, attempts: u32 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for GraphError {
    fn from(e: std::io::Error) -> Self {
        GraphError::Io(e.to_string())
    }
}

/// A simple, connected, undirected graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnderlyingGraph {
    n: usize,
    // Each edge stored once with the smaller endpoint first, in generation order.
    edges: Vec<(u32, u32)>,
    adjacency: Vec<Vec<u32>>,
    edge_set: HashSet<(u32, u32)>,
}

fn ordered(u: u32, v: u32) -> (u32, u32) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

impl UnderlyingGraph {
    fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
            adjacency: vec![Vec::new(); n],
            edge_set: HashSet::new(),
        }
    }

    /// Builds a graph from an edge list, checking it is simple.
    /// Connectivity is not required here; see [`is_connected`](Self::is_connected).
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self, GraphError> {
        let mut g = Self::empty(n);
        for (u, v) in edges {
            if u == v || u as usize >= n || v as usize >= n || g.has_edge(u, v) {
                return Err(GraphError::Parse {
                    line: 0,
                    msg: format!("edge ({u}, {v}) is a self-loop, out of range, or repeated"),
                });
            }
            g.insert(u, v);
        }
        Ok(g)
    }

    fn insert(&mut self, u: u32, v: u32) {
        let e = ordered(u, v);
        self.edges.push(e);
        self.edge_set.insert(e);
        self.adjacency[u as usize].push(v);
        self.adjacency[v as usize].push(u);
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, u: u32) -> &[u32] {
        &self.adjacency[u as usize]
    }

    pub fn degree(&self, u: u32) -> usize {
        self.adjacency[u as usize].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.edge_set.contains(&ordered(u, v))
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0u32];
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = stack.pop() {
            for &v in self.neighbors(u) {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    reached += 1;
                    stack.push(v);
                }
            }
        }
        reached == self.n
    }

    /// Writes the `# graph v1` format: header, `n m`, then one `u v` line per edge.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), GraphError> {
        writeln!(w, "# graph v1")?;
        writeln!(w, "{} {}", self.n, self.edges.len())?;
        for &(u, v) in &self.edges {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, GraphError> {
        let mut header = false;
        let mut size: Option<(usize, usize)> = None;
        let mut edges = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(c) = t.strip_prefix('#') {
                header |= c.trim() == "graph v1";
                continue;
            }
            let parse_err = |msg: String| GraphError::Parse { line: line_no, msg };
            if !header {
                return Err(parse_err("missing '# graph v1' header".into()));
            }
            let fields: Vec<&str> = t.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(parse_err(format!("expected 2 fields, got {}", fields.len())));
            }
            let a: u64 = fields[0]
                .parse()
                .map_err(|_| parse_err(format!("bad integer '{}'", fields[0])))?;
            let b: u64 = fields[1]
                .parse()
                .map_err(|_| parse_err(format!("bad integer '{}'", fields[1])))?;
            match size {
                None => size = Some((a as usize, b as usize)),
                Some((n, _)) => {
                    if a as usize >= n || b as usize >= n {
                        return Err(parse_err(format!("node out of range in edge ({a}, {b})")));
                    }
                    edges.push((line_no, a as u32, b as u32));
                }
            }
        }
        let (n, m) = size.ok_or(GraphError::Parse {
            line: 0,
            msg: "missing 'n m' line".into(),
        })?;
        if edges.len() != m {
            return Err(GraphError::Parse {
                line: 0,
                msg: format!("header declares {m} edges, found {}", edges.len()),
            });
        }
        let mut g = Self::empty(n);
        for (line, u, v) in edges {
            if u == v || g.has_edge(u, v) {
                return Err(GraphError::Parse {
                    line,
                    msg: format!("edge ({u}, {v}) is a self-loop or repeated"),
                });
            }
            g.insert(u, v);
        }
        Ok(g)
    }
}

fn max_edges(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn check_size(n: usize, m: usize) -> Result<(), GraphError> {
    if m + 1 < n || m > max_edges(n) {
        Err(GraphError::Infeasible { n, m })
    } else {
        Ok(())
    }
}

// Union-find connectivity check, cheaper than building the graph for rejected samples.
fn spans(n: usize, edges: &[(u32, u32)]) -> bool {
    fn root(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    let mut parent: Vec<u32> = (0..n as u32).collect();
    let mut components = n;
    for &(u, v) in edges {
        let (a, b) = (root(&mut parent, u), root(&mut parent, v));
        if a != b {
            parent[a as usize] = b;
            components -= 1;
        }
    }
    components <= 1
}

// Row-major rank of the pair (u, v), u < v.
struct PairIndex {
    row_start: Vec<usize>,
}

impl PairIndex {
    fn new(n: usize) -> Self {
        let row_start = (0..n).map(|u| u * (2 * n - u - 1) / 2).collect();
        Self { row_start }
    }

    fn rank(&self, u: u32, v: u32) -> usize {
        self.row_start[u as usize] + (v - u - 1) as usize
    }
}

/// Uniform G(n, m) conditioned on connectivity, by rejection.
pub fn er_gnm_connected<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<UnderlyingGraph, GraphError> {
    er_gnm_connected_with_retries(n, m, rng, DEFAULT_MAX_RETRIES)
}

pub fn er_gnm_connected_with_retries<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
    max_retries: u32,
) -> Result<UnderlyingGraph, GraphError> {
    check_size(n, m)?;
    let index = PairIndex::new(n);
    let mut taken = vec![false; max_edges(n)];
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(m);
    for _ in 0..max_retries {
        // m distinct pairs, uniformly without replacement.
        for &(u, v) in &edges {
            taken[index.rank(u, v)] = false;
        }
        edges.clear();
        while edges.len() < m {
            let (u, v) = ordered(rng.random_range(0..n as u32), rng.random_range(0..n as u32));
            if u != v && !taken[index.rank(u, v)] {
                taken[index.rank(u, v)] = true;
                edges.push((u, v));
            }
        }
        if spans(n, &edges) {
            // Edge order in the output is canonical; only the edge set is random.
            edges.sort_unstable();
            let mut g = UnderlyingGraph::empty(n);
            for &(u, v) in &edges {
                g.insert(u, v);
            }
            return Ok(g);
        }
    }
    Err(GraphError::MaxRetriesExceeded {
        n,
        m,
        attempts: max_retries,
    })
}

/// Preferential-attachment graph with exactly `m_total` edges.
///
/// Growth starts from nodes 0 and 1 joined by one edge. Each later node
/// attaches to two distinct existing nodes chosen with probability
/// proportional to degree, which yields `2n - 3` edges. When `m_total` is
/// smaller, the latest nodes attach only once (the graph stays a connected
/// tree plus extra edges). When it is larger, further distinct edges are
/// added between endpoints drawn proportionally to degree.
pub fn ba_graph<R: Rng + ?Sized>(n: usize, m_total: usize, rng: &mut R) -> Result<UnderlyingGraph, GraphError> {
    if n < 2 {
        return Err(GraphError::Infeasible { n, m: m_total });
    }
    check_size(n, m_total)?;
    let mut g = UnderlyingGraph::empty(n);
    // Each node appears once per incident edge: uniform draws from this list
    // are degree-proportional.
    let mut ends: Vec<u32> = Vec::with_capacity(2 * m_total);
    let link = |g: &mut UnderlyingGraph, ends: &mut Vec<u32>, u: u32, v: u32| {
        g.insert(u, v);
        ends.push(u);
        ends.push(v);
    };
    link(&mut g, &mut ends, 0, 1);
    // Budget of second attachments beyond the spanning tree.
    let mut extra = m_total - (n - 1);
    for new in 2..n as u32 {
        let first = ends[rng.random_range(0..ends.len())];
        let second = if extra > 0 {
            extra -= 1;
            loop {
                let c = ends[rng.random_range(0..ends.len())];
                if c != first {
                    break Some(c);
                }
            }
        } else {
            None
        };
        link(&mut g, &mut ends, new, first);
        if let Some(s) = second {
            link(&mut g, &mut ends, new, s);
        }
    }
    // Top-up with degree-proportional endpoints.
    let mut misses = 0u32;
    while g.edge_count() < m_total {
        let u = ends[rng.random_range(0..ends.len())];
        let v = ends[rng.random_range(0..ends.len())];
        if u != v && !g.has_edge(u, v) {
            link(&mut g, &mut ends, u, v);
            misses = 0;
            continue;
        }
        misses += 1;
        if misses > 10_000 {
            // Nearly complete: draw directly among the remaining non-edges,
            // weighted by the product of endpoint degrees.
            let open: Vec<(u32, u32)> = (0..n as u32)
                .flat_map(|u| (u + 1..n as u32).map(move |v| (u, v)))
                .filter(|&(u, v)| !g.has_edge(u, v))
                .collect();
            let weights: Vec<f64> = open.iter().map(|&(u, v)| (g.degree(u) * g.degree(v)) as f64).collect();
            let total: f64 = weights.iter().sum();
            let mut x = rng.random::<f64>() * total;
            let mut pick = open[open.len() - 1];
            for (e, w) in open.iter().zip(&weights) {
                if x < *w {
                    pick = *e;
                    break;
                }
                x -= w;
            }
            link(&mut g, &mut ends, pick.0, pick.1);
            misses = 0;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn valid(g: &UnderlyingGraph, n: usize, m: usize) {
        assert_eq!(g.node_count(), n);
        assert_eq!(g.edge_count(), m);
        assert!(g.is_connected());
        let set: HashSet<_> = g.edges().iter().copied().collect();
        assert_eq!(set.len(), m);
        assert!(g.edges().iter().all(|&(u, v)| u < v && (v as usize) < n));
    }

    #[test]
    fn pair_ranks_are_dense() {
        let n = 7;
        let index = PairIndex::new(n);
        let ranks: Vec<_> = (0..n as u32)
            .flat_map(|u| (u + 1..n as u32).map(move |v| (u, v)))
            .map(|(u, v)| index.rank(u, v))
            .collect();
        assert_eq!(ranks, (0..max_edges(n)).collect::<Vec<_>>());
    }

    #[test]
    fn er_two_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = er_gnm_connected(2, 1, &mut rng).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn er_experiment_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = er_gnm_connected(400, 800, &mut rng).unwrap();
        valid(&g, 400, 800);
    }

    #[test]
    fn er_infeasible_and_retry_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(
            er_gnm_connected(5, 3, &mut rng),
            Err(GraphError::Infeasible { n: 5, m: 3 })
        );
        assert_eq!(
            er_gnm_connected(5, 11, &mut rng),
            Err(GraphError::Infeasible { n: 5, m: 11 })
        );
        // A spanning tree on 60 nodes is essentially never hit by uniform sampling.
        assert!(matches!(
            er_gnm_connected_with_retries(60, 59, &mut rng, 50),
            Err(GraphError::MaxRetriesExceeded { attempts: 50, .. })
        ));
    }

    #[test]
    fn ba_small_and_experiment_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            valid(&ba_graph(3, 2, &mut rng).unwrap(), 3, 2);
            valid(&ba_graph(3, 3, &mut rng).unwrap(), 3, 3);
        }
        valid(&ba_graph(400, 800, &mut rng).unwrap(), 400, 800);
        valid(&ba_graph(400, 797, &mut rng).unwrap(), 400, 797);
        valid(&ba_graph(400, 399, &mut rng).unwrap(), 400, 399);
        valid(&ba_graph(12, 66, &mut rng).unwrap(), 12, 66);
        assert_eq!(ba_graph(4, 7, &mut rng), Err(GraphError::Infeasible { n: 4, m: 7 }));
        assert_eq!(ba_graph(1, 0, &mut rng), Err(GraphError::Infeasible { n: 1, m: 0 }));
    }

    #[test]
    fn generators_are_deterministic() {
        let a = er_gnm_connected(50, 80, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = er_gnm_connected(50, 80, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        let a = ba_graph(50, 100, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = ba_graph(50, 100, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn file_round_trip() {
        let g = ba_graph(20, 30, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        assert!(buf.starts_with(b"# graph v1\n20 30\n"));
        assert_eq!(UnderlyingGraph::read_from(buf.as_slice()).unwrap(), g);
        assert!(UnderlyingGraph::read_from("# graph v1\n3 2\n0 1\n".as_bytes()).is_err());
        assert!(UnderlyingGraph::read_from("# graph v1\n3 1\n1 1\n".as_bytes()).is_err());
        assert!(UnderlyingGraph::read_from("3 1\n0 1\n".as_bytes()).is_err());
    }
}
