//! Neighbourhoods under minimum passage time and adjacency edit distance.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dp::{self, StateGraph};
use crate::multistrand::{StateSpace, TransitionGraph};

#[derive(Debug, Error, PartialEq)]
pub enum DistanceError {
    #[error("structures have {left} and {right} bases")]
    DimensionMismatch { left: usize, right: usize },
    #[error("state {0} out of range")]
    StateOutOfRange(usize),
    #[error("malformed neighbour table: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Minimum passage time, seconds.
    Mpt,
    /// Adjacency edit distance, counts.
    Ged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: usize,
    pub dist: f64,
}

/// Per-state neighbour lists, ascending by `(dist, id)`. Rows of states
/// that were not queried are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborTable {
    pub metric: Metric,
    pub k: usize,
    pub rows: Vec<Vec<Neighbor>>,
}

/// `w_ij = p_i p_j` for every stored pair, aligned with a [`NeighborTable`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub rows: Vec<Vec<f64>>,
}

impl WeightTable {
    pub fn from_probabilities(table: &NeighborTable, p: &[f64]) -> Self {
        Self {
            rows: table
                .rows
                .iter()
                .enumerate()
                .map(|(i, row)| row.iter().map(|nb| p[i] * p[nb.id]).collect())
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|w| w * c).collect())
                .collect(),
        }
    }
}

fn by_dist_then_id(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.dist.total_cmp(&b.dist).then(a.id.cmp(&b.id))
}

const MAGIC: &[u8; 4] = b"NBRT";
const VERSION: u32 = 1;

impl NeighborTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |nb| (i, nb.id, nb.dist)))
    }

    pub fn pair_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Replaces each stored distance by the smaller of the two directions
    /// where both are known, adds reverse entries, then keeps the `k`
    /// closest per row.
    pub fn symmetrized(&self) -> Self {
        let mut known: HashMap<(usize, usize), f64> = HashMap::new();
        for (i, j, d) in self.pairs() {
            let key = (i.min(j), i.max(j));
            let e = known.entry(key).or_insert(d);
            *e = e.min(d);
        }
        let mut rows = vec![Vec::new(); self.rows.len()];
        for (&(a, b), &d) in &known {
            rows[a].push(Neighbor { id: b, dist: d });
            rows[b].push(Neighbor { id: a, dist: d });
        }
        for row in &mut rows {
            row.sort_by(by_dist_then_id);
            row.truncate(self.k);
        }
        Self {
            metric: self.metric,
            k: self.k,
            rows,
        }
    }

    /// Rescales distances to `[0, 1]` by the table's min and max.
    pub fn min_max_scaled(&self) -> Self {
        let (lo, hi) = self
            .pairs()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, _, d)| {
                (lo.min(d), hi.max(d))
            });
        let span = hi - lo;
        let rows = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|nb| Neighbor {
                        id: nb.id,
                        dist: if span > 0.0 { (nb.dist - lo) / span } else { 0.0 },
                    })
                    .collect()
            })
            .collect();
        Self {
            metric: self.metric,
            k: self.k,
            rows,
        }
    }

    /// `NBRT`, version, metric byte, k, row count, then per row a length
    /// followed by `(id: u32, dist: f64)` pairs. Little endian throughout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(17 + self.pair_count() * 12 + self.rows.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(match self.metric {
            Metric::Mpt => 0,
            Metric::Ged => 1,
        });
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        out.extend_from_slice(&(self.rows.len() as u32).to_le_bytes());
        for row in &self.rows {
            out.extend_from_slice(&(row.len() as u32).to_le_bytes());
            for nb in row {
                out.extend_from_slice(&(nb.id as u32).to_le_bytes());
                out.extend_from_slice(&nb.dist.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DistanceError> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != MAGIC {
            return Err(DistanceError::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(DistanceError::Format(format!("unsupported version {version}")));
        }
        let metric = match r.take(1)?[0] {
            0 => Metric::Mpt,
            1 => Metric::Ged,
            m => return Err(DistanceError::Format(format!("unknown metric tag {m}"))),
        };
        let k = r.u32()? as usize;
        let n = r.u32()? as usize;
        let mut rows = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let len = r.u32()? as usize;
            let mut row = Vec::with_capacity(len.min(1 << 16));
            for _ in 0..len {
                let id = r.u32()? as usize;
                let dist = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
                row.push(Neighbor { id, dist });
            }
            rows.push(row);
        }
        if r.at != bytes.len() {
            return Err(DistanceError::Format("trailing bytes".into()));
        }
        Ok(Self { metric, k, rows })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DistanceError> {
        let end = self.at + n;
        if end > self.bytes.len() {
            return Err(DistanceError::Format("truncated".into()));
        }
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, DistanceError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Observed transitions weighted by the mean holding time of their source.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    pub out: Vec<Vec<(usize, f64)>>,
}

impl WeightedDigraph {
    pub fn node_count(&self) -> usize {
        self.out.len()
    }
}

pub fn mpt_graph(tg: &TransitionGraph, ss: &StateSpace) -> WeightedDigraph {
    let hold = ss.mean_holding_time();
    WeightedDigraph {
        out: (0..tg.node_count())
            .map(|i| {
                tg.successors(i)
                    .iter()
                    .map(|&(j, _)| (j, hold[i]))
                    .collect()
            })
            .collect(),
    }
}

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    id: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (dist, id)
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path distances from `source`, stopping once the `k` closest
/// other nodes are certain. Unreachable nodes are omitted.
pub fn dijkstra_k(graph: &WeightedDigraph, source: usize, k: usize) -> Vec<Neighbor> {
    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut settled: Vec<Neighbor> = Vec::new();
    dist[source] = 0.0;
    heap.push(Entry {
        dist: 0.0,
        id: source,
    });
    while let Some(Entry { dist: d, id }) = heap.pop() {
        if done[id] {
            continue;
        }
        // all remaining candidates are strictly farther than the k-th
        if settled.len() >= k && settled.last().is_some_and(|l| d > l.dist) {
            break;
        }
        done[id] = true;
        if id != source {
            settled.push(Neighbor { id, dist: d });
        }
        for &(j, w) in &graph.out[id] {
            let nd = d + w;
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(Entry { dist: nd, id: j });
            }
        }
    }
    settled.sort_by(by_dist_then_id);
    settled.truncate(k);
    settled
}

/// `k` nearest states by minimum passage time for each of `sources`.
pub fn mpt_knn(graph: &WeightedDigraph, sources: &[usize], k: usize) -> NeighborTable {
    let found: Vec<(usize, Vec<Neighbor>)> = sources
        .par_iter()
        .map(|&s| (s, dijkstra_k(graph, s, k)))
        .collect();
    let mut rows = vec![Vec::new(); graph.node_count()];
    for (s, row) in found {
        rows[s] = row;
    }
    NeighborTable {
        metric: Metric::Mpt,
        k,
        rows,
    }
}

/// Annoy-style forest parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub leaf_size: usize,
    /// Candidates gathered per query before exact re-ranking; `None` means
    /// `trees * max(k, leaf_size)`, at least one leaf per tree.
    pub search_k: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 16,
            leaf_size: 32,
            search_k: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Exact,
    RandomProjection(ForestConfig),
}

impl SearchMode {
    /// Exact below 5000 states, otherwise the default forest.
    pub fn auto(n: usize, seed: u64) -> Self {
        if n < 5000 {
            SearchMode::Exact
        } else {
            SearchMode::RandomProjection(ForestConfig {
                seed,
                ..ForestConfig::default()
            })
        }
    }
}

/// `k` nearest structures under L1 distance of flattened adjacency matrices.
pub fn ged_knn(
    graphs: &[StateGraph],
    k: usize,
    mode: SearchMode,
) -> Result<NeighborTable, DistanceError> {
    if let Some(first) = graphs.first() {
        for g in graphs {
            if g.node_count() != first.node_count() {
                return Err(DistanceError::DimensionMismatch {
                    left: first.node_count(),
                    right: g.node_count(),
                });
            }
        }
    }
    let points: Vec<Vec<u32>> = graphs.iter().map(StateGraph::flat_support).collect();
    let rows = match mode {
        SearchMode::Exact => (0..points.len())
            .into_par_iter()
            .map(|i| {
                let mut row: Vec<Neighbor> = (0..points.len())
                    .filter(|&j| j != i)
                    .map(|j| Neighbor {
                        id: j,
                        dist: sparse_l1(&points[i], &points[j]) as f64,
                    })
                    .collect();
                select_k(&mut row, k);
                row
            })
            .collect(),
        SearchMode::RandomProjection(cfg) => {
            let forest = Forest::build(&points, cfg);
            let search_k = cfg
                .search_k
                .unwrap_or(cfg.trees * k.max(cfg.leaf_size).max(1));
            (0..points.len())
                .into_par_iter()
                .map(|i| {
                    let mut row: Vec<Neighbor> = forest
                        .candidates(&points, &points[i], search_k)
                        .into_iter()
                        .filter(|&j| j != i)
                        .map(|j| Neighbor {
                            id: j,
                            dist: sparse_l1(&points[i], &points[j]) as f64,
                        })
                        .collect();
                    select_k(&mut row, k);
                    row
                })
                .collect()
        }
    };
    Ok(NeighborTable {
        metric: Metric::Ged,
        k,
        rows,
    })
}

/// Exact adjacency edit distances between pairs of graphs.
pub fn ged_pair(a: &StateGraph, b: &StateGraph) -> Result<f64, DistanceError> {
    dp::ged(a, b)
        .map(|d| d as f64)
        .map_err(|_| DistanceError::DimensionMismatch {
            left: a.node_count(),
            right: b.node_count(),
        })
}

fn select_k(row: &mut Vec<Neighbor>, k: usize) {
    if row.len() > k && k > 0 {
        row.select_nth_unstable_by(k - 1, by_dist_then_id);
    }
    row.truncate(k);
    row.sort_by(by_dist_then_id);
}

/// L1 distance between two 0/1 vectors given by their sorted supports.
fn sparse_l1(a: &[u32], b: &[u32]) -> u64 {
    (a.len() + b.len() - 2 * intersection(a, b)) as u64
}

fn intersection(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

enum Node {
    Leaf(Vec<usize>),
    // hyperplane through the midpoint of two points: x·(a−b) vs (|a|²−|b|²)/2
    Split {
        a: usize,
        b: usize,
        offset: f64,
        left: usize,
        right: usize,
    },
}

struct Forest {
    nodes: Vec<Node>,
    roots: Vec<usize>,
}

impl Forest {
    fn build(points: &[Vec<u32>], cfg: ForestConfig) -> Self {
        let all: Vec<usize> = (0..points.len()).collect();
        let trees: Vec<Vec<Node>> = (0..cfg.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(t as u64));
                let mut arena = Vec::new();
                build_node(points, all.clone(), cfg.leaf_size.max(1), &mut rng, 0, &mut arena);
                arena
            })
            .collect();
        let mut nodes = Vec::new();
        let mut roots = Vec::with_capacity(trees.len());
        for tree in trees {
            let base = nodes.len();
            // each tree's root is the last node pushed
            roots.push(base + tree.len() - 1);
            nodes.extend(tree.into_iter().map(|n| match n {
                Node::Split {
                    a,
                    b,
                    offset,
                    left,
                    right,
                } => Node::Split {
                    a,
                    b,
                    offset,
                    left: left + base,
                    right: right + base,
                },
                leaf => leaf,
            }));
        }
        Self { nodes, roots }
    }

    /// Best-first traversal over all trees until `search_k` candidates are
    /// gathered.
    fn candidates(&self, points: &[Vec<u32>], q: &[u32], search_k: usize) -> Vec<usize> {
        let mut heap: BinaryHeap<(OrdF64, Reverse<usize>)> = self
            .roots
            .iter()
            .map(|&r| (OrdF64(f64::INFINITY), Reverse(r)))
            .collect();
        let mut seen = vec![false; points.len()];
        let mut out = Vec::new();
        while let Some((OrdF64(priority), Reverse(node))) = heap.pop() {
            if out.len() >= search_k {
                break;
            }
            match &self.nodes[node] {
                Node::Leaf(ids) => {
                    for &id in ids {
                        if !seen[id] {
                            seen[id] = true;
                            out.push(id);
                        }
                    }
                }
                &Node::Split {
                    a,
                    b,
                    offset,
                    left,
                    right,
                } => {
                    let m = margin(points, q, a, b, offset);
                    let (near, far) = if m >= 0.0 { (left, right) } else { (right, left) };
                    heap.push((OrdF64(priority.min(m.abs())), Reverse(near)));
                    heap.push((OrdF64(priority.min(-m.abs())), Reverse(far)));
                }
            }
        }
        out
    }
}

#[derive(PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn margin(points: &[Vec<u32>], x: &[u32], a: usize, b: usize, offset: f64) -> f64 {
    intersection(x, &points[a]) as f64 - intersection(x, &points[b]) as f64 - offset
}

/// Builds a subtree into `arena` and returns its index; children precede
/// their parent.
fn build_node(
    points: &[Vec<u32>],
    ids: Vec<usize>,
    leaf_size: usize,
    rng: &mut ChaCha8Rng,
    depth: usize,
    arena: &mut Vec<Node>,
) -> usize {
    if ids.len() <= leaf_size || depth > 64 {
        arena.push(Node::Leaf(ids));
        return arena.len() - 1;
    }
    let mut split = None;
    for _ in 0..8 {
        let a = ids[rng.random_range(0..ids.len())];
        let b = ids[rng.random_range(0..ids.len())];
        if points[a] == points[b] {
            continue;
        }
        let offset = (points[a].len() as f64 - points[b].len() as f64) / 2.0;
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for &i in &ids {
            let m = margin(points, &points[i], a, b, offset);
            let go_left = if m == 0.0 { rng.random::<bool>() } else { m > 0.0 };
            if go_left {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        if !left.is_empty() && !right.is_empty() {
            split = Some((a, b, offset, left, right));
            break;
        }
    }
    // duplicates or no separating pair found: halve arbitrarily
    let (a, b, offset, left, right) = split.unwrap_or_else(|| {
        let mut left = ids;
        let right = left.split_off(left.len() / 2);
        (0, 0, 0.0, left, right)
    });
    let left = build_node(points, left, leaf_size, rng, depth + 1, arena);
    let right = build_node(points, right, leaf_size, rng, depth + 1, arena);
    arena.push(Node::Split {
        a,
        b,
        offset,
        left,
        right,
    });
    arena.len() - 1
}
