//! Dot-parenthesis secondary structures over one or more strands.
//!
//! A structure such as `...(((...+...)))...` lists one character per base,
//! with `+` separating consecutive strands. Matching parentheses are base
//! pairs. Only a single bracket family is accepted, so every representable
//! structure is pseudoknot-free.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DpError {
    #[error("empty dot-parenthesis string")]
    Empty,
    #[error("illegal character {ch:?} at position {pos}")]
    IllegalCharacter { ch: char, pos: usize },
    #[error("expected {expected} strand separators, found {found}")]
    SeparatorCount { expected: usize, found: usize },
    #[error("structure length {found} does not match strand lengths (expected {expected})")]
    LengthMismatch { expected: usize, found: usize },
    #[error("unbalanced parentheses at base {pos}")]
    UnbalancedParentheses { pos: usize },
    #[error("graphs have {left} and {right} nodes")]
    DimensionMismatch { left: usize, right: usize },
    #[error("invalid strand: {0}")]
    InvalidStrand(String),
}

/// One named strand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strand {
    pub id: String,
    pub sequence: String,
}

/// The ordered strands taking part in a reaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrandSet {
    strands: Vec<Strand>,
}

impl StrandSet {
    pub fn new(strands: Vec<Strand>) -> Result<Self, DpError> {
        if strands.is_empty() {
            return Err(DpError::InvalidStrand("no strands".into()));
        }
        for s in &strands {
            if s.sequence.is_empty() {
                return Err(DpError::InvalidStrand(format!("strand {} is empty", s.id)));
            }
            if let Some(c) = s.sequence.chars().find(|c| !matches!(c, 'A' | 'C' | 'G' | 'T')) {
                return Err(DpError::InvalidStrand(format!(
                    "strand {} contains {c:?}",
                    s.id
                )));
            }
        }
        Ok(Self { strands })
    }

    /// Parses a header such as `ACGT+TTGA`; strands are named by position.
    pub fn from_header(header: &str) -> Result<Self, DpError> {
        let strands = header
            .trim()
            .split('+')
            .enumerate()
            .map(|(i, seq)| Strand {
                id: i.to_string(),
                sequence: seq.trim().to_string(),
            })
            .collect();
        Self::new(strands)
    }

    pub fn strands(&self) -> &[Strand] {
        &self.strands
    }

    pub fn len(&self) -> usize {
        self.strands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strands.is_empty()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.strands.iter().map(|s| s.sequence.len()).collect()
    }

    /// Number of bases over all strands.
    pub fn total_length(&self) -> usize {
        self.strands.iter().map(|s| s.sequence.len()).sum()
    }

    /// Resolves a strand by id, falling back to a positional index.
    pub fn position(&self, name: &str) -> Option<usize> {
        self.strands
            .iter()
            .position(|s| s.id == name)
            .or_else(|| name.parse::<usize>().ok().filter(|&i| i < self.strands.len()))
    }

    /// The header line written in simulator logs.
    pub fn header(&self) -> String {
        self.strands
            .iter()
            .map(|s| s.sequence.as_str())
            .collect::<Vec<_>>()
            .join("+")
    }
}

/// A validated multi-strand secondary structure.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SecondaryStructure {
    dp: String,
    pair_table: Vec<Option<usize>>,
    strand_offsets: Vec<usize>,
}

/// Parses `dp` against the given strand lengths.
pub fn parse_dp(dp: &str, strand_lengths: &[usize]) -> Result<SecondaryStructure, DpError> {
    if dp.is_empty() {
        return Err(DpError::Empty);
    }
    if let Some((pos, ch)) = dp
        .chars()
        .enumerate()
        .find(|(_, c)| !matches!(c, '.' | '(' | ')' | '+'))
    {
        return Err(DpError::IllegalCharacter { ch, pos });
    }
    let separators = dp.bytes().filter(|&b| b == b'+').count();
    let expected_separators = strand_lengths.len().saturating_sub(1);
    if separators != expected_separators {
        return Err(DpError::SeparatorCount {
            expected: expected_separators,
            found: separators,
        });
    }
    let total: usize = strand_lengths.iter().sum();
    let found = dp.len() - separators;
    if found != total {
        return Err(DpError::LengthMismatch {
            expected: total,
            found,
        });
    }
    for (segment, &len) in dp.split('+').zip(strand_lengths) {
        if segment.len() != len {
            return Err(DpError::LengthMismatch {
                expected: len,
                found: segment.len(),
            });
        }
    }

    let mut strand_offsets = Vec::with_capacity(strand_lengths.len());
    let mut acc = 0;
    for &len in strand_lengths {
        strand_offsets.push(acc);
        acc += len;
    }

    let mut pair_table = vec![None; total];
    let mut stack = Vec::new();
    let mut base = 0;
    for b in dp.bytes() {
        match b {
            b'(' => {
                stack.push(base);
                base += 1;
            }
            b')' => {
                let open = stack
                    .pop()
                    .ok_or(DpError::UnbalancedParentheses { pos: base })?;
                pair_table[open] = Some(base);
                pair_table[base] = Some(open);
                base += 1;
            }
            b'.' => base += 1,
            _ => {}
        }
    }
    if let Some(&pos) = stack.last() {
        return Err(DpError::UnbalancedParentheses { pos });
    }

    Ok(SecondaryStructure {
        dp: dp.to_string(),
        pair_table,
        strand_offsets,
    })
}

impl SecondaryStructure {
    /// Parses a structure taking strand lengths from its `+`-separated segments.
    pub fn from_dp(dp: &str) -> Result<Self, DpError> {
        let lengths: Vec<usize> = dp.split('+').map(str::len).collect();
        if lengths.iter().any(|&l| l == 0) {
            return Err(DpError::InvalidStrand("empty strand segment".into()));
        }
        parse_dp(dp, &lengths)
    }

    pub fn dp(&self) -> &str {
        &self.dp
    }

    /// Partner of every base, or `None` when unpaired.
    pub fn pair_table(&self) -> &[Option<usize>] {
        &self.pair_table
    }

    pub fn strand_offsets(&self) -> &[usize] {
        &self.strand_offsets
    }

    /// Total number of bases.
    pub fn len(&self) -> usize {
        self.pair_table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pair_table.is_empty()
    }

    pub fn strand_count(&self) -> usize {
        self.strand_offsets.len()
    }

    pub fn strand_lengths(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.strand_offsets.len());
        for (k, &start) in self.strand_offsets.iter().enumerate() {
            let end = self
                .strand_offsets
                .get(k + 1)
                .copied()
                .unwrap_or(self.pair_table.len());
            out.push(end - start);
        }
        out
    }

    /// Index of the strand holding base `i`.
    pub fn strand_of(&self, i: usize) -> usize {
        self.strand_offsets.partition_point(|&o| o <= i) - 1
    }

    /// Base pairs `(i, j)` with `i < j`, in order of `i`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pair_table
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.filter(|&j| j > i).map(|j| (i, j)))
    }

    pub fn is_fully_paired(&self) -> bool {
        self.pair_table.iter().all(Option::is_some)
    }

    /// Rebuilds the dot-parenthesis string from the pair table.
    pub fn to_dp_string(&self) -> String {
        let mut out = String::with_capacity(self.pair_table.len() + self.strand_offsets.len());
        for (i, p) in self.pair_table.iter().enumerate() {
            if i > 0 && self.strand_offsets.binary_search(&i).is_ok() {
                out.push('+');
            }
            out.push(match p {
                None => '.',
                Some(j) if *j > i => '(',
                Some(_) => ')',
            });
        }
        out
    }

    pub fn to_graph(&self) -> StateGraph {
        to_graph(self)
    }
}

impl fmt::Display for SecondaryStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Backbone,
    BasePair,
}

/// Base-level graph of a structure: backbone chain per strand plus one edge
/// per base pair. Node `i` is base `i` in sequence order. A pair between
/// backbone neighbours coincides with the backbone edge and is stored once,
/// as backbone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateGraph {
    n: usize,
    // (i, j, kind) with i < j, sorted by (i, j)
    edges: Vec<(usize, usize, EdgeKind)>,
}

pub fn to_graph(s: &SecondaryStructure) -> StateGraph {
    let n = s.len();
    let mut edges = Vec::with_capacity(n + n / 2);
    let lengths = s.strand_lengths();
    for (&start, &len) in s.strand_offsets().iter().zip(&lengths) {
        for i in start..start + len.saturating_sub(1) {
            edges.push((i, i + 1, EdgeKind::Backbone));
        }
    }
    edges.extend(s.pairs().map(|(i, j)| (i, j, EdgeKind::BasePair)));
    edges.sort_by_key(|&(i, j, _)| (i, j));
    edges.dedup_by_key(|e| (e.0, e.1));
    StateGraph { n, edges }
}

impl StateGraph {
    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Undirected edges `(i, j, kind)` with `i < j`.
    pub fn edges(&self) -> &[(usize, usize, EdgeKind)] {
        &self.edges
    }

    pub fn edge_kind(&self, a: usize, b: usize) -> Option<EdgeKind> {
        let key = (a.min(b), a.max(b));
        self.edges
            .binary_search_by_key(&key, |&(i, j, _)| (i, j))
            .ok()
            .map(|k| self.edges[k].2)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(i, j, _) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    /// Dense symmetric 0/1 adjacency matrix.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(i, j, _) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    /// Positions of the ones in the row-major flattened adjacency matrix,
    /// sorted ascending.
    pub fn flat_support(&self) -> Vec<u32> {
        let n = self.n as u32;
        let mut out: Vec<u32> = self
            .edges
            .iter()
            .flat_map(|&(i, j, _)| {
                let (i, j) = (i as u32, j as u32);
                [i * n + j, j * n + i]
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut uf = UnionFind::new(self.n);
        for &(i, j, _) in &self.edges {
            uf.union(i, j);
        }
        let root = uf.find(0);
        (1..self.n).all(|i| uf.find(i) == root)
    }
}

/// L1 distance between the flattened adjacency matrices of two graphs over
/// the same bases. Always even.
pub fn ged(a: &StateGraph, b: &StateGraph) -> Result<u64, DpError> {
    if a.n != b.n {
        return Err(DpError::DimensionMismatch {
            left: a.n,
            right: b.n,
        });
    }
    let (mut x, mut y) = (a.edges.iter().peekable(), b.edges.iter().peekable());
    let mut diff = 0u64;
    loop {
        match (x.peek(), y.peek()) {
            (Some(&&(i, j, _)), Some(&&(k, l, _))) => match (i, j).cmp(&(k, l)) {
                std::cmp::Ordering::Equal => {
                    x.next();
                    y.next();
                }
                std::cmp::Ordering::Less => {
                    diff += 1;
                    x.next();
                }
                std::cmp::Ordering::Greater => {
                    diff += 1;
                    y.next();
                }
            },
            (Some(_), None) => {
                diff += 1;
                x.next();
            }
            (None, Some(_)) => {
                diff += 1;
                y.next();
            }
            (None, None) => break,
        }
    }
    Ok(2 * diff)
}

/// Groups strands into complexes: connected components of the strand graph
/// whose edges are inter-strand base pairs. Components are listed by their
/// smallest strand index; members ascend.
pub fn strand_complexes(s: &SecondaryStructure) -> Vec<Vec<usize>> {
    let k = s.strand_count();
    let mut uf = UnionFind::new(k);
    for (i, j) in s.pairs() {
        uf.union(s.strand_of(i), s.strand_of(j));
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; k];
    for strand in 0..k {
        let r = uf.find(strand);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(strand);
    }
    groups
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}
