#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const UPDATE_VAR: &str = "DNASCAPE_UPDATE_FIXTURES";

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn updating() -> bool {
    std::env::var_os(UPDATE_VAR).is_some()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Brute-force DBSCAN: all-pairs core test, union-find over core pairs,
/// components numbered by their lowest member, borders to the lowest
/// adjacent cluster.
pub fn reference_dbscan(points: &[Vec<f64>], eps: f64, min_samples: usize) -> Vec<i64> {
    let n = points.len();
    let adj = |i: usize, j: usize| dist(&points[i], &points[j]) <= eps;
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| adj(i, j)).count() >= min_samples)
        .collect();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if core[i] && core[j] && adj(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut labels = vec![-1i64; n];
    let mut root_label = std::collections::HashMap::new();
    for i in 0..n {
        if core[i] {
            let r = find(&mut parent, i);
            let next = root_label.len() as i64;
            labels[i] = *root_label.entry(r).or_insert(next);
        }
    }
    for i in 0..n {
        if !core[i] {
            labels[i] = (0..n)
                .filter(|&j| core[j] && adj(i, j))
                .map(|j| labels[j])
                .min()
                .unwrap_or(-1);
        }
    }
    labels
}

use dnascape::ctmc::{EnergyModel, RateMatrix};
use dnascape::dp::{parse_dp, SecondaryStructure};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Nested structure over the given strand lengths, driven by random bytes.
pub fn structure_from_noise(lengths: &[usize], noise: &[u8]) -> SecondaryStructure {
    let n: usize = lengths.iter().sum();
    let mut table = vec![None; n];
    let mut stack: Vec<usize> = Vec::new();
    for (i, r) in noise.iter().take(n).enumerate() {
        match r % 3 {
            0 => stack.push(i),
            1 => {
                if let Some(j) = stack.pop() {
                    table[j] = Some(i);
                    table[i] = Some(j);
                }
            }
            _ => {}
        }
    }
    let mut dp = String::new();
    let mut acc = 0;
    for (k, &len) in lengths.iter().enumerate() {
        if k > 0 {
            dp.push('+');
        }
        for i in acc..acc + len {
            dp.push(match table[i] {
                None => '.',
                Some(j) if j > i => '(',
                Some(_) => ')',
            });
        }
        acc += len;
    }
    parse_dp(&dp, lengths).unwrap()
}

pub fn arb_structure(lengths: Vec<usize>) -> impl Strategy<Value = SecondaryStructure> {
    let n: usize = lengths.iter().sum();
    proptest::collection::vec(any::<u8>(), n).prop_map(move |noise| structure_from_noise(&lengths, &noise))
}

/// Strand lengths of at least two bases, so no node is isolated.
pub fn arb_lengths() -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(2usize..9, 1..3)
}

/// Metropolis rates between random neighbours of a connected ring plus
/// chords, with energies in `[-3, 3]`.
pub fn metropolis(n: usize, seed: u64, beta: f64) -> (RateMatrix, EnergyModel) {
    let mut r = rng(seed);
    let energies: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
    let mut rates = DMatrix::zeros(n, n);
    let link = |i: usize, j: usize, rates: &mut DMatrix<f64>| {
        let de = energies[j] - energies[i];
        rates[(i, j)] = (-beta * de).exp().min(1.0) * 1e6;
        rates[(j, i)] = (beta * de).exp().min(1.0) * 1e6;
    };
    for i in 0..n {
        link(i, (i + 1) % n, &mut rates);
    }
    for _ in 0..n / 2 {
        let (i, j) = (r.random_range(0..n), r.random_range(0..n));
        if i != j {
            link(i, j, &mut rates);
        }
    }
    (
        RateMatrix::from_rates(rates).unwrap(),
        EnergyModel::new(energies, beta).unwrap(),
    )
}

/// Structures visited by a walk of single base-pair additions and
/// removals, the way elementary-step trajectories move. Duplicates are
/// dropped; the walk restarts from a random structure every `restart`
/// steps.
pub fn walk_structures(lengths: &[usize], count: usize, restart: usize, seed: u64) -> Vec<SecondaryStructure> {
    let n: usize = lengths.iter().sum();
    let mut r = rng(seed);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    let mut table: Vec<Option<usize>> = vec![None; n];
    let mut steps = 0usize;
    let dp_of = |table: &[Option<usize>]| {
        let mut dp = String::new();
        let mut acc = 0;
        for (k, &len) in lengths.iter().enumerate() {
            if k > 0 {
                dp.push('+');
            }
            for i in acc..acc + len {
                dp.push(match table[i] {
                    None => '.',
                    Some(j) if j > i => '(',
                    Some(_) => ')',
                });
            }
            acc += len;
        }
        dp
    };
    while out.len() < count {
        if steps % restart == 0 {
            let noise: Vec<u8> = (0..n).map(|_| r.random()).collect();
            let s = structure_from_noise(lengths, &noise);
            table = s.pair_table().to_vec();
        }
        steps += 1;
        let i = r.random_range(0..n);
        match table[i] {
            Some(j) => {
                table[i] = None;
                table[j] = None;
            }
            None => {
                let j = r.random_range(0..n);
                let (a, b) = (i.min(j), i.max(j));
                // pair only if unpaired and nesting is preserved
                if b > a + 1 && table[a].is_none() && table[b].is_none() && (a + 1..b).all(|m| table[m].map_or(true, |p| p > a && p < b)) {
                    table[a] = Some(b);
                    table[b] = Some(a);
                }
            }
        }
        let dp = dp_of(&table);
        if seen.insert(dp.clone()) {
            out.push(parse_dp(&dp, lengths).unwrap());
        }
    }
    out
}

use dnascape::distances::WeightedDigraph;

/// Shortest-path lengths from `s` by full edge relaxation.
pub fn bellman_ford(g: &WeightedDigraph, s: usize) -> Vec<f64> {
    let n = g.node_count();
    let mut d = vec![f64::INFINITY; n];
    d[s] = 0.0;
    for _ in 0..n {
        let mut changed = false;
        for u in 0..n {
            for &(v, w) in &g.out[u] {
                if d[u] + w < d[v] {
                    d[v] = d[u] + w;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    d
}

/// Sparse digraph with holding-time-like weights; a node's out-edges all
/// share its weight, as in the passage-time graph.
pub fn random_digraph(n: usize, seed: u64) -> WeightedDigraph {
    let mut r = rng(seed);
    WeightedDigraph {
        out: (0..n)
            .map(|i| {
                let w = r.random_range(1e-9..1e-6);
                let deg = r.random_range(0..4);
                (0..deg)
                    .map(|_| r.random_range(0..n))
                    .filter(|&j| j != i)
                    .map(|j| (j, w))
                    .collect()
            })
            .collect(),
    }
}
