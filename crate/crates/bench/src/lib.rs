//! Deterministic workloads shared by the benchmarks.

use dnascape::ctmc::RateMatrix;
use dnascape::dp::{parse_dp, to_graph, SecondaryStructure, StateGraph};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dp_string(table: &[Option<usize>], lengths: &[usize]) -> String {
    let mut dp = String::with_capacity(table.len() + lengths.len());
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
}

/// Trajectories of single base-pair moves, `steps` records each.
pub fn walk(lengths: &[usize], trajectories: usize, steps: usize, seed: u64) -> Vec<Vec<String>> {
    let n: usize = lengths.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trajectories)
        .map(|_| {
            let mut table: Vec<Option<usize>> = vec![None; n];
            (0..steps)
                .map(|_| {
                    let i = rng.random_range(0..n);
                    match table[i] {
                        Some(j) => {
                            table[i] = None;
                            table[j] = None;
                        }
                        None => {
                            let j = rng.random_range(0..n);
                            let (a, b) = (i.min(j), i.max(j));
                            if b > a + 3
                                && table[a].is_none()
                                && table[b].is_none()
                                && (a + 1..b).all(|m| table[m].is_none_or(|p| p > a && p < b))
                            {
                                table[a] = Some(b);
                                table[b] = Some(a);
                            }
                        }
                    }
                    dp_string(&table, lengths)
                })
                .collect()
        })
        .collect()
}

/// A simulator log over two 20-base strands.
pub fn log_text(trajectories: usize, steps: usize, seed: u64) -> String {
    let mut out = String::from("GCGCATATGCGCATATGCGC+GCGCATATGCGCATATGCGC\n");
    for (k, traj) in walk(&[20, 20], trajectories, steps, seed).iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for (s, dp) in traj.iter().enumerate() {
            let pairs = dp.matches('(').count();
            out.push_str(&format!("[{k}] {dp} | {:.7} | {:.3}\n", s as f64 * 0.01, -0.8 * pairs as f64));
        }
    }
    out
}

/// Distinct structures from [`walk`].
pub fn structures(lengths: &[usize], count: usize, seed: u64) -> Vec<SecondaryStructure> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(count);
    let mut round = 0;
    while out.len() < count {
        for dp in walk(lengths, 1, 200, seed.wrapping_add(round)).remove(0) {
            if out.len() < count && seen.insert(dp.clone()) {
                out.push(parse_dp(&dp, lengths).expect("walk keeps structures nested"));
            }
        }
        round += 1;
    }
    out
}

pub fn graphs(lengths: &[usize], count: usize, seed: u64) -> Vec<StateGraph> {
    structures(lengths, count, seed).iter().map(to_graph).collect()
}

/// Birth-death chain with Metropolis rates over a rugged energy profile.
pub fn rugged_chain(n: usize, seed: u64) -> RateMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let energy: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut rates = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        let de = energy[i + 1] - energy[i];
        rates[(i, i + 1)] = (-de).exp().min(1.0);
        rates[(i + 1, i)] = de.exp().min(1.0);
    }
    RateMatrix::from_rates(rates).expect("rates are finite and non-negative")
}

/// Gaussian blobs in the plane.
pub fn blobs(points: usize, centers: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<(f64, f64)> = (0..centers)
        .map(|_| (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)))
        .collect();
    (0..points)
        .map(|i| {
            let (x, y) = c[i % centers];
            vec![x + rng.random_range(-3.0..3.0), y + rng.random_range(-3.0..3.0)]
        })
        .collect()
}
