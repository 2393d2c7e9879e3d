//! PHATE: potential of heat-diffusion for affinity-based transition embedding.
//!
//! Stages: α-decay affinities with adaptive bandwidth, a row-stochastic
//! diffusion operator, a diffusion time picked at the knee of the von
//! Neumann entropy curve, log-potential distances, and SMACOF.
//! Above `n_landmarks` points the operator is compressed onto k-means
//! landmarks and the landmark layout is interpolated back.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mds::{smacof, MdsInit, SmacofOptions};
use super::{matrix_digest, digest, EmbedError, Embedding, Provenance};
use crate::linalg;

/// Floor added before taking logs of diffusion probabilities.
pub const POTENTIAL_FLOOR: f64 = 1e-7;
/// Affinities below this are dropped in the landmark (sparse) path.
const SPARSE_THRESHOLD: f64 = 1e-4;
const PROJECTION_DIM: usize = 100;
const KMEANS_ITERS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionTime {
    /// Knee of the entropy curve over `1..=max`.
    Auto { max: u64 },
    Fixed(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhateConfig {
    pub n_neighbors: usize,
    pub decay: f64,
    pub n_landmarks: usize,
    pub t: DiffusionTime,
    pub out_dim: usize,
    pub mds_max_iter: usize,
    pub mds_tol: f64,
    pub seed: u64,
}

impl Default for PhateConfig {
    fn default() -> Self {
        Self {
            n_neighbors: 5,
            decay: 40.0,
            n_landmarks: 2000,
            t: DiffusionTime::Auto { max: 100 },
            out_dim: 2,
            mds_max_iter: 300,
            mds_tol: 1e-6,
            seed: 0,
        }
    }
}

impl PhateConfig {
    fn validate(&self, n: usize) -> Result<(), EmbedError> {
        if self.n_neighbors == 0 {
            return Err(EmbedError::InvalidInput("n_neighbors must be at least 1".into()));
        }
        if !(self.decay > 0.0) {
            return Err(EmbedError::InvalidInput("decay must be positive".into()));
        }
        if self.out_dim == 0 || n < self.out_dim + 1 {
            return Err(EmbedError::InvalidInput(format!(
                "{n} points cannot be embedded in {} dimensions",
                self.out_dim
            )));
        }
        if self.n_landmarks < self.out_dim + 1 {
            return Err(EmbedError::InvalidInput("too few landmarks".into()));
        }
        match self.t {
            DiffusionTime::Auto { max } if max == 0 => {
                Err(EmbedError::InvalidInput("t_max must be at least 1".into()))
            }
            DiffusionTime::Fixed(0) => Err(EmbedError::InvalidInput("t must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum PhateInput<'a> {
    /// One row per point.
    Features(&'a DMatrix<f64>),
    /// Symmetric pairwise distances.
    Distances(&'a DMatrix<f64>),
}

impl PhateInput<'_> {
    fn len(&self) -> usize {
        match self {
            PhateInput::Features(x) => x.nrows(),
            PhateInput::Distances(d) => d.nrows(),
        }
    }

    fn row(&self, i: usize) -> Vec<f64> {
        match self {
            PhateInput::Distances(d) => d.row(i).iter().copied().collect(),
            PhateInput::Features(x) => (0..x.nrows())
                .map(|j| {
                    let mut s = 0.0;
                    for c in 0..x.ncols() {
                        let t = x[(i, c)] - x[(j, c)];
                        s += t * t;
                    }
                    s.sqrt()
                })
                .collect(),
        }
    }

    fn digest(&self) -> String {
        match self {
            PhateInput::Features(x) => matrix_digest(x),
            PhateInput::Distances(d) => matrix_digest(d),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhateResult {
    pub embedding: Embedding,
    /// Diffusion time actually used.
    pub t: u64,
    /// Entropy curve `H(1..=t_max)` when `t` was chosen automatically.
    pub entropy: Vec<f64>,
    pub mds_iterations: usize,
    pub final_stress: f64,
    /// False when SMACOF hit its iteration cap.
    pub converged: bool,
    pub landmarks: Option<usize>,
}

fn alpha_decay(d: f64, sigma: f64, alpha: f64) -> f64 {
    if sigma > 0.0 {
        (-(d / sigma).powf(alpha)).exp()
    } else if d == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn kth_neighbor_distance(row: &[f64], self_index: usize, k: usize) -> f64 {
    let mut others: Vec<f64> = row
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != self_index)
        .map(|(_, &d)| d)
        .collect();
    let k = k.min(others.len());
    if k == 0 {
        return 0.0;
    }
    others.select_nth_unstable_by(k - 1, f64::total_cmp);
    others[k - 1]
}

/// Von Neumann entropy of the operator spectrum raised to `t = 1..=t_max`.
pub fn von_neumann_entropy(eigenvalues: &[f64], t_max: u64) -> Vec<f64> {
    (1..=t_max)
        .map(|t| {
            let powered: Vec<f64> = eigenvalues.iter().map(|l| l.abs().powi(t as i32)).collect();
            let total: f64 = powered.iter().sum();
            if total <= 0.0 {
                return 0.0;
            }
            -powered
                .iter()
                .map(|&p| p / total)
                .filter(|&p| p > 0.0)
                .map(|p| p * p.ln())
                .sum::<f64>()
        })
        .collect()
}

/// Diffusion time (1-based) at the knee of an entropy curve. Flat or
/// linear curves give `t = 1`.
pub fn knee(curve: &[f64]) -> u64 {
    linalg::chord_knee(curve).map_or(1, |i| i as u64 + 1)
}

pub fn phate(input: PhateInput<'_>, cfg: &PhateConfig) -> Result<PhateResult, EmbedError> {
    let n = input.len();
    cfg.validate(n)?;
    if let PhateInput::Distances(d) = input {
        if !d.is_square() {
            return Err(EmbedError::InvalidInput("distance matrix is not square".into()));
        }
    }
    let mut result = if n > cfg.n_landmarks {
        landmark_phate(input, cfg)?
    } else {
        dense_phate(input, cfg)?
    };
    result.embedding.provenance = Provenance {
        method: "phate".into(),
        config_hash: digest(serde_json::to_string(cfg).expect("config serializes").as_bytes()),
        input_hash: input.digest(),
    };
    Ok(result)
}

fn choose_t(cfg: &PhateConfig, spectrum: impl FnOnce() -> Vec<f64>) -> (u64, Vec<f64>) {
    match cfg.t {
        DiffusionTime::Fixed(t) => (t, Vec::new()),
        DiffusionTime::Auto { max } => {
            let h = von_neumann_entropy(&spectrum(), max);
            (knee(&h), h)
        }
    }
}

fn potential_mds(
    diffused: &DMatrix<f64>,
    cfg: &PhateConfig,
) -> Result<super::mds::MdsResult, EmbedError> {
    let potential = diffused.map(|p| -(p + POTENTIAL_FLOOR).ln());
    let d = linalg::pairwise_distances(&potential);
    smacof(
        &d,
        &SmacofOptions {
            dim: cfg.out_dim,
            max_iter: cfg.mds_max_iter,
            tol: cfg.mds_tol,
            seed: cfg.seed,
            init: MdsInit::Auto,
        },
    )
}

fn dense_phate(input: PhateInput<'_>, cfg: &PhateConfig) -> Result<PhateResult, EmbedError> {
    let n = input.len();
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|i| input.row(i)).collect();
    let sigma: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| kth_neighbor_distance(r, i, cfg.n_neighbors))
        .collect();
    let kernel = DMatrix::from_fn(n, n, |i, j| {
        let d = rows[i][j];
        0.5 * (alpha_decay(d, sigma[i], cfg.decay) + alpha_decay(d, sigma[j], cfg.decay))
    });
    let off_diagonal: f64 = kernel.sum() - kernel.trace();
    if n > 1 && !(off_diagonal > 0.0) {
        return Err(EmbedError::DegenerateKernel);
    }
    let row_sums: Vec<f64> = (0..n).map(|i| kernel.row(i).sum()).collect();
    let markov = DMatrix::from_fn(n, n, |i, j| kernel[(i, j)] / row_sums[i]);

    let (t, entropy) = choose_t(cfg, || {
        let inv_sqrt: Vec<f64> = row_sums.iter().map(|s| 1.0 / s.sqrt()).collect();
        let conj = DMatrix::from_fn(n, n, |i, j| kernel[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
        SymmetricEigen::new(conj).eigenvalues.iter().copied().collect()
    });
    let diffused = linalg::matrix_power(&markov, t);
    let mds = potential_mds(&diffused, cfg)?;
    Ok(PhateResult {
        embedding: Embedding::new(mds.coords.clone()),
        t,
        entropy,
        mds_iterations: mds.iterations,
        final_stress: mds.final_stress(),
        converged: mds.converged,
        landmarks: None,
    })
}

type SparseRow = Vec<(usize, f64)>;

fn landmark_phate(input: PhateInput<'_>, cfg: &PhateConfig) -> Result<PhateResult, EmbedError> {
    let n = input.len();
    let sigma: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| kth_neighbor_distance(&input.row(i), i, cfg.n_neighbors))
        .collect();
    let kernel: Vec<SparseRow> = (0..n)
        .into_par_iter()
        .map(|i| {
            input
                .row(i)
                .iter()
                .enumerate()
                .filter_map(|(j, &d)| {
                    let v = 0.5
                        * (alpha_decay(d, sigma[i], cfg.decay)
                            + alpha_decay(d, sigma[j], cfg.decay));
                    (v > SPARSE_THRESHOLD || i == j).then_some((j, v))
                })
                .collect()
        })
        .collect();
    if kernel.iter().all(|r| r.len() <= 1) {
        return Err(EmbedError::DegenerateKernel);
    }
    let markov: Vec<SparseRow> = kernel
        .into_iter()
        .map(|r| {
            let s: f64 = r.iter().map(|e| e.1).sum();
            r.into_iter().map(|(j, v)| (j, v / s)).collect()
        })
        .collect();

    // cluster rows of the operator in its leading singular subspace
    let projected = svd_features(&markov, PROJECTION_DIM.min(n), cfg.seed);
    let labels = kmeans(&projected, cfg.n_landmarks, cfg.seed);
    let clusters = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; clusters];
    for &l in &labels {
        sizes[l] += 1;
    }

    // point -> landmark transitions
    let to_landmark: Vec<SparseRow> = markov
        .par_iter()
        .map(|row| {
            let mut acc: HashMap<usize, f64> = HashMap::new();
            for &(j, v) in row {
                *acc.entry(labels[j]).or_insert(0.0) += v;
            }
            let mut out: SparseRow = acc.into_iter().collect();
            out.sort_unstable_by_key(|e| e.0);
            out
        })
        .collect();
    // landmark -> landmark operator
    let mut landmark_op = DMatrix::zeros(clusters, clusters);
    for (i, row) in markov.iter().enumerate() {
        let c = labels[i];
        let w = 1.0 / sizes[c] as f64;
        for &(j, p) in row {
            for &(c2, q) in &to_landmark[j] {
                landmark_op[(c, c2)] += w * p * q;
            }
        }
    }

    let (t, entropy) = choose_t(cfg, || {
        landmark_op.clone().singular_values().iter().copied().collect()
    });
    let diffused = linalg::matrix_power(&landmark_op, t);
    let mds = potential_mds(&diffused, cfg)?;
    let mut coords = DMatrix::zeros(n, cfg.out_dim);
    for (i, row) in to_landmark.iter().enumerate() {
        for &(c, q) in row {
            for d in 0..cfg.out_dim {
                coords[(i, d)] += q * mds.coords[(c, d)];
            }
        }
    }
    Ok(PhateResult {
        embedding: Embedding::new(coords),
        t,
        entropy,
        mds_iterations: mds.iterations,
        final_stress: mds.final_stress(),
        converged: mds.converged,
        landmarks: Some(clusters),
    })
}

fn sparse_mul(rows: &[SparseRow], m: &DMatrix<f64>) -> DMatrix<f64> {
    let c = m.ncols();
    let out: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|row| {
            let mut acc = vec![0.0; c];
            for &(j, v) in row {
                for (k, a) in acc.iter_mut().enumerate() {
                    *a += v * m[(j, k)];
                }
            }
            acc
        })
        .collect();
    DMatrix::from_fn(rows.len(), c, |i, k| out[i][k])
}

fn sparse_tmul(rows: &[SparseRow], m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows.len(), m.ncols());
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            for k in 0..m.ncols() {
                out[(j, k)] += v * m[(i, k)];
            }
        }
    }
    out
}

/// Rows of `P` in coordinates of its top `r` right singular vectors,
/// scaled by the singular values, via a randomized range finder with two
/// power iterations. Distances between rows approximate those of `P`.
fn svd_features(p: &[SparseRow], r: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = p.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega: DMatrix<f64> = DMatrix::from_fn(n, r, |_, _| StandardNormal.sample(&mut rng));
    let mut q = sparse_mul(p, &omega).qr().q();
    for _ in 0..2 {
        let z = sparse_tmul(p, &q).qr().q();
        q = sparse_mul(p, &z).qr().q();
    }
    // B = Qᵀ P, and B Bᵀ = Ũ Σ² Ũᵀ
    let bt = sparse_tmul(p, &q);
    let bbt = bt.transpose() * &bt;
    let eig = SymmetricEigen::new(bbt);
    let scaled = DMatrix::from_fn(eig.eigenvectors.nrows(), eig.eigenvectors.ncols(), |i, k| {
        eig.eigenvectors[(i, k)] * eig.eigenvalues[k].max(0.0).sqrt()
    });
    let features = q * scaled;
    (0..n).map(|i| features.row(i).iter().copied().collect()).collect()
}

/// Lloyd's algorithm from distinct random seeds; empty clusters are dropped
/// and labels renumbered densely in order of first appearance.
fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<usize> {
    let n = points.len();
    let k = k.min(n).max(1);
    let dim = points.first().map_or(0, Vec::len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut chosen: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        chosen.swap(i, j);
    }
    let mut centers: Vec<Vec<f64>> = chosen[..k].iter().map(|&i| points[i].clone()).collect();
    let mut labels = vec![0usize; n];
    for _ in 0..KMEANS_ITERS {
        let next: Vec<usize> = points
            .par_iter()
            .map(|p| {
                let mut best = (f64::INFINITY, 0);
                for (c, center) in centers.iter().enumerate() {
                    let d: f64 = p.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                    if d < best.0 {
                        best = (d, c);
                    }
                }
                best.1
            })
            .collect();
        let changed = next != labels;
        labels = next;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    let mut remap = vec![usize::MAX; k];
    let mut next = 0;
    labels
        .into_iter()
        .map(|l| {
            if remap[l] == usize::MAX {
                remap[l] = next;
                next += 1;
            }
            remap[l]
        })
        .collect()
}
