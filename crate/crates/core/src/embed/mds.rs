//! Classical scaling and SMACOF metric MDS with unit weights.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::EmbedError;

/// Above this size SMACOF starts from a seeded random layout instead of
/// classical scaling.
pub const CLASSICAL_INIT_LIMIT: usize = 3000;

#[derive(Debug, Clone, PartialEq)]
pub enum MdsInit {
    /// Classical scaling when `n <= CLASSICAL_INIT_LIMIT`, random otherwise.
    Auto,
    Classical,
    Random,
    Given(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmacofOptions {
    pub dim: usize,
    pub max_iter: usize,
    /// Stop once the relative stress decrease falls below this.
    pub tol: f64,
    pub seed: u64,
    pub init: MdsInit,
}

impl Default for SmacofOptions {
    fn default() -> Self {
        Self {
            dim: 2,
            max_iter: 300,
            tol: 1e-6,
            seed: 0,
            init: MdsInit::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdsResult {
    pub coords: DMatrix<f64>,
    /// Raw stress `Σ_{i<j} (d_ij(X) - δ_ij)²`, one entry per iterate,
    /// starting with the initial layout.
    pub stress_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl MdsResult {
    pub fn final_stress(&self) -> f64 {
        *self.stress_trace.last().expect("trace holds the initial stress")
    }
}

fn check_dissimilarities(d: &DMatrix<f64>) -> Result<(), EmbedError> {
    if !d.is_square() {
        return Err(EmbedError::InvalidInput("distance matrix is not square".into()));
    }
    let n = d.nrows();
    for i in 0..n {
        if d[(i, i)] != 0.0 {
            return Err(EmbedError::InvalidInput(format!("nonzero diagonal at {i}")));
        }
        for j in i + 1..n {
            let (a, b) = (d[(i, j)], d[(j, i)]);
            if !(a >= 0.0 && a.is_finite()) || (a - b).abs() > 1e-9 * a.abs().max(1.0) {
                return Err(EmbedError::InvalidInput(format!(
                    "distance ({i},{j}) is negative, non-finite or asymmetric"
                )));
            }
        }
    }
    Ok(())
}

/// Torgerson scaling: top eigenvectors of the double-centred squared
/// distances. Negative eigenvalues contribute zero columns.
pub fn classical_mds(d: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let n = d.nrows();
    if n == 0 {
        return DMatrix::zeros(0, dim);
    }
    let sq = d.map(|x| x * x);
    let row_mean: Vec<f64> = (0..n).map(|i| sq.row(i).mean()).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_mean[i] - row_mean[j] + grand));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut x = DMatrix::zeros(n, dim);
    for (c, &k) in order.iter().take(dim).enumerate() {
        let lambda = eig.eigenvalues[k].max(0.0).sqrt();
        let v = eig.eigenvectors.column(k);
        // deterministic sign: largest-magnitude entry positive
        let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            x[(i, c)] = sign * v[i] * lambda;
        }
    }
    x
}

/// Raw stress of a layout against target dissimilarities.
pub fn stress(x: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let r = row_distance(x, i, j) - d[(i, j)];
            s += r * r;
        }
    }
    s
}

fn row_distance(x: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let mut s = 0.0;
    for c in 0..x.ncols() {
        let t = x[(i, c)] - x[(j, c)];
        s += t * t;
    }
    s.sqrt()
}

/// Guttman transform `X ← B(X) X / n`, which never increases stress.
fn guttman(x: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let dim = x.ncols();
    let mut out = DMatrix::zeros(n, dim);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let dij = row_distance(x, i, j);
            if dij > 0.0 {
                let bij = -d[(i, j)] / dij;
                diag -= bij;
                for c in 0..dim {
                    out[(i, c)] += bij * x[(j, c)];
                }
            }
        }
        for c in 0..dim {
            out[(i, c)] += diag * x[(i, c)];
        }
    }
    out / n as f64
}

pub fn smacof(d: &DMatrix<f64>, opts: &SmacofOptions) -> Result<MdsResult, EmbedError> {
    check_dissimilarities(d)?;
    let n = d.nrows();
    let mut x = match &opts.init {
        MdsInit::Given(x) => {
            if x.nrows() != n || x.ncols() != opts.dim {
                return Err(EmbedError::InvalidInput("initial layout has wrong shape".into()));
            }
            x.clone()
        }
        MdsInit::Classical => classical_mds(d, opts.dim),
        MdsInit::Auto if n <= CLASSICAL_INIT_LIMIT => classical_mds(d, opts.dim),
        MdsInit::Auto | MdsInit::Random => random_layout(n, opts.dim, opts.seed, d),
    };
    let mut current = stress(&x, d);
    let mut trace = vec![current];
    let mut converged = current == 0.0;
    let mut iterations = 0;
    while !converged && iterations < opts.max_iter {
        let next = guttman(&x, d);
        let s = stress(&next, d);
        iterations += 1;
        trace.push(s);
        let decrease = current - s;
        x = next;
        if s == 0.0 || decrease <= opts.tol * current {
            converged = true;
        }
        current = s;
    }
    Ok(MdsResult {
        coords: x,
        stress_trace: trace,
        iterations,
        converged,
    })
}

fn random_layout(n: usize, dim: usize, seed: u64, d: &DMatrix<f64>) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = if n > 1 { d.sum() / (n * (n - 1)) as f64 } else { 0.0 };
    let scale = if mean > 0.0 { mean } else { 1.0 };
    DMatrix::from_fn(n, dim, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * scale
    })
}
