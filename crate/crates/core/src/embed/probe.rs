//! Affine least-squares read-out of state energy from embedding coordinates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::EmbedError;

/// Relative singular-value cutoff below which the design counts as degenerate.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFit {
    /// One slope per embedding dimension.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// `Σ (ŷ_i − y_i)²`.
    pub residual: f64,
}

impl ProbeFit {
    pub fn predict(&self, z: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(z).map(|(a, x)| a * x).sum::<f64>()
    }
}

/// Fits `y ≈ aᵀz + b` by SVD.
pub fn energy_probe(z: &DMatrix<f64>, y: &[f64]) -> Result<ProbeFit, EmbedError> {
    let (n, d) = z.shape();
    if y.len() != n {
        return Err(EmbedError::InvalidInput(format!("{n} points but {} energies", y.len())));
    }
    if n < d + 1 {
        return Err(EmbedError::RankDeficient);
    }
    let design = DMatrix::from_fn(n, d + 1, |i, c| if c < d { z[(i, c)] } else { 1.0 });
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= RANK_TOL * smax {
        return Err(EmbedError::RankDeficient);
    }
    let target = DVector::from_column_slice(y);
    let beta = svd
        .solve(&target, 0.0)
        .map_err(|e| EmbedError::InvalidInput(e.to_string()))?;
    let residual = (&design * &beta - &target).norm_squared();
    Ok(ProbeFit {
        coefficients: beta.rows(0, d).iter().copied().collect(),
        intercept: beta[d],
        residual,
    })
}
