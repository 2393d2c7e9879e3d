//! Direct coordinate optimisation of `δ·L_mpt + ε·L_ged`.
//!
//! Each term is a weighted stress over the stored neighbour pairs,
//! `Σ w_ij (‖z_i − z_j‖ − d_ij)²`. The optimiser is plain gradient descent
//! with Barzilai-Borwein trial steps and Armijo backtracking, so the loss
//! trace never increases.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{digest, EmbedError, Embedding, Provenance};
use crate::distances::{NeighborTable, WeightTable};

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressConfig {
    /// δ, weight of the passage-time term.
    pub mpt_weight: f64,
    /// ε, weight of the edit-distance term.
    pub ged_weight: f64,
    /// Initial step of the line search.
    pub learning_rate: f64,
    pub max_iter: usize,
    /// Stop once the relative loss decrease falls below this.
    pub tol: f64,
    /// Min-max scale both target tables to `[0, 1]` first.
    pub scale_targets: bool,
    pub dim: usize,
}

impl Default for StressConfig {
    fn default() -> Self {
        Self {
            mpt_weight: 0.0004,
            ged_weight: 0.00004,
            learning_rate: 1.0,
            max_iter: 1000,
            tol: 1e-12,
            scale_targets: false,
            dim: 2,
        }
    }
}

impl StressConfig {
    fn validate(&self) -> Result<(), EmbedError> {
        let ok = |w: f64| w >= 0.0 && w.is_finite();
        if !ok(self.mpt_weight) || !ok(self.ged_weight) {
            return Err(EmbedError::InvalidInput("loss weights must be finite and non-negative".into()));
        }
        if self.mpt_weight == 0.0 && self.ged_weight == 0.0 {
            return Err(EmbedError::InvalidInput("at least one loss weight must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || self.dim == 0 {
            return Err(EmbedError::InvalidInput("learning rate and dim must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StressInit {
    /// Start from existing coordinates, e.g. a PHATE layout.
    Coords(DMatrix<f64>),
    Random { seed: u64, scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressResult {
    pub embedding: Embedding,
    /// Combined loss per iterate, starting with the initial layout.
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn check_ids(z: &DMatrix<f64>, table: &NeighborTable) -> Result<(), EmbedError> {
    if let Some((i, j, _)) = table
        .pairs()
        .find(|&(i, j, _)| i >= z.nrows() || j >= z.nrows())
    {
        return Err(EmbedError::MissingState(i.max(j)));
    }
    Ok(())
}

fn check_weights(table: &NeighborTable, w: &WeightTable) -> Result<(), EmbedError> {
    let aligned = w.rows.len() == table.rows.len()
        && w.rows.iter().zip(&table.rows).all(|(a, b)| a.len() == b.len());
    if aligned {
        Ok(())
    } else {
        Err(EmbedError::InvalidInput("weight table does not match neighbour table".into()))
    }
}

fn row_distance(z: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let mut s = 0.0;
    for c in 0..z.ncols() {
        let d = z[(i, c)] - z[(j, c)];
        s += d * d;
    }
    s.sqrt()
}

/// `Σ w_ij (‖z_i − z_j‖ − t_ij)²` over every stored pair.
pub fn eval_l_mpt(z: &DMatrix<f64>, nbrs: &NeighborTable, w: &WeightTable) -> Result<f64, EmbedError> {
    check_ids(z, nbrs)?;
    check_weights(nbrs, w)?;
    Ok(weighted_stress(z, nbrs, Some(w), 1.0, None))
}

/// `Σ (‖z_i − z_j‖ − e_ij)²` over every stored pair.
pub fn eval_l_ged(z: &DMatrix<f64>, nbrs: &NeighborTable) -> Result<f64, EmbedError> {
    check_ids(z, nbrs)?;
    Ok(weighted_stress(z, nbrs, None, 1.0, None))
}

/// Adds `scale · term` to `grad` when given, returns `term`.
fn weighted_stress(
    z: &DMatrix<f64>,
    nbrs: &NeighborTable,
    w: Option<&WeightTable>,
    scale: f64,
    mut grad: Option<&mut DMatrix<f64>>,
) -> f64 {
    let mut total = 0.0;
    for (i, row) in nbrs.rows.iter().enumerate() {
        for (slot, nb) in row.iter().enumerate() {
            let wij = w.map_or(1.0, |w| w.rows[i][slot]);
            let r = row_distance(z, i, nb.id);
            let resid = r - nb.dist;
            total += wij * resid * resid;
            if let Some(g) = grad.as_deref_mut() {
                // coincident points get a zero subgradient
                if r > 0.0 {
                    let f = scale * 2.0 * wij * resid / r;
                    for c in 0..z.ncols() {
                        let d = f * (z[(i, c)] - z[(nb.id, c)]);
                        g[(i, c)] += d;
                        g[(nb.id, c)] -= d;
                    }
                }
            }
        }
    }
    total
}

/// Loss terms after optional target scaling, ready for repeated evaluation.
pub struct Objective {
    mpt: NeighborTable,
    w: WeightTable,
    ged: NeighborTable,
    delta: f64,
    epsilon: f64,
}

impl Objective {
    pub fn new(
        nbrs_mpt: &NeighborTable,
        w: &WeightTable,
        nbrs_ged: &NeighborTable,
        cfg: &StressConfig,
    ) -> Result<Self, EmbedError> {
        cfg.validate()?;
        check_weights(nbrs_mpt, w)?;
        let (mpt, ged) = if cfg.scale_targets {
            (nbrs_mpt.min_max_scaled(), nbrs_ged.min_max_scaled())
        } else {
            (nbrs_mpt.clone(), nbrs_ged.clone())
        };
        Ok(Self {
            mpt,
            w: w.clone(),
            ged,
            delta: cfg.mpt_weight,
            epsilon: cfg.ged_weight,
        })
    }

    /// Smallest number of states the tables refer to.
    pub fn min_states(&self) -> usize {
        self.mpt
            .pairs()
            .chain(self.ged.pairs())
            .map(|(i, j, _)| i.max(j) + 1)
            .max()
            .unwrap_or(0)
            .max(self.mpt.len())
            .max(self.ged.len())
    }

    pub fn value(&self, z: &DMatrix<f64>) -> Result<f64, EmbedError> {
        check_ids(z, &self.mpt)?;
        check_ids(z, &self.ged)?;
        Ok(self.delta * weighted_stress(z, &self.mpt, Some(&self.w), 1.0, None)
            + self.epsilon * weighted_stress(z, &self.ged, None, 1.0, None))
    }

    /// Loss and its analytic gradient with respect to every coordinate.
    pub fn value_and_gradient(&self, z: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>), EmbedError> {
        check_ids(z, &self.mpt)?;
        check_ids(z, &self.ged)?;
        let mut g = DMatrix::zeros(z.nrows(), z.ncols());
        let a = weighted_stress(z, &self.mpt, Some(&self.w), self.delta, Some(&mut g));
        let b = weighted_stress(z, &self.ged, None, self.epsilon, Some(&mut g));
        Ok((self.delta * a + self.epsilon * b, g))
    }
}

pub fn stress_embed(
    nbrs_mpt: &NeighborTable,
    w: &WeightTable,
    nbrs_ged: &NeighborTable,
    cfg: &StressConfig,
    init: &StressInit,
) -> Result<StressResult, EmbedError> {
    let objective = Objective::new(nbrs_mpt, w, nbrs_ged, cfg)?;
    let n = objective.min_states();
    let mut z = match init {
        StressInit::Coords(z) => {
            if z.nrows() < n || z.ncols() != cfg.dim {
                return Err(EmbedError::InvalidInput(format!(
                    "initial layout is {}x{}, need at least {n}x{}",
                    z.nrows(),
                    z.ncols(),
                    cfg.dim
                )));
            }
            z.clone()
        }
        StressInit::Random { seed, scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            DMatrix::from_fn(n, cfg.dim, |_, _| {
                let x: f64 = StandardNormal.sample(&mut rng);
                x * scale
            })
        }
    };
    if z.iter().any(|v| !v.is_finite()) {
        return Err(EmbedError::InvalidInput("initial layout is not finite".into()));
    }

    let (mut loss, mut grad) = objective.value_and_gradient(&z)?;
    let mut trace = vec![loss];
    let mut step = cfg.learning_rate;
    let mut converged = loss == 0.0;
    let mut iterations = 0;
    while !converged && iterations < cfg.max_iter {
        let g2 = grad.norm_squared();
        if g2 == 0.0 {
            converged = true;
            break;
        }
        // backtrack until sufficient decrease, then let the step grow again
        let mut accepted = None;
        while step >= MIN_STEP {
            let candidate = &z - &grad * step;
            let value = objective.value(&candidate)?;
            if value <= loss - ARMIJO_C * step * g2 {
                accepted = Some((candidate, value));
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        let Some((next, value)) = accepted else {
            converged = true;
            break;
        };
        let decrease = loss - value;
        let (l, g) = objective.value_and_gradient(&next)?;
        // Barzilai-Borwein trial step for the next iteration
        let s_k = &next - &z;
        let y_k = &g - &grad;
        let sy = s_k.dot(&y_k);
        step = if sy > 0.0 { s_k.norm_squared() / sy } else { step * 2.0 };
        z = next;
        loss = l;
        grad = g;
        trace.push(loss);
        if loss == 0.0 || decrease <= cfg.tol * value.max(f64::MIN_POSITIVE) {
            converged = true;
        }
    }

    let mut embedding = Embedding::new(z);
    embedding.provenance = Provenance {
        method: "stress".into(),
        config_hash: digest(serde_json::to_string(cfg).expect("config serializes").as_bytes()),
        input_hash: digest(
            serde_json::to_string(&(nbrs_mpt, w, nbrs_ged))
                .expect("tables serialize")
                .as_bytes(),
        ),
    };
    Ok(StressResult {
        embedding,
        loss_trace: trace,
        iterations,
        converged,
    })
}
