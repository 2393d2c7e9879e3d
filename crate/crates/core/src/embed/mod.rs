//! Coordinate generators and the losses they are judged by.
//!
//! * [`phate`]: α-decay affinities, diffusion to an entropy-selected time,
//!   log-potential distances and metric MDS.
//! * [`mds`]: classical scaling and SMACOF stress majorization.
//! * [`stress`]: direct gradient descent on the weighted passage-time and
//!   edit-distance stress terms.
//! * [`probe`]: affine least-squares read-out of free energy from coordinates.

pub mod mds;
pub mod phate;
pub mod probe;
pub mod stress;

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use mds::{classical_mds, smacof, MdsInit, MdsResult, SmacofOptions};
pub use phate::{phate, DiffusionTime, PhateConfig, PhateInput, PhateResult};
pub use probe::{energy_probe, ProbeFit};
pub use stress::{
    eval_l_ged, eval_l_mpt, stress_embed, Objective, StressConfig, StressInit, StressResult,
};

#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error("affinity kernel has no off-diagonal mass")]
    DegenerateKernel,
    #[error("state {0} is referenced but not embedded")]
    MissingState(usize),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("malformed embedding file: {0}")]
    Format(String),
}

/// Where an embedding came from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub config_hash: String,
    pub input_hash: String,
}

/// One row of coordinates per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub coords: DMatrix<f64>,
    pub provenance: Provenance,
}

impl Embedding {
    pub fn new(coords: DMatrix<f64>) -> Self {
        Self {
            coords,
            provenance: Provenance::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.coords.row(i).iter().copied().collect()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let mut s = 0.0;
        for c in 0..self.coords.ncols() {
            let d = self.coords[(i, c)] - self.coords[(j, c)];
            s += d * d;
        }
        s.sqrt()
    }

    /// `id,x,y` for two dimensions, `id,x1,...,xd` otherwise.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id");
        if self.dim() == 2 {
            out.push_str(",x,y");
        } else {
            for c in 0..self.dim() {
                let _ = write!(out, ",x{}", c + 1);
            }
        }
        out.push('\n');
        for i in 0..self.len() {
            let _ = write!(out, "{i}");
            for c in 0..self.dim() {
                let _ = write!(out, ",{:?}", self.coords[(i, c)]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, EmbedError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| EmbedError::Format("empty file".into()))?;
        let dim = header.split(',').count().saturating_sub(1);
        if dim == 0 {
            return Err(EmbedError::Format("no coordinate columns".into()));
        }
        let mut data = Vec::new();
        let mut n = 0;
        for (row, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != dim + 1 {
                return Err(EmbedError::Format(format!("row {row} has {} cells", cells.len())));
            }
            if cells[0].parse::<usize>().ok() != Some(row) {
                return Err(EmbedError::Format(format!("row {row} has id {:?}", cells[0])));
            }
            for c in &cells[1..] {
                let v: f64 = c
                    .parse()
                    .map_err(|_| EmbedError::Format(format!("bad number {c:?}")))?;
                if !v.is_finite() {
                    return Err(EmbedError::Format("non-finite coordinate".into()));
                }
                data.push(v);
            }
            n += 1;
        }
        Ok(Self::new(DMatrix::from_row_slice(n, dim, &data)))
    }
}

/// Hex SHA-256 of `bytes`.
pub fn digest(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in hash.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub(crate) fn matrix_digest(m: &DMatrix<f64>) -> String {
    let mut bytes = Vec::with_capacity(16 + m.len() * 8);
    bytes.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    bytes.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for x in m.iter() {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    digest(&bytes)
}
