//! The JSON document handed to the interactive viewer.
//!
//! Deserialisation rejects unknown fields and [`ViewerBundle::validate`]
//! enforces the cross-references, so a bundle that loads is one the viewer
//! can render without further checks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::Embedding;
use crate::eval::{ClusterResult, TrapRecord, NOISE};
use crate::multistrand::{Dataset, Outcome};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error, PartialEq)]
pub enum BundleError {
    #[error("unsupported schema_version {0:?}, expected \"1\"")]
    SchemaVersion(String),
    #[error("invalid bundle: {0}")]
    Invalid(String),
    #[error("malformed bundle JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub time: String,
    pub energy: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            time: "s".into(),
            energy: "kcal/mol".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub reaction: String,
    pub strands: Vec<String>,
    pub units: Units,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleState {
    pub id: usize,
    pub dp: String,
    pub energy: f64,
    pub p: f64,
    pub cumulative_time: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleTrajectory {
    pub id: u64,
    pub outcome: Outcome,
    pub states: Vec<usize>,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleClusters {
    pub eps: f64,
    pub min_samples: usize,
    /// One label per state; `-1` is noise.
    pub labels: Vec<i64>,
    pub traps: Vec<TrapRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewerBundle {
    pub schema_version: String,
    pub meta: Meta,
    pub states: Vec<BundleState>,
    pub trajectories: Vec<BundleTrajectory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<BundleClusters>,
}

impl ViewerBundle {
    /// Assembles a bundle from a dataset and a 2-D embedding of its states.
    pub fn build(
        reaction: &str,
        data: &Dataset,
        emb: &Embedding,
        clusters: Option<(&ClusterResult, &[TrapRecord])>,
    ) -> Result<Self, BundleError> {
        let ss = &data.states;
        if emb.len() != ss.len() || emb.dim() != 2 {
            return Err(BundleError::Invalid(format!(
                "embedding is {}x{}, expected {}x2",
                emb.len(),
                emb.dim(),
                ss.len()
            )));
        }
        let states = (0..ss.len())
            .map(|i| BundleState {
                id: i,
                dp: ss.structure(i).dp().to_string(),
                energy: ss.energies()[i],
                p: ss.probabilities()[i],
                cumulative_time: ss.cumulative_holding_time()[i],
                x: emb.coords[(i, 0)],
                y: emb.coords[(i, 1)],
            })
            .collect();
        let trajectories = data
            .trajectories
            .iter()
            .map(|t| BundleTrajectory {
                id: t.index,
                outcome: t.outcome,
                states: t.state_ids(),
                times: t.steps.iter().map(|s| s.time).collect(),
            })
            .collect();
        let bundle = Self {
            schema_version: SCHEMA_VERSION.into(),
            meta: Meta {
                reaction: reaction.into(),
                strands: data.strands.strands().iter().map(|s| s.sequence.clone()).collect(),
                units: Units::default(),
            },
            states,
            trajectories,
            clusters: clusters.map(|(cr, traps)| BundleClusters {
                eps: cr.eps,
                min_samples: cr.min_samples,
                labels: cr.labels_by_state(ss.len()),
                traps: traps.to_vec(),
            }),
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<(), BundleError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(BundleError::SchemaVersion(self.schema_version.clone()));
        }
        let bad = |m: String| Err(BundleError::Invalid(m));
        let n = self.states.len();
        for (i, s) in self.states.iter().enumerate() {
            if s.id != i {
                return bad(format!("state at position {i} has id {}", s.id));
            }
            if !(s.x.is_finite() && s.y.is_finite()) {
                return bad(format!("state {i} has non-finite coordinates"));
            }
            if !(s.energy.is_finite() && s.p.is_finite() && s.cumulative_time.is_finite()) {
                return bad(format!("state {i} has a non-finite value"));
            }
        }
        for t in &self.trajectories {
            if t.states.len() != t.times.len() {
                return bad(format!("trajectory {} has mismatched states and times", t.id));
            }
            if let Some(&s) = t.states.iter().find(|&&s| s >= n) {
                return bad(format!("trajectory {} references missing state {s}", t.id));
            }
            if t.times.windows(2).any(|w| !(w[1] >= w[0])) {
                return bad(format!("trajectory {} has decreasing times", t.id));
            }
        }
        if let Some(c) = &self.clusters {
            if c.labels.len() != n {
                return bad(format!("{} cluster labels for {n} states", c.labels.len()));
            }
            if c.labels.iter().any(|&l| l < NOISE) {
                return bad("cluster labels must be -1 or non-negative".into());
            }
            if !(c.eps > 0.0) || c.min_samples == 0 {
                return bad("eps and min_samples must be positive".into());
            }
            for trap in &c.traps {
                let Some(s) = self.states.get(trap.state) else {
                    return bad(format!("trap references missing state {}", trap.state));
                };
                if s.dp != trap.dp || c.labels[trap.state] != trap.cluster {
                    return bad(format!("trap for state {} disagrees with the states table", trap.state));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, BundleError> {
        let bundle: Self = serde_json::from_str(text).map_err(|e| BundleError::Json(e.to_string()))?;
        bundle.validate()?;
        Ok(bundle)
    }
}
