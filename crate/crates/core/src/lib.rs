//! Low-dimensional landscapes and kinetics analysis for elementary-step
//! nucleic acid reaction trajectories.
//!
//! The crate follows the data flow of a trajectory study:
//!
//! 1. [`multistrand`] parses first-step-mode simulator logs into a
//!    deduplicated [`StateSpace`] and an observed [`TransitionGraph`].
//! 2. [`dp`] turns each dot-parenthesis structure into a base-level graph.
//! 3. [`scattering`] maps those graphs to fixed-length feature vectors.
//! 4. [`distances`] builds minimum-passage-time and edit-distance
//!    neighbourhoods used as supervision.
//! 5. [`embed`] produces coordinates (PHATE, SMACOF, direct stress fitting).
//! 6. [`eval`] scores embeddings and extracts kinetic traps.
//!
//! [`ctmc`] provides exact and Monte Carlo kinetics on explicit chains and is
//! the reference against which the trajectory-derived quantities are checked.
//! [`bundle`] defines the JSON document consumed by the browser viewer.

pub mod bundle;
pub mod ctmc;
pub mod distances;
pub mod dp;
pub mod embed;
pub mod eval;
pub mod linalg;
pub mod multistrand;
pub mod scattering;

mod error;

pub use error::{Error, Result};

pub use bundle::ViewerBundle;
pub use ctmc::{EnergyModel, RateMatrix};
pub use distances::{NeighborTable, WeightTable};
pub use dp::{SecondaryStructure, StateGraph, StrandSet};
pub use embed::Embedding;
pub use multistrand::{Outcome, StateSpace, Trajectory, TransitionGraph};
pub use scattering::{ScatteringConfig, ScatteringVector};
