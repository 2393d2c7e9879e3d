//! Geometric scattering of structure graphs.
//!
//! Diffusion wavelets are built from the lazy random walk
//! `P = (I + A D⁻¹) / 2` as `Ψ_j = P^(2^(j-1)) - P^(2^j)`. The input signals
//! are the Dirac deltas on every base in sequence order, so node-wise
//! responses keep base identity, which is meaningful across the states of a
//! single reaction.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dp::StateGraph;

#[derive(Debug, Error, PartialEq)]
pub enum ScatteringError {
    #[error("node {0} has no edges")]
    IsolatedNode(usize),
    #[error("invalid scattering config: {0}")]
    InvalidConfig(String),
    #[error("feature rows have different layouts")]
    LayoutMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Keep every node of every response.
    NodeWise,
    /// Replace each response by `Σ_v |x_v|^q` for each listed `q`.
    Moments(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScatteringConfig {
    /// Number of dyadic band-pass scales `J`.
    pub scales: u32,
    /// Diffusion power of the low-pass filter.
    pub lowpass_power: u64,
    pub order: Order,
    pub aggregation: Aggregation,
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        Self {
            scales: 4,
            lowpass_power: 16,
            order: Order::First,
            aggregation: Aggregation::NodeWise,
        }
    }
}

impl ScatteringConfig {
    pub fn validate(&self) -> Result<(), ScatteringError> {
        if self.scales == 0 {
            return Err(ScatteringError::InvalidConfig("need at least one scale".into()));
        }
        if self.scales > 30 {
            return Err(ScatteringError::InvalidConfig("too many scales".into()));
        }
        if (1u64 << self.scales) > self.lowpass_power {
            return Err(ScatteringError::InvalidConfig(format!(
                "2^{} exceeds the low-pass power {}",
                self.scales, self.lowpass_power
            )));
        }
        if let Aggregation::Moments(q) = &self.aggregation {
            if q.is_empty() || q.contains(&0) {
                return Err(ScatteringError::InvalidConfig(
                    "moments must be a non-empty list of positive orders".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn layout(&self, nodes: usize) -> Layout {
        let mut filters = vec![Filter::LowPass];
        filters.extend((1..=self.scales).map(Filter::Band));
        if self.order == Order::Second {
            for j in 1..=self.scales {
                for k in j + 1..=self.scales {
                    filters.push(Filter::Cascade(j, k));
                }
            }
        }
        Layout {
            nodes,
            filters,
            aggregation: self.aggregation.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Filter {
    /// `P^t f`
    LowPass,
    /// `|Ψ_j f|`
    Band(u32),
    /// `|Ψ_k |Ψ_j f||` with `j < k`
    Cascade(u32, u32),
}

/// Describes what each coefficient holds. Values are laid out filter-major,
/// then by input signal (Dirac on node `s`), then by node or moment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub nodes: usize,
    pub filters: Vec<Filter>,
    pub aggregation: Aggregation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub filter: Filter,
    pub signal: usize,
    /// Node index for node-wise layouts, moment order otherwise.
    pub entry: usize,
}

impl Layout {
    fn per_signal(&self) -> usize {
        match &self.aggregation {
            Aggregation::NodeWise => self.nodes,
            Aggregation::Moments(q) => q.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.filters.len() * self.nodes * self.per_signal()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slot(&self, index: usize) -> Slot {
        let per = self.per_signal();
        let block = self.nodes * per;
        let filter = self.filters[index / block];
        let within = index % block;
        let entry = match &self.aggregation {
            Aggregation::NodeWise => within % per,
            Aggregation::Moments(q) => q[within % per] as usize,
        };
        Slot {
            filter,
            signal: within / per,
            entry,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringVector {
    pub values: Vec<f64>,
    pub layout: Layout,
}

/// Lazy random walk `P = (I + A D⁻¹) / 2`. Columns sum to one and the degree
/// vector is a fixed point.
pub fn lazy_walk(g: &StateGraph) -> Result<DMatrix<f64>, ScatteringError> {
    let n = g.node_count();
    let deg = g.degrees();
    if let Some(i) = deg.iter().position(|&d| d == 0) {
        return Err(ScatteringError::IsolatedNode(i));
    }
    let mut p = DMatrix::identity(n, n) * 0.5;
    for &(i, j, _) in g.edges() {
        p[(i, j)] += 0.5 / deg[j] as f64;
        p[(j, i)] += 0.5 / deg[i] as f64;
    }
    Ok(p)
}

/// Band-pass operators `Ψ_1..Ψ_J` and the dyadic powers they were built
/// from (`P^(2^0)..P^(2^J)`).
pub fn wavelets(p: &DMatrix<f64>, scales: u32) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let mut powers = Vec::with_capacity(scales as usize + 1);
    powers.push(p.clone());
    for _ in 0..scales {
        let last = powers.last().unwrap();
        powers.push(last * last);
    }
    let psi = (0..scales as usize)
        .map(|j| &powers[j] - &powers[j + 1])
        .collect();
    (psi, powers)
}

pub fn scatter(g: &StateGraph, c: &ScatteringConfig) -> Result<ScatteringVector, ScatteringError> {
    c.validate()?;
    let n = g.node_count();
    let p = lazy_walk(g)?;
    let (psi, powers) = wavelets(&p, c.scales);

    let lowpass = if c.lowpass_power.is_power_of_two()
        && (c.lowpass_power.trailing_zeros() as usize) < powers.len()
    {
        powers[c.lowpass_power.trailing_zeros() as usize].clone()
    } else {
        crate::linalg::matrix_power(&p, c.lowpass_power)
    };

    // responses to Dirac signals are matrix columns
    let mut responses: Vec<DMatrix<f64>> = Vec::with_capacity(c.layout(n).filters.len());
    responses.push(lowpass);
    let first: Vec<DMatrix<f64>> = psi.iter().map(|m| m.abs()).collect();
    responses.extend(first.iter().cloned());
    if c.order == Order::Second {
        for j in 0..psi.len() {
            for k in j + 1..psi.len() {
                responses.push((&psi[k] * &first[j]).abs());
            }
        }
    }

    let layout = c.layout(n);
    let mut values = Vec::with_capacity(layout.len());
    for r in &responses {
        for signal in 0..n {
            let col = r.column(signal);
            match &c.aggregation {
                Aggregation::NodeWise => values.extend(col.iter().copied()),
                Aggregation::Moments(qs) => {
                    for &q in qs {
                        values.push(col.iter().map(|x| x.abs().powi(q as i32)).sum());
                    }
                }
            }
        }
    }
    debug_assert_eq!(values.len(), layout.len());
    Ok(ScatteringVector { values, layout })
}

/// Scatters every graph; rows of the result follow the input order.
pub fn scatter_all(
    graphs: &[StateGraph],
    c: &ScatteringConfig,
) -> Result<FeatureMatrix, ScatteringError> {
    c.validate()?;
    let rows: Vec<ScatteringVector> = graphs
        .par_iter()
        .map(|g| scatter(g, c))
        .collect::<Result<_, _>>()?;
    FeatureMatrix::from_vectors(rows)
}

/// Row-major feature table sharing one layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub layout: Option<Layout>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    rows: usize,
    cols: usize,
    dtype: String,
    byte_order: String,
    layout: Option<Layout>,
}

impl FeatureMatrix {
    pub fn from_vectors(rows: Vec<ScatteringVector>) -> Result<Self, ScatteringError> {
        let layout = rows.first().map(|r| r.layout.clone());
        if rows.iter().any(|r| Some(&r.layout) != layout.as_ref()) {
            return Err(ScatteringError::LayoutMismatch);
        }
        let cols = layout.as_ref().map_or(0, Layout::len);
        let n = rows.len();
        let data = rows.into_iter().flat_map(|r| r.values).collect();
        Ok(Self {
            rows: n,
            cols,
            data,
            layout,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Little-endian f64 values, row-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|x| x.to_le_bytes()).collect()
    }

    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&Sidecar {
            rows: self.rows,
            cols: self.cols,
            dtype: "f64".into(),
            byte_order: "little".into(),
            layout: self.layout.clone(),
        })
        .expect("sidecar serializes")
    }

    pub fn from_parts(bytes: &[u8], sidecar: &str) -> Result<Self, crate::Error> {
        let meta: Sidecar = serde_json::from_str(sidecar)?;
        if meta.dtype != "f64" || meta.byte_order != "little" {
            return Err(ScatteringError::InvalidConfig(format!(
                "unsupported encoding {} {}",
                meta.dtype, meta.byte_order
            ))
            .into());
        }
        if bytes.len() != meta.rows * meta.cols * 8 {
            return Err(ScatteringError::InvalidConfig(format!(
                "expected {} bytes, found {}",
                meta.rows * meta.cols * 8,
                bytes.len()
            ))
            .into());
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self {
            rows: meta.rows,
            cols: meta.cols,
            data,
            layout: meta.layout,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let cells: Vec<String> = self.row(i).iter().map(|x| format!("{x:?}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::SecondaryStructure;

    fn graph(dp: &str) -> StateGraph {
        SecondaryStructure::from_dp(dp).unwrap().to_graph()
    }

    #[test]
    fn two_node_walk() {
        let p = lazy_walk(&graph("..")).unwrap();
        assert_eq!(p, DMatrix::from_element(2, 2, 0.5));
        let out = scatter(&graph(".."), &ScatteringConfig::default()).unwrap();
        let block = 4;
        assert!(out.values[block..].iter().all(|&x| x == 0.0));
        assert!(out.values[..block].iter().all(|&x| (x - 0.5).abs() < 1e-15));
    }

    #[test]
    fn degree_is_fixed() {
        let g = graph("((..))");
        let p = lazy_walk(&g).unwrap();
        let d = nalgebra::DVector::from_vec(vec![2.0, 3.0, 2.0, 2.0, 3.0, 2.0]);
        assert!((&p * &d - &d).amax() < 1e-15);
        for c in p.column_iter() {
            assert!((c.sum() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn isolated_node() {
        assert_eq!(lazy_walk(&graph(".+.")), Err(ScatteringError::IsolatedNode(0)));
    }

    #[test]
    fn layout_sizes() {
        let c = ScatteringConfig::default();
        let out = scatter(&graph("((..))"), &c).unwrap();
        assert_eq!(out.values.len(), 180);
        assert_eq!(out.layout.len(), 180);
        let slot = out.layout.slot(36 + 7);
        assert_eq!(slot, Slot { filter: Filter::Band(1), signal: 1, entry: 1 });

        let second = ScatteringConfig {
            order: Order::Second,
            ..ScatteringConfig::default()
        };
        assert_eq!(second.layout(6).len(), 36 * (5 + 6));

        let moments = ScatteringConfig {
            aggregation: Aggregation::Moments(vec![1, 2, 3, 4]),
            ..ScatteringConfig::default()
        };
        let m = scatter(&graph("((..))"), &moments).unwrap();
        assert_eq!(m.values.len(), 5 * 6 * 4);
        // first moment of the low-pass response to a Dirac is its mass
        assert!((m.values[0] - 1.0).abs() < 1e-12);
        assert_eq!(m.layout.slot(5).entry, 2);
    }

    #[test]
    fn config_checks() {
        let bad = ScatteringConfig {
            scales: 5,
            ..ScatteringConfig::default()
        };
        assert!(bad.validate().is_err());
        let zero = ScatteringConfig {
            scales: 0,
            ..ScatteringConfig::default()
        };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn deterministic_and_second_order_finite() {
        let c = ScatteringConfig {
            order: Order::Second,
            ..ScatteringConfig::default()
        };
        let a = scatter(&graph("((((...))..+..))"), &c).unwrap();
        let b = scatter(&graph("((((...))..+..))"), &c).unwrap();
        assert_eq!(a, b);
        assert!(a.values.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn feature_files_round_trip() {
        let gs = vec![graph("((..))"), graph("(....)")];
        let f = scatter_all(&gs, &ScatteringConfig::default()).unwrap();
        assert_eq!((f.rows, f.cols), (2, 180));
        let back = FeatureMatrix::from_parts(&f.to_bytes(), &f.sidecar_json()).unwrap();
        assert_eq!(back, f);
        assert!(FeatureMatrix::from_parts(&f.to_bytes()[1..], &f.sidecar_json()).is_err());
        assert_eq!(f.to_csv().lines().count(), 2);
    }
}
