//! Embedding quality metrics and landscape analysis: trajectory distortion,
//! neighbourhood preservation, DBSCAN with an elbow-selected radius,
//! cumulative-time filtering and kinetic-trap tables.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dp::{self, StateGraph};
use crate::embed::Embedding;
use crate::linalg;
use crate::multistrand::{StateSpace, Trajectory};

/// Above this many points the 2-D diameter comes from the convex hull.
pub const EXACT_DIAMETER_LIMIT: usize = 20_000;

/// Label of points that belong to no cluster.
pub const NOISE: i64 = -1;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("all embedded points coincide")]
    ZeroDiameter,
    #[error("state {0} is not embedded")]
    MissingState(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionMode {
    /// Every consecutive pair counts as often as it occurs.
    #[default]
    PerOccurrence,
    /// Each distinct unordered pair counts once.
    Unique,
}

fn row_distance(e: &Embedding, i: usize, j: usize) -> f64 {
    e.distance(i, j)
}

/// Largest pairwise distance between embedded points.
pub fn diameter(emb: &Embedding) -> f64 {
    let n = emb.len();
    if n > EXACT_DIAMETER_LIMIT && emb.dim() == 2 {
        let pts: Vec<[f64; 2]> = (0..n).map(|i| [emb.coords[(i, 0)], emb.coords[(i, 1)]]).collect();
        return hull_diameter(&pts);
    }
    (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| row_distance(emb, i, j)).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Counter-clockwise hull without collinear points (monotone chain).
fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Diameter by rotating calipers over the convex hull.
pub(crate) fn hull_diameter(points: &[[f64; 2]]) -> f64 {
    let h = convex_hull(points);
    let m = h.len();
    match m {
        0 | 1 => return 0.0,
        2 => return dist2(h[0], h[1]),
        _ => {}
    }
    let mut best = 0.0f64;
    let mut j = 1;
    for i in 0..m {
        let ni = (i + 1) % m;
        while cross(h[i], h[ni], h[(j + 1) % m]).abs() > cross(h[i], h[ni], h[j]).abs() {
            j = (j + 1) % m;
        }
        best = best.max(dist2(h[i], h[j])).max(dist2(h[ni], h[j]));
    }
    best
}

/// Mean embedded length of consecutive trajectory steps over the embedding
/// diameter. Repeated states (no transition) are skipped.
pub fn avg_distortion(emb: &Embedding, trajectories: &[Trajectory]) -> Result<f64, EvalError> {
    avg_distortion_with(emb, trajectories, DistortionMode::PerOccurrence)
}

pub fn avg_distortion_with(
    emb: &Embedding,
    trajectories: &[Trajectory],
    mode: DistortionMode,
) -> Result<f64, EvalError> {
    let n = emb.len();
    let mut seen: HashMap<(usize, usize), ()> = HashMap::new();
    let mut total = 0.0;
    let mut count = 0usize;
    for t in trajectories {
        for w in t.steps.windows(2) {
            let (a, b) = (w[0].state, w[1].state);
            if a >= n || b >= n {
                return Err(EvalError::MissingState(a.max(b)));
            }
            if a == b {
                continue;
            }
            if mode == DistortionMode::Unique && seen.insert((a.min(b), a.max(b)), ()).is_some() {
                continue;
            }
            total += row_distance(emb, a, b);
            count += 1;
        }
    }
    if count == 0 {
        return Ok(0.0);
    }
    let diam = diameter(emb);
    if !(diam > 0.0) {
        return Err(EvalError::ZeroDiameter);
    }
    Ok(total / count as f64 / diam)
}

/// Mean energy and edit-distance gaps to embedding neighbours, per `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreservationTable {
    pub k: Vec<usize>,
    pub energy_diff: Vec<f64>,
    pub ged_diff: Vec<f64>,
}

pub fn local_preservation(
    emb: &Embedding,
    energies: &[f64],
    graphs: &[StateGraph],
    ks: &[usize],
) -> Result<PreservationTable, EvalError> {
    let n = emb.len();
    if energies.len() != n || graphs.len() != n {
        return Err(EvalError::InvalidInput(format!(
            "{n} points, {} energies, {} structures",
            energies.len(),
            graphs.len()
        )));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k >= n) {
        return Err(EvalError::InvalidInput(format!("K = {k} must lie in 1..{n}")));
    }
    let kmax = ks.iter().copied().max().unwrap_or(0);
    // per state: prefix sums over its kmax nearest neighbours
    let prefixes: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<_, EvalError> {
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (row_distance(emb, i, j), j))
                .collect();
            let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if kmax < others.len() {
                others.select_nth_unstable_by(kmax - 1, by);
                others.truncate(kmax);
            }
            others.sort_unstable_by(by);
            let mut e = Vec::with_capacity(kmax + 1);
            let mut g = Vec::with_capacity(kmax + 1);
            e.push(0.0);
            g.push(0.0);
            for &(_, j) in &others {
                let ged = dp::ged(&graphs[i], &graphs[j])
                    .map_err(|err| EvalError::InvalidInput(err.to_string()))?;
                e.push(e.last().unwrap() + (energies[i] - energies[j]).abs());
                g.push(g.last().unwrap() + ged as f64);
            }
            Ok((e, g))
        })
        .collect::<Result<_, _>>()?;
    let mut energy_diff = Vec::with_capacity(ks.len());
    let mut ged_diff = Vec::with_capacity(ks.len());
    for &k in ks {
        let (se, sg) = prefixes
            .iter()
            .fold((0.0, 0.0), |(se, sg), (e, g)| (se + e[k] / k as f64, sg + g[k] / k as f64));
        energy_diff.push(se / n as f64);
        ged_diff.push(sg / n as f64);
    }
    Ok(PreservationTable {
        k: ks.to_vec(),
        energy_diff,
        ged_diff,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub avg_distortion: Option<f64>,
    pub distortion_mode: DistortionMode,
    pub preservation: PreservationTable,
    /// Settings that produced the report.
    pub config: BTreeMap<String, String>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `metric,K,value` rows; distortion has an empty `K`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,K,value\n");
        if let Some(d) = self.avg_distortion {
            let _ = writeln!(out, "avg_distortion,,{d:?}");
        }
        let p = &self.preservation;
        for (i, k) in p.k.iter().enumerate() {
            let _ = writeln!(out, "energy_diff,{k},{:?}", p.energy_diff[i]);
        }
        for (i, k) in p.k.iter().enumerate() {
            let _ = writeln!(out, "ged_diff,{k},{:?}", p.ged_diff[i]);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// Cluster id per point, or [`NOISE`].
    pub labels: Vec<i64>,
    pub n_clusters: usize,
    /// State id of each clustered point.
    pub state_ids: Vec<usize>,
    pub eps: f64,
    pub min_samples: usize,
}

impl ClusterResult {
    /// Re-keys the points to the given state ids, e.g. after filtering.
    pub fn with_state_ids(mut self, ids: Vec<usize>) -> Result<Self, EvalError> {
        if ids.len() != self.labels.len() {
            return Err(EvalError::InvalidInput("one state id per point required".into()));
        }
        self.state_ids = ids;
        Ok(self)
    }

    /// Labels indexed by state id over `n` states; unclustered states are noise.
    pub fn labels_by_state(&self, n: usize) -> Vec<i64> {
        let mut out = vec![NOISE; n];
        for (&id, &l) in self.state_ids.iter().zip(&self.labels) {
            if id < n {
                out[id] = l;
            }
        }
        out
    }
}

type Points = [Vec<f64>];

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Points within `eps` of each point, itself included, ascending by index.
fn region_queries(points: &Points, eps: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let dim = points.first().map_or(0, Vec::len);
    if dim == 0 || dim > 3 {
        return (0..n)
            .into_par_iter()
            .map(|i| (0..n).filter(|&j| euclid(&points[i], &points[j]) <= eps).collect())
            .collect();
    }
    let cell = |p: &[f64]| -> Vec<i64> { p.iter().map(|x| (x / eps).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(dim as u32))
        .map(|mut code| {
            (0..dim)
                .map(|_| {
                    let o = (code % 3) as i64 - 1;
                    code /= 3;
                    o
                })
                .collect()
        })
        .collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let home = cell(&points[i]);
            let mut found = Vec::new();
            for off in &offsets {
                let key: Vec<i64> = home.iter().zip(off).map(|(a, b)| a.saturating_add(*b)).collect();
                if let Some(members) = grid.get(&key) {
                    found.extend(members.iter().copied().filter(|&j| euclid(&points[i], &points[j]) <= eps));
                }
            }
            found.sort_unstable();
            found
        })
        .collect()
}

/// Density clustering. A point is core with at least `min_samples`
/// points (itself included) within `eps`; clusters are connected
/// components of core points numbered by their lowest index; a border
/// point joins the lowest-numbered cluster among its core neighbours.
pub fn dbscan(points: &Points, eps: f64, min_samples: usize) -> Result<ClusterResult, EvalError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(EvalError::InvalidInput("eps must be positive".into()));
    }
    if min_samples == 0 {
        return Err(EvalError::InvalidInput("min_samples must be at least 1".into()));
    }
    if let Some(d) = points.first().map(Vec::len) {
        if points.iter().any(|p| p.len() != d || p.iter().any(|x| !x.is_finite())) {
            return Err(EvalError::InvalidInput("points must share a dimension and be finite".into()));
        }
    }
    let n = points.len();
    let neighbors = region_queries(points, eps);
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_samples).collect();
    let mut labels = vec![NOISE; n];
    let mut next = 0i64;
    let mut queue = VecDeque::new();
    for seed in 0..n {
        if !core[seed] || labels[seed] != NOISE {
            continue;
        }
        labels[seed] = next;
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbors[p] {
                if core[q] && labels[q] == NOISE {
                    labels[q] = next;
                    queue.push_back(q);
                }
            }
        }
        next += 1;
    }
    for i in 0..n {
        if !core[i] {
            if let Some(l) = neighbors[i].iter().filter(|&&j| core[j]).map(|&j| labels[j]).min() {
                labels[i] = l;
            }
        }
    }
    Ok(ClusterResult {
        labels,
        n_clusters: next as usize,
        state_ids: (0..n).collect(),
        eps,
        min_samples,
    })
}

/// Rows of an embedding as point vectors.
pub fn embedding_points(emb: &Embedding, ids: &[usize]) -> Vec<Vec<f64>> {
    ids.iter().map(|&i| emb.point(i)).collect()
}

/// Distance of every point to its `k`-th nearest other point, ascending.
pub fn k_distance_curve(points: &Points, k: usize) -> Vec<f64> {
    let n = points.len();
    let mut curve: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| euclid(&points[i], &points[j]))
                .collect();
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d[k - 1]
        })
        .collect();
    curve.sort_by(f64::total_cmp);
    curve
}

/// Knee of the sorted k-distance curve. Curves without a knee return
/// their median, which callers should treat as advisory.
pub fn elbow_eps(points: &Points, k: usize) -> Result<f64, EvalError> {
    if k == 0 || points.len() <= k {
        return Err(EvalError::InvalidInput(format!(
            "need more than k = {k} points, got {}",
            points.len()
        )));
    }
    let curve = k_distance_curve(points, k);
    let i = linalg::chord_knee(&curve).unwrap_or(curve.len() / 2);
    Ok(curve[i])
}

/// States whose cumulative holding time reaches `threshold` seconds.
pub fn filter_by_cumulative_time(ss: &StateSpace, threshold: f64) -> Result<Vec<usize>, EvalError> {
    if !(threshold >= 0.0) {
        return Err(EvalError::InvalidInput("threshold must be non-negative".into()));
    }
    Ok(ss
        .cumulative_holding_time()
        .iter()
        .enumerate()
        .filter(|&(_, &t)| t >= threshold)
        .map(|(i, _)| i)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapRecord {
    pub cluster: i64,
    pub state: usize,
    pub dp: String,
    /// kcal/mol.
    pub energy: f64,
    /// Seconds.
    pub cumulative_time: f64,
    pub size: usize,
}

/// Minimum-energy member of each cluster (lowest id on ties), ordered by
/// cumulative time, longest first.
pub fn kinetic_traps(cr: &ClusterResult, ss: &StateSpace) -> Result<Vec<TrapRecord>, EvalError> {
    if cr.n_clusters == 0 {
        return Err(EvalError::InvalidInput("no clusters".into()));
    }
    let energies = ss.energies();
    let times = ss.cumulative_holding_time();
    let mut best: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
    for (&state, &label) in cr.state_ids.iter().zip(&cr.labels) {
        if label == NOISE {
            continue;
        }
        if state >= ss.len() {
            return Err(EvalError::MissingState(state));
        }
        let entry = best.entry(label).or_insert((state, 0));
        entry.1 += 1;
        let cur = entry.0;
        if energies[state] < energies[cur] || (energies[state] == energies[cur] && state < cur) {
            entry.0 = state;
        }
    }
    let mut rows: Vec<TrapRecord> = best
        .into_iter()
        .map(|(cluster, (state, size))| TrapRecord {
            cluster,
            state,
            dp: ss.structure(state).dp().to_string(),
            energy: energies[state],
            cumulative_time: times[state],
            size,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.cumulative_time
            .total_cmp(&a.cumulative_time)
            .then(a.cluster.cmp(&b.cluster))
    });
    Ok(rows)
}

/// `cluster,dp,cumulative_time,energy,state,size`.
pub fn traps_to_csv(rows: &[TrapRecord]) -> String {
    let mut out = String::from("cluster,dp,cumulative_time,energy,state,size\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:?},{:?},{},{}",
            r.cluster, r.dp, r.cumulative_time, r.energy, r.state, r.size
        );
    }
    out
}
