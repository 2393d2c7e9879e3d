//! Multistrand first-step-mode trajectory logs.
//!
//! The accepted grammar is line oriented:
//!
//! ```text
//! # comment
//! ----------------------------------------------
//!                         |   t[us]   | dG[kcal/mol]
//!     AGATCAGTGC+GCACTGATCT
//! [1] ....(.((((+.))))..... | 0.0000000 |    -1.737
//! ...
//! ```
//!
//! A header is a `+`-joined list of sequences; a record is
//! `[INT] DP | FLOAT | FLOAT` with time in microseconds and free energy in
//! kcal/mol. Rule lines, the column caption and `...` elision markers are
//! skipped. A trajectory ends when the bracketed index changes, when a new
//! header appears, or at a blank line that does not follow an elision marker.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dp::{self, DpError, SecondaryStructure, StrandSet};

const MICROSECONDS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: time {time} us precedes the previous step at {previous} us")]
    NonMonotoneTime {
        line: usize,
        time: f64,
        previous: f64,
    },
    #[error("log contains no trajectory records")]
    EmptyLog,
    #[error("line {line}: {source}")]
    Structure {
        line: usize,
        #[source]
        source: DpError,
    },
    #[error("unknown strand {0:?}")]
    UnknownStrand(String),
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Reactive,
    NonReactive,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub state: usize,
    /// Seconds.
    pub time: f64,
    /// kcal/mol, as reported by the simulator.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// The bracketed index from the log.
    pub index: u64,
    pub steps: Vec<TrajectoryStep>,
    pub outcome: Outcome,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        match (self.steps.first(), self.steps.last()) {
            (Some(a), Some(b)) => b.time - a.time,
            _ => 0.0,
        }
    }

    pub fn final_state(&self) -> Option<usize> {
        self.steps.last().map(|s| s.state)
    }

    pub fn state_ids(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.state).collect()
    }
}

/// How per-state empirical probabilities are estimated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilityMode {
    /// Visit count over total visits.
    #[default]
    Visits,
    /// Cumulative holding time over total holding time.
    HoldingTime,
}

/// Deduplicated states with their empirical statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    states: Vec<SecondaryStructure>,
    energies: Vec<f64>,
    visit_counts: Vec<u64>,
    departures: Vec<u64>,
    cumulative_holding_time: Vec<f64>,
    mean_holding_time: Vec<f64>,
    probabilities: Vec<f64>,
    mode: ProbabilityMode,
    index: HashMap<String, usize>,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn structures(&self) -> &[SecondaryStructure] {
        &self.states
    }

    pub fn structure(&self, id: usize) -> &SecondaryStructure {
        &self.states[id]
    }

    pub fn id_of(&self, dp: &str) -> Option<usize> {
        self.index.get(dp).copied()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn visit_counts(&self) -> &[u64] {
        &self.visit_counts
    }

    /// Visits that were followed by another step.
    pub fn departures(&self) -> &[u64] {
        &self.departures
    }

    /// Seconds.
    pub fn cumulative_holding_time(&self) -> &[f64] {
        &self.cumulative_holding_time
    }

    /// Seconds, averaged over visits that have a successor.
    pub fn mean_holding_time(&self) -> &[f64] {
        &self.mean_holding_time
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability_mode(&self) -> ProbabilityMode {
        self.mode
    }

    pub fn graphs(&self) -> Vec<dp::StateGraph> {
        self.states.iter().map(dp::to_graph).collect()
    }
}

/// Observed transitions between distinct states.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionGraph {
    // out[i] sorted by target
    out: Vec<Vec<(usize, u64)>>,
    mean_holding_time: Vec<f64>,
}

impl TransitionGraph {
    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    /// `(target, count)` pairs leaving `source`, ascending by target.
    pub fn successors(&self, source: usize) -> &[(usize, u64)] {
        &self.out[source]
    }

    pub fn count(&self, from: usize, to: usize) -> u64 {
        self.out[from]
            .binary_search_by_key(&to, |&(t, _)| t)
            .map(|k| self.out[from][k].1)
            .unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, c)| (i, j, c)))
    }

    /// Seconds.
    pub fn mean_holding_time(&self) -> &[f64] {
        &self.mean_holding_time
    }
}

/// Everything recovered from one log.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub strands: StrandSet,
    pub trajectories: Vec<Trajectory>,
    pub states: StateSpace,
    pub transitions: TransitionGraph,
}

/// One trajectory as raw `(dp, seconds, kcal/mol)` triples.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrajectory {
    pub index: u64,
    pub steps: Vec<(String, f64, f64)>,
}

pub fn parse_log(text: &str) -> Result<Dataset, LogError> {
    parse_log_with(text, ProbabilityMode::default())
}

pub fn parse_log_with(text: &str, mode: ProbabilityMode) -> Result<Dataset, LogError> {
    let mut strands: Option<StrandSet> = None;
    let mut raw: Vec<(RawTrajectory, Vec<usize>)> = Vec::new();
    let mut current: Option<(RawTrajectory, Vec<usize>)> = None;
    let mut pending_break = false;
    let mut after_elision = false;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if !after_elision {
                pending_break = true;
            }
            continue;
        }
        if trimmed.starts_with('#')
            || trimmed.chars().all(|c| c == '-' || c == '=')
            || trimmed.starts_with('|')
            || trimmed.contains("t[us]")
        {
            continue;
        }
        if trimmed.chars().all(|c| c == '.') {
            after_elision = true;
            continue;
        }
        after_elision = false;

        if !trimmed.starts_with('[') {
            if trimmed.chars().all(|c| matches!(c, 'A' | 'C' | 'G' | 'T' | '+')) {
                let set = StrandSet::from_header(trimmed)
                    .map_err(|source| LogError::Structure { line: lineno, source })?;
                if let Some(prev) = &strands {
                    if prev != &set {
                        return Err(LogError::MalformedRecord {
                            line: lineno,
                            reason: "header names a different strand set".into(),
                        });
                    }
                }
                strands = Some(set);
                pending_break = true;
                continue;
            }
            return Err(LogError::MalformedRecord {
                line: lineno,
                reason: format!("unrecognised line {trimmed:?}"),
            });
        }

        let set = strands.as_ref().ok_or_else(|| LogError::MalformedRecord {
            line: lineno,
            reason: "record before sequence header".into(),
        })?;
        let (index, dp, time_us, energy) = parse_record(trimmed, lineno)?;
        if time_us < 0.0 {
            return Err(LogError::MalformedRecord {
                line: lineno,
                reason: format!("negative time {time_us}"),
            });
        }
        // validated again when the state space is built; checked here for line context
        dp::parse_dp(dp, &set.lengths())
            .map_err(|source| LogError::Structure { line: lineno, source })?;

        let starts_new = match &current {
            None => true,
            Some((t, _)) => pending_break || t.index != index,
        };
        if starts_new {
            if let Some(done) = current.take() {
                raw.push(done);
            }
            current = Some((
                RawTrajectory {
                    index,
                    steps: Vec::new(),
                },
                Vec::new(),
            ));
        }
        pending_break = false;
        let (traj, lines) = current.as_mut().expect("current trajectory");
        if let Some(&(_, prev, _)) = traj.steps.last() {
            let prev_us = prev / MICROSECONDS;
            if time_us * MICROSECONDS < prev {
                return Err(LogError::NonMonotoneTime {
                    line: lineno,
                    time: time_us,
                    previous: prev_us,
                });
            }
        }
        traj.steps
            .push((dp.to_string(), time_us * MICROSECONDS, energy));
        lines.push(lineno);
    }
    if let Some(done) = current.take() {
        raw.push(done);
    }
    let strands = match strands {
        Some(s) if !raw.is_empty() => s,
        _ => return Err(LogError::EmptyLog),
    };
    let raw: Vec<RawTrajectory> = raw.into_iter().map(|(t, _)| t).collect();
    build_dataset(strands, raw, mode)
}

fn parse_record(line: &str, lineno: usize) -> Result<(u64, &str, f64, f64), LogError> {
    let bad = |reason: String| LogError::MalformedRecord {
        line: lineno,
        reason,
    };
    let close = line
        .find(']')
        .ok_or_else(|| bad("missing ']' after trajectory index".into()))?;
    let index: u64 = line[1..close]
        .trim()
        .parse()
        .map_err(|_| bad(format!("bad trajectory index {:?}", &line[1..close])))?;
    let fields: Vec<&str> = line[close + 1..].split('|').map(str::trim).collect();
    if fields.len() != 3 {
        return Err(bad(format!("expected 3 columns, found {}", fields.len())));
    }
    let time: f64 = fields[1]
        .parse()
        .map_err(|_| bad(format!("bad time {:?}", fields[1])))?;
    let energy: f64 = fields[2]
        .parse()
        .map_err(|_| bad(format!("bad energy {:?}", fields[2])))?;
    if !time.is_finite() || !energy.is_finite() {
        return Err(bad("non-finite value".into()));
    }
    Ok((index, fields[0], time, energy))
}

/// Deduplicates states, accumulates holding times and observed transitions.
///
/// Step `i` holds for `t[i+1] - t[i]`; the last step of a trajectory holds
/// for zero time and is excluded from the mean holding time. A state keeps
/// the energy of its first occurrence.
pub fn build_dataset(
    strands: StrandSet,
    raw: Vec<RawTrajectory>,
    mode: ProbabilityMode,
) -> Result<Dataset, LogError> {
    if raw.is_empty() || raw.iter().any(|t| t.steps.is_empty()) {
        return Err(LogError::EmptyLog);
    }
    let lengths = strands.lengths();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut states = Vec::new();
    let mut energies = Vec::new();
    let mut visit_counts: Vec<u64> = Vec::new();
    let mut departures: Vec<u64> = Vec::new();
    let mut cumulative: Vec<f64> = Vec::new();
    let mut edges: Vec<HashMap<usize, u64>> = Vec::new();
    let mut trajectories = Vec::with_capacity(raw.len());

    for traj in raw {
        let mut steps = Vec::with_capacity(traj.steps.len());
        for (dp, time, energy) in traj.steps {
            let id = match index.get(&dp) {
                Some(&id) => id,
                None => {
                    let s = dp::parse_dp(&dp, &lengths)
                        .map_err(|source| LogError::Structure { line: 0, source })?;
                    let id = states.len();
                    states.push(s);
                    energies.push(energy);
                    visit_counts.push(0);
                    departures.push(0);
                    cumulative.push(0.0);
                    edges.push(HashMap::new());
                    index.insert(dp, id);
                    id
                }
            };
            if let Some(prev) = steps.last() {
                let prev: &TrajectoryStep = prev;
                if time < prev.time {
                    return Err(LogError::NonMonotoneTime {
                        line: 0,
                        time: time / MICROSECONDS,
                        previous: prev.time / MICROSECONDS,
                    });
                }
            }
            visit_counts[id] += 1;
            steps.push(TrajectoryStep {
                state: id,
                time,
                energy,
            });
        }
        for w in steps.windows(2) {
            let (a, b) = (w[0], w[1]);
            cumulative[a.state] += b.time - a.time;
            departures[a.state] += 1;
            if a.state != b.state {
                *edges[a.state].entry(b.state).or_insert(0) += 1;
            }
        }
        trajectories.push(Trajectory {
            index: traj.index,
            steps,
            outcome: Outcome::Truncated,
        });
    }

    let mean: Vec<f64> = cumulative
        .iter()
        .zip(&departures)
        .map(|(&c, &d)| if d > 0 { c / d as f64 } else { 0.0 })
        .collect();
    let probabilities = probabilities(mode, &visit_counts, &cumulative);
    let out = edges
        .into_iter()
        .map(|m| {
            let mut row: Vec<(usize, u64)> = m.into_iter().collect();
            row.sort_unstable();
            row
        })
        .collect();

    Ok(Dataset {
        strands,
        trajectories,
        states: StateSpace {
            states,
            energies,
            visit_counts,
            departures,
            cumulative_holding_time: cumulative,
            mean_holding_time: mean.clone(),
            probabilities,
            mode,
            index,
        },
        transitions: TransitionGraph {
            out,
            mean_holding_time: mean,
        },
    })
}

fn probabilities(mode: ProbabilityMode, visits: &[u64], cumulative: &[f64]) -> Vec<f64> {
    let by_visits = || {
        let total: u64 = visits.iter().sum();
        visits.iter().map(|&v| v as f64 / total as f64).collect()
    };
    match mode {
        ProbabilityMode::Visits => by_visits(),
        ProbabilityMode::HoldingTime => {
            let total: f64 = cumulative.iter().sum();
            if total > 0.0 {
                cumulative.iter().map(|&c| c / total).collect()
            } else {
                by_visits()
            }
        }
    }
}

/// A predicate on the final structure of a trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeRule {
    /// Every base is paired.
    FullDuplex,
    /// The named strand no longer shares a complex with all other strands.
    Dissociated { strand: String },
    /// The final structure equals this dot-parenthesis string.
    DpPattern(String),
}

impl OutcomeRule {
    fn is_reactive_rule(&self) -> bool {
        !matches!(self, OutcomeRule::Dissociated { .. })
    }

    fn holds(&self, s: &SecondaryStructure, strands: &StrandSet) -> Result<bool, LogError> {
        Ok(match self {
            OutcomeRule::FullDuplex => s.is_fully_paired(),
            OutcomeRule::DpPattern(p) => s.dp() == p,
            OutcomeRule::Dissociated { strand } => {
                let k = strands
                    .position(strand)
                    .ok_or_else(|| LogError::UnknownStrand(strand.clone()))?;
                dp::strand_complexes(s)
                    .iter()
                    .find(|c| c.contains(&k))
                    .is_some_and(|c| c.len() < s.strand_count())
            }
        })
    }
}

/// Reactive when a full-duplex or pattern rule holds at the final step,
/// non-reactive when a dissociation rule holds, truncated otherwise.
pub fn classify_outcome(
    t: &Trajectory,
    states: &StateSpace,
    strands: &StrandSet,
    rules: &[OutcomeRule],
) -> Result<Outcome, LogError> {
    for rule in rules {
        if let OutcomeRule::Dissociated { strand } = rule {
            if strands.position(strand).is_none() {
                return Err(LogError::UnknownStrand(strand.clone()));
            }
        }
    }
    let Some(last) = t.final_state() else {
        return Ok(Outcome::Truncated);
    };
    let s = states.structure(last);
    for rule in rules.iter().filter(|r| r.is_reactive_rule()) {
        if rule.holds(s, strands)? {
            return Ok(Outcome::Reactive);
        }
    }
    for rule in rules.iter().filter(|r| !r.is_reactive_rule()) {
        if rule.holds(s, strands)? {
            return Ok(Outcome::NonReactive);
        }
    }
    Ok(Outcome::Truncated)
}

impl Dataset {
    /// Sets every trajectory's outcome from `rules`.
    pub fn classify(&mut self, rules: &[OutcomeRule]) -> Result<(), LogError> {
        for i in 0..self.trajectories.len() {
            let outcome =
                classify_outcome(&self.trajectories[i], &self.states, &self.strands, rules)?;
            self.trajectories[i].outcome = outcome;
        }
        Ok(())
    }

    /// Rebuilds the dataset from subsampled trajectories.
    pub fn subsampled(&self, dt: f64) -> Result<Dataset, LogError> {
        let raw = self
            .trajectories
            .iter()
            .map(|t| {
                let t = subsample(t, dt);
                RawTrajectory {
                    index: t.index,
                    steps: t
                        .steps
                        .iter()
                        .map(|s| (self.states.structure(s.state).dp().to_string(), s.time, s.energy))
                        .collect(),
                }
            })
            .collect();
        let mut out = build_dataset(self.strands.clone(), raw, self.states.mode)?;
        for (t, src) in out.trajectories.iter_mut().zip(&self.trajectories) {
            t.outcome = src.outcome;
        }
        Ok(out)
    }
}

/// Keeps the first step of every interval `[k*dt, (k+1)*dt)` plus the final
/// step. `dt` is in seconds and must be positive.
pub fn subsample(t: &Trajectory, dt: f64) -> Trajectory {
    assert!(dt > 0.0, "subsampling interval must be positive");
    let mut steps: Vec<TrajectoryStep> = Vec::new();
    let mut last_bin = None;
    for step in &t.steps {
        let bin = (step.time / dt).floor() as i64;
        if last_bin != Some(bin) {
            steps.push(*step);
            last_bin = Some(bin);
        }
    }
    if let (Some(last), Some(kept)) = (t.steps.last(), steps.last()) {
        if kept != last {
            steps.push(*last);
        }
    }
    Trajectory {
        index: t.index,
        steps,
        outcome: t.outcome,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub total: usize,
    pub reactive: usize,
    pub non_reactive: usize,
    pub truncated: usize,
    pub fraction_reactive: f64,
    /// Mean duration of reactive trajectories, seconds.
    pub mean_reaction_time: Option<f64>,
}

pub fn stats(trajectories: &[Trajectory]) -> TrajectoryStats {
    let count = |o| trajectories.iter().filter(|t| t.outcome == o).count();
    let reactive = count(Outcome::Reactive);
    let times: Vec<f64> = trajectories
        .iter()
        .filter(|t| t.outcome == Outcome::Reactive)
        .map(Trajectory::duration)
        .collect();
    TrajectoryStats {
        total: trajectories.len(),
        reactive,
        non_reactive: count(Outcome::NonReactive),
        truncated: count(Outcome::Truncated),
        fraction_reactive: if trajectories.is_empty() {
            0.0
        } else {
            reactive as f64 / trajectories.len() as f64
        },
        mean_reaction_time: (!times.is_empty())
            .then(|| times.iter().sum::<f64>() / times.len() as f64),
    }
}

/// Writes trajectories back in log format. Times are printed in
/// microseconds with seven decimals, so re-parsing and re-writing is
/// byte-stable.
pub fn write_log(data: &Dataset) -> String {
    let mut out = String::new();
    out.push_str(&data.strands.header());
    out.push('\n');
    for (k, t) in data.trajectories.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for s in &t.steps {
            let _ = writeln!(
                out,
                "[{}] {} | {:.7} | {}",
                t.index,
                data.states.structure(s.state).dp(),
                s.time / MICROSECONDS,
                s.energy
            );
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct StateDoc {
    id: usize,
    dp: String,
    energy: f64,
    visits: u64,
    departures: u64,
    cumulative_time: f64,
    mean_holding_time: f64,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    from: usize,
    to: usize,
    count: u64,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryDoc {
    index: u64,
    outcome: Outcome,
    states: Vec<usize>,
    times: Vec<f64>,
    energies: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DatasetDoc {
    strands: Vec<dp::Strand>,
    probability_mode: ProbabilityMode,
    time_unit: String,
    energy_unit: String,
    states: Vec<StateDoc>,
    transitions: Vec<EdgeDoc>,
    trajectories: Vec<TrajectoryDoc>,
}

impl Dataset {
    pub fn to_json(&self) -> String {
        let s = &self.states;
        let doc = DatasetDoc {
            strands: self.strands.strands().to_vec(),
            probability_mode: s.mode,
            time_unit: "s".into(),
            energy_unit: "kcal/mol".into(),
            states: (0..s.len())
                .map(|i| StateDoc {
                    id: i,
                    dp: s.states[i].dp().to_string(),
                    energy: s.energies[i],
                    visits: s.visit_counts[i],
                    departures: s.departures[i],
                    cumulative_time: s.cumulative_holding_time[i],
                    mean_holding_time: s.mean_holding_time[i],
                    p: s.probabilities[i],
                })
                .collect(),
            transitions: self
                .transitions
                .edges()
                .map(|(from, to, count)| EdgeDoc { from, to, count })
                .collect(),
            trajectories: self
                .trajectories
                .iter()
                .map(|t| TrajectoryDoc {
                    index: t.index,
                    outcome: t.outcome,
                    states: t.steps.iter().map(|s| s.state).collect(),
                    times: t.steps.iter().map(|s| s.time).collect(),
                    energies: t.steps.iter().map(|s| s.energy).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("dataset serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, crate::Error> {
        let doc: DatasetDoc = serde_json::from_str(text)?;
        let strands = StrandSet::new(doc.strands)?;
        let lengths = strands.lengths();
        let n = doc.states.len();
        let inconsistent = |m: String| crate::Error::from(LogError::Inconsistent(m));

        let mut states = Vec::with_capacity(n);
        let mut index = HashMap::with_capacity(n);
        for (k, st) in doc.states.iter().enumerate() {
            if st.id != k {
                return Err(inconsistent(format!("state {} listed at position {k}", st.id)));
            }
            let s = dp::parse_dp(&st.dp, &lengths)?;
            if index.insert(st.dp.clone(), k).is_some() {
                return Err(inconsistent(format!("duplicate state {}", st.dp)));
            }
            states.push(s);
        }
        let mut out = vec![Vec::new(); n];
        for e in &doc.transitions {
            if e.from >= n || e.to >= n {
                return Err(inconsistent(format!("edge {}->{} out of range", e.from, e.to)));
            }
            out[e.from].push((e.to, e.count));
        }
        for row in &mut out {
            row.sort_unstable();
        }
        let mut trajectories = Vec::with_capacity(doc.trajectories.len());
        for t in doc.trajectories {
            if t.states.len() != t.times.len() || t.states.len() != t.energies.len() {
                return Err(inconsistent(format!("trajectory {} has ragged columns", t.index)));
            }
            if let Some(&bad) = t.states.iter().find(|&&s| s >= n) {
                return Err(inconsistent(format!("trajectory state {bad} out of range")));
            }
            trajectories.push(Trajectory {
                index: t.index,
                outcome: t.outcome,
                steps: t
                    .states
                    .iter()
                    .zip(&t.times)
                    .zip(&t.energies)
                    .map(|((&state, &time), &energy)| TrajectoryStep {
                        state,
                        time,
                        energy,
                    })
                    .collect(),
            });
        }
        let mean: Vec<f64> = doc.states.iter().map(|s| s.mean_holding_time).collect();
        Ok(Dataset {
            strands,
            trajectories,
            transitions: TransitionGraph {
                out,
                mean_holding_time: mean.clone(),
            },
            states: StateSpace {
                states,
                energies: doc.states.iter().map(|s| s.energy).collect(),
                visit_counts: doc.states.iter().map(|s| s.visits).collect(),
                departures: doc.states.iter().map(|s| s.departures).collect(),
                cumulative_holding_time: doc.states.iter().map(|s| s.cumulative_time).collect(),
                mean_holding_time: mean,
                probabilities: doc.states.iter().map(|s| s.p).collect(),
                mode: doc.probability_mode,
                index,
            },
        })
    }
}
