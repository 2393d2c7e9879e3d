use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};

use dnascape::distances::{self, ForestConfig, NeighborTable, SearchMode, WeightTable};
use dnascape::embed::{
    self, phate, stress_embed, DiffusionTime, Embedding, PhateConfig, PhateInput, StressConfig,
    StressInit,
};
use dnascape::eval::{self, ClusterResult, DistortionMode, MetricsReport, TrapRecord};
use dnascape::multistrand::{self, Dataset, OutcomeRule, ProbabilityMode};
use dnascape::scattering::{self, Aggregation, FeatureMatrix, Order, ScatteringConfig};
use dnascape::ViewerBundle;

use crate::settings::Settings;
use crate::*;

/// An error with the exit status it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type Outcome<T = ()> = Result<T, Failure>;

trait Tag<T> {
    /// Bad flags, unreadable or malformed inputs, invalid settings.
    fn input(self) -> Outcome<T>;
    /// Everything the user could not have caused.
    fn internal(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Tag<T> for Result<T, E> {
    fn input(self) -> Outcome<T> {
        self.map_err(|e| Failure {
            code: 1,
            error: e.into(),
        })
    }

    fn internal(self) -> Outcome<T> {
        self.map_err(|e| Failure {
            code: 2,
            error: e.into(),
        })
    }
}

fn input_error(msg: String) -> Failure {
    Failure {
        code: 1,
        error: anyhow!(msg),
    }
}

pub fn run(cli: &Cli) -> Outcome {
    let settings = Settings::load(cli.preset, cli.config.as_deref()).input()?;
    let threads = settings.pick_opt(cli.threads, "threads").input()?;
    if let Some(n) = threads {
        if n == 0 {
            return Err(input_error("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .internal()?;
    }
    let seed: u64 = settings.pick(cli.seed, "seed", 0).input()?;
    let ctx = Ctx { settings, seed };
    match &cli.command {
        Command::Parse(a) => ctx.parse(a),
        Command::Stats(a) => ctx.stats(a),
        Command::Scatter(a) => ctx.scatter(a),
        Command::Distances(a) => ctx.distances(a),
        Command::Embed(a) => ctx.embed(a),
        Command::Eval(a) => ctx.eval(a),
        Command::Cluster(a) => ctx.cluster(a),
        Command::Export(a) => ctx.export(a),
    }
}

struct Ctx {
    settings: Settings,
    seed: u64,
}

fn read_text(path: &Path) -> Outcome<String> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .input()
}

fn read_bytes(path: &Path) -> Outcome<Vec<u8>> {
    fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .input()
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Outcome {
    match path {
        Some(p) => fs::write(p, bytes)
            .with_context(|| format!("writing {}", p.display()))
            .internal(),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).internal()
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

pub fn parse_rule(text: &str) -> anyhow::Result<OutcomeRule> {
    if text == "full-duplex" {
        return Ok(OutcomeRule::FullDuplex);
    }
    if let Some(strand) = text.strip_prefix("dissociated:") {
        return Ok(OutcomeRule::Dissociated {
            strand: strand.to_string(),
        });
    }
    if let Some(dp) = text.strip_prefix("dp:") {
        return Ok(OutcomeRule::DpPattern(dp.to_string()));
    }
    bail!("unknown outcome rule {text:?}; expected full-duplex, dissociated:STRAND or dp:STRUCTURE")
}

impl Ctx {
    fn load_dataset(
        &self,
        path: &Path,
        probability: Option<ProbabilityArg>,
        rules: &[String],
    ) -> Outcome<Dataset> {
        let text = read_text(path)?;
        let mode = match self
            .settings
            .pick_enum(probability, "probability", ProbabilityArg::Visits)
            .input()?
        {
            ProbabilityArg::Visits => ProbabilityMode::Visits,
            ProbabilityArg::HoldingTime => ProbabilityMode::HoldingTime,
        };
        let mut data = if text.trim_start().starts_with('{') {
            Dataset::from_json(&text)
                .with_context(|| format!("in {}", path.display()))
                .input()?
        } else {
            multistrand::parse_log_with(&text, mode)
                .with_context(|| format!("in {}", path.display()))
                .input()?
        };
        let rules: Vec<String> = if rules.is_empty() {
            self.settings
                .raw("rule")
                .map(|r| r.split(',').map(|s| s.trim().to_string()).collect())
                .unwrap_or_default()
        } else {
            rules.to_vec()
        };
        if !rules.is_empty() {
            let parsed = rules
                .iter()
                .map(|r| parse_rule(r))
                .collect::<anyhow::Result<Vec<_>>>()
                .input()?;
            data.classify(&parsed).input()?;
        }
        Ok(data)
    }

    fn dataset(&self, input: &DatasetInput) -> Outcome<Dataset> {
        self.load_dataset(&input.dataset, input.probability, &input.rules)
    }

    fn parse(&self, a: &ParseArgs) -> Outcome {
        let mut data = self.dataset(&a.input)?;
        if let Some(dt) = self.settings.pick_opt(a.dt, "dt").input()? {
            if !(dt > 0.0) {
                return Err(input_error("--dt must be positive".into()));
            }
            data = data.subsampled(dt).input()?;
        }
        let mut text = data.to_json();
        text.push('\n');
        emit(a.output.as_deref(), text.as_bytes())
    }

    fn stats(&self, a: &StatsArgs) -> Outcome {
        #[derive(Serialize)]
        struct Summary {
            strands: Vec<String>,
            states: usize,
            transitions: usize,
            trajectories: multistrand::TrajectoryStats,
        }
        let data = self.dataset(&a.input)?;
        let summary = Summary {
            strands: data.strands.strands().iter().map(|s| s.sequence.clone()).collect(),
            states: data.states.len(),
            transitions: data.transitions.edge_count(),
            trajectories: multistrand::stats(&data.trajectories),
        };
        emit(a.output.as_deref(), to_json(&summary).as_bytes())
    }

    fn scattering_config(&self, a: Option<&ScatterArgs>) -> Outcome<ScatteringConfig> {
        let s = &self.settings;
        let d = ScatteringConfig::default();
        let order: u8 = s.pick(a.and_then(|a| a.order), "order", 1).input()?;
        let order = match order {
            1 => Order::First,
            2 => Order::Second,
            o => return Err(input_error(format!("--order must be 1 or 2, got {o}"))),
        };
        let moments = s
            .pick_list(a.map(|a| a.moments.clone()).unwrap_or_default(), "moments")
            .input()?;
        let cfg = ScatteringConfig {
            scales: s.pick(a.and_then(|a| a.scales), "scales", d.scales).input()?,
            lowpass_power: s
                .pick(a.and_then(|a| a.lowpass_power), "lowpass_power", d.lowpass_power)
                .input()?,
            order,
            aggregation: moments.map_or(Aggregation::NodeWise, Aggregation::Moments),
        };
        cfg.validate().input()?;
        Ok(cfg)
    }

    fn features(&self, data: &Dataset, cfg: &ScatteringConfig) -> Outcome<FeatureMatrix> {
        scattering::scatter_all(&data.states.graphs(), cfg).input()
    }

    fn scatter(&self, a: &ScatterArgs) -> Outcome {
        let data = self.dataset(&a.input)?;
        let cfg = self.scattering_config(Some(a))?;
        let features = self.features(&data, &cfg)?;
        match self.settings.pick_enum(a.format, "format", FeatureFormat::Bin).input()? {
            FeatureFormat::Csv => emit(a.output.as_deref(), features.to_csv().as_bytes()),
            FeatureFormat::Bin => {
                let out = a
                    .output
                    .as_deref()
                    .ok_or_else(|| input_error("--output is required for binary features".into()))?;
                emit(Some(out), &features.to_bytes())?;
                let mut sidecar = features.sidecar_json();
                sidecar.push('\n');
                emit(Some(&with_suffix(out, ".json")), sidecar.as_bytes())
            }
        }
    }

    fn distances(&self, a: &DistancesArgs) -> Outcome {
        let s = &self.settings;
        let data = self.dataset(&a.input)?;
        let k: usize = s.pick(a.k, "k", 100).input()?;
        if k == 0 {
            return Err(input_error("--k must be at least 1".into()));
        }
        let mut table = match a.metric {
            MetricArg::Mpt => {
                let graph = distances::mpt_graph(&data.transitions, &data.states);
                let sources: Vec<usize> = (0..data.states.len()).collect();
                distances::mpt_knn(&graph, &sources, k)
            }
            MetricArg::Ged => {
                let n = data.states.len();
                let forest = ForestConfig {
                    trees: s.pick(a.trees, "trees", 16).input()?,
                    leaf_size: s.pick(a.leaf_size, "leaf_size", 32).input()?,
                    search_k: None,
                    seed: self.seed,
                };
                if forest.trees == 0 || forest.leaf_size == 0 {
                    return Err(input_error("--trees and --leaf-size must be positive".into()));
                }
                let mode = match s.pick_enum(a.search, "search", SearchArg::Auto).input()? {
                    SearchArg::Exact => SearchMode::Exact,
                    SearchArg::Forest => SearchMode::RandomProjection(forest),
                    SearchArg::Auto => match SearchMode::auto(n, self.seed) {
                        SearchMode::Exact => SearchMode::Exact,
                        SearchMode::RandomProjection(_) => SearchMode::RandomProjection(forest),
                    },
                };
                distances::ged_knn(&data.states.graphs(), k, mode).input()?
            }
        };
        let symmetrize = a.symmetrize || s.pick(None, "symmetrize", false).input()?;
        if symmetrize {
            table = table.symmetrized();
        }
        emit(Some(&a.output), &table.to_bytes())
    }

    fn read_table(&self, path: &Path) -> Outcome<NeighborTable> {
        NeighborTable::from_bytes(&read_bytes(path)?)
            .with_context(|| format!("in {}", path.display()))
            .input()
    }

    fn read_embedding(&self, path: &Path) -> Outcome<Embedding> {
        Embedding::from_csv(&read_text(path)?)
            .with_context(|| format!("in {}", path.display()))
            .input()
    }

    fn embed(&self, a: &EmbedArgs) -> Outcome {
        let s = &self.settings;
        let data = self.dataset(&a.input)?;
        let n = data.states.len();
        let (embedding, report) = match a.method {
            MethodArg::Phate => {
                let features = match &a.features {
                    Some(path) => {
                        let sidecar = read_text(&with_suffix(path, ".json"))?;
                        FeatureMatrix::from_parts(&read_bytes(path)?, &sidecar)
                            .with_context(|| format!("in {}", path.display()))
                            .input()?
                    }
                    None => self.features(&data, &self.scattering_config(None)?)?,
                };
                if features.rows != n {
                    return Err(input_error(format!(
                        "{} feature rows for {n} states",
                        features.rows
                    )));
                }
                let d = PhateConfig::default();
                let t = match s.pick_opt(a.t, "t").input()? {
                    Some(t) => DiffusionTime::Fixed(t),
                    None => DiffusionTime::Auto {
                        max: s.pick(a.t_max, "t_max", 100).input()?,
                    },
                };
                let cfg = PhateConfig {
                    n_neighbors: s.pick(a.knn, "knn", d.n_neighbors).input()?,
                    decay: s.pick(a.decay, "decay", d.decay).input()?,
                    n_landmarks: s.pick(a.n_landmarks, "n_landmarks", d.n_landmarks).input()?,
                    t,
                    out_dim: 2,
                    mds_max_iter: s.pick(a.mds_max_iter, "mds_max_iter", d.mds_max_iter).input()?,
                    mds_tol: d.mds_tol,
                    seed: self.seed,
                };
                let matrix = features.to_matrix();
                let out = phate(PhateInput::Features(&matrix), &cfg).input()?;
                let report = serde_json::json!({
                    "method": "phate",
                    "config": cfg,
                    "t": out.t,
                    "entropy": out.entropy,
                    "landmarks": out.landmarks,
                    "mds_iterations": out.mds_iterations,
                    "final_stress": out.final_stress,
                    "converged": out.converged,
                    "provenance": out.embedding.provenance,
                });
                (out.embedding, report)
            }
            MethodArg::Stress => {
                let (Some(mpt), Some(ged)) = (&a.mpt, &a.ged) else {
                    return Err(input_error("stress embedding needs --mpt and --ged tables".into()));
                };
                let mpt = self.read_table(mpt)?;
                let ged = self.read_table(ged)?;
                if mpt.len() != n || ged.len() != n {
                    return Err(input_error(format!(
                        "tables have {} and {} rows for {n} states",
                        mpt.len(),
                        ged.len()
                    )));
                }
                let d = StressConfig::default();
                let cfg = StressConfig {
                    mpt_weight: s.pick(a.delta, "delta", d.mpt_weight).input()?,
                    ged_weight: s.pick(a.epsilon, "epsilon", d.ged_weight).input()?,
                    learning_rate: s.pick(a.learning_rate, "learning_rate", d.learning_rate).input()?,
                    max_iter: s.pick(a.max_iter, "max_iter", d.max_iter).input()?,
                    tol: d.tol,
                    scale_targets: a.scale_targets || s.pick(None, "scale_targets", false).input()?,
                    dim: 2,
                };
                let init = match &a.init {
                    Some(path) => StressInit::Coords(self.read_embedding(path)?.coords),
                    None => StressInit::Random {
                        seed: self.seed,
                        scale: 1.0,
                    },
                };
                let w = WeightTable::from_probabilities(&mpt, data.states.probabilities());
                let out = stress_embed(&mpt, &w, &ged, &cfg, &init).input()?;
                let report = serde_json::json!({
                    "method": "stress",
                    "config": cfg,
                    "iterations": out.iterations,
                    "converged": out.converged,
                    "initial_loss": out.loss_trace.first(),
                    "final_loss": out.loss_trace.last(),
                    "provenance": out.embedding.provenance,
                });
                (out.embedding, report)
            }
        };
        emit(a.output.as_deref(), embedding.to_csv().as_bytes())?;
        if let Some(out) = &a.output {
            emit(Some(&with_suffix(out, ".json")), to_json(&report).as_bytes())?;
        }
        Ok(())
    }

    fn eval(&self, a: &EvalArgs) -> Outcome {
        let s = &self.settings;
        let data = self.dataset(&a.input)?;
        let emb = self.read_embedding(&a.embedding)?;
        let n = data.states.len();
        if emb.len() != n {
            return Err(input_error(format!("embedding has {} rows for {n} states", emb.len())));
        }
        let ks = match s.pick_list(a.ks.clone(), "K").input()? {
            Some(ks) => ks,
            None => [10, 50, 100].into_iter().filter(|&k| k < n).collect(),
        };
        let mode = match s.pick_enum(a.mode, "mode", ModeArg::PerOccurrence).input()? {
            ModeArg::PerOccurrence => DistortionMode::PerOccurrence,
            ModeArg::Unique => DistortionMode::Unique,
        };
        let distortion = eval::avg_distortion_with(&emb, &data.trajectories, mode).input()?;
        let preservation =
            eval::local_preservation(&emb, data.states.energies(), &data.states.graphs(), &ks)
                .input()?;
        let mut config = BTreeMap::new();
        config.insert(
            "K".to_string(),
            ks.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        );
        config.insert("states".to_string(), n.to_string());
        config.insert(
            "embedding_sha256".to_string(),
            embed::digest(emb.to_csv().as_bytes()),
        );
        let report = MetricsReport {
            avg_distortion: Some(distortion),
            distortion_mode: mode,
            preservation,
            config,
        };
        if let Some(path) = &a.csv {
            emit(Some(path), report.to_csv().as_bytes())?;
        }
        let mut text = report.to_json();
        text.push('\n');
        emit(a.output.as_deref(), text.as_bytes())
    }

    fn cluster(&self, a: &ClusterArgs) -> Outcome {
        let s = &self.settings;
        let data = self.dataset(&a.input)?;
        let emb = self.read_embedding(&a.embedding)?;
        if emb.len() != data.states.len() {
            return Err(input_error(format!(
                "embedding has {} rows for {} states",
                emb.len(),
                data.states.len()
            )));
        }
        let threshold: f64 = s.pick(a.threshold, "threshold", 0.0).input()?;
        let min_samples: usize = s.pick(a.min_samples, "min_samples", 4).input()?;
        let ids = eval::filter_by_cumulative_time(&data.states, threshold).input()?;
        let points = eval::embedding_points(&emb, &ids);
        let (eps, eps_source) = match s.pick_opt(a.eps, "eps").input()? {
            Some(e) => (e, EpsSource::Given),
            None => (
                eval::elbow_eps(&points, min_samples.max(1))
                    .context("choosing eps by the elbow rule")
                    .input()?,
                EpsSource::Elbow,
            ),
        };
        let result = eval::dbscan(&points, eps, min_samples)
            .input()?
            .with_state_ids(ids)
            .internal()?;
        let traps = if result.n_clusters > 0 {
            eval::kinetic_traps(&result, &data.states).internal()?
        } else {
            Vec::new()
        };
        if let Some(path) = &a.traps_csv {
            emit(Some(path), eval::traps_to_csv(&traps).as_bytes())?;
        }
        let report = ClusterReport {
            threshold,
            eps_source,
            result,
            traps,
        };
        emit(a.output.as_deref(), to_json(&report).as_bytes())
    }

    fn export(&self, a: &ExportArgs) -> Outcome {
        if let Some(path) = &a.bundle {
            let bundle = ViewerBundle::from_json(&read_text(path)?)
                .with_context(|| format!("in {}", path.display()))
                .input()?;
            return emit(a.output.as_deref(), bundle.to_json().as_bytes());
        }
        let (Some(dataset), Some(embedding)) = (&a.dataset, &a.embedding) else {
            return Err(input_error("export needs DATASET and --embedding, or --bundle".into()));
        };
        let data = self.load_dataset(dataset, a.probability, &a.rules)?;
        let emb = self.read_embedding(embedding)?;
        let clusters = match &a.clusters {
            Some(path) => Some(
                serde_json::from_str::<ClusterReport>(&read_text(path)?)
                    .with_context(|| format!("in {}", path.display()))
                    .input()?,
            ),
            None => None,
        };
        let reaction = match &a.reaction {
            Some(r) => r.clone(),
            None => self.settings.raw("reaction").unwrap_or("unnamed").to_string(),
        };
        let bundle = ViewerBundle::build(
            &reaction,
            &data,
            &emb,
            clusters.as_ref().map(|c| (&c.result, c.traps.as_slice())),
        )
        .input()?;
        emit(a.output.as_deref(), bundle.to_json().as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsSource {
    Given,
    Elbow,
}

/// Output of `cluster`, read back by `export`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterReport {
    pub threshold: f64,
    pub eps_source: EpsSource,
    pub result: ClusterResult,
    pub traps: Vec<TrapRecord>,
}
