//! The end-to-end pipeline and its individual stages.
//!
//! Every stage reads and writes files in the formats of [`crate::artifacts`],
//! so `run_pipeline` is equivalent to running `simulate`, `flag`, `infer`,
//! `evaluate`, `syncdetect` and `h1` one after another on the same directory.
//!
//! Seeds: the pipeline seed `s` fans out to `derive_seed(s, [stage])` for
//! the stages `"simulate"`, `"segment"` and `"infer"`; below that each stage
//! derives its own substreams.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifacts::{self as art, ArtifactError};
use crate::ecosim::{
    build_world, run_simulation, AdLogEntry, ConfigError, Persona, RequestLogEntry, SharingGraph,
    SimConfig, SimError, World,
};
use crate::forest::HyperGrid;
use crate::ids::{AdvertiserId, TrackerId};
use crate::rng::derive_seed;
use crate::stattest::StatConfig;
use crate::syncdetect::{detect_cookie_sync, SyncError};
use crate::tomography::{
    adlog_corpus, collate, evaluate, fill_missing, flag_changes, group_documents,
    h1_similarity_matrix, inferred_edges, records_from_lines, run_inference, segment_records,
    AdvertiserReport, Evaluation, InferenceSettings, RecordLine, TomographyError,
};

pub const DEFAULT_FOLDS: usize = 4;
pub const DEFAULT_HOLDOUT_RUNS: u32 = 2;
pub const DEFAULT_ACCURACY_THRESHOLD: f64 = 0.60;

fn default_folds() -> usize {
    DEFAULT_FOLDS
}
fn default_holdout_runs() -> u32 {
    DEFAULT_HOLDOUT_RUNS
}
fn default_accuracy_threshold() -> f64 {
    DEFAULT_ACCURACY_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub sim: SimConfig,
    #[serde(default)]
    pub stats: StatConfig,
    #[serde(default)]
    pub grid: HyperGrid,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_holdout_runs")]
    pub holdout_runs: u32,
    #[serde(default = "default_accuracy_threshold")]
    pub accuracy_threshold: f64,
    /// Falls back to `sim.run.seed` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// A validated configuration with its world and persona population.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: PipelineConfig,
    pub world: World,
    pub personas: Vec<Persona>,
}

impl PipelineConfig {
    pub fn new(sim: SimConfig) -> Self {
        Self {
            sim,
            stats: StatConfig::default(),
            grid: HyperGrid::default(),
            folds: DEFAULT_FOLDS,
            holdout_runs: DEFAULT_HOLDOUT_RUNS,
            accuracy_threshold: DEFAULT_ACCURACY_THRESHOLD,
            seed: None,
            output_dir: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.sim.run.seed)
    }

    /// Pin the seed (an override wins over the file) so both seed fields agree.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        let s = seed.unwrap_or_else(|| self.seed());
        self.seed = Some(s);
        self.sim.run.seed = s;
        self
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// The configuration as embedded in reports: no output location.
    pub fn provenance(&self) -> Self {
        let mut c = self.clone().with_seed(None);
        c.output_dir = None;
        c
    }

    /// Validate the world and persona population only; enough to simulate.
    pub fn prepare_world(&self) -> Result<Prepared, ConfigError> {
        let config = self.clone().with_seed(None);
        let seed = config.seed();
        let world = build_world(&config.sim, derive_seed(seed, &["world".into()])).map_err(under_sim)?;
        let personas = world.personas(&config.sim.run.personas).map_err(under_sim)?;
        world.validate_personas(&personas).map_err(under_sim)?;
        if config.sim.run.runs == 0 {
            return Err(ConfigError::invalid("sim.run.runs", "must be at least 1"));
        }
        Ok(Prepared {
            config,
            world,
            personas,
        })
    }

    /// Full validation, including the cross-field analysis constraints.
    pub fn prepare(&self) -> Result<Prepared, ConfigError> {
        let prepared = self.prepare_world()?;
        let config = &prepared.config;
        if !prepared.personas.iter().any(|p| p.is_control) {
            return Err(ConfigError::invalid("sim.run.personas", "at least one control persona is required"));
        }
        let runs = config.sim.run.runs;
        if config.holdout_runs >= runs {
            return Err(ConfigError::invalid(
                "holdout_runs",
                format!("must be smaller than sim.run.runs ({runs}), got {}", config.holdout_runs),
            ));
        }
        let cv_runs = (runs - config.holdout_runs) as usize;
        if config.folds < 2 {
            return Err(ConfigError::invalid("folds", format!("must be at least 2, got {}", config.folds)));
        }
        if !cv_runs.is_multiple_of(config.folds) {
            return Err(ConfigError::invalid(
                "folds",
                format!(
                    "{} folds do not divide the {cv_runs} cross-validation runs (runs - holdout_runs)",
                    config.folds
                ),
            ));
        }
        if !(0.0..=1.0).contains(&config.accuracy_threshold) {
            return Err(ConfigError::Probability {
                path: "accuracy_threshold".into(),
                value: config.accuracy_threshold,
            });
        }
        config
            .stats
            .validate()
            .map_err(|e| ConfigError::invalid("stats", e.to_string()))?;
        config
            .grid
            .validate()
            .map_err(|e| ConfigError::invalid("grid", e.to_string()))?;
        Ok(prepared)
    }
}

fn under_sim(e: ConfigError) -> ConfigError {
    let prefix = |p: String| format!("sim.{p}");
    match e {
        ConfigError::Dangling { path, kind, id } => ConfigError::Dangling { path: prefix(path), kind, id },
        ConfigError::Probability { path, value } => ConfigError::Probability { path: prefix(path), value },
        ConfigError::Duplicate { path, kind, id } => ConfigError::Duplicate { path: prefix(path), kind, id },
        ConfigError::Invalid { path, message } => ConfigError::Invalid { path: prefix(path), message },
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Tomography(#[from] TomographyError),
    #[error(transparent)]
    Sync(#[from] SyncError),
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
}

impl PipelineError {
    /// 2 for configuration and stage-order problems, 3 for I/O and bad input data.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Sim(_) => 2,
            PipelineError::Tomography(t) => match t {
                TomographyError::UnknownPersona(_) | TomographyError::Text(_) => 3,
                _ => 2,
            },
            PipelineError::Artifact(_) | PipelineError::Sync(_) | PipelineError::Csv(_) => 3,
        }
    }
}

fn stage_seed(config: &PipelineConfig, stage: &str) -> u64 {
    derive_seed(config.seed(), &[stage.into()])
}

/// World → logs, persona list and planted graph.
pub fn stage_simulate(p: &Prepared, out: &Path) -> Result<(), PipelineError> {
    let sim = run_simulation(
        &p.world,
        &p.personas,
        p.config.sim.run.runs,
        stage_seed(&p.config, "simulate"),
    )?;
    art::write_jsonl(&out.join(art::ADLOG), &sim.ad_log)?;
    art::write_jsonl(&out.join(art::REQUESTLOG), &sim.request_log)?;
    art::write_jsonl(&out.join(art::BIDLOG), &sim.bid_log)?;
    art::write_jsonl(&out.join(art::OUTCOMES), &sim.outcomes)?;
    art::write_json(&out.join(art::PERSONAS), &p.personas)?;
    art::write_json(&out.join(art::TRUTH), p.world.graph())?;
    Ok(())
}

/// Ad log → one flagged vector record per (advertiser, persona, run).
pub fn stage_flag(p: &Prepared, input: &Path, out: &Path) -> Result<(), PipelineError> {
    let adlog: Vec<AdLogEntry> = art::read_jsonl(&input.join(art::ADLOG))?;
    let personas: Vec<Persona> = art::read_json(&input.join(art::PERSONAS))?;
    let corpus = adlog_corpus(&adlog);
    let records = collate(&adlog, &corpus, &personas)?;
    let records = fill_missing(
        records,
        &p.world.advertiser_ids(),
        &personas,
        p.config.sim.run.runs,
        &corpus,
    );
    let controls: Vec<_> = records.iter().filter(|r| r.is_control).cloned().collect();
    let flagged = flag_changes(&records, &controls, &p.config.stats)?;
    let lines: Vec<RecordLine> = flagged.iter().map(|r| r.to_line(&corpus)).collect();
    art::write_jsonl(&out.join(art::RECORDS), &lines)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub config: PipelineConfig,
    pub notes: Vec<String>,
    /// Feature order of every model.
    pub trackers: Vec<TrackerId>,
    pub holdout_runs: Vec<u32>,
    pub advertisers: Vec<AdvertiserReport>,
}

impl InferenceReport {
    pub fn inferred_edges(&self) -> BTreeSet<(TrackerId, AdvertiserId)> {
        inferred_edges(&self.advertisers)
    }

    /// One row per (advertiser, tracker).
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "advertiser",
            "best_params",
            "cv_accuracy",
            "holdout_accuracy",
            "flagged_fraction",
            "tracker",
            "gain",
            "inferred",
        ])?;
        for a in &self.advertisers {
            for g in &a.importance {
                w.write_record([
                    a.advertiser.to_string(),
                    a.best_params.to_string(),
                    art::format_float(a.cv_accuracy),
                    a.holdout_accuracy.map(art::format_float).unwrap_or_default(),
                    art::format_float(a.flagged_fraction),
                    g.tracker.to_string(),
                    art::format_float(g.gain),
                    a.inferred.contains(&g.tracker).to_string(),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub const IMPORTANCE_NOTE: &str =
    "tracker gains are normalized to sum to 1 per advertiser (all zero when no split has gain)";

/// Flagged records → per-advertiser models and inferred relationships.
pub fn stage_infer(p: &Prepared, input: &Path, out: &Path) -> Result<InferenceReport, PipelineError> {
    let lines: Vec<RecordLine> = art::read_jsonl(&input.join(art::RECORDS))?;
    let (_, records) = records_from_lines(lines)?;
    if let Some(r) = records.iter().find(|r| r.is_different_from_control.is_none()) {
        return Err(TomographyError::MissingFlag {
            advertiser: r.advertiser.clone(),
            persona: r.persona.clone(),
            run: r.run,
        }
        .into());
    }
    let c = &p.config;
    let seg = segment_records(&records, c.sim.run.runs, c.holdout_runs, stage_seed(c, "segment"))?;
    let trackers = p.world.tracker_ids();
    let settings = InferenceSettings {
        folds: c.folds,
        accuracy_threshold: c.accuracy_threshold,
        seed: stage_seed(c, "infer"),
    };
    let advertisers = run_inference(&seg.cv, &seg.holdout, &trackers, &c.grid, &settings)?;
    let report = InferenceReport {
        config: c.provenance(),
        notes: vec![IMPORTANCE_NOTE.to_string()],
        trackers,
        holdout_runs: seg.holdout_runs,
        advertisers,
    };
    art::write_json(&out.join(art::REPORT_JSON), &report)?;
    art::write_text(&out.join(art::REPORT_CSV), &report.to_csv()?)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub tracker: TrackerId,
    pub advertiser: AdvertiserId,
    pub inferred: bool,
    pub planted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    #[serde(flatten)]
    pub metrics: Evaluation,
    /// Union of inferred and planted edges, sorted.
    pub edges: Vec<EdgeRow>,
}

pub fn summarize(report: &InferenceReport, truth: &SharingGraph) -> EvaluationSummary {
    let inferred = report.inferred_edges();
    let planted = truth.edge_set();
    let edges = inferred
        .union(&planted)
        .map(|e| EdgeRow {
            tracker: e.0.clone(),
            advertiser: e.1.clone(),
            inferred: inferred.contains(e),
            planted: planted.contains(e),
        })
        .collect();
    EvaluationSummary {
        metrics: evaluate(&inferred, truth),
        edges,
    }
}

/// Report + planted graph → precision and recall.
pub fn stage_evaluate(input: &Path, out: &Path) -> Result<EvaluationSummary, PipelineError> {
    let report: InferenceReport = art::read_json(&input.join(art::REPORT_JSON))?;
    let truth: SharingGraph = art::read_json(&input.join(art::TRUTH))?;
    let summary = summarize(&report, &truth);
    art::write_json(&out.join(art::EVALUATION_JSON), &summary)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &summary.edges {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    art::write_text(
        &out.join(art::EVALUATION_CSV),
        std::str::from_utf8(&bytes).expect("csv output is utf-8"),
    )?;
    Ok(summary)
}

/// Request log → detected cookie-sync pairs.
pub fn stage_syncdetect(input: &Path, out: &Path) -> Result<(), PipelineError> {
    let log: Vec<RequestLogEntry> = art::read_jsonl(&input.join(art::REQUESTLOG))?;
    let report = detect_cookie_sync(&log)?;
    art::write_json(&out.join(art::SYNC_PAIRS), &report)?;
    Ok(())
}

/// Ad log → interest-group similarity matrix.
pub fn stage_h1(input: &Path, out: &Path) -> Result<(), PipelineError> {
    let adlog: Vec<AdLogEntry> = art::read_jsonl(&input.join(art::ADLOG))?;
    let personas: Vec<Persona> = art::read_json(&input.join(art::PERSONAS))?;
    let matrix = h1_similarity_matrix(&group_documents(&adlog, &personas)?)?;
    art::write_json(&out.join(art::H1_JSON), &matrix)?;
    art::write_text(&out.join(art::H1_CSV), &matrix.to_csv()?)?;
    Ok(())
}

/// Every stage, in order, inside `config.output_dir()`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<EvaluationSummary, PipelineError> {
    let p = config.prepare()?;
    let out = config.output_dir();
    log::info!("simulating into {}", out.display());
    stage_simulate(&p, &out)?;
    log::info!("flagging");
    stage_flag(&p, &out, &out)?;
    log::info!("inferring");
    stage_infer(&p, &out, &out)?;
    stage_syncdetect(&out, &out)?;
    stage_h1(&out, &out)?;
    stage_evaluate(&out, &out)
}

/// A ready-to-run configuration for a built-in world profile.
pub fn profile_config(name: &str) -> Option<PipelineConfig> {
    let sim = crate::ecosim::profiles::by_name(name)?;
    let mut c = PipelineConfig::new(sim);
    // nine runs: one held out leaves eight for four folds
    if c.sim.run.runs == 9 {
        c.holdout_runs = 1;
    }
    Some(c.with_seed(None))
}
