//! Metric registry, the per-boundary evaluation loop and the evolution table.

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;

use chrono::NaiveDate;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cst::{self, Aggregate, Language, ParsedCommit, SkipReason};
use crate::repo::{RepoError, RepoInput, RepoReader, RepositoryHandle};
use crate::sampler::{self, CommitSample, DateUnit, SampleError, SamplingWindow};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Repo(#[from] RepoError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("metric '{0}' is already registered")]
    DuplicateMetricName(String),
    #[error("metric names must not be empty")]
    EmptyMetricName,
    #[error("no metrics registered")]
    EmptyRegistry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    Numeric,
    Categorical,
}

/// Name and presentation options of a metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricDef {
    pub name: String,
    pub kind: MetricKind,
    pub aggregate_hint: Option<Aggregate>,
    pub show_version_chart: bool,
}

impl MetricDef {
    pub fn numeric(name: impl Into<String>) -> Self {
        MetricDef {
            name: name.into(),
            kind: MetricKind::Numeric,
            aggregate_hint: None,
            show_version_chart: false,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        MetricDef {
            kind: MetricKind::Categorical,
            ..MetricDef::numeric(name)
        }
    }

    pub fn with_aggregate(mut self, aggregate: Aggregate) -> Self {
        self.aggregate_hint = Some(aggregate);
        self
    }

    pub fn with_version_chart(mut self) -> Self {
        self.show_version_chart = true;
        self
    }
}

/// What an evaluator produced for one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricValue {
    Number(f64),
    Labels(Vec<String>),
}

impl From<f64> for MetricValue {
    fn from(v: f64) -> Self {
        MetricValue::Number(v)
    }
}

impl From<usize> for MetricValue {
    fn from(v: usize) -> Self {
        MetricValue::Number(v as f64)
    }
}

impl From<Vec<String>> for MetricValue {
    fn from(v: Vec<String>) -> Self {
        MetricValue::Labels(v)
    }
}

pub type EvalFn = dyn Fn(&ParsedCommit) -> anyhow::Result<MetricValue> + Send + Sync;

pub struct MetricEvaluator {
    def: MetricDef,
    eval: Box<EvalFn>,
}

impl std::fmt::Debug for MetricEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricEvaluator")
            .field("def", &self.def)
            .finish_non_exhaustive()
    }
}

impl MetricEvaluator {
    pub fn new<F>(def: MetricDef, eval: F) -> Self
    where
        F: Fn(&ParsedCommit) -> anyhow::Result<MetricValue> + Send + Sync + 'static,
    {
        MetricEvaluator {
            def,
            eval: Box::new(eval),
        }
    }

    pub fn def(&self) -> &MetricDef {
        &self.def
    }

    /// Runs the evaluator, turning errors, panics, non-finite numbers and
    /// kind mismatches into an error message.
    pub fn evaluate(&self, pc: &ParsedCommit) -> Result<MetricValue, String> {
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| (self.eval)(pc)));
        let value = match outcome {
            Ok(Ok(value)) => value,
            Ok(Err(err)) => return Err(format!("{err:#}")),
            Err(payload) => {
                let msg = payload
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| payload.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "panic".to_string());
                return Err(format!("evaluator panicked: {msg}"));
            }
        };
        match (self.def.kind, value) {
            (MetricKind::Numeric, MetricValue::Number(v)) if v.is_finite() => {
                Ok(MetricValue::Number(v))
            }
            (MetricKind::Numeric, MetricValue::Number(v)) => Err(format!("non-finite value {v}")),
            (MetricKind::Categorical, labels @ MetricValue::Labels(_)) => Ok(labels),
            (kind, _) => Err(format!(
                "evaluator returned the wrong value kind for a {kind:?} metric"
            )),
        }
    }
}

/// Ordered collection of metrics; registration order is chart order.
#[derive(Debug, Default)]
pub struct MetricRegistry {
    evaluators: Vec<MetricEvaluator>,
}

impl MetricRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<F>(&mut self, def: MetricDef, eval: F) -> Result<&mut Self, EngineError>
    where
        F: Fn(&ParsedCommit) -> anyhow::Result<MetricValue> + Send + Sync + 'static,
    {
        self.register_evaluator(MetricEvaluator::new(def, eval))
    }

    pub fn register_evaluator(
        &mut self,
        evaluator: MetricEvaluator,
    ) -> Result<&mut Self, EngineError> {
        let name = &evaluator.def.name;
        if name.trim().is_empty() {
            return Err(EngineError::EmptyMetricName);
        }
        if self.evaluators.iter().any(|e| &e.def.name == name) {
            return Err(EngineError::DuplicateMetricName(name.clone()));
        }
        self.evaluators.push(evaluator);
        Ok(self)
    }

    pub fn numeric<F>(&mut self, name: &str, eval: F) -> Result<&mut Self, EngineError>
    where
        F: Fn(&ParsedCommit) -> f64 + Send + Sync + 'static,
    {
        self.register(MetricDef::numeric(name), move |pc| {
            Ok(MetricValue::Number(eval(pc)))
        })
    }

    pub fn categorical<F>(&mut self, name: &str, eval: F) -> Result<&mut Self, EngineError>
    where
        F: Fn(&ParsedCommit) -> Vec<String> + Send + Sync + 'static,
    {
        self.register(MetricDef::categorical(name), move |pc| {
            Ok(MetricValue::Labels(eval(pc)))
        })
    }

    pub fn len(&self) -> usize {
        self.evaluators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evaluators.is_empty()
    }

    pub fn evaluators(&self) -> &[MetricEvaluator] {
        &self.evaluators
    }

    pub fn get(&self, name: &str) -> Option<&MetricEvaluator> {
        self.evaluators.iter().find(|e| e.def.name == name)
    }
}

/// Multiset frequency of `labels`, keyed in first-occurrence order.
pub fn fold_categorical<S: AsRef<str>>(labels: &[S]) -> IndexMap<String, usize> {
    let mut counts = IndexMap::new();
    for label in labels {
        *counts.entry(label.as_ref().to_string()).or_insert(0) += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub name: String,
    pub kind: MetricKind,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleInfo {
    pub boundary: NaiveDate,
    pub commit: String,
    pub committer_date: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFileEntry {
    pub commit: String,
    pub path: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricErrorEntry {
    pub metric: String,
    pub boundary: NaiveDate,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub name: String,
    pub aggregate_hint: Option<Aggregate>,
    pub show_version_chart: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarInfo {
    pub language: String,
    pub grammar: String,
    pub version: String,
    pub runtime: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub tool_version: String,
    pub source: String,
    pub branch: String,
    pub window: Option<SamplingWindow>,
    pub grammar: Option<GrammarInfo>,
    pub samples: Vec<SampleInfo>,
    pub skip_count: usize,
    pub skipped_files: Vec<SkippedFileEntry>,
    pub metric_errors: Vec<MetricErrorEntry>,
    pub metric_options: Vec<MetricOptions>,
    /// Metrics that never produced a nonzero value; usually a misspelled node type.
    pub always_zero_metrics: Vec<String>,
    /// Set when a report is written; ignored when comparing runs.
    pub generated_at: Option<String>,
}

/// `(metric, series, boundary) -> value`, rectangular over `boundaries`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTable {
    #[serde(rename = "repo")]
    pub repo_name: String,
    pub unit: DateUnit,
    pub boundaries: Vec<NaiveDate>,
    pub metrics: Vec<MetricSeries>,
    pub metadata: TableMetadata,
}

impl EvolutionTable {
    pub fn new(repo_name: impl Into<String>, unit: DateUnit, boundaries: Vec<NaiveDate>) -> Self {
        EvolutionTable {
            repo_name: repo_name.into(),
            unit,
            boundaries,
            metrics: Vec::new(),
            metadata: TableMetadata::default(),
        }
    }

    pub fn metric(&self, name: &str) -> Option<&MetricSeries> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn cell(&self, metric: &str, series: &str, boundary: NaiveDate) -> Option<f64> {
        let idx = self.boundaries.iter().position(|b| *b == boundary)?;
        self.metric(metric)?
            .series
            .iter()
            .find(|s| s.label == series)
            .map(|s| s.values[idx])
    }

    /// Copy without the generation timestamp, for run-to-run comparison.
    pub fn without_timestamp(&self) -> Self {
        let mut copy = self.clone();
        copy.metadata.generated_at = None;
        copy
    }
}

/// Folds per-boundary evaluator outputs into rectangular series.
///
/// `results[b][m]` is metric `m`'s value at boundary `b`. Categorical series
/// appear in first-observation order and are zero where a label is absent.
pub fn assemble_series(defs: &[&MetricDef], results: &[Vec<MetricValue>]) -> Vec<MetricSeries> {
    let n = results.len();
    defs.iter()
        .enumerate()
        .map(|(m, def)| {
            let series = match def.kind {
                MetricKind::Numeric => {
                    let values = results
                        .iter()
                        .map(|row| match &row[m] {
                            MetricValue::Number(v) => *v,
                            MetricValue::Labels(_) => 0.0,
                        })
                        .collect();
                    vec![Series {
                        label: def.name.clone(),
                        values,
                    }]
                }
                MetricKind::Categorical => {
                    let mut by_label: IndexMap<String, Vec<f64>> = IndexMap::new();
                    for (b, row) in results.iter().enumerate() {
                        if let MetricValue::Labels(labels) = &row[m] {
                            for (label, count) in fold_categorical(labels) {
                                by_label.entry(label).or_insert_with(|| vec![0.0; n])[b] =
                                    count as f64;
                            }
                        }
                    }
                    by_label
                        .into_iter()
                        .map(|(label, values)| Series { label, values })
                        .collect()
                }
            };
            MetricSeries {
                name: def.name.clone(),
                kind: def.kind,
                series,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub repo_input: RepoInput,
    pub language: Language,
    pub date_unit: DateUnit,
    /// `None` means the five years ending with the current one.
    pub window: Option<SamplingWindow>,
    pub output_dir: PathBuf,
}

impl AnalysisConfig {
    pub fn new(repo_input: RepoInput, language: Language, date_unit: DateUnit) -> Self {
        AnalysisConfig {
            repo_input,
            language,
            date_unit,
            window: None,
            output_dir: PathBuf::from("."),
        }
    }

    pub fn with_window(mut self, window: SamplingWindow) -> Self {
        self.window = Some(window);
        self
    }

    pub fn resolved_window(&self, today: NaiveDate) -> SamplingWindow {
        self.window
            .unwrap_or_else(|| sampler::default_window(today))
    }
}

/// Reported after each boundary is evaluated.
#[derive(Debug, Clone, Copy)]
pub struct Progress<'a> {
    pub repo: &'a str,
    pub done: usize,
    pub total: usize,
    pub sample: &'a CommitSample,
}

pub fn evaluate(
    config: &AnalysisConfig,
    registry: &MetricRegistry,
    handle: &RepositoryHandle,
) -> Result<EvolutionTable, EngineError> {
    let today = chrono::Utc::now().date_naive();
    evaluate_with_progress(config, registry, handle, today, &mut |_| {})
}

/// Samples the history, parses one snapshot per boundary and runs every
/// evaluator on it. `today` only matters when the config has no window.
pub fn evaluate_with_progress(
    config: &AnalysisConfig,
    registry: &MetricRegistry,
    handle: &RepositoryHandle,
    today: NaiveDate,
    on_progress: &mut dyn FnMut(Progress<'_>),
) -> Result<EvolutionTable, EngineError> {
    if registry.is_empty() {
        return Err(EngineError::EmptyRegistry);
    }
    let spec = config.language.spec();
    let reader = RepoReader::open(handle)?;
    let commits = reader.list_commits()?;
    let window = config.resolved_window(today);
    let boundaries = sampler::boundary_dates(config.date_unit, window);
    let samples = sampler::sample(&commits, &boundaries)?;

    let mut metadata = TableMetadata {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        source: config.repo_input.raw.clone(),
        branch: handle.default_branch.clone(),
        window: Some(window),
        grammar: Some(GrammarInfo {
            language: config.language.id().to_string(),
            grammar: spec.grammar_version().0.to_string(),
            version: spec.grammar_version().1.to_string(),
            runtime: cst::TREE_SITTER_VERSION.to_string(),
        }),
        metric_options: registry
            .evaluators()
            .iter()
            .map(|e| MetricOptions {
                name: e.def.name.clone(),
                aggregate_hint: e.def.aggregate_hint,
                show_version_chart: e.def.show_version_chart,
            })
            .collect(),
        ..TableMetadata::default()
    };

    let mut results: Vec<Vec<MetricValue>> = Vec::with_capacity(samples.len());
    let mut previous: Option<ParsedCommit> = None;
    for (i, sample) in samples.iter().enumerate() {
        let pc = match &previous {
            Some(prev) if prev.hash() == sample.commit.hash => prev.with_boundary(sample.boundary),
            _ => {
                let blobs = reader.read_snapshot(&sample.commit, spec.file_extensions)?;
                let pc = cst::parse_snapshot(&blobs, spec, sample.commit.clone(), sample.boundary);
                metadata
                    .skipped_files
                    .extend(pc.skipped().iter().map(|s| SkippedFileEntry {
                        commit: sample.commit.hash.clone(),
                        path: s.path.clone(),
                        reason: s.reason.clone(),
                    }));
                pc
            }
        };
        let row = registry
            .evaluators()
            .iter()
            .map(|evaluator| match evaluator.evaluate(&pc) {
                Ok(value) => value,
                Err(message) => {
                    log::warn!(
                        "metric '{}' failed at {}: {message}",
                        evaluator.def.name,
                        sample.boundary
                    );
                    metadata.metric_errors.push(MetricErrorEntry {
                        metric: evaluator.def.name.clone(),
                        boundary: sample.boundary,
                        message,
                    });
                    match evaluator.def.kind {
                        MetricKind::Numeric => MetricValue::Number(0.0),
                        MetricKind::Categorical => MetricValue::Labels(Vec::new()),
                    }
                }
            })
            .collect();
        results.push(row);
        metadata.samples.push(SampleInfo {
            boundary: sample.boundary,
            commit: sample.commit.hash.clone(),
            committer_date: sample.commit.committer_date.to_rfc3339(),
        });
        on_progress(Progress {
            repo: &handle.name,
            done: i + 1,
            total: samples.len(),
            sample,
        });
        previous = Some(pc);
    }
    metadata.skip_count = metadata.skipped_files.len();

    let defs: Vec<&MetricDef> = registry.evaluators().iter().map(|e| &e.def).collect();
    let metrics = assemble_series(&defs, &results);
    metadata.always_zero_metrics = metrics
        .iter()
        .filter(|m| m.series.iter().all(|s| s.values.iter().all(|v| *v == 0.0)))
        .map(|m| m.name.clone())
        .collect();

    Ok(EvolutionTable {
        repo_name: handle.name.clone(),
        unit: config.date_unit,
        boundaries: samples.iter().map(|s| s.boundary).collect(),
        metrics,
        metadata,
    })
}
