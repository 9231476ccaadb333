//! Command implementations behind the `axisaug` binary.

pub mod config;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use axisaug_core::augment::{render_report, AugmentError};
use axisaug_core::eval::{score_predictions, EvalError, MetricReport, Retriever};
use axisaug_core::filter::{
    write_verdicts, BuiltinEmbedder, FilterError, ProviderError, RemoteEmbedder, RetryPolicy,
};
use axisaug_core::ingest::{load_pairs, write_pairs, DatasetPaths, LoadError, LoadReport};
use axisaug_core::stats::render_stats;
use axisaug_core::tagger::{read_bio, write_bio, AnnotationTable, TagError};
use axisaug_core::{
    filter_pairs, run_augmentation, Dataset, DiseasePair, EmbeddingProvider, FilterConfig, Tagger,
};
use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::{Opts, PipelineConfig, ProviderChoice};

pub const TAGS_FILE: &str = "tags.bio";
pub const LOAD_REPORT_FILE: &str = "load_report.txt";
pub const AUGMENTED_FILE: &str = "augmented.jsonl";
pub const AUGMENT_REPORT_FILE: &str = "augment_report.txt";
pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const FILTERED_FILE: &str = "filtered.jsonl";
pub const FILTER_REPORT_FILE: &str = "filter_report.txt";
pub const STATS_FILE: &str = "stats.txt";
pub const METRICS_FILE: &str = "metrics.txt";

const REMOTE_TIMEOUT: Duration = Duration::from_secs(30);
const RETRY_BACKOFF: Duration = Duration::from_millis(250);

#[derive(Debug, Parser)]
#[command(
    name = "axisaug",
    version,
    about = "Axis-word data augmentation for disease-name normalization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tag every ICD and training name with axis words (writes tags.bio)
    Tag(Opts),
    /// Generate augmented pairs (writes augmented.jsonl, augment_report.txt)
    Augment(Opts),
    /// Keep augmented pairs passing the n-gram and cosine gates
    Filter(Opts),
    /// Score predictions, or run the retrieval baseline, against gold pairs
    Eval(Opts),
    /// Per-technique counts before and after filtering
    Stats(Opts),
    /// tag, augment, filter and stats in one go
    Run(Opts),
}

impl Command {
    pub fn opts(&self) -> &Opts {
        match self {
            Command::Tag(o)
            | Command::Augment(o)
            | Command::Filter(o)
            | Command::Eval(o)
            | Command::Stats(o)
            | Command::Run(o) => o,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{path}: {source}")]
    Bio { path: PathBuf, source: TagError },
    #[error(transparent)]
    Tag(#[from] TagError),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error("embedding provider unavailable: {0}")]
    Provider(String),
    #[error("no predictions to score; precision is undefined")]
    NoPredictions,
    #[error(transparent)]
    Eval(EvalError),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Load(_)
            | CliError::Bio { .. }
            | CliError::Tag(_)
            | CliError::Input(_)
            | CliError::Augment(_) => 3,
            CliError::Provider(_) => 4,
            CliError::Eval(EvalError::Filter(_)) => 4,
            CliError::Eval(EvalError::EmptyGold | EvalError::EmptyIcd) => 3,
            CliError::Eval(_) => 2,
            CliError::NoPredictions | CliError::Write { .. } => 1,
        }
    }
}

impl From<FilterError> for CliError {
    fn from(e: FilterError) -> Self {
        match e {
            FilterError::ProviderExhausted { .. } => CliError::Provider(e.to_string()),
            FilterError::EmptyText => CliError::Input(e.to_string()),
            other => CliError::Config(vec![other.to_string()]),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Filter(f) => f.into(),
            other => CliError::Eval(other),
        }
    }
}

/// Parses, validates and runs one command on a thread pool sized by
/// `--workers`. Returns the lines meant for stdout.
pub fn execute(command: &Command) -> Result<Vec<String>, CliError> {
    let config = PipelineConfig::resolve(command.opts())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| {
            CliError::Config(vec![format!(
                "cannot start {} workers: {e}",
                config.workers
            )])
        })?;
    pool.install(|| match command {
        Command::Tag(_) => cmd_tag(&config),
        Command::Augment(_) => cmd_augment(&config),
        Command::Filter(_) => cmd_filter(&config),
        Command::Eval(_) => cmd_eval(&config),
        Command::Stats(_) => cmd_stats(&config),
        Command::Run(_) => cmd_run(&config),
    })
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, contents))
        .map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
    Ok(path)
}

fn require<'a>(
    value: &'a Option<PathBuf>,
    flag: &str,
    command: &str,
) -> Result<&'a PathBuf, CliError> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Config(vec![format!("`{command}` needs --{flag}")]))
}

fn render_load_reports(reports: &[LoadReport]) -> String {
    reports
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

fn warn_on_errors(reports: &[LoadReport]) {
    for r in reports.iter().filter(|r| !r.is_clean()) {
        eprintln!(
            "warning: {} malformed line(s) skipped in {}",
            r.errors.len(),
            r.source
        );
    }
}

fn load_dataset(
    config: &PipelineConfig,
    command: &str,
) -> Result<(Dataset, Vec<LoadReport>), CliError> {
    let icd = require(&config.icd, "icd", command)?;
    let lexicon = require(&config.lexicon, "lexicon", command)?;
    let paths = DatasetPaths {
        icd: icd.clone(),
        pairs: config.pairs.clone(),
        region_tree: config.region_tree.clone(),
        lexicon: lexicon.clone(),
    };
    let (dataset, reports) = Dataset::load(&paths)?;
    warn_on_errors(&reports);
    Ok((dataset, reports))
}

/// The lexicon tagger, overridden by a BIO file when one is configured.
fn build_tagger(config: &PipelineConfig, dataset: &Dataset) -> Result<Box<dyn Tagger>, CliError> {
    let lexicon = dataset.lexicon.clone();
    let Some(path) = &config.bio else {
        return Ok(Box::new(lexicon));
    };
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.clone(),
        source,
    })?;
    let decoded = read_bio(&text).map_err(|source| CliError::Bio {
        path: path.clone(),
        source,
    })?;
    let repairs: usize = decoded.iter().map(|d| d.repairs).sum();
    if repairs > 0 {
        eprintln!(
            "warning: {repairs} orphan inside tag(s) repaired in {}",
            path.display()
        );
    }
    Ok(Box::new(AnnotationTable::new(
        decoded.into_iter().map(|d| d.annotation),
        lexicon,
    )))
}

fn provider(config: &PipelineConfig) -> Result<Box<dyn EmbeddingProvider>, CliError> {
    match &config.provider {
        ProviderChoice::Builtin => Ok(Box::new(BuiltinEmbedder)),
        ProviderChoice::Remote(url) => {
            let retry = retry_policy(config);
            let mut last: Option<ProviderError> = None;
            for attempt in 0..retry.attempts {
                match RemoteEmbedder::connect(url, REMOTE_TIMEOUT) {
                    Ok(e) => return Ok(Box::new(e)),
                    Err(e) => last = Some(e),
                }
                if attempt + 1 < retry.attempts {
                    std::thread::sleep(retry.backoff * (attempt as u32 + 1));
                }
            }
            Err(CliError::Provider(format!(
                "{url}: {}",
                last.map_or_else(String::new, |e| e.to_string())
            )))
        }
    }
}

fn retry_policy(config: &PipelineConfig) -> RetryPolicy {
    RetryPolicy {
        attempts: config.retries,
        backoff: RETRY_BACKOFF,
    }
}

/// Names of the ICD table followed by training names not already listed.
fn names_to_tag(dataset: &Dataset) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    let training = dataset
        .pairs
        .iter()
        .flat_map(|p| std::iter::once(&p.udn).chain(p.sdns.iter()));
    for name in dataset.icd.iter().map(|e| &e.name).chain(training) {
        if seen.insert(name.as_str()) {
            out.push(name.clone());
        }
    }
    out
}

pub fn cmd_tag(config: &PipelineConfig) -> Result<Vec<String>, CliError> {
    use rayon::prelude::*;
    let (dataset, reports) = load_dataset(config, "tag")?;
    let tagger = build_tagger(config, &dataset)?;
    let names = names_to_tag(&dataset);
    let annotations = names
        .par_iter()
        .map(|n| tagger.tag(n))
        .collect::<Result<Vec<_>, _>>()?;
    let zero = annotations.iter().filter(|a| a.axes().is_empty()).count();
    write_artifact(
        &config.out,
        LOAD_REPORT_FILE,
        &render_load_reports(&reports),
    )?;
    write_artifact(&config.out, TAGS_FILE, &write_bio(&annotations))?;
    Ok(vec![
        format!("tagged = {}", annotations.len()),
        format!("zero_axis_names = {zero}"),
    ])
}

pub fn cmd_augment(config: &PipelineConfig) -> Result<Vec<String>, CliError> {
    let (dataset, reports) = load_dataset(config, "augment")?;
    let tagger = build_tagger(config, &dataset)?;
    let result = run_augmentation(&dataset, &config.augmentation, tagger.as_ref())?;
    write_artifact(
        &config.out,
        LOAD_REPORT_FILE,
        &render_load_reports(&reports),
    )?;
    write_artifact(&config.out, AUGMENTED_FILE, &write_pairs(&result.pairs))?;
    write_artifact(
        &config.out,
        AUGMENT_REPORT_FILE,
        &render_report(&result.report),
    )?;
    Ok(vec![format!("augmented_pairs = {}", result.pairs.len())])
}

fn read_pairs_file(path: &Path) -> Result<Vec<DiseasePair>, CliError> {
    let loaded = load_pairs(path)?;
    warn_on_errors(std::slice::from_ref(&loaded.report));
    Ok(loaded.value)
}

pub fn cmd_filter(config: &PipelineConfig) -> Result<Vec<String>, CliError> {
    let input = config
        .input
        .clone()
        .unwrap_or_else(|| config.out.join(AUGMENTED_FILE));
    let pairs = read_pairs_file(&input)?;
    let provider = provider(config)?;
    let filter_config = FilterConfig {
        alpha: config.alpha,
        beta: config.beta,
        batch_size: config.batch_size,
        retry: retry_policy(config),
    };
    let outcome = filter_pairs(&pairs, &filter_config, provider.as_ref())?;
    let kept = outcome.kept.len();
    let judged = outcome.verdicts.len();
    let report = format!(
        "alpha = {}\nbeta = {}\nprovider = {}\njudged = {judged}\nkept = {kept}\nrejected = {}\n",
        config.alpha,
        config.beta,
        match config.provider {
            ProviderChoice::Builtin => "builtin",
            ProviderChoice::Remote(_) => "remote",
        },
        judged - kept
    );
    write_artifact(
        &config.out,
        VERDICTS_FILE,
        &write_verdicts(&outcome.verdicts),
    )?;
    write_artifact(&config.out, FILTERED_FILE, &write_pairs(&outcome.kept))?;
    write_artifact(&config.out, FILTER_REPORT_FILE, &report)?;
    Ok(vec![
        format!("kept = {kept}"),
        format!("rejected = {}", judged - kept),
    ])
}

pub fn cmd_stats(config: &PipelineConfig) -> Result<Vec<String>, CliError> {
    let before_path = config
        .input
        .clone()
        .unwrap_or_else(|| config.out.join(AUGMENTED_FILE));
    let before = read_pairs_file(&before_path)?;
    let after_path = config.out.join(FILTERED_FILE);
    let after = if after_path.exists() {
        Some(read_pairs_file(&after_path)?)
    } else {
        None
    };
    let text = render_stats(&before, after.as_deref());
    write_artifact(&config.out, STATS_FILE, &text)?;
    Ok(text.lines().map(str::to_string).collect())
}

fn metric_lines(prefix: &str, report: &MetricReport) -> String {
    report
        .to_string()
        .lines()
        .map(|l| format!("{prefix}{l}\n"))
        .collect()
}

pub fn cmd_eval(config: &PipelineConfig) -> Result<Vec<String>, CliError> {
    let gold_path = config
        .gold
        .as_ref()
        .or(config.pairs.as_ref())
        .ok_or_else(|| CliError::Config(vec!["`eval` needs --gold or --pairs".into()]))?;
    let gold = read_pairs_file(gold_path)?;

    let (text, scored) = if let Some(pred_path) = &config.predictions {
        let predicted = read_pairs_file(pred_path)?;
        let report = score_predictions(&gold, &predicted)?;
        (report.to_string(), vec![report])
    } else {
        let icd_path = require(&config.icd, "icd", "eval")?;
        let icd = axisaug_core::ingest::load_icd(icd_path)?;
        warn_on_errors(std::slice::from_ref(&icd.report));
        let knowledge_path = config.knowledge.clone().or_else(|| {
            let p = config.out.join(FILTERED_FILE);
            p.exists().then_some(p)
        });
        let knowledge = match &knowledge_path {
            Some(p) => read_pairs_file(p)?,
            None => Vec::new(),
        };
        let provider = provider(config)?;
        let mut udns: Vec<String> = gold.iter().map(|p| p.udn.clone()).collect();
        udns.sort();
        udns.dedup();
        let retry = retry_policy(config);

        let baseline =
            Retriever::new(&icd.value, &[], provider.as_ref(), config.batch_size, retry)?;
        let base = score_predictions(&gold, &baseline.predict_all(&udns, config.top_k)?)?;
        let mut text = format!("top_k = {}\n", config.top_k);
        text.push_str(&metric_lines("baseline.", &base));
        let mut scored = vec![base];
        if knowledge_path.is_some() {
            let augmented = Retriever::new(
                &icd.value,
                &knowledge,
                provider.as_ref(),
                config.batch_size,
                retry,
            )?;
            let aug = score_predictions(&gold, &augmented.predict_all(&udns, config.top_k)?)?;
            text.push_str(&format!("knowledge_pairs = {}\n", knowledge.len()));
            text.push_str(&metric_lines("augmented.", &aug));
            scored.push(aug);
        }
        (text, scored)
    };
    write_artifact(&config.out, METRICS_FILE, &text)?;
    if scored.iter().any(|r| r.precision_undefined) {
        return Err(CliError::NoPredictions);
    }
    Ok(text.lines().map(str::to_string).collect())
}

/// tag → augment → filter → stats.
pub fn cmd_run(config: &PipelineConfig) -> Result<Vec<String>, CliError> {
    let mut lines = cmd_tag(config)?;
    lines.extend(cmd_augment(config)?);
    let staged = PipelineConfig {
        input: Some(config.out.join(AUGMENTED_FILE)),
        ..config.clone()
    };
    lines.extend(cmd_filter(&staged)?);
    lines.extend(cmd_stats(&staged)?);
    Ok(lines)
}
