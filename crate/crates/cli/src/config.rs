//! Flag/config-file merging and validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use axisaug_core::augment::{AugmentationConfig, Method, MgaSource};
use axisaug_core::filter::{DEFAULT_ALPHA, DEFAULT_BATCH_SIZE, DEFAULT_BETA};
use axisaug_core::AxisType;
use clap::Args;

use crate::CliError;

/// Keys accepted both as `--flag` and as `flag = value` in a config file.
pub const KEYS: &[&str] = &[
    "icd",
    "pairs",
    "region-tree",
    "lexicon",
    "bio",
    "out",
    "methods",
    "axis-modes",
    "mga-sources",
    "dedupe",
    "alpha",
    "beta",
    "provider",
    "provider-url",
    "batch-size",
    "retries",
    "top-k",
    "workers",
    "input",
    "gold",
    "knowledge",
    "predictions",
];

const PATH_KEYS: &[&str] = &[
    "icd",
    "pairs",
    "region-tree",
    "lexicon",
    "bio",
    "out",
    "input",
    "gold",
    "knowledge",
    "predictions",
];

#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// `key = value` file; any flag below may be set there, flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// ICD table, `code<TAB>name` per line
    #[arg(long)]
    pub icd: Option<String>,
    /// Training pairs, JSON lines with `text` and `normalized_result`
    #[arg(long)]
    pub pairs: Option<String>,
    /// Region tree, `child<TAB>parent` per line
    #[arg(long)]
    pub region_tree: Option<String>,
    /// Axis lexicon, `surface<TAB>center|region|characteristic` per line
    #[arg(long)]
    pub lexicon: Option<String>,
    /// BIO annotations that override lexicon tagging for the names they cover
    #[arg(long)]
    pub bio: Option<String>,
    /// Output directory
    #[arg(long)]
    pub out: Option<String>,
    /// Comma-separated subset of ar1,ar2,mga-code,mga-region (or `all`)
    #[arg(long)]
    pub methods: Option<String>,
    /// Comma-separated subset of region,center,characteristic (or `all`)
    #[arg(long)]
    pub axis_modes: Option<String>,
    /// Comma-separated subset of icd,train (or `all`)
    #[arg(long)]
    pub mga_sources: Option<String>,
    /// Drop exact duplicate pairs (true|false)
    #[arg(long)]
    pub dedupe: Option<String>,
    /// n-gram threshold; pairs need ngm > alpha
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// cosine threshold; pairs need cosine > beta
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    /// builtin | remote
    #[arg(long)]
    pub provider: Option<String>,
    /// Base URL of the embedding service (remote provider)
    #[arg(long)]
    pub provider_url: Option<String>,
    /// Texts per embedding request
    #[arg(long, allow_hyphen_values = true)]
    pub batch_size: Option<String>,
    /// Attempts per embedding batch before giving up
    #[arg(long, allow_hyphen_values = true)]
    pub retries: Option<String>,
    /// Candidates returned per query during evaluation
    #[arg(long, allow_hyphen_values = true)]
    pub top_k: Option<String>,
    /// Worker threads
    #[arg(long, allow_hyphen_values = true)]
    pub workers: Option<String>,
    /// Pairs to filter (default: <out>/augmented.jsonl)
    #[arg(long)]
    pub input: Option<String>,
    /// Gold pairs for evaluation (default: --pairs)
    #[arg(long)]
    pub gold: Option<String>,
    /// Augmented pairs used as retrieval knowledge (default: <out>/filtered.jsonl if present)
    #[arg(long)]
    pub knowledge: Option<String>,
    /// Score this prediction file instead of running retrieval
    #[arg(long)]
    pub predictions: Option<String>,
}

impl Opts {
    fn flag_values(&self) -> BTreeMap<&'static str, String> {
        let fields: [(&'static str, &Option<String>); 22] = [
            ("icd", &self.icd),
            ("pairs", &self.pairs),
            ("region-tree", &self.region_tree),
            ("lexicon", &self.lexicon),
            ("bio", &self.bio),
            ("out", &self.out),
            ("methods", &self.methods),
            ("axis-modes", &self.axis_modes),
            ("mga-sources", &self.mga_sources),
            ("dedupe", &self.dedupe),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("provider", &self.provider),
            ("provider-url", &self.provider_url),
            ("batch-size", &self.batch_size),
            ("retries", &self.retries),
            ("top-k", &self.top_k),
            ("workers", &self.workers),
            ("input", &self.input),
            ("gold", &self.gold),
            ("knowledge", &self.knowledge),
            ("predictions", &self.predictions),
        ];
        fields
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderChoice {
    Builtin,
    Remote(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub icd: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub region_tree: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub bio: Option<PathBuf>,
    pub out: PathBuf,
    pub augmentation: AugmentationConfig,
    pub alpha: f64,
    pub beta: f64,
    pub provider: ProviderChoice,
    pub batch_size: usize,
    pub retries: usize,
    pub top_k: usize,
    pub workers: usize,
    pub input: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub knowledge: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
}

/// Parses `key = value` lines. `#` starts a comment line. Relative paths are
/// resolved against the file's directory.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut values = BTreeMap::new();
    let mut problems = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            problems.push(format!(
                "{} line {}: expected `key = value`",
                path.display(),
                i + 1
            ));
            continue;
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            problems.push(format!(
                "{} line {}: unknown key `{key}`",
                path.display(),
                i + 1
            ));
            continue;
        }
        let value = if PATH_KEYS.contains(&key.as_str()) && Path::new(&value).is_relative() {
            base.join(&value).display().to_string()
        } else {
            value
        };
        values.insert(key, value);
    }
    if problems.is_empty() {
        Ok(values)
    } else {
        Err(CliError::Config(problems))
    }
}

fn parse_set<T: Ord>(
    raw: &str,
    all: impl IntoIterator<Item = T>,
    parse: impl Fn(&str) -> Result<T, String>,
    key: &str,
    problems: &mut Vec<String>,
) -> BTreeSet<T> {
    if raw.trim() == "all" {
        return all.into_iter().collect();
    }
    let mut out = BTreeSet::new();
    for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match parse(part) {
            Ok(v) => {
                out.insert(v);
            }
            Err(e) => problems.push(format!("--{key}: {e}")),
        }
    }
    if out.is_empty() {
        problems.push(format!("--{key}: at least one value is required"));
    }
    out
}

fn parse_num<T: std::str::FromStr>(
    raw: Option<&String>,
    default: T,
    key: &str,
    problems: &mut Vec<String>,
) -> T {
    match raw {
        None => default,
        Some(s) => s.trim().parse().unwrap_or_else(|_| {
            problems.push(format!("--{key}: `{s}` is not a valid number"));
            default
        }),
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl PipelineConfig {
    /// Merges flags over the config file and validates the result, reporting
    /// every problem at once.
    pub fn resolve(opts: &Opts) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, String> = match &opts.config {
            Some(p) => parse_config_file(p)?,
            None => BTreeMap::new(),
        };
        for (k, v) in opts.flag_values() {
            values.insert(k.to_string(), v);
        }
        Self::from_values(&values)
    }

    pub fn from_values(values: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut problems = Vec::new();
        let get = |k: &str| values.get(k);
        let path = |k: &str| get(k).map(PathBuf::from);

        let methods = parse_set(
            get("methods").map_or("all", String::as_str),
            Method::ALL,
            |s| s.parse(),
            "methods",
            &mut problems,
        );
        let axis_modes = parse_set(
            get("axis-modes").map_or("all", String::as_str),
            AxisType::ALL,
            |s| s.parse(),
            "axis-modes",
            &mut problems,
        );
        let mga_sources = parse_set(
            get("mga-sources").map_or("all", String::as_str),
            [MgaSource::Icd, MgaSource::TrainingSet],
            |s| s.parse(),
            "mga-sources",
            &mut problems,
        );
        let dedupe = match get("dedupe").map(|s| s.trim()) {
            None | Some("true") => true,
            Some("false") => false,
            Some(other) => {
                problems.push(format!("--dedupe: expected true or false, got `{other}`"));
                true
            }
        };

        let alpha: f64 = parse_num(get("alpha"), DEFAULT_ALPHA, "alpha", &mut problems);
        if !(alpha.is_finite() && alpha >= 0.0) {
            problems.push(format!("--alpha must be >= 0, got {alpha}"));
        }
        let beta: f64 = parse_num(get("beta"), DEFAULT_BETA, "beta", &mut problems);
        if !(-1.0..=1.0).contains(&beta) {
            problems.push(format!("--beta must lie in [-1, 1], got {beta}"));
        }
        let batch_size: usize = parse_num(
            get("batch-size"),
            DEFAULT_BATCH_SIZE,
            "batch-size",
            &mut problems,
        );
        if batch_size == 0 {
            problems.push("--batch-size must be at least 1".into());
        }
        let retries: usize = parse_num(get("retries"), 3, "retries", &mut problems);
        if retries == 0 {
            problems.push("--retries must be at least 1".into());
        }
        let top_k: usize = parse_num(get("top-k"), 5, "top-k", &mut problems);
        if top_k == 0 {
            problems.push("--top-k must be at least 1".into());
        }
        let workers: usize = parse_num(get("workers"), default_workers(), "workers", &mut problems);
        if workers == 0 {
            problems.push("--workers must be at least 1".into());
        }

        let provider = match get("provider").map_or("builtin", |s| s.trim()) {
            "builtin" => ProviderChoice::Builtin,
            "remote" => match get("provider-url") {
                Some(url) if !url.trim().is_empty() => {
                    ProviderChoice::Remote(url.trim().to_string())
                }
                _ => {
                    problems.push("--provider remote needs --provider-url".into());
                    ProviderChoice::Builtin
                }
            },
            other => {
                problems.push(format!(
                    "--provider: expected builtin or remote, got `{other}`"
                ));
                ProviderChoice::Builtin
            }
        };

        if !problems.is_empty() {
            return Err(CliError::Config(problems));
        }
        Ok(PipelineConfig {
            icd: path("icd"),
            pairs: path("pairs"),
            region_tree: path("region-tree"),
            lexicon: path("lexicon"),
            bio: path("bio"),
            out: path("out").unwrap_or_else(|| PathBuf::from("out")),
            augmentation: AugmentationConfig {
                methods,
                axis_modes,
                mga_sources,
                dedupe,
            },
            alpha,
            beta,
            provider,
            batch_size,
            retries,
            top_k,
            workers,
            input: path("input"),
            gold: path("gold"),
            knowledge: path("knowledge"),
            predictions: path("predictions"),
        })
    }
}
