//! Parsers and writers for the on-disk inputs.
//!
//! Line-level problems are collected into a [`LoadReport`] and loading carries
//! on; only structural problems (unreadable file, broken region tree,
//! conflicting lexicon entries) abort.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::model::{AxisType, DiseasePair, IcdCode, IcdEntry, Provenance, RegionTree, TreeError};
use crate::tagger::Lexicon;

/// Separator between standard names in the `normalized_result` field.
pub const SDN_SEPARATOR: &str = "##";

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid region tree: {source}")]
    Tree {
        path: String,
        #[source]
        source: TreeError,
    },
    #[error("{path} line {line}: surface `{surface}` listed as both {first} and {second}")]
    LexiconConflict {
        path: String,
        line: usize,
        surface: String,
        first: AxisType,
        second: AxisType,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// Everything noteworthy that happened while reading one file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub source: String,
    pub records: usize,
    pub errors: Vec<LineError>,
    pub notes: Vec<String>,
}

impl LoadReport {
    fn new(source: &str) -> Self {
        LoadReport {
            source: source.to_string(),
            ..Default::default()
        }
    }

    fn error(&mut self, line: usize, message: impl Into<String>) {
        self.errors.push(LineError {
            line,
            message: message.into(),
        });
    }

    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

impl fmt::Display for LoadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}]", self.source)?;
        writeln!(f, "records = {}", self.records)?;
        writeln!(f, "errors = {}", self.errors.len())?;
        for e in &self.errors {
            writeln!(f, "error.line{} = {}", e.line, e.message)?;
        }
        for n in &self.notes {
            writeln!(f, "note = {n}")?;
        }
        Ok(())
    }
}

/// A parsed value together with its report.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub value: T,
    pub report: LoadReport,
}

fn is_trim_char(c: char) -> bool {
    c.is_ascii_whitespace() || c == '\u{3000}'
}

/// Trims ASCII whitespace and the full-width space.
pub fn clean_name(s: &str) -> &str {
    s.trim_matches(is_trim_char)
}

fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn source_name(path: &Path) -> String {
    path.display().to_string()
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !clean_name(l).is_empty())
}

pub fn parse_icd(text: &str, source: &str) -> Loaded<Vec<IcdEntry>> {
    let mut report = LoadReport::new(source);
    let mut entries: Vec<IcdEntry> = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut names_by_code: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (line, raw) in data_lines(text) {
        let Some((code, name)) = raw.split_once('\t') else {
            report.error(line, "missing tab between code and name");
            continue;
        };
        let code = match IcdCode::parse(code) {
            Ok(c) => c,
            Err(e) => {
                report.error(line, e.to_string());
                continue;
            }
        };
        let name = clean_name(name);
        if name.is_empty() {
            report.error(line, "empty name");
            continue;
        }
        if !seen.insert((code.canonical().to_string(), name.to_string())) {
            continue;
        }
        names_by_code
            .entry(code.canonical().to_string())
            .or_default()
            .push(name.to_string());
        entries.push(IcdEntry {
            code,
            name: name.to_string(),
        });
    }
    for (code, names) in &names_by_code {
        if names.len() > 1 {
            report.notes.push(format!(
                "code {code} has {} names: {}",
                names.len(),
                names.join(" | ")
            ));
        }
    }
    report.records = entries.len();
    Loaded {
        value: entries,
        report,
    }
}

pub fn load_icd(path: &Path) -> Result<Loaded<Vec<IcdEntry>>, LoadError> {
    Ok(parse_icd(&read(path)?, &source_name(path)))
}

fn split_sdns(joined: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for part in joined.split(SDN_SEPARATOR) {
        let part = clean_name(part);
        if !part.is_empty() && !out.iter().any(|s| s == part) {
            out.push(part.to_string());
        }
    }
    out
}

/// Parses JSON-lines pair records. A `provenance` field, when present, is
/// honoured; otherwise the pair is `Original`.
pub fn parse_pairs(text: &str, source: &str) -> Loaded<Vec<DiseasePair>> {
    let mut report = LoadReport::new(source);
    let mut pairs = Vec::new();
    for (line, raw) in data_lines(text) {
        let value: Value = match serde_json::from_str(raw) {
            Ok(v) => v,
            Err(e) => {
                report.error(line, format!("invalid JSON: {e}"));
                continue;
            }
        };
        let field = |key: &str| value.get(key).and_then(Value::as_str);
        let (Some(text), Some(joined)) = (field("text"), field("normalized_result")) else {
            report.error(
                line,
                "record needs string fields `text` and `normalized_result`",
            );
            continue;
        };
        let udn = clean_name(text);
        if udn.is_empty() {
            report.error(line, "empty `text`");
            continue;
        }
        let sdns = split_sdns(joined);
        if sdns.is_empty() {
            report.error(line, "no standard name in `normalized_result`");
            continue;
        }
        let provenance = match field("provenance") {
            None => Provenance::Original,
            Some(tag) => match tag.parse() {
                Ok(p) => p,
                Err(e) => {
                    report.error(line, e);
                    continue;
                }
            },
        };
        pairs.push(DiseasePair {
            udn: udn.to_string(),
            sdns,
            provenance,
        });
    }
    report.records = pairs.len();
    Loaded {
        value: pairs,
        report,
    }
}

pub fn load_pairs(path: &Path) -> Result<Loaded<Vec<DiseasePair>>, LoadError> {
    Ok(parse_pairs(&read(path)?, &source_name(path)))
}

pub fn parse_region_tree(text: &str, source: &str) -> Result<Loaded<RegionTree>, LoadError> {
    let mut report = LoadReport::new(source);
    let mut edges = Vec::new();
    for (line, raw) in data_lines(text) {
        let Some((child, parent)) = raw.split_once('\t') else {
            report.error(line, "expected `child<TAB>parent`");
            continue;
        };
        let (child, parent) = (clean_name(child), clean_name(parent));
        if child.is_empty() || parent.is_empty() {
            report.error(line, "empty region");
            continue;
        }
        edges.push((child.to_string(), parent.to_string()));
    }
    report.records = edges.len();
    let tree = RegionTree::from_edges(edges).map_err(|source_err| LoadError::Tree {
        path: source.to_string(),
        source: source_err,
    })?;
    Ok(Loaded {
        value: tree,
        report,
    })
}

pub fn load_region_tree(path: &Path) -> Result<Loaded<RegionTree>, LoadError> {
    parse_region_tree(&read(path)?, &source_name(path))
}

pub fn parse_lexicon(text: &str, source: &str) -> Result<Loaded<Lexicon>, LoadError> {
    let mut report = LoadReport::new(source);
    let mut lexicon = Lexicon::new();
    for (line, raw) in data_lines(text) {
        let Some((surface, kind)) = raw.rsplit_once('\t') else {
            report.error(line, "expected `surface<TAB>type`");
            continue;
        };
        let surface = clean_name(surface);
        if surface.is_empty() {
            report.error(line, "empty surface");
            continue;
        }
        let axis_type: AxisType = match kind.parse() {
            Ok(t) => t,
            Err(e) => {
                report.error(line, e);
                continue;
            }
        };
        match lexicon.get(surface) {
            Some(prev) if prev != axis_type => {
                return Err(LoadError::LexiconConflict {
                    path: source.to_string(),
                    line,
                    surface: surface.to_string(),
                    first: prev,
                    second: axis_type,
                })
            }
            Some(_) => report.notes.push(format!(
                "line {line}: duplicate surface `{surface}` ignored"
            )),
            None => {
                lexicon.insert(surface, axis_type);
            }
        }
    }
    report.records = lexicon.len();
    Ok(Loaded {
        value: lexicon,
        report,
    })
}

pub fn load_lexicon(path: &Path) -> Result<Loaded<Lexicon>, LoadError> {
    parse_lexicon(&read(path)?, &source_name(path))
}

/// Everything the augmentation engine consumes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub pairs: Vec<DiseasePair>,
    pub icd: Vec<IcdEntry>,
    pub region_tree: RegionTree,
    pub lexicon: Lexicon,
}

#[derive(Debug, Clone, Default)]
pub struct DatasetPaths {
    pub icd: PathBuf,
    pub pairs: Option<PathBuf>,
    pub region_tree: Option<PathBuf>,
    pub lexicon: PathBuf,
}

impl Dataset {
    /// Loads all inputs. Missing optional files yield empty values. The
    /// returned reports include a note for each training SDN absent from the
    /// ICD table.
    pub fn load(paths: &DatasetPaths) -> Result<(Dataset, Vec<LoadReport>), LoadError> {
        let icd = load_icd(&paths.icd)?;
        let mut pairs = match &paths.pairs {
            Some(p) => load_pairs(p)?,
            None => Loaded {
                value: Vec::new(),
                report: LoadReport::new("<no pairs>"),
            },
        };
        let tree = match &paths.region_tree {
            Some(p) => load_region_tree(p)?,
            None => Loaded {
                value: RegionTree::new(),
                report: LoadReport::new("<no region tree>"),
            },
        };
        let lexicon = load_lexicon(&paths.lexicon)?;

        let unmatched = unmatched_sdns(&pairs.value, &icd.value);
        if !unmatched.is_empty() {
            pairs.report.notes.push(format!(
                "{} standard name(s) not found in the ICD table: {}",
                unmatched.len(),
                unmatched.into_iter().collect::<Vec<_>>().join(" | ")
            ));
        }
        let dataset = Dataset {
            pairs: pairs.value,
            icd: icd.value,
            region_tree: tree.value,
            lexicon: lexicon.value,
        };
        Ok((
            dataset,
            vec![icd.report, pairs.report, tree.report, lexicon.report],
        ))
    }
}

/// Training SDNs that do not occur verbatim as an ICD name.
pub fn unmatched_sdns(pairs: &[DiseasePair], icd: &[IcdEntry]) -> BTreeSet<String> {
    let names: HashSet<&str> = icd.iter().map(|e| e.name.as_str()).collect();
    pairs
        .iter()
        .flat_map(|p| p.sdns.iter())
        .filter(|s| !names.contains(s.as_str()))
        .cloned()
        .collect()
}

pub fn write_icd(entries: &[IcdEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        let _ = writeln!(out, "{}\t{}", e.code.raw(), e.name);
    }
    out
}

#[derive(Serialize)]
struct PairRecord<'a> {
    text: &'a str,
    normalized_result: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
}

/// One JSON object per line; `provenance` is written for augmented pairs only.
pub fn write_pairs(pairs: &[DiseasePair]) -> String {
    let mut out = String::new();
    for p in pairs {
        let record = PairRecord {
            text: &p.udn,
            normalized_result: p.sdns.join(SDN_SEPARATOR),
            provenance: (p.provenance != Provenance::Original).then(|| p.provenance.tag()),
        };
        out.push_str(&serde_json::to_string(&record).expect("pair records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_region_tree(tree: &RegionTree) -> String {
    let mut out = String::new();
    for (child, parent) in tree.edges() {
        let _ = writeln!(out, "{child}\t{parent}");
    }
    out
}

pub fn write_lexicon(lexicon: &Lexicon) -> String {
    let mut out = String::new();
    for (surface, t) in lexicon.iter() {
        let _ = writeln!(out, "{surface}\t{}", t.token());
    }
    out
}
