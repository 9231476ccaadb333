//! The four augmentation techniques and the engine that runs them over a
//! loaded dataset.

mod aggregate;
mod compare;
mod index;
mod replace;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

pub use aggregate::{mga_code, mga_region};
pub use compare::{compare_axes, AxisComparison};
pub use index::{apply_exclusion, AnnotatedIcd, Exclusion};
pub use replace::{ar1, ar1_traced, ar2, ar2_traced, AnnotatedPair, TracedPair};

use crate::ingest::Dataset;
use crate::model::{AxisAnnotation, AxisType, DiseasePair, Provenance};
use crate::tagger::{TagError, Tagger};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("no augmentation method selected")]
    NoMethod,
    #[error(transparent)]
    Tag(#[from] TagError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Ar1,
    Ar2,
    MgaCode,
    MgaRegion,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ar1, Method::Ar2, Method::MgaCode, Method::MgaRegion];
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ar1" => Ok(Method::Ar1),
            "ar2" => Ok(Method::Ar2),
            "mga-code" => Ok(Method::MgaCode),
            "mga-region" => Ok(Method::MgaRegion),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// Where the fine-grained names of an aggregation come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MgaSource {
    Icd,
    TrainingSet,
}

impl FromStr for MgaSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "icd" => Ok(MgaSource::Icd),
            "train" | "training" => Ok(MgaSource::TrainingSet),
            other => Err(format!("unknown MGA source `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentationConfig {
    pub methods: BTreeSet<Method>,
    pub axis_modes: BTreeSet<AxisType>,
    pub mga_sources: BTreeSet<MgaSource>,
    pub dedupe: bool,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            methods: Method::ALL.into_iter().collect(),
            axis_modes: AxisType::ALL.into_iter().collect(),
            mga_sources: [MgaSource::Icd, MgaSource::TrainingSet]
                .into_iter()
                .collect(),
            dedupe: true,
        }
    }
}

/// Named skip/diagnostic counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters(BTreeMap<String, usize>);

impl Counters {
    pub fn bump(&mut self, key: &str, n: usize) {
        *self.0.entry(key.to_string()).or_default() += n;
    }

    pub fn get(&self, key: &str) -> usize {
        self.0.get(key).copied().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &Counters) {
        for (k, v) in &other.0 {
            self.bump(k, *v);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Output of one technique: sorted pairs, the raw count before dedupe, and
/// skip counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MethodOutput {
    pub pairs: Vec<DiseasePair>,
    pub generated: usize,
    pub counters: Counters,
}

pub(crate) fn finalize(
    mut pairs: Vec<DiseasePair>,
    counters: Counters,
    dedupe: bool,
) -> MethodOutput {
    let generated = pairs.len();
    pairs.sort_unstable_by(|a, b| (&a.udn, &a.sdns).cmp(&(&b.udn, &b.sdns)));
    if dedupe {
        pairs.dedup();
    }
    MethodOutput {
        pairs,
        generated,
        counters,
    }
}

/// Per-technique counts plus every skip counter.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AugmentationReport {
    pub generated: BTreeMap<Provenance, usize>,
    pub emitted: BTreeMap<Provenance, usize>,
    pub counters: Counters,
}

impl fmt::Display for AugmentationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (p, n) in &self.generated {
            writeln!(f, "generated.{p} = {n}")?;
        }
        for (p, n) in &self.emitted {
            writeln!(f, "emitted.{p} = {n}")?;
        }
        writeln!(
            f,
            "emitted.total = {}",
            self.emitted.values().sum::<usize>()
        )?;
        for (k, v) in self.counters.iter() {
            writeln!(f, "skip.{k} = {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Augmentation {
    pub pairs: Vec<DiseasePair>,
    pub report: AugmentationReport,
}

/// Tagged, exclusion-filtered view of a dataset, ready for the techniques.
pub struct PreparedData {
    pub icd: AnnotatedIcd,
    /// Names that carry an excluded code; they never appear in output.
    pub excluded_names: BTreeSet<String>,
    /// Training pairs expanded to one SDN each, pairs touching an excluded
    /// name removed.
    pub training: Vec<(String, String)>,
    pub annotated_training: Vec<AnnotatedPair>,
    /// Distinct names from the training set and the ICD table.
    pub corpus: Vec<AxisAnnotation>,
    /// Distinct training UDNs.
    pub training_udns: Vec<AxisAnnotation>,
    pub counters: Counters,
}

impl PreparedData {
    pub fn new(dataset: &Dataset, tagger: &dyn Tagger) -> Result<Self, TagError> {
        let mut counters = Counters::default();
        let exclusion = apply_exclusion(&dataset.icd);
        counters.bump("excluded_icd_entries", exclusion.excluded_entries);
        let icd = AnnotatedIcd::build(exclusion.kept, tagger)?;

        let mut training = Vec::new();
        for pair in &dataset.pairs {
            for sdn in &pair.sdns {
                if exclusion.excluded_names.contains(sdn)
                    || exclusion.excluded_names.contains(&pair.udn)
                {
                    counters.bump("excluded_training_pairs", 1);
                } else {
                    training.push((pair.udn.clone(), sdn.clone()));
                }
            }
        }

        let mut extra: BTreeSet<&str> = BTreeSet::new();
        for (u, s) in &training {
            for n in [u, s] {
                if !icd.contains_name(n) {
                    extra.insert(n);
                }
            }
        }
        let extra: Vec<&str> = extra.into_iter().collect();
        let tagged: Vec<AxisAnnotation> = extra
            .par_iter()
            .map(|n| tagger.tag(n))
            .collect::<Result<_, _>>()?;
        let lookup: HashMap<&str, &AxisAnnotation> = tagged
            .iter()
            .map(|a| (a.name(), a))
            .chain(icd.names().iter().map(|a| (a.name(), a)))
            .collect();

        let annotated_training = training
            .iter()
            .map(|(u, s)| AnnotatedPair {
                udn: lookup[u.as_str()].clone(),
                sdn: lookup[s.as_str()].clone(),
            })
            .collect();

        let mut corpus: Vec<AxisAnnotation> = icd.names().to_vec();
        corpus.extend(tagged.iter().cloned());
        counters.bump(
            "zero_axis_names",
            corpus.iter().filter(|a| a.axes().is_empty()).count(),
        );

        let udns: BTreeSet<&str> = training.iter().map(|(u, _)| u.as_str()).collect();
        let training_udns = udns.into_iter().map(|u| lookup[u].clone()).collect();

        Ok(PreparedData {
            icd,
            excluded_names: exclusion.excluded_names,
            training,
            annotated_training,
            corpus,
            training_udns,
            counters,
        })
    }
}

/// Runs every selected technique and merges the results, deduplicated on
/// (udn, sdn, provenance) and sorted by udn, then sdn, then provenance.
pub fn run_augmentation(
    dataset: &Dataset,
    config: &AugmentationConfig,
    tagger: &dyn Tagger,
) -> Result<Augmentation, AugmentError> {
    if config.methods.is_empty() {
        return Err(AugmentError::NoMethod);
    }
    let data = PreparedData::new(dataset, tagger)?;
    let mut report = AugmentationReport {
        counters: data.counters.clone(),
        ..Default::default()
    };
    let mut outputs: Vec<(Provenance, MethodOutput)> = Vec::new();
    let dedupe = config.dedupe;

    for &method in &config.methods {
        match method {
            Method::Ar1 => {
                for &mode in &config.axis_modes {
                    outputs.push((
                        Provenance::Ar1(mode),
                        ar1(&data.corpus, &data.icd, mode, dedupe),
                    ));
                }
            }
            Method::Ar2 => {
                for &mode in &config.axis_modes {
                    outputs.push((
                        Provenance::Ar2(mode),
                        ar2(&data.annotated_training, &data.icd, mode, dedupe),
                    ));
                }
            }
            Method::MgaCode => {
                for &source in &config.mga_sources {
                    let out = mga_code(source, &data.icd, &data.training, dedupe);
                    let prov = match source {
                        MgaSource::Icd => Provenance::MgaCode1,
                        MgaSource::TrainingSet => Provenance::MgaCode2,
                    };
                    outputs.push((prov, out));
                }
            }
            Method::MgaRegion => {
                for &source in &config.mga_sources {
                    let (corpus, prov) = match source {
                        MgaSource::Icd => (data.icd.names(), Provenance::MgaRegion1),
                        MgaSource::TrainingSet => {
                            (data.training_udns.as_slice(), Provenance::MgaRegion2)
                        }
                    };
                    let out = mga_region(corpus, &data.icd, &dataset.region_tree, source, dedupe);
                    outputs.push((prov, out));
                }
            }
        }
    }

    let mut pairs = Vec::new();
    for (prov, out) in outputs {
        report.generated.insert(prov, out.generated);
        report.counters.merge(&out.counters);
        pairs.extend(out.pairs);
    }
    let before = pairs.len();
    pairs.retain(|p| {
        !data.excluded_names.contains(&p.udn)
            && p.sdns.iter().all(|s| !data.excluded_names.contains(s))
    });
    if pairs.len() < before {
        report
            .counters
            .bump("excluded_generated_pairs", before - pairs.len());
    }
    pairs.sort_unstable();
    if dedupe {
        pairs.dedup();
    }
    for p in &pairs {
        *report.emitted.entry(p.provenance).or_default() += 1;
    }
    for prov in report.generated.keys() {
        report.emitted.entry(*prov).or_default();
    }
    Ok(Augmentation { pairs, report })
}

/// Key-value listing of a report, one `key = value` per line.
pub fn render_report(report: &AugmentationReport) -> String {
    let mut out = String::new();
    let _ = write!(out, "{report}");
    out
}
