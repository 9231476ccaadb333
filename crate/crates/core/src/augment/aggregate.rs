//! Multi-granularity aggregation: relabel fine-grained names with their
//! coarser ICD parent, by code prefix or by region-tree ancestry.

use rayon::prelude::*;

use super::compare::compare_axes;
use super::index::AnnotatedIcd;
use super::{finalize, Counters, MethodOutput, MgaSource};
use crate::model::{AxisAnnotation, AxisType, DiseasePair, Granularity, Provenance, RegionTree};

fn code_provenance(source: MgaSource) -> Provenance {
    match source {
        MgaSource::Icd => Provenance::MgaCode1,
        MgaSource::TrainingSet => Provenance::MgaCode2,
    }
}

fn region_provenance(source: MgaSource) -> Provenance {
    match source {
        MgaSource::Icd => Provenance::MgaRegion1,
        MgaSource::TrainingSet => Provenance::MgaRegion2,
    }
}

/// Maps every 6-digit-coded name to the name(s) of its 4-digit parent.
///
/// With `MgaSource::Icd` the 6-digit names are the table's own. With
/// `MgaSource::TrainingSet` each `(udn, sdn)` training pair whose SDN carries
/// a 6-digit code contributes its UDN.
pub fn mga_code(
    source: MgaSource,
    icd: &AnnotatedIcd,
    training: &[(String, String)],
    dedupe: bool,
) -> MethodOutput {
    let provenance = code_provenance(source);
    let mut counters = Counters::default();
    let mut pairs = Vec::new();
    let mut emit_parents = |name: &str, code: &crate::model::IcdCode, counters: &mut Counters| {
        let parent = code.prefix4().expect("caller passes 6-digit codes");
        let before = pairs.len();
        for parent_name in icd.names_for_code(&parent) {
            pairs.push(DiseasePair::new(name, parent_name, provenance));
        }
        if pairs.len() == before {
            counters.bump("mga_code.missing_parent", 1);
        }
    };
    match source {
        MgaSource::Icd => {
            for e in icd.six_digit_entries() {
                emit_parents(&e.name, &e.code, &mut counters);
            }
        }
        MgaSource::TrainingSet => {
            for (udn, sdn) in training {
                let codes = icd.codes_of(sdn);
                if codes.is_empty() {
                    counters.bump("mga_code.training_sdn_not_in_icd", 1);
                    continue;
                }
                for code in codes.iter().filter(|c| c.granularity() == Granularity::Six) {
                    emit_parents(udn, code, &mut counters);
                }
            }
        }
    }
    finalize(pairs, counters, dedupe)
}

/// Maps a name to an ICD name that shares at least one axis word and differs
/// only in its region, where the ICD region is a strict ancestor (larger
/// region) of the name's region.
pub fn mga_region(
    corpus: &[AxisAnnotation],
    icd: &AnnotatedIcd,
    tree: &RegionTree,
    source: MgaSource,
    dedupe: bool,
) -> MethodOutput {
    let provenance = region_provenance(source);
    let (pairs, counters) = corpus
        .par_iter()
        .map(|d1| {
            let mut counters = Counters::default();
            let mut out = Vec::new();
            for idx in icd.candidates(d1, AxisType::AnatomicalRegion) {
                let s1 = icd.name_at(idx);
                let cmp = compare_axes(d1, s1);
                if cmp.shared.is_empty() {
                    continue;
                }
                let Some((small, large)) = cmp.single_difference() else {
                    continue;
                };
                if small.axis_type != AxisType::AnatomicalRegion
                    || large.axis_type != AxisType::AnatomicalRegion
                {
                    continue;
                }
                if !tree.contains(&small.surface) || !tree.contains(&large.surface) {
                    counters.bump("mga_region.region_not_in_tree", 1);
                    continue;
                }
                if tree.is_ancestor(&large.surface, &small.surface) {
                    out.push(DiseasePair::new(d1.name(), s1.name(), provenance));
                }
            }
            (out, counters)
        })
        .reduce(
            || (Vec::new(), Counters::default()),
            |(mut a, mut ca), (b, cb)| {
                a.extend(b);
                ca.merge(&cb);
                (a, ca)
            },
        );
    finalize(pairs, counters, dedupe)
}
