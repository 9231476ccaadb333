//! Axis-word replacement (AR1 and AR2).

use rayon::prelude::*;

use super::compare::compare_axes;
use super::index::AnnotatedIcd;
use super::{finalize, Counters, MethodOutput};
use crate::model::{AxisAnnotation, AxisType, AxisWord, DiseasePair, Provenance};

/// A training pair with both sides tagged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedPair {
    pub udn: AxisAnnotation,
    pub sdn: AxisAnnotation,
}

/// A generated pair together with where it came from and what was swapped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TracedPair {
    pub pair: DiseasePair,
    /// The name whose axis word was replaced to form `pair.udn`.
    pub source: String,
    pub removed: AxisWord,
    pub inserted: AxisWord,
}

/// AR1 with the source of each generated pair kept. Output is unsorted.
pub fn ar1_traced(
    corpus: &[AxisAnnotation],
    icd: &AnnotatedIcd,
    mode: AxisType,
) -> Vec<TracedPair> {
    corpus
        .par_iter()
        .flat_map_iter(|d1| {
            icd.candidates(d1, mode).into_iter().filter_map(move |idx| {
                let s1 = icd.name_at(idx);
                let cmp = compare_axes(d1, s1);
                if cmp.shared.is_empty() {
                    return None;
                }
                let (old, new) = cmp.single_difference()?;
                if old.axis_type != mode || new.axis_type != mode {
                    return None;
                }
                Some(TracedPair {
                    pair: DiseasePair::new(
                        d1.replace_span(old.span, &new.surface),
                        s1.name(),
                        Provenance::Ar1(mode),
                    ),
                    source: d1.name().to_string(),
                    removed: old.clone(),
                    inserted: new.clone(),
                })
            })
        })
        .collect()
}

/// Pairs every name in `corpus` with each ICD name sharing at least one axis
/// word and differing in exactly one `mode` word on each side; the differing
/// word in the corpus name is swapped for the ICD one.
pub fn ar1(
    corpus: &[AxisAnnotation],
    icd: &AnnotatedIcd,
    mode: AxisType,
    dedupe: bool,
) -> MethodOutput {
    let pairs: Vec<DiseasePair> = ar1_traced(corpus, icd, mode)
        .into_iter()
        .map(|t| t.pair)
        .collect();
    finalize(pairs, Counters::default(), dedupe)
}

/// The occurrence in `target` that corresponds to `word` in `reference`: the
/// k-th axis word with the same (surface, type), where `word` is the k-th in
/// `reference`.
fn matching_occurrence<'a>(
    reference: &AxisAnnotation,
    word: &AxisWord,
    target: &'a AxisAnnotation,
) -> Option<&'a AxisWord> {
    let k = reference
        .axes()
        .iter()
        .take_while(|w| w.span != word.span)
        .filter(|w| w.key() == word.key())
        .count();
    target
        .axes()
        .iter()
        .filter(|w| w.key() == word.key())
        .nth(k)
}

/// AR2 with sources kept. `source` is the training UDN.
pub fn ar2_traced(
    training: &[AnnotatedPair],
    icd: &AnnotatedIcd,
    mode: AxisType,
) -> (Vec<TracedPair>, Counters) {
    training
        .par_iter()
        .map(|p| {
            let mut counters = Counters::default();
            let mut out = Vec::new();
            if p.udn.axis_multiset() != p.sdn.axis_multiset() {
                counters.bump("ar2.udn_sdn_axes_differ", 1);
                return (out, counters);
            }
            for idx in icd.candidates(&p.sdn, mode) {
                let s2 = icd.name_at(idx);
                if s2.axes().len() != p.sdn.axes().len() {
                    continue;
                }
                let cmp = compare_axes(&p.sdn, s2);
                let Some((old, new)) = cmp.single_difference() else {
                    continue;
                };
                if old.axis_type != mode || new.axis_type != mode {
                    continue;
                }
                let s3 = p.sdn.replace_span(old.span, &new.surface);
                if !icd.contains_name(&s3) {
                    counters.bump("ar2.replaced_sdn_not_in_icd", 1);
                    continue;
                }
                let in_udn = matching_occurrence(&p.sdn, old, &p.udn)
                    .expect("equal axis multisets have matching occurrences");
                let u2 = p.udn.replace_span(in_udn.span, &new.surface);
                out.push(TracedPair {
                    pair: DiseasePair::new(u2, s3, Provenance::Ar2(mode)),
                    source: p.udn.name().to_string(),
                    removed: in_udn.clone(),
                    inserted: new.clone(),
                });
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
        )
}

/// For training pairs whose two sides carry the same axis words, swaps one
/// `mode` word in both sides to match an ICD name with the same number of
/// axis words differing in exactly that one. The rewritten SDN must be an
/// ICD name.
pub fn ar2(
    training: &[AnnotatedPair],
    icd: &AnnotatedIcd,
    mode: AxisType,
    dedupe: bool,
) -> MethodOutput {
    let (traced, counters) = ar2_traced(training, icd, mode);
    finalize(
        traced.into_iter().map(|t| t.pair).collect(),
        counters,
        dedupe,
    )
}
