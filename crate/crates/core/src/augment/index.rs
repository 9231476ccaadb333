use std::collections::{BTreeSet, HashMap, HashSet};

use rayon::prelude::*;

use crate::model::{AxisAnnotation, AxisType, Granularity, IcdCode, IcdEntry};
use crate::tagger::{TagError, Tagger};

/// ICD entries split by the chapter exclusion rule.
#[derive(Debug, Clone, Default)]
pub struct Exclusion {
    pub kept: Vec<IcdEntry>,
    /// Every name carried by at least one excluded code.
    pub excluded_names: BTreeSet<String>,
    pub excluded_entries: usize,
}

/// Drops every name that carries an excluded code (P, Q, U–Z), including its
/// entries under other codes.
pub fn apply_exclusion(entries: &[IcdEntry]) -> Exclusion {
    let excluded_names: BTreeSet<String> = entries
        .iter()
        .filter(|e| matches!(e.code.is_excluded(), Ok(true)))
        .map(|e| e.name.clone())
        .collect();
    let kept: Vec<IcdEntry> = entries
        .iter()
        .filter(|e| !excluded_names.contains(&e.name))
        .cloned()
        .collect();
    Exclusion {
        excluded_entries: entries.len() - kept.len(),
        kept,
        excluded_names,
    }
}

/// Sorted multiset of the remaining axis words after removing one, plus the
/// type of the removed word.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Signature {
    rest: Vec<(String, AxisType)>,
    removed: AxisType,
}

fn signatures(a: &AxisAnnotation) -> impl Iterator<Item = Signature> + '_ {
    let keys = a.axis_multiset();
    (0..keys.len()).map(move |skip| Signature {
        rest: keys
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != skip)
            .map(|(_, &(s, t))| (s.to_string(), t))
            .collect(),
        removed: keys[skip].1,
    })
}

/// The post-exclusion ICD table with every distinct name tagged, plus the
/// lookups the augmentation methods need.
///
/// Two names whose axis multisets differ in exactly one word share a
/// leave-one-out signature, so candidate partners are found by hashing
/// instead of scanning the whole table.
#[derive(Debug, Clone, Default)]
pub struct AnnotatedIcd {
    entries: Vec<IcdEntry>,
    names: Vec<AxisAnnotation>,
    position: HashMap<String, usize>,
    by_code: HashMap<String, Vec<usize>>,
    codes: Vec<Vec<IcdCode>>,
    signatures: HashMap<Signature, Vec<usize>>,
}

impl AnnotatedIcd {
    pub fn build(entries: Vec<IcdEntry>, tagger: &dyn Tagger) -> Result<Self, TagError> {
        let mut position: HashMap<String, usize> = HashMap::new();
        let mut distinct: Vec<&str> = Vec::new();
        let mut codes: Vec<Vec<IcdCode>> = Vec::new();
        let mut by_code: HashMap<String, Vec<usize>> = HashMap::new();
        for e in &entries {
            let idx = *position.entry(e.name.clone()).or_insert_with(|| {
                distinct.push(&e.name);
                codes.push(Vec::new());
                distinct.len() - 1
            });
            if !codes[idx].contains(&e.code) {
                codes[idx].push(e.code.clone());
            }
            let slot = by_code.entry(e.code.canonical().to_string()).or_default();
            if !slot.contains(&idx) {
                slot.push(idx);
            }
        }
        let names: Vec<AxisAnnotation> = distinct
            .par_iter()
            .map(|n| tagger.tag(n))
            .collect::<Result<_, _>>()?;

        let mut sig_index: HashMap<Signature, Vec<usize>> = HashMap::new();
        for (idx, a) in names.iter().enumerate() {
            let mut seen = HashSet::new();
            for sig in signatures(a) {
                if seen.insert(sig.clone()) {
                    sig_index.entry(sig).or_default().push(idx);
                }
            }
        }
        Ok(AnnotatedIcd {
            entries,
            names,
            position,
            by_code,
            codes,
            signatures: sig_index,
        })
    }

    pub fn entries(&self) -> &[IcdEntry] {
        &self.entries
    }

    /// Distinct names in first-seen order, tagged.
    pub fn names(&self) -> &[AxisAnnotation] {
        &self.names
    }

    pub fn contains_name(&self, name: &str) -> bool {
        self.position.contains_key(name)
    }

    pub fn annotation(&self, name: &str) -> Option<&AxisAnnotation> {
        self.position.get(name).map(|&i| &self.names[i])
    }

    pub fn codes_of(&self, name: &str) -> &[IcdCode] {
        self.position
            .get(name)
            .map(|&i| self.codes[i].as_slice())
            .unwrap_or(&[])
    }

    pub fn names_for_code(&self, code: &IcdCode) -> impl Iterator<Item = &str> {
        self.by_code
            .get(code.canonical())
            .into_iter()
            .flatten()
            .map(|&i| self.names[i].name())
    }

    /// Names in the table whose axis multiset differs from `a`'s by exactly
    /// one word of type `mode` on each side (or equals it). Callers still
    /// apply the full guard.
    pub fn candidates(&self, a: &AxisAnnotation, mode: AxisType) -> BTreeSet<usize> {
        signatures(a)
            .filter(|s| s.removed == mode)
            .filter_map(|s| self.signatures.get(&s))
            .flatten()
            .copied()
            .collect()
    }

    pub fn name_at(&self, idx: usize) -> &AxisAnnotation {
        &self.names[idx]
    }

    pub fn six_digit_entries(&self) -> impl Iterator<Item = &IcdEntry> {
        self.entries
            .iter()
            .filter(|e| e.code.granularity() == Granularity::Six)
    }
}
