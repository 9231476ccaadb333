//! Per-technique pair counts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::model::{DiseasePair, Provenance};

/// Count per technique family (`AR1`, `MGA-Code`, ...) and per provenance tag.
pub fn technique_counts(pairs: &[DiseasePair]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for p in pairs {
        let n = p.sdns.len();
        *counts.entry(p.provenance.family().to_string()).or_default() += n;
        if p.provenance.family() != p.provenance.tag() {
            *counts.entry(p.provenance.tag()).or_default() += n;
        }
    }
    counts
}

/// Key-value report of counts before and (optionally) after filtering.
/// Every technique is listed, zeros included.
pub fn render_stats(before: &[DiseasePair], after: Option<&[DiseasePair]>) -> String {
    let mut keys: Vec<String> = Vec::new();
    for p in Provenance::all()
        .into_iter()
        .filter(|p| *p != Provenance::Original)
    {
        let family = p.family().to_string();
        if !keys.contains(&family) {
            keys.push(family);
        }
        keys.push(p.tag());
    }
    let mut out = String::new();
    let mut section = |label: &str, pairs: &[DiseasePair]| {
        let counts = technique_counts(pairs);
        for k in &keys {
            let _ = writeln!(out, "{label}.{k} = {}", counts.get(k).copied().unwrap_or(0));
        }
        let _ = writeln!(
            out,
            "{label}.total = {}",
            pairs.iter().map(|p| p.sdns.len()).sum::<usize>()
        );
    };
    section("pre_filter", before);
    if let Some(after) = after {
        section("post_filter", after);
    }
    out
}
