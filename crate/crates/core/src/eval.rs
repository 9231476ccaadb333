//! Pair-level metrics and a non-neural retrieval normalizer used to measure
//! what the augmented pairs add.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::filter::{cosine, embed_all, ngm, EmbeddingProvider, FilterError, RetryPolicy};
use crate::model::{DiseasePair, IcdEntry, Provenance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("the ICD table is empty")]
    EmptyIcd,
    #[error("top_k must be at least 1")]
    BadTopK,
    #[error("the gold set is empty")]
    EmptyGold,
    #[error(transparent)]
    Filter(#[from] FilterError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    /// Gold (udn, sdn) pairs.
    pub m: usize,
    /// Predicted (udn, sdn) pairs.
    pub n: usize,
    /// Predicted pairs that are gold.
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy_any_match: f64,
    /// Set when nothing was predicted; precision is then reported as 0.
    pub precision_undefined: bool,
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "gold_pairs = {}", self.m)?;
        writeln!(f, "predicted_pairs = {}", self.n)?;
        writeln!(f, "correct_pairs = {}", self.k)?;
        writeln!(f, "precision = {}", self.precision)?;
        writeln!(f, "recall = {}", self.recall)?;
        writeln!(f, "f1 = {}", self.f1)?;
        writeln!(f, "accuracy_any_match = {}", self.accuracy_any_match)?;
        writeln!(f, "precision_undefined = {}", self.precision_undefined)
    }
}

fn pair_set(pairs: &[DiseasePair]) -> BTreeSet<(&str, &str)> {
    pairs
        .iter()
        .flat_map(|p| p.sdns.iter().map(move |s| (p.udn.as_str(), s.as_str())))
        .collect()
}

/// Precision `k/n`, recall `k/m` and their harmonic mean over distinct
/// (udn, sdn) pairs, plus the fraction of gold UDNs for which at least one
/// gold SDN was predicted.
pub fn score_predictions(
    gold: &[DiseasePair],
    predicted: &[DiseasePair],
) -> Result<MetricReport, EvalError> {
    let gold_set = pair_set(gold);
    if gold_set.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    let pred_set = pair_set(predicted);
    let (m, n) = (gold_set.len(), pred_set.len());
    let k = pred_set.intersection(&gold_set).count();
    let precision_undefined = n == 0;
    let precision = if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let recall = k as f64 / m as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };

    let mut by_udn: BTreeMap<&str, (BTreeSet<&str>, BTreeSet<&str>)> = BTreeMap::new();
    for &(u, s) in &gold_set {
        by_udn.entry(u).or_default().0.insert(s);
    }
    for &(u, s) in &pred_set {
        if let Some(slot) = by_udn.get_mut(u) {
            slot.1.insert(s);
        }
    }
    let hits = by_udn.values().filter(|(g, p)| !g.is_disjoint(p)).count();
    Ok(MetricReport {
        m,
        n,
        k,
        precision,
        recall,
        f1,
        accuracy_any_match: hits as f64 / by_udn.len() as f64,
        precision_undefined,
    })
}

/// Ranks ICD names for a query by `max(ngm, cosine)`, after exact hits.
pub struct Retriever<'a> {
    names: Vec<String>,
    vectors: HashMap<String, Vec<f64>>,
    knowledge: HashMap<String, BTreeSet<String>>,
    provider: &'a dyn EmbeddingProvider,
    retry: RetryPolicy,
}

impl<'a> Retriever<'a> {
    pub fn new(
        icd: &[IcdEntry],
        knowledge: &[DiseasePair],
        provider: &'a dyn EmbeddingProvider,
        batch_size: usize,
        retry: RetryPolicy,
    ) -> Result<Self, EvalError> {
        let names: BTreeSet<String> = icd.iter().map(|e| e.name.clone()).collect();
        if names.is_empty() {
            return Err(EvalError::EmptyIcd);
        }
        let vectors = embed_all(&names, provider, batch_size, &retry)?;
        let mut kb: HashMap<String, BTreeSet<String>> = HashMap::new();
        for p in knowledge {
            kb.entry(p.udn.clone())
                .or_default()
                .extend(p.sdns.iter().cloned());
        }
        Ok(Retriever {
            names: names.into_iter().collect(),
            vectors,
            knowledge: kb,
            provider,
            retry,
        })
    }

    /// Ranking: SDNs of knowledge pairs whose UDN equals the query
    /// (lexicographic), then an ICD name equal to the query, then every other
    /// ICD name by descending score with lexicographic tie-break.
    pub fn retrieve(&self, udn: &str, top_k: usize) -> Result<Vec<String>, EvalError> {
        if top_k == 0 {
            return Err(EvalError::BadTopK);
        }
        let query = self
            .retry
            .run(|| self.provider.embed(&[udn]))?
            .pop()
            .ok_or(EvalError::Filter(FilterError::EmptyText))?;
        let mut ranked: Vec<String> = Vec::new();
        let mut taken: HashSet<&str> = HashSet::new();
        if let Some(hits) = self.knowledge.get(udn) {
            for s in hits {
                if taken.insert(s) {
                    ranked.push(s.clone());
                }
            }
        }
        if self.vectors.contains_key(udn) && taken.insert(udn) {
            ranked.push(udn.to_string());
        }
        let mut scored: Vec<(f64, &str)> = self
            .names
            .iter()
            .filter(|n| !taken.contains(n.as_str()))
            .map(|n| -> Result<_, EvalError> {
                let s = ngm(udn, n)?.max(cosine(&query, &self.vectors[n]));
                Ok((s, n.as_str()))
            })
            .collect::<Result<_, _>>()?;
        scored.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(b.1))
        });
        ranked.extend(scored.into_iter().map(|(_, n)| n.to_string()));
        ranked.truncate(top_k);
        Ok(ranked)
    }

    /// One predicted pair per query, carrying its top-k SDNs.
    pub fn predict_all(
        &self,
        udns: &[String],
        top_k: usize,
    ) -> Result<Vec<DiseasePair>, EvalError> {
        udns.par_iter()
            .map(|u| {
                Ok(DiseasePair {
                    udn: u.clone(),
                    sdns: self.retrieve(u, top_k)?,
                    provenance: Provenance::Original,
                })
            })
            .collect()
    }
}

/// One-off retrieval for a single query.
pub fn retrieve(
    udn: &str,
    icd: &[IcdEntry],
    knowledge: &[DiseasePair],
    top_k: usize,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<String>, EvalError> {
    Retriever::new(
        icd,
        knowledge,
        provider,
        crate::filter::DEFAULT_BATCH_SIZE,
        RetryPolicy::default(),
    )?
    .retrieve(udn, top_k)
}
