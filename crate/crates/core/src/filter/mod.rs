//! Similarity gates for generated pairs: normalized n-gram matching plus
//! embedding cosine, both compared with strict thresholds.

mod embed;
mod ngram;
mod remote;

use std::collections::{BTreeSet, HashMap};
use std::thread;
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use embed::{builtin_embed, BuiltinEmbedder, BUILTIN_DIM};
pub use ngram::{ngm, ngm_parts};
pub use remote::RemoteEmbedder;

use crate::model::{DiseasePair, FilterVerdict};

pub const DEFAULT_ALPHA: f64 = 0.7;
pub const DEFAULT_BETA: f64 = 0.8;
pub const DEFAULT_BATCH_SIZE: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("embedding request failed: {0}")]
    Transport(String),
    #[error("embedding provider rejected the request: {0}")]
    Rejected(String),
    #[error("malformed embedding response: {0}")]
    Malformed(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("text must be non-empty")]
    EmptyText,
    #[error("alpha must be a finite value >= 0, got {0}")]
    BadAlpha(f64),
    #[error("beta must lie in [-1, 1], got {0}")]
    BadBeta(f64),
    #[error("batch size must be at least 1")]
    BadBatchSize,
    #[error("embedding provider failed after {attempts} attempt(s): {last}")]
    ProviderExhausted {
        attempts: usize,
        last: ProviderError,
    },
}

/// Maps a batch of strings to unit-length vectors of one fixed dimension.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError>;
}

/// Dot product of two unit vectors, clamped to [-1, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x * y)
        .sum::<f64>()
        .clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: usize,
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            backoff: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    pub fn run<T>(
        &self,
        mut op: impl FnMut() -> Result<T, ProviderError>,
    ) -> Result<T, FilterError> {
        let attempts = self.attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) => last = Some(e),
            }
            if attempt + 1 < attempts && !self.backoff.is_zero() {
                thread::sleep(self.backoff * (attempt as u32 + 1));
            }
        }
        Err(FilterError::ProviderExhausted {
            attempts,
            last: last.expect("at least one attempt ran"),
        })
    }
}

/// Cosine similarity of two texts under `provider`.
pub fn cosine_gate(
    udn: &str,
    sdn: &str,
    provider: &dyn EmbeddingProvider,
    retry: &RetryPolicy,
) -> Result<f64, FilterError> {
    let vectors = retry.run(|| checked_embed(provider, &[udn, sdn]))?;
    Ok(cosine(&vectors[0], &vectors[1]))
}

fn checked_embed(
    provider: &dyn EmbeddingProvider,
    texts: &[&str],
) -> Result<Vec<Vec<f64>>, ProviderError> {
    let vectors = provider.embed(texts)?;
    if vectors.len() != texts.len() {
        return Err(ProviderError::Malformed(format!(
            "{} vectors for {} texts",
            vectors.len(),
            texts.len()
        )));
    }
    if let Some(v) = vectors.iter().find(|v| v.len() != provider.dim()) {
        return Err(ProviderError::Malformed(format!(
            "vector of length {} from a provider of dimension {}",
            v.len(),
            provider.dim()
        )));
    }
    Ok(vectors)
}

/// Embeds every distinct text once, in batches that may run concurrently.
pub fn embed_all(
    texts: impl IntoIterator<Item = impl AsRef<str>>,
    provider: &dyn EmbeddingProvider,
    batch_size: usize,
    retry: &RetryPolicy,
) -> Result<HashMap<String, Vec<f64>>, FilterError> {
    if batch_size == 0 {
        return Err(FilterError::BadBatchSize);
    }
    let distinct: BTreeSet<String> = texts.into_iter().map(|t| t.as_ref().to_string()).collect();
    if distinct.iter().any(String::is_empty) {
        return Err(FilterError::EmptyText);
    }
    let distinct: Vec<String> = distinct.into_iter().collect();
    let batches: Vec<Vec<Vec<f64>>> = distinct
        .par_chunks(batch_size)
        .map(|chunk| {
            let refs: Vec<&str> = chunk.iter().map(String::as_str).collect();
            retry.run(|| checked_embed(provider, &refs))
        })
        .collect::<Result<_, _>>()?;
    Ok(distinct
        .into_iter()
        .zip(batches.into_iter().flatten())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub alpha: f64,
    pub beta: f64,
    pub batch_size: usize,
    pub retry: RetryPolicy,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            batch_size: DEFAULT_BATCH_SIZE,
            retry: RetryPolicy::default(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(FilterError::BadAlpha(self.alpha));
        }
        if !(-1.0..=1.0).contains(&self.beta) {
            return Err(FilterError::BadBeta(self.beta));
        }
        if self.batch_size == 0 {
            return Err(FilterError::BadBatchSize);
        }
        Ok(())
    }
}

/// One verdict per single-SDN pair, in input order.
#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub kept: Vec<DiseasePair>,
    pub verdicts: Vec<(DiseasePair, FilterVerdict)>,
}

/// Keeps a pair iff `ngm > alpha` and `cosine > beta`. Multi-SDN pairs are
/// judged per SDN.
pub fn filter_pairs(
    pairs: &[DiseasePair],
    config: &FilterConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<FilterOutcome, FilterError> {
    config.validate()?;
    let singles: Vec<DiseasePair> = pairs.iter().flat_map(DiseasePair::expand).collect();
    let vectors = embed_all(
        singles
            .iter()
            .flat_map(|p| [p.udn.as_str(), p.sdns[0].as_str()]),
        provider,
        config.batch_size,
        &config.retry,
    )?;
    let verdicts: Vec<(DiseasePair, FilterVerdict)> = singles
        .into_par_iter()
        .map(|p| {
            let sdn = &p.sdns[0];
            let score = ngm(&p.udn, sdn)?;
            let cos = cosine(&vectors[&p.udn], &vectors[sdn]);
            let verdict = FilterVerdict::new(score, cos, config.alpha, config.beta);
            Ok((p, verdict))
        })
        .collect::<Result<_, FilterError>>()?;
    let kept = verdicts
        .iter()
        .filter(|(_, v)| v.passed)
        .map(|(p, _)| p.clone())
        .collect();
    Ok(FilterOutcome { kept, verdicts })
}

#[derive(Serialize)]
struct VerdictRecord<'a> {
    text: &'a str,
    normalized_result: &'a str,
    ngm: f64,
    cosine: f64,
    passed: bool,
}

/// JSON-lines verdict log.
pub fn write_verdicts(verdicts: &[(DiseasePair, FilterVerdict)]) -> String {
    let mut out = String::new();
    for (p, v) in verdicts {
        let rec = VerdictRecord {
            text: &p.udn,
            normalized_result: &p.sdns[0],
            ngm: v.ngm,
            cosine: v.cosine,
            passed: v.passed,
        };
        out.push_str(&serde_json::to_string(&rec).expect("verdicts serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Provenance;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Fixed vectors per text; unknown texts fail.
    struct Table(HashMap<&'static str, Vec<f64>>);

    impl EmbeddingProvider for Table {
        fn dim(&self) -> usize {
            2
        }
        fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
            texts
                .iter()
                .map(|t| {
                    self.0
                        .get(t)
                        .cloned()
                        .ok_or_else(|| ProviderError::Rejected(t.to_string()))
                })
                .collect()
        }
    }

    struct Flaky {
        failures: AtomicUsize,
    }

    impl EmbeddingProvider for Flaky {
        fn dim(&self) -> usize {
            BUILTIN_DIM
        }
        fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
            if self
                .failures
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
                .is_ok()
            {
                return Err(ProviderError::Transport("flaky".into()));
            }
            BuiltinEmbedder.embed(texts)
        }
    }

    fn quick_retry(attempts: usize) -> RetryPolicy {
        RetryPolicy {
            attempts,
            backoff: Duration::ZERO,
        }
    }

    fn pair(u: &str, s: &str) -> DiseasePair {
        DiseasePair::new(
            u,
            s,
            Provenance::Ar1(crate::model::AxisType::AnatomicalRegion),
        )
    }

    #[test]
    fn cosine_gate_with_stub_vectors() {
        let stub = Table(
            [
                ("a", vec![1.0, 0.0]),
                ("b", vec![0.0, 1.0]),
                ("c", vec![1.0, 0.0]),
            ]
            .into_iter()
            .collect(),
        );
        let retry = quick_retry(1);
        assert_eq!(cosine_gate("a", "b", &stub, &retry).unwrap(), 0.0);
        assert_eq!(cosine_gate("a", "c", &stub, &retry).unwrap(), 1.0);
        let same = cosine_gate("腰椎骨折", "腰椎骨折", &BuiltinEmbedder, &retry).unwrap();
        assert!((same - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kept_pair_with_high_scores() {
        // ngm 2.5, cosine 0.95 from the stub.
        let stub = Table(
            [
                ("腰椎骨折脱位", vec![1.0, 0.0]),
                ("腰椎骨折", vec![0.95, (1.0f64 - 0.95 * 0.95).sqrt()]),
            ]
            .into_iter()
            .collect(),
        );
        let out = filter_pairs(
            &[pair("腰椎骨折脱位", "腰椎骨折")],
            &FilterConfig::default(),
            &stub,
        )
        .unwrap();
        assert_eq!(out.kept.len(), 1);
        let v = out.verdicts[0].1;
        assert_eq!(v.ngm, 2.5);
        assert!((v.cosine - 0.95).abs() < 1e-12);
    }

    #[test]
    fn vacuous_thresholds_keep_everything() {
        let pairs = vec![pair("abc", "xyz"), pair("骨折", "骨裂")];
        let config = FilterConfig {
            alpha: 0.0,
            beta: -1.0,
            ..Default::default()
        };
        // ngm("abc","xyz") = 0, which is not > 0.
        let out = filter_pairs(&pairs, &config, &BuiltinEmbedder).unwrap();
        assert_eq!(out.kept, vec![pair("骨折", "骨裂")]);
        assert_eq!(out.verdicts.len(), 2);
    }

    #[test]
    fn threshold_validation() {
        let bad = |alpha, beta| {
            FilterConfig {
                alpha,
                beta,
                ..Default::default()
            }
            .validate()
        };
        assert!(matches!(bad(-0.1, 0.8), Err(FilterError::BadAlpha(_))));
        assert!(matches!(bad(f64::NAN, 0.8), Err(FilterError::BadAlpha(_))));
        assert!(matches!(bad(0.7, 1.5), Err(FilterError::BadBeta(_))));
        assert!(bad(0.0, -1.0).is_ok());
    }

    #[test]
    fn retries_then_gives_up() {
        let flaky = Flaky {
            failures: AtomicUsize::new(2),
        };
        let config = FilterConfig {
            retry: quick_retry(3),
            ..Default::default()
        };
        assert!(filter_pairs(&[pair("腰椎骨折脱位", "腰椎骨折")], &config, &flaky).is_ok());

        let flaky = Flaky {
            failures: AtomicUsize::new(5),
        };
        let err = filter_pairs(&[pair("腰椎骨折脱位", "腰椎骨折")], &config, &flaky).unwrap_err();
        assert!(matches!(
            err,
            FilterError::ProviderExhausted { attempts: 3, .. }
        ));
    }

    #[test]
    fn malformed_provider_output_is_an_error() {
        struct Short;
        impl EmbeddingProvider for Short {
            fn dim(&self) -> usize {
                4
            }
            fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
                Ok(texts.iter().map(|_| vec![1.0]).collect())
            }
        }
        let err = cosine_gate("a", "b", &Short, &quick_retry(1)).unwrap_err();
        assert!(matches!(
            err,
            FilterError::ProviderExhausted {
                last: ProviderError::Malformed(_),
                ..
            }
        ));
    }

    #[test]
    fn verdict_log_format() {
        let out = filter_pairs(
            &[pair("骨折", "骨折")],
            &FilterConfig::default(),
            &BuiltinEmbedder,
        )
        .unwrap();
        let log = write_verdicts(&out.verdicts);
        assert!(log.starts_with(
            "{\"text\":\"骨折\",\"normalized_result\":\"骨折\",\"ngm\":1.5,\"cosine\":"
        ));
        assert!(log.trim_end().ends_with("\"passed\":true}"));
    }
}
