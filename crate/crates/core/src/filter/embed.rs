use super::{EmbeddingProvider, FilterError, ProviderError};

pub const BUILTIN_DIM: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Hashed bag of character unigrams and bigrams, L2-normalized.
///
/// Each gram's UTF-8 bytes are hashed with 64-bit FNV-1a and counted in
/// bucket `hash % 256`.
pub fn builtin_embed(text: &str) -> Result<Vec<f64>, FilterError> {
    if text.is_empty() {
        return Err(FilterError::EmptyText);
    }
    let mut v = vec![0.0f64; BUILTIN_DIM];
    let mut bump = |gram: &str| v[(fnv1a(gram.as_bytes()) % BUILTIN_DIM as u64) as usize] += 1.0;
    let bounds: Vec<usize> = text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .collect();
    for w in bounds.windows(2) {
        bump(&text[w[0]..w[1]]);
    }
    for w in bounds.windows(3) {
        bump(&text[w[0]..w[2]]);
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

/// Deterministic in-process embedder; needs no model or network.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinEmbedder;

impl EmbeddingProvider for BuiltinEmbedder {
    fn dim(&self) -> usize {
        BUILTIN_DIM
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
        texts
            .iter()
            .map(|t| builtin_embed(t).map_err(|e| ProviderError::Rejected(e.to_string())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::cosine;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn unit_norm_and_identity() {
        let a = builtin_embed("腰椎骨折").unwrap();
        assert_eq!(a.len(), BUILTIN_DIM);
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!((cosine(&a, &builtin_embed("腰椎骨折").unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_text_rejected() {
        assert!(builtin_embed("").is_err());
    }
}
