use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbeddingProvider, ProviderError};

/// Largest batch the embedding service accepts in one call.
pub const MAX_REMOTE_BATCH: usize = 512;

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

/// Client for an HTTP embedding service: `POST {base}/embed` with
/// `{"texts": [...]}`, answered by `{"dim": D, "vectors": [[...], ...]}`.
///
/// Vectors are expected unit-normalized by the server and are checked, not
/// re-normalized.
pub struct RemoteEmbedder {
    base_url: String,
    client: reqwest::blocking::Client,
    dim: usize,
}

impl RemoteEmbedder {
    /// Connects and learns the vector dimension from a probe request.
    pub fn connect(base_url: &str, timeout: Duration) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let mut embedder = RemoteEmbedder {
            base_url: base_url.trim_end_matches('/').to_string(),
            client,
            dim: 0,
        };
        let probe = embedder.request(&["probe"])?;
        embedder.dim = probe.dim;
        Ok(embedder)
    }

    fn request(&self, texts: &[&str]) -> Result<EmbedResponse, ProviderError> {
        let url = format!("{}/embed", self.base_url);
        let resp = self
            .client
            .post(&url)
            .json(&EmbedRequest { texts })
            .send()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status();
        if status.is_client_error() {
            let body = resp.text().unwrap_or_default();
            return Err(ProviderError::Rejected(format!("{status}: {body}")));
        }
        if !status.is_success() {
            return Err(ProviderError::Transport(format!("{url} answered {status}")));
        }
        let body: EmbedResponse = resp
            .json()
            .map_err(|e| ProviderError::Malformed(e.to_string()))?;
        if body.vectors.len() != texts.len() {
            return Err(ProviderError::Malformed(format!(
                "{} vectors for {} texts",
                body.vectors.len(),
                texts.len()
            )));
        }
        for v in &body.vectors {
            if v.len() != body.dim {
                return Err(ProviderError::Malformed(format!(
                    "vector of length {} but dim {}",
                    v.len(),
                    body.dim
                )));
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(ProviderError::Malformed(format!(
                    "vector norm {norm} is not 1"
                )));
            }
        }
        Ok(body)
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(MAX_REMOTE_BATCH) {
            let resp = self.request(chunk)?;
            if resp.dim != self.dim {
                return Err(ProviderError::Malformed(format!(
                    "dimension changed from {} to {}",
                    self.dim, resp.dim
                )));
            }
            out.extend(resp.vectors);
        }
        Ok(out)
    }
}
