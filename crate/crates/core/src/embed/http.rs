use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingProvider, ProviderKind};

const BATCH: usize = 64;
const TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Serialize, Deserialize)]
pub struct TextRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairRequest {
    pub pairs: Vec<[String; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VectorsResponse {
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

/// Client for an external inference host exposing `POST /embed` and
/// `POST /embed_pair`. Each call is one blocking request, so concurrent
/// callers never see each other's responses.
#[derive(Debug)]
pub struct HttpProvider {
    base: String,
    dim: usize,
    client: reqwest::blocking::Client,
}

fn backend(e: reqwest::Error) -> EmbedError {
    EmbedError::Backend {
        status: e.status().map(|s| s.as_u16()),
        message: e.to_string(),
    }
}

impl HttpProvider {
    /// Connect and learn the dimension from a one-text probe.
    ///
    /// Must not be called from inside an async runtime thread.
    pub fn connect(base_url: &str) -> Result<Self, EmbedError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(TIMEOUT)
            .build()
            .map_err(backend)?;
        let mut provider = Self {
            base: base_url.trim_end_matches('/').to_string(),
            dim: 0,
            client,
        };
        let probe = provider.post(
            "embed",
            &TextRequest {
                texts: vec!["dimension probe".into()],
            },
        )?;
        if probe.dim == 0 {
            return Err(EmbedError::Backend {
                status: None,
                message: "backend reported dimension 0".into(),
            });
        }
        provider.dim = probe.dim;
        Ok(provider)
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn post<B: Serialize>(&self, route: &str, body: &B) -> Result<VectorsResponse, EmbedError> {
        let resp = self
            .client
            .post(format!("{}/{route}", self.base))
            .json(body)
            .send()
            .map_err(backend)?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(EmbedError::Backend {
                status: Some(status.as_u16()),
                message: text,
            });
        }
        let parsed: VectorsResponse = resp.json().map_err(backend)?;
        if self.dim != 0 && parsed.dim != self.dim {
            return Err(EmbedError::Dimension {
                expected: self.dim,
                got: parsed.dim,
            });
        }
        Ok(parsed)
    }
}

impl EmbeddingProvider for HttpProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Http
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn supports_pairs(&self) -> bool {
        true
    }

    fn text_vectors(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(BATCH) {
            let body = TextRequest {
                texts: chunk.iter().map(|t| t.to_string()).collect(),
            };
            out.extend(self.post("embed", &body)?.vectors);
        }
        Ok(out)
    }

    fn pair_vectors(&self, pairs: &[(&str, &str)]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let mut out = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(BATCH) {
            let body = PairRequest {
                pairs: chunk
                    .iter()
                    .map(|(r, s)| [r.to_string(), s.to_string()])
                    .collect(),
            };
            out.extend(self.post("embed_pair", &body)?.vectors);
        }
        Ok(out)
    }
}
