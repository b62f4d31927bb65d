//! Embedding providers. A provider turns a single answer, or a
//! (reference, student) pair, into a fixed-length vector. Three backends
//! are available: a precomputed file, a deterministic hash embedder used
//! as a test double, and an HTTP inference host.

mod file;
mod http;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rng::SplitMix64;
use crate::text::nfc;

pub use file::{EmbeddingFile, FileProvider, EMBEDDING_FILE_MAGIC};
pub use http::{HttpProvider, PairRequest, TextRequest, VectorsResponse};

/// Whitespace-token budget for a joined (reference, student) pair.
pub const PAIR_TOKEN_CAP: usize = 256;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("no embedding stored for key {0}")]
    LookupMiss(String),
    #[error("embedding backend error{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Backend {
        status: Option<u16>,
        message: String,
    },
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("{0} provider does not embed pairs")]
    PairsUnsupported(ProviderKind),
    #[error("expected {expected}-dimensional vector, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite value in embedding")]
    NonFinite,
    #[error("embedding file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid provider spec {0:?} (expected file:<path>, hash:<dim> or http:<url>)")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    File,
    Hash,
    Http,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::File => "file",
            ProviderKind::Hash => "hash",
            ProviderKind::Http => "http",
        })
    }
}

/// A deterministic source of embeddings.
///
/// Implementors receive already-validated input: `text_vectors` sees
/// non-empty texts and `pair_vectors` sees pairs truncated to
/// [`PAIR_TOKEN_CAP`]. Callers should go through [`embed_text`],
/// [`embed_pair`] and their batch forms, which also check the output.
pub trait EmbeddingProvider: Send + Sync {
    fn kind(&self) -> ProviderKind;
    fn dim(&self) -> usize;
    fn supports_pairs(&self) -> bool;
    fn text_vectors(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError>;
    fn pair_vectors(&self, pairs: &[(&str, &str)]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

fn check_vectors(dim: usize, vectors: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>, EmbedError> {
    for v in &vectors {
        if v.len() != dim {
            return Err(EmbedError::Dimension {
                expected: dim,
                got: v.len(),
            });
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
    }
    Ok(vectors)
}

pub fn embed_texts(
    provider: &dyn EmbeddingProvider,
    texts: &[&str],
) -> Result<Vec<Vec<f64>>, EmbedError> {
    if texts.iter().any(|t| t.trim().is_empty()) {
        return Err(EmbedError::EmptyText);
    }
    let out = provider.text_vectors(texts)?;
    if out.len() != texts.len() {
        return Err(EmbedError::Backend {
            status: None,
            message: format!("asked for {} vectors, got {}", texts.len(), out.len()),
        });
    }
    check_vectors(provider.dim(), out)
}

pub fn embed_text(provider: &dyn EmbeddingProvider, text: &str) -> Result<Vec<f64>, EmbedError> {
    Ok(embed_texts(provider, &[text])?.remove(0))
}

pub fn embed_pairs(
    provider: &dyn EmbeddingProvider,
    pairs: &[(&str, &str)],
) -> Result<Vec<Vec<f64>>, EmbedError> {
    if !provider.supports_pairs() {
        return Err(EmbedError::PairsUnsupported(provider.kind()));
    }
    if pairs
        .iter()
        .any(|(r, s)| r.trim().is_empty() || s.trim().is_empty())
    {
        return Err(EmbedError::EmptyText);
    }
    let truncated: Vec<(String, String)> = pairs
        .iter()
        .map(|(r, s)| truncate_pair(r, s, PAIR_TOKEN_CAP))
        .collect();
    let refs: Vec<(&str, &str)> = truncated
        .iter()
        .map(|(r, s)| (r.as_str(), s.as_str()))
        .collect();
    let out = provider.pair_vectors(&refs)?;
    if out.len() != pairs.len() {
        return Err(EmbedError::Backend {
            status: None,
            message: format!("asked for {} vectors, got {}", pairs.len(), out.len()),
        });
    }
    check_vectors(provider.dim(), out)
}

pub fn embed_pair(
    provider: &dyn EmbeddingProvider,
    reference: &str,
    student: &str,
) -> Result<Vec<f64>, EmbedError> {
    Ok(embed_pairs(provider, &[(reference, student)])?.remove(0))
}

/// Cut a pair to at most `cap` whitespace tokens in total. When both
/// sides together overflow, the shorter side is kept whole if it fits in
/// half the budget and the other side gets the rest; otherwise both are
/// cut to half.
pub fn truncate_pair(reference: &str, student: &str, cap: usize) -> (String, String) {
    let r: Vec<&str> = reference.split_whitespace().collect();
    let s: Vec<&str> = student.split_whitespace().collect();
    let half = cap / 2;
    let (nr, ns) = if r.len() + s.len() <= cap {
        (r.len(), s.len())
    } else if r.len() <= half {
        (r.len(), cap - r.len())
    } else if s.len() <= half {
        (cap - s.len(), s.len())
    } else {
        (half, cap - half)
    };
    (r[..nr].join(" "), s[..ns].join(" "))
}

fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

/// Storage key of a single text: hex SHA-256 of its NFC form.
pub fn text_key(text: &str) -> String {
    hex::encode(sha256(nfc(text).as_bytes()))
}

fn pair_material(reference: &str, student: &str) -> String {
    format!("{}\u{1F}{}", nfc(reference), nfc(student))
}

/// Storage key of an ordered pair: hex SHA-256 of
/// `NFC(reference) U+001F NFC(student)`.
pub fn pair_key(reference: &str, student: &str) -> String {
    hex::encode(sha256(pair_material(reference, student).as_bytes()))
}

/// Unit vector drawn from SplitMix64 seeded by the first eight bytes
/// (big-endian) of SHA-256 of the NFC text, components uniform in [-1, 1].
pub fn hash_embed(text: &str, dim: usize) -> Vec<f64> {
    let digest = sha256(nfc(text).as_bytes());
    let seed = u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"));
    let mut rng = SplitMix64::new(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Test double for transformer embeddings.
#[derive(Debug, Clone)]
pub struct HashProvider {
    dim: usize,
}

impl HashProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self { dim }
    }
}

impl EmbeddingProvider for HashProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Hash
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn supports_pairs(&self) -> bool {
        true
    }

    fn text_vectors(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(texts.iter().map(|t| hash_embed(t, self.dim)).collect())
    }

    fn pair_vectors(&self, pairs: &[(&str, &str)]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(pairs
            .iter()
            .map(|(r, s)| hash_embed(&pair_material(r, s), self.dim))
            .collect())
    }
}

/// Parsed `--provider` value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProviderSpec {
    File(PathBuf),
    Hash(usize),
    Http(String),
}

impl FromStr for ProviderSpec {
    type Err = EmbedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EmbedError::Spec(s.to_string());
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "file" if !rest.is_empty() => Ok(ProviderSpec::File(PathBuf::from(rest))),
            "hash" => match rest.parse::<usize>() {
                Ok(d) if d > 0 => Ok(ProviderSpec::Hash(d)),
                _ => Err(bad()),
            },
            "http" | "https" if !rest.is_empty() => {
                let url = if rest.starts_with("//") {
                    format!("{kind}:{rest}")
                } else {
                    rest.to_string()
                };
                Ok(ProviderSpec::Http(url))
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ProviderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderSpec::File(p) => write!(f, "file:{}", p.display()),
            ProviderSpec::Hash(d) => write!(f, "hash:{d}"),
            ProviderSpec::Http(u) => write!(f, "http:{u}"),
        }
    }
}

impl ProviderSpec {
    /// Instantiate the provider. The HTTP provider probes the backend once
    /// to learn its dimension.
    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>, EmbedError> {
        Ok(match self {
            ProviderSpec::File(p) => Box::new(FileProvider::open(p)?),
            ProviderSpec::Hash(d) => Box::new(HashProvider::new(*d)),
            ProviderSpec::Http(u) => Box::new(HttpProvider::connect(u)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_deterministic_unit_norm() {
        let p = HashProvider::new(64);
        let a = embed_text(&p, "a stack is LIFO").unwrap();
        let b = embed_text(&p, "a stack is LIFO").unwrap();
        assert_eq!(a, b);
        let n: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
        // NFC-equivalent inputs share a vector
        assert_eq!(hash_embed("caf\u{e9}", 8), hash_embed("cafe\u{301}", 8));
    }

    #[test]
    fn hash_pinned_bits() {
        // Bits recomputed outside Rust from SHA-256 and the SplitMix64
        // constants.
        let v = hash_embed("hello", 4);
        assert_eq!(
            v.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            [
                0xbfdf_095b_8cf7_d7bd,
                0xbfdf_a825_b6a3_af21,
                0x3fd6_e7cd_e1e8_eb03,
                0x3fe4_0975_2ac0_ed2d
            ]
        );
    }

    #[test]
    fn pair_order_matters() {
        let p = HashProvider::new(32);
        let ab = embed_pair(&p, "alpha", "beta").unwrap();
        let ba = embed_pair(&p, "beta", "alpha").unwrap();
        assert_ne!(ab, ba);
        assert_eq!(ab, embed_pair(&p, "alpha", "beta").unwrap());
        assert_ne!(pair_key("a", "b"), pair_key("b", "a"));
    }

    fn words(n: usize, tag: &str) -> String {
        (0..n)
            .map(|i| format!("{tag}{i}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    #[test]
    fn truncation_rules() {
        let count = |s: &str| s.split_whitespace().count();
        let (r, s) = truncate_pair(&words(100, "r"), &words(200, "s"), 256);
        assert_eq!((count(&r), count(&s)), (100, 156));
        let (r, s) = truncate_pair(&words(200, "r"), &words(100, "s"), 256);
        assert_eq!((count(&r), count(&s)), (156, 100));
        let (r, s) = truncate_pair(&words(150, "r"), &words(150, "s"), 256);
        assert_eq!((count(&r), count(&s)), (128, 128));
        assert!(r.ends_with("r127") && s.ends_with("s127"));
        let (r, s) = truncate_pair("a  b", "c", 256);
        assert_eq!((r.as_str(), s.as_str()), ("a b", "c"));
    }

    #[test]
    fn overlong_pair_is_embedded_after_truncation() {
        let p = HashProvider::new(16);
        let long_ref = words(100, "r");
        let long_stu = words(200, "s");
        let (tr, ts) = truncate_pair(&long_ref, &long_stu, PAIR_TOKEN_CAP);
        assert_eq!(
            embed_pair(&p, &long_ref, &long_stu).unwrap(),
            embed_pair(&p, &tr, &ts).unwrap()
        );
        let extra = format!("{long_stu} tail");
        assert_eq!(
            embed_pair(&p, &long_ref, &long_stu).unwrap(),
            embed_pair(&p, &long_ref, &extra).unwrap()
        );
    }

    #[test]
    fn empty_text_rejected() {
        let p = HashProvider::new(8);
        assert!(matches!(embed_text(&p, "  "), Err(EmbedError::EmptyText)));
        assert!(matches!(
            embed_pair(&p, "x", ""),
            Err(EmbedError::EmptyText)
        ));
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(
            "hash:768".parse::<ProviderSpec>().unwrap(),
            ProviderSpec::Hash(768)
        );
        assert_eq!(
            "file:/tmp/e.txt".parse::<ProviderSpec>().unwrap(),
            ProviderSpec::File("/tmp/e.txt".into())
        );
        assert_eq!(
            "http:http://127.0.0.1:9000"
                .parse::<ProviderSpec>()
                .unwrap(),
            ProviderSpec::Http("http://127.0.0.1:9000".into())
        );
        assert_eq!(
            "http://127.0.0.1:9000".parse::<ProviderSpec>().unwrap(),
            ProviderSpec::Http("http://127.0.0.1:9000".into())
        );
        assert!("hash:0".parse::<ProviderSpec>().is_err());
        assert!("bert".parse::<ProviderSpec>().is_err());
    }
}
