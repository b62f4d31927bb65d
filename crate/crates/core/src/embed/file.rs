use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{pair_key, text_key, EmbedError, EmbeddingProvider, ProviderKind};

pub const EMBEDDING_FILE_MAGIC: &str = "asag-embeddings v1";

/// Precomputed vectors keyed by [`text_key`] or [`pair_key`].
///
/// Text format: a header `asag-embeddings v1 dim=<d>`, then one record per
/// line, `<64 hex key>\t<d space-separated decimals>`. Values are written
/// in shortest round-trip form, so a load returns the stored bits.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingFile {
    dim: usize,
    records: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingFile {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self {
            dim,
            records: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.records.get(key).map(Vec::as_slice)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }

    /// Insert under an explicit key. Replaces an existing record.
    pub fn insert(&mut self, key: String, vector: Vec<f64>) -> Result<(), EmbedError> {
        if vector.len() != self.dim {
            return Err(EmbedError::Dimension {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if !vector.iter().all(|x| x.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        self.records.insert(key, vector);
        Ok(())
    }

    pub fn insert_text(&mut self, text: &str, vector: Vec<f64>) -> Result<(), EmbedError> {
        self.insert(text_key(text), vector)
    }

    /// Stores under the key of the pair as given; callers that want the
    /// lookup to match [`super::embed_pair`] must pass the truncated pair.
    pub fn insert_pair(
        &mut self,
        reference: &str,
        student: &str,
        vector: Vec<f64>,
    ) -> Result<(), EmbedError> {
        self.insert(pair_key(reference, student), vector)
    }

    pub fn read_from<R: Read>(reader: R) -> Result<Self, EmbedError> {
        let mut lines = BufReader::new(reader).lines();
        let header = lines.next().transpose()?.ok_or(EmbedError::Format {
            line: 1,
            message: "empty file".into(),
        })?;
        let dim = header
            .strip_prefix(EMBEDDING_FILE_MAGIC)
            .and_then(|rest| rest.trim().strip_prefix("dim="))
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|d| *d > 0)
            .ok_or_else(|| EmbedError::Format {
                line: 1,
                message: format!("bad header {header:?}"),
            })?;
        let mut file = Self::new(dim);
        for (n, line) in lines.enumerate() {
            let line_no = n + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fail = |message: String| EmbedError::Format {
                line: line_no,
                message,
            };
            let (key, values) = line
                .split_once('\t')
                .ok_or_else(|| fail("missing tab".into()))?;
            if key.len() != 64 || !key.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(fail(format!("bad key {key:?}")));
            }
            let vector = values
                .split(' ')
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| fail(format!("bad value {v:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if file.records.contains_key(key) {
                return Err(fail(format!("duplicate key {key}")));
            }
            file.insert(key.to_ascii_lowercase(), vector)
                .map_err(|e| fail(e.to_string()))?;
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        Self::read_from(File::open(path)?)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), EmbedError> {
        writeln!(w, "{EMBEDDING_FILE_MAGIC} dim={}", self.dim)?;
        for (key, v) in &self.records {
            let values: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{key}\t{}", values.join(" "))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        let f = File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }
}

#[derive(Debug, Clone)]
pub struct FileProvider {
    file: EmbeddingFile,
}

impl FileProvider {
    pub fn new(file: EmbeddingFile) -> Self {
        Self { file }
    }

    pub fn open(path: &Path) -> Result<Self, EmbedError> {
        Ok(Self::new(EmbeddingFile::load(path)?))
    }

    fn lookup(&self, key: String) -> Result<Vec<f64>, EmbedError> {
        self.file
            .get(&key)
            .map(<[f64]>::to_vec)
            .ok_or(EmbedError::LookupMiss(key))
    }
}

impl EmbeddingProvider for FileProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::File
    }

    fn dim(&self) -> usize {
        self.file.dim()
    }

    fn supports_pairs(&self) -> bool {
        true
    }

    fn text_vectors(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        texts.iter().map(|t| self.lookup(text_key(t))).collect()
    }

    fn pair_vectors(&self, pairs: &[(&str, &str)]) -> Result<Vec<Vec<f64>>, EmbedError> {
        pairs
            .iter()
            .map(|(r, s)| self.lookup(pair_key(r, s)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{embed_pair, embed_text, hash_embed};

    #[test]
    fn two_record_fixture_is_bit_exact() {
        let mut f = EmbeddingFile::new(3);
        f.insert_text("first", vec![0.1, -2.5e-300, 1.0 / 3.0])
            .unwrap();
        f.insert_pair("ref", "stu", vec![f64::MIN_POSITIVE, 7.0, -0.0])
            .unwrap();
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("asag-embeddings v1 dim=3\n"));
        let p = FileProvider::new(EmbeddingFile::read_from(buf.as_slice()).unwrap());
        let v = embed_text(&p, "first").unwrap();
        assert_eq!(v[2].to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(v[1], -2.5e-300);
        let w = embed_pair(&p, "ref", "stu").unwrap();
        assert_eq!(w[0], f64::MIN_POSITIVE);
        assert!(w[2].is_sign_negative());
    }

    #[test]
    fn miss_reports_key() {
        let p = FileProvider::new(EmbeddingFile::new(2));
        match embed_text(&p, "absent") {
            Err(EmbedError::LookupMiss(k)) => assert_eq!(k, text_key("absent")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trip_generated_fixture() {
        let mut f = EmbeddingFile::new(16);
        let texts: Vec<String> = (0..50).map(|i| format!("answer number {i}")).collect();
        for t in &texts {
            f.insert_text(t, hash_embed(t, 16)).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        f.save(&path).unwrap();
        let p = FileProvider::open(&path).unwrap();
        for t in &texts {
            assert_eq!(embed_text(&p, t).unwrap(), hash_embed(t, 16));
        }
    }

    #[test]
    fn rejects_malformed() {
        assert!(EmbeddingFile::read_from("nope\n".as_bytes()).is_err());
        let key = "a".repeat(64);
        let bad_dim = format!("asag-embeddings v1 dim=2\n{key}\t1 2 3\n");
        assert!(matches!(
            EmbeddingFile::read_from(bad_dim.as_bytes()),
            Err(EmbedError::Format { line: 2, .. })
        ));
        let dup = format!("asag-embeddings v1 dim=1\n{key}\t1\n{key}\t2\n");
        assert!(EmbeddingFile::read_from(dup.as_bytes()).is_err());
    }
}
