//! Word embedding store and cosine similarity.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::corpus::normalize;
use crate::error::{Error, Result};
use crate::warnings::Warnings;

/// Fixed-dimension word vectors keyed by normalized word.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn from_vectors(
        dim: usize,
        vectors: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self> {
        let vectors: HashMap<String, Vec<f64>> = vectors.into_iter().collect();
        if let Some((_, v)) = vectors.iter().find(|(_, v)| v.len() != dim) {
            return Err(Error::DimError {
                left: dim,
                right: v.len(),
            });
        }
        Ok(Self { dim, vectors })
    }

    /// A store with no vectors; every lookup misses. Lets strategies run on
    /// corpora whose tokens carry inline vectors.
    pub fn empty() -> Self {
        Self {
            dim: 0,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Look up the vector for an already-normalized word.
    pub fn lookup(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vectors.contains_key(word)
    }
}

/// Cosine similarity in [-1, 1]. By convention an all-zero vector has
/// similarity 0 to everything.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimError {
            left: u.len(),
            right: v.len(),
        });
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Load embeddings from a text file: optional `vocab_size dim` header line,
/// then `word v1 v2 ... vd` lines. The dimension comes from the header or
/// the first body line. Malformed, wrong-arity, or non-finite lines are
/// skipped with counted warnings; on duplicate words the first wins.
pub fn load_embeddings(path: &Path) -> Result<(EmbeddingStore, Warnings)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut warnings = Warnings::new();
    let mut dim: Option<usize> = None;
    let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
    let mut first_content_line = true;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if first_content_line {
            first_content_line = false;
            // The conventional two-integer header "vocab_size dim".
            if fields.len() == 2 {
                if let (Ok(_), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                    if d > 0 {
                        dim = Some(d);
                        continue;
                    }
                }
            }
        }
        let word = normalize(fields[0]);
        if word.is_empty() {
            warnings.push(format!("line {}: empty word, skipped", lineno + 1));
            continue;
        }
        let values: std::result::Result<Vec<f64>, _> =
            fields[1..].iter().map(|f| f.parse::<f64>()).collect();
        let values = match values {
            Ok(v) if !v.is_empty() => v,
            _ => {
                warnings.push(format!("line {}: malformed vector, skipped", lineno + 1));
                continue;
            }
        };
        if values.iter().any(|x| !x.is_finite()) {
            warnings.push(format!("line {}: non-finite value, skipped", lineno + 1));
            continue;
        }
        let d = *dim.get_or_insert(values.len());
        if values.len() != d {
            warnings.push(format!(
                "line {}: expected {d} dimensions, got {}, skipped",
                lineno + 1,
                values.len()
            ));
            continue;
        }
        if vectors.contains_key(&word) {
            warnings.push(format!(
                "line {}: duplicate word {word:?}, first occurrence wins",
                lineno + 1
            ));
            continue;
        }
        vectors.insert(word, values);
    }
    if vectors.is_empty() {
        return Err(Error::EmptyEmbeddings);
    }
    let store = EmbeddingStore {
        dim: dim.expect("dim set once a vector is stored"),
        vectors,
    };
    Ok((store, warnings))
}
