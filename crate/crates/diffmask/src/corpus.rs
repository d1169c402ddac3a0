//! Corpus loading and tokenization.
//!
//! Documents are ordered token sequences partitioned into maskable groups.
//! For plaintext input each whitespace word becomes its own group; the
//! pretokenized JSON Lines format carries an explicit grouping (subword
//! tokens of one word, or patches of one object region) plus optional
//! inline vectors for non-text tokens.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::warnings::Warnings;

/// A single token. `normalized` is the form used for frequency and
/// embedding lookups; `text` keeps the surface form for output.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub text: String,
    pub normalized: String,
    pub group_index: usize,
    pub inline_vector: Option<Vec<f64>>,
}

/// A maskable unit: the token indices it owns plus an optional label
/// (the word itself, or an object tag such as "person").
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub members: Vec<usize>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<Token>,
    pub groups: Vec<Group>,
}

/// Normalize a word: Unicode-aware lowercase, then strip leading and
/// trailing non-alphanumeric characters. Idempotent.
pub fn normalize(raw: &str) -> String {
    raw.to_lowercase()
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_string()
}

fn strip_ends(raw: &str) -> &str {
    raw.trim_matches(|c: char| !c.is_alphanumeric())
}

impl Document {
    /// Check the grouping invariants: every group nonempty, indices in
    /// range, and the groups partition `0..tokens.len()` exactly.
    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        if n == 0 {
            return Err(Error::EmptyDocument(self.id.clone()));
        }
        let mut owner = vec![None; n];
        for (g, group) in self.groups.iter().enumerate() {
            if group.members.is_empty() {
                return Err(Error::InvalidGrouping {
                    doc_id: self.id.clone(),
                    detail: format!("group {g} has no members"),
                });
            }
            for &i in &group.members {
                if i >= n {
                    return Err(Error::InvalidGrouping {
                        doc_id: self.id.clone(),
                        detail: format!("group {g} references token {i} but document has {n}"),
                    });
                }
                if let Some(prev) = owner[i] {
                    return Err(Error::InvalidGrouping {
                        doc_id: self.id.clone(),
                        detail: format!("token {i} appears in groups {prev} and {g}"),
                    });
                }
                owner[i] = Some(g);
            }
        }
        if let Some(i) = owner.iter().position(|o| o.is_none()) {
            return Err(Error::InvalidGrouping {
                doc_id: self.id.clone(),
                detail: format!("token {i} belongs to no group"),
            });
        }
        for (i, token) in self.tokens.iter().enumerate() {
            if owner[i] != Some(token.group_index) {
                return Err(Error::InvalidGrouping {
                    doc_id: self.id.clone(),
                    detail: format!("token {i} has stale group_index {}", token.group_index),
                });
            }
        }
        Ok(())
    }

    /// Size of the largest group, in tokens.
    pub fn max_group_size(&self) -> usize {
        self.groups.iter().map(|g| g.members.len()).max().unwrap_or(0)
    }
}

/// Split `text` on whitespace into one singleton group per word.
///
/// Leading/trailing punctuation is stripped from each word; words that are
/// empty after stripping are dropped. Group labels are the normalized forms.
pub fn word_tokenize(id: &str, text: &str) -> Result<Document> {
    let mut tokens = Vec::new();
    let mut groups = Vec::new();
    for raw in text.split_whitespace() {
        let stripped = strip_ends(raw);
        if stripped.is_empty() {
            continue;
        }
        let normalized = normalize(stripped);
        let group_index = groups.len();
        groups.push(Group {
            members: vec![tokens.len()],
            label: Some(normalized.clone()),
        });
        tokens.push(Token {
            text: stripped.to_string(),
            normalized,
            group_index,
            inline_vector: None,
        });
    }
    if tokens.is_empty() {
        return Err(Error::EmptyDocument(id.to_string()));
    }
    Ok(Document {
        id: id.to_string(),
        tokens,
        groups,
    })
}

/// Load a plaintext corpus: UTF-8, one document per line. Document ids are
/// zero-based line numbers. Blank (or punctuation-only) lines are skipped
/// with a counted warning.
pub fn load_plaintext(path: &Path) -> Result<(Vec<Document>, Warnings)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut documents = Vec::new();
    let mut warnings = Warnings::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        match word_tokenize(&lineno.to_string(), &line) {
            Ok(doc) => documents.push(doc),
            Err(Error::EmptyDocument(_)) => {
                warnings.push(format!("line {lineno} is blank, skipped"));
            }
            Err(e) => return Err(e),
        }
    }
    if documents.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok((documents, warnings))
}

#[derive(Debug, Serialize, Deserialize)]
struct GroupRecord {
    members: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(flatten, skip_serializing)]
    extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PretokenizedRecord {
    id: String,
    tokens: Vec<String>,
    groups: Vec<GroupRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vectors: Option<Vec<Vec<f64>>>,
    #[serde(flatten, skip_serializing)]
    extra: BTreeMap<String, serde_json::Value>,
}

/// Load a pretokenized corpus: JSON Lines, one record per document with an
/// explicit group partition and optional per-token vectors. Unknown record
/// fields are ignored with a counted warning.
pub fn load_pretokenized(path: &Path) -> Result<(Vec<Document>, Warnings)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut documents = Vec::new();
    let mut warnings = Warnings::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            warnings.push(format!("line {lineno} is blank, skipped"));
            continue;
        }
        let record: PretokenizedRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                detail: e.to_string(),
            })?;
        if !record.extra.is_empty() {
            let keys: Vec<&str> = record.extra.keys().map(String::as_str).collect();
            warnings.push(format!(
                "record {:?}: ignored unknown fields {}",
                record.id,
                keys.join(", ")
            ));
        }
        documents.push(document_from_record(record, &mut warnings)?);
    }
    if documents.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok((documents, warnings))
}

fn document_from_record(
    record: PretokenizedRecord,
    warnings: &mut Warnings,
) -> Result<Document> {
    let n = record.tokens.len();
    if n == 0 {
        return Err(Error::EmptyDocument(record.id));
    }
    let vectors = match record.vectors {
        Some(vectors) => {
            if vectors.len() != n {
                return Err(Error::InvalidVectors {
                    doc_id: record.id,
                    detail: format!("{} vectors for {n} tokens", vectors.len()),
                });
            }
            let dim = vectors[0].len();
            if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
                return Err(Error::InvalidVectors {
                    doc_id: record.id,
                    detail: format!("ragged dimensions: {dim} vs {}", v.len()),
                });
            }
            if vectors.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::InvalidVectors {
                    doc_id: record.id,
                    detail: "non-finite entry".to_string(),
                });
            }
            Some(vectors)
        }
        None => None,
    };

    let mut group_of = vec![usize::MAX; n];
    let mut groups = Vec::with_capacity(record.groups.len());
    for (g, gr) in record.groups.into_iter().enumerate() {
        for &i in &gr.members {
            if i < n && group_of[i] == usize::MAX {
                group_of[i] = g;
            }
        }
        if !gr.extra.is_empty() {
            warnings.push(format!(
                "record {:?}: ignored unknown group fields",
                record.id
            ));
        }
        groups.push(Group {
            members: gr.members,
            label: gr.label,
        });
    }

    let mut vectors = vectors.map(|v| v.into_iter().map(Some).collect::<Vec<_>>());
    let tokens = record
        .tokens
        .iter()
        .enumerate()
        .map(|(i, text)| Token {
            text: text.clone(),
            normalized: normalize(text),
            group_index: group_of[i],
            inline_vector: vectors
                .as_mut()
                .and_then(|v| v[i].take()),
        })
        .collect();

    let doc = Document {
        id: record.id,
        tokens,
        groups,
    };
    doc.validate()?;
    Ok(doc)
}

/// Write documents back out in the pretokenized JSON Lines format.
pub fn write_pretokenized(documents: &[Document], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for doc in documents {
        let vectors: Option<Vec<Vec<f64>>> = if doc.tokens.iter().all(|t| t.inline_vector.is_some())
        {
            Some(
                doc.tokens
                    .iter()
                    .map(|t| t.inline_vector.clone().unwrap())
                    .collect(),
            )
        } else {
            None
        };
        let record = PretokenizedRecord {
            id: doc.id.clone(),
            tokens: doc.tokens.iter().map(|t| t.text.clone()).collect(),
            groups: doc
                .groups
                .iter()
                .map(|g| GroupRecord {
                    members: g.members.clone(),
                    label: g.label.clone(),
                    extra: BTreeMap::new(),
                })
                .collect(),
            vectors,
            extra: BTreeMap::new(),
        };
        serde_json::to_writer(&mut writer, &record)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        writer.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
