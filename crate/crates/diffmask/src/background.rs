//! General-domain unigram frequency table.
//!
//! The table holds word counts from a large background corpus (e.g. web-scale
//! unigram counts) and answers relative-frequency queries. Words absent from
//! the table get a Laplace-style floor count so every query is positive.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::corpus::normalize;
use crate::error::{Error, Result};
use crate::warnings::Warnings;

#[derive(Debug, Clone)]
pub struct BackgroundTable {
    counts: HashMap<String, u64>,
    total: u128,
    floor_count: u64,
}

impl BackgroundTable {
    /// Build a table from in-memory pairs. Words are stored as given.
    pub fn from_counts(pairs: impl IntoIterator<Item = (String, u64)>, floor_count: u64) -> Result<Self> {
        let counts: HashMap<String, u64> = pairs.into_iter().collect();
        Self::new(counts, floor_count)
    }

    fn new(counts: HashMap<String, u64>, floor_count: u64) -> Result<Self> {
        if floor_count == 0 {
            return Err(Error::Config(vec!["floor-count must be >= 1".to_string()]));
        }
        if counts.is_empty() {
            return Err(Error::EmptyBackground);
        }
        let total = counts.values().map(|&c| c as u128).sum();
        Ok(Self {
            counts,
            total,
            floor_count,
        })
    }

    pub fn count(&self, word: &str) -> Option<u64> {
        self.counts.get(word).copied()
    }

    pub fn total(&self) -> u128 {
        self.total
    }

    pub fn floor_count(&self) -> u64 {
        self.floor_count
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Relative frequency of `word` (already normalized): its count divided
    /// by the table total, or `floor_count / total` for absent words.
    /// Always positive.
    pub fn relative_freq(&self, word: &str) -> f64 {
        let count = self.counts.get(word).copied().unwrap_or(self.floor_count);
        count as f64 / self.total as f64
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }
}

/// Load a background table from a TSV file of `word<TAB>count` lines.
/// Lines starting with `#` are comments. Words are normalized with the
/// corpus normalization; on duplicates the last occurrence wins, with a
/// counted warning.
pub fn load_background(
    path: &Path,
    floor_count: u64,
) -> Result<(BackgroundTable, Warnings)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut warnings = Warnings::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim_end();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parse_err = |detail: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            detail,
        };
        let (word, count) = trimmed
            .split_once('\t')
            .ok_or_else(|| parse_err("missing tab separator".to_string()))?;
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("invalid count {count:?}")))?;
        if count == 0 {
            return Err(parse_err("count must be >= 1".to_string()));
        }
        let word = normalize(word);
        if word.is_empty() {
            return Err(parse_err("word is empty after normalization".to_string()));
        }
        if counts.insert(word.clone(), count).is_some() {
            warnings.push(format!(
                "line {}: duplicate word {word:?}, last occurrence wins",
                lineno + 1
            ));
        }
    }
    let table = BackgroundTable::new(counts, floor_count)?;
    Ok((table, warnings))
}
