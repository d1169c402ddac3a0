//! Run configuration: defaults, config-file parsing, and validation.
//!
//! Precedence is command-line flag > config-file value > built-in default.
//! The config file is flat `key=value` text, one per line, with `#`
//! comments; unknown keys are rejected by name.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::masker::{Replacement, Strategy};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub background: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub attention: Option<PathBuf>,
    pub spans: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub k: usize,
    pub ratio: f64,
    pub strategy: Strategy,
    pub rng_seed: u64,
    pub clamp_epsilon: f64,
    pub floor_count: u64,
    pub min_count: u64,
    pub replacement: Replacement,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            background: None,
            embeddings: None,
            stopwords: None,
            attention: None,
            spans: None,
            out: None,
            k: 20,
            ratio: 0.25,
            strategy: Strategy::DifferenceNn,
            rng_seed: 0,
            clamp_epsilon: 1e-6,
            floor_count: 1,
            min_count: 5,
            replacement: Replacement::Sentinel,
        }
    }
}

impl RunConfig {
    /// Apply one `key=value` assignment. Key aliases with `-` are accepted.
    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let key = key.replace('-', "_");
        match key.as_str() {
            "corpus" => self.corpus = Some(PathBuf::from(value)),
            "background" => self.background = Some(PathBuf::from(value)),
            "embeddings" => self.embeddings = Some(PathBuf::from(value)),
            "stopwords" => self.stopwords = Some(PathBuf::from(value)),
            "attention" => self.attention = Some(PathBuf::from(value)),
            "spans" => self.spans = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "k" => self.k = parse_num(&key, value)?,
            "ratio" => self.ratio = parse_num(&key, value)?,
            "strategy" => {
                self.strategy = value.parse().map_err(|_| format!("unknown strategy {value:?}"))?
            }
            "rng_seed" => self.rng_seed = parse_num(&key, value)?,
            "clamp_epsilon" => self.clamp_epsilon = parse_num(&key, value)?,
            "floor_count" => self.floor_count = parse_num(&key, value)?,
            "min_count" => self.min_count = parse_num(&key, value)?,
            "replacement" => {
                self.replacement = value
                    .parse()
                    .map_err(|_| format!("unknown replacement {value:?}"))?
            }
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Merge a config file into `self`. All problems (unreadable file
    /// aside) are collected into one error list.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut errors = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('=') {
                Some((key, value)) => {
                    if let Err(msg) = self.set(key.trim(), value.trim()) {
                        errors.push(format!("line {}: {msg}", lineno + 1));
                    }
                }
                None => errors.push(format!("line {}: expected key=value", lineno + 1)),
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Check value ranges. Collects every violation.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.ratio.is_nan() || self.ratio <= 0.0 || self.ratio >= 1.0 {
            errors.push(format!("ratio out of range: {}", self.ratio));
        }
        if self.k == 0 {
            errors.push("k must be >= 1".to_string());
        }
        if self.clamp_epsilon.is_nan() || self.clamp_epsilon <= 0.0 {
            errors.push(format!("clamp_epsilon must be > 0: {}", self.clamp_epsilon));
        }
        if self.floor_count == 0 {
            errors.push("floor_count must be >= 1".to_string());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    /// A required path, or a named validation error.
    pub fn require(path: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
        path.clone()
            .ok_or_else(|| Error::Config(vec![format!("missing required path: {name}")]))
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value for {key}: {value:?}"))
}
