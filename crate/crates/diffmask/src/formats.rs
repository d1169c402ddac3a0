//! On-disk file formats.
//!
//! JSON Lines outputs start with a header record `{"config": {...}}`
//! embedding the resolved run parameters for provenance; JSON outputs carry
//! the same object under a `config` key. Probabilities in plan files are
//! rounded to 9 decimals.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus::normalize;
use crate::error::{Error, Result};
use crate::masker::{MaskDistribution, MaskPlan, Replacement, Strategy};
use crate::tficf::{DiffSet, Seed, TficfScore};

/// Resolved run parameters, embedded in every output file. Execution knobs
/// (worker count, file locations) are excluded so that reruns of the same
/// data produce byte-identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub strategy: Strategy,
    pub k: usize,
    pub ratio: f64,
    pub rng_seed: u64,
    pub clamp_epsilon: f64,
    pub floor_count: u64,
    pub min_count: u64,
    pub replacement: Replacement,
}

impl From<&RunConfig> for Params {
    fn from(cfg: &RunConfig) -> Self {
        Params {
            strategy: cfg.strategy,
            k: cfg.k,
            ratio: cfg.ratio,
            rng_seed: cfg.rng_seed,
            clamp_epsilon: cfg.clamp_epsilon,
            floor_count: cfg.floor_count,
            min_count: cfg.min_count,
            replacement: cfg.replacement,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: Params,
}

/// Round to 9 decimal places, the precision of probabilities in plan files.
pub fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// One document's plan plus its distribution, as stored in a plan file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub id: String,
    pub strategy: Strategy,
    pub ratio: f64,
    pub rng_seed: u64,
    pub probs: Vec<f64>,
    pub argmax_seed: Option<Vec<Option<usize>>>,
    pub masked_tokens: Vec<usize>,
    pub masked_groups: Vec<usize>,
}

impl PlanRecord {
    pub fn new(dist: &MaskDistribution, plan: &MaskPlan) -> Self {
        PlanRecord {
            id: plan.doc_id.clone(),
            strategy: dist.strategy,
            ratio: plan.ratio,
            rng_seed: plan.rng_seed,
            probs: dist.probs.iter().map(|&p| round9(p)).collect(),
            argmax_seed: dist.argmax_seed.clone(),
            masked_tokens: plan.masked_token_indices.clone(),
            masked_groups: plan.masked_group_indices.clone(),
        }
    }

    pub fn to_plan(&self, replacement: Replacement) -> MaskPlan {
        MaskPlan {
            doc_id: self.id.clone(),
            masked_token_indices: self.masked_tokens.clone(),
            masked_group_indices: self.masked_groups.clone(),
            ratio: self.ratio,
            rng_seed: self.rng_seed,
            replacement,
        }
    }

    pub fn to_distribution(&self) -> MaskDistribution {
        MaskDistribution {
            doc_id: self.id.clone(),
            strategy: self.strategy,
            probs: self.probs.clone(),
            argmax_seed: self.argmax_seed.clone(),
        }
    }
}

fn open_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn write_json_line<T: Serialize>(w: &mut impl Write, path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))
}

pub fn write_plans(path: &Path, params: &Params, records: &[PlanRecord]) -> Result<()> {
    let mut w = open_writer(path)?;
    write_json_line(&mut w, path, &Header {
        config: params.clone(),
    })?;
    for record in records {
        write_json_line(&mut w, path, record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a plan file, tolerating a missing header (bare records).
pub fn read_plans(path: &Path) -> Result<(Option<Params>, Vec<PlanRecord>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut params = None;
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |e: serde_json::Error| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            detail: e.to_string(),
        };
        if lineno == 0 {
            if let Ok(header) = serde_json::from_str::<Header>(&line) {
                params = Some(header.config);
                continue;
            }
        }
        records.push(serde_json::from_str::<PlanRecord>(&line).map_err(parse_err)?);
    }
    Ok((params, records))
}

#[derive(Debug, Serialize, Deserialize)]
struct AttentionRecord {
    id: String,
    scores: Vec<f64>,
}

/// Attention file: JSON Lines of `{"id": ..., "scores": [...]}`.
pub fn read_attention(path: &Path) -> Result<HashMap<String, Vec<f64>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut scores = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AttentionRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            detail: e.to_string(),
        })?;
        scores.insert(record.id, record.scores);
    }
    Ok(scores)
}

#[derive(Debug, Serialize, Deserialize)]
struct SpansRecord {
    id: String,
    spans: Vec<(usize, usize)>,
}

/// Entity spans file: JSON Lines of `{"id": ..., "spans": [[start, end]]}`.
pub fn read_spans(path: &Path) -> Result<HashMap<String, Vec<(usize, usize)>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut spans = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SpansRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            detail: e.to_string(),
        })?;
        spans.insert(record.id, record.spans);
    }
    Ok(spans)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub rank: usize,
    pub word: String,
    pub score: f64,
    pub corpus_count: u64,
}

/// The seeds file: every scored word plus the selected diff-set.
#[derive(Serialize, Deserialize)]
pub struct SeedsFile {
    pub config: Params,
    pub scores: Vec<ScoreRecord>,
    pub seeds: Vec<Seed>,
}

pub fn write_seeds(
    path: &Path,
    params: &Params,
    scores: &[TficfScore],
    diffset: &DiffSet,
) -> Result<()> {
    let file = SeedsFile {
        config: params.clone(),
        scores: scores
            .iter()
            .enumerate()
            .map(|(i, s)| ScoreRecord {
                rank: i + 1,
                word: s.word.clone(),
                score: s.score,
                corpus_count: s.corpus_count,
            })
            .collect(),
        seeds: diffset.seeds.clone(),
    };
    let mut w = open_writer(path)?;
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_seeds(path: &Path) -> Result<SeedsFile> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let seeds_file: SeedsFile =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            detail: e.to_string(),
        })?;
    let diffset = DiffSet {
        seeds: seeds_file.seeds.clone(),
    };
    diffset.validate()?;
    Ok(seeds_file)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MaskedRecord {
    pub id: String,
    pub tokens: Vec<String>,
}

pub fn write_masked(path: &Path, params: &Params, records: &[MaskedRecord]) -> Result<()> {
    let mut w = open_writer(path)?;
    write_json_line(&mut w, path, &Header {
        config: params.clone(),
    })?;
    for record in records {
        write_json_line(&mut w, path, record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Stopword file: one word per line, `#` comments; words are normalized.
pub fn read_stopwords(path: &Path) -> Result<HashSet<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut words = HashSet::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let word = normalize(trimmed);
        if !word.is_empty() {
            words.insert(word);
        }
    }
    Ok(words)
}

/// Replacement vocabulary file: one surface token per line.
pub fn read_vocab(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut vocab = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            vocab.push(trimmed.to_string());
        }
    }
    Ok(vocab)
}

/// Deterministic fallback vocabulary: the sorted distinct token texts of a
/// corpus.
pub fn corpus_vocabulary(documents: &[crate::corpus::Document]) -> Vec<String> {
    let set: BTreeSet<String> = documents
        .iter()
        .flat_map(|d| d.tokens.iter().map(|t| t.text.clone()))
        .collect();
    set.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Params {
        Params {
            strategy: Strategy::DifferenceNn,
            k: 20,
            ratio: 0.25,
            rng_seed: 0,
            clamp_epsilon: 1e-6,
            floor_count: 1,
            min_count: 5,
            replacement: Replacement::Sentinel,
        }
    }

    #[test]
    fn round9_examples() {
        assert_eq!(round9(0.25), 0.25);
        assert_eq!(round9(1.0 / 3.0), 0.333333333);
        assert_eq!(round9(0.0012345674), 0.001234567);
        assert_eq!(round9(0.0012345676), 0.001234568);
    }

    #[test]
    fn plan_roundtrip_with_header() {
        let record = PlanRecord {
            id: "0".to_string(),
            strategy: Strategy::DifferenceNn,
            ratio: 0.25,
            rng_seed: 7,
            probs: vec![0.6, 0.4],
            argmax_seed: Some(vec![Some(1), None]),
            masked_tokens: vec![0],
            masked_groups: vec![0],
        };
        let f = tempfile::NamedTempFile::new().unwrap();
        write_plans(f.path(), &params(), std::slice::from_ref(&record)).unwrap();
        let (header, records) = read_plans(f.path()).unwrap();
        assert_eq!(header.unwrap(), params());
        assert_eq!(records, vec![record]);
    }

    #[test]
    fn plan_file_without_header_is_readable() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(
            f.path(),
            r#"{"id":"0","strategy":"random","ratio":0.25,"rng_seed":0,"probs":[1.0],"argmax_seed":null,"masked_tokens":[0],"masked_groups":[0]}
"#,
        )
        .unwrap();
        let (header, records) = read_plans(f.path()).unwrap();
        assert!(header.is_none());
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].strategy, Strategy::Random);
    }

    #[test]
    fn attention_and_spans_files() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), "{\"id\":\"0\",\"scores\":[1.0,2.0]}\n").unwrap();
        let scores = read_attention(f.path()).unwrap();
        assert_eq!(scores["0"], vec![1.0, 2.0]);

        let g = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(g.path(), "{\"id\":\"0\",\"spans\":[[0,2],[3,4]]}\n").unwrap();
        let spans = read_spans(g.path()).unwrap();
        assert_eq!(spans["0"], vec![(0, 2), (3, 4)]);
    }

    #[test]
    fn seeds_file_roundtrip() {
        let diffset = DiffSet {
            seeds: vec![
                Seed {
                    word: "ion".to_string(),
                    vector: vec![1.0, 0.0],
                },
                Seed {
                    word: "flux".to_string(),
                    vector: vec![0.0, 1.0],
                },
            ],
        };
        let scores = vec![TficfScore {
            word: "ion".to_string(),
            corpus_count: 12,
            corpus_rel_freq: 0.1,
            background_rel_freq: 1e-8,
            score: 1e7,
        }];
        let f = tempfile::NamedTempFile::new().unwrap();
        write_seeds(f.path(), &params(), &scores, &diffset).unwrap();
        let loaded = read_seeds(f.path()).unwrap();
        assert_eq!(loaded.seeds, diffset.seeds);
        assert_eq!(loaded.scores[0].rank, 1);
        assert_eq!(loaded.config, params());
    }

    #[test]
    fn corpus_vocabulary_is_sorted_and_distinct() {
        let docs = vec![
            crate::corpus::word_tokenize("0", "beta alpha beta").unwrap(),
            crate::corpus::word_tokenize("1", "Alpha gamma").unwrap(),
        ];
        assert_eq!(
            corpus_vocabulary(&docs),
            vec!["Alpha", "alpha", "beta", "gamma"]
        );
    }
}
