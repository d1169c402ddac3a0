//! Per-token mask distributions and group-atomic mask plans.
//!
//! Scoring turns a document into a probability distribution over its tokens
//! under one of five strategies:
//!
//! * `difference_nn` — a token's raw score is its maximum cosine similarity
//!   over the diff-set seed embeddings (nearest-neighbor), so a token is
//!   favored if it relates closely to *any* seed concept.
//! * `difference_centroid` — raw score is the cosine similarity to the mean
//!   of the seed embeddings.
//! * `random` — uniform 1/N.
//! * `attention` — proportional to externally supplied attention scores.
//! * `entity` — in-span tokens weighted against out-of-span tokens, from
//!   externally supplied span annotations.
//!
//! Raw scores are clamped below at a small epsilon before normalization so
//! negative-similarity and out-of-vocabulary tokens stay maskable (barely)
//! and the distribution is always well defined.
//!
//! Sampling then draws whole groups without replacement, proportionally to
//! an aggregate of member probabilities, until the masking budget
//! `ceil(ratio * N)` is covered.

mod sample;

pub use sample::{apply_plan, doc_stream_seed, sample_plan, splitmix64};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::embedding::{cosine, EmbeddingStore};
use crate::error::{Error, Result};
use crate::tficf::DiffSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    DifferenceNn,
    DifferenceCentroid,
    Random,
    Attention,
    Entity,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::DifferenceNn => "difference_nn",
            Strategy::DifferenceCentroid => "difference_centroid",
            Strategy::Random => "random",
            Strategy::Attention => "attention",
            Strategy::Entity => "entity",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "difference_nn" => Ok(Strategy::DifferenceNn),
            "difference_centroid" => Ok(Strategy::DifferenceCentroid),
            "random" => Ok(Strategy::Random),
            "attention" => Ok(Strategy::Attention),
            "entity" => Ok(Strategy::Entity),
            other => Err(Error::Config(vec![format!("unknown strategy {other:?}")])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Replacement {
    Sentinel,
    RandomToken,
}

impl Replacement {
    pub fn as_str(&self) -> &'static str {
        match self {
            Replacement::Sentinel => "sentinel",
            Replacement::RandomToken => "random_token",
        }
    }
}

impl fmt::Display for Replacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Replacement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "sentinel" => Ok(Replacement::Sentinel),
            "random_token" => Ok(Replacement::RandomToken),
            other => Err(Error::Config(vec![format!(
                "unknown replacement {other:?}"
            )])),
        }
    }
}

/// How member token probabilities aggregate into a group weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupAggregate {
    #[default]
    Max,
    Mean,
}

/// A per-token masking distribution for one document.
///
/// `probs` sums to 1; `argmax_seed` is present only for the
/// nearest-neighbor strategy and records, per token, which seed attained
/// the maximum similarity (`None` for tokens without a vector).
#[derive(Debug, Clone, PartialEq)]
pub struct MaskDistribution {
    pub doc_id: String,
    pub strategy: Strategy,
    pub probs: Vec<f64>,
    pub argmax_seed: Option<Vec<Option<usize>>>,
}

/// A sampled plan: which groups (and therefore tokens) one document masks.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPlan {
    pub doc_id: String,
    pub masked_token_indices: Vec<usize>,
    pub masked_group_indices: Vec<usize>,
    pub ratio: f64,
    pub rng_seed: u64,
    pub replacement: Replacement,
}

/// Sampling parameters.
#[derive(Debug, Clone)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub ratio: f64,
    pub clamp_epsilon: f64,
    pub rng_seed: u64,
    pub replacement: Replacement,
    pub group_aggregate: GroupAggregate,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::DifferenceNn,
            ratio: 0.25,
            clamp_epsilon: 1e-6,
            rng_seed: 0,
            replacement: Replacement::Sentinel,
            group_aggregate: GroupAggregate::Max,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.ratio.is_nan() || self.ratio <= 0.0 || self.ratio >= 1.0 {
            errors.push(format!("ratio out of range: {}", self.ratio));
        }
        if self.clamp_epsilon.is_nan() || self.clamp_epsilon <= 0.0 {
            errors.push(format!("clamp-epsilon must be > 0: {}", self.clamp_epsilon));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }
}

/// Resolve a token's vector: inline vector first, then store lookup.
fn token_vector<'a>(
    token: &'a crate::corpus::Token,
    store: &'a EmbeddingStore,
) -> Option<&'a [f64]> {
    token
        .inline_vector
        .as_deref()
        .or_else(|| store.lookup(&token.normalized))
}

fn normalize_raw(
    doc: &Document,
    strategy: Strategy,
    raw: Vec<f64>,
    argmax_seed: Option<Vec<Option<usize>>>,
) -> MaskDistribution {
    let sum: f64 = raw.iter().sum();
    MaskDistribution {
        doc_id: doc.id.clone(),
        strategy,
        probs: raw.into_iter().map(|r| r / sum).collect(),
        argmax_seed,
    }
}

/// Nearest-neighbor difference scoring: a token's raw score is its maximum
/// cosine similarity over the seed vectors, clamped below at
/// `clamp_epsilon`. Tokens with no vector anywhere fall back to the clamp
/// and carry no argmax index. Ties go to the lowest seed index.
pub fn score_difference_nn(
    doc: &Document,
    diffset: &DiffSet,
    store: &EmbeddingStore,
    clamp_epsilon: f64,
) -> Result<MaskDistribution> {
    if diffset.is_empty() {
        return Err(Error::NoSeeds);
    }
    let mut raw = Vec::with_capacity(doc.tokens.len());
    let mut argmax = Vec::with_capacity(doc.tokens.len());
    for token in &doc.tokens {
        match token_vector(token, store) {
            Some(vector) => {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for (k, seed) in diffset.seeds.iter().enumerate() {
                    let sim = cosine(vector, &seed.vector)?;
                    if sim > best {
                        best = sim;
                        best_idx = k;
                    }
                }
                raw.push(best.max(clamp_epsilon));
                argmax.push(Some(best_idx));
            }
            None => {
                raw.push(clamp_epsilon);
                argmax.push(None);
            }
        }
    }
    Ok(normalize_raw(doc, Strategy::DifferenceNn, raw, Some(argmax)))
}

/// Centroid ablation: raw score is the cosine similarity to the mean of
/// the seed vectors. A zero centroid degenerates to a uniform distribution.
pub fn score_centroid(
    doc: &Document,
    diffset: &DiffSet,
    store: &EmbeddingStore,
    clamp_epsilon: f64,
) -> Result<MaskDistribution> {
    if diffset.is_empty() {
        return Err(Error::NoSeeds);
    }
    let centroid = seed_centroid(diffset);
    let zero_centroid = centroid.iter().all(|&x| x == 0.0);
    let mut raw = Vec::with_capacity(doc.tokens.len());
    for token in &doc.tokens {
        let score = match token_vector(token, store) {
            Some(vector) if !zero_centroid => cosine(vector, &centroid)?,
            _ => clamp_epsilon,
        };
        raw.push(score.max(clamp_epsilon));
    }
    Ok(normalize_raw(doc, Strategy::DifferenceCentroid, raw, None))
}

/// Mean of the seed vectors.
pub fn seed_centroid(diffset: &DiffSet) -> Vec<f64> {
    let dim = diffset.seeds[0].vector.len();
    let mut centroid = vec![0.0; dim];
    for seed in &diffset.seeds {
        for (c, x) in centroid.iter_mut().zip(&seed.vector) {
            *c += x;
        }
    }
    let k = diffset.k() as f64;
    for c in &mut centroid {
        *c /= k;
    }
    centroid
}

/// Uniform masking: every token gets probability exactly 1/N.
pub fn score_random(doc: &Document) -> MaskDistribution {
    let n = doc.tokens.len();
    MaskDistribution {
        doc_id: doc.id.clone(),
        strategy: Strategy::Random,
        probs: vec![1.0 / n as f64; n],
        argmax_seed: None,
    }
}

/// Attention-proportional masking over externally produced scores.
pub fn score_attention(doc: &Document, attention_scores: &[f64]) -> Result<MaskDistribution> {
    let n = doc.tokens.len();
    if attention_scores.len() != n {
        return Err(Error::LengthError {
            expected: n,
            got: attention_scores.len(),
        });
    }
    if attention_scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::InvalidScores {
            doc_id: doc.id.clone(),
            detail: "attention scores must be finite and >= 0".to_string(),
        });
    }
    let sum: f64 = attention_scores.iter().sum();
    if sum <= 0.0 {
        return Err(Error::DegenerateAttention(doc.id.clone()));
    }
    Ok(MaskDistribution {
        doc_id: doc.id.clone(),
        strategy: Strategy::Attention,
        probs: attention_scores.iter().map(|s| s / sum).collect(),
        argmax_seed: None,
    })
}

/// Entity-span masking: tokens inside any `[start, end)` span get
/// `in_weight`, the rest `out_weight` floored at `clamp_epsilon`.
/// Overlapping spans count once per token.
pub fn score_entity_spans(
    doc: &Document,
    spans: &[(usize, usize)],
    in_weight: f64,
    out_weight: f64,
    clamp_epsilon: f64,
) -> Result<MaskDistribution> {
    let n = doc.tokens.len();
    if in_weight.is_nan() || in_weight <= 0.0 || out_weight.is_nan() || out_weight < 0.0 {
        return Err(Error::Config(vec![format!(
            "span weights out of range: in {in_weight}, out {out_weight}"
        )]));
    }
    let mut in_span = vec![false; n];
    for &(start, end) in spans {
        if start > end || end > n {
            return Err(Error::SpanError { start, end, n });
        }
        for flag in &mut in_span[start..end] {
            *flag = true;
        }
    }
    let out = out_weight.max(clamp_epsilon);
    let raw: Vec<f64> = in_span
        .iter()
        .map(|&inside| if inside { in_weight } else { out })
        .collect();
    let sum: f64 = raw.iter().sum();
    Ok(MaskDistribution {
        doc_id: doc.id.clone(),
        strategy: Strategy::Entity,
        probs: raw.into_iter().map(|r| r / sum).collect(),
        argmax_seed: None,
    })
}

/// Aggregate token probabilities into one weight per group.
pub fn group_weights(
    dist: &MaskDistribution,
    doc: &Document,
    aggregate: GroupAggregate,
) -> Vec<f64> {
    doc.groups
        .iter()
        .map(|group| {
            let member_probs = group.members.iter().map(|&i| dist.probs[i]);
            match aggregate {
                GroupAggregate::Max => member_probs.fold(0.0, f64::max),
                GroupAggregate::Mean => {
                    let len = group.members.len() as f64;
                    member_probs.sum::<f64>() / len
                }
            }
        })
        .collect()
}
