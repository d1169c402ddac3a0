//! Diagnostics over mask plans: masked-word histograms, chosen-seed usage,
//! seed-embedding variance, Pearson correlation, and masked-group label
//! fractions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::masker::{MaskDistribution, MaskPlan};
use crate::tficf::DiffSet;

/// Words by how often they were masked, descending (ties by word).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskHistogram {
    pub entries: Vec<(String, u64)>,
}

impl MaskHistogram {
    pub fn total(&self) -> u64 {
        self.entries.iter().map(|(_, c)| c).sum()
    }
}

/// Seed words by how often they were the nearest neighbor of a masked
/// token, descending (ties by word).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedUsage {
    pub entries: Vec<(String, u64)>,
}

impl SeedUsage {
    pub fn total(&self) -> u64 {
        self.entries.iter().map(|(_, c)| c).sum()
    }
}

/// Spread of the seed embeddings: mean squared distance from their
/// centroid (the trace of the seed covariance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub k: usize,
    pub variance: f64,
}

fn sorted_entries(counts: HashMap<String, u64>) -> Vec<(String, u64)> {
    let mut entries: Vec<(String, u64)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    entries
}

fn index_documents(documents: &[Document]) -> HashMap<&str, &Document> {
    documents.iter().map(|d| (d.id.as_str(), d)).collect()
}

/// Count the normalized forms of every masked token across all plans.
pub fn masked_word_histogram(
    plans: &[MaskPlan],
    documents: &[Document],
) -> Result<MaskHistogram> {
    let by_id = index_documents(documents);
    let mut counts: HashMap<String, u64> = HashMap::new();
    for plan in plans {
        let doc = by_id
            .get(plan.doc_id.as_str())
            .ok_or_else(|| Error::UnknownDocument(plan.doc_id.clone()))?;
        for &i in &plan.masked_token_indices {
            let token = doc.tokens.get(i).ok_or_else(|| Error::InvalidPlan {
                doc_id: plan.doc_id.clone(),
                detail: format!("masked token index {i} out of range"),
            })?;
            *counts.entry(token.normalized.clone()).or_insert(0) += 1;
        }
    }
    Ok(MaskHistogram {
        entries: sorted_entries(counts),
    })
}

/// For every masked token, count which seed was its nearest neighbor.
/// Tokens without an argmax (no vector) are excluded; distributions from
/// non-nearest-neighbor strategies are an error.
pub fn chosen_seed_histogram(
    distributions: &[MaskDistribution],
    plans: &[MaskPlan],
    seed_words: &[String],
) -> Result<SeedUsage> {
    let by_id: HashMap<&str, &MaskDistribution> = distributions
        .iter()
        .map(|d| (d.doc_id.as_str(), d))
        .collect();
    let mut counts: HashMap<String, u64> = HashMap::new();
    for plan in plans {
        let dist = by_id
            .get(plan.doc_id.as_str())
            .ok_or_else(|| Error::UnknownDocument(plan.doc_id.clone()))?;
        let argmax = dist
            .argmax_seed
            .as_ref()
            .ok_or_else(|| Error::NotNearestNeighbor(plan.doc_id.clone()))?;
        for &i in &plan.masked_token_indices {
            let chosen = argmax.get(i).ok_or_else(|| Error::InvalidPlan {
                doc_id: plan.doc_id.clone(),
                detail: format!("masked token index {i} out of range"),
            })?;
            if let Some(k) = chosen {
                let word = seed_words
                    .get(*k)
                    .cloned()
                    .unwrap_or_else(|| format!("seed_{k}"));
                *counts.entry(word).or_insert(0) += 1;
            }
        }
    }
    Ok(SeedUsage {
        entries: sorted_entries(counts),
    })
}

/// Mean squared distance of the seed vectors from their centroid.
pub fn seed_embedding_variance(diffset: &DiffSet) -> VarianceReport {
    let k = diffset.k();
    if k == 0 {
        return VarianceReport { k, variance: 0.0 };
    }
    let centroid = crate::masker::seed_centroid(diffset);
    let variance = diffset
        .seeds
        .iter()
        .map(|seed| {
            seed.vector
                .iter()
                .zip(&centroid)
                .map(|(x, c)| (x - c) * (x - c))
                .sum::<f64>()
        })
        .sum::<f64>()
        / k as f64;
    VarianceReport { k, variance }
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthError {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateSeries);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::DegenerateSeries);
    }
    Ok(cov / (vx.sqrt() * vy.sqrt()))
}

/// Fraction of masked tokens whose group label equals `label`. Tokens in
/// unlabeled groups count toward the denominator only.
pub fn masked_group_label_fraction(
    plans: &[MaskPlan],
    documents: &[Document],
    label: &str,
) -> Result<f64> {
    let by_id = index_documents(documents);
    let mut masked = 0u64;
    let mut matching = 0u64;
    for plan in plans {
        let doc = by_id
            .get(plan.doc_id.as_str())
            .ok_or_else(|| Error::UnknownDocument(plan.doc_id.clone()))?;
        for &i in &plan.masked_token_indices {
            let token = doc.tokens.get(i).ok_or_else(|| Error::InvalidPlan {
                doc_id: plan.doc_id.clone(),
                detail: format!("masked token index {i} out of range"),
            })?;
            masked += 1;
            if doc.groups[token.group_index].label.as_deref() == Some(label) {
                matching += 1;
            }
        }
    }
    if masked == 0 {
        return Err(Error::EmptyPlans);
    }
    Ok(matching as f64 / masked as f64)
}
