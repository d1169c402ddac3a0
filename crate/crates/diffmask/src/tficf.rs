//! TF-ICF scoring and diff-set selection.
//!
//! A word's score is the ratio of its relative frequency in the target
//! corpus to its relative frequency in the background table. The top-K
//! scoring words that survive the filters become the diff-set: the seed
//! words (with their embedding vectors) that characterize what makes the
//! corpus different from the general domain.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::background::BackgroundTable;
use crate::corpus::Document;
use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};

/// One scored word, ranked by `score = corpus_rel_freq / background_rel_freq`.
#[derive(Debug, Clone, PartialEq)]
pub struct TficfScore {
    pub word: String,
    pub corpus_count: u64,
    pub corpus_rel_freq: f64,
    pub background_rel_freq: f64,
    pub score: f64,
}

/// A selected seed word with its embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub word: String,
    pub vector: Vec<f64>,
}

/// The diff-set: the top-K eligible seed words in rank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffSet {
    pub seeds: Vec<Seed>,
}

impl DiffSet {
    pub fn k(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn words(&self) -> Vec<String> {
        self.seeds.iter().map(|s| s.word.clone()).collect()
    }

    /// Check structural invariants: nonempty, one shared dimension, no
    /// duplicate words. Used when a diff-set is read back from a file.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::NoSeeds);
        }
        let dim = self.seeds[0].vector.len();
        for seed in &self.seeds {
            if seed.vector.len() != dim {
                return Err(Error::DimError {
                    left: dim,
                    right: seed.vector.len(),
                });
            }
        }
        let mut seen = HashSet::new();
        for seed in &self.seeds {
            if !seen.insert(seed.word.as_str()) {
                return Err(Error::Config(vec![format!(
                    "duplicate seed word {:?}",
                    seed.word
                )]));
            }
        }
        Ok(())
    }
}

/// Count normalized token forms across all documents. Tokens whose
/// normalized form is empty are not counted.
pub fn count_corpus(documents: &[Document]) -> HashMap<String, u64> {
    let mut counts = HashMap::new();
    for doc in documents {
        for token in &doc.tokens {
            if !token.normalized.is_empty() {
                *counts.entry(token.normalized.clone()).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Score every corpus word and return the list sorted by descending score,
/// ties broken lexicographically.
pub fn tficf_scores(
    corpus_counts: &HashMap<String, u64>,
    background: &BackgroundTable,
) -> Vec<TficfScore> {
    let corpus_total: u64 = corpus_counts.values().sum();
    let mut scores: Vec<TficfScore> = corpus_counts
        .iter()
        .map(|(word, &count)| {
            let corpus_rel_freq = count as f64 / corpus_total as f64;
            let background_rel_freq = background.relative_freq(word);
            TficfScore {
                word: word.clone(),
                corpus_count: count,
                corpus_rel_freq,
                background_rel_freq,
                score: corpus_rel_freq / background_rel_freq,
            }
        })
        .collect();
    scores.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.word.cmp(&b.word))
    });
    scores
}

/// Eligibility filters applied while walking the ranked list.
#[derive(Debug, Clone)]
pub struct SeedFilters {
    pub stopwords: HashSet<String>,
    pub min_count: u64,
}

impl Default for SeedFilters {
    fn default() -> Self {
        Self {
            stopwords: default_stopwords().iter().map(|s| s.to_string()).collect(),
            min_count: 5,
        }
    }
}

/// The built-in stopword list: a small safety net of function words.
/// Replaceable via a user-supplied file.
pub fn default_stopwords() -> &'static [&'static str] {
    &[
        "a", "about", "all", "an", "and", "are", "as", "at", "be", "been", "but", "by", "can",
        "do", "for", "from", "had", "has", "have", "he", "her", "his", "i", "if", "in", "is",
        "it", "its", "more", "my", "no", "not", "of", "on", "one", "or", "our", "she", "so",
        "that", "the", "their", "there", "they", "this", "to", "was", "we", "which", "will",
        "with", "you",
    ]
}

/// Walk the ranked score list and collect the first `k` words that pass the
/// filters and have an embedding vector. Returns them with their vectors in
/// rank order.
pub fn select_seeds(
    scores: &[TficfScore],
    k: usize,
    store: &EmbeddingStore,
    filters: &SeedFilters,
) -> Result<DiffSet> {
    if k == 0 {
        return Err(Error::Config(vec!["k must be >= 1".to_string()]));
    }
    let mut seeds = Vec::with_capacity(k);
    for entry in scores {
        if seeds.len() == k {
            break;
        }
        if filters.stopwords.contains(&entry.word) {
            continue;
        }
        if entry.corpus_count < filters.min_count {
            continue;
        }
        let Some(vector) = store.lookup(&entry.word) else {
            continue;
        };
        seeds.push(Seed {
            word: entry.word.clone(),
            vector: vector.to_vec(),
        });
    }
    if seeds.len() < k {
        return Err(Error::InsufficientSeeds {
            found: seeds.len(),
            requested: k,
        });
    }
    Ok(DiffSet { seeds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::word_tokenize;

    fn docs(lines: &[&str]) -> Vec<Document> {
        lines
            .iter()
            .enumerate()
            .map(|(i, l)| word_tokenize(&i.to_string(), l).unwrap())
            .collect()
    }

    fn table(pairs: &[(&str, u64)]) -> BackgroundTable {
        BackgroundTable::from_counts(
            pairs.iter().map(|(w, c)| (w.to_string(), *c)),
            1,
        )
        .unwrap()
    }

    #[test]
    fn counts_tokens_across_documents() {
        let counts = count_corpus(&docs(&["a b a"]));
        assert_eq!(counts["a"], 2);
        assert_eq!(counts["b"], 1);

        let counts = count_corpus(&docs(&["x", "x"]));
        assert_eq!(counts["x"], 2);
    }

    #[test]
    fn scores_match_hand_evaluation() {
        // corpus {inhibitor:5, the:10}, background rel-freqs 1e-7 and 0.05
        let mut counts = HashMap::new();
        counts.insert("inhibitor".to_string(), 5);
        counts.insert("the".to_string(), 10);
        // inhibitor: 1 / 1e7 total; the: 5e5 / 1e7 total = 0.05
        let bg = table(&[("inhibitor", 1), ("the", 500_000), ("pad", 9_499_999)]);
        assert_eq!(bg.relative_freq("inhibitor"), 1e-7);
        assert_eq!(bg.relative_freq("the"), 0.05);

        let scores = tficf_scores(&counts, &bg);
        assert_eq!(scores[0].word, "inhibitor");
        let inhibitor = &scores[0];
        let the = scores.iter().find(|s| s.word == "the").unwrap();
        assert!((inhibitor.score - (5.0 / 15.0) / 1e-7).abs() < 1e-3);
        assert!((the.score - (10.0 / 15.0) / 0.05).abs() < 1e-12);
        assert!(inhibitor.score > 1e5 * the.score);
    }

    #[test]
    fn single_word_ranks_first() {
        let mut counts = HashMap::new();
        counts.insert("x".to_string(), 1);
        let bg = table(&[("x", 1)]);
        let scores = tficf_scores(&counts, &bg);
        assert_eq!(scores.len(), 1);
        assert_eq!(scores[0].word, "x");
    }

    #[test]
    fn background_scaling_leaves_ranking_unchanged() {
        let counts = count_corpus(&docs(&["alpha beta beta gamma alpha alpha"]));
        let base = [("alpha", 50u64), ("beta", 3), ("gamma", 1000)];
        let scaled: Vec<(&str, u64)> = base.iter().map(|&(w, c)| (w, c * 10)).collect();
        let rank = |bg: &BackgroundTable| -> Vec<String> {
            tficf_scores(&counts, bg).into_iter().map(|s| s.word).collect()
        };
        assert_eq!(rank(&table(&base)), rank(&table(&scaled)));
    }

    #[test]
    fn ranking_same_for_raw_counts_and_relative_freqs() {
        // Scoring with raw counts differs from relative frequencies only by
        // the constant factor corpus_total / background_total.
        let counts = count_corpus(&docs(&["ion channel gating", "ion flux", "the the the"]));
        let bg = table(&[("ion", 40), ("channel", 60), ("flux", 10), ("gating", 2), ("the", 100_000)]);
        let scores = tficf_scores(&counts, &bg);
        let mut raw: Vec<(String, f64)> = counts
            .iter()
            .map(|(w, &c)| {
                let b = bg.count(w).unwrap_or(bg.floor_count()) as f64;
                (w.clone(), c as f64 / b)
            })
            .collect();
        raw.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        let by_rel: Vec<&str> = scores.iter().map(|s| s.word.as_str()).collect();
        let by_raw: Vec<&str> = raw.iter().map(|(w, _)| w.as_str()).collect();
        assert_eq!(by_rel, by_raw);
    }

    fn store(words: &[&str]) -> EmbeddingStore {
        EmbeddingStore::from_vectors(
            2,
            words
                .iter()
                .enumerate()
                .map(|(i, w)| (w.to_string(), vec![1.0, i as f64])),
        )
        .unwrap()
    }

    fn ranked(words: &[&str]) -> Vec<TficfScore> {
        words
            .iter()
            .enumerate()
            .map(|(i, w)| TficfScore {
                word: w.to_string(),
                corpus_count: 100,
                corpus_rel_freq: 0.1,
                background_rel_freq: 1e-6 * (i + 1) as f64,
                score: 1e5 / (i + 1) as f64,
            })
            .collect()
    }

    #[test]
    fn filtered_words_are_skipped() {
        let scores = ranked(&["w1", "the", "w3"]);
        let filters = SeedFilters {
            stopwords: ["the".to_string()].into_iter().collect(),
            min_count: 5,
        };
        let diff = select_seeds(&scores, 2, &store(&["w1", "the", "w3"]), &filters).unwrap();
        assert_eq!(diff.words(), ["w1", "w3"]);
    }

    #[test]
    fn words_without_embeddings_are_skipped() {
        let scores = ranked(&["w1", "w2", "w3"]);
        let filters = SeedFilters {
            stopwords: HashSet::new(),
            min_count: 1,
        };
        let diff = select_seeds(&scores, 2, &store(&["w1", "w3"]), &filters).unwrap();
        assert_eq!(diff.words(), ["w1", "w3"]);
    }

    #[test]
    fn min_count_filter_applies() {
        let mut scores = ranked(&["rare", "common"]);
        scores[0].corpus_count = 2;
        let filters = SeedFilters {
            stopwords: HashSet::new(),
            min_count: 5,
        };
        let diff = select_seeds(&scores, 1, &store(&["rare", "common"]), &filters).unwrap();
        assert_eq!(diff.words(), ["common"]);
    }

    #[test]
    fn insufficient_seeds_reported() {
        let scores = ranked(&["w1", "w2"]);
        let filters = SeedFilters {
            stopwords: HashSet::new(),
            min_count: 1,
        };
        match select_seeds(&scores, 5, &store(&["w1", "w2"]), &filters).unwrap_err() {
            Error::InsufficientSeeds { found, requested } => {
                assert_eq!((found, requested), (2, 5));
            }
            other => panic!("expected InsufficientSeeds, got {other:?}"),
        }
    }

    #[test]
    fn seeds_are_subsequence_of_ranking() {
        let words = ["q", "r", "s", "t", "u"];
        let scores = ranked(&words);
        let filters = SeedFilters {
            stopwords: ["r".to_string()].into_iter().collect(),
            min_count: 1,
        };
        let diff = select_seeds(&scores, 3, &store(&["q", "s", "t", "u"]), &filters).unwrap();
        let rank_order: Vec<&str> = scores.iter().map(|s| s.word.as_str()).collect();
        let mut pos = 0;
        for w in diff.words() {
            let found = rank_order[pos..].iter().position(|r| *r == w).unwrap();
            pos += found + 1;
        }
    }
}
