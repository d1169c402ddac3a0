//! Group-atomic plan sampling and plan application.
//!
//! # RNG streams
//!
//! Every document gets its own deterministic RNG stream so that parallel
//! scheduling cannot change outputs. The stream seed is
//!
//! ```text
//! doc_stream_seed(global_seed, doc_id) =
//!     splitmix64(global_seed ^ fnv1a64(doc_id_bytes))
//! ```
//!
//! where `fnv1a64` is the 64-bit FNV-1a hash of the document id bytes and
//! `splitmix64` is the standard finalizer (golden-ratio increment followed
//! by two xor-multiply rounds). The resulting value seeds a ChaCha8 stream.
//! Replacement draws use a second stream derived from the same value by
//! xoring a fixed tag before re-finalizing, so sampling and replacement
//! never share random numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::masker::{group_weights, MaskDistribution, MaskPlan, Replacement, StrategyConfig};

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;
const REPLACEMENT_TAG: u64 = 0x9e3779b97f4a7c15;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Deterministic per-document stream seed; see the module docs.
pub fn doc_stream_seed(global_seed: u64, doc_id: &str) -> u64 {
    splitmix64(global_seed ^ fnv1a64(doc_id.as_bytes()))
}

fn sampling_rng(global_seed: u64, doc_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(doc_stream_seed(global_seed, doc_id))
}

fn replacement_rng(global_seed: u64, doc_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(
        doc_stream_seed(global_seed, doc_id) ^ REPLACEMENT_TAG,
    ))
}

/// Draw an index proportionally to `weights`, ignoring exhausted (zero)
/// entries. `total` is the current sum of the live weights.
fn weighted_draw(rng: &mut ChaCha8Rng, weights: &[f64], total: f64) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_live = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last_live = i;
        if target < acc {
            return i;
        }
    }
    // Float round-off can leave target marginally >= the accumulated sum.
    last_live
}

/// Sample a group-atomic mask plan for one document.
///
/// The budget is `ceil(ratio * N)` tokens. Groups are drawn sequentially
/// without replacement, with probability proportional to their aggregated
/// weight (floored at `clamp_epsilon` so zero-probability groups stay
/// drawable), and every member of a drawn group is masked. Drawing stops at
/// the first draw where the masked-token count reaches the budget, so the
/// final count overshoots by at most `max_group_size - 1`.
pub fn sample_plan(
    dist: &MaskDistribution,
    doc: &Document,
    config: &StrategyConfig,
) -> Result<MaskPlan> {
    config.validate()?;
    if dist.doc_id != doc.id {
        return Err(Error::UnknownDocument(dist.doc_id.clone()));
    }
    let n = doc.tokens.len();
    if dist.probs.len() != n {
        return Err(Error::LengthError {
            expected: n,
            got: dist.probs.len(),
        });
    }
    let budget = (config.ratio * n as f64).ceil() as usize;
    let budget = budget.max(1);

    let mut weights: Vec<f64> = group_weights(dist, doc, config.group_aggregate)
        .into_iter()
        .map(|w| w.max(config.clamp_epsilon))
        .collect();

    let mut rng = sampling_rng(config.rng_seed, &doc.id);
    let mut masked_groups = Vec::new();
    let mut masked_count = 0usize;
    while masked_count < budget {
        let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
        if total <= 0.0 {
            break; // every group already drawn
        }
        let g = weighted_draw(&mut rng, &weights, total);
        weights[g] = 0.0;
        masked_groups.push(g);
        masked_count += doc.groups[g].members.len();
    }

    if masked_count == n {
        log::warn!("document {:?}: plan masks the whole document", doc.id);
    }

    masked_groups.sort_unstable();
    let mut masked_tokens: Vec<usize> = masked_groups
        .iter()
        .flat_map(|&g| doc.groups[g].members.iter().copied())
        .collect();
    masked_tokens.sort_unstable();

    Ok(MaskPlan {
        doc_id: doc.id.clone(),
        masked_token_indices: masked_tokens,
        masked_group_indices: masked_groups,
        ratio: config.ratio,
        rng_seed: config.rng_seed,
        replacement: config.replacement,
    })
}

/// Apply a plan to its document, returning the masked token text sequence.
///
/// Sentinel mode replaces each masked token with the literal `[MASK]`;
/// random-token mode replaces it with a vocabulary item drawn from the
/// plan's replacement RNG stream. The realization is static: one fixed
/// output per plan.
pub fn apply_plan(doc: &Document, plan: &MaskPlan, vocabulary: &[String]) -> Result<Vec<String>> {
    if plan.doc_id != doc.id {
        return Err(Error::UnknownDocument(plan.doc_id.clone()));
    }
    let n = doc.tokens.len();
    if let Some(&bad) = plan.masked_token_indices.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidPlan {
            doc_id: doc.id.clone(),
            detail: format!("masked token index {bad} out of range for {n} tokens"),
        });
    }
    if plan.replacement == Replacement::RandomToken && vocabulary.is_empty() {
        return Err(Error::NoVocabulary);
    }
    let mut output: Vec<String> = doc.tokens.iter().map(|t| t.text.clone()).collect();
    let mut rng = replacement_rng(plan.rng_seed, &doc.id);
    for &i in &plan.masked_token_indices {
        output[i] = match plan.replacement {
            Replacement::Sentinel => "[MASK]".to_string(),
            Replacement::RandomToken => {
                let draw = rng.random::<f64>() * vocabulary.len() as f64;
                let idx = (draw as usize).min(vocabulary.len() - 1);
                vocabulary[idx].clone()
            }
        };
    }
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{word_tokenize, Group};
    use crate::masker::{score_random, GroupAggregate, Strategy};

    fn config(ratio: f64, seed: u64) -> StrategyConfig {
        StrategyConfig {
            ratio,
            rng_seed: seed,
            ..StrategyConfig::default()
        }
    }

    fn doc_with_group_sizes(id: &str, sizes: &[usize]) -> Document {
        let total: usize = sizes.iter().sum();
        let words: Vec<String> = (0..total).map(|i| format!("w{i}")).collect();
        let mut doc = word_tokenize(id, &words.join(" ")).unwrap();
        let mut groups = Vec::new();
        let mut next = 0;
        for &size in sizes {
            let members: Vec<usize> = (next..next + size).collect();
            for &m in &members {
                doc.tokens[m].group_index = groups.len();
            }
            groups.push(Group {
                members,
                label: None,
            });
            next += size;
        }
        doc.groups = groups;
        doc.validate().unwrap();
        doc
    }

    #[test]
    fn budget_exact_for_singleton_groups() {
        let doc = doc_with_group_sizes("d", &[1; 8]);
        let dist = score_random(&doc);
        let plan = sample_plan(&dist, &doc, &config(0.25, 7)).unwrap();
        assert_eq!(plan.masked_token_indices.len(), 2);
        assert_eq!(plan.masked_group_indices.len(), 2);
    }

    #[test]
    fn budget_bound_with_multi_token_groups() {
        let doc = doc_with_group_sizes("d", &[3, 3, 2]);
        let dist = score_random(&doc);
        for seed in 0..50 {
            let plan = sample_plan(&dist, &doc, &config(0.25, seed)).unwrap();
            let masked = plan.masked_token_indices.len();
            assert!((2..=3).contains(&masked), "masked {masked}");
        }
    }

    #[test]
    fn group_atomicity_holds() {
        let doc = doc_with_group_sizes("d", &[2, 3, 1, 4]);
        let dist = score_random(&doc);
        for seed in 0..50 {
            let plan = sample_plan(&dist, &doc, &config(0.4, seed)).unwrap();
            for (g, group) in doc.groups.iter().enumerate() {
                let masked: Vec<bool> = group
                    .members
                    .iter()
                    .map(|m| plan.masked_token_indices.contains(m))
                    .collect();
                let all = masked.iter().all(|&b| b);
                let none = masked.iter().all(|&b| !b);
                assert!(all || none, "group {g} partially masked");
                assert_eq!(all, plan.masked_group_indices.contains(&g));
            }
        }
    }

    #[test]
    fn dominant_weight_drawn_first() {
        // One group with weight ~1, the rest at the epsilon floor.
        let doc = doc_with_group_sizes("d", &[1; 10]);
        let mut dist = score_random(&doc);
        dist.probs = vec![0.0; 10];
        dist.probs[3] = 1.0;
        let mut hits = 0;
        for seed in 0..10_000 {
            let plan = sample_plan(&dist, &doc, &config(0.1, seed)).unwrap();
            if plan.masked_group_indices == vec![3] {
                hits += 1;
            }
        }
        assert!(hits >= 9_990, "dominant group drawn {hits}/10000");
    }

    #[test]
    fn identical_inputs_identical_plans() {
        let doc = doc_with_group_sizes("doc-7", &[2, 1, 3, 1, 1]);
        let dist = score_random(&doc);
        let a = sample_plan(&dist, &doc, &config(0.3, 42)).unwrap();
        let b = sample_plan(&dist, &doc, &config(0.3, 42)).unwrap();
        assert_eq!(a, b);
        let c = sample_plan(&dist, &doc, &config(0.3, 43)).unwrap();
        assert_eq!(c.rng_seed, 43);
    }

    #[test]
    fn single_group_masks_whole_document() {
        let doc = doc_with_group_sizes("d", &[4]);
        let dist = score_random(&doc);
        let plan = sample_plan(&dist, &doc, &config(0.25, 0)).unwrap();
        assert_eq!(plan.masked_token_indices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn mismatched_document_rejected() {
        let doc = doc_with_group_sizes("d", &[1, 1]);
        let other = doc_with_group_sizes("e", &[1, 1]);
        let dist = score_random(&doc);
        assert!(matches!(
            sample_plan(&dist, &other, &config(0.25, 0)),
            Err(Error::UnknownDocument(_))
        ));
    }

    #[test]
    fn sentinel_replacement() {
        let doc = word_tokenize("d", "a b c").unwrap();
        let dist = score_random(&doc);
        let mut plan = sample_plan(&dist, &doc, &config(0.34, 0)).unwrap();
        plan.masked_token_indices = vec![1];
        let out = apply_plan(&doc, &plan, &[]).unwrap();
        assert_eq!(out, ["a", "[MASK]", "c"]);
    }

    #[test]
    fn empty_plan_is_identity() {
        let doc = word_tokenize("d", "a b c").unwrap();
        let dist = score_random(&doc);
        let mut plan = sample_plan(&dist, &doc, &config(0.34, 0)).unwrap();
        plan.masked_token_indices = vec![];
        let out = apply_plan(&doc, &plan, &[]).unwrap();
        assert_eq!(out, ["a", "b", "c"]);
    }

    #[test]
    fn singleton_vocabulary_forces_draw() {
        let doc = word_tokenize("d", "a b c").unwrap();
        let dist = score_random(&doc);
        let mut plan = sample_plan(&dist, &doc, &config(0.34, 0)).unwrap();
        plan.masked_token_indices = vec![0, 2];
        plan.replacement = Replacement::RandomToken;
        let out = apply_plan(&doc, &plan, &["x".to_string()]).unwrap();
        assert_eq!(out, ["x", "b", "x"]);
    }

    #[test]
    fn random_token_without_vocabulary_rejected() {
        let doc = word_tokenize("d", "a b").unwrap();
        let dist = score_random(&doc);
        let mut plan = sample_plan(&dist, &doc, &config(0.5, 0)).unwrap();
        plan.replacement = Replacement::RandomToken;
        assert!(matches!(
            apply_plan(&doc, &plan, &[]),
            Err(Error::NoVocabulary)
        ));
    }

    #[test]
    fn replacement_is_static_per_plan() {
        let doc = word_tokenize("d", "a b c d e f").unwrap();
        let dist = score_random(&doc);
        let mut plan = sample_plan(&dist, &doc, &config(0.5, 9)).unwrap();
        plan.replacement = Replacement::RandomToken;
        let vocab: Vec<String> = (0..20).map(|i| format!("v{i}")).collect();
        let once = apply_plan(&doc, &plan, &vocab).unwrap();
        let twice = apply_plan(&doc, &plan, &vocab).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn stream_seeds_differ_across_documents() {
        assert_ne!(doc_stream_seed(0, "0"), doc_stream_seed(0, "1"));
        assert_ne!(doc_stream_seed(0, "0"), doc_stream_seed(1, "0"));
        assert_eq!(doc_stream_seed(5, "abc"), doc_stream_seed(5, "abc"));
    }

    #[test]
    fn mean_aggregate_supported() {
        let doc = doc_with_group_sizes("d", &[2, 2]);
        let dist = MaskDistribution {
            doc_id: "d".to_string(),
            strategy: Strategy::Random,
            probs: vec![0.4, 0.1, 0.3, 0.2],
            argmax_seed: None,
        };
        let cfg = StrategyConfig {
            group_aggregate: GroupAggregate::Mean,
            ..config(0.5, 0)
        };
        let plan = sample_plan(&dist, &doc, &cfg).unwrap();
        assert_eq!(plan.masked_token_indices.len(), 2);
    }
}
