//! Pipeline stages: seeds, plan, apply, stats, and the end-to-end run.
//!
//! Each stage reads and writes the file formats in [`crate::formats`] and
//! returns a one-line summary for the CLI. The plan stage fans out over
//! documents; every document draws from its own RNG stream, so the worker
//! count never changes outputs.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analysis::{
    chosen_seed_histogram, masked_group_label_fraction, masked_word_histogram,
    seed_embedding_variance,
};
use crate::background::BackgroundTable;
use crate::config::RunConfig;
use crate::corpus::{load_plaintext, load_pretokenized, Document};
use crate::embedding::{load_embeddings, EmbeddingStore};
use crate::error::{Error, Result};
use crate::formats::{
    corpus_vocabulary, read_attention, read_plans, read_seeds, read_spans, read_stopwords,
    read_vocab, write_masked, write_plans, write_seeds, MaskedRecord, Params, PlanRecord,
};
use crate::masker::{
    apply_plan, sample_plan, score_attention, score_centroid, score_difference_nn,
    score_entity_spans, score_random, MaskDistribution, Strategy, StrategyConfig,
};
use crate::tficf::{count_corpus, select_seeds, tficf_scores, DiffSet, SeedFilters};

/// Load a corpus by extension: `.jsonl`/`.ndjson` is pretokenized, anything
/// else plaintext.
pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    let pretokenized = matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl") | Some("ndjson")
    );
    let (documents, warnings) = if pretokenized {
        load_pretokenized(path)?
    } else {
        load_plaintext(path)?
    };
    warnings.log_all("corpus");
    Ok(documents)
}

fn load_filters(cfg: &RunConfig) -> Result<SeedFilters> {
    let mut filters = SeedFilters {
        min_count: cfg.min_count,
        ..SeedFilters::default()
    };
    if let Some(path) = &cfg.stopwords {
        filters.stopwords = read_stopwords(path)?;
    }
    Ok(filters)
}

fn load_background_table(cfg: &RunConfig) -> Result<BackgroundTable> {
    let path = RunConfig::require(&cfg.background, "background")?;
    let (table, warnings) = crate::background::load_background(&path, cfg.floor_count)?;
    warnings.log_all("background");
    Ok(table)
}

fn load_store(cfg: &RunConfig) -> Result<EmbeddingStore> {
    match &cfg.embeddings {
        Some(path) => {
            let (store, warnings) = load_embeddings(path)?;
            warnings.log_all("embeddings");
            Ok(store)
        }
        None => Ok(EmbeddingStore::empty()),
    }
}

/// Score the corpus against the background table and write the seeds file.
pub fn run_seeds(cfg: &RunConfig, out: &Path) -> Result<String> {
    cfg.validate()?;
    let corpus_path = RunConfig::require(&cfg.corpus, "corpus")?;
    let documents = load_corpus(&corpus_path)?;
    let background = load_background_table(cfg)?;
    let store = load_store(cfg)?;
    let filters = load_filters(cfg)?;

    let counts = count_corpus(&documents);
    let scores = tficf_scores(&counts, &background);
    let diffset = select_seeds(&scores, cfg.k, &store, &filters)?;
    write_seeds(out, &Params::from(cfg), &scores, &diffset)?;
    Ok(format!(
        "seeds: scored {} words, selected {} seeds -> {}",
        scores.len(),
        diffset.k(),
        out.display()
    ))
}

fn score_document(
    doc: &Document,
    cfg: &RunConfig,
    diffset: Option<&DiffSet>,
    store: &EmbeddingStore,
    attention: Option<&HashMap<String, Vec<f64>>>,
    spans: Option<&HashMap<String, Vec<(usize, usize)>>>,
) -> Result<MaskDistribution> {
    match cfg.strategy {
        Strategy::DifferenceNn => {
            let diffset = diffset.ok_or(Error::NoSeeds)?;
            score_difference_nn(doc, diffset, store, cfg.clamp_epsilon)
        }
        Strategy::DifferenceCentroid => {
            let diffset = diffset.ok_or(Error::NoSeeds)?;
            score_centroid(doc, diffset, store, cfg.clamp_epsilon)
        }
        Strategy::Random => Ok(score_random(doc)),
        Strategy::Attention => {
            let attention = attention.expect("attention table loaded for attention strategy");
            let scores = attention
                .get(&doc.id)
                .ok_or_else(|| Error::MissingAnnotation {
                    kind: "attention",
                    doc_id: doc.id.clone(),
                })?;
            score_attention(doc, scores)
        }
        Strategy::Entity => {
            // Documents without a spans record have no entities.
            static NO_SPANS: Vec<(usize, usize)> = Vec::new();
            let spans = spans.expect("spans table loaded for entity strategy");
            let doc_spans = spans.get(&doc.id).unwrap_or(&NO_SPANS);
            score_entity_spans(doc, doc_spans, 1.0, 0.0, cfg.clamp_epsilon)
        }
    }
}

/// Compute distributions and sample plans for every document, in parallel
/// over `workers` threads, and write the plan file.
pub fn run_plan(
    cfg: &RunConfig,
    seeds_path: Option<&Path>,
    out: &Path,
    workers: usize,
) -> Result<String> {
    cfg.validate()?;
    let corpus_path = RunConfig::require(&cfg.corpus, "corpus")?;
    let documents = load_corpus(&corpus_path)?;

    let needs_seeds = matches!(
        cfg.strategy,
        Strategy::DifferenceNn | Strategy::DifferenceCentroid
    );
    let diffset = if needs_seeds {
        let path = seeds_path.ok_or_else(|| {
            Error::Config(vec![format!(
                "strategy {} requires --seeds",
                cfg.strategy
            )])
        })?;
        Some(DiffSet {
            seeds: read_seeds(path)?.seeds,
        })
    } else {
        None
    };
    let store = load_store(cfg)?;
    let attention = if cfg.strategy == Strategy::Attention {
        let path = RunConfig::require(&cfg.attention, "attention")?;
        Some(read_attention(&path)?)
    } else {
        None
    };
    let spans = if cfg.strategy == Strategy::Entity {
        let path = RunConfig::require(&cfg.spans, "spans")?;
        Some(read_spans(&path)?)
    } else {
        None
    };

    let strategy_config = StrategyConfig {
        strategy: cfg.strategy,
        ratio: cfg.ratio,
        clamp_epsilon: cfg.clamp_epsilon,
        rng_seed: cfg.rng_seed,
        replacement: cfg.replacement,
        ..StrategyConfig::default()
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(vec![format!("cannot build worker pool: {e}")]))?;
    let records: Result<Vec<PlanRecord>> = pool.install(|| {
        documents
            .par_iter()
            .map(|doc| {
                let dist = score_document(
                    doc,
                    cfg,
                    diffset.as_ref(),
                    &store,
                    attention.as_ref(),
                    spans.as_ref(),
                )?;
                let plan = sample_plan(&dist, doc, &strategy_config)?;
                Ok(PlanRecord::new(&dist, &plan))
            })
            .collect()
    });
    let records = records?;

    write_plans(out, &Params::from(cfg), &records)?;
    let masked: usize = records.iter().map(|r| r.masked_tokens.len()).sum();
    Ok(format!(
        "plan: planned {} documents ({}, ratio {}), {} tokens masked -> {}",
        records.len(),
        cfg.strategy,
        cfg.ratio,
        masked,
        out.display()
    ))
}

/// Apply a plan file to its corpus and write the masked token sequences.
pub fn run_apply(
    cfg: &RunConfig,
    plans_path: &Path,
    vocab_path: Option<&Path>,
    out: &Path,
) -> Result<String> {
    cfg.validate()?;
    let corpus_path = RunConfig::require(&cfg.corpus, "corpus")?;
    let documents = load_corpus(&corpus_path)?;
    let by_id: HashMap<&str, &Document> =
        documents.iter().map(|d| (d.id.as_str(), d)).collect();
    let (_, records) = read_plans(plans_path)?;

    let vocabulary = match vocab_path {
        Some(path) => read_vocab(path)?,
        None => corpus_vocabulary(&documents),
    };

    let mut masked = Vec::with_capacity(records.len());
    for record in &records {
        let doc = by_id
            .get(record.id.as_str())
            .ok_or_else(|| Error::UnknownDocument(record.id.clone()))?;
        let plan = record.to_plan(cfg.replacement);
        let tokens = apply_plan(doc, &plan, &vocabulary)?;
        masked.push(MaskedRecord {
            id: record.id.clone(),
            tokens,
        });
    }
    write_masked(out, &Params::from(cfg), &masked)?;
    Ok(format!(
        "apply: masked {} documents ({}) -> {}",
        masked.len(),
        cfg.replacement,
        out.display()
    ))
}

/// Extra inputs for the stats stage.
#[derive(Debug, Default)]
pub struct StatsRequest {
    pub dists: Option<PathBuf>,
    pub seeds: Option<PathBuf>,
    pub label: Option<String>,
    pub top: usize,
}

fn write_json_file<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Aggregate plan diagnostics and write the stats files plus a text report.
pub fn run_stats(
    cfg: &RunConfig,
    plans_path: &Path,
    request: &StatsRequest,
    out_dir: &Path,
) -> Result<String> {
    cfg.validate()?;
    let corpus_path = RunConfig::require(&cfg.corpus, "corpus")?;
    let documents = load_corpus(&corpus_path)?;
    let (_, records) = read_plans(plans_path)?;
    let plans: Vec<_> = records
        .iter()
        .map(|r| r.to_plan(cfg.replacement))
        .collect();
    // Distributions come from the plan records unless a separate
    // distributions file overrides them.
    let dists: Vec<MaskDistribution> = match &request.dists {
        Some(path) => read_plans(path)?
            .1
            .iter()
            .map(|r| r.to_distribution())
            .collect(),
        None => records.iter().map(|r| r.to_distribution()).collect(),
    };

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let params = Params::from(cfg);

    let histogram = masked_word_histogram(&plans, &documents)?;
    write_json_file(
        &out_dir.join("masked_words.json"),
        &serde_json::json!({
            "config": params,
            "total_masked": histogram.total(),
            "entries": histogram.entries,
        }),
    )?;

    let seeds_file = match &request.seeds {
        Some(path) => Some(read_seeds(path)?),
        None => None,
    };

    let usage = match &seeds_file {
        Some(sf) if dists.iter().all(|d| d.argmax_seed.is_some()) => {
            let words: Vec<String> = sf.seeds.iter().map(|s| s.word.clone()).collect();
            let usage = chosen_seed_histogram(&dists, &plans, &words)?;
            write_json_file(
                &out_dir.join("seed_usage.json"),
                &serde_json::json!({
                    "config": params,
                    "total_chosen": usage.total(),
                    "entries": usage.entries,
                }),
            )?;
            Some(usage)
        }
        _ => None,
    };

    let variance = seeds_file.as_ref().map(|sf| {
        seed_embedding_variance(&DiffSet {
            seeds: sf.seeds.clone(),
        })
    });
    if let Some(v) = &variance {
        write_json_file(
            &out_dir.join("variance.json"),
            &serde_json::json!({
                "config": params,
                "k": v.k,
                "variance": v.variance,
            }),
        )?;
    }

    let label_fraction = match &request.label {
        Some(label) => {
            let fraction = masked_group_label_fraction(&plans, &documents, label)?;
            write_json_file(
                &out_dir.join("label_fraction.json"),
                &serde_json::json!({
                    "config": params,
                    "label": label,
                    "fraction": fraction,
                }),
            )?;
            Some((label.clone(), fraction))
        }
        None => None,
    };

    let report_path = out_dir.join("report.txt");
    let mut report = Vec::new();
    render_report(
        &mut report,
        &params,
        documents.len(),
        &histogram,
        usage.as_ref(),
        variance.as_ref(),
        label_fraction.as_ref(),
        request.top,
    );
    fs::write(&report_path, report).map_err(|e| Error::io(&report_path, e))?;

    Ok(format!(
        "stats: {} masked tokens over {} distinct words -> {}",
        histogram.total(),
        histogram.entries.len(),
        out_dir.display()
    ))
}

#[allow(clippy::too_many_arguments)]
fn render_report(
    out: &mut Vec<u8>,
    params: &Params,
    documents: usize,
    histogram: &crate::analysis::MaskHistogram,
    usage: Option<&crate::analysis::SeedUsage>,
    variance: Option<&crate::analysis::VarianceReport>,
    label_fraction: Option<&(String, f64)>,
    top: usize,
) {
    let _ = writeln!(out, "# diffmask report");
    let _ = writeln!(
        out,
        "params: strategy={} k={} ratio={} rng_seed={} clamp_epsilon={} floor_count={} min_count={} replacement={}",
        params.strategy,
        params.k,
        params.ratio,
        params.rng_seed,
        params.clamp_epsilon,
        params.floor_count,
        params.min_count,
        params.replacement
    );
    let _ = writeln!(
        out,
        "documents: {documents}  masked tokens: {}",
        histogram.total()
    );
    let _ = writeln!(out);
    let shown = top.min(histogram.entries.len());
    let _ = writeln!(
        out,
        "top masked words ({shown} of {})",
        histogram.entries.len()
    );
    for (word, count) in histogram.entries.iter().take(top) {
        let _ = writeln!(out, "  {word:<24} {count:>8}");
    }
    if let Some(usage) = usage {
        let _ = writeln!(out);
        let shown = top.min(usage.entries.len());
        let _ = writeln!(out, "top chosen seeds ({shown} of {})", usage.entries.len());
        for (word, count) in usage.entries.iter().take(top) {
            let _ = writeln!(out, "  {word:<24} {count:>8}");
        }
    }
    if let Some(v) = variance {
        let _ = writeln!(out);
        let _ = writeln!(out, "seed embedding variance: k={} variance={}", v.k, v.variance);
    }
    if let Some((label, fraction)) = label_fraction {
        let _ = writeln!(out, "masked label fraction ({label:?}): {fraction}");
    }
}

/// Run seeds -> plan -> apply -> stats under one output directory, printing
/// a one-line summary per stage unless quiet.
pub fn run_pipeline(cfg: &RunConfig, workers: usize, quiet: bool) -> Result<()> {
    cfg.validate()?;
    let out_dir = RunConfig::require(&cfg.out, "out")?;
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let seeds_path = out_dir.join("seeds.json");
    let plans_path = out_dir.join("plans.jsonl");
    let masked_path = out_dir.join("masked.jsonl");

    let say = |line: String| {
        if !quiet {
            println!("{line}");
        }
    };

    let needs_seeds = matches!(
        cfg.strategy,
        Strategy::DifferenceNn | Strategy::DifferenceCentroid
    );
    let stage_seeds_path = if needs_seeds {
        say(run_seeds(cfg, &seeds_path)?);
        Some(seeds_path.clone())
    } else {
        None
    };
    say(run_plan(cfg, stage_seeds_path.as_deref(), &plans_path, workers)?);
    say(run_apply(cfg, &plans_path, None, &masked_path)?);
    let request = StatsRequest {
        dists: None,
        seeds: stage_seeds_path,
        label: None,
        top: 40,
    };
    say(run_stats(cfg, &plans_path, &request, &out_dir)?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_extension_sniffing() {
        let dir = tempfile::tempdir().unwrap();
        let txt = dir.path().join("c.txt");
        fs::write(&txt, "alpha beta\n").unwrap();
        let docs = load_corpus(&txt).unwrap();
        assert_eq!(docs[0].tokens.len(), 2);

        let jsonl = dir.path().join("c.jsonl");
        fs::write(
            &jsonl,
            "{\"id\":\"x\",\"tokens\":[\"a\"],\"groups\":[{\"members\":[0]}]}\n",
        )
        .unwrap();
        let docs = load_corpus(&jsonl).unwrap();
        assert_eq!(docs[0].id, "x");
    }

    #[test]
    fn plan_requires_seeds_for_nn() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("c.txt");
        fs::write(&corpus, "alpha beta gamma\n").unwrap();
        let cfg = RunConfig {
            corpus: Some(corpus),
            ..RunConfig::default()
        };
        let err = run_plan(&cfg, None, &dir.path().join("p.jsonl"), 1).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn random_strategy_plans_without_seeds() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("c.txt");
        fs::write(&corpus, "alpha beta gamma delta\nepsilon zeta\n").unwrap();
        let cfg = RunConfig {
            corpus: Some(corpus),
            strategy: Strategy::Random,
            ..RunConfig::default()
        };
        let out = dir.path().join("p.jsonl");
        run_plan(&cfg, None, &out, 2).unwrap();
        let (params, records) = read_plans(&out).unwrap();
        assert_eq!(params.unwrap().strategy, Strategy::Random);
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].probs, vec![0.25; 4]);
    }
}
