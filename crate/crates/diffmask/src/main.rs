use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use diffmask::config::RunConfig;
use diffmask::error::{Error, Result};
use diffmask::pipeline::{self, StatsRequest};

#[derive(Parser)]
#[command(name = "diffmask", version, about = "Corpus difference analysis and masking plans")]
struct Cli {
    /// Flat key=value config file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Suppress per-stage summary lines.
    #[arg(long, global = true)]
    quiet: bool,

    /// Worker threads for the plan stage (default: available cores,
    /// or the DIFFMASK_WORKERS environment variable).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct CommonOpts {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    background: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    attention: Option<PathBuf>,
    #[arg(long)]
    spans: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    rng_seed: Option<u64>,
    #[arg(long)]
    clamp_epsilon: Option<f64>,
    #[arg(long)]
    floor_count: Option<u64>,
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    replacement: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Score corpus words against the background table and select seeds.
    Seeds {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Compute mask distributions and sample mask plans.
    Plan {
        #[command(flatten)]
        common: CommonOpts,
        /// Seeds file from the seeds stage (required for the
        /// difference strategies).
        #[arg(long)]
        seeds: Option<PathBuf>,
    },
    /// Apply a plan file to its corpus.
    Apply {
        #[command(flatten)]
        common: CommonOpts,
        /// Plan file from the plan stage.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Replacement vocabulary, one token per line (default: the
        /// corpus vocabulary).
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Aggregate masking diagnostics from a plan file.
    Stats {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        plans: Option<PathBuf>,
        /// Optional separate distributions file (defaults to the plans
        /// file, which already carries probabilities).
        #[arg(long)]
        dists: Option<PathBuf>,
        /// Seeds file, enabling seed-usage and variance reports.
        #[arg(long)]
        seeds: Option<PathBuf>,
        /// Report the fraction of masked tokens in groups with this label.
        #[arg(long)]
        label: Option<String>,
        /// Rows per histogram in the text report.
        #[arg(long, default_value_t = 40)]
        top: usize,
    },
    /// Run seeds, plan, apply, and stats under one output directory.
    Pipeline {
        #[command(flatten)]
        common: CommonOpts,
    },
}

impl Command {
    fn common(&self) -> &CommonOpts {
        match self {
            Command::Seeds { common }
            | Command::Plan { common, .. }
            | Command::Apply { common, .. }
            | Command::Stats { common, .. }
            | Command::Pipeline { common } => common,
        }
    }
}

/// Resolve the run configuration: defaults, then config file, then flags.
fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    let common = cli.command.common();
    macro_rules! override_path {
        ($field:ident) => {
            if let Some(v) = &common.$field {
                cfg.$field = Some(v.clone());
            }
        };
    }
    override_path!(corpus);
    override_path!(background);
    override_path!(embeddings);
    override_path!(stopwords);
    override_path!(attention);
    override_path!(spans);
    override_path!(out);
    if let Some(v) = common.k {
        cfg.k = v;
    }
    if let Some(v) = common.ratio {
        cfg.ratio = v;
    }
    if let Some(v) = &common.strategy {
        cfg.strategy = v.parse()?;
    }
    if let Some(v) = common.rng_seed {
        cfg.rng_seed = v;
    }
    if let Some(v) = common.clamp_epsilon {
        cfg.clamp_epsilon = v;
    }
    if let Some(v) = common.floor_count {
        cfg.floor_count = v;
    }
    if let Some(v) = common.min_count {
        cfg.min_count = v;
    }
    if let Some(v) = &common.replacement {
        cfg.replacement = v.parse()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_workers(cli: &Cli) -> Result<usize> {
    let workers = match cli.workers {
        Some(w) => w,
        None => match std::env::var("DIFFMASK_WORKERS") {
            Ok(v) => v.parse().map_err(|_| {
                Error::Config(vec![format!("invalid DIFFMASK_WORKERS value {v:?}")])
            })?,
            Err(_) => std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
        },
    };
    if workers == 0 {
        return Err(Error::Config(vec!["workers must be >= 1".to_string()]));
    }
    Ok(workers)
}

fn out_path(cfg: &RunConfig) -> Result<PathBuf> {
    RunConfig::require(&cfg.out, "out")
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let workers = resolve_workers(cli)?;
    let say = |line: String| {
        if !cli.quiet {
            println!("{line}");
        }
    };
    match &cli.command {
        Command::Seeds { .. } => say(pipeline::run_seeds(&cfg, &out_path(&cfg)?)?),
        Command::Plan { seeds, .. } => say(pipeline::run_plan(
            &cfg,
            seeds.as_deref(),
            &out_path(&cfg)?,
            workers,
        )?),
        Command::Apply { plan, vocab, .. } => {
            let plan = plan.clone().ok_or_else(|| {
                Error::Config(vec!["missing required path: plan".to_string()])
            })?;
            say(pipeline::run_apply(
                &cfg,
                &plan,
                vocab.as_deref(),
                &out_path(&cfg)?,
            )?)
        }
        Command::Stats {
            plans,
            dists,
            seeds,
            label,
            top,
            ..
        } => {
            let plans = plans.clone().ok_or_else(|| {
                Error::Config(vec!["missing required path: plans".to_string()])
            })?;
            let request = StatsRequest {
                dists: dists.clone(),
                seeds: seeds.clone(),
                label: label.clone(),
                top: *top,
            };
            say(pipeline::run_stats(&cfg, &plans, &request, &out_path(&cfg)?)?)
        }
        Command::Pipeline { .. } => pipeline::run_pipeline(&cfg, workers, cli.quiet)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
