//! `coreperi`: concept co-occurrence core/periphery analysis as composable,
//! cacheable pipeline stages.
//!
//! Typical use: generate the demo corpus, then run the pipeline end to end.
//!
//! ```text
//! coreperi gen-corpus --dir demo
//! coreperi pipeline --config demo/demo.conf
//! ```

mod artifacts;
mod config;
mod manifest;
mod regress;
mod stages;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use coreperi_core::synth::{demo_corpus, DemoConfig};

use config::RunConfig;
use manifest::Manifest;

#[derive(Debug, Parser)]
#[command(name = "coreperi", version, about = "concept core/periphery analysis pipeline")]
struct Cli {
    /// Config file with key = value lines; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Flag overrides for config values.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Corpus file (one JSON record per line).
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Field scheme file (subfield<TAB>meso lines).
    #[arg(long, global = true)]
    pub scheme: Option<PathBuf>,
    /// Output directory for artifacts and the manifest.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// First accepted publication year.
    #[arg(long, global = true)]
    pub year_min: Option<i32>,
    /// Last accepted publication year.
    #[arg(long, global = true)]
    pub year_max: Option<i32>,
    /// Moving-window length in years.
    #[arg(long, global = true)]
    pub window: Option<u32>,
    /// Subfield assignment mode.
    #[arg(long, global = true, value_parser = ["primary", "all"])]
    pub assignment_mode: Option<String>,
    /// Vocabulary threshold mode.
    #[arg(long, global = true, value_parser = ["proportional", "min10"])]
    pub threshold: Option<String>,
    /// Base seed (COREPERI_SEED overrides the config file; this flag wins).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Label-switching restarts per cell.
    #[arg(long, global = true)]
    pub restarts: Option<u32>,
    /// Significance level for structure screening.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Random graphs per significance screen (at least 100).
    #[arg(long, global = true)]
    pub sig_samples: Option<u32>,
    /// Restrict detection to a single core/periphery structure.
    #[arg(long, global = true)]
    pub single_core: bool,
    /// Null-model replicates per cell.
    #[arg(long, global = true)]
    pub replicates: Option<u32>,
    /// Swap attempts per edge during rewiring.
    #[arg(long, global = true)]
    pub swap_factor: Option<u32>,
    /// Count accepted swaps against the budget instead of attempts.
    #[arg(long, global = true)]
    pub accepted_swaps: bool,
    /// Horizon year for the CD index (default: year_max).
    #[arg(long, global = true)]
    pub cd_horizon: Option<i32>,
    /// Worker threads for per-cell stages (0 = all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Extra stop words, one per line.
    #[arg(long, global = true)]
    pub extra_stopwords: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest the corpus, extract concepts, and build the vocabulary.
    Extract,
    /// Build per-(subfield, year) co-occurrence networks.
    BuildNet,
    /// Detect core/periphery structures and screen their significance.
    Detect,
    /// Compute churn, core sizes, concentration, mobility, and meso averages.
    Metrics,
    /// Compare observed metrics against degree-preserving null replicates.
    NullCompare,
    /// Compute the CD disruption index per paper.
    CdIndex,
    /// Count consensus words and citation markers per abstract.
    Consensus,
    /// Run the standard regression forms over the metric tables.
    Regress,
    /// Collate metrics into percent-change tables and a summary report.
    Report,
    /// Run every stage in order.
    Pipeline,
    /// Write the bundled synthetic demo corpus, scheme, and config.
    GenCorpus {
        /// Target directory for the demo files.
        #[arg(long, default_value = "demo")]
        dir: PathBuf,
        /// Demo generator seed.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Papers per (subfield, year) cell.
        #[arg(long, default_value_t = 36)]
        papers_per_cell: usize,
    },
}

/// Shared state threaded through the stages.
pub struct RunContext {
    pub cfg: RunConfig,
    pub manifest: Manifest,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Command::GenCorpus { dir, seed, papers_per_cell } = &cli.command {
        return gen_corpus(dir, *seed, *papers_per_cell);
    }
    let cfg = RunConfig::resolve(cli.config.as_deref(), &cli.overrides)?;
    if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global()
            .context("cannot configure the worker pool")?;
    }
    let manifest = Manifest::load(&cfg.out_dir)?;
    let mut ctx = RunContext { cfg, manifest };
    match cli.command {
        Command::Extract => stages::stage_extract(&mut ctx),
        Command::BuildNet => stages::stage_build_net(&mut ctx),
        Command::Detect => stages::stage_detect(&mut ctx),
        Command::Metrics => stages::stage_metrics(&mut ctx),
        Command::NullCompare => stages::stage_null_compare(&mut ctx),
        Command::CdIndex => stages::stage_cd_index(&mut ctx),
        Command::Consensus => stages::stage_consensus(&mut ctx),
        Command::Regress => regress::stage_regress(&mut ctx),
        Command::Report => regress::stage_report(&mut ctx),
        Command::Pipeline => stages::run_pipeline(&mut ctx),
        Command::GenCorpus { .. } => unreachable!("handled above"),
    }
}

fn gen_corpus(dir: &PathBuf, seed: u64, papers_per_cell: usize) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let demo = demo_corpus(&DemoConfig { seed, papers_per_cell, ..Default::default() });
    let corpus_path = dir.join("demo_corpus.jsonl");
    let mut lines = String::new();
    for record in &demo.records {
        lines.push_str(&serde_json::to_string(record)?);
        lines.push('\n');
    }
    fs::write(&corpus_path, lines)?;
    fs::write(dir.join("demo_scheme.tsv"), &demo.scheme_tsv)?;
    let conf = "\
# demo pipeline configuration
corpus = demo_corpus.jsonl
scheme = demo_scheme.tsv
out_dir = out
assignment_mode = primary
threshold = min10
year_min = 2001
year_max = 2010
window = 1
seed = 42
restarts = 10
alpha = 0.05
sig_samples = 100
replicates = 100
swap_factor = 100
";
    fs::write(dir.join("demo.conf"), conf)?;
    log::info!(
        "wrote {} records to {} plus demo_scheme.tsv and demo.conf",
        demo.records.len(),
        corpus_path.display()
    );
    Ok(())
}
