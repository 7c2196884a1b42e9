//! Run configuration: a key = value config file, CLI-flag overrides, and the
//! COREPERI_SEED environment variable. Precedence: flag > environment (seed
//! only) > file > default.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use coreperi_core::concepts::ThresholdMode;
use coreperi_core::coreperiphery::SolverConfig;
use coreperi_core::ingest::AssignmentMode;
use coreperi_core::nullmodel::SwapBudget;
use serde::Serialize;

use crate::Overrides;

/// Fully resolved pipeline configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub scheme: PathBuf,
    pub out_dir: PathBuf,
    pub year_min: i32,
    pub year_max: i32,
    pub window: u32,
    pub assignment_mode: String,
    pub threshold: String,
    pub seed: u64,
    pub restarts: u32,
    pub alpha: f64,
    pub sig_samples: u32,
    pub single_core: bool,
    pub replicates: u32,
    pub swap_factor: u32,
    pub accepted_swaps: bool,
    pub cd_horizon: Option<i32>,
    pub cd_citers_only: bool,
    pub consensus_presence: bool,
    pub min_meso_concepts: usize,
    pub jobs: usize,
    pub extra_stopwords: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: PathBuf::from("corpus.jsonl"),
            scheme: PathBuf::from("scheme.tsv"),
            out_dir: PathBuf::from("out"),
            year_min: 1900,
            year_max: 2100,
            window: 1,
            assignment_mode: "primary".into(),
            threshold: "proportional".into(),
            seed: 0,
            restarts: 10,
            alpha: 0.05,
            sig_samples: 100,
            single_core: false,
            replicates: 100,
            swap_factor: 100,
            accepted_swaps: false,
            cd_horizon: None,
            cd_citers_only: false,
            consensus_presence: false,
            min_meso_concepts: 100,
            jobs: 0,
            extra_stopwords: None,
        }
    }
}

impl RunConfig {
    /// Loads the config file (if given), then applies environment and flag
    /// overrides.
    pub fn resolve(config_path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = config_path {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            cfg.apply_file(&text, path)?;
        }
        if let Ok(seed) = std::env::var("COREPERI_SEED") {
            cfg.seed = seed
                .trim()
                .parse()
                .with_context(|| format!("COREPERI_SEED is not a valid seed: {seed:?}"))?;
        }
        cfg.apply_overrides(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_file(&mut self, text: &str, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected key = value, got {line:?}", path.display(), lineno + 1);
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        let rel = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            if p.is_absolute() { p } else { base.join(p) }
        };
        for (key, value) in entries {
            match key.as_str() {
                "corpus" => self.corpus = rel(&value),
                "scheme" => self.scheme = rel(&value),
                "out_dir" => self.out_dir = rel(&value),
                "year_min" => self.year_min = parse(&key, &value)?,
                "year_max" => self.year_max = parse(&key, &value)?,
                "window" => self.window = parse(&key, &value)?,
                "assignment_mode" => self.assignment_mode = value,
                "threshold" => self.threshold = value,
                "seed" => self.seed = parse(&key, &value)?,
                "restarts" => self.restarts = parse(&key, &value)?,
                "alpha" => self.alpha = parse(&key, &value)?,
                "sig_samples" => self.sig_samples = parse(&key, &value)?,
                "single_core" => self.single_core = parse_bool(&key, &value)?,
                "replicates" => self.replicates = parse(&key, &value)?,
                "swap_factor" => self.swap_factor = parse(&key, &value)?,
                "accepted_swaps" => self.accepted_swaps = parse_bool(&key, &value)?,
                "cd_horizon" => self.cd_horizon = Some(parse(&key, &value)?),
                "cd_citers_only" => self.cd_citers_only = parse_bool(&key, &value)?,
                "consensus_presence" => self.consensus_presence = parse_bool(&key, &value)?,
                "min_meso_concepts" => self.min_meso_concepts = parse(&key, &value)?,
                "jobs" => self.jobs = parse(&key, &value)?,
                "extra_stopwords" => self.extra_stopwords = Some(rel(&value)),
                other => bail!("{}: unknown config key {other:?}", path.display()),
            }
        }
        Ok(())
    }

    fn apply_overrides(&mut self, ov: &Overrides) {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = &ov.$field {
                    self.$field = v.clone();
                }
            };
        }
        take!(corpus);
        take!(scheme);
        take!(out_dir);
        take!(year_min);
        take!(year_max);
        take!(window);
        take!(seed);
        take!(restarts);
        take!(alpha);
        take!(sig_samples);
        take!(replicates);
        take!(swap_factor);
        take!(jobs);
        if let Some(v) = &ov.extra_stopwords {
            self.extra_stopwords = Some(v.clone());
        }
        if let Some(v) = &ov.assignment_mode {
            self.assignment_mode = v.to_string();
        }
        if let Some(v) = &ov.threshold {
            self.threshold = v.to_string();
        }
        if let Some(v) = ov.cd_horizon {
            self.cd_horizon = Some(v);
        }
        if ov.single_core {
            self.single_core = true;
        }
        if ov.accepted_swaps {
            self.accepted_swaps = true;
        }
    }

    fn validate(&self) -> Result<()> {
        if self.year_min > self.year_max {
            bail!("year_min {} exceeds year_max {}", self.year_min, self.year_max);
        }
        if self.window < 1 {
            bail!("window must be at least 1");
        }
        if !(0.0..1.0).contains(&self.alpha) || self.alpha <= 0.0 {
            bail!("alpha must lie in (0, 1)");
        }
        self.assignment_mode_enum()?;
        self.threshold_enum()?;
        Ok(())
    }

    pub fn assignment_mode_enum(&self) -> Result<AssignmentMode> {
        match self.assignment_mode.as_str() {
            "primary" => Ok(AssignmentMode::PrimaryOnly),
            "all" => Ok(AssignmentMode::AllListed),
            other => bail!("assignment_mode must be \"primary\" or \"all\", got {other:?}"),
        }
    }

    pub fn threshold_enum(&self) -> Result<ThresholdMode> {
        match self.threshold.as_str() {
            "proportional" => Ok(ThresholdMode::Proportional),
            "min10" => Ok(ThresholdMode::MinCount),
            other => bail!("threshold must be \"proportional\" or \"min10\", got {other:?}"),
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            n_restarts: self.restarts,
            rng_seed: self.seed,
            sig_alpha: self.alpha,
            sig_samples: self.sig_samples,
            single_core_mode: self.single_core,
        }
    }

    pub fn swap_budget(&self) -> SwapBudget {
        if self.accepted_swaps {
            SwapBudget::Accepted
        } else {
            SwapBudget::Attempts
        }
    }

    /// Canonical serialization used for the manifest config hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("config key {key:?}: cannot parse {value:?}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => bail!("config key {key:?}: expected a boolean, got {other:?}"),
    }
}
