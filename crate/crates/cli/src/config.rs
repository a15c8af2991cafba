//! Pipeline configuration assembled from flags and an optional TOML file.
//! Flags override the file; the file overrides built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, ValueEnum};
use serde::Deserialize;

use navmine::ingest::ClientKey;
use navmine::optimizer::Overflow;
use navmine::{Damping, DampingConfig, LastDwellPolicy, LogFormat, MiningConfig, OmegaWeights};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Csv,
    Text,
}

/// Flags shared by every subcommand that reads logs.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineArgs {
    /// Access log files.
    #[arg(required = true)]
    pub logs: Vec<PathBuf>,
    /// TOML file with defaults for any of the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Log line format: common or combined.
    #[arg(long)]
    pub format: Option<String>,
    /// Session inactivity timeout in minutes.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Global damping factor in [0.15, 0.85].
    #[arg(long)]
    pub damping: Option<f64>,
    /// Per-page damping overrides, one `page<TAB>d` per line.
    #[arg(long)]
    pub damping_file: Option<PathBuf>,
    /// Positional IRL weights, e.g. 1,0.75,0.5,0.25.
    #[arg(long)]
    pub omega: Option<String>,
    /// Weight for positions past the omega vector: repeat or zero.
    #[arg(long)]
    pub omega_overflow: Option<String>,
    /// Site edge list; without one, links are inferred from the sessions.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Final-visit dwell: mean or const:<seconds>.
    #[arg(long)]
    pub last_dwell: Option<String>,
    /// Identify clients by address and user agent.
    #[arg(long)]
    pub key_user_agent: bool,
    /// Leave estimated final-visit dwells out of the thresholds.
    #[arg(long)]
    pub exclude_estimated: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub format: Option<String>,
    pub timeout: Option<f64>,
    pub damping: Option<f64>,
    pub damping_file: Option<PathBuf>,
    pub omega: Option<String>,
    pub omega_overflow: Option<String>,
    pub graph: Option<PathBuf>,
    pub last_dwell: Option<String>,
    pub key_user_agent: Option<bool>,
    pub exclude_estimated: Option<bool>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub emit: Option<Emit>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::config(path, e))
    }
}

/// Everything needed to run the pipeline, validated.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub logs: Vec<PathBuf>,
    pub graph: Option<PathBuf>,
    pub mining: MiningConfig,
    pub threads: Option<usize>,
}

fn parsed<T, E: std::fmt::Display>(flag: &str, r: Result<T, E>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Config(format!("--{flag}: {e}")))
}

fn must_exist(what: &str, path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{what} `{}` does not exist",
            path.display()
        )))
    }
}

impl PipelineArgs {
    /// Merge with `file` and validate.
    pub fn resolve(&self, file: &FileConfig) -> Result<PipelineConfig, CliError> {
        let mut mining = MiningConfig::default();
        if let Some(f) = self.format.as_ref().or(file.format.as_ref()) {
            mining.format = parsed("format", f.parse::<LogFormat>())?;
        }
        if let Some(minutes) = self.timeout.or(file.timeout) {
            if !(minutes.is_finite() && minutes > 0.0) {
                return Err(CliError::Config(format!(
                    "--timeout: `{minutes}` must be positive"
                )));
            }
            mining.session.timeout = Duration::from_secs_f64(minutes * 60.0);
        }
        if let Some(p) = self.last_dwell.as_ref().or(file.last_dwell.as_ref()) {
            mining.session.last_dwell = parsed("last-dwell", p.parse::<LastDwellPolicy>())?;
        }
        if let Some(d) = self.damping.or(file.damping) {
            mining.damping = DampingConfig::uniform(parsed("damping", Damping::new(d))?);
        }
        if let Some(path) = self.damping_file.as_ref().or(file.damping_file.as_ref()) {
            must_exist("damping file", path)?;
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            mining
                .damping
                .load_overrides(text.as_bytes())
                .map_err(|e| CliError::config(path, e))?;
        }
        if let Some(w) = self.omega.as_ref().or(file.omega.as_ref()) {
            mining.omega = parsed("omega", w.parse::<OmegaWeights>())?;
        }
        if let Some(o) = self
            .omega_overflow
            .as_ref()
            .or(file.omega_overflow.as_ref())
        {
            mining.omega.overflow = parsed("omega-overflow", o.parse::<Overflow>())?;
        }
        if self.key_user_agent || file.key_user_agent == Some(true) {
            mining.filter.client_key = ClientKey::AddressAndAgent;
        }
        if self.exclude_estimated || file.exclude_estimated == Some(true) {
            mining.include_estimated = false;
        }
        let threads = self.threads.or(file.threads);
        if threads == Some(0) {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        let graph = self.graph.clone().or_else(|| file.graph.clone());
        if let Some(g) = &graph {
            must_exist("graph file", g)?;
        }
        for log in &self.logs {
            must_exist("log file", log)?;
        }
        Ok(PipelineConfig {
            logs: self.logs.clone(),
            graph,
            mining,
            threads,
        })
    }

    pub fn file_config(&self) -> Result<FileConfig, CliError> {
        match &self.config {
            Some(path) => {
                must_exist("config file", path)?;
                FileConfig::load(path)
            }
            None => Ok(FileConfig::default()),
        }
    }
}
