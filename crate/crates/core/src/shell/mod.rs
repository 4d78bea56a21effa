//! File formats and the command implementations behind the `paraguard` binary.

pub mod commands;
pub mod model_file;
pub mod trace;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtmc::DtmcError;
use crate::interval::Interval;
use crate::monitor::{AlarmConfig, CbiBoxPolicy, ClosedFormCache, MonitorError};
use crate::paramcheck::CheckError;
use crate::rational;
use crate::simulator::SimError;

pub use model_file::{load_model, parse_model, LoadedModel, ModelFile};

/// Process exit codes of the command-line tool.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const VALIDATION: i32 = 3;
    pub const CHAIN: i32 = 4;
    pub const THRESHOLD: i32 = 5;
}

#[derive(Debug, Error)]
pub enum ShellError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error("{file}: {inner}")]
    InFile { file: PathBuf, inner: Box<ShellError> },
    #[error("invalid model: {0}")]
    Validation(String),
    #[error("trace error: {0}")]
    Chain(String),
    #[error("threshold violated: {0}")]
    Threshold(String),
    #[error("{0}")]
    Other(String),
}

impl ShellError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ShellError::Io { .. } | ShellError::Other(_) => exit::IO,
            ShellError::Parse { .. } => exit::PARSE,
            ShellError::InFile { inner, .. } => inner.exit_code(),
            ShellError::Validation(_) => exit::VALIDATION,
            ShellError::Chain(_) => exit::CHAIN,
            ShellError::Threshold(_) => exit::THRESHOLD,
        }
    }

    pub(crate) fn in_file(self, path: &Path) -> Self {
        match self {
            e @ (ShellError::Io { .. } | ShellError::InFile { .. }) => e,
            e => ShellError::InFile {
                file: path.to_path_buf(),
                inner: Box::new(e),
            },
        }
    }
}

impl From<DtmcError> for ShellError {
    fn from(e: DtmcError) -> Self {
        ShellError::Validation(e.to_string())
    }
}

impl From<CheckError> for ShellError {
    fn from(e: CheckError) -> Self {
        match e {
            CheckError::Model(m) => m.into(),
            other => ShellError::Validation(other.to_string()),
        }
    }
}

impl From<SimError> for ShellError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::BrokenChain { .. } => ShellError::Chain(e.to_string()),
            other => ShellError::Validation(other.to_string()),
        }
    }
}

impl From<MonitorError> for ShellError {
    fn from(e: MonitorError) -> Self {
        match e {
            MonitorError::ChainBreak { .. } | MonitorError::UnknownTransition { .. } => ShellError::Chain(e.to_string()),
            MonitorError::Check(c) => c.into(),
            other => ShellError::Validation(other.to_string()),
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, ShellError> {
    std::fs::read_to_string(path).map_err(|source| ShellError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), ShellError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| ShellError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| ShellError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Experiment settings, read from the `--config` TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub n_missions: u64,
    pub gamma_range: Interval,
    pub step_cap: u64,
    /// Policy weight of the showcase mission.
    #[serde(with = "rational::serde_text")]
    pub mission_gamma: rational::Rational,
    /// Candidates simulated when picking the showcase mission.
    pub candidates: u64,
    pub alarm: AlarmConfig,
    pub cbi_box: CbiBoxPolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 2019,
            n_missions: 49,
            gamma_range: Interval::new(rational::ratio(25, 40), rational::ratio(35, 40)),
            step_cap: crate::simulator::DEFAULT_STEP_CAP,
            mission_gamma: rational::ratio(3, 4),
            candidates: 20,
            alarm: AlarmConfig::default(),
            cbi_box: CbiBoxPolicy::Point,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ShellError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = read_text(path)?;
        toml::from_str(&text)
            .map_err(|e| ShellError::Parse {
                line: e.span().map(|s| text[..s.start].lines().count().max(1)),
                message: e.message().to_string(),
            })
            .map_err(|e| e.in_file(path))
    }
}

pub fn save_cache(path: &Path, cache: &ClosedFormCache) -> Result<(), ShellError> {
    let text = serde_json::to_string_pretty(cache).map_err(|e| ShellError::Other(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn load_cache(path: &Path) -> Result<ClosedFormCache, ShellError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| {
        ShellError::Parse {
            line: Some(e.line()),
            message: e.to_string(),
        }
        .in_file(path)
    })
}
