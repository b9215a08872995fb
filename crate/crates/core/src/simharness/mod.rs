//! Scenario generation, experiment loops, sweeps, statistics and CSV output.

mod config;
mod output;
mod run;
mod scenario;
pub mod stats;

pub use config::*;
pub use output::*;
pub use run::*;
pub use scenario::*;

use thiserror::Error;

use crate::agent::AgentError;
use crate::channel::ChannelError;
use crate::content::ContentError;
use crate::latency::LatencyError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{0}` given twice")]
    DuplicateKey(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("invalid configuration: {0}")]
    Invalid(&'static str),
    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Content(#[from] ContentError),
    #[error(transparent)]
    Latency(#[from] LatencyError),
    #[error("I/O error after {frames} frames: {source}")]
    Io { frames: usize, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, HarnessError>;
