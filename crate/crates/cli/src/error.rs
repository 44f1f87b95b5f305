//! CLI error type; maps onto process exit codes.

use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Channel(#[from] obeam_core::channel::ChannelError),
    #[error(transparent)]
    Outage(#[from] obeam_core::outage::OutageError),
    #[error(transparent)]
    Design(#[from] obeam_core::beamdesign::DesignError),
    #[error(transparent)]
    QuadForm(#[from] obeam_core::quadform::QuadFormError),
}

impl CliError {
    /// 2 for configuration/usage problems, 1 reserved for failed embedded
    /// checks (reported via the outcome, not an error).
    pub fn exit_code(&self) -> i32 {
        2
    }
}
