use thiserror::Error;

use crate::model::ConfigIssue;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {}", format_issues(.0))]
    InvalidConfig(Vec<ConfigIssue>),
    #[error("invalid popularity: {0}")]
    InvalidPopularity(String),
    #[error("invalid caching marginals: {0}")]
    InvalidMarginals(String),
    #[error("invalid combination distribution: {0}")]
    InvalidDistribution(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("config parse error: {0}")]
    Parse(String),
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
