use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HdaError>;

#[derive(Debug, Error)]
pub enum HdaError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric divergence at t={t_ms} ms: {what} (index {index})")]
    NumericDivergence {
        what: String,
        index: usize,
        t_ms: f64,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("particle degeneracy: all weights underflow (min residual {min_residual:e})")]
    Degeneracy { min_residual: f64 },

    #[error("scoring error: {0}")]
    Scoring(String),

    #[error("member {member}: {source}")]
    Member {
        member: usize,
        #[source]
        source: Box<HdaError>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl HdaError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        HdaError::Config(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        HdaError::Parse(msg.into())
    }

    /// Short category name, used for CLI diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            HdaError::Config(_) => "config",
            HdaError::Domain(_) => "domain",
            HdaError::NumericDivergence { .. } | HdaError::Numeric(_) => "numeric",
            HdaError::Degeneracy { .. } => "degeneracy",
            HdaError::Scoring(_) => "scoring",
            HdaError::Member { source, .. } => source.category(),
            HdaError::Parse(_) => "parse",
            HdaError::Io(_) => "io",
        }
    }

    /// Process exit code for the category.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" | "domain" => 2,
            "numeric" => 3,
            "degeneracy" => 4,
            "scoring" => 5,
            "parse" | "io" => 6,
            _ => 1,
        }
    }
}
