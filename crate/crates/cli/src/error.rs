use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{}", fmt_parse(*line, message))]
    Parse { line: Option<usize>, message: String },

    #[error("{}", fmt_config(key, *line, message))]
    Config {
        key: String,
        line: Option<usize>,
        message: String,
    },

    #[error("{context}: {source}")]
    Model {
        context: String,
        source: beliefsim_core::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{0}")]
    Output(String),
}

fn fmt_parse(line: Option<usize>, message: &str) -> String {
    match line {
        Some(l) => format!("parse error at line {l}: {message}"),
        None => format!("parse error: {message}"),
    }
}

fn fmt_config(key: &str, line: Option<usize>, message: &str) -> String {
    let key = if key.is_empty() { "<root>" } else { key };
    match line {
        Some(l) => format!("config error at `{key}` (line {l}): {message}"),
        None => format!("config error at `{key}`: {message}"),
    }
}

impl HarnessError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        HarnessError::Config {
            key: key.into(),
            line: None,
            message: message.into(),
        }
    }

    /// Wraps a module error; invalid input counts as a configuration error.
    pub fn model(context: impl Into<String>, source: beliefsim_core::Error) -> Self {
        HarnessError::Model {
            context: context.into(),
            source,
        }
    }

    /// Process exit status: 2 for configuration problems, 3 for numerical
    /// failures, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Parse { .. } | HarnessError::Config { .. } => 2,
            HarnessError::Model { source, .. } if source.is_numerical() => 3,
            HarnessError::Model { .. } => 2,
            HarnessError::Io { .. } | HarnessError::Output(_) => 1,
        }
    }
}
