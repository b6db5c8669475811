use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{message}")]
    Config { key: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Model(#[from] cavkin::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Model(cavkin::Error::InvalidParameter { .. }) => "invalid-parameter",
            CliError::Model(_) => "runtime",
        }
    }

    /// 2 for anything wrong with the invocation or the configuration.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "config" | "usage" | "invalid-parameter" => 2,
            _ => 1,
        }
    }

    /// `error kind=<kind> [key=<key>] message="<text>"` on one line.
    pub fn line(&self) -> String {
        let key = match self {
            CliError::Config { key, .. } => Some(key.as_str()),
            CliError::Model(cavkin::Error::InvalidParameter { name, .. }) => Some(*name),
            _ => None,
        };
        let message = quote(&self.to_string());
        match key {
            Some(k) => format!("error kind={} key={} message={}", self.kind(), k, message),
            None => format!("error kind={} message={}", self.kind(), message),
        }
    }
}

/// Double-quoted, with quotes, backslashes and line breaks escaped.
pub(crate) fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
