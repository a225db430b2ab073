use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] clusterperm::Error),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{0}")]
    Io(String),

    #[error("configuration: {0}")]
    Config(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Parse { .. } => "E_PARSE",
            CliError::Io(_) => "E_IO",
            CliError::Config(_) => "E_CONFIG",
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            code: &'a str,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            line: Option<u64>,
        }
        #[derive(Serialize)]
        struct Envelope<'a> {
            error: Body<'a>,
        }
        let line = match self {
            CliError::Parse { line, .. } => Some(*line),
            _ => None,
        };
        serde_json::to_string(&Envelope { error: Body { code: self.code(), message: self.to_string(), line } })
            .expect("error envelope serializes")
    }
}
