use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown preset '{0}' (expected fig1, fig2-L32, fig2-L64 or fig3-L64)")]
    UnknownPreset(String),

    #[error("missing parameter '{0}'")]
    MissingParameter(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot load config {path}: {message}")]
    ConfigFile { path: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("cannot write output: {0}")]
    Output(String),

    #[error(transparent)]
    Core(#[from] ccdl::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::UnknownPreset(_) => "UnknownPreset",
            CliError::MissingParameter(_) => "MissingParameter",
            CliError::InvalidConfig(_) => "InvalidConfig",
            CliError::ConfigFile { .. } => "ConfigFile",
            CliError::Usage(_) => "Usage",
            CliError::Output(_) => "Output",
            CliError::Core(e) => e.kind(),
        }
    }

    /// One-line JSON object with `error` (the kind) and `message` keys.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
