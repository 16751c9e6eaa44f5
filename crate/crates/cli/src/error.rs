use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    /// Input file that exists but cannot be read as the expected format.
    #[error("{0}")]
    Input(String),

    #[error(transparent)]
    Core(#[from] mobw_crisk::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        use mobw_crisk::Error as E;
        match self {
            CliError::Usage(_) => "usage",
            CliError::Input(_) => "input",
            CliError::Io(_) => "io",
            CliError::Core(e) => match e {
                E::Domain(_) => "domain",
                E::InvalidPlan(_) => "invalid_plan",
                E::InvalidSample(_) => "invalid_sample",
                E::NonIdentifiable(_) => "non_identifiable",
                E::NoConvergence { .. } => "no_convergence",
                E::Singular(_) => "singular",
                E::Sampler(_) => "sampler",
                E::Diagnostic(_) => "diagnostic",
                E::Parse(_) | E::Csv(_) | E::Json(_) => "parse",
                E::Io(_) => "io",
            },
        }
    }

    /// 2 for bad invocations and unreadable input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "usage" | "input" | "parse" | "io" => 2,
            _ => 1,
        }
    }

    pub fn record(&self) -> String {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } }).to_string()
    }
}
