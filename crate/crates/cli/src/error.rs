use serde_json::json;
use steerlab::assemblage::Violation;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Invalid(Vec<Violation>),
    Library(steerlab::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Library(steerlab::Error::SolverFailure(_)) => 3,
            _ => 2,
        }
    }

    /// One-line JSON diagnostic for stderr.
    pub fn diagnostic(&self) -> String {
        let v = match self {
            CliError::Config(msg) => json!({ "error": "config", "message": msg }),
            CliError::Invalid(violations) => json!({
                "error": "validation",
                "message": violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
                "violations": violations,
            }),
            CliError::Library(e) => json!({ "error": kind(e), "message": e.to_string() }),
            CliError::Io(e) => json!({ "error": "io", "message": e.to_string() }),
        };
        v.to_string()
    }
}

fn kind(e: &steerlab::Error) -> &'static str {
    use steerlab::Error::*;
    match e {
        Domain(_) => "domain",
        SolverFailure(_) => "solver",
        InsufficientCounts(_) => "insufficient-counts",
        Format(_) => "format",
        ZeroProbabilityBranch { .. } => "zero-probability-branch",
        InvalidMeasurement(_) => "invalid-measurement",
        InvalidFilter(_) => "invalid-filter",
        _ => "invalid",
    }
}

impl From<steerlab::Error> for CliError {
    fn from(e: steerlab::Error) -> Self {
        CliError::Library(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
