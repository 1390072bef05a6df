use biaslens_core::cda::CdaError;
use biaslens_core::debias::DebiasError;
use biaslens_core::disco::DiscoError;
use biaslens_core::gateway::GatewayError;
use biaslens_core::mbe::MbeError;
use biaslens_core::report::ReportError;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Disco(#[from] DiscoError),
    #[error(transparent)]
    Mbe(#[from] MbeError),
    #[error(transparent)]
    Cda(#[from] CdaError),
    #[error(transparent)]
    Debias(#[from] DebiasError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("serializing output: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{failed} of {total} conformance checks failed")]
    Conformance { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Gateway(_) => "gateway",
            CliError::Disco(_) => "disco",
            CliError::Mbe(_) => "mbe",
            CliError::Cda(_) => "cda",
            CliError::Debias(_) => "debias",
            CliError::Report(_) => "report",
            CliError::Json(_) => "serialize",
            CliError::Conformance { .. } => "conformance",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Gateway(_) => 10,
            CliError::Disco(_) => 11,
            CliError::Mbe(_) => 12,
            CliError::Cda(_) => 13,
            CliError::Debias(_) => 14,
            CliError::Report(_) => 15,
            CliError::Json(_) => 16,
            CliError::Conformance { .. } => 20,
        }
    }

    /// Single-line JSON for the error stream.
    pub fn diagnostic(&self) -> String {
        json!({
            "error": self.kind(),
            "code": self.exit_code(),
            "message": self.to_string().replace('\n', " "),
        })
        .to_string()
    }
}
