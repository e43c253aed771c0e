//! Harness-level error type and the CLI exit-code mapping.

use std::path::PathBuf;

/// Process exit codes (stable contract): 0 clean, 2 validation error,
/// 3 findings filed, 4 webhook failure, 5 measurement failure; 1 for other
/// operational errors.
pub mod exit_code {
    pub const CLEAN: i32 = 0;
    pub const OPERATIONAL: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const FINDINGS: i32 = 3;
    pub const WEBHOOK: i32 = 4;
    pub const MEASUREMENT: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("validation: {0}")]
    Validation(String),

    #[error("parse: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("launch failure: {0}")]
    Launch(String),

    #[error("workload hit OOM at batch size {batch_size}")]
    Oom { batch_size: u32 },

    #[error("measurement failure: {0}")]
    Measurement(String),

    #[error("webhook: {0}")]
    Webhook(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) | HarnessError::Parse(_) => exit_code::VALIDATION,
            HarnessError::Oom { .. } | HarnessError::Measurement(_) => exit_code::MEASUREMENT,
            HarnessError::Webhook(_) => exit_code::WEBHOOK,
            HarnessError::Io { .. } | HarnessError::Launch(_) => exit_code::OPERATIONAL,
        }
    }
}

impl From<benchwatch_core::workload::WorkloadError> for HarnessError {
    fn from(e: benchwatch_core::workload::WorkloadError) -> Self {
        HarnessError::Validation(e.to_string())
    }
}

impl From<benchwatch_core::measure::MeasureError> for HarnessError {
    fn from(e: benchwatch_core::measure::MeasureError) -> Self {
        use benchwatch_core::measure::MeasureError;
        match e {
            MeasureError::OomEncountered
            | MeasureError::TooManyFailures { .. }
            | MeasureError::TooFewSurvivors { .. }
            | MeasureError::NoFeasibleBatch
            | MeasureError::AllProbesFailed => HarnessError::Measurement(e.to_string()),
            other => HarnessError::Validation(other.to_string()),
        }
    }
}

impl From<benchwatch_core::analytics::AnalyticsError> for HarnessError {
    fn from(e: benchwatch_core::analytics::AnalyticsError) -> Self {
        HarnessError::Validation(e.to_string())
    }
}

impl From<benchwatch_core::regression::RegressionError> for HarnessError {
    fn from(e: benchwatch_core::regression::RegressionError) -> Self {
        HarnessError::Validation(e.to_string())
    }
}

impl From<benchwatch_core::trace::TraceError> for HarnessError {
    fn from(e: benchwatch_core::trace::TraceError) -> Self {
        HarnessError::Validation(e.to_string())
    }
}

impl From<benchwatch_core::synth::SynthesisError> for HarnessError {
    fn from(e: benchwatch_core::synth::SynthesisError) -> Self {
        HarnessError::Validation(e.to_string())
    }
}
