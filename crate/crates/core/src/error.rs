use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("dataset not found at {path}; {hint}")]
    DataMissing { path: PathBuf, hint: String },

    #[error("dataset verification failed for {path}: {reason}")]
    Verify { path: PathBuf, reason: String },

    #[error("empty dataset after {stage}")]
    EmptyDataset { stage: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("fold error: {0}")]
    Fold(String),

    #[error("{algorithm} fit failed: {message}")]
    Fit { algorithm: String, message: String },

    #[error("grid search failed: {0}")]
    Search(String),

    #[error("ROC-AUC undefined: truth labels contain a single class")]
    UndefinedAuc,

    #[error("scenario comparison is missing rows: {}", missing.join(", "))]
    Comparison { missing: Vec<String> },

    #[error("model serialization: {0}")]
    Model(String),

    #[error("stage '{stage}': {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv { path: path.into(), source }
    }

    pub(crate) fn fit(algorithm: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Fit { algorithm: algorithm.into(), message: message.into() }
    }

    /// Wraps the error with the pipeline stage it surfaced from.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage { stage: stage.into(), source: Box::new(self) }
    }

    /// Process exit code: 1 config, 2 data, 3 pipeline.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Io { .. }
            | Error::Csv { .. }
            | Error::DataMissing { .. }
            | Error::Verify { .. } => 2,
            Error::Stage { stage, source } => match source.exit_code() {
                3 if stage == "ingest" => 2,
                code => code,
            },
            _ => 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_categories() {
        assert_eq!(Error::Config("x".into()).exit_code(), 1);
        let missing = Error::DataMissing { path: "a".into(), hint: "h".into() };
        assert_eq!(missing.exit_code(), 2);
        assert_eq!(Error::Search("x".into()).exit_code(), 3);
        let empty = Error::EmptyDataset { stage: "load".into() };
        assert_eq!(empty.in_stage("ingest").exit_code(), 2);
        let empty = Error::EmptyDataset { stage: "zscore".into() };
        assert_eq!(empty.in_stage("preprocess").exit_code(), 3);
    }

    #[test]
    fn stage_provenance_is_in_message() {
        let err = Error::EmptyDataset { stage: "z-score filter".into() }.in_stage("preprocess");
        assert_eq!(err.to_string(), "stage 'preprocess': empty dataset after z-score filter");
    }
}
