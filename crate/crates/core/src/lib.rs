pub mod classifiers;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod metrics;
pub mod model_select;
pub mod preprocess;
pub mod scalar;
pub mod table;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use table::{ColumnarTable, ATTACK, BENIGN};

/// Double-precision aliases for the common case.
pub type Table = ColumnarTable<f64>;
pub type Model = classifiers::TrainedModel<f64>;
pub type Artifact = classifiers::ModelArtifact<f64>;
pub type Preprocessed = preprocess::Preprocessed<f64>;
pub type RunOutput = harness::RunOutput<f64>;
