//! Classification with reject option by data replication.
//!
//! The reduction turns a K-class ordinal problem with reject regions into a
//! single cost-weighted binary problem: every sample is replicated `2(K-1)`
//! times into an extended feature space, each replica carrying its own binary
//! label and misclassification cost. One standard binary classifier trained on
//! the replicated set then induces `2(K-1)` parallel (SVM) or nested (MLP)
//! boundaries in the original space, with the reject region for "between class
//! j and j+1" delimited by boundaries `2j-1` and `2j`.
//!
//! The crate provides:
//!
//! * [`dataset`] — dataset container, CSV ingestion, seeded splitting;
//! * [`synthetic`] — the four seeded benchmark generators;
//! * [`replication`] — the extended-space embedding, per-replica labels and
//!   costs, and the count-rule decoder;
//! * [`svm`] — a per-sample cost-weighted kernel SVM trained by SMO;
//! * [`mlp`] — a partially-linear network trained on cost-weighted logistic
//!   loss;
//! * [`model`] — trained reject models and prediction;
//! * [`baselines`] — single classifier with rejection band, and independently
//!   trained classifier pairs;
//! * [`evaluation`] — empirical risk, Accuracy-Reject curves, cross-validated
//!   grid search, the repeated-split experiment protocol;
//! * [`serialize`] — the versioned flat-text model format.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod kernel;
pub mod mlp;
pub mod model;
pub mod replication;
pub mod rng;
pub mod serialize;
pub mod svm;
pub mod synthetic;

pub use dataset::{LabeledDataset, SplitSpec};
pub use error::{Error, Result};
pub use evaluation::{ARPoint, ExperimentConfig, Method};
pub use kernel::KernelSpec;
pub use mlp::MlpModel;
pub use model::{RejectModel, TrainedModel};
pub use replication::{CostScheme, Decision, Prediction, ReplicaLabel, ReplicatedDataset};
pub use svm::SvmModel;
