//! Re-identification evaluation: kNN, K-Means, partition-agreement metrics,
//! cross-validation fold plans and PCA projection.

mod folds;
mod hungarian;
mod kmeans;
mod knn;
mod metrics;
mod pca;
mod protocol;

use thiserror::Error;

pub use folds::{make_fold_plan, Fold, FoldMode, FoldPlan};
pub use hungarian::{hungarian_assign, Assignment, AssignmentError};
pub use kmeans::{kmeans, KMeansConfig, KMeansResult};
pub use knn::{cosine_distance, knn_classify, knn_predict, KnnOutcome};
pub use metrics::{ami, ari, contingency, hungarian_accuracy, nmi, Partition};
pub use pca::{pca_project_2d, Projection};
pub use protocol::{mean_std, run_protocol, ClusteringReport, FoldResult, MetricSet, ProtocolConfig};

#[derive(Debug, Error)]
pub enum ReidError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 items, got {0}")]
    TooFewItems(usize),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error("empty gallery")]
    EmptyGallery,
    #[error("k = {k} is invalid for {n} items")]
    InvalidK { k: usize, n: usize },
    #[error("invalid fold plan: {0}")]
    FoldPlan(String),
    #[error(transparent)]
    Embed(#[from] crate::embedder::EmbedError),
    #[error("fold {fold}: {message}")]
    DegenerateFold { fold: String, message: String },
}
