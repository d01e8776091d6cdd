//! Contrastive encoder: fixed patch features, a two-layer MLP producing
//! unit-norm embeddings, NT-Xent loss with analytic gradients, augmentation,
//! timestamp-instanced batches and a momentum-SGD training loop.

mod augment;
mod batch;
mod checkpoint;
mod features;
mod loss;
mod model;
mod train;

use std::path::PathBuf;

use thiserror::Error;

pub use augment::{augment, hflip, AugmentConfig};
pub use batch::{timestamp_batch, Batch, TimestampSchedule};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use features::extract_features;
pub use loss::{anchor_loss, mean_gradient, ntxent_grad, ntxent_loss, Gradients};
pub use model::{embed_samples, Activation, EmbedderConfig, EmbedderModel, EmbeddingSet};
pub use train::{train, write_losses_csv, TrainConfig, TrainOutcome, Trainer};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("sample is {actual:?}, expected {expected}x{expected}")]
    WrongResolution { expected: u32, actual: (u32, u32) },
    #[error("feature vector has length {actual}, model expects {expected}")]
    FeatureLength { expected: usize, actual: usize },
    #[error("non-finite model parameter")]
    NonFiniteParameter,
    #[error("non-finite input feature")]
    NonFiniteInput,
    #[error("embedding pre-activation has zero norm")]
    ZeroNorm,
    #[error("NT-Xent needs at least 2 positive pairs, got {0}")]
    TooFewPairs(usize),
    #[error("embedding count {0} is odd; rows must come in positive pairs")]
    OddBatch(usize),
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
    #[error("loss diverged (non-finite) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("no timestamp has at least 2 samples")]
    NoTimestampBatch,
    #[error("identity {identity} appears twice in the batch for one timestamp")]
    DuplicateIdentityInBatch { identity: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
