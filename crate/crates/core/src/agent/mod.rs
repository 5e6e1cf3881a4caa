//! Trust-region policy optimization with a Gaussian MLP policy, a linear
//! value baseline and generalized advantage estimation.

pub mod baseline;
pub mod checkpoint;
pub mod gae;
pub mod optim;
pub mod policy;
pub mod sampler;
pub mod trainer;
pub mod trpo;

use thiserror::Error;

use crate::env::EnvError;

pub use baseline::LinearBaseline;
pub use gae::{compute_gae, discount_cumsum, gae_path};
pub use optim::conjugate_gradient;
pub use policy::{log_prob_grad, GaussianPolicy, PolicyArch, DEFAULT_HIDDEN};
pub use sampler::{collect_batch, rollout, Path, TrajectoryBatch};
pub use trainer::{DiagnosticsLog, IterationDiagnostics, Trainer};
pub use trpo::{
    fisher_vector_product, kl_grad, mean_kl, surrogate, surrogate_grad, trpo_update, OldDist, TrpoConfig, UpdateStatus,
};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("input has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
