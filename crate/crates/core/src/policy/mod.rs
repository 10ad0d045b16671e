//! Attention-based dispatch policy trained with PPO.
//!
//! The encoder embeds failed components with self-attention (no positional
//! encoding, so embeddings are permutation-equivariant). A decoder embeds
//! crews, attends to the components of its own cluster and scores every
//! (crew, component) pair; plans are built one assignment at a time.

mod attention;
mod autodiff;
mod checkpoint;
mod decode;
mod features;
mod model;
mod ppo;
mod tensor;

pub use attention::{attention, attention_weights, multi_head_attention, multi_head_weights, AttentionParams};
pub use autodiff::{Graph, Var};
pub use checkpoint::{checkpoint_from_json, checkpoint_to_json, load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT};
pub use decode::{decode_plan, encode, policy_dispatch, DecodeMode, DecodeOutcome, PolicyOutcome};
pub use features::{
    featurize, FeatureStats, FeatureVector, COMPONENT_FEATURES, CREW_FEATURES, GLOBAL_FEATURES, PAIR_FEATURES,
};
pub use model::{ModelConfig, ParamSet, PolicyModel, TrainingMeta};
pub use ppo::{
    batch_targets, clip_grad_norm, collect_episode, divergence, gae, ppo_loss, ppo_train, ppo_train_on,
    surrogate_terms, Adam, EpisodeBuffer, InstanceSource, LossBreakdown, PpoConfig, SurrogateTerm, Targets,
    TrainingTrace,
};
pub use tensor::Matrix;

use crate::dispatch::DispatchError;

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid policy configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("episode buffer: {0}")]
    Buffer(String),
    #[error("decoder chose invalid action {action} at step {step}")]
    InvalidAction { step: usize, action: usize },
    #[error("training diverged at iteration {iteration}: mean reward fell by {drop}")]
    Diverged { iteration: usize, drop: f64 },
    #[error("non-finite loss or gradient at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
}
