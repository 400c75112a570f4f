//! Encoder-decoder transformer with hand-written backpropagation, the
//! optimization loop, and the checkpoint store.

mod checkpoint;
mod config;
mod layers;
mod loss;
mod optim;
mod params;
mod schedule;
mod train;
mod transformer;

pub use checkpoint::{average_checkpoints, Checkpoint};
pub use config::{ModelConfig, TrainConfig};
pub use loss::{label_smoothed_loss, log_softmax, TokenLoss};
pub use optim::{clip_global_norm, Adam};
pub use params::{
    embedding_init_std, sinusoidal_positions, Attention, DecoderLayer, EncoderLayer, FeedForward,
    LayerNorm, Linear, ModelParams,
};
pub use schedule::noam_lr;
pub use train::{batch_loss_and_grad, eval_loss, train, Example, TrainLogRow, TrainOutcome};
pub use transformer::{backward, encode, forward, next_log_probs, Encoded, ForwardPass};

use std::path::PathBuf;

use thiserror::Error;

use crate::tokenizer::TokenId;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("sequence of length {len} exceeds max_len {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("token id {id} outside vocabulary of size {vocab}")]
    TokenOutOfRange { id: TokenId, vocab: usize },
    #[error("non-finite loss or gradient at step {step}")]
    NonFinite { step: usize },
    #[error("checkpoint config hashes differ")]
    ConfigMismatch,
    #[error("need at least {needed} checkpoints, got {got}")]
    NotEnoughCheckpoints { needed: usize, got: usize },
    #[error("training and dev sets must be non-empty")]
    EmptyTrainingSet,
    #[error("checkpoint {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
