use sha2::{Digest, Sha256};

use super::ModelError;

/// Transformer architecture. `Default` is the 6+6 layer, 4-head shape with
/// dropout 0.1; dimensions are sized for desk-scale runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub heads: usize,
    pub model_dim: usize,
    pub ff_dim: usize,
    pub dropout: f64,
    pub max_len: usize,
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            enc_layers: 6,
            dec_layers: 6,
            heads: 4,
            model_dim: 256,
            ff_dim: 1024,
            dropout: 0.1,
            max_len: 256,
            vocab_size: 1000,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidConfig(msg.to_string()));
        if self.enc_layers == 0 || self.dec_layers == 0 {
            return bad("layer counts must be at least 1");
        }
        if self.heads == 0 || self.model_dim == 0 || self.ff_dim == 0 {
            return bad("heads, model_dim and ff_dim must be at least 1");
        }
        if !self.model_dim.is_multiple_of(self.heads) {
            return bad("model_dim must be divisible by heads");
        }
        if self.max_len == 0 || self.vocab_size == 0 {
            return bad("max_len and vocab_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.heads
    }

    /// Digest over every architectural field; the seed is excluded so that
    /// checkpoints from different initializations remain comparable.
    pub fn hash(&self) -> [u8; 32] {
        let canonical = format!(
            "enc_layers={};dec_layers={};heads={};model_dim={};ff_dim={};dropout={:?};max_len={};vocab_size={}",
            self.enc_layers,
            self.dec_layers,
            self.heads,
            self.model_dim,
            self.ff_dim,
            self.dropout,
            self.max_len,
            self.vocab_size
        );
        Sha256::digest(canonical.as_bytes()).into()
    }
}

/// Optimization recipe. `Default` follows the reference training setup:
/// 8000 warmup steps, batches of 96, 250 epochs, 5-best averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub warmup_steps: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub label_smoothing: f64,
    pub avg_top_k: usize,
    pub peak_scale: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            warmup_steps: 8000,
            batch_size: 96,
            epochs: 250,
            label_smoothing: 0.1,
            avg_top_k: 5,
            peak_scale: 1.0,
            clip_norm: Some(5.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidConfig(msg.to_string()));
        if self.warmup_steps == 0 {
            return bad("warmup_steps must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.avg_top_k == 0 {
            return bad("avg_top_k must be at least 1");
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return bad("label_smoothing must lie in [0, 1)");
        }
        if self.peak_scale <= 0.0 || !self.peak_scale.is_finite() {
            return bad("peak_scale must be positive");
        }
        Ok(())
    }
}
