use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    backward, clip_global_norm, forward, label_smoothed_loss, noam_lr, Adam, Checkpoint,
    ModelConfig, ModelError, ModelParams, TrainConfig,
};
use crate::tokenizer::{BpeVocab, TokenId, EOS, SOS};

/// One training pair in token space. `source` already ends with `<eos>`;
/// `target` carries neither `<sos>` nor `<eos>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub source: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

impl Example {
    pub fn from_text(vocab: &BpeVocab, source: &str, target: &str) -> Self {
        let mut src = vocab.encode(source);
        src.push(EOS);
        Self {
            source: src,
            target: vocab.encode(target),
        }
    }

    /// `<sos> target`.
    pub fn decoder_input(&self) -> Vec<TokenId> {
        std::iter::once(SOS)
            .chain(self.target.iter().copied())
            .collect()
    }

    /// `target <eos>`.
    pub fn decoder_gold(&self) -> Vec<TokenId> {
        self.target
            .iter()
            .copied()
            .chain(std::iter::once(EOS))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub step: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub lr: f64,
}

impl TrainLogRow {
    pub const CSV_HEADER: &'static str = "epoch,step,train_loss,dev_loss,lr";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6e}",
            self.epoch, self.step, self.train_loss, self.dev_loss, self.lr
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// One per epoch, starting with the initialization at epoch 0.
    pub checkpoints: Vec<Checkpoint>,
    pub log: Vec<TrainLogRow>,
}

impl TrainOutcome {
    pub fn log_csv(&self) -> String {
        let mut out = String::from(TrainLogRow::CSV_HEADER);
        out.push('\n');
        for row in &self.log {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
        out
    }
}

/// Token-mean smoothed loss over `batch` and its gradient. Dropout is
/// active iff `rng` is given.
pub fn batch_loss_and_grad(
    params: &ModelParams,
    batch: &[&Example],
    epsilon: f64,
    mut rng: Option<&mut (dyn RngCore + 'static)>,
) -> Result<(f64, ModelParams), ModelError> {
    let mut grad = params.zeros_like();
    let mut total = 0.0;
    let mut tokens = 0;
    for ex in batch {
        let pass = forward(params, &ex.source, &ex.decoder_input(), rng.as_deref_mut())?;
        let loss = label_smoothed_loss(&pass.logits, &ex.decoder_gold(), epsilon);
        total += loss.total;
        tokens += loss.tokens;
        backward(params, &pass, &loss.grad, &mut grad);
    }
    let denom = tokens.max(1) as f64;
    grad.scale(1.0 / denom);
    Ok((total / denom, grad))
}

/// Eval-mode token-mean smoothed loss.
pub fn eval_loss(
    params: &ModelParams,
    examples: &[Example],
    epsilon: f64,
) -> Result<f64, ModelError> {
    let mut total = 0.0;
    let mut tokens = 0;
    for ex in examples {
        let pass = forward(params, &ex.source, &ex.decoder_input(), None)?;
        let loss = label_smoothed_loss(&pass.logits, &ex.decoder_gold(), epsilon);
        total += loss.total;
        tokens += loss.tokens;
    }
    Ok(total / tokens.max(1) as f64)
}

/// Adam under the Noam schedule, one checkpoint per epoch. Batch order and
/// dropout masks are drawn from a generator seeded by `mcfg.seed`.
pub fn train(
    train_set: &[Example],
    dev_set: &[Example],
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    tcfg.validate()?;
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let mut params = ModelParams::init(mcfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mcfg.seed ^ 0x005e_ed0f_ba7c);
    let mut adam = Adam::new(&params);
    let eps = tcfg.label_smoothing;
    let dev0 = eval_loss(&params, dev_set, eps)?;
    let train0 = eval_loss(&params, train_set, eps)?;
    let mut log = vec![TrainLogRow {
        epoch: 0,
        step: 0,
        train_loss: train0,
        dev_loss: dev0,
        lr: 0.0,
    }];
    let mut checkpoints = vec![Checkpoint::new(params.clone(), 0, 0, dev0)];
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut step = 0;
    let mut lr = 0.0;
    for epoch in 1..=tcfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(tcfg.batch_size) {
            step += 1;
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, mut grad) = batch_loss_and_grad(&params, &batch, eps, Some(&mut rng))?;
            if !loss.is_finite() || !grad.is_finite() {
                return Err(ModelError::NonFinite { step });
            }
            if let Some(max) = tcfg.clip_norm {
                clip_global_norm(&mut grad, max);
            }
            lr = noam_lr(step, mcfg.model_dim, tcfg.warmup_steps, tcfg.peak_scale);
            adam.step(&mut params, &grad, lr);
            if !params.is_finite() {
                return Err(ModelError::NonFinite { step });
            }
            epoch_loss += loss;
            batches += 1;
        }
        let dev_loss = eval_loss(&params, dev_set, eps)?;
        let train_loss = epoch_loss / batches as f64;
        log::info!("epoch {epoch} step {step} train {train_loss:.4} dev {dev_loss:.4} lr {lr:.3e}");
        log.push(TrainLogRow {
            epoch,
            step,
            train_loss,
            dev_loss,
            lr,
        });
        checkpoints.push(Checkpoint::new(params.clone(), epoch, step, dev_loss));
    }
    Ok(TrainOutcome { checkpoints, log })
}
