//! Pre-norm encoder-decoder forward pass with cached activations, and the
//! matching backward pass.

use ndarray::{Array1, Array2, Axis};
use rand::RngCore;

use super::layers::{
    attention, attention_backward, dropout, dropout_backward, feed_forward, feed_forward_backward,
    layer_norm, layer_norm_backward, linear, linear_backward, AttnCache, AttnMask, FfCache,
    NormCache,
};
use super::loss::log_softmax;
use super::{ModelError, ModelParams};
use crate::tokenizer::{TokenId, PAD};

struct EncoderCache {
    attn_norm: NormCache,
    attn: AttnCache,
    attn_drop: Option<Array2<f64>>,
    ff_norm: NormCache,
    ff: FfCache,
    ff_drop: Option<Array2<f64>>,
}

struct DecoderCache {
    self_norm: NormCache,
    self_attn: AttnCache,
    self_drop: Option<Array2<f64>>,
    cross_norm: NormCache,
    cross_attn: AttnCache,
    cross_drop: Option<Array2<f64>>,
    ff_norm: NormCache,
    ff: FfCache,
    ff_drop: Option<Array2<f64>>,
}

struct EncoderRun {
    embed_drop: Option<Array2<f64>>,
    layers: Vec<EncoderCache>,
    final_norm: NormCache,
    states: Array2<f64>,
}

struct DecoderRun {
    embed_drop: Option<Array2<f64>>,
    layers: Vec<DecoderCache>,
    final_norm: NormCache,
    states: Array2<f64>,
}

/// Everything needed to backpropagate one source/target pair.
pub struct ForwardPass {
    src: Vec<TokenId>,
    tgt: Vec<TokenId>,
    encoder: EncoderRun,
    decoder: DecoderRun,
    /// `target positions x vocab`.
    pub logits: Array2<f64>,
}

impl ForwardPass {
    /// Per-head attention probabilities, `queries x keys`.
    pub fn encoder_attention(&self, layer: usize) -> &[Array2<f64>] {
        &self.encoder.layers[layer].attn.probs
    }

    pub fn decoder_self_attention(&self, layer: usize) -> &[Array2<f64>] {
        &self.decoder.layers[layer].self_attn.probs
    }

    pub fn cross_attention(&self, layer: usize) -> &[Array2<f64>] {
        &self.decoder.layers[layer].cross_attn.probs
    }
}

/// Encoder output for incremental decoding.
#[derive(Debug, Clone)]
pub struct Encoded {
    states: Array2<f64>,
    key_valid: Vec<bool>,
}

fn check_ids(params: &ModelParams, ids: &[TokenId]) -> Result<(), ModelError> {
    let cfg = &params.config;
    if ids.len() > cfg.max_len {
        return Err(ModelError::SequenceTooLong {
            len: ids.len(),
            max: cfg.max_len,
        });
    }
    match ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        Some(&id) => Err(ModelError::TokenOutOfRange {
            id,
            vocab: cfg.vocab_size,
        }),
        None => Ok(()),
    }
}

fn embed(table: &Array2<f64>, positions: &Array2<f64>, ids: &[TokenId]) -> Array2<f64> {
    let scale = (table.ncols() as f64).sqrt();
    Array2::from_shape_fn((ids.len(), table.ncols()), |(i, j)| {
        table[[ids[i] as usize, j]] * scale + positions[[i, j]]
    })
}

fn embed_backward(grad_table: &mut Array2<f64>, ids: &[TokenId], dx: &Array2<f64>) {
    let scale = (grad_table.ncols() as f64).sqrt();
    for (i, &id) in ids.iter().enumerate() {
        grad_table
            .row_mut(id as usize)
            .scaled_add(scale, &dx.row(i));
    }
}

fn run_encoder(
    params: &ModelParams,
    src: &[TokenId],
    mut rng: Option<&mut (dyn RngCore + 'static)>,
) -> EncoderRun {
    let cfg = &params.config;
    let valid: Vec<bool> = src.iter().map(|&t| t != PAD).collect();
    let mask = AttnMask {
        key_valid: Some(&valid),
        causal: false,
    };
    let mut x = embed(&params.src_embed, &params.positions, src);
    let embed_drop = dropout(&mut x, cfg.dropout, rng.as_deref_mut());
    let mut layers = Vec::with_capacity(params.encoder.len());
    for layer in &params.encoder {
        let (h, attn_norm) = layer_norm(&layer.self_norm, &x);
        let (mut a, attn) = attention(&layer.self_attn, cfg.heads, &h, &h, mask);
        let attn_drop = dropout(&mut a, cfg.dropout, rng.as_deref_mut());
        x += &a;
        let (h, ff_norm) = layer_norm(&layer.ff_norm, &x);
        let (mut f, ff) = feed_forward(&layer.ff, &h);
        let ff_drop = dropout(&mut f, cfg.dropout, rng.as_deref_mut());
        x += &f;
        layers.push(EncoderCache {
            attn_norm,
            attn,
            attn_drop,
            ff_norm,
            ff,
            ff_drop,
        });
    }
    let (states, final_norm) = layer_norm(&params.encoder_norm, &x);
    EncoderRun {
        embed_drop,
        layers,
        final_norm,
        states,
    }
}

fn run_decoder(
    params: &ModelParams,
    memory: &Array2<f64>,
    memory_valid: &[bool],
    tgt: &[TokenId],
    mut rng: Option<&mut (dyn RngCore + 'static)>,
) -> DecoderRun {
    let cfg = &params.config;
    let valid: Vec<bool> = tgt.iter().map(|&t| t != PAD).collect();
    let self_mask = AttnMask {
        key_valid: Some(&valid),
        causal: true,
    };
    let cross_mask = AttnMask {
        key_valid: Some(memory_valid),
        causal: false,
    };
    let mut y = embed(&params.tgt_embed, &params.positions, tgt);
    let embed_drop = dropout(&mut y, cfg.dropout, rng.as_deref_mut());
    let mut layers = Vec::with_capacity(params.decoder.len());
    for layer in &params.decoder {
        let (h, self_norm) = layer_norm(&layer.self_norm, &y);
        let (mut a, self_attn) = attention(&layer.self_attn, cfg.heads, &h, &h, self_mask);
        let self_drop = dropout(&mut a, cfg.dropout, rng.as_deref_mut());
        y += &a;
        let (h, cross_norm) = layer_norm(&layer.cross_norm, &y);
        let (mut c, cross_attn) = attention(&layer.cross_attn, cfg.heads, &h, memory, cross_mask);
        let cross_drop = dropout(&mut c, cfg.dropout, rng.as_deref_mut());
        y += &c;
        let (h, ff_norm) = layer_norm(&layer.ff_norm, &y);
        let (mut f, ff) = feed_forward(&layer.ff, &h);
        let ff_drop = dropout(&mut f, cfg.dropout, rng.as_deref_mut());
        y += &f;
        layers.push(DecoderCache {
            self_norm,
            self_attn,
            self_drop,
            cross_norm,
            cross_attn,
            cross_drop,
            ff_norm,
            ff,
            ff_drop,
        });
    }
    let (states, final_norm) = layer_norm(&params.decoder_norm, &y);
    DecoderRun {
        embed_drop,
        layers,
        final_norm,
        states,
    }
}

/// Teacher-forced pass. `tgt` is the decoder input (starting with `<sos>`).
/// Dropout is active iff `rng` is given.
pub fn forward(
    params: &ModelParams,
    src: &[TokenId],
    tgt: &[TokenId],
    mut rng: Option<&mut (dyn RngCore + 'static)>,
) -> Result<ForwardPass, ModelError> {
    check_ids(params, src)?;
    check_ids(params, tgt)?;
    let encoder = run_encoder(params, src, rng.as_deref_mut());
    let valid: Vec<bool> = src.iter().map(|&t| t != PAD).collect();
    let decoder = run_decoder(params, &encoder.states, &valid, tgt, rng);
    let logits = linear(&params.output, &decoder.states.view());
    Ok(ForwardPass {
        src: src.to_vec(),
        tgt: tgt.to_vec(),
        encoder,
        decoder,
        logits,
    })
}

/// Accumulates `d loss / d params` into `grad` given `d loss / d logits`.
pub fn backward(
    params: &ModelParams,
    pass: &ForwardPass,
    dlogits: &Array2<f64>,
    grad: &mut ModelParams,
) {
    let dec = &pass.decoder;
    let d_states = linear_backward(
        &params.output,
        &dec.states.view(),
        dlogits,
        &mut grad.output,
    );
    let mut dy = layer_norm_backward(
        &params.decoder_norm,
        &dec.final_norm,
        &d_states,
        &mut grad.decoder_norm,
    );
    let mut d_memory = Array2::zeros(pass.encoder.states.raw_dim());
    for (i, cache) in dec.layers.iter().enumerate().rev() {
        let layer = &params.decoder[i];
        let g = &mut grad.decoder[i];

        let mut df = dy.clone();
        dropout_backward(&mut df, &cache.ff_drop);
        let dh = feed_forward_backward(&layer.ff, &cache.ff, &df, &mut g.ff);
        dy += &layer_norm_backward(&layer.ff_norm, &cache.ff_norm, &dh, &mut g.ff_norm);

        let mut dc = dy.clone();
        dropout_backward(&mut dc, &cache.cross_drop);
        let (dq, dkv) =
            attention_backward(&layer.cross_attn, &cache.cross_attn, &dc, &mut g.cross_attn);
        d_memory += &dkv;
        dy += &layer_norm_backward(&layer.cross_norm, &cache.cross_norm, &dq, &mut g.cross_norm);

        let mut da = dy.clone();
        dropout_backward(&mut da, &cache.self_drop);
        let (dq, dkv) =
            attention_backward(&layer.self_attn, &cache.self_attn, &da, &mut g.self_attn);
        let dh = dq + dkv;
        dy += &layer_norm_backward(&layer.self_norm, &cache.self_norm, &dh, &mut g.self_norm);
    }
    dropout_backward(&mut dy, &dec.embed_drop);
    embed_backward(&mut grad.tgt_embed, &pass.tgt, &dy);

    let enc = &pass.encoder;
    let mut dx = layer_norm_backward(
        &params.encoder_norm,
        &enc.final_norm,
        &d_memory,
        &mut grad.encoder_norm,
    );
    for (i, cache) in enc.layers.iter().enumerate().rev() {
        let layer = &params.encoder[i];
        let g = &mut grad.encoder[i];

        let mut df = dx.clone();
        dropout_backward(&mut df, &cache.ff_drop);
        let dh = feed_forward_backward(&layer.ff, &cache.ff, &df, &mut g.ff);
        dx += &layer_norm_backward(&layer.ff_norm, &cache.ff_norm, &dh, &mut g.ff_norm);

        let mut da = dx.clone();
        dropout_backward(&mut da, &cache.attn_drop);
        let (dq, dkv) = attention_backward(&layer.self_attn, &cache.attn, &da, &mut g.self_attn);
        let dh = dq + dkv;
        dx += &layer_norm_backward(&layer.self_norm, &cache.attn_norm, &dh, &mut g.self_norm);
    }
    dropout_backward(&mut dx, &enc.embed_drop);
    embed_backward(&mut grad.src_embed, &pass.src, &dx);
}

/// Eval-mode encoder pass.
pub fn encode(params: &ModelParams, src: &[TokenId]) -> Result<Encoded, ModelError> {
    check_ids(params, src)?;
    let run = run_encoder(params, src, None);
    Ok(Encoded {
        states: run.states,
        key_valid: src.iter().map(|&t| t != PAD).collect(),
    })
}

/// Log-probabilities of the token following `prefix` (which starts with
/// `<sos>`), in eval mode.
pub fn next_log_probs(
    params: &ModelParams,
    encoded: &Encoded,
    prefix: &[TokenId],
) -> Result<Array1<f64>, ModelError> {
    check_ids(params, prefix)?;
    let run = run_decoder(params, &encoded.states, &encoded.key_valid, prefix, None);
    let last = run
        .states
        .index_axis(Axis(0), prefix.len() - 1)
        .insert_axis(Axis(0));
    let logits = linear(&params.output, &last);
    Ok(log_softmax(&logits).index_axis_move(Axis(0), 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{label_smoothed_loss, ModelConfig};
    use crate::tokenizer::SOS;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(dropout: f64) -> ModelParams {
        let cfg = ModelConfig {
            enc_layers: 2,
            dec_layers: 2,
            heads: 2,
            model_dim: 8,
            ff_dim: 12,
            dropout,
            max_len: 12,
            vocab_size: 11,
            seed: 3,
        };
        let mut p = ModelParams::init(&cfg).unwrap();
        p.jitter(&mut ChaCha8Rng::seed_from_u64(99), 0.1);
        p
    }

    #[test]
    fn attention_rows_are_distributions() {
        let p = tiny(0.0);
        let pass = forward(&p, &[5, 6, 7, PAD], &[SOS, 4, 9], None).unwrap();
        for l in 0..2 {
            for maps in [
                pass.encoder_attention(l),
                pass.decoder_self_attention(l),
                pass.cross_attention(l),
            ] {
                for m in maps {
                    for row in m.rows() {
                        assert!((row.sum() - 1.0).abs() < 1e-12);
                    }
                }
            }
            for m in pass.cross_attention(l) {
                assert!(m.column(3).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn decoder_is_causal() {
        let p = tiny(0.0);
        let a = forward(&p, &[5, 6, 7], &[SOS, 4, 9, 10], None).unwrap();
        let b = forward(&p, &[5, 6, 7], &[SOS, 4, 8, 5], None).unwrap();
        for i in 0..2 {
            for j in 0..p.config.vocab_size {
                assert!((a.logits[[i, j]] - b.logits[[i, j]]).abs() < 1e-12);
            }
        }
        assert!((a.logits[[2, 0]] - b.logits[[2, 0]]).abs() > 1e-9);
    }

    #[test]
    fn source_padding_is_invisible() {
        let mut p = tiny(0.0);
        let plain = forward(&p, &[5, 6, 7], &[SOS, 4, 9], None).unwrap();
        let padded = forward(&p, &[5, 6, 7, PAD, PAD], &[SOS, 4, 9], None).unwrap();
        p.src_embed.row_mut(PAD as usize).fill(3.0);
        let perturbed = forward(&p, &[5, 6, 7, PAD, PAD], &[SOS, 4, 9], None).unwrap();
        for other in [&padded.logits, &perturbed.logits] {
            let diff = (&plain.logits - other)
                .mapv(f64::abs)
                .fold(0.0f64, |m, &v| m.max(v));
            assert!(diff < 1e-12, "{diff}");
        }
    }

    #[test]
    fn eval_mode_is_deterministic() {
        let p = tiny(0.3);
        let a = forward(&p, &[5, 6], &[SOS, 4], None).unwrap();
        let b = forward(&p, &[5, 6], &[SOS, 4], None).unwrap();
        assert_eq!(a.logits, b.logits);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = forward(&p, &[5, 6], &[SOS, 4], Some(&mut rng)).unwrap();
        assert_ne!(a.logits, c.logits);
    }

    #[test]
    fn incremental_matches_teacher_forcing() {
        let p = tiny(0.0);
        let src = [5, 6, 7];
        let tgt = [SOS, 4, 9];
        let pass = forward(&p, &src, &tgt, None).unwrap();
        let full = log_softmax(&pass.logits);
        let enc = encode(&p, &src).unwrap();
        for t in 1..=tgt.len() {
            let step = next_log_probs(&p, &enc, &tgt[..t]).unwrap();
            for j in 0..p.config.vocab_size {
                assert!((step[j] - full[[t - 1, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_long_and_out_of_range() {
        let p = tiny(0.0);
        assert!(matches!(
            forward(&p, &[5; 13], &[SOS], None),
            Err(ModelError::SequenceTooLong { len: 13, max: 12 })
        ));
        assert!(matches!(
            forward(&p, &[5], &[SOS, 11], None),
            Err(ModelError::TokenOutOfRange { id: 11, .. })
        ));
    }

    #[test]
    fn zero_output_weights_block_upstream_gradient() {
        let mut p = tiny(0.0);
        p.output.weight.fill(0.0);
        let pass = forward(&p, &[5, 6], &[SOS, 4], None).unwrap();
        let loss = label_smoothed_loss(&pass.logits, &[4, 3], 0.1);
        let mut g = p.zeros_like();
        backward(&p, &pass, &loss.grad, &mut g);
        g.for_each_tensor(|name, t| {
            if !name.starts_with("output") {
                assert!(t.iter().all(|&v| v == 0.0), "{name}");
            }
        });
        assert!(g.output.bias.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn gradient_is_linear_in_upstream() {
        let p = tiny(0.0);
        let pass = forward(&p, &[5, 6], &[SOS, 4], None).unwrap();
        let loss = label_smoothed_loss(&pass.logits, &[4, 3], 0.1);
        let mut g1 = p.zeros_like();
        backward(&p, &pass, &loss.grad, &mut g1);
        let mut g2 = p.zeros_like();
        backward(&p, &pass, &(&loss.grad * 2.0), &mut g2);
        g1.scale(2.0);
        g2.zip_mut(&g1, |a, b| {
            assert!((&*a - b).iter().all(|d| d.abs() < 1e-12))
        });
    }
}
