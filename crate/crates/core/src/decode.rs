//! Greedy and beam-search generation with length normalization.

use std::cmp::Ordering;
use std::collections::HashMap;

use thiserror::Error;

use crate::corpus::{ParallelCorpus, UtteranceId};
use crate::emotion::{inject_token, EmotionError, EmotionToken};
use crate::model::{encode, next_log_probs, ModelError, ModelParams};
use crate::tokenizer::{BpeVocab, TokenId, TokenizerError, EOS, PAD, SOS};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("source of {len} tokens exceeds max_len {max}")]
    SourceTooLong { len: usize, max: usize },
    #[error("no emotion token for utterance {0}")]
    MissingToken(UtteranceId),
    #[error("invalid beam configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Emotion(#[from] EmotionError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamConfig {
    pub beam_size: usize,
    /// Maximum generated tokens, `<eos>` included.
    pub max_len: usize,
    /// Exponent `alpha` in `log_prob / len^alpha`.
    pub length_penalty: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            beam_size: 4,
            max_len: 100,
            length_penalty: 0.6,
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.beam_size == 0 {
            return Err(DecodeError::InvalidConfig(
                "beam_size must be at least 1".into(),
            ));
        }
        if self.max_len == 0 {
            return Err(DecodeError::InvalidConfig(
                "max_len must be at least 1".into(),
            ));
        }
        if !(self.length_penalty >= 0.0 && self.length_penalty.is_finite()) {
            return Err(DecodeError::InvalidConfig(
                "length_penalty must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Starts with `<sos>`; ends with `<eos>` unless cut at `max_len`.
    pub ids: Vec<TokenId>,
    /// `log_prob / generated_len^alpha`.
    pub score: f64,
    /// Sum of token log-probabilities.
    pub log_prob: f64,
}

impl Hypothesis {
    fn new(ids: Vec<TokenId>, log_prob: f64, alpha: f64) -> Self {
        let generated = (ids.len() - 1).max(1) as f64;
        Self {
            score: log_prob / generated.powf(alpha),
            ids,
            log_prob,
        }
    }

    /// Tokens between `<sos>` and the terminal `<eos>`.
    pub fn content(&self) -> &[TokenId] {
        let body = &self.ids[1..];
        body.strip_suffix(&[EOS]).unwrap_or(body)
    }
}

/// Best first: higher score, then shorter, then lexicographically smaller.
fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.ids.len().cmp(&b.ids.len()))
        .then_with(|| a.ids.cmp(&b.ids))
}

fn check_source(params: &ModelParams, source: &[TokenId]) -> Result<(), DecodeError> {
    if source.len() > params.config.max_len {
        return Err(DecodeError::SourceTooLong {
            len: source.len(),
            max: params.config.max_len,
        });
    }
    Ok(())
}

/// Generated length is also capped by the model's position table.
fn step_limit(params: &ModelParams, cfg: &BeamConfig) -> usize {
    cfg.max_len.min(params.config.max_len)
}

/// Step-by-step argmax over generable tokens; the lowest ID wins ties.
pub fn greedy(
    params: &ModelParams,
    source: &[TokenId],
    cfg: &BeamConfig,
) -> Result<Hypothesis, DecodeError> {
    cfg.validate()?;
    check_source(params, source)?;
    let encoded = encode(params, source)?;
    let mut ids = vec![SOS];
    let mut log_prob = 0.0;
    for _ in 0..step_limit(params, cfg) {
        let lp = next_log_probs(params, &encoded, &ids)?;
        let mut best = EOS as usize;
        for (tok, &v) in lp.iter().enumerate() {
            let generable = tok != PAD as usize && tok != SOS as usize;
            if generable && (v > lp[best] || (v == lp[best] && tok < best)) {
                best = tok;
            }
        }
        log_prob += lp[best];
        ids.push(best as TokenId);
        if best as TokenId == EOS {
            break;
        }
    }
    Ok(Hypothesis::new(ids, log_prob, cfg.length_penalty))
}

/// Beam search. At each step the `beam_size` best expansions (by raw
/// log-probability) are kept; those ending in `<eos>` are set aside as
/// finished. Search stops once no live hypothesis can reach the best
/// finished score, or at `max_len`, where live hypotheses are finished as-is.
/// `<pad>` and `<sos>` are never generated.
pub fn beam_search(
    params: &ModelParams,
    source: &[TokenId],
    cfg: &BeamConfig,
) -> Result<Hypothesis, DecodeError> {
    cfg.validate()?;
    check_source(params, source)?;
    let encoded = encode(params, source)?;
    let alpha = cfg.length_penalty;
    let limit = step_limit(params, cfg);
    let mut live: Vec<(Vec<TokenId>, f64)> = vec![(vec![SOS], 0.0)];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for _ in 0..limit {
        let mut candidates: Vec<(Vec<TokenId>, f64)> = Vec::new();
        for (ids, lp) in &live {
            let next = next_log_probs(params, &encoded, ids)?;
            for (tok, &v) in next.iter().enumerate() {
                let tok = tok as TokenId;
                if tok == PAD || tok == SOS {
                    continue;
                }
                let mut ext = ids.clone();
                ext.push(tok);
                candidates.push((ext, lp + v));
            }
        }
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        candidates.truncate(cfg.beam_size);
        live.clear();
        for (ids, lp) in candidates {
            if ids.last() == Some(&EOS) {
                finished.push(Hypothesis::new(ids, lp, alpha));
            } else {
                live.push((ids, lp));
            }
        }
        if live.is_empty() {
            break;
        }
        if let Some(best) = finished.iter().map(|h| h.score).max_by(f64::total_cmp) {
            // Log-probabilities only fall, so a live hypothesis scores at most
            // its current log-prob over the longest admissible length.
            let bound = live
                .iter()
                .map(|(_, lp)| lp / (limit as f64).powf(alpha))
                .fold(f64::NEG_INFINITY, f64::max);
            if best >= bound {
                live.clear();
                break;
            }
        }
    }
    finished.extend(
        live.into_iter()
            .map(|(ids, lp)| Hypothesis::new(ids, lp, alpha)),
    );
    finished.sort_by(rank);
    Ok(finished.swap_remove(0))
}

/// Decodes every pair of `corpus` in order. With `token_map`, each source is
/// first prefixed with its utterance's emotion token.
pub fn translate_corpus(
    params: &ModelParams,
    vocab: &BpeVocab,
    corpus: &ParallelCorpus,
    cfg: &BeamConfig,
    token_map: Option<&HashMap<UtteranceId, EmotionToken>>,
) -> Result<Vec<(UtteranceId, String)>, DecodeError> {
    let mut out = Vec::with_capacity(corpus.len());
    for pair in &corpus.pairs {
        let source = match token_map {
            Some(map) => {
                let token = map
                    .get(&pair.id)
                    .ok_or_else(|| DecodeError::MissingToken(pair.id.clone()))?;
                inject_token(pair, *token)?.source
            }
            None => pair.source.clone(),
        };
        out.push((
            pair.id.clone(),
            translate_line(params, vocab, &source, cfg)?,
        ));
    }
    Ok(out)
}

/// Beam-decodes one already-tagged source line.
pub fn translate_line(
    params: &ModelParams,
    vocab: &BpeVocab,
    source: &str,
    cfg: &BeamConfig,
) -> Result<String, DecodeError> {
    let mut ids = vocab.encode(source);
    ids.push(EOS);
    let hyp = beam_search(params, &ids, cfg)?;
    Ok(vocab.decode(hyp.content())?)
}

/// `id<TAB>translation` lines.
pub fn render_tsv(rows: &[(UtteranceId, String)]) -> String {
    rows.iter().map(|(id, t)| format!("{id}\t{t}\n")).collect()
}

/// One translation per line.
pub fn render_text(rows: &[(UtteranceId, String)]) -> String {
    rows.iter().map(|(_, t)| format!("{t}\n")).collect()
}
