//! Emotion-conditioned neural machine translation toolkit.
//!
//! Dimensional emotion scores (arousal, dominance, valence in `[0, 1]`) are
//! binned into polarity tokens such as `<AroPos>` and prepended to source
//! sentences. A from-scratch transformer encoder-decoder is then trained on
//! the tagged corpus and compared to an untagged baseline with corpus BLEU.

pub mod corpus;
pub mod decode;
pub mod emotion;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod tokenizer;
