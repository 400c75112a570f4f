//! Byte-pair-encoding subword tokenizer with atomic special tokens.
//!
//! Words are split on whitespace, spelled out as characters, and the last
//! character of each word carries the [`WORD_END`] marker. Merges learned
//! during training are replayed in learned order at encode time. Special
//! surface forms (control tokens and the six emotion tokens) are cut out of
//! the text before segmentation and always map to a single ID.

mod io;
mod train;

pub use io::LoadError;
pub use train::train;

use std::collections::HashMap;

use thiserror::Error;

use crate::emotion::EmotionToken;

pub type TokenId = u32;

pub const WORD_END: &str = "</w>";

pub const PAD: TokenId = 0;
pub const UNK: TokenId = 1;
pub const SOS: TokenId = 2;
pub const EOS: TokenId = 3;

pub const CONTROL_TOKENS: [&str; 4] = ["<pad>", "<unk>", "<sos>", "<eos>"];

pub const VOCAB_HEADER: &str = "bpe-vocab v1";
const ALPHABET_MARKER: &str = "#alphabet";
const MERGES_MARKER: &str = "#merges";

#[derive(Debug, Error, PartialEq)]
pub enum TokenizerError {
    #[error("target vocab size {target} must exceed {minimum} (specials plus base symbols)")]
    TargetTooSmall { target: usize, minimum: usize },
    #[error("training corpus contains no words")]
    EmptyCorpus,
    #[error("invalid special token {0:?}")]
    InvalidSpecial(String),
    #[error("token id {0} is not in the vocabulary")]
    UnknownId(TokenId),
    #[error("vocab file line {line}: {message}")]
    Format { line: usize, message: String },
}

/// The control tokens followed by the six emotion-token surfaces.
pub fn default_specials() -> Vec<String> {
    CONTROL_TOKENS
        .iter()
        .copied()
        .chain(EmotionToken::surfaces())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeVocab {
    target_size: usize,
    specials: Vec<String>,
    alphabet: Vec<String>,
    merges: Vec<(String, String)>,
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, TokenId>,
    merge_ranks: HashMap<(String, String), usize>,
}

impl BpeVocab {
    /// Assembles a vocab. IDs are assigned to specials first, then base
    /// symbols, then each merge product in learned order (skipping products
    /// that already exist).
    pub fn from_parts(
        target_size: usize,
        specials: Vec<String>,
        alphabet: Vec<String>,
        merges: Vec<(String, String)>,
    ) -> Result<Self, TokenizerError> {
        for (i, control) in CONTROL_TOKENS.iter().enumerate() {
            if specials.get(i).map(String::as_str) != Some(*control) {
                return Err(TokenizerError::InvalidSpecial(format!(
                    "specials must start with {CONTROL_TOKENS:?}"
                )));
            }
        }
        let mut id_to_token = Vec::new();
        let mut token_to_id = HashMap::new();
        let mut add = |tok: &str, allow_existing: bool| -> Result<(), TokenizerError> {
            if token_to_id.contains_key(tok) {
                return if allow_existing {
                    Ok(())
                } else {
                    Err(TokenizerError::InvalidSpecial(tok.to_string()))
                };
            }
            token_to_id.insert(tok.to_string(), id_to_token.len() as TokenId);
            id_to_token.push(tok.to_string());
            Ok(())
        };
        for s in &specials {
            if s.is_empty() || s.chars().any(char::is_whitespace) || s.starts_with('#') {
                return Err(TokenizerError::InvalidSpecial(s.clone()));
            }
            add(s, false)?;
        }
        for sym in &alphabet {
            add(sym, false)?;
        }
        let mut merge_ranks = HashMap::with_capacity(merges.len());
        for (rank, (l, r)) in merges.iter().enumerate() {
            add(&format!("{l}{r}"), true)?;
            merge_ranks.entry((l.clone(), r.clone())).or_insert(rank);
        }
        Ok(Self {
            target_size,
            specials,
            alphabet,
            merges,
            id_to_token,
            token_to_id,
            merge_ranks,
        })
    }

    pub fn target_size(&self) -> usize {
        self.target_size
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn specials(&self) -> &[String] {
        &self.specials
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        (id as usize) < self.specials.len()
    }

    pub fn emotion_id(&self, token: EmotionToken) -> Option<TokenId> {
        self.id(token.surface())
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        let mut ids = Vec::new();
        let mut rest = text;
        while !rest.is_empty() {
            match self.find_special(rest) {
                Some((pos, special)) => {
                    self.encode_plain(&rest[..pos], &mut ids);
                    ids.push(self.token_to_id[special]);
                    rest = &rest[pos + special.len()..];
                }
                None => {
                    self.encode_plain(rest, &mut ids);
                    break;
                }
            }
        }
        ids
    }

    /// Earliest special occurrence; the longest surface wins at equal position.
    fn find_special<'a>(&'a self, text: &str) -> Option<(usize, &'a str)> {
        let mut best: Option<(usize, &str)> = None;
        for s in &self.specials {
            if let Some(pos) = text.find(s.as_str()) {
                let better = match best {
                    None => true,
                    Some((bp, bs)) => pos < bp || (pos == bp && s.len() > bs.len()),
                };
                if better {
                    best = Some((pos, s));
                }
            }
        }
        best
    }

    fn encode_plain(&self, text: &str, ids: &mut Vec<TokenId>) {
        for word in text.split_whitespace() {
            for sym in self.segment_word(word) {
                ids.push(self.id(&sym).unwrap_or(UNK));
            }
        }
    }

    /// Applies merges to a single word, lowest learned rank first.
    pub fn segment_word(&self, word: &str) -> Vec<String> {
        let mut symbols = spell_word(word);
        loop {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.merge_ranks.get(&(w[0].clone(), w[1].clone())))
                .min()
                .copied();
            let Some(rank) = best else { break };
            let (left, right) = &self.merges[rank];
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && &symbols[i] == left && &symbols[i + 1] == right {
                    merged.push(format!("{left}{right}"));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
        }
        symbols
    }

    /// Concatenates token surfaces, restoring spaces at word ends. Control
    /// tokens other than `<unk>` are dropped; `<unk>` is kept literally inside
    /// the word it interrupted.
    pub fn decode(&self, ids: &[TokenId]) -> Result<String, TokenizerError> {
        let mut words: Vec<String> = Vec::new();
        let mut current = String::new();
        for &id in ids {
            let token = self.token(id).ok_or(TokenizerError::UnknownId(id))?;
            match id {
                PAD | SOS | EOS => {}
                UNK => current.push_str(token),
                _ if self.is_special(id) => {
                    if !current.is_empty() {
                        words.push(std::mem::take(&mut current));
                    }
                    words.push(token.to_string());
                }
                _ => match token.strip_suffix(WORD_END) {
                    Some(stem) => {
                        current.push_str(stem);
                        words.push(std::mem::take(&mut current));
                    }
                    None => current.push_str(token),
                },
            }
        }
        if !current.is_empty() {
            words.push(current);
        }
        Ok(words.join(" "))
    }
}

pub(crate) fn spell_word(word: &str) -> Vec<String> {
    let mut symbols: Vec<String> = word.chars().map(String::from).collect();
    if let Some(last) = symbols.last_mut() {
        last.push_str(WORD_END);
    }
    symbols
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_vocab() -> BpeVocab {
        let corpus = [
            "the cat sat on the mat",
            "the dog sat on the log",
            "<AroPos> le chat est sur le tapis",
            "a cat and a dog",
        ];
        let extras: Vec<&str> = EmotionToken::surfaces().collect();
        train(corpus, 80, &extras).unwrap()
    }

    #[test]
    fn specials_have_lowest_ids() {
        let vocab = toy_vocab();
        for (i, s) in default_specials().iter().enumerate() {
            assert_eq!(vocab.id(s), Some(i as TokenId));
        }
        assert_eq!(vocab.id("<pad>"), Some(PAD));
        assert_eq!(vocab.id("<eos>"), Some(EOS));
    }

    #[test]
    fn emotion_token_is_one_id() {
        let vocab = toy_vocab();
        let ids = vocab.encode("<AroPos> hello");
        assert_eq!(ids[0], vocab.id("<AroPos>").unwrap());
        assert!(ids[1..].iter().all(|&i| !vocab.is_special(i) || i == UNK));
        // Glued to a word still splits out.
        let glued = vocab.encode("<ValNeg>cat");
        assert_eq!(glued[0], vocab.id("<ValNeg>").unwrap());
        assert_eq!(vocab.decode(&glued).unwrap(), "<ValNeg> cat");
    }

    #[test]
    fn empty_and_control_only() {
        let vocab = toy_vocab();
        assert!(vocab.encode("").is_empty());
        assert!(vocab.encode("   ").is_empty());
        assert_eq!(vocab.decode(&[SOS, EOS]).unwrap(), "");
        assert_eq!(vocab.decode(&[SOS, PAD, PAD]).unwrap(), "");
    }

    #[test]
    fn unknown_characters_are_lossy() {
        let vocab = toy_vocab();
        let ids = vocab.encode("cat zebra");
        assert!(ids.contains(&UNK));
        let text = vocab.decode(&ids).unwrap();
        assert!(text.contains("<unk>"), "{text}");
        assert!(text.starts_with("cat "));
    }

    #[test]
    fn unknown_id_is_an_error() {
        let vocab = toy_vocab();
        let bad = vocab.len() as TokenId;
        assert_eq!(vocab.decode(&[bad]), Err(TokenizerError::UnknownId(bad)));
    }

    #[test]
    fn segmentation_matches_merges() {
        let vocab = toy_vocab();
        // "the" occurs 4 times word-initially; it must be fully merged.
        assert_eq!(vocab.segment_word("the"), ["the</w>"]);
    }

    #[test]
    fn from_parts_requires_control_prefix() {
        let err = BpeVocab::from_parts(10, vec!["<unk>".into()], vec![], vec![]).unwrap_err();
        assert!(matches!(err, TokenizerError::InvalidSpecial(_)));
    }

    proptest! {
        #[test]
        fn roundtrip_in_alphabet(words in prop::collection::vec("[a-z]{1,8}", 1..8)) {
            let vocab = toy_vocab();
            let text = words.join(" ");
            // The toy corpus does not contain every letter; keep only covered ones.
            let covered: String = text.chars().filter(|c| *c == ' ' || vocab.id(&c.to_string()).is_some()).collect();
            let text = crate::corpus::normalize_text(&covered);
            prop_assert_eq!(vocab.decode(&vocab.encode(&text)).unwrap(), text);
        }

        #[test]
        fn emotion_prefix_atomic(word in "[a-z]{1,10}", t in 0usize..6) {
            let vocab = toy_vocab();
            let token = EmotionToken::ALL[t];
            let ids = vocab.encode(&format!("{} {word}", token.surface()));
            prop_assert_eq!(ids[0], vocab.emotion_id(token).unwrap());
            prop_assert!(ids[1..].iter().all(|&i| i == UNK || !vocab.is_special(i)));
        }
    }
}
