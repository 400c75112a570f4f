//! Plain-text vocab file.
//!
//! ```text
//! bpe-vocab v1 <target_size>
//! <special>            one per line, control tokens first
//! #alphabet
//! <symbol>             one base symbol per line
//! #merges
//! <left> <right>       in learned order
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{BpeVocab, TokenizerError, ALPHABET_MARKER, MERGES_MARKER, VOCAB_HEADER};

impl BpeVocab {
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{VOCAB_HEADER} {}", self.target_size);
        for s in &self.specials {
            let _ = writeln!(out, "{s}");
        }
        let _ = writeln!(out, "{ALPHABET_MARKER}");
        for s in &self.alphabet {
            let _ = writeln!(out, "{s}");
        }
        let _ = writeln!(out, "{MERGES_MARKER}");
        for (l, r) in &self.merges {
            let _ = writeln!(out, "{l} {r}");
        }
        out
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_file_string())
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path)?;
        Ok(text.parse()?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Format(#[from] TokenizerError),
}

impl FromStr for BpeVocab {
    type Err = TokenizerError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let format_err = |line: usize, message: &str| TokenizerError::Format {
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines
            .next()
            .ok_or_else(|| format_err(1, "missing header"))?;
        let target_size = header
            .strip_prefix(VOCAB_HEADER)
            .and_then(|rest| rest.strip_prefix(' '))
            .and_then(|n| n.parse::<usize>().ok())
            .ok_or_else(|| format_err(1, "expected `bpe-vocab v1 <target_size>`"))?;

        let mut specials = Vec::new();
        let mut alphabet = Vec::new();
        let mut merges = Vec::new();
        let mut section = 0;
        for (no, line) in lines {
            match (section, line) {
                (0, ALPHABET_MARKER) => section = 1,
                (1, MERGES_MARKER) => section = 2,
                (0, s) => specials.push(s.to_string()),
                (1, s) => {
                    if s.is_empty() || s.contains(' ') {
                        return Err(format_err(no, "bad base symbol"));
                    }
                    alphabet.push(s.to_string());
                }
                (_, s) => {
                    let (l, r) = s
                        .split_once(' ')
                        .filter(|(l, r)| !l.is_empty() && !r.is_empty() && !r.contains(' '))
                        .ok_or_else(|| format_err(no, "merge must be `left right`"))?;
                    merges.push((l.to_string(), r.to_string()));
                }
            }
        }
        if section != 2 {
            return Err(format_err(0, "missing #alphabet or #merges section"));
        }
        BpeVocab::from_parts(target_size, specials, alphabet, merges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emotion::EmotionToken;
    use crate::tokenizer::train;

    #[test]
    fn roundtrip_is_byte_exact() {
        let extras: Vec<&str> = EmotionToken::surfaces().collect();
        let vocab = train(
            ["le chat noir", "the black cat", "l'homme et la femme"],
            90,
            &extras,
        )
        .unwrap();
        let text = vocab.to_file_string();
        assert!(text.starts_with("bpe-vocab v1 90\n<pad>\n<unk>\n<sos>\n<eos>\n<AroNeg>\n"));
        let reloaded: BpeVocab = text.parse().unwrap();
        assert_eq!(reloaded, vocab);
        assert_eq!(reloaded.to_file_string(), text);
    }

    #[test]
    fn rejects_bad_files() {
        assert!("".parse::<BpeVocab>().is_err());
        assert!("bpe-vocab v2 10\n".parse::<BpeVocab>().is_err());
        assert!("bpe-vocab v1 10\n<pad>\n<unk>\n<sos>\n<eos>\n"
            .parse::<BpeVocab>()
            .is_err());
        let bad_merge = "bpe-vocab v1 10\n<pad>\n<unk>\n<sos>\n<eos>\n#alphabet\na\n#merges\naa\n";
        assert!(matches!(
            bad_merge.parse::<BpeVocab>(),
            Err(TokenizerError::Format { line: 9, .. })
        ));
    }
}
