//! Aligned bilingual corpora keyed by utterance ID.
//!
//! A corpus on disk is two newline-delimited UTF-8 files (source and target
//! language, one sentence per line) plus an optional third file carrying one
//! utterance ID per line. Line `i` of every file describes the same utterance.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line count mismatch: source has {source_lines} lines, target has {target_lines}")]
    LineCountMismatch {
        source_lines: usize,
        target_lines: usize,
    },
    #[error("id file has {id_lines} lines but the corpus has {corpus_lines}")]
    IdCountMismatch {
        id_lines: usize,
        corpus_lines: usize,
    },
    #[error("{path}:{line}: invalid UTF-8")]
    Encoding { path: PathBuf, line: usize },
    #[error("{path}:{line}: empty line")]
    EmptyLine { path: PathBuf, line: usize },
    #[error("invalid utterance id {0:?}: must be non-empty and contain no whitespace")]
    InvalidId(String),
    #[error("duplicate utterance id {0:?}")]
    DuplicateId(String),
    #[error("unknown split {0:?} (expected train, dev or test)")]
    UnknownSplit(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Key shared by the source, target and emotion-score files.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UtteranceId(String);

impl UtteranceId {
    pub fn new(id: impl Into<String>) -> Result<Self, CorpusError> {
        let id = id.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(CorpusError::InvalidId(id));
        }
        Ok(Self(id))
    }

    /// Zero-padded line index, at least four digits wide.
    pub fn from_index(index: usize) -> Self {
        Self(format!("{index:04}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UtteranceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for UtteranceId {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(CorpusError::UnknownSplit(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelPair {
    pub id: UtteranceId,
    pub source: String,
    pub target: String,
}

impl ParallelPair {
    /// Builds a pair from raw text, normalizing whitespace on both sides.
    /// Returns `None` when either side is empty after normalization.
    pub fn new(id: UtteranceId, source: &str, target: &str) -> Option<Self> {
        let source = normalize_text(source);
        let target = normalize_text(target);
        if source.is_empty() || target.is_empty() {
            return None;
        }
        Some(Self { id, source, target })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelCorpus {
    pub split: Split,
    pub pairs: Vec<ParallelPair>,
}

impl ParallelCorpus {
    pub fn new(split: Split, pairs: Vec<ParallelPair>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for pair in &pairs {
            if !seen.insert(&pair.id) {
                return Err(CorpusError::DuplicateId(pair.id.to_string()));
            }
        }
        Ok(Self { split, pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &UtteranceId> {
        self.pairs.iter().map(|p| &p.id)
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.source.as_str())
    }

    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.target.as_str())
    }

    pub fn source_text(&self) -> String {
        join_lines(self.sources())
    }

    pub fn target_text(&self) -> String {
        join_lines(self.targets())
    }

    pub fn id_text(&self) -> String {
        join_lines(self.ids().map(UtteranceId::as_str))
    }

    /// Writes the source, target and (optionally) ID files. Every file ends with LF.
    pub fn write(
        &self,
        source_path: &Path,
        target_path: &Path,
        id_path: Option<&Path>,
    ) -> Result<(), CorpusError> {
        write_file(source_path, &self.source_text())?;
        write_file(target_path, &self.target_text())?;
        if let Some(path) = id_path {
            write_file(path, &self.id_text())?;
        }
        Ok(())
    }
}

/// Strips leading/trailing whitespace and collapses internal runs to one space.
pub fn normalize_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

pub fn load_corpus(
    source_path: &Path,
    target_path: &Path,
    id_path: Option<&Path>,
    split: Split,
) -> Result<ParallelCorpus, CorpusError> {
    let sources = read_lines(source_path)?;
    let targets = read_lines(target_path)?;
    if sources.len() != targets.len() {
        return Err(CorpusError::LineCountMismatch {
            source_lines: sources.len(),
            target_lines: targets.len(),
        });
    }
    let ids = match id_path {
        Some(path) => {
            let lines = read_lines(path)?;
            if lines.len() != sources.len() {
                return Err(CorpusError::IdCountMismatch {
                    id_lines: lines.len(),
                    corpus_lines: sources.len(),
                });
            }
            lines
                .iter()
                .map(|l| UtteranceId::new(l.trim()))
                .collect::<Result<Vec<_>, _>>()?
        }
        None => (0..sources.len()).map(UtteranceId::from_index).collect(),
    };

    let pairs = ids
        .into_iter()
        .zip(sources.iter().zip(&targets))
        .enumerate()
        .map(|(i, (id, (src, tgt)))| {
            let src = normalize_text(src);
            if src.is_empty() {
                return Err(CorpusError::EmptyLine {
                    path: source_path.to_path_buf(),
                    line: i + 1,
                });
            }
            let tgt = normalize_text(tgt);
            if tgt.is_empty() {
                return Err(CorpusError::EmptyLine {
                    path: target_path.to_path_buf(),
                    line: i + 1,
                });
            }
            Ok(ParallelPair {
                id,
                source: src,
                target: tgt,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    ParallelCorpus::new(split, pairs)
}

/// Reads a newline-delimited UTF-8 file. A trailing LF does not produce an
/// extra empty line; invalid UTF-8 is reported with its 1-based line number.
pub fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.is_empty() {
        return Ok(Vec::new());
    }
    let body = bytes.strip_suffix(b"\n").unwrap_or(&bytes);
    body.split(|&b| b == b'\n')
        .enumerate()
        .map(|(i, raw)| {
            let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
            String::from_utf8(raw.to_vec()).map_err(|_| CorpusError::Encoding {
                path: path.to_path_buf(),
                line: i + 1,
            })
        })
        .collect()
}

pub(crate) fn join_lines<'a>(lines: impl Iterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for line in lines {
        out.push_str(line);
        out.push('\n');
    }
    out
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err)?;
        }
    }
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(contents.as_bytes()).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::TempDir;

    fn write(dir: &TempDir, name: &str, contents: &[u8]) -> PathBuf {
        let path = dir.path().join(name);
        fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_text("  hello  world "), "hello world");
        assert_eq!(normalize_text("Bonjour"), "Bonjour");
        assert_eq!(normalize_text("a\t b"), "a b");
        assert_eq!(normalize_text("   "), "");
    }

    #[test]
    fn index_ids_when_no_id_file() {
        let dir = TempDir::new().unwrap();
        let en = write(&dir, "en", b"I am quite foolish\nhello\n");
        let fr = write(&dir, "fr", b"Je suis toute sotte\nbonjour\n");
        let corpus = load_corpus(&en, &fr, None, Split::Train).unwrap();
        assert_eq!(corpus.len(), 2);
        let ids: Vec<_> = corpus.ids().map(|i| i.as_str().to_string()).collect();
        assert_eq!(ids, ["0000", "0001"]);
        assert_eq!(corpus.pairs[0].source, "I am quite foolish");
        assert_eq!(corpus.pairs[0].target, "Je suis toute sotte");
    }

    #[test]
    fn explicit_ids() {
        let dir = TempDir::new().unwrap();
        let en = write(&dir, "en", b"a\nb\n");
        let fr = write(&dir, "fr", b"x\ny\n");
        let ids = write(&dir, "ids", b"utt_a\nutt_b\n");
        let corpus = load_corpus(&en, &fr, Some(&ids), Split::Dev).unwrap();
        assert_eq!(corpus.pairs[1].id.as_str(), "utt_b");
        assert_eq!(corpus.split, Split::Dev);
    }

    #[test]
    fn line_count_mismatch() {
        let dir = TempDir::new().unwrap();
        let en = write(&dir, "en", b"a\nb\nc\n");
        let fr = write(&dir, "fr", b"x\ny\n");
        let err = load_corpus(&en, &fr, None, Split::Train).unwrap_err();
        assert!(matches!(
            err,
            CorpusError::LineCountMismatch {
                source_lines: 3,
                target_lines: 2
            }
        ));
    }

    #[test]
    fn empty_line_reports_line_number() {
        let dir = TempDir::new().unwrap();
        let en = write(&dir, "en", b"a\n  \nc\n");
        let fr = write(&dir, "fr", b"x\ny\nz\n");
        match load_corpus(&en, &fr, None, Split::Train).unwrap_err() {
            CorpusError::EmptyLine { line, path } => {
                assert_eq!(line, 2);
                assert_eq!(path, en);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_utf8_reports_line_number() {
        let dir = TempDir::new().unwrap();
        let en = write(&dir, "en", b"a\nb\xff\n");
        let fr = write(&dir, "fr", b"x\ny\n");
        match load_corpus(&en, &fr, None, Split::Train).unwrap_err() {
            CorpusError::Encoding { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_invalid_ids() {
        let dir = TempDir::new().unwrap();
        let en = write(&dir, "en", b"a\nb\n");
        let fr = write(&dir, "fr", b"x\ny\n");
        let dup = write(&dir, "dup", b"u1\nu1\n");
        assert!(matches!(
            load_corpus(&en, &fr, Some(&dup), Split::Train),
            Err(CorpusError::DuplicateId(_))
        ));
        let bad = write(&dir, "bad", b"u1\nu 2\n");
        assert!(matches!(
            load_corpus(&en, &fr, Some(&bad), Split::Train),
            Err(CorpusError::InvalidId(_))
        ));
    }

    #[test]
    fn serializer_terminates_final_line() {
        let dir = TempDir::new().unwrap();
        let en = write(&dir, "en", b"  a   b\nc");
        let fr = write(&dir, "fr", b"x\n\ty  z \n");
        let corpus = load_corpus(&en, &fr, None, Split::Test).unwrap();
        let out_en = dir.path().join("out.en");
        let out_fr = dir.path().join("out.fr");
        let out_ids = dir.path().join("out.ids");
        corpus.write(&out_en, &out_fr, Some(&out_ids)).unwrap();
        assert_eq!(fs::read_to_string(&out_en).unwrap(), "a b\nc\n");
        assert_eq!(fs::read_to_string(&out_fr).unwrap(), "x\ny z\n");
        assert_eq!(fs::read_to_string(&out_ids).unwrap(), "0000\n0001\n");
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "[ \t\na-zé,.!]{0,40}") {
            let once = normalize_text(&s);
            prop_assert_eq!(normalize_text(&once), once.clone());
            prop_assert!(!once.starts_with(' ') && !once.ends_with(' '));
            prop_assert!(!once.contains("  "));
        }

        #[test]
        fn load_write_load_is_stable(
            lines in prop::collection::vec(("[a-z]{1,5}( +[a-z]{1,5}){0,3}", "[a-z]{1,5}(\t[a-z]{1,5}){0,3}"), 1..8)
        ) {
            let dir = TempDir::new().unwrap();
            let src: String = lines.iter().map(|(s, _)| format!("  {s} \n")).collect();
            let tgt: String = lines.iter().map(|(_, t)| format!("{t}\n")).collect();
            let en = write(&dir, "en", src.as_bytes());
            let fr = write(&dir, "fr", tgt.as_bytes());
            let corpus = load_corpus(&en, &fr, None, Split::Train).unwrap();
            prop_assert_eq!(corpus.len(), lines.len());
            let (en2, fr2) = (dir.path().join("en2"), dir.path().join("fr2"));
            corpus.write(&en2, &fr2, None).unwrap();
            let reloaded = load_corpus(&en2, &fr2, None, Split::Train).unwrap();
            prop_assert_eq!(&reloaded, &corpus);
            let (en3, fr3) = (dir.path().join("en3"), dir.path().join("fr3"));
            reloaded.write(&en3, &fr3, None).unwrap();
            prop_assert_eq!(fs::read(&en2).unwrap(), fs::read(&en3).unwrap());
            prop_assert_eq!(fs::read(&fr2).unwrap(), fs::read(&fr3).unwrap());
        }
    }
}
