//! Dimensional emotion scores and the polarity tokens derived from them.
//!
//! Scores arrive as a CSV with header `id,arousal,dominance,valence`, one row
//! per utterance, each value in `[0, 1]`. A score is binned per dimension into
//! a negative or positive token using a 0.5 threshold; `0.5` itself is
//! positive. The token is prepended to the source sentence only.

mod ccc;
mod stats;

pub use ccc::{ccc, CccError};
pub use stats::{
    distribution_stats, quantile, render_stats_csv, render_stats_table, DistributionStats,
};

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::{CorpusError, ParallelPair, UtteranceId};

pub const SCORE_HEADER: [&str; 4] = ["id", "arousal", "dominance", "valence"];

/// Scores at or above this value map to the positive token.
pub const POLARITY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum EmotionError {
    #[error("{path}: missing column {column:?}")]
    MissingColumn { path: PathBuf, column: &'static str },
    #[error("row {row}: {dimension} value {value} outside [0, 1]")]
    OutOfRange {
        row: usize,
        dimension: Dimension,
        value: f64,
    },
    #[error("row {row}: cannot parse {field:?} as a number")]
    BadNumber { row: usize, field: String },
    #[error("duplicate id {0:?} in score file")]
    DuplicateId(String),
    #[error("source already carries an emotion token: {0:?}")]
    AlreadyTagged(String),
    #[error("no values to summarize")]
    EmptyInput,
    #[error("unknown dimension {0:?}")]
    UnknownDimension(String),
    #[error(transparent)]
    Id(#[from] CorpusError),
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dimension {
    Arousal,
    Dominance,
    Valence,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Arousal, Dimension::Dominance, Dimension::Valence];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Arousal => "arousal",
            Dimension::Dominance => "dominance",
            Dimension::Valence => "valence",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dimension {
    type Err = EmotionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| EmotionError::UnknownDimension(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EmotionToken {
    AroNeg,
    AroPos,
    DomNeg,
    DomPos,
    ValNeg,
    ValPos,
}

impl EmotionToken {
    pub const ALL: [EmotionToken; 6] = [
        EmotionToken::AroNeg,
        EmotionToken::AroPos,
        EmotionToken::DomNeg,
        EmotionToken::DomPos,
        EmotionToken::ValNeg,
        EmotionToken::ValPos,
    ];

    pub fn new(dimension: Dimension, positive: bool) -> Self {
        match (dimension, positive) {
            (Dimension::Arousal, false) => EmotionToken::AroNeg,
            (Dimension::Arousal, true) => EmotionToken::AroPos,
            (Dimension::Dominance, false) => EmotionToken::DomNeg,
            (Dimension::Dominance, true) => EmotionToken::DomPos,
            (Dimension::Valence, false) => EmotionToken::ValNeg,
            (Dimension::Valence, true) => EmotionToken::ValPos,
        }
    }

    pub fn surface(self) -> &'static str {
        match self {
            EmotionToken::AroNeg => "<AroNeg>",
            EmotionToken::AroPos => "<AroPos>",
            EmotionToken::DomNeg => "<DomNeg>",
            EmotionToken::DomPos => "<DomPos>",
            EmotionToken::ValNeg => "<ValNeg>",
            EmotionToken::ValPos => "<ValPos>",
        }
    }

    pub fn from_surface(surface: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.surface() == surface)
    }

    pub fn dimension(self) -> Dimension {
        match self {
            EmotionToken::AroNeg | EmotionToken::AroPos => Dimension::Arousal,
            EmotionToken::DomNeg | EmotionToken::DomPos => Dimension::Dominance,
            EmotionToken::ValNeg | EmotionToken::ValPos => Dimension::Valence,
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(
            self,
            EmotionToken::AroPos | EmotionToken::DomPos | EmotionToken::ValPos
        )
    }

    pub fn flipped(self) -> Self {
        Self::new(self.dimension(), !self.is_positive())
    }

    pub fn surfaces() -> impl Iterator<Item = &'static str> {
        Self::ALL.into_iter().map(Self::surface)
    }
}

impl fmt::Display for EmotionToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.surface())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmotionScores {
    pub id: UtteranceId,
    pub arousal: f64,
    pub dominance: f64,
    pub valence: f64,
}

impl EmotionScores {
    pub fn new(
        id: UtteranceId,
        arousal: f64,
        dominance: f64,
        valence: f64,
    ) -> Result<Self, EmotionError> {
        let scores = Self {
            id,
            arousal,
            dominance,
            valence,
        };
        for dim in Dimension::ALL {
            let value = scores.get(dim);
            if !(0.0..=1.0).contains(&value) {
                return Err(EmotionError::OutOfRange {
                    row: 0,
                    dimension: dim,
                    value,
                });
            }
        }
        Ok(scores)
    }

    pub fn get(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::Arousal => self.arousal,
            Dimension::Dominance => self.dominance,
            Dimension::Valence => self.valence,
        }
    }
}

pub type ScoreMap = BTreeMap<UtteranceId, EmotionScores>;

/// Parses a score CSV. Row numbers in errors are 1-based data rows (the header is row 0).
pub fn load_scores(path: &Path) -> Result<ScoreMap, EmotionError> {
    let csv_err = |source| EmotionError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let mut columns = [0usize; 4];
    for (slot, name) in columns.iter_mut().zip(SCORE_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or(EmotionError::MissingColumn {
                path: path.to_path_buf(),
                column: name,
            })?;
    }

    let mut scores = ScoreMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(csv_err)?;
        let field = |col: usize| record.get(col).unwrap_or("");
        let id = UtteranceId::new(field(columns[0]))?;
        let mut values = [0.0f64; 3];
        for (k, dim) in Dimension::ALL.into_iter().enumerate() {
            let raw = field(columns[k + 1]);
            let value: f64 = raw.parse().map_err(|_| EmotionError::BadNumber {
                row,
                field: raw.to_string(),
            })?;
            if !(0.0..=1.0).contains(&value) {
                return Err(EmotionError::OutOfRange {
                    row,
                    dimension: dim,
                    value,
                });
            }
            values[k] = value;
        }
        if scores.contains_key(&id) {
            return Err(EmotionError::DuplicateId(id.to_string()));
        }
        scores.insert(
            id.clone(),
            EmotionScores {
                id,
                arousal: values[0],
                dominance: values[1],
                valence: values[2],
            },
        );
    }
    Ok(scores)
}

/// Writes rows in the given order using the score-file contract.
pub fn write_scores<'a>(
    path: &Path,
    rows: impl IntoIterator<Item = &'a EmotionScores>,
) -> Result<(), EmotionError> {
    let io_err = |source| EmotionError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = String::from("id,arousal,dominance,valence\n");
    for s in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.id, s.arousal, s.dominance, s.valence
        ));
    }
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    file.write_all(out.as_bytes()).map_err(io_err)
}

pub fn bin_emotion(scores: &EmotionScores, dim: Dimension) -> EmotionToken {
    EmotionToken::new(dim, scores.get(dim) >= POLARITY_THRESHOLD)
}

/// Prepends the token's surface form and a single space to the source side.
pub fn inject_token(
    pair: &ParallelPair,
    token: EmotionToken,
) -> Result<ParallelPair, EmotionError> {
    if EmotionToken::surfaces().any(|s| pair.source.contains(s)) {
        return Err(EmotionError::AlreadyTagged(pair.source.clone()));
    }
    Ok(ParallelPair {
        id: pair.id.clone(),
        source: format!("{} {}", token.surface(), pair.source),
        target: pair.target.clone(),
    })
}

/// Inverse of [`inject_token`]: splits off a leading emotion token if present.
pub fn strip_token(source: &str) -> (Option<EmotionToken>, &str) {
    if let Some((head, rest)) = source.split_once(' ') {
        if let Some(token) = EmotionToken::from_surface(head) {
            return (Some(token), rest);
        }
    }
    (None, source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::fs;
    use tempfile::TempDir;

    fn id(s: &str) -> UtteranceId {
        UtteranceId::new(s).unwrap()
    }

    fn scores(a: f64, d: f64, v: f64) -> EmotionScores {
        EmotionScores::new(id("u"), a, d, v).unwrap()
    }

    fn score_file(contents: &str) -> (TempDir, PathBuf) {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("scores.csv");
        fs::write(&path, contents).unwrap();
        (dir, path)
    }

    #[test]
    fn token_surfaces() {
        let surfaces: Vec<_> = EmotionToken::surfaces().collect();
        assert_eq!(
            surfaces,
            ["<AroNeg>", "<AroPos>", "<DomNeg>", "<DomPos>", "<ValNeg>", "<ValPos>"]
        );
        for t in EmotionToken::ALL {
            assert_eq!(EmotionToken::from_surface(t.surface()), Some(t));
            assert_eq!(t.flipped().flipped(), t);
            assert_ne!(t.flipped().is_positive(), t.is_positive());
        }
        assert_eq!("valence".parse::<Dimension>().unwrap(), Dimension::Valence);
    }

    #[test]
    fn load_scores_parses_rows() {
        let (_d, path) = score_file("id,arousal,dominance,valence\nutt1,0.62,0.50,0.31\n");
        let map = load_scores(&path).unwrap();
        let s = &map[&id("utt1")];
        assert_eq!((s.arousal, s.dominance, s.valence), (0.62, 0.50, 0.31));
    }

    #[test]
    fn load_scores_column_order_follows_header() {
        let (_d, path) = score_file("valence,id,dominance,arousal\n0.1,u,0.2,0.3\n");
        let s = &load_scores(&path).unwrap()[&id("u")];
        assert_eq!((s.arousal, s.dominance, s.valence), (0.3, 0.2, 0.1));
    }

    #[test]
    fn load_scores_errors() {
        let (_d, path) = score_file("id,arousal,dominance,valence\nutt1,1.2,0.5,0.5\n");
        assert!(matches!(
            load_scores(&path),
            Err(EmotionError::OutOfRange {
                row: 1,
                dimension: Dimension::Arousal,
                ..
            })
        ));
        let (_d, path) = score_file("id,arousal,valence\nutt1,0.2,0.5\n");
        assert!(matches!(
            load_scores(&path),
            Err(EmotionError::MissingColumn {
                column: "dominance",
                ..
            })
        ));
        let (_d, path) = score_file("id,arousal,dominance,valence\na,0.1,0.1,0.1\na,0.2,0.2,0.2\n");
        assert!(matches!(
            load_scores(&path),
            Err(EmotionError::DuplicateId(_))
        ));
        let (_d, path) = score_file("id,arousal,dominance,valence\na,x,0.1,0.1\n");
        assert!(matches!(
            load_scores(&path),
            Err(EmotionError::BadNumber { .. })
        ));
        let (_d, path) = score_file("id,arousal,dominance,valence\na,NaN,0.1,0.1\n");
        assert!(matches!(
            load_scores(&path),
            Err(EmotionError::OutOfRange { .. })
        ));
    }

    #[test]
    fn header_only_is_empty() {
        let (_d, path) = score_file("id,arousal,dominance,valence\n");
        assert!(load_scores(&path).unwrap().is_empty());
    }

    #[test]
    fn write_then_load() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("s.csv");
        let rows = vec![
            EmotionScores::new(id("b"), 0.25, 0.5, 1.0).unwrap(),
            EmotionScores::new(id("a"), 0.0, 0.125, 0.75).unwrap(),
        ];
        write_scores(&path, &rows).unwrap();
        let map = load_scores(&path).unwrap();
        assert_eq!(map[&id("b")], rows[0]);
        assert_eq!(map[&id("a")], rows[1]);
    }

    #[test]
    fn binning_examples() {
        assert_eq!(
            bin_emotion(&scores(0.62, 0.5, 0.5), Dimension::Arousal),
            EmotionToken::AroPos
        );
        assert_eq!(
            bin_emotion(&scores(0.5, 0.30, 0.5), Dimension::Dominance),
            EmotionToken::DomNeg
        );
    }

    #[test]
    fn threshold_equality_is_positive() {
        let s = scores(0.5, 0.5, 0.5);
        assert_eq!(bin_emotion(&s, Dimension::Valence), EmotionToken::ValPos);
        assert_eq!(bin_emotion(&s, Dimension::Arousal), EmotionToken::AroPos);
        let just_below = scores(0.5f64.next_down(), 0.5, 0.5);
        assert_eq!(
            bin_emotion(&just_below, Dimension::Arousal),
            EmotionToken::AroNeg
        );
    }

    #[test]
    fn inject_worked_example() {
        let pair =
            ParallelPair::new(id("0000"), "I am quite foolish", "Je suis toute sotte").unwrap();
        let tagged = inject_token(&pair, EmotionToken::ValNeg).unwrap();
        assert_eq!(tagged.source, "<ValNeg> I am quite foolish");
        assert_eq!(tagged.target, "Je suis toute sotte");
        assert_eq!(tagged.id, pair.id);
        assert!(matches!(
            inject_token(&tagged, EmotionToken::AroPos),
            Err(EmotionError::AlreadyTagged(_))
        ));
    }

    proptest! {
        #[test]
        fn binning_polarity(v in 0.0f64..=1.0, d in 0usize..3) {
            let dim = Dimension::ALL[d];
            let s = scores(v, v, v);
            let token = bin_emotion(&s, dim);
            prop_assert_eq!(token.dimension(), dim);
            if v != 0.5 {
                prop_assert_eq!(token.is_positive(), v > 0.5);
            }
        }

        #[test]
        fn inject_then_strip(src in "[a-zA-Z]{1,6}( [a-zA-Z,.]{1,6}){0,5}", tgt in "[a-z]{1,6}( [a-z]{1,6}){0,5}", t in 0usize..6) {
            let pair = ParallelPair::new(id("x"), &src, &tgt).unwrap();
            let token = EmotionToken::ALL[t];
            let tagged = inject_token(&pair, token).unwrap();
            prop_assert_eq!(tagged.target.as_bytes(), pair.target.as_bytes());
            let count: usize = EmotionToken::surfaces().map(|s| tagged.source.matches(s).count()).sum();
            prop_assert_eq!(count, 1);
            let (stripped_token, rest) = strip_token(&tagged.source);
            prop_assert_eq!(stripped_token, Some(token));
            prop_assert_eq!(rest, pair.source.as_str());
        }
    }
}
