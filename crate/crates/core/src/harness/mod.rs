//! Experiment driver: builds the baseline and emotion-tagged corpus
//! variants, trains one model per variant, decodes dev and test, and writes
//! a BLEU table.
//!
//! Layout under the output directory:
//!
//! ```text
//! report.txt, report.csv
//! <variant>/data/{train,dev,test}.{src,tgt,ids}
//! <variant>/vocab.txt
//! <variant>/checkpoints/epoch-NNNN.ckpt, averaged.ckpt
//! <variant>/train_log.csv, run.key
//! <variant>/{dev,test}.hyp, {dev,test}.tsv, scores.txt
//! ```

pub mod synthetic;

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{load_corpus, CorpusError, ParallelCorpus, Split, UtteranceId};
use crate::decode::{render_text, render_tsv, translate_corpus, BeamConfig, DecodeError};
use crate::emotion::{
    bin_emotion, distribution_stats, inject_token, load_scores, Dimension, DistributionStats,
    EmotionError, EmotionToken, ScoreMap,
};
use crate::metrics::{corpus_bleu, signature, BleuBreakdown, BleuError, Smoothing};
use crate::model::{
    average_checkpoints, eval_loss, train, Checkpoint, Example, ModelConfig, ModelError,
    ModelParams, TrainConfig, TrainOutcome,
};
use crate::tokenizer::{self, BpeVocab, LoadError, TokenizerError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Emotion(#[from] EmotionError),
    #[error("variant {0} needs a score file")]
    MissingScoreFile(Variant),
    #[error("{} utterances lack emotion scores (first: {})", .0.len(), .0.first().map(UtteranceId::as_str).unwrap_or(""))]
    MissingScore(Vec<UtteranceId>),
    #[error("unknown variant {0:?} (expected baseline, arousal, dominance or valence)")]
    UnknownVariant(String),
    #[error("no variants requested")]
    NoVariants,
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    VocabFile(#[from] LoadError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Bleu(#[from] BleuError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Failures of the optimization itself, as opposed to bad inputs.
    pub fn is_training_failure(&self) -> bool {
        matches!(
            self,
            HarnessError::Model(ModelError::NonFinite { .. } | ModelError::EmptyTrainingSet)
        )
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Baseline,
    Arousal,
    Dominance,
    Valence,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Baseline,
        Variant::Arousal,
        Variant::Dominance,
        Variant::Valence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Arousal => "arousal",
            Variant::Dominance => "dominance",
            Variant::Valence => "valence",
        }
    }

    pub fn dimension(self) -> Option<Dimension> {
        match self {
            Variant::Baseline => None,
            Variant::Arousal => Some(Dimension::Arousal),
            Variant::Dominance => Some(Dimension::Dominance),
            Variant::Valence => Some(Dimension::Valence),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| HarnessError::UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPaths {
    pub source: PathBuf,
    pub target: PathBuf,
    pub ids: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub train: SplitPaths,
    pub dev: SplitPaths,
    pub test: SplitPaths,
    /// Required by every tagged variant.
    pub scores: Option<PathBuf>,
    pub variants: Vec<Variant>,
    /// `vocab_size` and `seed` are overwritten per run.
    pub model: ModelConfig,
    pub training: TrainConfig,
    pub beam: BeamConfig,
    pub bpe_size: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Retrain even when a matching run exists on disk.
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitCorpora {
    pub train: ParallelCorpus,
    pub dev: ParallelCorpus,
    pub test: ParallelCorpus,
}

impl SplitCorpora {
    pub fn load(spec: &ExperimentSpec) -> Result<Self, HarnessError> {
        let load =
            |p: &SplitPaths, split| load_corpus(&p.source, &p.target, p.ids.as_deref(), split);
        Ok(Self {
            train: load(&spec.train, Split::Train)?,
            dev: load(&spec.dev, Split::Dev)?,
            test: load(&spec.test, Split::Test)?,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParallelCorpus> {
        [&self.train, &self.dev, &self.test].into_iter()
    }

    fn map(
        &self,
        mut f: impl FnMut(&ParallelCorpus) -> Result<ParallelCorpus, HarnessError>,
    ) -> Result<Self, HarnessError> {
        Ok(Self {
            train: f(&self.train)?,
            dev: f(&self.dev)?,
            test: f(&self.test)?,
        })
    }
}

/// Prefixes every source with the binned token of `dim`.
pub fn tag_corpus(
    corpus: &ParallelCorpus,
    scores: &ScoreMap,
    dim: Dimension,
) -> Result<ParallelCorpus, HarnessError> {
    let missing: Vec<UtteranceId> = corpus
        .ids()
        .filter(|id| !scores.contains_key(*id))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(HarnessError::MissingScore(missing));
    }
    let pairs = corpus
        .pairs
        .iter()
        .map(|p| inject_token(p, bin_emotion(&scores[&p.id], dim)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ParallelCorpus::new(corpus.split, pairs)?)
}

/// Baseline is the input unchanged; each dimension variant tags every source
/// of every split. Targets are never touched.
pub fn prepare_variants(
    corpora: &SplitCorpora,
    scores: Option<&ScoreMap>,
    variants: &[Variant],
) -> Result<BTreeMap<Variant, SplitCorpora>, HarnessError> {
    let mut out = BTreeMap::new();
    for &v in variants {
        let prepared = match v.dimension() {
            None => corpora.clone(),
            Some(dim) => {
                let scores = scores.ok_or(HarnessError::MissingScoreFile(v))?;
                let missing: Vec<UtteranceId> = corpora
                    .iter()
                    .flat_map(|c| c.ids())
                    .filter(|id| !scores.contains_key(*id))
                    .cloned()
                    .collect();
                if !missing.is_empty() {
                    return Err(HarnessError::MissingScore(missing));
                }
                corpora.map(|c| tag_corpus(c, scores, dim))?
            }
        };
        out.insert(v, prepared);
    }
    Ok(out)
}

/// Joint BPE over train sources and targets, with the emotion tokens
/// reserved whether or not the variant uses them.
pub fn train_vocab(train_split: &ParallelCorpus, size: usize) -> Result<BpeVocab, TokenizerError> {
    let extras: Vec<&str> = EmotionToken::surfaces().collect();
    tokenizer::train(
        train_split.sources().chain(train_split.targets()),
        size,
        &extras,
    )
}

pub fn examples(vocab: &BpeVocab, corpus: &ParallelCorpus) -> Vec<Example> {
    corpus
        .pairs
        .iter()
        .map(|p| Example::from_text(vocab, &p.source, &p.target))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantScores {
    pub dev: BleuBreakdown,
    pub test: BleuBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantRow {
    pub variant: Variant,
    /// Error message for a failed variant.
    pub outcome: Result<VariantScores, String>,
}

/// Per-variant BLEU on dev and test, with deltas against a successful
/// baseline row when there is one.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<VariantRow>,
}

impl ResultsTable {
    fn baseline(&self) -> Option<&VariantScores> {
        self.rows
            .iter()
            .find(|r| r.variant == Variant::Baseline)
            .and_then(|r| r.outcome.as_ref().ok())
    }

    fn show_deltas(&self) -> bool {
        self.baseline().is_some() && self.rows.iter().any(|r| r.variant != Variant::Baseline)
    }

    pub fn render_text(&self) -> String {
        let deltas = self.show_deltas();
        let mut header = vec!["variant", "dev", "test"];
        if deltas {
            header.extend(["delta_dev", "delta_test"]);
        }
        let mut lines: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for row in &self.rows {
            let mut cells = vec![row.variant.to_string()];
            match &row.outcome {
                Ok(s) => {
                    cells.push(format!("{:.2}", s.dev.score));
                    cells.push(format!("{:.2}", s.test.score));
                    if deltas {
                        let b = self.baseline().expect("deltas imply baseline");
                        if row.variant == Variant::Baseline {
                            cells.extend(["".into(), "".into()]);
                        } else {
                            cells.push(format!("{:+.2}", s.dev.score - b.dev.score));
                            cells.push(format!("{:+.2}", s.test.score - b.test.score));
                        }
                    }
                }
                Err(e) => cells.push(format!("FAILED: {e}")),
            }
            lines.push(cells);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                lines
                    .iter()
                    .filter(|l| l.len() == header.len())
                    .map(|l| l[c].len())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for l in &lines {
            let mut line = String::new();
            for (c, cell) in l.iter().enumerate() {
                if c > 0 {
                    line.push_str("  ");
                }
                if l.len() == header.len() {
                    let _ = write!(line, "{:<w$}", cell, w = widths[c]);
                } else {
                    line.push_str(cell);
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        let _ = writeln!(out, "BLEU signature: {}", signature(Smoothing::Exp));
        out
    }

    pub fn render_csv(&self) -> String {
        let deltas = self.show_deltas();
        let mut out = String::from("variant,dev_bleu,test_bleu");
        if deltas {
            out.push_str(",delta_dev,delta_test");
        }
        out.push_str(",status\n");
        for row in &self.rows {
            match &row.outcome {
                Ok(s) => {
                    let _ = write!(
                        out,
                        "{},{:.4},{:.4}",
                        row.variant, s.dev.score, s.test.score
                    );
                    if deltas {
                        let b = self.baseline().expect("deltas imply baseline");
                        if row.variant == Variant::Baseline {
                            out.push_str(",,");
                        } else {
                            let _ = write!(
                                out,
                                ",{:.4},{:.4}",
                                s.dev.score - b.dev.score,
                                s.test.score - b.test.score
                            );
                        }
                    }
                    out.push_str(",ok\n");
                }
                Err(_) => {
                    let _ = writeln!(
                        out,
                        "{},,{},failed",
                        row.variant,
                        if deltas { ",," } else { "" }
                    );
                }
            }
        }
        out
    }

    /// Hex sha256 over the text and CSV renderings.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.render_text());
        h.update(self.render_csv());
        hex::encode(h.finalize())
    }
}

pub fn variant_dir(output_dir: &Path, variant: Variant) -> PathBuf {
    output_dir.join(variant.name())
}

fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join("checkpoints")
        .join(format!("epoch-{epoch:04}.ckpt"))
}

fn run_key(
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    vocab: &BpeVocab,
    train_set: &[Example],
    dev_set: &[Example],
) -> String {
    let mut h = Sha256::new();
    h.update(mcfg.hash());
    h.update(format!("seed={};{tcfg:?}\n", mcfg.seed));
    h.update(vocab.to_file_string());
    for (label, set) in [("train", train_set), ("dev", dev_set)] {
        h.update(label);
        for ex in set {
            h.update(format!("{:?}|{:?}\n", ex.source, ex.target));
        }
    }
    hex::encode(h.finalize())
}

fn try_resume(dir: &Path, key: &str, epochs: usize) -> Option<Vec<Checkpoint>> {
    let stored = std::fs::read_to_string(dir.join("run.key")).ok()?;
    if stored.trim() != key {
        return None;
    }
    (0..=epochs)
        .map(|e| Checkpoint::load(&checkpoint_path(dir, e)).ok())
        .collect()
}

/// Drops pairs that do not fit the model's position table.
fn fitting(examples: Vec<Example>, max_len: usize, what: &str) -> Vec<Example> {
    let before = examples.len();
    let kept: Vec<Example> = examples
        .into_iter()
        .filter(|e| e.source.len() <= max_len && e.target.len() < max_len)
        .collect();
    if kept.len() < before {
        log::warn!(
            "{what}: dropped {} pairs longer than max_len {max_len}",
            before - kept.len()
        );
    }
    kept
}

/// Trains on `train_split` with `model.seed` (`vocab_size` comes from
/// `vocab`), keeps every epoch checkpoint plus `run.key`
/// under `dir`, and returns the k-best average by dev loss. A previous run
/// in `dir` with the same key is reused unless `force` is set.
pub fn train_and_average(
    dir: &Path,
    vocab: &BpeVocab,
    train_split: &ParallelCorpus,
    dev_split: &ParallelCorpus,
    model: &ModelConfig,
    training: &TrainConfig,
    force: bool,
) -> Result<ModelParams, HarnessError> {
    let mcfg = ModelConfig {
        vocab_size: vocab.len(),
        ..model.clone()
    };
    let train_set = fitting(examples(vocab, train_split), mcfg.max_len, "train");
    let dev_set = fitting(examples(vocab, dev_split), mcfg.max_len, "dev");
    let key = run_key(&mcfg, training, vocab, &train_set, &dev_set);
    let resumed = if force {
        None
    } else {
        try_resume(dir, &key, training.epochs)
    };
    let checkpoints = match resumed {
        Some(cps) => {
            log::info!("{}: reusing {} checkpoints", dir.display(), cps.len());
            cps
        }
        None => {
            log::info!("{}: training on {} pairs", dir.display(), train_set.len());
            let _ = std::fs::remove_file(dir.join("run.key"));
            let TrainOutcome { checkpoints, log } = train(&train_set, &dev_set, &mcfg, training)?;
            for c in &checkpoints {
                c.save(&checkpoint_path(dir, c.epoch))?;
            }
            let outcome = TrainOutcome {
                checkpoints: vec![],
                log,
            };
            write(&dir.join("train_log.csv"), &outcome.log_csv())?;
            write(&dir.join("run.key"), &format!("{key}\n"))?;
            checkpoints
        }
    };
    let k = training.avg_top_k.min(checkpoints.len());
    let params = average_checkpoints(&checkpoints, k)?;
    let last = checkpoints
        .last()
        .expect("initial checkpoint always present");
    let averaged_dev = eval_loss(&params, &dev_set, training.label_smoothing)?;
    Checkpoint::new(params.clone(), last.epoch, last.step, averaged_dev)
        .save(&dir.join("checkpoints/averaged.ckpt"))?;
    Ok(params)
}

fn run_variant(
    spec: &ExperimentSpec,
    variant: Variant,
    data: &SplitCorpora,
) -> Result<VariantScores, HarnessError> {
    let dir = variant_dir(&spec.output_dir, variant);
    for c in data.iter() {
        let name = c.split.name();
        let d = dir.join("data");
        c.write(
            &d.join(format!("{name}.src")),
            &d.join(format!("{name}.tgt")),
            Some(&d.join(format!("{name}.ids"))),
        )?;
    }
    let vocab = train_vocab(&data.train, spec.bpe_size)?;
    let vocab_path = dir.join("vocab.txt");
    write(&vocab_path, &vocab.to_file_string())?;

    let model = ModelConfig {
        seed: spec.seed,
        ..spec.model.clone()
    };
    let params = train_and_average(
        &dir,
        &vocab,
        &data.train,
        &data.dev,
        &model,
        &spec.training,
        spec.force,
    )?;

    let mut scores = Vec::new();
    let mut summary = String::new();
    for corpus in [&data.dev, &data.test] {
        let name = corpus.split.name();
        log::info!("{variant}: decoding {name} ({} pairs)", corpus.len());
        let rows = translate_corpus(&params, &vocab, corpus, &spec.beam, None)?;
        write(&dir.join(format!("{name}.hyp")), &render_text(&rows))?;
        write(&dir.join(format!("{name}.tsv")), &render_tsv(&rows))?;
        let hyps: Vec<&str> = rows.iter().map(|(_, t)| t.as_str()).collect();
        let refs: Vec<&str> = corpus.targets().collect();
        let bleu = corpus_bleu(&hyps, &refs, Smoothing::Exp)?;
        let _ = writeln!(summary, "{name}: {}", bleu.summary());
        scores.push(bleu);
    }
    let _ = writeln!(summary, "signature: {}", signature(Smoothing::Exp));
    write(&dir.join("scores.txt"), &summary)?;
    let test = scores.pop().expect("two splits");
    let dev = scores.pop().expect("two splits");
    Ok(VariantScores { dev, test })
}

/// Runs every requested variant. Input problems abort the run; a failure
/// inside one variant is recorded in its row and the others still run.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultsTable, HarnessError> {
    if spec.variants.is_empty() {
        return Err(HarnessError::NoVariants);
    }
    // vocab_size is taken from each variant's vocabulary.
    ModelConfig {
        vocab_size: 1,
        ..spec.model.clone()
    }
    .validate()?;
    spec.training.validate()?;
    spec.beam.validate()?;
    let corpora = SplitCorpora::load(spec)?;
    let needs_scores = spec.variants.iter().any(|v| v.dimension().is_some());
    let scores = match (&spec.scores, needs_scores) {
        (Some(path), true) => Some(load_scores(path)?),
        _ => None,
    };
    let prepared = prepare_variants(&corpora, scores.as_ref(), &spec.variants)?;
    let mut rows = Vec::new();
    for v in Variant::ALL
        .into_iter()
        .filter(|v| spec.variants.contains(v))
    {
        let outcome = run_variant(spec, v, &prepared[&v]).map_err(|e| {
            log::error!("{v}: {e}");
            e.to_string()
        });
        rows.push(VariantRow {
            variant: v,
            outcome,
        });
    }
    let table = ResultsTable { rows };
    write(&spec.output_dir.join("report.txt"), &table.render_text())?;
    write(&spec.output_dir.join("report.csv"), &table.render_csv())?;
    Ok(table)
}

/// Per-split, per-dimension summaries. `splits` pairs a split label with the
/// utterance IDs it contains; with no splits every scored utterance forms
/// one split named `all`.
pub fn stats_report(
    scores: &ScoreMap,
    splits: &[(String, Vec<UtteranceId>)],
) -> Result<Vec<DistributionStats>, HarnessError> {
    let all = [(
        "all".to_string(),
        scores.keys().cloned().collect::<Vec<_>>(),
    )];
    let splits = if splits.is_empty() { &all[..] } else { splits };
    let mut rows = Vec::new();
    for (name, ids) in splits {
        let missing: Vec<UtteranceId> = ids
            .iter()
            .filter(|id| !scores.contains_key(*id))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(HarnessError::MissingScore(missing));
        }
        for dim in Dimension::ALL {
            let values: Vec<f64> = ids.iter().map(|id| scores[id].get(dim)).collect();
            rows.push(distribution_stats(&values, dim, name)?);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ParallelPair;
    use crate::emotion::EmotionScores;

    fn id(i: usize) -> UtteranceId {
        UtteranceId::from_index(i)
    }

    fn corpus(split: Split, offset: usize) -> ParallelCorpus {
        let pairs = (0..3)
            .map(|i| {
                ParallelPair::new(id(offset + i), "I am quite foolish", "Je suis toute sotte")
                    .unwrap()
            })
            .collect();
        ParallelCorpus::new(split, pairs).unwrap()
    }

    fn corpora() -> SplitCorpora {
        SplitCorpora {
            train: corpus(Split::Train, 0),
            dev: corpus(Split::Dev, 3),
            test: corpus(Split::Test, 6),
        }
    }

    fn scores(n: usize) -> ScoreMap {
        (0..n)
            .map(|i| {
                let v = if i % 2 == 0 { 0.2 } else { 0.8 };
                (id(i), EmotionScores::new(id(i), v, v, v).unwrap())
            })
            .collect()
    }

    #[test]
    fn variants_parse() {
        assert_eq!("Arousal".parse::<Variant>().unwrap(), Variant::Arousal);
        assert!("joy".parse::<Variant>().is_err());
    }

    #[test]
    fn prepared_variants() {
        let c = corpora();
        let s = scores(9);
        let out = prepare_variants(&c, Some(&s), &Variant::ALL).unwrap();
        assert_eq!(out[&Variant::Baseline], c);
        let val = &out[&Variant::Valence];
        assert_eq!(val.train.pairs[0].source, "<ValNeg> I am quite foolish");
        assert_eq!(val.train.pairs[1].source, "<ValPos> I am quite foolish");
        for v in out.values() {
            for (a, b) in v.iter().zip(c.iter()) {
                assert_eq!(a.target_text(), b.target_text());
            }
        }
    }

    #[test]
    fn baseline_needs_no_scores_and_tagged_does() {
        let c = corpora();
        assert!(prepare_variants(&c, None, &[Variant::Baseline]).is_ok());
        assert!(matches!(
            prepare_variants(&c, None, &[Variant::Arousal]),
            Err(HarnessError::MissingScoreFile(Variant::Arousal))
        ));
        match prepare_variants(&c, Some(&scores(7)), &[Variant::Arousal]) {
            Err(HarnessError::MissingScore(ids)) => assert_eq!(ids, [id(7), id(8)]),
            other => panic!("{other:?}"),
        }
    }

    fn bleu(score: f64) -> BleuBreakdown {
        BleuBreakdown {
            score,
            precisions: [0.5; 4],
            brevity_penalty: 1.0,
            hyp_len: 1,
            ref_len: 1,
            matches: [1; 4],
            totals: [2; 4],
            smoothing: Smoothing::Exp,
        }
    }

    #[test]
    fn table_rendering() {
        let only_base = ResultsTable {
            rows: vec![VariantRow {
                variant: Variant::Baseline,
                outcome: Ok(VariantScores {
                    dev: bleu(20.1),
                    test: bleu(18.2),
                }),
            }],
        };
        let text = only_base.render_text();
        assert!(!text.contains("delta"));
        assert!(
            text.starts_with("variant   dev    test\nbaseline  20.10  18.20\n"),
            "{text}"
        );
        let mut full = only_base.clone();
        full.rows.push(VariantRow {
            variant: Variant::Arousal,
            outcome: Ok(VariantScores {
                dev: bleu(19.0),
                test: bleu(18.6),
            }),
        });
        full.rows.push(VariantRow {
            variant: Variant::Valence,
            outcome: Err("boom".into()),
        });
        let csv = full.render_csv();
        assert_eq!(
            csv,
            "variant,dev_bleu,test_bleu,delta_dev,delta_test,status\n\
             baseline,20.1000,18.2000,,,ok\n\
             arousal,19.0000,18.6000,-1.1000,0.4000,ok\n\
             valence,,,,,failed\n"
        );
        assert!(full
            .render_text()
            .contains("arousal   19.00  18.60  -1.10      +0.40"));
        assert!(full.render_text().contains("valence  FAILED: boom"));
        assert_eq!(full.digest(), full.clone().digest());
    }

    #[test]
    fn stats_over_grid() {
        let map: ScoreMap = (1..=9)
            .map(|i| {
                let v = i as f64 / 10.0;
                (id(i), EmotionScores::new(id(i), v, 0.3, v).unwrap())
            })
            .collect();
        let rows = stats_report(&map, &[]).unwrap();
        assert_eq!(rows.len(), 3);
        assert!((rows[0].median - 0.5).abs() < 1e-12);
        assert_eq!((rows[1].q1, rows[1].median, rows[1].q3), (0.3, 0.3, 0.3));
        let err = stats_report(&map, &[("dev".into(), vec![id(42)])]).unwrap_err();
        assert!(matches!(err, HarnessError::MissingScore(_)));
    }
}
