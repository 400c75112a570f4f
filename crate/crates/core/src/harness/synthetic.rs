//! Generated English-to-French-like corpus in which some verbs have two
//! translations and the arousal score alone decides between them. Without
//! the arousal token the choice is unpredictable; with it, deterministic.

use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ExperimentSpec, HarnessError, SplitCorpora, SplitPaths, Variant};
use crate::corpus::{ParallelCorpus, ParallelPair, Split, UtteranceId};
use crate::decode::BeamConfig;
use crate::emotion::{write_scores, EmotionScores, ScoreMap, POLARITY_THRESHOLD};
use crate::model::{ModelConfig, TrainConfig};

const SUBJECTS: [(&str, &str); 8] = [
    ("the child", "l enfant"),
    ("my sister", "ma soeur"),
    ("the old man", "le vieil homme"),
    ("his friend", "son ami"),
    ("the teacher", "le professeur"),
    ("our neighbour", "notre voisin"),
    ("the girl", "la fille"),
    ("a soldier", "un soldat"),
];

/// `(source, low-arousal translation, high-arousal translation)`.
const AMBIGUOUS_VERBS: [(&str, &str, &str); 5] = [
    ("cried", "pleura", "hurla"),
    ("spoke", "murmura", "cria"),
    ("left", "partit", "fuit"),
    ("looked", "regarda", "fixa"),
    ("moved", "bougea", "bondit"),
];

const PLAIN_VERBS: [(&str, &str); 4] = [
    ("slept", "dormit"),
    ("ate", "mangea"),
    ("waited", "attendit"),
    ("sang", "chanta"),
];

const ADJUNCTS: [(&str, &str); 7] = [
    ("at home", "a la maison"),
    ("in the garden", "dans le jardin"),
    ("this morning", "ce matin"),
    ("near the river", "pres de la riviere"),
    ("again", "encore"),
    ("in silence", "en silence"),
    ("at night", "la nuit"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    /// Share of sentences built around an ambiguous verb.
    pub ambiguous_share: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            train: 2000,
            dev: 200,
            test: 200,
            ambiguous_share: 0.8,
            seed: 0,
        }
    }
}

/// The two translations of an ambiguous verb; `expected` is the one its
/// arousal score selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ambiguity {
    pub expected: &'static str,
    pub rejected: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticItem {
    pub pair: ParallelPair,
    pub scores: EmotionScores,
    pub ambiguity: Option<Ambiguity>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub train: Vec<SyntheticItem>,
    pub dev: Vec<SyntheticItem>,
    pub test: Vec<SyntheticItem>,
}

fn generate_split(rng: &mut ChaCha8Rng, prefix: &str, n: usize, share: f64) -> Vec<SyntheticItem> {
    let n_ambiguous = (n as f64 * share).round() as usize;
    // Exactly balanced arousal labels among the ambiguous items.
    let mut labels: Vec<bool> = (0..n_ambiguous).map(|i| i % 2 == 0).collect();
    labels.shuffle(rng);
    let mut kinds: Vec<Option<bool>> = labels
        .into_iter()
        .map(Some)
        .chain((n_ambiguous..n).map(|_| None))
        .collect();
    kinds.shuffle(rng);
    kinds
        .into_iter()
        .enumerate()
        .map(|(i, kind)| {
            let (s_src, s_tgt) = *SUBJECTS.choose(rng).expect("non-empty");
            let (a_src, a_tgt) = *ADJUNCTS.choose(rng).expect("non-empty");
            let high = kind.unwrap_or_else(|| rng.random_bool(0.5));
            let arousal = if high {
                rng.random_range(POLARITY_THRESHOLD..1.0)
            } else {
                rng.random_range(0.0..POLARITY_THRESHOLD)
            };
            let (v_src, v_tgt, ambiguity) = match kind {
                Some(high) => {
                    let (src, low_t, high_t) = *AMBIGUOUS_VERBS.choose(rng).expect("non-empty");
                    let (expected, rejected) = if high {
                        (high_t, low_t)
                    } else {
                        (low_t, high_t)
                    };
                    (src, expected, Some(Ambiguity { expected, rejected }))
                }
                None => {
                    let (src, tgt) = *PLAIN_VERBS.choose(rng).expect("non-empty");
                    (src, tgt, None)
                }
            };
            let id = UtteranceId::new(format!("{prefix}{i:04}")).expect("valid id");
            let scores = EmotionScores::new(id.clone(), arousal, rng.random(), rng.random())
                .expect("in range");
            let pair = ParallelPair::new(
                id,
                &format!("{s_src} {v_src} {a_src}"),
                &format!("{s_tgt} {v_tgt} {a_tgt}"),
            )
            .expect("non-empty");
            SyntheticItem {
                pair,
                scores,
                ambiguity,
            }
        })
        .collect()
}

impl SyntheticCorpus {
    pub fn generate(cfg: &SyntheticConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Self {
            train: generate_split(&mut rng, "tr", cfg.train, cfg.ambiguous_share),
            dev: generate_split(&mut rng, "dv", cfg.dev, cfg.ambiguous_share),
            test: generate_split(&mut rng, "ts", cfg.test, cfg.ambiguous_share),
        }
    }

    fn corpus(split: Split, items: &[SyntheticItem]) -> ParallelCorpus {
        ParallelCorpus::new(split, items.iter().map(|i| i.pair.clone()).collect())
            .expect("unique ids")
    }

    pub fn splits(&self) -> SplitCorpora {
        SplitCorpora {
            train: Self::corpus(Split::Train, &self.train),
            dev: Self::corpus(Split::Dev, &self.dev),
            test: Self::corpus(Split::Test, &self.test),
        }
    }

    pub fn score_map(&self) -> ScoreMap {
        self.train
            .iter()
            .chain(&self.dev)
            .chain(&self.test)
            .map(|i| (i.pair.id.clone(), i.scores.clone()))
            .collect()
    }

    /// Writes `{train,dev,test}.{src,tgt,ids}` and `scores.csv` into `dir`;
    /// returns the paths per split and the score file path.
    pub fn write(&self, dir: &Path) -> Result<([SplitPaths; 3], std::path::PathBuf), HarnessError> {
        let splits = self.splits();
        let paths = [&splits.train, &splits.dev, &splits.test].map(|c| {
            let name = c.split.name();
            SplitPaths {
                source: dir.join(format!("{name}.src")),
                target: dir.join(format!("{name}.tgt")),
                ids: Some(dir.join(format!("{name}.ids"))),
            }
        });
        for (c, p) in splits.iter().zip(&paths) {
            c.write(&p.source, &p.target, p.ids.as_deref())?;
        }
        let scores_path = dir.join("scores.csv");
        let map = self.score_map();
        write_scores(&scores_path, map.values())?;
        Ok((paths, scores_path))
    }
}

/// `(correct, ambiguous)` over the ambiguous items: a hypothesis is correct
/// when it contains the expected verb form as a word and not the rejected one.
pub fn disambiguation_accuracy<S: AsRef<str>>(
    items: &[SyntheticItem],
    hypotheses: &[S],
) -> (usize, usize) {
    let mut correct = 0;
    let mut total = 0;
    for (item, hyp) in items.iter().zip(hypotheses) {
        let Some(amb) = item.ambiguity else { continue };
        total += 1;
        let words: Vec<&str> = hyp.as_ref().split_whitespace().collect();
        if words.contains(&amb.expected) && !words.contains(&amb.rejected) {
            correct += 1;
        }
    }
    (correct, total)
}

/// Desk-scale model for the synthetic corpus.
pub fn toy_model_config() -> ModelConfig {
    ModelConfig {
        enc_layers: 2,
        dec_layers: 2,
        heads: 4,
        model_dim: 32,
        ff_dim: 64,
        dropout: 0.1,
        max_len: 32,
        vocab_size: 0,
        seed: 0,
    }
}

pub fn toy_train_config() -> TrainConfig {
    TrainConfig {
        warmup_steps: 200,
        batch_size: 32,
        epochs: 12,
        label_smoothing: 0.1,
        avg_top_k: 5,
        peak_scale: 1.0,
        clip_norm: Some(5.0),
    }
}

pub const TOY_BPE_SIZE: usize = 200;

/// Writes the corpus under `data_dir` and returns a spec training the given
/// variants with the toy configuration.
pub fn toy_spec(
    corpus: &SyntheticCorpus,
    data_dir: &Path,
    output_dir: &Path,
    variants: Vec<Variant>,
    seed: u64,
) -> Result<ExperimentSpec, HarnessError> {
    let ([train, dev, test], scores) = corpus.write(data_dir)?;
    Ok(ExperimentSpec {
        train,
        dev,
        test,
        scores: Some(scores),
        variants,
        model: toy_model_config(),
        training: toy_train_config(),
        beam: BeamConfig {
            beam_size: 4,
            max_len: 30,
            length_penalty: 0.6,
        },
        bpe_size: TOY_BPE_SIZE,
        output_dir: output_dir.to_path_buf(),
        seed,
        force: false,
    })
}
