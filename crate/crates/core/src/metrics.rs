//! Corpus BLEU with mteval-13a tokenization, compatible with SacreBLEU's
//! default configuration (single reference, mixed case, exponential
//! smoothing of zero-count orders, no effective order).

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum BleuError {
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch {
        hypotheses: usize,
        references: usize,
    },
    #[error("corpus is empty")]
    EmptyCorpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Smoothing {
    /// Each successive zero-match order gets precision `1 / (2^k * total)`.
    #[default]
    Exp,
    None,
}

impl Smoothing {
    pub fn name(self) -> &'static str {
        match self {
            Smoothing::Exp => "exp",
            Smoothing::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuBreakdown {
    /// In `[0, 100]`.
    pub score: f64,
    /// Per-order precisions in `[0, 1]`, after smoothing.
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub smoothing: Smoothing,
}

impl BleuBreakdown {
    pub fn signature(&self) -> String {
        signature(self.smoothing)
    }

    /// One-line summary in the same layout SacreBLEU prints.
    pub fn summary(&self) -> String {
        let p: Vec<String> = self
            .precisions
            .iter()
            .map(|p| format!("{:.1}", 100.0 * p))
            .collect();
        let ratio = if self.ref_len == 0 {
            0.0
        } else {
            self.hyp_len as f64 / self.ref_len as f64
        };
        format!(
            "BLEU = {:.2} {} (BP = {:.3} ratio = {:.3} hyp_len = {} ref_len = {})",
            self.score,
            p.join("/"),
            self.brevity_penalty,
            ratio,
            self.hyp_len,
            self.ref_len
        )
    }
}

pub fn signature(smoothing: Smoothing) -> String {
    format!(
        "nrefs:1|case:mixed|eff:no|tok:13a|smooth:{}|version:emonmt-{}",
        smoothing.name(),
        env!("CARGO_PKG_VERSION")
    )
}

static PUNCT_SYMBOLS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([\{-~\[-` -&\(-\+:-@/])").unwrap());
static PERIOD_COMMA_UNLESS_PRECEDED_BY_DIGIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([^0-9])([\.,])").unwrap());
static PERIOD_COMMA_UNLESS_FOLLOWED_BY_DIGIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([\.,])([^0-9])").unwrap());
static DASH_AFTER_DIGIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([0-9])(-)").unwrap());

/// mteval-v13a tokenization.
pub fn bleu_tokenize(text: &str) -> Vec<String> {
    let mut line = text
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let line = format!(" {line} ");
    let line = PUNCT_SYMBOLS.replace_all(&line, " $1 ");
    let line = PERIOD_COMMA_UNLESS_PRECEDED_BY_DIGIT.replace_all(&line, "$1 $2 ");
    let line = PERIOD_COMMA_UNLESS_FOLLOWED_BY_DIGIT.replace_all(&line, " $1 $2");
    let line = DASH_AFTER_DIGIT.replace_all(&line, "$1 $2 ");
    line.split_whitespace().map(str::to_string).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct SentenceStats {
    hyp_len: usize,
    ref_len: usize,
    matches: [usize; MAX_ORDER],
    totals: [usize; MAX_ORDER],
}

fn sentence_stats(hyp: &str, reference: &str) -> SentenceStats {
    // SacreBLEU strips trailing whitespace before tokenizing.
    let h = bleu_tokenize(hyp.trim_end());
    let r = bleu_tokenize(reference.trim_end());
    let mut stats = SentenceStats {
        hyp_len: h.len(),
        ref_len: r.len(),
        ..Default::default()
    };
    for n in 1..=MAX_ORDER {
        let hyp_ngrams = ngram_counts(&h, n);
        let ref_ngrams = ngram_counts(&r, n);
        for (gram, &count) in &hyp_ngrams {
            stats.totals[n - 1] += count;
            if let Some(&rc) = ref_ngrams.get(gram) {
                stats.matches[n - 1] += count.min(rc);
            }
        }
    }
    stats
}

pub fn corpus_bleu<H, R>(
    hypotheses: &[H],
    references: &[R],
    smoothing: Smoothing,
) -> Result<BleuBreakdown, BleuError>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    if hypotheses.len() != references.len() {
        return Err(BleuError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(BleuError::EmptyCorpus);
    }
    let mut total = SentenceStats::default();
    for (h, r) in hypotheses.iter().zip(references) {
        let s = sentence_stats(h.as_ref(), r.as_ref());
        total.hyp_len += s.hyp_len;
        total.ref_len += s.ref_len;
        for n in 0..MAX_ORDER {
            total.matches[n] += s.matches[n];
            total.totals[n] += s.totals[n];
        }
    }
    Ok(score_from_stats(&total, smoothing))
}

fn score_from_stats(stats: &SentenceStats, smoothing: Smoothing) -> BleuBreakdown {
    let brevity_penalty = if stats.hyp_len < stats.ref_len {
        if stats.hyp_len > 0 {
            (1.0 - stats.ref_len as f64 / stats.hyp_len as f64).exp()
        } else {
            0.0
        }
    } else {
        1.0
    };
    let mut out = BleuBreakdown {
        score: 0.0,
        precisions: [0.0; MAX_ORDER],
        brevity_penalty,
        hyp_len: stats.hyp_len,
        ref_len: stats.ref_len,
        matches: stats.matches,
        totals: stats.totals,
        smoothing,
    };
    if stats.matches.iter().all(|&m| m == 0) {
        return out;
    }
    let mut smooth_denominator = 1.0;
    for n in 0..MAX_ORDER {
        let (m, t) = (stats.matches[n], stats.totals[n]);
        if t == 0 {
            break;
        }
        out.precisions[n] = if m > 0 {
            m as f64 / t as f64
        } else if smoothing == Smoothing::Exp {
            smooth_denominator *= 2.0;
            1.0 / (smooth_denominator * t as f64)
        } else {
            0.0
        };
    }
    if out.precisions.contains(&0.0) {
        return out;
    }
    let log_mean = out.precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
    out.score = 100.0 * brevity_penalty * log_mean.exp();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        bleu_tokenize(s)
    }

    #[test]
    fn tokenizer_examples() {
        // Expected strings produced by sacrebleu 2.6.0's Tokenizer13a.
        assert_eq!(toks("Hello, world!"), ["Hello", ",", "world", "!"]);
        assert_eq!(toks("abc"), ["abc"]);
        assert!(toks("").is_empty());
        assert_eq!(
            toks("3.14 and 1,000 dollars - e.g. (x) \"q\" a&amp;b 10-20 end.").join(" "),
            "3.14 and 1,000 dollars - e . g . ( x ) \" q \" a & b 10 - 20 end ."
        );
        assert_eq!(toks("l'homme"), ["l'homme"]);
    }

    #[test]
    fn tokenizer_idempotent_on_tokenized_text() {
        for s in ["Hello , world !", "e . g . ( x )", "10 - 20 end ."] {
            assert_eq!(toks(s).join(" "), s);
        }
    }

    #[test]
    fn reference_scorer_fixture() {
        // sacrebleu 2.6.0 corpus_score, default BLEU():
        // BLEU = 29.20 76.0/36.4/21.1/12.5 (BP = 1.000 ratio = 1.000 hyp_len = 25 ref_len = 25)
        let hyps = [
            "The cat sat on the mat.",
            "Hello, world! It is a sunny day.",
            "I am quite foolish, said she.",
        ];
        let refs = [
            "The cat is sitting on the mat.",
            "Hello world, it is a sunny day!",
            "She said: I am very foolish.",
        ];
        let b = corpus_bleu(&hyps, &refs, Smoothing::Exp).unwrap();
        assert_eq!(b.matches, [19, 8, 4, 2]);
        assert_eq!(b.totals, [25, 22, 19, 16]);
        assert_eq!(format!("{:.2}", b.score), "29.20");
        assert!((b.score - 29.202788658318944).abs() < 1e-9);
        assert_eq!(b.brevity_penalty, 1.0);
    }

    #[test]
    fn brevity_and_smoothing_fixture() {
        // sacrebleu 2.6.0: score 26.024496358313375, BP 0.5737534207374327,
        // counts [8, 5, 2, 0], totals [9, 7, 5, 3]; smooth_method='none' gives 0.0.
        let hyps = ["le chat noir mange", "il fait beau aujourd hui"];
        let refs = [
            "le chat noir dort ici ce soir",
            "il fait très beau aujourd hui matin",
        ];
        let b = corpus_bleu(&hyps, &refs, Smoothing::Exp).unwrap();
        assert_eq!((b.hyp_len, b.ref_len), (9, 14));
        assert!((b.brevity_penalty - 0.5737534207374327).abs() < 1e-12);
        assert!((b.score - 26.024496358313375).abs() < 1e-9);
        assert!((b.precisions[3] - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(
            corpus_bleu(&hyps, &refs, Smoothing::None).unwrap().score,
            0.0
        );
    }

    #[test]
    fn missing_order_scores_zero() {
        // sacrebleu 2.6.0: 0.0 with precisions [40, 33.3, 50, 0] (no 4-grams at all).
        let b = corpus_bleu(
            &["le chat", "un deux trois"],
            &["le chat noir dort ici", "quatre cinq six sept"],
            Smoothing::Exp,
        )
        .unwrap();
        assert_eq!(b.score, 0.0);
        assert_eq!(b.totals, [5, 3, 1, 0]);
        assert!((b.precisions[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_disjoint() {
        let h = ["a b c d e", "the cat sat on the mat ."];
        let b = corpus_bleu(&h, &h, Smoothing::Exp).unwrap();
        assert_eq!(b.score, 100.0);
        assert_eq!(b.brevity_penalty, 1.0);
        assert_eq!(b.precisions, [1.0; 4]);
        let z = corpus_bleu(&["x y z w"], &["a b c d"], Smoothing::None).unwrap();
        assert_eq!(z.score, 0.0);
        assert_eq!(z.precisions[0], 0.0);
    }

    #[test]
    fn errors() {
        assert_eq!(
            corpus_bleu(&["a"], &["a", "b"], Smoothing::Exp),
            Err(BleuError::LengthMismatch {
                hypotheses: 1,
                references: 2
            })
        );
        let empty: [&str; 0] = [];
        assert_eq!(
            corpus_bleu(&empty, &empty, Smoothing::Exp),
            Err(BleuError::EmptyCorpus)
        );
    }

    #[test]
    fn signature_line() {
        assert!(signature(Smoothing::Exp)
            .starts_with("nrefs:1|case:mixed|eff:no|tok:13a|smooth:exp|version:"));
    }

    fn sentence() -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop::sample::select(vec!["le", "chat", "noir", "dort", "ici", ",", "."]),
            1..10,
        )
        .prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn self_bleu_is_100(corpus in prop::collection::vec("[a-zA-Z]{1,6}( [a-zA-Z,.!]{1,6}){3,8}", 1..6)) {
            let b = corpus_bleu(&corpus, &corpus, Smoothing::Exp).unwrap();
            prop_assert_eq!(b.score, 100.0);
        }

        #[test]
        fn bounded_and_order_free(pairs in prop::collection::vec((sentence(), sentence()), 1..8), rot in 0usize..8) {
            let (h, r): (Vec<String>, Vec<String>) = pairs.iter().cloned().unzip();
            let b = corpus_bleu(&h, &r, Smoothing::Exp).unwrap();
            prop_assert!((0.0..=100.0).contains(&b.score));
            prop_assert!(b.precisions.iter().all(|p| (0.0..=1.0).contains(p)));
            let k = rot % pairs.len();
            let mut rotated = pairs.clone();
            rotated.rotate_left(k);
            let (h2, r2): (Vec<String>, Vec<String>) = rotated.into_iter().unzip();
            prop_assert_eq!(corpus_bleu(&h2, &r2, Smoothing::Exp).unwrap(), b);
        }

        #[test]
        fn shortening_never_raises_brevity_penalty(words in prop::collection::vec("[a-z]{1,5}", 2..12), cut in 1usize..6) {
            let reference = words.join(" ");
            let keep = words.len().saturating_sub(cut).max(1);
            let shorter = words[..keep].join(" ");
            let full = corpus_bleu(&[&reference], &[&reference], Smoothing::Exp).unwrap();
            let short = corpus_bleu(&[&shorter], &[&reference], Smoothing::Exp).unwrap();
            prop_assert!(short.brevity_penalty <= full.brevity_penalty);
        }
    }
}
