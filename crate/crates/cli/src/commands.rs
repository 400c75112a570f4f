use std::collections::HashMap;
use std::path::Path;

use emonmt_core::corpus::{
    load_corpus, normalize_text, read_lines, ParallelCorpus, Split, UtteranceId,
};
use emonmt_core::decode::{render_text, render_tsv, translate_line};
use emonmt_core::emotion::{
    bin_emotion, ccc, load_scores, render_stats_csv, render_stats_table, Dimension, EmotionToken,
};
use emonmt_core::harness::{
    prepare_variants, run_experiment, stats_report, train_and_average, ExperimentSpec,
    HarnessError, SplitCorpora, SplitPaths,
};
use emonmt_core::metrics::{corpus_bleu, Smoothing};
use emonmt_core::model::Checkpoint;
use emonmt_core::tokenizer::{self, BpeVocab};

use crate::args::{
    BpeTrainArgs, ExperimentArgs, Format, PrepareArgs, ScoreBleuArgs, ScoreCccArgs, SmoothingArg,
    StatsArgs, TrainArgs, TranslateArgs,
};
use crate::error::CliError;

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::Data(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(fail)?;
    }
    std::fs::write(path, contents).map_err(fail)
}

fn load_split(paths: &SplitPaths, split: Split) -> Result<ParallelCorpus, CliError> {
    Ok(load_corpus(
        &paths.source,
        &paths.target,
        paths.ids.as_deref(),
        split,
    )?)
}

fn read_ids(path: &Path) -> Result<Vec<UtteranceId>, CliError> {
    read_lines(path)?
        .iter()
        .map(|line| UtteranceId::new(line.trim()).map_err(CliError::from))
        .collect()
}

pub fn stats(args: &StatsArgs) -> Result<String, CliError> {
    let scores = load_scores(&args.scores)?;
    let mut splits = Vec::new();
    for spec in &args.splits {
        let (name, file) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--split expects NAME=FILE, got {spec:?}")))?;
        splits.push((name.to_string(), read_ids(Path::new(file))?));
    }
    let rows = stats_report(&scores, &splits)?;
    Ok(match args.format {
        Format::Text => render_stats_table(&rows),
        Format::Csv => render_stats_csv(&rows),
    })
}

pub fn bpe_train(args: &BpeTrainArgs) -> Result<String, CliError> {
    let mut lines = Vec::new();
    for path in &args.input {
        lines.extend(read_lines(path)?);
    }
    let extras: Vec<&str> = EmotionToken::surfaces().collect();
    let vocab = tokenizer::train(lines.iter().map(String::as_str), args.size, &extras)?;
    write_file(&args.out, &vocab.to_file_string())?;
    Ok(format!(
        "{}: {} entries, {} merges\n",
        args.out.display(),
        vocab.len(),
        vocab.merges().len()
    ))
}

pub fn prepare(args: &PrepareArgs) -> Result<String, CliError> {
    let corpora = SplitCorpora {
        train: load_split(&args.splits.train(), Split::Train)?,
        dev: load_split(&args.splits.dev(), Split::Dev)?,
        test: load_split(&args.test.test(), Split::Test)?,
    };
    let scores = args.scores.as_deref().map(load_scores).transpose()?;
    let mut prepared = prepare_variants(&corpora, scores.as_ref(), &[args.variant])?;
    let data = prepared
        .remove(&args.variant)
        .expect("requested variant is prepared");
    let mut report = String::new();
    for corpus in data.iter() {
        let name = corpus.split.name();
        let path = |ext: &str| args.out_dir.join(format!("{name}.{ext}"));
        write_file(&path("src"), &corpus.source_text())?;
        write_file(&path("tgt"), &corpus.target_text())?;
        write_file(&path("ids"), &corpus.id_text())?;
        report.push_str(&format!("{name}: {} pairs\n", corpus.len()));
    }
    Ok(report)
}

pub fn train(args: &TrainArgs) -> Result<String, CliError> {
    let train_split = load_split(&args.splits.train(), Split::Train)?;
    let dev_split = load_split(&args.splits.dev(), Split::Dev)?;
    let vocab = BpeVocab::load(&args.vocab)?;
    let model = args.model.config(args.seed);
    model.validate().map_err(HarnessError::from)?;
    let training = args.optim.config();
    training.validate().map_err(HarnessError::from)?;
    train_and_average(
        &args.out_dir,
        &vocab,
        &train_split,
        &dev_split,
        &model,
        &training,
        args.force,
    )?;
    Ok(format!(
        "{}\n",
        args.out_dir
            .join("checkpoints")
            .join("averaged.ckpt")
            .display()
    ))
}

pub fn translate(args: &TranslateArgs) -> Result<String, CliError> {
    let params = Checkpoint::load(&args.checkpoint)?.params;
    let vocab = BpeVocab::load(&args.vocab)?;
    if vocab.len() != params.config.vocab_size {
        return Err(CliError::Data(format!(
            "vocabulary has {} entries but the checkpoint expects {}",
            vocab.len(),
            params.config.vocab_size
        )));
    }
    let sources: Vec<String> = read_lines(&args.source)?
        .iter()
        .map(|l| normalize_text(l))
        .collect();
    let ids = match &args.ids {
        Some(path) => read_ids(path)?,
        None => (0..sources.len()).map(UtteranceId::from_index).collect(),
    };
    if ids.len() != sources.len() {
        return Err(CliError::Data(format!(
            "{} IDs for {} source lines",
            ids.len(),
            sources.len()
        )));
    }
    let tokens: Option<HashMap<&UtteranceId, EmotionToken>> = match (&args.scores, args.dimension) {
        (Some(path), Some(dim)) => {
            let scores = load_scores(path)?;
            let missing: Vec<UtteranceId> = ids
                .iter()
                .filter(|id| !scores.contains_key(*id))
                .cloned()
                .collect();
            if !missing.is_empty() {
                return Err(HarnessError::MissingScore(missing).into());
            }
            Some(
                ids.iter()
                    .map(|id| (id, bin_emotion(&scores[id], dim)))
                    .collect(),
            )
        }
        _ => None,
    };
    let beam = args.beam.config();
    let mut rows = Vec::with_capacity(sources.len());
    for (id, source) in ids.iter().zip(&sources) {
        let tagged = match &tokens {
            Some(map) => format!("{} {source}", map[id].surface()),
            None => source.clone(),
        };
        rows.push((id.clone(), translate_line(&params, &vocab, &tagged, &beam)?));
    }
    let text = if args.tsv {
        render_tsv(&rows)
    } else {
        render_text(&rows)
    };
    write_file(&args.out, &text)?;
    Ok(format!(
        "{}: {} translations\n",
        args.out.display(),
        rows.len()
    ))
}

pub fn score_bleu(args: &ScoreBleuArgs) -> Result<String, CliError> {
    let hyps = read_lines(&args.hyp)?;
    let refs = read_lines(&args.reference)?;
    let smoothing = match args.smoothing {
        SmoothingArg::Exp => Smoothing::Exp,
        SmoothingArg::None => Smoothing::None,
    };
    let bleu = corpus_bleu(&hyps, &refs, smoothing)?;
    Ok(format!(
        "{}\nsignature: {}\n",
        bleu.summary(),
        bleu.signature()
    ))
}

pub fn score_ccc(args: &ScoreCccArgs) -> Result<String, CliError> {
    let pred = load_scores(&args.pred)?;
    let gold = load_scores(&args.gold)?;
    let missing: Vec<UtteranceId> = gold
        .keys()
        .filter(|id| !pred.contains_key(*id))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(HarnessError::MissingScore(missing).into());
    }
    let mut out = String::new();
    for dim in Dimension::ALL {
        let g: Vec<f64> = gold.values().map(|s| s.get(dim)).collect();
        let p: Vec<f64> = gold.keys().map(|id| pred[id].get(dim)).collect();
        let value = ccc(&p, &g).map_err(|e| CliError::Data(format!("{dim}: {e}")))?;
        out.push_str(&format!("{dim}\t{value:.4}\n"));
    }
    Ok(out)
}

pub fn experiment(args: &ExperimentArgs) -> Result<String, CliError> {
    let spec = ExperimentSpec {
        train: args.splits.train(),
        dev: args.splits.dev(),
        test: args.test.test(),
        scores: args.scores.clone(),
        variants: args.variants.clone(),
        model: args.model.config(args.seed),
        training: args.optim.config(),
        beam: args.beam.config(),
        bpe_size: args.bpe_size,
        output_dir: args.out_dir.clone(),
        seed: args.seed,
        force: args.force,
    };
    let table = run_experiment(&spec)?;
    let report = table.render_text();
    let failed = table.rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        print!("{report}");
        return Err(CliError::Training(format!(
            "{failed} of {} variants failed; see {}",
            table.rows.len(),
            args.out_dir.join("report.txt").display()
        )));
    }
    Ok(report)
}
