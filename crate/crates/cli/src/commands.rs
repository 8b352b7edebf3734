use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use emopred_core::baselines::{
    nbow_features, svm_predict, svm_train, BaselineConfig, SparseVector, TfidfModel,
};
use emopred_core::data::{class_distribution, load_dataset, stratified_split, Dataset};
use emopred_core::embeddings::{
    build_vocab, load_embeddings, save_embeddings, train_sgns, SgnsConfig, Vocabulary, UNK_INDEX,
};
use emopred_core::eval::{compute_metrics, confusion, render_attention_html, Metrics};
use emopred_core::model::{
    load_checkpoint, predict as model_predict, save_checkpoint, AttentionVariant, ModelConfig,
    ModelParams,
};
use emopred_core::preprocess::{EmoticonLexicon, ProcessOptions, ProcessedText, TextProcessor};
use emopred_core::segment::{build_ngram_stats, NgramStats};
use emopred_core::train::{
    class_weights, fit, random_search, EncodedExample, SearchSpace, TrainConfig,
};

use crate::config::Resolver;
use crate::{
    BaselineArgs, EmbedArgs, EvalArgs, PredictArgs, PrepFlags, PreprocessArgs, SearchArgs,
    StatsArgs, TrainArgs,
};

const PREP_KEYS: &[&str] = &[
    "stats",
    "lexicon",
    "spell_correct",
    "max_edits",
    "no_segment_hashtags",
    "no_elongated",
];

/// Assembled preprocessing pipeline: processor options plus optional stats.
struct Prep {
    processor: TextProcessor,
    stats: Option<NgramStats>,
}

impl Prep {
    fn process(&self, line: &str) -> ProcessedText {
        self.processor.process(line, self.stats.as_ref())
    }
}

fn resolve_prep(r: &mut Resolver, flags: &PrepFlags) -> Result<Prep> {
    let stats_path: Option<PathBuf> = r
        .optional("stats", flags.stats.clone().map(display_path))?
        .map(PathBuf::from);
    let lexicon_path: Option<PathBuf> = r
        .optional("lexicon", flags.lexicon.clone().map(display_path))?
        .map(PathBuf::from);
    let spell_correct = r.flag("spell_correct", flags.spell_correct)?;
    let max_edits = r.value("max_edits", flags.max_edits, 1usize)?;
    let no_segment = r.flag("no_segment_hashtags", flags.no_segment_hashtags)?;
    let no_elongated = r.flag("no_elongated", flags.no_elongated)?;

    if !(1..=2).contains(&max_edits) {
        bail!("max_edits must be 1 or 2, got {}", max_edits);
    }
    let stats = stats_path
        .map(|p| NgramStats::load(&p).with_context(|| format!("loading stats {}", p.display())))
        .transpose()?;
    if spell_correct && stats.is_none() {
        bail!("--spell-correct needs --stats");
    }
    let opts = ProcessOptions {
        segment_hashtags: !no_segment,
        spell_correct,
        max_edits,
        collapse_elongated: !no_elongated,
        max_word_len: 20,
    };
    let mut processor = TextProcessor::new(opts);
    if let Some(path) = lexicon_path {
        processor = processor.with_lexicon(EmoticonLexicon::from_file(&path)?);
    }
    Ok(Prep { processor, stats })
}

fn display_path(p: PathBuf) -> String {
    p.display().to_string()
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

fn read_file_lines(path: &Path) -> Result<Vec<String>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn parse_ratios(raw: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| anyhow!("bad ratio {:?}: {}", p, e))
        })
        .collect::<Result<_>>()?;
    if parts.len() != 3 {
        bail!("expected three comma-separated ratios, got {:?}", raw);
    }
    Ok([parts[0], parts[1], parts[2]])
}

fn encode_examples(d: &Dataset, prep: &Prep, vocab: &Vocabulary) -> Vec<EncodedExample> {
    d.examples
        .iter()
        .map(|ex| {
            let processed = prep.process(&ex.text);
            let ids: Vec<usize> = processed
                .tokens
                .iter()
                .map(|t| vocab.id_or_unk(t))
                .collect();
            // An empty tweet still needs one step to classify.
            (if ids.is_empty() { vec![UNK_INDEX] } else { ids }, ex.label)
        })
        .collect()
}

fn write_metrics(out_dir: &Path, metrics: &Metrics, cm_tsv: &str) -> Result<()> {
    std::fs::write(out_dir.join("metrics.tsv"), metrics.to_tsv())?;
    std::fs::write(out_dir.join("metrics.json"), metrics.to_json()?)?;
    std::fs::write(out_dir.join("confusion.tsv"), cm_tsv)?;
    Ok(())
}

pub fn preprocess(args: PreprocessArgs) -> Result<()> {
    let mut r = Resolver::new(None, PREP_KEYS)?;
    let prep = resolve_prep(&mut r, &args.prep)?;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    for line in stdin.lock().lines() {
        let line = line.context("reading stdin")?;
        writeln!(out, "{}", prep.process(&line).line())?;
    }
    Ok(())
}

pub fn stats(args: StatsArgs) -> Result<()> {
    let lines = match &args.input {
        Some(path) => read_file_lines(path)?,
        None => {
            let stdin = std::io::stdin();
            stdin
                .lock()
                .lines()
                .collect::<std::io::Result<_>>()
                .context("reading stdin")?
        }
    };
    let stats = build_ngram_stats(&lines)?;
    stats.save(&args.output)?;
    eprintln!(
        "stats: {} tokens, {} distinct words -> {}",
        stats.total_tokens(),
        stats.vocab_size(),
        args.output.display()
    );
    Ok(())
}

const EMBED_KEYS: &[&str] = &[
    "corpus",
    "dim",
    "window",
    "negatives",
    "epochs",
    "min_count",
    "learning_rate",
    "final_learning_rate",
    "subsample",
    "seed",
];

pub fn embed(args: EmbedArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref(), EMBED_KEYS)?;
    let corpus_path = PathBuf::from(r.required("corpus", args.corpus.map(display_path))?);
    let cfg = SgnsConfig {
        dimension: r.value("dim", args.dim, 300)?,
        window: r.value("window", args.window, 5)?,
        negatives: r.value("negatives", args.negatives, 5)?,
        epochs: r.value("epochs", args.epochs, 5)?,
        initial_lr: r.value("learning_rate", args.learning_rate, 0.025)?,
        final_lr: r.value("final_learning_rate", args.final_learning_rate, 1e-4)?,
        seed: r.value("seed", args.seed, 1)?,
        subsample: r.optional("subsample", args.subsample)?,
    };
    let min_count = r.value("min_count", args.min_count, 20u64)?;

    ensure_out_dir(&args.out_dir)?;
    let corpus: Vec<Vec<String>> = read_file_lines(&corpus_path)?
        .iter()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect();
    let vocab = build_vocab(&corpus, min_count)?;
    let (matrix, losses) = train_sgns(&corpus, &vocab, &cfg)?;
    let out_path = args.out_dir.join("vectors.txt");
    save_embeddings(&matrix, &vocab, &out_path)?;
    r.write(&args.out_dir.join("run_config.txt"))?;
    eprintln!(
        "embed: vocabulary {} words, {} epochs, final avg loss {:.4} -> {}",
        vocab.len(),
        losses.len(),
        losses.last().copied().unwrap_or(f64::NAN),
        out_path.display()
    );
    Ok(())
}

const TRAIN_KEYS: &[&str] = &[
    "train_text",
    "train_labels",
    "val_text",
    "val_labels",
    "split",
    "classes",
    "embeddings",
    "min_count",
    "attention",
    "embed_dim",
    "hidden_size",
    "noise_sigma",
    "dropout_embed",
    "dropout_rnn",
    "batch_size",
    "max_epochs",
    "patience",
    "learning_rate",
    "clip_norm",
    "seed",
    "stats",
    "lexicon",
    "spell_correct",
    "max_edits",
    "no_segment_hashtags",
    "no_elongated",
];

pub fn train(args: TrainArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref(), TRAIN_KEYS)?;
    let train_text = PathBuf::from(r.required("train_text", args.train_text.map(display_path))?);
    let train_labels =
        PathBuf::from(r.required("train_labels", args.train_labels.map(display_path))?);
    let val_text = r
        .optional("val_text", args.val_text.map(display_path))?
        .map(PathBuf::from);
    let val_labels = r
        .optional("val_labels", args.val_labels.map(display_path))?
        .map(PathBuf::from);
    let split = r.value("split", args.split, "0.8,0.1,0.1".to_string())?;
    let classes = r.value("classes", args.classes, 20usize)?;
    let embeddings_path = r
        .optional("embeddings", args.embeddings.map(display_path))?
        .map(PathBuf::from);
    let min_count = r.value("min_count", args.min_count, 1u64)?;
    let seed = r.value("seed", args.seed, 1u64)?;
    let prep = resolve_prep(&mut r, &args.prep)?;

    let full_train = load_dataset(&train_text, &train_labels, classes)?;
    let (train_set, val_set) = match (&val_text, &val_labels) {
        (Some(t), Some(l)) => (full_train, load_dataset(t, l, classes)?),
        (None, None) => {
            let ratios = parse_ratios(&split)?;
            let (tr, va, _) = stratified_split(&full_train, ratios, seed)?;
            (tr, va)
        }
        _ => bail!("--val-text and --val-labels must be given together"),
    };

    // Vocabulary and embedding initialization.
    let pretrained = embeddings_path.map(load_embeddings).transpose()?;
    let default_dim = pretrained.as_ref().map_or(300, |(m, _)| m.dimension);
    let model_cfg = ModelConfig {
        embed_dim: r.value("embed_dim", args.embed_dim, default_dim)?,
        hidden_size: r.value("hidden_size", args.hidden_size, 300)?,
        num_classes: classes,
        attention: r.value("attention", args.attention, AttentionVariant::Context)?,
        noise_sigma: r.value("noise_sigma", args.noise_sigma, 0.05)?,
        dropout_embed: r.value("dropout_embed", args.dropout_embed, 0.1)?,
        dropout_rnn: r.value("dropout_rnn", args.dropout_rnn, 0.3)?,
    };
    let train_cfg = TrainConfig {
        batch_size: r.value("batch_size", args.batch_size, 32)?,
        max_epochs: r.value("max_epochs", args.max_epochs, 50)?,
        patience: r.value("patience", args.patience, 3)?,
        learning_rate: r.value("learning_rate", args.learning_rate, 1e-3)?,
        clip_max_norm: r.value("clip_norm", args.clip_norm, 1.0)?,
        seed,
        ..TrainConfig::default()
    };

    let (params, vocab) = match pretrained {
        Some((matrix, vocab)) => (
            ModelParams::init_with_embeddings(model_cfg, &matrix, seed)?,
            vocab,
        ),
        None => {
            let corpus: Vec<Vec<String>> = train_set
                .examples
                .iter()
                .map(|ex| prep.process(&ex.text).tokens)
                .collect();
            let vocab = build_vocab(&corpus, min_count)?;
            (ModelParams::init(model_cfg, vocab.len(), seed)?, vocab)
        }
    };

    let train_enc = encode_examples(&train_set, &prep, &vocab);
    let val_enc = encode_examples(&val_set, &prep, &vocab);
    let weights = class_weights(&class_distribution(&train_set)?)?;

    ensure_out_dir(&args.out_dir)?;
    r.write(&args.out_dir.join("run_config.txt"))?;

    let (best, history) = fit(params, &train_enc, &val_enc, &weights, &train_cfg)?;
    save_checkpoint(&best, &vocab, args.out_dir.join("checkpoint.json"))?;
    std::fs::write(args.out_dir.join("history.tsv"), history.to_tsv())?;
    println!(
        "train: {} epochs, best epoch {} (val loss {:.4}, val macro-F1 {:.4})",
        history.val_loss.len(),
        history.best_epoch,
        history.val_loss[history.best_epoch],
        history.val_macro_f1[history.best_epoch],
    );
    Ok(())
}

const EVAL_KEYS: &[&str] = &[
    "text",
    "labels",
    "checkpoint",
    "stats",
    "lexicon",
    "spell_correct",
    "max_edits",
    "no_segment_hashtags",
    "no_elongated",
];

pub fn eval(args: EvalArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref(), EVAL_KEYS)?;
    let text = PathBuf::from(r.required("text", args.text.map(display_path))?);
    let labels = PathBuf::from(r.required("labels", args.labels.map(display_path))?);
    let checkpoint = PathBuf::from(r.required("checkpoint", args.checkpoint.map(display_path))?);
    let prep = resolve_prep(&mut r, &args.prep)?;

    let (params, vocab) = load_checkpoint(&checkpoint)?;
    let classes = params.config().num_classes;
    let dataset = load_dataset(&text, &labels, classes)?;
    let encoded = encode_examples(&dataset, &prep, &vocab);

    let mut preds = Vec::with_capacity(encoded.len());
    let mut golds = Vec::with_capacity(encoded.len());
    for (ids, label) in &encoded {
        preds.push(model_predict(ids, &params)?.predicted);
        golds.push(*label);
    }
    let metrics = compute_metrics(&preds, &golds, classes)?;
    let cm = confusion(&preds, &golds, classes)?;

    ensure_out_dir(&args.out_dir)?;
    write_metrics(&args.out_dir, &metrics, &cm.to_tsv())?;
    r.write(&args.out_dir.join("run_config.txt"))?;
    print!("{}", metrics.to_tsv());
    Ok(())
}

const PREDICT_KEYS: &[&str] = &[
    "text",
    "checkpoint",
    "output",
    "heatmaps",
    "gold_labels",
    "stats",
    "lexicon",
    "spell_correct",
    "max_edits",
    "no_segment_hashtags",
    "no_elongated",
];

pub fn predict(args: PredictArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref(), PREDICT_KEYS)?;
    let text = PathBuf::from(r.required("text", args.text.map(display_path))?);
    let checkpoint = PathBuf::from(r.required("checkpoint", args.checkpoint.map(display_path))?);
    let output = r
        .optional("output", args.output.map(display_path))?
        .map(PathBuf::from);
    let heatmaps = r
        .optional("heatmaps", args.heatmaps.map(display_path))?
        .map(PathBuf::from);
    let gold_labels = r
        .optional("gold_labels", args.gold_labels.map(display_path))?
        .map(PathBuf::from);
    let prep = resolve_prep(&mut r, &args.prep)?;

    let (params, vocab) = load_checkpoint(&checkpoint)?;
    let lines = read_file_lines(&text)?;
    let golds: Option<Vec<String>> = gold_labels.map(|p| read_file_lines(&p)).transpose()?;
    if let Some(g) = &golds {
        if g.len() != lines.len() {
            bail!("{} gold labels for {} inputs", g.len(), lines.len());
        }
    }
    if let Some(dir) = &heatmaps {
        ensure_out_dir(dir)?;
    }

    let mut out_lines = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let processed = prep.process(line);
        let tokens = if processed.tokens.is_empty() {
            vec!["<unk>".to_string()]
        } else {
            processed.tokens
        };
        let ids: Vec<usize> = tokens.iter().map(|t| vocab.id_or_unk(t)).collect();
        let prediction = model_predict(&ids, &params)?;
        out_lines.push(prediction.predicted.to_string());
        if let Some(dir) = &heatmaps {
            let gold = golds
                .as_ref()
                .map(|g| g[i].clone())
                .unwrap_or_else(|| "?".to_string());
            let html = render_attention_html(
                &tokens,
                &prediction.attention.weights,
                &prediction.predicted.to_string(),
                &gold,
            )?;
            std::fs::write(dir.join(format!("example_{:05}.html", i)), html)?;
        }
    }

    let rendered = out_lines.join("\n") + "\n";
    match output {
        Some(path) => std::fs::write(&path, rendered)?,
        None => print!("{}", rendered),
    }
    Ok(())
}

const BASELINE_KEYS: &[&str] = &[
    "features",
    "train_text",
    "train_labels",
    "test_text",
    "test_labels",
    "classes",
    "embeddings",
    "c",
    "iterations",
    "seed",
    "stats",
    "lexicon",
    "spell_correct",
    "max_edits",
    "no_segment_hashtags",
    "no_elongated",
];

pub fn baseline(args: BaselineArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref(), BASELINE_KEYS)?;
    let features = r.value("features", args.features, "bow".to_string())?;
    let train_text = PathBuf::from(r.required("train_text", args.train_text.map(display_path))?);
    let train_labels =
        PathBuf::from(r.required("train_labels", args.train_labels.map(display_path))?);
    let test_text = PathBuf::from(r.required("test_text", args.test_text.map(display_path))?);
    let test_labels = PathBuf::from(r.required("test_labels", args.test_labels.map(display_path))?);
    let classes = r.value("classes", args.classes, 20usize)?;
    let embeddings_path = r
        .optional("embeddings", args.embeddings.map(display_path))?
        .map(PathBuf::from);
    let cfg = BaselineConfig {
        c: r.value("c", args.c, 0.6)?,
        iterations: r.optional("iterations", args.iterations)?,
        projection: true,
        seed: r.value("seed", args.seed, 1)?,
    };
    let prep = resolve_prep(&mut r, &args.prep)?;

    let train_set = load_dataset(&train_text, &train_labels, classes)?;
    let test_set = load_dataset(&test_text, &test_labels, classes)?;
    let to_docs = |d: &Dataset| -> Vec<Vec<String>> {
        d.examples
            .iter()
            .map(|ex| prep.process(&ex.text).tokens)
            .collect()
    };
    let train_docs = to_docs(&train_set);
    let test_docs = to_docs(&test_set);

    let (train_x, test_x): (Vec<SparseVector>, Vec<SparseVector>) = match features.as_str() {
        "bow" => {
            let model = TfidfModel::fit(&train_docs)?;
            (
                train_docs.iter().map(|d| model.transform(d)).collect(),
                test_docs.iter().map(|d| model.transform(d)).collect(),
            )
        }
        "nbow" => {
            let path = embeddings_path.ok_or_else(|| anyhow!("nbow features need --embeddings"))?;
            let (matrix, vocab) = load_embeddings(&path)?;
            let dense_train = nbow_features(&train_docs, &matrix, &vocab);
            let dense_test = nbow_features(&test_docs, &matrix, &vocab);
            (
                dense_train
                    .iter()
                    .map(|v| SparseVector::from_dense(v))
                    .collect(),
                dense_test
                    .iter()
                    .map(|v| SparseVector::from_dense(v))
                    .collect(),
            )
        }
        other => bail!("unknown feature family {:?} (expected bow or nbow)", other),
    };

    let train_y: Vec<usize> = train_set.labels().collect();
    let test_y: Vec<usize> = test_set.labels().collect();
    let model = svm_train(&train_x, &train_y, &cfg)?;
    let preds = svm_predict(&test_x, &model)?;
    let metrics = compute_metrics(&preds, &test_y, classes)?;
    let cm = confusion(&preds, &test_y, classes)?;

    ensure_out_dir(&args.out_dir)?;
    write_metrics(&args.out_dir, &metrics, &cm.to_tsv())?;
    model.save(args.out_dir.join("svm_model.txt"))?;
    r.write(&args.out_dir.join("run_config.txt"))?;
    print!("{}", metrics.to_tsv());
    Ok(())
}

const SEARCH_KEYS: &[&str] = &[
    "train_text",
    "train_labels",
    "classes",
    "budget",
    "seed",
    "trial_epochs",
    "embed_dim",
    "split",
    "learning_rates",
    "batch_sizes",
    "hidden_sizes",
    "stats",
    "lexicon",
    "spell_correct",
    "max_edits",
    "no_segment_hashtags",
    "no_elongated",
];

fn parse_usize_list(raw: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|e| anyhow!("bad entry {:?}: {}", p, e))
        })
        .collect()
}

pub fn search(args: SearchArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref(), SEARCH_KEYS)?;
    let train_text = PathBuf::from(r.required("train_text", args.train_text.map(display_path))?);
    let train_labels =
        PathBuf::from(r.required("train_labels", args.train_labels.map(display_path))?);
    let classes = r.value("classes", args.classes, 20usize)?;
    let budget = r.value("budget", args.budget, 10usize)?;
    let seed = r.value("seed", args.seed, 1u64)?;
    let trial_epochs = r.value("trial_epochs", args.trial_epochs, 5usize)?;
    let embed_dim = r.value("embed_dim", args.embed_dim, 32usize)?;
    let split = r.value("split", args.split, "0.8,0.1,0.1".to_string())?;
    let lr_range = r.value(
        "learning_rates",
        args.learning_rates,
        "1e-4,1e-2".to_string(),
    )?;
    let batch_sizes = r.value("batch_sizes", args.batch_sizes, "16,32,64".to_string())?;
    let hidden_sizes = r.value("hidden_sizes", args.hidden_sizes, "50,100,200".to_string())?;
    let prep = resolve_prep(&mut r, &args.prep)?;

    let lr_parts: Vec<f64> = lr_range
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| anyhow!("bad learning rate: {}", e))
        })
        .collect::<Result<_>>()?;
    if lr_parts.len() != 2 {
        bail!("learning_rates must be \"lo,hi\"");
    }
    let space = SearchSpace {
        learning_rate: (lr_parts[0], lr_parts[1]),
        batch_sizes: parse_usize_list(&batch_sizes)?,
        hidden_sizes: parse_usize_list(&hidden_sizes)?,
        ..SearchSpace::default()
    };

    let dataset = load_dataset(&train_text, &train_labels, classes)?;
    let ratios = parse_ratios(&split)?;
    let (train_set, val_set, _) = stratified_split(&dataset, ratios, seed)?;
    let corpus: Vec<Vec<String>> = train_set
        .examples
        .iter()
        .map(|ex| prep.process(&ex.text).tokens)
        .collect();
    let vocab = build_vocab(&corpus, 1)?;
    let train_enc = encode_examples(&train_set, &prep, &vocab);
    let val_enc = encode_examples(&val_set, &prep, &vocab);
    let weights = class_weights(&class_distribution(&train_set)?)?;

    let (best, trials) = random_search(&space, budget, seed, |hp| {
        let model_cfg = ModelConfig {
            embed_dim,
            hidden_size: hp.hidden_size,
            num_classes: classes,
            attention: AttentionVariant::Context,
            noise_sigma: hp.noise_sigma,
            dropout_embed: hp.dropout_embed,
            dropout_rnn: hp.dropout_rnn,
        };
        let train_cfg = TrainConfig {
            batch_size: hp.batch_size,
            max_epochs: trial_epochs,
            patience: trial_epochs,
            learning_rate: hp.learning_rate,
            seed,
            ..TrainConfig::default()
        };
        let params = ModelParams::init(model_cfg, vocab.len(), seed)?;
        let (_, history) = fit(params, &train_enc, &val_enc, &weights, &train_cfg)?;
        Ok(history.val_loss[history.best_epoch])
    })
    .map_err(anyhow::Error::from)?;

    ensure_out_dir(&args.out_dir)?;
    let mut trials_tsv = String::from(
        "trial\tlearning_rate\tbatch_size\thidden_size\tdropout_embed\tdropout_rnn\tnoise_sigma\tval_loss\n",
    );
    for (i, t) in trials.iter().enumerate() {
        trials_tsv.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            i,
            t.candidate.learning_rate,
            t.candidate.batch_size,
            t.candidate.hidden_size,
            t.candidate.dropout_embed,
            t.candidate.dropout_rnn,
            t.candidate.noise_sigma,
            t.objective
        ));
    }
    std::fs::write(args.out_dir.join("trials.tsv"), trials_tsv)?;

    // Usable directly as `emopred train --config best_config.txt ...`.
    let mut best_map = BTreeMap::new();
    best_map.insert("learning_rate", best.learning_rate.to_string());
    best_map.insert("batch_size", best.batch_size.to_string());
    best_map.insert("hidden_size", best.hidden_size.to_string());
    best_map.insert("dropout_embed", best.dropout_embed.to_string());
    best_map.insert("dropout_rnn", best.dropout_rnn.to_string());
    best_map.insert("noise_sigma", best.noise_sigma.to_string());
    best_map.insert("embed_dim", embed_dim.to_string());
    let best_text: String = best_map
        .iter()
        .map(|(k, v)| format!("{} = {}\n", k, v))
        .collect();
    std::fs::write(args.out_dir.join("best_config.txt"), best_text)?;
    r.write(&args.out_dir.join("run_config.txt"))?;

    let best_trial = trials
        .iter()
        .map(|t| t.objective)
        .fold(f64::INFINITY, f64::min);
    println!(
        "search: {} trials, best val loss {:.4}",
        trials.len(),
        best_trial
    );
    Ok(())
}
