//! End-to-end pipeline checks: raw tweets through preprocessing, statistics,
//! vocabulary, embedding pretraining, classifier training, and reporting.

use emopred_core::baselines::{
    nbow_features, svm_predict, svm_train, BaselineConfig, SparseVector,
};
use emopred_core::data::{class_distribution, stratified_split, Dataset, Example};
use emopred_core::embeddings::{build_vocab, train_sgns, SgnsConfig, Vocabulary};
use emopred_core::eval::{compute_metrics, confusion, render_attention_html};
use emopred_core::model::{
    load_checkpoint, predict, save_checkpoint, AttentionVariant, ModelConfig, ModelParams,
};
use emopred_core::preprocess::TextProcessor;
use emopred_core::segment::build_ngram_stats;
use emopred_core::train::{class_weights, fit, EncodedExample, TrainConfig};
use emopred_tensor::SeedStream;

fn synthetic_tweets(n: usize, seed: u64) -> Dataset {
    let happy = ["great", "love", "win", "sunny", "best"];
    let sad = ["awful", "lost", "rain", "worst", "broken"];
    let mut rng = SeedStream::new(seed);
    let mut examples = Vec::new();
    for i in 0..n {
        let label = i % 2;
        let bank: &[&str] = if label == 0 { &happy } else { &sad };
        let mut words = Vec::new();
        for _ in 0..6 {
            words.push(bank[rng.below(bank.len())]);
        }
        let text = format!("{} #mood {}", words[..3].join(" "), words[3..].join(" "));
        examples.push(Example { text, label });
    }
    Dataset::new(examples, 2).unwrap()
}

fn encode(d: &Dataset, processor: &TextProcessor, vocab: &Vocabulary) -> Vec<EncodedExample> {
    d.examples
        .iter()
        .map(|ex| {
            let processed = processor.process(&ex.text, None);
            let ids: Vec<usize> = processed
                .tokens
                .iter()
                .map(|t| vocab.id_or_unk(t))
                .collect();
            (if ids.is_empty() { vec![1] } else { ids }, ex.label)
        })
        .collect()
}

#[test]
fn full_pipeline_trains_evaluates_and_reports() {
    let dataset = synthetic_tweets(120, 4);
    let (train_set, val_set, test_set) = stratified_split(&dataset, [0.7, 0.15, 0.15], 11).unwrap();

    let processor = TextProcessor::default();
    let processed_lines: Vec<String> = train_set
        .examples
        .iter()
        .map(|ex| processor.process(&ex.text, None).line())
        .collect();
    let stats = build_ngram_stats(&processed_lines).unwrap();
    assert!(stats.total_tokens() > 0);

    let corpus: Vec<Vec<String>> = processed_lines
        .iter()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect();
    let vocab = build_vocab(&corpus, 1).unwrap();
    let sgns = SgnsConfig {
        dimension: 12,
        epochs: 3,
        seed: 5,
        ..SgnsConfig::default()
    };
    let (embeddings, _) = train_sgns(&corpus, &vocab, &sgns).unwrap();

    let config = ModelConfig {
        embed_dim: 12,
        hidden_size: 10,
        num_classes: 2,
        attention: AttentionVariant::Context,
        noise_sigma: 0.01,
        dropout_embed: 0.05,
        dropout_rnn: 0.1,
    };
    let params = ModelParams::init_with_embeddings(config, &embeddings, 13).unwrap();

    let train_enc = encode(&train_set, &processor, &vocab);
    let val_enc = encode(&val_set, &processor, &vocab);
    let test_enc = encode(&test_set, &processor, &vocab);

    let weights = class_weights(&class_distribution(&train_set).unwrap()).unwrap();
    let train_cfg = TrainConfig {
        batch_size: 16,
        max_epochs: 15,
        patience: 4,
        learning_rate: 5e-3,
        seed: 2,
        ..TrainConfig::default()
    };
    let (best, history) = fit(params, &train_enc, &val_enc, &weights, &train_cfg).unwrap();
    assert!(!history.val_loss.is_empty());
    assert!(history.best_epoch < history.val_loss.len());

    let preds: Vec<usize> = test_enc
        .iter()
        .map(|(ids, _)| predict(ids, &best).unwrap().predicted)
        .collect();
    let golds: Vec<usize> = test_enc.iter().map(|(_, l)| *l).collect();
    let metrics = compute_metrics(&preds, &golds, 2).unwrap();
    assert!((0.0..=1.0).contains(&metrics.macro_f1));
    // Cleanly separable vocabulary; the classifier should do well.
    assert!(metrics.accuracy >= 0.8, "accuracy {}", metrics.accuracy);

    let cm = confusion(&preds, &golds, 2).unwrap();
    assert_eq!(cm.total(), test_enc.len());
    assert_eq!(cm.metrics(), metrics);

    // Checkpoint round trip preserves predictions bit-for-bit.
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("model.json");
    save_checkpoint(&best, &vocab, &ckpt).unwrap();
    let (reloaded, _) = load_checkpoint(&ckpt).unwrap();
    for (ids, _) in test_enc.iter().take(5) {
        assert_eq!(
            predict(ids, &best).unwrap(),
            predict(ids, &reloaded).unwrap()
        );
    }

    // Attention heatmap for the first test example.
    let (ids, gold) = &test_enc[0];
    let pred = predict(ids, &best).unwrap();
    let tokens: Vec<String> = ids.iter().map(|&id| vocab.word(id).to_string()).collect();
    let html = render_attention_html(
        &tokens,
        &pred.attention.weights,
        &pred.predicted.to_string(),
        &gold.to_string(),
    )
    .unwrap();
    assert!(html.contains("<span"));
}

#[test]
fn nbow_baseline_runs_end_to_end() {
    let dataset = synthetic_tweets(80, 21);
    let processor = TextProcessor::default();
    let docs: Vec<Vec<String>> = dataset
        .examples
        .iter()
        .map(|ex| processor.process(&ex.text, None).tokens)
        .collect();
    let labels: Vec<usize> = dataset.labels().collect();

    let vocab = build_vocab(&docs, 1).unwrap();
    let sgns = SgnsConfig {
        dimension: 8,
        epochs: 3,
        seed: 3,
        ..SgnsConfig::default()
    };
    let (embeddings, _) = train_sgns(&docs, &vocab, &sgns).unwrap();
    let features = nbow_features(&docs, &embeddings, &vocab);
    let xs: Vec<SparseVector> = features
        .iter()
        .map(|f| SparseVector::from_dense(f))
        .collect();

    let model = svm_train(&xs, &labels, &BaselineConfig::default()).unwrap();
    let preds = svm_predict(&xs, &model).unwrap();
    let metrics = compute_metrics(&preds, &labels, 2).unwrap();
    // Content fully determines the label here, so NBOW should separate it.
    assert!(metrics.accuracy >= 0.9, "accuracy {}", metrics.accuracy);
}
