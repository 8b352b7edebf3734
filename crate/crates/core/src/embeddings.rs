//! Vocabulary construction and skip-gram-with-negative-sampling embedding
//! training, with word2vec text-format persistence.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use emopred_tensor::SeedStream;

use crate::{CoreError, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;

/// Word-index map with reserved entries `<pad>` = 0 and `<unk>` = 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    words: Vec<String>,
    counts: Vec<u64>,
}

impl Vocabulary {
    fn with_reserved() -> Self {
        let words = vec![PAD.to_string(), UNK.to_string()];
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Self {
            index,
            words,
            counts: vec![0, 0],
        }
    }

    /// Build from words with stated counts (already filtered); indices by
    /// descending count, ties lexicographic.
    pub fn from_counts(mut entries: Vec<(String, u64)>) -> Self {
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut vocab = Self::with_reserved();
        for (word, count) in entries {
            if vocab.index.contains_key(&word) {
                continue;
            }
            vocab.index.insert(word.clone(), vocab.words.len());
            vocab.words.push(word);
            vocab.counts.push(count);
        }
        vocab
    }

    /// Restore from a word list already in index order (checkpoints and
    /// embedding files). Reserved entries are prepended when absent.
    pub fn from_ordered_words(words: &[String]) -> Self {
        let reserved_present = words.len() >= 2 && words[0] == PAD && words[1] == UNK;
        let mut vocab = Self::with_reserved();
        let start = if reserved_present { 2 } else { 0 };
        for word in &words[start..] {
            if vocab.index.contains_key(word) {
                continue;
            }
            vocab.index.insert(word.clone(), vocab.words.len());
            vocab.words.push(word.clone());
            vocab.counts.push(0);
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false // reserved entries always present
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Index for a token, falling back to `<unk>`.
    pub fn id_or_unk(&self, word: &str) -> usize {
        self.get(word).unwrap_or(UNK_INDEX)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }
}

/// Words with count >= `min_count`, plus the reserved entries.
pub fn build_vocab<S: AsRef<str>>(corpus: &[Vec<S>], min_count: u64) -> Result<Vocabulary> {
    if min_count < 1 {
        return Err(CoreError::InvalidConfig(
            "min_count must be at least 1".into(),
        ));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut total = 0u64;
    for sentence in corpus {
        for token in sentence {
            *counts.entry(token.as_ref()).or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(CoreError::EmptyCorpus);
    }
    let kept: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .map(|(w, c)| (w.to_string(), c))
        .collect();
    Ok(Vocabulary::from_counts(kept))
}

/// Skip-gram with negative sampling.
#[derive(Debug, Clone)]
pub struct SgnsConfig {
    pub dimension: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub final_lr: f64,
    pub seed: u64,
    /// Frequent-word subsampling threshold; `None` disables it.
    pub subsample: Option<f64>,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        Self {
            dimension: 300,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            final_lr: 1e-4,
            seed: 1,
            subsample: None,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension < 1
            || self.negatives < 1
            || self.window < 1
            || self.epochs < 1
            || self.initial_lr <= 0.0
            || self.final_lr <= 0.0
            || self.final_lr > self.initial_lr
        {
            return Err(CoreError::InvalidConfig(format!(
                "bad SGNS config {:?}",
                self
            )));
        }
        Ok(())
    }
}

/// Input and output vector tables; only input vectors feed the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub dimension: usize,
    input: Vec<f64>,
    output: Vec<f64>,
    rows: usize,
}

impl EmbeddingMatrix {
    pub fn zeros(rows: usize, dimension: usize) -> Self {
        Self {
            dimension,
            input: vec![0.0; rows * dimension],
            output: vec![0.0; rows * dimension],
            rows,
        }
    }

    /// Build from flat row-major input vectors; output vectors are zero.
    pub fn from_input_vectors(rows: usize, dimension: usize, input: Vec<f64>) -> Result<Self> {
        if input.len() != rows * dimension {
            return Err(CoreError::DimensionMismatch {
                expected: rows * dimension,
                got: input.len(),
            });
        }
        Ok(Self {
            dimension,
            output: vec![0.0; input.len()],
            input,
            rows,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn input_vector(&self, id: usize) -> &[f64] {
        &self.input[id * self.dimension..(id + 1) * self.dimension]
    }

    pub fn output_vector(&self, id: usize) -> &[f64] {
        &self.output[id * self.dimension..(id + 1) * self.dimension]
    }

    pub fn input_vectors(&self) -> &[f64] {
        &self.input
    }
}

/// Negative-sampling distribution: unigram counts raised to 3/4,
/// sampled by binary search over the cumulative weights.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    cumulative: Vec<f64>,
    ids: Vec<usize>,
}

impl NegativeSampler {
    pub fn new(vocab: &Vocabulary) -> Self {
        let mut cumulative = Vec::new();
        let mut ids = Vec::new();
        let mut acc = 0.0;
        for id in 0..vocab.len() {
            let c = vocab.count(id);
            if c == 0 {
                continue;
            }
            acc += (c as f64).powf(0.75);
            cumulative.push(acc);
            ids.push(id);
        }
        Self { cumulative, ids }
    }

    pub fn sample(&self, rng: &mut SeedStream) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let r = rng.uniform(0.0, total);
        let pos = self.cumulative.partition_point(|&c| c <= r);
        self.ids[pos.min(self.ids.len() - 1)]
    }

    /// Normalized weight of each sampled id, for distribution checks.
    pub fn weights(&self) -> Vec<(usize, f64)> {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let mut prev = 0.0;
        self.ids
            .iter()
            .zip(&self.cumulative)
            .map(|(&id, &c)| {
                let w = (c - prev) / total;
                prev = c;
                (id, w)
            })
            .collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// One (center, context-or-negative) update. `label` is 1 for the observed
// context, 0 for negatives. Returns the pair's loss term and accumulates the
// center-vector gradient into `center_grad`.
fn sgns_pair_update(
    center: &[f64],
    ctx: &mut [f64],
    center_grad: &mut [f64],
    label: f64,
    lr: f64,
) -> f64 {
    let dot: f64 = center.iter().zip(ctx.iter()).map(|(a, b)| a * b).sum();
    let pred = sigmoid(dot);
    let g = (label - pred) * lr;
    for ((cg, c), x) in center_grad.iter_mut().zip(ctx.iter_mut()).zip(center) {
        *cg += g * *c;
        *c += g * *x;
    }
    if label > 0.5 {
        -sigmoid(dot).max(f64::MIN_POSITIVE).ln()
    } else {
        -sigmoid(-dot).max(f64::MIN_POSITIVE).ln()
    }
}

/// Train embeddings over tokenized sentences. Deterministic for a fixed
/// seed (single worker). Returns the matrices and the average pair loss per
/// epoch.
#[allow(clippy::needless_range_loop)] // window positions need the skip-center comparison
pub fn train_sgns<S: AsRef<str>>(
    corpus: &[Vec<S>],
    vocab: &Vocabulary,
    cfg: &SgnsConfig,
) -> Result<(EmbeddingMatrix, Vec<f64>)> {
    cfg.validate()?;
    let dim = cfg.dimension;
    let mut rng = SeedStream::new(cfg.seed);

    let mut matrix = EmbeddingMatrix::zeros(vocab.len(), dim);
    let bound = 0.5 / dim as f64;
    for v in &mut matrix.input {
        *v = rng.uniform(-bound, bound);
    }

    let sampler = NegativeSampler::new(vocab);
    if sampler.ids.is_empty() {
        return Err(CoreError::EmptyCorpus);
    }

    // Sentences mapped to ids; out-of-vocabulary tokens are dropped.
    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.get(t.as_ref())).collect())
        .collect();
    let words_per_epoch: usize = sentences.iter().map(Vec::len).sum();
    if words_per_epoch == 0 {
        return Err(CoreError::EmptyCorpus);
    }
    let total_words = (words_per_epoch * cfg.epochs) as f64;
    let total_corpus_count: u64 = (0..vocab.len()).map(|i| vocab.count(i)).sum();

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut processed = 0usize;
    let mut center_grad = vec![0.0; dim];
    for _ in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        let mut pairs = 0usize;
        for sentence in &sentences {
            // Optional frequent-word subsampling, word2vec style.
            let kept: Vec<usize> = match cfg.subsample {
                Some(t) if t > 0.0 => sentence
                    .iter()
                    .copied()
                    .filter(|&id| {
                        let f = vocab.count(id) as f64 / total_corpus_count.max(1) as f64;
                        let keep = (t / f).sqrt() + t / f;
                        rng.unit() < keep.min(1.0)
                    })
                    .collect(),
                _ => sentence.clone(),
            };
            for (pos, &center_id) in kept.iter().enumerate() {
                let progress = processed as f64 / total_words;
                let lr =
                    (cfg.initial_lr + (cfg.final_lr - cfg.initial_lr) * progress).max(cfg.final_lr);
                processed += 1;

                // Reduced window, as in word2vec.
                let radius = rng.below(cfg.window) + 1;
                let lo = pos.saturating_sub(radius);
                let hi = (pos + radius).min(kept.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let ctx_id = kept[ctx_pos];
                    center_grad.fill(0.0);
                    {
                        let (center, ctx) = split_rows(&mut matrix, center_id, ctx_id, dim);
                        epoch_loss += sgns_pair_update(center, ctx, &mut center_grad, 1.0, lr);
                    }
                    for _ in 0..cfg.negatives {
                        let neg = sampler.sample(&mut rng);
                        if neg == ctx_id {
                            continue;
                        }
                        let (center, neg_row) = split_rows(&mut matrix, center_id, neg, dim);
                        epoch_loss += sgns_pair_update(center, neg_row, &mut center_grad, 0.0, lr);
                    }
                    let row = &mut matrix.input[center_id * dim..(center_id + 1) * dim];
                    for (v, g) in row.iter_mut().zip(&center_grad) {
                        *v += g;
                    }
                    pairs += 1;
                }
            }
        }
        epoch_losses.push(if pairs == 0 {
            0.0
        } else {
            epoch_loss / pairs as f64
        });
    }
    Ok((matrix, epoch_losses))
}

// Borrow the center input row and a (distinct table) output row together.
fn split_rows(
    matrix: &mut EmbeddingMatrix,
    center: usize,
    out_row: usize,
    dim: usize,
) -> (&[f64], &mut [f64]) {
    let center_slice = &matrix.input[center * dim..(center + 1) * dim];
    let out_slice = &mut matrix.output[out_row * dim..(out_row + 1) * dim];
    (center_slice, out_slice)
}

/// word2vec text format: header `V D`, then `word v1 ... vD` per line.
/// Values print with Rust's shortest round-trip formatting, so save -> load
/// is exact. Input vectors only.
pub fn save_embeddings(
    matrix: &EmbeddingMatrix,
    vocab: &Vocabulary,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{} {}", vocab.len(), matrix.dimension).unwrap();
    for id in 0..vocab.len() {
        out.push_str(vocab.word(id));
        for v in matrix.input_vector(id) {
            write!(out, " {}", v).unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path.as_ref(), out)
        .map_err(|e| CoreError::io(path.as_ref().display().to_string(), e))
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<(EmbeddingMatrix, Vocabulary)> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| CoreError::io(path.as_ref().display().to_string(), e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let (v, d) = header
        .split_once(' ')
        .and_then(|(v, d)| Some((v.parse::<usize>().ok()?, d.parse::<usize>().ok()?)))
        .ok_or_else(|| CoreError::Parse(format!("bad embeddings header {:?}", header)))?;

    let mut words = Vec::with_capacity(v);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(v);
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields
            .next()
            .ok_or_else(|| CoreError::Parse(format!("empty embeddings line {}", i + 2)))?;
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse()
                    .map_err(|_| CoreError::Parse(format!("bad float {:?} on line {}", f, i + 2)))
            })
            .collect::<Result<_>>()?;
        if values.len() != d {
            return Err(CoreError::DimensionMismatch {
                expected: d,
                got: values.len(),
            });
        }
        words.push(word.to_string());
        vectors.push(values);
    }
    if words.len() != v {
        return Err(CoreError::Parse(format!(
            "embeddings header claims {} rows, found {}",
            v,
            words.len()
        )));
    }

    let vocab = Vocabulary::from_ordered_words(&words);
    let mut matrix = EmbeddingMatrix::zeros(vocab.len(), d);
    let reserved_present = words.len() >= 2 && words[0] == PAD && words[1] == UNK;
    let offset = if reserved_present { 0 } else { 2 };
    for (row, vector) in vectors.iter().enumerate() {
        let dst = row + offset;
        matrix.input[dst * d..(dst + 1) * d].copy_from_slice(vector);
    }
    Ok((matrix, vocab))
}

/// Cosine similarity of two input vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
