//! Bag-of-words baselines: TF-IDF and neural-bag-of-words features fed to a
//! one-vs-rest linear SVM trained with the Pegasos stochastic subgradient
//! method.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use emopred_tensor::SeedStream;

use crate::embeddings::{EmbeddingMatrix, Vocabulary};
use crate::{CoreError, Result};

/// Sparse feature vector: `(index, value)` pairs with strictly increasing
/// indices and non-zero values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn from_entries(mut entries: Vec<(usize, f64)>) -> Self {
        entries.retain(|(_, v)| *v != 0.0);
        entries.sort_by_key(|(i, _)| *i);
        entries.dedup_by(|a, b| {
            if a.0 == b.0 {
                b.1 += a.1;
                true
            } else {
                false
            }
        });
        entries.retain(|(_, v)| *v != 0.0);
        Self { entries }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self {
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.last().map(|(i, _)| *i)
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, v) in &mut self.entries {
            *v *= factor;
        }
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|(i, v)| v * dense[*i]).sum()
    }
}

/// Fitted TF-IDF transform: raw term counts weighted by smoothed idf
/// `ln((1 + D) / (1 + df)) + 1`, then L2-normalized per document.
#[derive(Debug, Clone)]
pub struct TfidfModel {
    term_index: HashMap<String, usize>,
    terms: Vec<String>,
    idf: Vec<f64>,
}

impl TfidfModel {
    pub fn fit<S: AsRef<str>>(docs: &[Vec<S>]) -> Result<Self> {
        if docs.is_empty() {
            return Err(CoreError::EmptyCorpus);
        }
        let mut df: HashMap<&str, usize> = HashMap::new();
        for doc in docs {
            let mut seen: Vec<&str> = doc.iter().map(AsRef::as_ref).collect();
            seen.sort_unstable();
            seen.dedup();
            for term in seen {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        let mut terms: Vec<String> = df.keys().map(|t| t.to_string()).collect();
        terms.sort();
        let term_index: HashMap<String, usize> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let d = docs.len() as f64;
        let idf = terms
            .iter()
            .map(|t| ((1.0 + d) / (1.0 + df[t.as_str()] as f64)).ln() + 1.0)
            .collect();
        Ok(Self {
            term_index,
            terms,
            idf,
        })
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.terms
    }

    pub fn dimension(&self) -> usize {
        self.terms.len()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.term_index.get(term).map(|&i| self.idf[i])
    }

    /// Unknown terms are ignored; the all-unknown document is empty.
    pub fn transform<S: AsRef<str>>(&self, doc: &[S]) -> SparseVector {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for term in doc {
            if let Some(&i) = self.term_index.get(term.as_ref()) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
        let mut vec = SparseVector::from_entries(
            counts
                .into_iter()
                .map(|(i, tf)| (i, tf * self.idf[i]))
                .collect(),
        );
        let norm = vec.l2_norm();
        if norm > 0.0 {
            vec.scale(1.0 / norm);
        }
        vec
    }
}

/// Fit + transform in one call.
pub fn tfidf_features<S: AsRef<str>>(docs: &[Vec<S>]) -> Result<(TfidfModel, Vec<SparseVector>)> {
    let model = TfidfModel::fit(docs)?;
    let vectors = docs.iter().map(|d| model.transform(d)).collect();
    Ok((model, vectors))
}

/// Neural bag-of-words: mean of the in-vocabulary word vectors. Summation
/// runs in sorted index order so token order cannot perturb rounding; an
/// all-out-of-vocabulary document is the zero vector.
pub fn nbow_features<S: AsRef<str>>(
    docs: &[Vec<S>],
    embeddings: &EmbeddingMatrix,
    vocab: &Vocabulary,
) -> Vec<Vec<f64>> {
    let dim = embeddings.dimension;
    docs.iter()
        .map(|doc| {
            let mut ids: Vec<usize> = doc
                .iter()
                .filter_map(|t| vocab.get(t.as_ref()))
                .filter(|&id| id > crate::embeddings::UNK_INDEX)
                .collect();
            ids.sort_unstable();
            let mut acc = vec![0.0; dim];
            for &id in &ids {
                for (a, v) in acc.iter_mut().zip(embeddings.input_vector(id)) {
                    *a += v;
                }
            }
            if !ids.is_empty() {
                let inv = 1.0 / ids.len() as f64;
                for a in &mut acc {
                    *a *= inv;
                }
            }
            acc
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BaselineConfig {
    /// SVM regularization trade-off; lambda = 1 / (C * n).
    pub c: f64,
    /// Pegasos iterations; defaults to 20 * n when unset.
    pub iterations: Option<usize>,
    /// Project iterates onto the 1/sqrt(lambda) ball.
    pub projection: bool,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            c: 0.6,
            iterations: None,
            projection: true,
            seed: 1,
        }
    }
}

/// One-vs-rest linear SVM; weight rows include the trailing bias feature.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub weights: Vec<Vec<f64>>,
    pub dim: usize,
}

fn pegasos_binary(
    xs: &[SparseVector],
    ys: &[f64],
    lambda: f64,
    iterations: usize,
    projection: bool,
    rng: &mut SeedStream,
    dim_with_bias: usize,
) -> Vec<f64> {
    let mut w = vec![0.0; dim_with_bias];
    let radius = 1.0 / lambda.sqrt();
    for t in 1..=iterations {
        let i = rng.below(xs.len());
        let eta = 1.0 / (lambda * t as f64);
        let margin = ys[i] * (xs[i].dot_dense(&w) + w[dim_with_bias - 1]);
        let shrink = 1.0 - eta * lambda;
        for v in &mut w {
            *v *= shrink;
        }
        if margin < 1.0 {
            let step = eta * ys[i];
            for &(j, v) in xs[i].entries() {
                w[j] += step * v;
            }
            w[dim_with_bias - 1] += step;
        }
        if projection {
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                let scale = radius / norm;
                for v in &mut w {
                    *v *= scale;
                }
            }
            debug_assert!(
                t % 100 != 0 || w.iter().map(|v| v * v).sum::<f64>().sqrt() <= radius + 1e-9
            );
        }
    }
    w
}

pub fn svm_train(xs: &[SparseVector], ys: &[usize], cfg: &BaselineConfig) -> Result<SvmModel> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(CoreError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if cfg.c <= 0.0 {
        return Err(CoreError::InvalidConfig(format!(
            "C must be positive, got {}",
            cfg.c
        )));
    }
    let num_classes = ys.iter().max().map_or(0, |m| m + 1);
    let distinct = {
        let mut seen = vec![false; num_classes];
        ys.iter().for_each(|&y| seen[y] = true);
        seen.iter().filter(|s| **s).count()
    };
    if distinct < 2 {
        return Err(CoreError::SingleClass);
    }
    let dim = xs
        .iter()
        .filter_map(SparseVector::max_index)
        .max()
        .map_or(0, |m| m + 1);
    let n = xs.len();
    let lambda = 1.0 / (cfg.c * n as f64);
    let iterations = cfg.iterations.unwrap_or(20 * n);

    let mut weights = Vec::with_capacity(num_classes);
    for class in 0..num_classes {
        let ys_bin: Vec<f64> = ys
            .iter()
            .map(|&y| if y == class { 1.0 } else { -1.0 })
            .collect();
        let mut rng = SeedStream::new(cfg.seed.wrapping_add(class as u64));
        weights.push(pegasos_binary(
            xs,
            &ys_bin,
            lambda,
            iterations,
            cfg.projection,
            &mut rng,
            dim + 1,
        ));
    }
    Ok(SvmModel { weights, dim })
}

/// Argmax of per-class scores; exact ties go to the lowest class index.
pub fn svm_predict(xs: &[SparseVector], model: &SvmModel) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(xs.len());
    for x in xs {
        if x.max_index().is_some_and(|m| m >= model.dim) {
            return Err(CoreError::DimensionMismatch {
                expected: model.dim,
                got: x.max_index().unwrap() + 1,
            });
        }
        let mut best = (0usize, f64::NEG_INFINITY);
        for (class, w) in model.weights.iter().enumerate() {
            let score = x.dot_dense(w) + w[model.dim];
            if score > best.1 {
                best = (class, score);
            }
        }
        out.push(best.0);
    }
    Ok(out)
}

impl SvmModel {
    /// Same text container as the embeddings: header `K D`, one dense row
    /// per class keyed by the class index.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "{} {}", self.weights.len(), self.dim + 1).unwrap();
        for (class, row) in self.weights.iter().enumerate() {
            write!(out, "{}", class).unwrap();
            for v in row {
                write!(out, " {}", v).unwrap();
            }
            out.push('\n');
        }
        std::fs::write(path.as_ref(), out)
            .map_err(|e| CoreError::io(path.as_ref().display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| CoreError::io(path.as_ref().display().to_string(), e))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let (k, d) = header
            .split_once(' ')
            .and_then(|(k, d)| Some((k.parse::<usize>().ok()?, d.parse::<usize>().ok()?)))
            .ok_or_else(|| CoreError::Parse(format!("bad model header {:?}", header)))?;
        let mut weights = Vec::with_capacity(k);
        for line in lines.filter(|l| !l.is_empty()) {
            let values: Vec<f64> = line
                .split_whitespace()
                .skip(1)
                .map(|f| {
                    f.parse()
                        .map_err(|_| CoreError::Parse(format!("bad float {:?}", f)))
                })
                .collect::<Result<_>>()?;
            if values.len() != d {
                return Err(CoreError::DimensionMismatch {
                    expected: d,
                    got: values.len(),
                });
            }
            weights.push(values);
        }
        if weights.len() != k {
            return Err(CoreError::Parse("model row count mismatch".into()));
        }
        Ok(Self {
            weights,
            dim: d - 1,
        })
    }
}
