//! Classification metrics (macro precision/recall/F1, accuracy), confusion
//! matrices, and standalone-HTML attention heatmaps.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassPrf>,
}

/// K x K counts, rows = gold, columns = predicted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
    pub num_classes: usize,
}

fn check_lengths(preds: &[usize], golds: &[usize]) -> Result<()> {
    if preds.len() != golds.len() || preds.is_empty() {
        return Err(CoreError::LengthMismatch {
            left: preds.len(),
            right: golds.len(),
        });
    }
    Ok(())
}

pub fn confusion(preds: &[usize], golds: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    check_lengths(preds, golds)?;
    let mut counts = vec![vec![0usize; num_classes]; num_classes];
    for (&p, &g) in preds.iter().zip(golds) {
        if p >= num_classes || g >= num_classes {
            return Err(CoreError::LabelOutOfRange {
                label: p.max(g) as i64,
                num_classes,
                line: 0,
            });
        }
        counts[g][p] += 1;
    }
    Ok(ConfusionMatrix {
        counts,
        num_classes,
    })
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts
            .iter()
            .map(|row| row.iter().sum::<usize>())
            .sum()
    }

    /// Metrics derived from the counts alone. Per-class 0/0 cases define
    /// the value as 0; absent classes still count in the macro means.
    pub fn metrics(&self) -> Metrics {
        let k = self.num_classes;
        let mut per_class = Vec::with_capacity(k);
        let mut correct = 0usize;
        for c in 0..k {
            correct += self.counts[c][c];
            let tp = self.counts[c][c];
            let fp: usize = (0..k).filter(|&g| g != c).map(|g| self.counts[g][c]).sum();
            let fn_: usize = (0..k).filter(|&p| p != c).map(|p| self.counts[c][p]).sum();
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            per_class.push(ClassPrf {
                precision,
                recall,
                f1,
            });
        }
        let kf = k as f64;
        Metrics {
            accuracy: correct as f64 / self.total() as f64,
            macro_precision: per_class.iter().map(|c| c.precision).sum::<f64>() / kf,
            macro_recall: per_class.iter().map(|c| c.recall).sum::<f64>() / kf,
            macro_f1: per_class.iter().map(|c| c.f1).sum::<f64>() / kf,
            per_class,
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str("gold\\pred");
        for c in 0..self.num_classes {
            write!(out, "\t{}", c).unwrap();
        }
        out.push('\n');
        for (g, row) in self.counts.iter().enumerate() {
            write!(out, "{}", g).unwrap();
            for v in row {
                write!(out, "\t{}", v).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(preds: &[usize], golds: &[usize], num_classes: usize) -> Result<Metrics> {
    Ok(confusion(preds, golds, num_classes)?.metrics())
}

impl Metrics {
    /// Flat `key TAB value` report.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "accuracy\t{}", self.accuracy).unwrap();
        writeln!(out, "macro_precision\t{}", self.macro_precision).unwrap();
        writeln!(out, "macro_recall\t{}", self.macro_recall).unwrap();
        writeln!(out, "macro_f1\t{}", self.macro_f1).unwrap();
        for (c, prf) in self.per_class.iter().enumerate() {
            writeln!(out, "class_{}_precision\t{}", c, prf.precision).unwrap();
            writeln!(out, "class_{}_recall\t{}", c, prf.recall).unwrap();
            writeln!(out, "class_{}_f1\t{}", c, prf.f1).unwrap();
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Standalone HTML heatmap: each token's background opacity is its attention
/// weight normalized by the maximum weight.
pub fn render_attention_html(
    tokens: &[String],
    weights: &[f64],
    predicted: &str,
    gold: &str,
) -> Result<String> {
    if tokens.len() != weights.len() || tokens.is_empty() {
        return Err(CoreError::LengthMismatch {
            left: tokens.len(),
            right: weights.len(),
        });
    }
    let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 || max.is_nan() {
        return Err(CoreError::InvalidConfig(
            "attention weights must be positive".into(),
        ));
    }
    let mut spans = String::new();
    for (token, &w) in tokens.iter().zip(weights) {
        let opacity = w / max;
        writeln!(
            spans,
            "<span class=\"tok\" style=\"background: rgba(214, 93, 14, {:.4})\" title=\"{:.4}\">{}</span>",
            opacity,
            w,
            escape_html(token)
        )
        .unwrap();
    }
    Ok(format!(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>attention heatmap</title>\n<style>\nbody {{ font-family: sans-serif; margin: 2em; }}\n.tok {{ padding: 2px 4px; margin: 1px; border-radius: 3px; display: inline-block; }}\n.meta {{ color: #444; }}\n</style>\n</head>\n<body>\n<p class=\"meta\">predicted: {} &middot; gold: {}</p>\n<p>\n{}</p>\n</body>\n</html>\n",
        escape_html(predicted),
        escape_html(gold),
        spans
    ))
}
