//! Labeled tweet datasets: loading, class distributions, stratified splits.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{CoreError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub text: String,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(examples: Vec<Example>, num_classes: usize) -> Result<Self> {
        for (i, ex) in examples.iter().enumerate() {
            if ex.label >= num_classes {
                return Err(CoreError::LabelOutOfRange {
                    label: ex.label as i64,
                    num_classes,
                    line: i + 1,
                });
            }
        }
        Ok(Self {
            examples,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.examples.iter().map(|e| e.label)
    }
}

/// Per-class counts and fractions over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    pub counts: Vec<usize>,
    pub freqs: Vec<f64>,
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let content =
        fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    Ok(content.lines().map(|l| l.to_string()).collect())
}

fn parse_label(s: &str, num_classes: usize, line: usize) -> Result<usize> {
    let value: i64 = s
        .trim()
        .parse()
        .map_err(|_| CoreError::Parse(format!("bad label {:?} on line {}", s, line)))?;
    if value < 0 || value as usize >= num_classes {
        return Err(CoreError::LabelOutOfRange {
            label: value,
            num_classes,
            line,
        });
    }
    Ok(value as usize)
}

/// Load from parallel files: one tweet per line, one integer label per line.
pub fn load_dataset(
    text_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    num_classes: usize,
) -> Result<Dataset> {
    let texts = read_lines(text_path.as_ref())?;
    let labels = read_lines(labels_path.as_ref())?;
    if texts.len() != labels.len() {
        return Err(CoreError::LineCountMismatch {
            texts: texts.len(),
            labels: labels.len(),
        });
    }
    let mut examples = Vec::with_capacity(texts.len());
    for (i, (text, label)) in texts.into_iter().zip(labels).enumerate() {
        let label = parse_label(&label, num_classes, i + 1)?;
        examples.push(Example { text, label });
    }
    Ok(Dataset {
        examples,
        num_classes,
    })
}

/// Load from a single TSV file: `text TAB label` per line.
pub fn load_dataset_tsv(path: impl AsRef<Path>, num_classes: usize) -> Result<Dataset> {
    let lines = read_lines(path.as_ref())?;
    let mut examples = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let (text, label) = line
            .rsplit_once('\t')
            .ok_or_else(|| CoreError::Parse(format!("line {} has no tab separator", i + 1)))?;
        let label = parse_label(label, num_classes, i + 1)?;
        examples.push(Example {
            text: text.to_string(),
            label,
        });
    }
    Ok(Dataset {
        examples,
        num_classes,
    })
}

/// Re-serialize to the parallel text/label format loaded by [`load_dataset`].
pub fn save_dataset(
    d: &Dataset,
    text_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    let mut texts = String::new();
    let mut labels = String::new();
    for ex in &d.examples {
        texts.push_str(&ex.text);
        texts.push('\n');
        labels.push_str(&ex.label.to_string());
        labels.push('\n');
    }
    fs::write(text_path.as_ref(), texts)
        .map_err(|e| CoreError::io(text_path.as_ref().display().to_string(), e))?;
    fs::write(labels_path.as_ref(), labels)
        .map_err(|e| CoreError::io(labels_path.as_ref().display().to_string(), e))?;
    Ok(())
}

pub fn class_distribution(d: &Dataset) -> Result<ClassDistribution> {
    if d.is_empty() {
        return Err(CoreError::EmptyDataset);
    }
    let mut counts = vec![0usize; d.num_classes];
    for label in d.labels() {
        counts[label] += 1;
    }
    let total: usize = counts.iter().sum();
    let freqs = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(ClassDistribution { counts, freqs })
}

/// Deterministic stratified split. Within each class, examples are shuffled
/// with a seeded generator and cut by ratio; integer remainders go to train.
/// Original dataset order is preserved inside each split.
pub fn stratified_split(
    d: &Dataset,
    ratios: [f64; 3],
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| *r <= 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(CoreError::InvalidRatios(ratios));
    }
    if d.is_empty() {
        return Err(CoreError::EmptyDataset);
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); d.num_classes];
    for (i, ex) in d.examples.iter().enumerate() {
        by_class[ex.label].push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (class, indices) in by_class.iter().enumerate() {
        if indices.is_empty() {
            continue;
        }
        if indices.len() < 3 {
            return Err(CoreError::ClassTooSmall {
                class,
                count: indices.len(),
                splits: 3,
            });
        }
        let mut shuffled = indices.clone();
        shuffled.shuffle(&mut rng);
        let n = shuffled.len();
        let n_val = (ratios[1] * n as f64).floor() as usize;
        let n_test = (ratios[2] * n as f64).floor() as usize;
        let n_train = n - n_val - n_test;
        picks[0].extend(&shuffled[..n_train]);
        picks[1].extend(&shuffled[n_train..n_train + n_val]);
        picks[2].extend(&shuffled[n_train + n_val..]);
    }

    let mut out = Vec::with_capacity(3);
    for pick in &mut picks {
        pick.sort_unstable();
        let examples = pick.iter().map(|&i| d.examples[i].clone()).collect();
        out.push(Dataset {
            examples,
            num_classes: d.num_classes,
        });
    }
    let test = out.pop().unwrap();
    let val = out.pop().unwrap();
    let train = out.pop().unwrap();
    Ok((train, val, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use tempfile::NamedTempFile;

    fn write_file(content: &str) -> NamedTempFile {
        let mut f = NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_parallel_files() {
        let texts = write_file("first tweet\nsecond tweet\nthird tweet\n");
        let labels = write_file("0\n2\n19\n");
        let d = load_dataset(texts.path(), labels.path(), 20).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.examples[1].text, "second tweet");
        assert_eq!(d.examples[2].label, 19);
    }

    #[test]
    fn load_rejects_line_count_mismatch() {
        let texts = write_file("a\nb\nc\n");
        let labels = write_file("0\n1\n");
        let err = load_dataset(texts.path(), labels.path(), 20).unwrap_err();
        assert!(matches!(
            err,
            CoreError::LineCountMismatch {
                texts: 3,
                labels: 2
            }
        ));
    }

    #[test]
    fn load_rejects_out_of_range_label() {
        let texts = write_file("a\n");
        let labels = write_file("20\n");
        let err = load_dataset(texts.path(), labels.path(), 20).unwrap_err();
        assert!(matches!(err, CoreError::LabelOutOfRange { label: 20, .. }));
    }

    #[test]
    fn load_is_pure_in_file_bytes() {
        let texts = write_file("x\ny\nz\n");
        let labels = write_file("1\n0\n1\n");
        let a = load_dataset(texts.path(), labels.path(), 2).unwrap();
        let b = load_dataset(texts.path(), labels.path(), 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tsv_loader_matches_parallel_loader() {
        let tsv = write_file("hello there\t0\nanother one\t1\n");
        let d = load_dataset_tsv(tsv.path(), 2).unwrap();
        assert_eq!(d.examples[0].text, "hello there");
        assert_eq!(d.examples[1].label, 1);
    }

    #[test]
    fn distribution_of_single_class() {
        let d = Dataset::new(
            vec![Example {
                text: "a".into(),
                label: 0,
            }],
            1,
        )
        .unwrap();
        let dist = class_distribution(&d).unwrap();
        assert_eq!(dist.freqs, vec![1.0]);
    }

    #[test]
    fn distribution_rejects_empty_dataset() {
        let d = Dataset {
            examples: vec![],
            num_classes: 2,
        };
        assert!(matches!(
            class_distribution(&d),
            Err(CoreError::EmptyDataset)
        ));
    }

    // Label distribution of the 20-emoji task, scaled to 10000 examples.
    pub(crate) const TASK_PERCENTAGES: [f64; 20] = [
        22.42, 10.34, 10.18, 5.48, 4.91, 4.67, 4.26, 3.64, 3.40, 3.23, 3.22, 3.04, 2.90, 2.60,
        2.70, 2.68, 2.61, 2.58, 2.66, 2.48,
    ];

    pub(crate) fn task_shaped_dataset() -> Dataset {
        let mut examples = Vec::new();
        for (label, pct) in TASK_PERCENTAGES.iter().enumerate() {
            let count = (pct * 100.0).round() as usize;
            for _ in 0..count {
                examples.push(Example {
                    text: format!("tweet {}", label),
                    label,
                });
            }
        }
        Dataset {
            examples,
            num_classes: 20,
        }
    }

    #[test]
    fn distribution_matches_task_proportions() {
        let d = task_shaped_dataset();
        assert_eq!(d.len(), 10000);
        let dist = class_distribution(&d).unwrap();
        assert!((dist.freqs[0] - 0.2242).abs() < 1e-12);
        let min = dist.freqs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min - 0.0248).abs() < 1e-12);
        let sum: f64 = dist.freqs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    fn hundred_example_dataset() -> Dataset {
        let mut examples = Vec::new();
        for i in 0..100 {
            examples.push(Example {
                text: format!("t{}", i),
                label: i % 10,
            });
        }
        Dataset {
            examples,
            num_classes: 10,
        }
    }

    #[test]
    fn split_sizes_follow_ratios() {
        let d = hundred_example_dataset();
        let (train, val, test) = stratified_split(&d, [0.8, 0.1, 0.1], 7).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (80, 10, 10));
        assert_eq!(train.len() + val.len() + test.len(), d.len());
    }

    #[test]
    fn split_remainders_go_to_train() {
        // 4 classes of 25: the 0.1 cuts floor to 2 per class.
        let mut examples = Vec::new();
        for i in 0..100 {
            examples.push(Example {
                text: format!("t{}", i),
                label: i % 4,
            });
        }
        let d = Dataset {
            examples,
            num_classes: 4,
        };
        let (train, val, test) = stratified_split(&d, [0.8, 0.1, 0.1], 7).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (84, 8, 8));
        // Every class stays within one example of its exact quota.
        for (split, ratio) in [(&train, 0.8), (&val, 0.1), (&test, 0.1)] {
            let dist = class_distribution(split).unwrap();
            for &c in &dist.counts {
                assert!((c as f64 - ratio * 25.0).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn split_preserves_class_proportions() {
        let d = hundred_example_dataset();
        let (train, val, test) = stratified_split(&d, [0.8, 0.1, 0.1], 7).unwrap();
        for split in [&train, &val, &test] {
            let dist = class_distribution(split).unwrap();
            for &c in &dist.counts {
                assert!((c as i64 - dist.counts[0] as i64).abs() <= 1);
            }
        }
    }

    #[test]
    fn split_is_deterministic() {
        let d = hundred_example_dataset();
        let a = stratified_split(&d, [0.8, 0.1, 0.1], 7).unwrap();
        let b = stratified_split(&d, [0.8, 0.1, 0.1], 7).unwrap();
        assert_eq!(a, b);
        let c = stratified_split(&d, [0.8, 0.1, 0.1], 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_rejects_bad_ratios() {
        let d = hundred_example_dataset();
        assert!(matches!(
            stratified_split(&d, [0.5, 0.5, 0.5], 7),
            Err(CoreError::InvalidRatios(_))
        ));
    }

    #[test]
    fn split_rejects_tiny_classes() {
        let d = Dataset::new(
            vec![
                Example {
                    text: "a".into(),
                    label: 0,
                },
                Example {
                    text: "b".into(),
                    label: 0,
                },
                Example {
                    text: "c".into(),
                    label: 0,
                },
                Example {
                    text: "d".into(),
                    label: 1,
                },
            ],
            2,
        )
        .unwrap();
        assert!(matches!(
            stratified_split(&d, [0.6, 0.2, 0.2], 1),
            Err(CoreError::ClassTooSmall { class: 1, .. })
        ));
    }

    #[test]
    fn dataset_round_trips_through_files() {
        let d = hundred_example_dataset();
        let dir = tempfile::tempdir().unwrap();
        let tp = dir.path().join("texts.txt");
        let lp = dir.path().join("labels.txt");
        save_dataset(&d, &tp, &lp).unwrap();
        let back = load_dataset(&tp, &lp, 10).unwrap();
        assert_eq!(d, back);
    }
}
