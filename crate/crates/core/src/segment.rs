//! Corpus n-gram statistics plus the Viterbi dynamic programs for word
//! segmentation (hashtag splitting) and noisy-channel spell correction.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::{CoreError, Result};

/// Per-edit channel probability for spell correction.
pub const EDIT_PENALTY: f64 = 0.01;

const SCORE_SCALE: f64 = 4294967296.0; // 2^32

/// Unigram/bigram counts over a tokenized corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NgramStats {
    unigram: HashMap<String, u64>,
    bigram: HashMap<(String, String), u64>,
    total_tokens: u64,
}

impl NgramStats {
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn vocab_size(&self) -> usize {
        self.unigram.len()
    }

    pub fn count(&self, word: &str) -> u64 {
        self.unigram.get(word).copied().unwrap_or(0)
    }

    pub fn bigram_count(&self, first: &str, second: &str) -> u64 {
        self.bigram
            .get(&(first.to_string(), second.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.unigram.contains_key(word)
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, u64)> {
        self.unigram.iter().map(|(w, c)| (w.as_str(), *c))
    }

    /// Unigram probability; unknown words get a length-penalized floor
    /// `1 / (total * 10^len)` so every segmentation stays scorable.
    pub fn word_log_prob(&self, word: &str) -> f64 {
        let total = self.total_tokens as f64;
        match self.unigram.get(word) {
            Some(&c) => (c as f64 / total).ln(),
            None => (1.0 / total).ln() - word.chars().count() as f64 * 10f64.ln(),
        }
    }

    /// Quantized log-probability used for segmentation comparisons. Integer
    /// sums are exact and order-independent, so equal-multiset segmentations
    /// tie exactly and the (fewer parts, lexicographic) tie-break is
    /// deterministic; float sums would drift by summation order.
    pub fn word_score_q(&self, word: &str) -> i64 {
        (self.word_log_prob(word) * SCORE_SCALE).round() as i64
    }

    fn interpolated_score_q(&self, prev: &str, word: &str) -> i64 {
        (self.interpolated_log_prob(prev, word) * SCORE_SCALE).round() as i64
    }

    /// Interpolated `0.7 * P(w|prev) + 0.3 * P(w)` used by the optional
    /// bigram-rescored modes.
    pub fn interpolated_log_prob(&self, prev: &str, word: &str) -> f64 {
        let unigram_p = self.word_log_prob(word).exp();
        let cond = match self.unigram.get(prev) {
            Some(&prev_count) if prev_count > 0 => {
                self.bigram_count(prev, word) as f64 / prev_count as f64
            }
            _ => 0.0,
        };
        (0.7 * cond + 0.3 * unigram_p).ln()
    }

    pub fn increment(&mut self, word: &str, delta: u64) {
        *self.unigram.entry(word.to_string()).or_insert(0) += delta;
        self.total_tokens += delta;
    }
}

/// Exact counts from a stream of whitespace-tokenized lines. Bigrams do not
/// cross line boundaries.
pub fn build_ngram_stats<I, S>(lines: I) -> Result<NgramStats>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut stats = NgramStats::default();
    for line in lines {
        let tokens: Vec<&str> = line.as_ref().split_whitespace().collect();
        for token in &tokens {
            *stats.unigram.entry(token.to_string()).or_insert(0) += 1;
            stats.total_tokens += 1;
        }
        for pair in tokens.windows(2) {
            *stats
                .bigram
                .entry((pair[0].to_string(), pair[1].to_string()))
                .or_insert(0) += 1;
        }
    }
    if stats.total_tokens == 0 {
        return Err(CoreError::EmptyCorpus);
    }
    Ok(stats)
}

const BIGRAM_MARKER: &str = "%%bigrams";

impl NgramStats {
    /// Plain-text persistence: a `total_tokens` header, sorted
    /// `word TAB count` unigram lines, a section marker, then
    /// `word1 SPACE word2 TAB count` bigram lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "total_tokens\t{}", self.total_tokens).unwrap();
        let mut unigrams: Vec<_> = self.unigram.iter().collect();
        unigrams.sort();
        for (word, count) in unigrams {
            writeln!(out, "{}\t{}", word, count).unwrap();
        }
        writeln!(out, "{}", BIGRAM_MARKER).unwrap();
        let mut bigrams: Vec<_> = self.bigram.iter().collect();
        bigrams.sort();
        for ((a, b), count) in bigrams {
            writeln!(out, "{} {}\t{}", a, b, count).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(CoreError::EmptyCorpus)?;
        let total_tokens = header
            .strip_prefix("total_tokens\t")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| CoreError::Parse(format!("bad stats header {:?}", header)))?;
        let mut stats = NgramStats {
            total_tokens,
            ..Default::default()
        };
        let mut in_bigrams = false;
        for (i, line) in lines.enumerate() {
            if line == BIGRAM_MARKER {
                in_bigrams = true;
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let (key, count) = line
                .rsplit_once('\t')
                .ok_or_else(|| CoreError::Parse(format!("stats line {} has no tab", i + 2)))?;
            let count: u64 = count
                .parse()
                .map_err(|_| CoreError::Parse(format!("bad count on stats line {}", i + 2)))?;
            if in_bigrams {
                let (a, b) = key.split_once(' ').ok_or_else(|| {
                    CoreError::Parse(format!("bigram line {} has no space", i + 2))
                })?;
                stats.bigram.insert((a.to_string(), b.to_string()), count);
            } else {
                stats.unigram.insert(key.to_string(), count);
            }
        }
        Ok(stats)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_text())
            .map_err(|e| CoreError::io(path.as_ref().display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| CoreError::io(path.as_ref().display().to_string(), e))?;
        Self::from_text(&text)
    }
}

/// A segmentation of an unspaced string into words with its log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub parts: Vec<String>,
    pub score: f64,
}

// Candidate ordering shared by the DP and the brute-force oracle: maximize
// the quantized score, then prefer fewer parts, then the lexicographically
// smaller part sequence.
pub(crate) fn segmentation_improves(
    cand_score: i64,
    cand_parts: &[String],
    best_score: i64,
    best_parts: &[String],
) -> bool {
    if cand_score != best_score {
        return cand_score > best_score;
    }
    if cand_parts.len() != best_parts.len() {
        return cand_parts.len() < best_parts.len();
    }
    cand_parts < best_parts
}

fn finish_segmentation(parts: Vec<String>, stats: &NgramStats) -> Segmentation {
    let score = parts.iter().map(|p| stats.word_log_prob(p)).sum();
    Segmentation { parts, score }
}

/// Maximum-probability split of `s` into parts of length at most
/// `max_word_len`, scored as the sum of unigram log-probabilities.
pub fn viterbi_segment(s: &str, stats: &NgramStats, max_word_len: usize) -> Result<Segmentation> {
    if s.is_empty() {
        return Err(CoreError::EmptyString);
    }
    let chars: Vec<char> = s.chars().collect();
    let n = chars.len();

    // best[i]: optimal segmentation of the first i characters.
    let mut best: Vec<Option<(i64, Vec<String>)>> = vec![None; n + 1];
    best[0] = Some((0, Vec::new()));
    for end in 1..=n {
        let lo = end.saturating_sub(max_word_len.max(1));
        for start in lo..end {
            let Some((prefix_score, prefix_parts)) = best[start].clone() else {
                continue;
            };
            let word: String = chars[start..end].iter().collect();
            let score = prefix_score + stats.word_score_q(&word);
            let mut parts = prefix_parts;
            parts.push(word);
            match &best[end] {
                Some((bs, bp)) if !segmentation_improves(score, &parts, *bs, bp) => {}
                _ => best[end] = Some((score, parts)),
            }
        }
    }
    let (_, parts) = best[n]
        .take()
        .expect("max_word_len >= 1 covers every position");
    Ok(finish_segmentation(parts, stats))
}

/// Bigram-rescored segmentation: the DP state carries the previous part and
/// transitions use the interpolated conditional probability. Off by default
/// in the preprocessing pipeline.
pub fn viterbi_segment_bigram(
    s: &str,
    stats: &NgramStats,
    max_word_len: usize,
) -> Result<Segmentation> {
    if s.is_empty() {
        return Err(CoreError::EmptyString);
    }
    let chars: Vec<char> = s.chars().collect();
    let n = chars.len();
    let max_len = max_word_len.max(1);

    // Keyed by (end position, last word); values as in the unigram DP.
    let mut best: HashMap<(usize, String), (i64, Vec<String>)> = HashMap::new();
    for end in 1..=n.min(max_len) {
        let word: String = chars[..end].iter().collect();
        let score = stats.word_score_q(&word);
        best.insert((end, word.clone()), (score, vec![word]));
    }
    for end in 2..=n {
        let lo = end.saturating_sub(max_len).max(1);
        for start in lo..end {
            let word: String = chars[start..end].iter().collect();
            let mut candidates: Vec<(i64, Vec<String>)> = Vec::new();
            for ((prev_end, prev_word), (prev_score, prev_parts)) in &best {
                if *prev_end != start {
                    continue;
                }
                let score = prev_score + stats.interpolated_score_q(prev_word, &word);
                let mut parts = prev_parts.clone();
                parts.push(word.clone());
                candidates.push((score, parts));
            }
            for (score, parts) in candidates {
                match best.get(&(end, word.clone())) {
                    Some((bs, bp)) if !segmentation_improves(score, &parts, *bs, bp) => {}
                    _ => {
                        best.insert((end, word.clone()), (score, parts));
                    }
                }
            }
        }
    }
    let mut winner: Option<(i64, Vec<String>)> = None;
    for ((end, _), (score, parts)) in &best {
        if *end != n {
            continue;
        }
        match &winner {
            Some((bs, bp)) if !segmentation_improves(*score, parts, *bs, bp) => {}
            _ => winner = Some((*score, parts.clone())),
        }
    }
    let (_, parts) = winner.expect("full-length state always exists");
    let score = stats.word_log_prob(&parts[0])
        + parts
            .windows(2)
            .map(|w| stats.interpolated_log_prob(&w[0], &w[1]))
            .sum::<f64>();
    Ok(Segmentation { parts, score })
}

fn levenshtein_within(a: &str, b: &str, max: usize) -> Option<usize> {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.len().abs_diff(b.len()) > max {
        return None;
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        let mut row_min = cur[0];
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            cur[j] = (prev[j] + 1).min(cur[j - 1] + 1).min(prev[j - 1] + cost);
            row_min = row_min.min(cur[j]);
        }
        if row_min > max {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    (prev[b.len()] <= max).then_some(prev[b.len()])
}

fn correction_improves(cand: (f64, u64, &str), best: (f64, u64, &str)) -> bool {
    if cand.0 != best.0 {
        return cand.0 > best.0;
    }
    if cand.1 != best.1 {
        return cand.1 > best.1;
    }
    cand.2 < best.2
}

/// Noisy-channel correction: argmax over vocabulary words within
/// `max_edits` of `log P(c) + d * ln(EDIT_PENALTY)`. In-vocabulary words and
/// words with no candidate come back unchanged.
pub fn spell_correct(w: &str, stats: &NgramStats, max_edits: usize) -> String {
    spell_correct_with_context(w, None, stats, max_edits)
}

/// Bigram-rescored variant: with a previous word the prior becomes the
/// interpolated conditional probability. `prev = None` is the default
/// unigram-only mode.
pub fn spell_correct_with_context(
    w: &str,
    prev: Option<&str>,
    stats: &NgramStats,
    max_edits: usize,
) -> String {
    if stats.contains(w) {
        return w.to_string();
    }
    let prior = |c: &str| match prev {
        Some(p) => stats.interpolated_log_prob(p, c),
        None => stats.word_log_prob(c),
    };
    let mut best: Option<(f64, u64, &str)> = None;
    for (cand, count) in stats.words() {
        let Some(distance) = levenshtein_within(w, cand, max_edits) else {
            continue;
        };
        let score = prior(cand) + distance as f64 * EDIT_PENALTY.ln();
        let entry = (score, count, cand);
        match best {
            Some(b) if !correction_improves(entry, b) => {}
            _ => best = Some(entry),
        }
    }
    match best {
        Some((_, _, cand)) => cand.to_string(),
        None => w.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_stats(words: &[(&str, u64)]) -> NgramStats {
        let mut stats = NgramStats::default();
        for (w, c) in words {
            stats.unigram.insert(w.to_string(), *c);
            stats.total_tokens += c;
        }
        stats
    }

    /// Enumerates all 2^(n-1) segmentations; the independent oracle for the
    /// DP. Scores sum the same quantized per-word values the DP uses, so
    /// exact ties and tie-breaks are order-independent.
    pub(crate) fn brute_force_segment(
        s: &str,
        stats: &NgramStats,
        max_word_len: usize,
    ) -> Segmentation {
        let chars: Vec<char> = s.chars().collect();
        let n = chars.len();
        let mut best: Option<(i64, Vec<String>)> = None;
        for mask in 0..(1u32 << (n - 1)) {
            let mut parts = Vec::new();
            let mut start = 0;
            let mut valid = true;
            for i in 0..n {
                let boundary = i == n - 1 || mask >> i & 1 == 1;
                if boundary {
                    if i + 1 - start > max_word_len {
                        valid = false;
                        break;
                    }
                    parts.push(chars[start..=i].iter().collect::<String>());
                    start = i + 1;
                }
            }
            if !valid {
                continue;
            }
            let mut score = 0i64;
            for p in &parts {
                score += stats.word_score_q(p);
            }
            match &best {
                Some((bs, bp)) if !segmentation_improves(score, &parts, *bs, bp) => {}
                _ => best = Some((score, parts)),
            }
        }
        let (_, parts) = best.expect("non-empty string");
        finish_segmentation(parts, stats)
    }

    #[test]
    fn counts_are_exact() {
        let stats = build_ngram_stats(["a b", "a c"]).unwrap();
        assert_eq!(stats.count("a"), 2);
        assert_eq!(stats.count("b"), 1);
        assert_eq!(stats.count("c"), 1);
        assert_eq!(stats.bigram_count("a", "b"), 1);
        assert_eq!(stats.bigram_count("a", "c"), 1);
        assert_eq!(stats.bigram_count("b", "a"), 0);
        assert_eq!(stats.total_tokens(), 4);
        assert_eq!(stats.vocab_size(), 3);
    }

    #[test]
    fn single_token_line_has_no_bigrams() {
        let stats = build_ngram_stats(["x"]).unwrap();
        assert_eq!(stats.count("x"), 1);
        assert_eq!(stats.total_tokens(), 1);
        assert!(stats.bigram.is_empty());
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let lines: Vec<&str> = vec![];
        assert!(matches!(
            build_ngram_stats(lines),
            Err(CoreError::EmptyCorpus)
        ));
        assert!(matches!(
            build_ngram_stats(["", "  "]),
            Err(CoreError::EmptyCorpus)
        ));
    }

    #[test]
    fn stats_round_trip_text_format() {
        let stats = build_ngram_stats(["twin peaks", "tv series", "twin peaks returns"]).unwrap();
        let text = stats.to_text();
        let back = NgramStats::from_text(&text).unwrap();
        assert_eq!(stats, back);
        assert!(text.starts_with("total_tokens\t7\n"));
        assert!(text.contains("twin peaks\t2"));
    }

    #[test]
    fn splits_known_compound() {
        let stats = toy_stats(&[("twin", 50), ("peaks", 40), ("season", 30), ("of", 100)]);
        let seg = viterbi_segment("twinpeaks", &stats, 20).unwrap();
        assert_eq!(seg.parts, vec!["twin", "peaks"]);
    }

    #[test]
    fn whole_known_word_dominates() {
        let stats = toy_stats(&[("season", 30), ("sea", 2), ("son", 2)]);
        let seg = viterbi_segment("season", &stats, 20).unwrap();
        assert_eq!(seg.parts, vec!["season"]);
    }

    #[test]
    fn concatenation_reconstructs_input() {
        let stats = toy_stats(&[("ab", 3), ("a", 1)]);
        for s in ["ab", "aab", "zzz", "abab"] {
            let seg = viterbi_segment(s, &stats, 20).unwrap();
            assert_eq!(seg.parts.concat(), s);
            assert!(seg.score.is_finite());
        }
    }

    #[test]
    fn empty_string_is_rejected() {
        let stats = toy_stats(&[("a", 1)]);
        assert!(matches!(
            viterbi_segment("", &stats, 20),
            Err(CoreError::EmptyString)
        ));
    }

    #[test]
    fn matches_brute_force_on_small_lexicon() {
        let stats = toy_stats(&[
            ("a", 9),
            ("ab", 9),
            ("b", 9),
            ("ba", 3),
            ("aa", 3),
            ("bb", 7),
            ("abc", 5),
            ("c", 2),
        ]);
        let alphabet = ['a', 'b', 'c'];
        let mut checked = 0;
        for len in 1..=7usize {
            for code in 0..3usize.pow(len as u32) {
                let mut s = String::new();
                let mut c = code;
                for _ in 0..len {
                    s.push(alphabet[c % 3]);
                    c /= 3;
                }
                let dp = viterbi_segment(&s, &stats, 4).unwrap();
                let oracle = brute_force_segment(&s, &stats, 4);
                assert_eq!(dp.parts, oracle.parts, "input {:?}", s);
                assert_eq!(dp.score, oracle.score, "input {:?}", s);
                checked += 1;
            }
        }
        assert!(checked > 500);
    }

    #[test]
    fn raising_winner_counts_keeps_it_winning() {
        let mut stats = toy_stats(&[("twin", 10), ("peaks", 10), ("twi", 9), ("npeaks", 9)]);
        let before = viterbi_segment("twinpeaks", &stats, 20).unwrap();
        for part in before.parts.clone() {
            stats.increment(&part, 50);
        }
        let after = viterbi_segment("twinpeaks", &stats, 20).unwrap();
        assert_eq!(after.parts, before.parts);
        let oracle = brute_force_segment("twinpeaks", &stats, 20);
        assert_eq!(after.parts, oracle.parts);
    }

    #[test]
    fn bigram_mode_uses_context() {
        let stats = build_ngram_stats([
            "new york city",
            "new york city",
            "new york city",
            "yorkcity fans",
        ])
        .unwrap();
        let uni = viterbi_segment("newyorkcity", &stats, 20).unwrap();
        let bi = viterbi_segment_bigram("newyorkcity", &stats, 20).unwrap();
        // The unigram DP keeps the fused token (fewer parts, one rare word
        // beats two probability factors); the bigram pass rewards the chain
        // new -> york -> city.
        assert_eq!(uni.parts, vec!["new", "yorkcity"]);
        assert_eq!(bi.parts, vec!["new", "york", "city"]);
        assert_eq!(bi.parts.concat(), "newyorkcity");
    }

    #[test]
    fn in_vocabulary_word_is_unchanged() {
        let stats = toy_stats(&[("hello", 100), ("help", 10)]);
        assert_eq!(spell_correct("hello", &stats, 2), "hello");
    }

    // Brute-force candidate generation over all distance-1 edits of the
    // input, filtered to the vocabulary.
    fn norvig_edits1(w: &str) -> Vec<String> {
        let letters: Vec<char> = ('a'..='z').collect();
        let chars: Vec<char> = w.chars().collect();
        let mut out = Vec::new();
        for i in 0..=chars.len() {
            for &l in &letters {
                let mut ins: Vec<char> = chars.clone();
                ins.insert(i, l);
                out.push(ins.into_iter().collect());
            }
            if i < chars.len() {
                let mut del = chars.clone();
                del.remove(i);
                out.push(del.into_iter().collect());
                for &l in &letters {
                    let mut sub = chars.clone();
                    sub[i] = l;
                    out.push(sub.into_iter().collect());
                }
            }
        }
        out
    }

    #[test]
    fn correction_matches_brute_force_argmax() {
        let stats = toy_stats(&[("hello", 100), ("help", 10), ("halo", 3)]);
        assert_eq!(spell_correct("helo", &stats, 1), "hello");

        let mut best: Option<(f64, u64, String)> = None;
        for cand in norvig_edits1("helo") {
            if !stats.contains(&cand) {
                continue;
            }
            let score = stats.word_log_prob(&cand) + EDIT_PENALTY.ln();
            let entry = (score, stats.count(&cand), cand.clone());
            match &best {
                Some(b) if !correction_improves((entry.0, entry.1, &entry.2), (b.0, b.1, &b.2)) => {
                }
                _ => best = Some(entry),
            }
        }
        assert_eq!(best.unwrap().2, "hello");
    }

    #[test]
    fn no_candidate_falls_back_to_input() {
        let stats = toy_stats(&[("hello", 100)]);
        assert_eq!(spell_correct("zzzzqq", &stats, 2), "zzzzqq");
    }

    #[test]
    fn correction_never_exceeds_edit_budget() {
        let stats = toy_stats(&[("abcd", 5), ("abcdefgh", 500)]);
        let out = spell_correct("abce", &stats, 1);
        assert_eq!(out, "abcd");
        let far = spell_correct("qqqq", &stats, 1);
        assert_eq!(far, "qqqq");
    }

    #[test]
    fn context_mode_can_flip_the_choice() {
        let mut stats =
            build_ngram_stats(["salt lake city", "salt lake city", "lace dress"]).unwrap();
        // Make "lace" dominate the unigram prior by more than one edit
        // penalty; the bigram context still favors "salt lake".
        stats.increment("lace", 300);
        let plain = spell_correct("lke", &stats, 2);
        let contextual = spell_correct_with_context("lke", Some("salt"), &stats, 2);
        assert_eq!(plain, "lace");
        assert_eq!(contextual, "lake");
    }

    proptest! {
        #[test]
        fn dp_equals_oracle_on_random_inputs(
            s in "[ab]{1,8}",
            counts in proptest::collection::vec(1u64..50, 4),
        ) {
            let stats = toy_stats(&[
                ("a", counts[0]),
                ("b", counts[1]),
                ("ab", counts[2]),
                ("ba", counts[3]),
            ]);
            let dp = viterbi_segment(&s, &stats, 5).unwrap();
            let oracle = brute_force_segment(&s, &stats, 5);
            prop_assert_eq!(&dp.parts, &oracle.parts);
            prop_assert_eq!(dp.score, oracle.score);
            prop_assert_eq!(dp.parts.concat(), s);
        }
    }
}
