//! Twitter-aware tokenization, normalization, and annotation.
//!
//! The processor lowercases words, replaces entities (URLs, emails, user
//! handles, numbers, dates, times, currencies) with tags, annotates
//! all-caps/emphasized/elongated/censored tokens, maps emoticons to
//! sentiment tags, and splits hashtags with the Viterbi segmenter.
//! Annotation tags follow the token they annotate.

mod lexicon;
mod tokenize;

pub use lexicon::EmoticonLexicon;
pub use tokenize::{Token, TokenKind};

use crate::segment::{spell_correct, viterbi_segment, NgramStats};

/// The closed set of output tags.
pub const TAG_SET: &[&str] = &[
    "<hashtag>",
    "</hashtag>",
    "<allcaps>",
    "<emphasis>",
    "<repeated>",
    "<elongated>",
    "<censored>",
    "<url>",
    "<email>",
    "<user>",
    "<number>",
    "<date>",
    "<time>",
    "<money>",
    "<happy>",
    "<sad>",
    "<laugh>",
    "<surprise>",
    "<annoyed>",
    "<kiss>",
    "<heart>",
];

#[derive(Debug, Clone)]
pub struct ProcessOptions {
    /// Split hashtag bodies with the Viterbi segmenter (needs stats).
    pub segment_hashtags: bool,
    /// Correct out-of-vocabulary alphabetic words (needs stats).
    pub spell_correct: bool,
    /// Edit-distance budget for spell correction (1 or 2).
    pub max_edits: usize,
    /// Collapse letter runs of length >= 3 and annotate `<elongated>`.
    pub collapse_elongated: bool,
    /// Word-length bound for the segmentation DP.
    pub max_word_len: usize,
}

impl Default for ProcessOptions {
    fn default() -> Self {
        Self {
            segment_hashtags: true,
            spell_correct: false,
            max_edits: 1,
            collapse_elongated: true,
            max_word_len: 20,
        }
    }
}

/// Normalized token stream; every entry is a lowercase word, a punctuation
/// character, or a tag from [`TAG_SET`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessedText {
    pub tokens: Vec<String>,
}

impl ProcessedText {
    pub fn line(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Debug, Clone, Default)]
pub struct TextProcessor {
    lexicon: EmoticonLexicon,
    opts: ProcessOptions,
}

/// Tokenize with the built-in emoticon lexicon.
pub fn tokenize(text: &str) -> Vec<Token> {
    tokenize::tokenize_with(text, &EmoticonLexicon::default())
}

impl TextProcessor {
    pub fn new(opts: ProcessOptions) -> Self {
        Self {
            lexicon: EmoticonLexicon::default(),
            opts,
        }
    }

    pub fn with_lexicon(mut self, lexicon: EmoticonLexicon) -> Self {
        self.lexicon = lexicon;
        self
    }

    pub fn options(&self) -> &ProcessOptions {
        &self.opts
    }

    pub fn tokenize(&self, text: &str) -> Vec<Token> {
        tokenize::tokenize_with(text, &self.lexicon)
    }

    pub fn process(&self, text: &str, stats: Option<&NgramStats>) -> ProcessedText {
        let tokens = self.tokenize(text);
        self.normalize_annotate(&tokens, stats)
    }

    pub fn normalize_annotate(
        &self,
        tokens: &[Token],
        stats: Option<&NgramStats>,
    ) -> ProcessedText {
        let mut out = Vec::with_capacity(tokens.len());
        for token in tokens {
            match &token.kind {
                TokenKind::Word { all_caps } => {
                    self.push_word(&token.surface, *all_caps, stats, &mut out);
                }
                TokenKind::Hashtag => self.push_hashtag(&token.surface, stats, &mut out),
                TokenKind::UserHandle => out.push("<user>".into()),
                TokenKind::Url => out.push("<url>".into()),
                TokenKind::Email => out.push("<email>".into()),
                TokenKind::Number => out.push("<number>".into()),
                TokenKind::Date => out.push("<date>".into()),
                TokenKind::Time => out.push("<time>".into()),
                TokenKind::Money => out.push("<money>".into()),
                TokenKind::Censored => out.push("<censored>".into()),
                TokenKind::Emoticon => match self.lexicon.tag(&token.surface) {
                    Some(tag) => out.push(tag.into()),
                    // Token built against a different lexicon; pass through.
                    None => out.push(token.surface.clone()),
                },
                TokenKind::Emphasis => {
                    let inner = token.surface.trim_matches('*').to_lowercase();
                    out.push(inner);
                    out.push("<emphasis>".into());
                }
                TokenKind::PunctRun => {
                    let mut chars = token.surface.chars();
                    let first = chars.next().expect("non-empty token");
                    out.push(first.to_string());
                    if chars.next().is_some() {
                        out.push("<repeated>".into());
                    }
                }
                TokenKind::Other => out.push(token.surface.clone()),
            }
        }
        ProcessedText { tokens: out }
    }

    fn push_word(
        &self,
        surface: &str,
        all_caps: bool,
        stats: Option<&NgramStats>,
        out: &mut Vec<String>,
    ) {
        let mut word = surface.to_lowercase();
        let mut elongated = false;
        if self.opts.collapse_elongated {
            let collapsed = collapse_letter_runs(&word);
            if collapsed != word {
                elongated = true;
                word = collapsed;
            }
        }
        if self.opts.spell_correct {
            if let Some(stats) = stats {
                if word.chars().all(char::is_alphabetic) && !stats.contains(&word) {
                    word = spell_correct(&word, stats, self.opts.max_edits);
                }
            }
        }
        out.push(word);
        if elongated {
            out.push("<elongated>".into());
        }
        if all_caps {
            out.push("<allcaps>".into());
        }
    }

    fn push_hashtag(&self, surface: &str, stats: Option<&NgramStats>, out: &mut Vec<String>) {
        let body = surface.trim_start_matches('#').to_lowercase();
        out.push("<hashtag>".into());
        for chunk in body
            .split(|c: char| !c.is_alphanumeric())
            .filter(|c| !c.is_empty())
        {
            match stats {
                Some(stats) if self.opts.segment_hashtags => {
                    let seg = viterbi_segment(chunk, stats, self.opts.max_word_len)
                        .expect("chunk is non-empty");
                    out.extend(seg.parts);
                }
                _ => out.push(chunk.to_string()),
            }
        }
        out.push("</hashtag>".into());
    }
}

/// Collapse runs of three or more identical letters to a single letter.
fn collapse_letter_runs(word: &str) -> String {
    let mut out = String::with_capacity(word.len());
    let mut run_char = '\0';
    let mut run_len = 0;
    for c in word.chars().chain(std::iter::once('\0')) {
        if c == run_char {
            run_len += 1;
            continue;
        }
        if run_len > 0 {
            let keep = if run_char.is_alphabetic() && run_len >= 3 {
                1
            } else {
                run_len
            };
            for _ in 0..keep {
                out.push(run_char);
            }
        }
        run_char = c;
        run_len = 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::build_ngram_stats;

    const TABLE_INPUT: &str = r"The *new* season of #TwinPeaks is coming on May 21, 2017. CANT WAIT \o/ !!! #tvseries #davidlynch :D";
    const TABLE_OUTPUT: &str = "the new <emphasis> season of <hashtag> twin peaks </hashtag> is coming on <date> . cant <allcaps> wait <allcaps> <happy> ! <repeated> <hashtag> tv series </hashtag> <hashtag> david lynch </hashtag> <laugh>";

    fn golden_stats() -> NgramStats {
        build_ngram_stats([
            "twin peaks is coming",
            "tv series on tv",
            "david lynch directed the series",
            "twin peaks returns",
            "david lynch",
        ])
        .unwrap()
    }

    #[test]
    fn golden_table_row() {
        let stats = golden_stats();
        let processor = TextProcessor::default();
        let processed = processor.process(TABLE_INPUT, Some(&stats));
        assert_eq!(processed.line(), TABLE_OUTPUT);
    }

    #[test]
    fn allcaps_annotation() {
        let processor = TextProcessor::default();
        let out = processor.process("HELLO", None);
        assert_eq!(out.tokens, vec!["hello", "<allcaps>"]);
    }

    #[test]
    fn handle_and_url_tags() {
        let processor = TextProcessor::default();
        let out = processor.process("@user http://a.b", None);
        assert_eq!(out.tokens, vec!["<user>", "<url>"]);
    }

    #[test]
    fn elongated_words_collapse() {
        let processor = TextProcessor::default();
        let out = processor.process("soooo good", None);
        assert_eq!(out.tokens, vec!["so", "<elongated>", "good"]);
    }

    #[test]
    fn censored_and_money_and_kiss() {
        let processor = TextProcessor::default();
        let out = processor.process("s**t costs $10 :*", None);
        assert_eq!(out.tokens, vec!["<censored>", "costs", "<money>", "<kiss>"]);
    }

    #[test]
    fn hashtag_without_stats_stays_whole() {
        let processor = TextProcessor::default();
        let out = processor.process("#TwinPeaks", None);
        assert_eq!(out.tokens, vec!["<hashtag>", "twinpeaks", "</hashtag>"]);
        let underscored = processor.process("#twin_peaks", None);
        assert_eq!(
            underscored.tokens,
            vec!["<hashtag>", "twin", "peaks", "</hashtag>"]
        );
    }

    #[test]
    fn spell_correction_is_opt_in() {
        let stats = build_ngram_stats(["hello world", "hello there"]).unwrap();
        let off = TextProcessor::default();
        assert_eq!(off.process("helo", Some(&stats)).tokens, vec!["helo"]);
        let on = TextProcessor::new(ProcessOptions {
            spell_correct: true,
            ..ProcessOptions::default()
        });
        assert_eq!(on.process("helo", Some(&stats)).tokens, vec!["hello"]);
        // In-vocabulary words never change.
        assert_eq!(on.process("world", Some(&stats)).tokens, vec!["world"]);
    }

    #[test]
    fn processing_is_deterministic() {
        let stats = golden_stats();
        let processor = TextProcessor::default();
        let a = processor.process(TABLE_INPUT, Some(&stats));
        let b = processor.process(TABLE_INPUT, Some(&stats));
        assert_eq!(a, b);
    }

    #[test]
    fn tags_survive_reprocessing() {
        let stats = golden_stats();
        let processor = TextProcessor::default();
        let once = processor.process(TABLE_INPUT, Some(&stats));
        let twice = processor.process(&once.line(), Some(&stats));
        assert_eq!(once, twice);
        for tag in once.tokens.iter().filter(|t| t.starts_with('<')) {
            assert!(twice.tokens.contains(tag));
        }
    }

    #[test]
    fn output_alphabet_is_closed() {
        let processor = TextProcessor::default();
        let stats = golden_stats();
        for input in [
            TABLE_INPUT,
            "CHECK out www.example.com NOW!!! :) :( <3 #nlp2024",
            "email me@you.org at 4:30pm or 07/11/2011 for $5 ;;; ***",
        ] {
            for token in processor.process(input, Some(&stats)).tokens {
                let ok = TAG_SET.contains(&token.as_str())
                    || token
                        .chars()
                        .all(|c| c.is_lowercase() || !c.is_alphabetic());
                assert!(ok, "unexpected output token {:?}", token);
            }
        }
    }

    #[test]
    fn collapse_rules() {
        assert_eq!(collapse_letter_runs("soooo"), "so");
        assert_eq!(collapse_letter_runs("coool"), "col");
        assert_eq!(collapse_letter_runs("good"), "good");
        assert_eq!(collapse_letter_runs("aaa"), "a");
        assert_eq!(collapse_letter_runs(""), "");
    }
}
