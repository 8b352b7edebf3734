//! Twitter-aware tokenizer. Scans left to right, trying category patterns
//! in a fixed precedence order at each position:
//! tag > url > email > user handle > hashtag > money > time > date >
//! emoticon > number > censored > emphasis > word > punctuation run > other.

use std::sync::LazyLock;

use regex::Regex;

use super::lexicon::EmoticonLexicon;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Word { all_caps: bool },
    Hashtag,
    UserHandle,
    Url,
    Email,
    Number,
    Date,
    Time,
    Money,
    Emoticon,
    PunctRun,
    Emphasis,
    Censored,
    Other,
}

/// A recognized lexical unit with its byte span into the source string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub kind: TokenKind,
    pub span: (usize, usize),
}

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:https?://|www\.)[^\s]+").unwrap());
static EMAIL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}").unwrap()
});
static USER_HANDLE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^@\w+").unwrap());
static HASHTAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^#[A-Za-z0-9][A-Za-z0-9_]*").unwrap());
// Currency symbol + amount + optional scale suffix, amount + trailing
// symbol, or amount + written scale (25mil).
static MONEY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(?:[$€£]\d+(?:[.,]\d+)?(?:\s?(?:mil|k|m|bn))?|\d+(?:[.,]\d+)?\s?[$€£]|\d+(?:[.,]\d+)?(?:mil|bn|k)\b)")
        .unwrap()
});
static TIME: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\d{1,2}:\d{2}(?::\d{2})?(?:\s?(?:[ap]m|[ap]\.m\.))?").unwrap()
});
static DATE_MONTH_NAME: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^(?:jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|jun(?:e)?|jul(?:y)?|aug(?:ust)?|sep(?:t(?:ember)?)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?)\.?\s+\d{1,2}(?:st|nd|rd|th)?(?:,?\s*\d{4})?",
    )
    .unwrap()
});
static DATE_NUMERIC: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\d{1,4}[/.-]\d{1,2}[/.-]\d{1,4}").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[-+]?\d+(?:[.,]\d+)*").unwrap());
static WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\p{L}+(?:['’-]\p{L}+)*").unwrap());
static EMPHASIS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\*[\p{L}\p{N}]+\*").unwrap());
// Run of letters and asterisks that is a censoring candidate.
static LETTER_STAR_RUN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[\p{L}*]+").unwrap());
// Output tags of the normalizer; recognized so processed text re-tokenizes
// without tearing tags apart.
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^</?[a-z]+>").unwrap());

/// True when the match may not run into trailing word characters,
/// e.g. so `4:30pmX` is not read as a time.
fn boundary_ok(rest: &str, len: usize) -> bool {
    rest[len..]
        .chars()
        .next()
        .is_none_or(|c| !c.is_alphanumeric())
}

fn all_caps_word(surface: &str) -> bool {
    surface.chars().count() >= 2
        && surface
            .chars()
            .all(|c| c.is_alphabetic() && c.is_uppercase())
}

pub(super) fn tokenize_with(text: &str, lexicon: &EmoticonLexicon) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut pos = 0;
    let len = text.len();
    while pos < len {
        let c = text[pos..].chars().next().unwrap();
        if c.is_whitespace() {
            pos += c.len_utf8();
            continue;
        }
        let rest = &text[pos..];
        let (kind, match_len) = match_at(rest, lexicon);
        tokens.push(Token {
            surface: rest[..match_len].to_string(),
            kind,
            span: (pos, pos + match_len),
        });
        pos += match_len;
    }
    tokens
}

fn match_at(rest: &str, lexicon: &EmoticonLexicon) -> (TokenKind, usize) {
    if let Some(m) = TAG.find(rest) {
        return (TokenKind::Other, m.end());
    }
    if let Some(m) = URL.find(rest) {
        return (TokenKind::Url, m.end());
    }
    if let Some(m) = EMAIL.find(rest) {
        return (TokenKind::Email, m.end());
    }
    if let Some(m) = USER_HANDLE.find(rest) {
        return (TokenKind::UserHandle, m.end());
    }
    if let Some(m) = HASHTAG.find(rest) {
        return (TokenKind::Hashtag, m.end());
    }
    if let Some(m) = MONEY.find(rest) {
        if boundary_ok(rest, m.end()) {
            return (TokenKind::Money, m.end());
        }
    }
    if let Some(m) = TIME.find(rest) {
        if boundary_ok(rest, m.end()) {
            return (TokenKind::Time, m.end());
        }
    }
    for date in [&DATE_MONTH_NAME, &DATE_NUMERIC] {
        if let Some(m) = date.find(rest) {
            if boundary_ok(rest, m.end()) {
                return (TokenKind::Date, m.end());
            }
        }
    }
    if let Some(len) = lexicon.match_at(rest) {
        if boundary_ok(rest, len) {
            return (TokenKind::Emoticon, len);
        }
    }
    if let Some(m) = NUMBER.find(rest) {
        if boundary_ok(rest, m.end()) {
            return (TokenKind::Number, m.end());
        }
    }
    if let Some(m) = LETTER_STAR_RUN.find(rest) {
        let run = m.as_str();
        let stars = run.chars().filter(|c| *c == '*').count();
        let letters = run.chars().filter(|c| c.is_alphabetic()).count();
        let is_emphasis_form = EMPHASIS.find(run).is_some_and(|e| e.end() == run.len());
        if stars >= 2 && letters >= 1 && !is_emphasis_form {
            return (TokenKind::Censored, m.end());
        }
    }
    if let Some(m) = EMPHASIS.find(rest) {
        return (TokenKind::Emphasis, m.end());
    }
    if let Some(m) = WORD.find(rest) {
        let all_caps = all_caps_word(m.as_str());
        return (TokenKind::Word { all_caps }, m.end());
    }
    let first = rest.chars().next().unwrap();
    if first.is_ascii_punctuation() {
        // Run of the same punctuation character.
        let mut end = 0;
        for ch in rest.chars() {
            if ch != first {
                break;
            }
            end += ch.len_utf8();
        }
        return (TokenKind::PunctRun, end);
    }
    (TokenKind::Other, first.len_utf8())
}

#[cfg(test)]
mod tests {
    use super::super::lexicon::EmoticonLexicon;
    use super::*;

    fn kinds(text: &str) -> Vec<(String, TokenKind)> {
        let lex = EmoticonLexicon::default();
        tokenize_with(text, &lex)
            .into_iter()
            .map(|t| (t.surface, t.kind))
            .collect()
    }

    #[test]
    fn table_row_categories() {
        let toks =
            kinds(r"The *new* season of #TwinPeaks is coming on May 21, 2017. CANT WAIT \o/ !!!");
        assert!(toks.contains(&("*new*".into(), TokenKind::Emphasis)));
        assert!(toks.contains(&("#TwinPeaks".into(), TokenKind::Hashtag)));
        assert!(toks.contains(&("May 21, 2017".into(), TokenKind::Date)));
        assert!(toks.contains(&("CANT".into(), TokenKind::Word { all_caps: true })));
        assert!(toks.contains(&("WAIT".into(), TokenKind::Word { all_caps: true })));
        assert!(toks.contains(&(r"\o/".into(), TokenKind::Emoticon)));
        assert!(toks.contains(&("!!!".into(), TokenKind::PunctRun)));
        assert!(toks.contains(&(".".into(), TokenKind::PunctRun)));
    }

    #[test]
    fn empty_input_gives_no_tokens() {
        assert!(kinds("").is_empty());
        assert!(kinds("   \t\n").is_empty());
    }

    #[test]
    fn money_and_time() {
        let toks = kinds("$10 at 4:30pm");
        assert_eq!(
            toks,
            vec![
                ("$10".into(), TokenKind::Money),
                ("at".into(), TokenKind::Word { all_caps: false }),
                ("4:30pm".into(), TokenKind::Time),
            ]
        );
    }

    #[test]
    fn more_money_shapes() {
        assert_eq!(kinds("25mil")[0], ("25mil".into(), TokenKind::Money));
        assert_eq!(kinds("50€")[0], ("50€".into(), TokenKind::Money));
        assert_eq!(kinds("$1,000")[0], ("$1,000".into(), TokenKind::Money));
    }

    #[test]
    fn date_shapes() {
        assert_eq!(
            kinds("07/11/2011")[0],
            ("07/11/2011".into(), TokenKind::Date)
        );
        assert_eq!(
            kinds("April 23rd")[0],
            ("April 23rd".into(), TokenKind::Date)
        );
        assert_eq!(kinds("11:00 am")[0], ("11:00 am".into(), TokenKind::Time));
        // Bare month word stays a word.
        assert_eq!(
            kinds("may I")[0],
            ("may".into(), TokenKind::Word { all_caps: false })
        );
    }

    #[test]
    fn handles_urls_emails() {
        let toks = kinds("@user http://a.b mail me@example.com");
        assert_eq!(toks[0], ("@user".into(), TokenKind::UserHandle));
        assert_eq!(toks[1], ("http://a.b".into(), TokenKind::Url));
        assert_eq!(toks[3], ("me@example.com".into(), TokenKind::Email));
    }

    #[test]
    fn censored_vs_emphasis() {
        assert_eq!(kinds("s**t")[0], ("s**t".into(), TokenKind::Censored));
        assert_eq!(kinds("f***")[0], ("f***".into(), TokenKind::Censored));
        assert_eq!(kinds("*very*")[0], ("*very*".into(), TokenKind::Emphasis));
        // Two asterisks with no letters stay a punctuation run.
        assert_eq!(kinds("**")[0], ("**".into(), TokenKind::PunctRun));
    }

    #[test]
    fn all_caps_needs_two_alphabetic_chars() {
        assert_eq!(
            kinds("I")[0],
            ("I".into(), TokenKind::Word { all_caps: false })
        );
        assert_eq!(
            kinds("OK")[0],
            ("OK".into(), TokenKind::Word { all_caps: true })
        );
        assert_eq!(
            kinds("The")[0],
            ("The".into(), TokenKind::Word { all_caps: false })
        );
        // Apostrophe breaks pure-alphabetic all-caps.
        assert_eq!(
            kinds("CAN'T")[0],
            ("CAN'T".into(), TokenKind::Word { all_caps: false })
        );
    }

    #[test]
    fn compound_words_stay_single_tokens() {
        assert_eq!(
            kinds("anti-american")[0],
            ("anti-american".into(), TokenKind::Word { all_caps: false })
        );
    }

    #[test]
    fn tags_survive_retokenization() {
        let toks = kinds("<hashtag> twin </hashtag> <date>");
        assert_eq!(toks[0], ("<hashtag>".into(), TokenKind::Other));
        assert_eq!(toks[2], ("</hashtag>".into(), TokenKind::Other));
        assert_eq!(toks[3], ("<date>".into(), TokenKind::Other));
    }

    #[test]
    fn heart_emoticon_beats_punctuation() {
        assert_eq!(kinds("<3")[0], ("<3".into(), TokenKind::Emoticon));
    }

    #[test]
    fn spans_cover_surfaces_and_gaps_are_whitespace() {
        let text = "The *new* season  of #TwinPeaks!  \\o/";
        let lex = EmoticonLexicon::default();
        let toks = tokenize_with(text, &lex);
        let mut cursor = 0;
        for t in &toks {
            assert_eq!(&text[t.span.0..t.span.1], t.surface);
            assert!(t.span.0 >= cursor);
            assert!(text[cursor..t.span.0].chars().all(char::is_whitespace));
            cursor = t.span.1;
        }
        assert!(text[cursor..].chars().all(char::is_whitespace));
    }
}
