use std::collections::HashMap;
use std::path::Path;

use crate::{CoreError, Result};

/// Emoticon surface -> annotation tag map. The built-in entries cover the
/// common ASCII emoticons; a lexicon file (`surface TAB tag` per line)
/// extends or overrides them.
#[derive(Debug, Clone)]
pub struct EmoticonLexicon {
    map: HashMap<String, String>,
    // Surfaces sorted by descending byte length for longest-match scanning.
    surfaces: Vec<String>,
}

const BUILTIN: &[(&str, &str)] = &[
    (":)", "<happy>"),
    (":-)", "<happy>"),
    ("(:", "<happy>"),
    ("\\o/", "<happy>"),
    ("=)", "<happy>"),
    (":D", "<laugh>"),
    (":-D", "<laugh>"),
    ("xD", "<laugh>"),
    ("XD", "<laugh>"),
    (":(", "<sad>"),
    (":-(", "<sad>"),
    ("):", "<sad>"),
    (":o", "<surprise>"),
    (":O", "<surprise>"),
    (":/", "<annoyed>"),
    (":-/", "<annoyed>"),
    (":*", "<kiss>"),
    ("<3", "<heart>"),
];

impl Default for EmoticonLexicon {
    fn default() -> Self {
        let mut lex = Self::empty();
        for (surface, tag) in BUILTIN {
            lex.insert(surface, tag);
        }
        lex
    }
}

impl EmoticonLexicon {
    pub fn empty() -> Self {
        Self {
            map: HashMap::new(),
            surfaces: Vec::new(),
        }
    }

    /// Built-in entries extended by `surface TAB tag` lines; later entries
    /// override earlier ones. Blank lines and `#` comments are skipped.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| CoreError::io(path.as_ref().display().to_string(), e))?;
        let mut lex = Self::default();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (surface, tag) = line
                .split_once('\t')
                .ok_or_else(|| CoreError::Parse(format!("lexicon line {} has no tab", i + 1)))?;
            if !(tag.starts_with('<') && tag.ends_with('>') && tag.len() > 2) {
                return Err(CoreError::Parse(format!(
                    "lexicon tag {:?} on line {} is not of the form <name>",
                    tag,
                    i + 1
                )));
            }
            lex.insert(surface, tag);
        }
        Ok(lex)
    }

    pub fn insert(&mut self, surface: &str, tag: &str) {
        if self
            .map
            .insert(surface.to_string(), tag.to_string())
            .is_none()
        {
            self.surfaces.push(surface.to_string());
            self.surfaces.sort_by_key(|s| std::cmp::Reverse(s.len()));
        }
    }

    pub fn tag(&self, surface: &str) -> Option<&str> {
        self.map.get(surface).map(String::as_str)
    }

    /// Byte length of the longest surface that prefixes `rest`.
    pub fn match_at(&self, rest: &str) -> Option<usize> {
        self.surfaces
            .iter()
            .find(|s| rest.starts_with(s.as_str()))
            .map(String::len)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}
