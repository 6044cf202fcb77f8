use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

const BUNDLED_LEXICON: &str = include_str!("../../data/lexicon.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PosTag {
    Noun,
    Adjective,
    VerbInfinitive,
    VerbOther,
    Number,
    Other,
}

impl PosTag {
    pub fn is_nominal(self) -> bool {
        matches!(self, PosTag::Noun | PosTag::Adjective)
    }

    pub fn is_verb(self) -> bool {
        matches!(self, PosTag::VerbInfinitive | PosTag::VerbOther)
    }
}

impl FromStr for PosTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "Noun" => PosTag::Noun,
            "Adjective" => PosTag::Adjective,
            "VerbInfinitive" => PosTag::VerbInfinitive,
            "VerbOther" => PosTag::VerbOther,
            "Number" => PosTag::Number,
            "Other" => PosTag::Other,
            other => return Err(format!("unknown tag {other:?}")),
        })
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Assigns one part-of-speech tag to a single lowercase word.
pub trait PosTagger: Send + Sync {
    fn tag(&self, word: &str) -> PosTag;
}

/// Most-frequent-tag lexicon with suffix heuristics for unknown words.
#[derive(Debug, Clone, Default)]
pub struct LexiconTagger {
    entries: HashMap<String, PosTag>,
}

impl LexiconTagger {
    /// Parse `word<TAB>tag` lines; `#` lines are comments.
    pub fn from_tsv(text: &str) -> Result<Self, String> {
        let mut entries = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, tag) = line
                .split_once('\t')
                .ok_or_else(|| format!("lexicon line {}: expected word<TAB>tag", i + 1))?;
            let tag = tag.trim().parse().map_err(|e| format!("lexicon line {}: {e}", i + 1))?;
            entries.insert(word.trim().to_lowercase(), tag);
        }
        Ok(LexiconTagger { entries })
    }

    pub fn bundled() -> Self {
        Self::from_tsv(BUNDLED_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn insert(&mut self, word: &str, tag: PosTag) {
        self.entries.insert(word.to_lowercase(), tag);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn suffix_guess(word: &str) -> PosTag {
    if word.chars().all(|c| c.is_ascii_digit() || c == ',' || c == '.') && word.chars().any(|c| c.is_ascii_digit()) {
        return PosTag::Number;
    }
    if !word.chars().any(char::is_alphabetic) {
        return PosTag::Other;
    }
    let n = word.len();
    if n > 4 && word.ends_with("ing") || n > 3 && word.ends_with("ed") {
        return PosTag::VerbOther;
    }
    if n > 3 && word.ends_with("ly") {
        return PosTag::Other;
    }
    const ADJ_SUFFIXES: [&str; 9] = ["ous", "ful", "ive", "able", "ible", "less", "ish", "ic", "al"];
    if n > 4 && ADJ_SUFFIXES.iter().any(|s| word.ends_with(s)) {
        return PosTag::Adjective;
    }
    PosTag::Noun
}

impl PosTagger for LexiconTagger {
    fn tag(&self, word: &str) -> PosTag {
        self.entries.get(word).copied().unwrap_or_else(|| suffix_guess(word))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicon_entries() {
        let t = LexiconTagger::bundled();
        assert!(t.len() > 500);
        // "ferret" is listed as a noun in standard dictionaries (WordNet: noun only).
        assert_eq!(t.tag("ferret"), PosTag::Noun);
        assert_eq!(t.tag("two"), PosTag::Number);
        assert_eq!(t.tag("leg"), PosTag::Noun);
        assert_eq!(t.tag("jump"), PosTag::VerbInfinitive);
        assert_eq!(t.tag("play"), PosTag::VerbInfinitive);
        assert_eq!(t.tag("outer"), PosTag::Adjective);
        assert_eq!(t.tag("the"), PosTag::Other);
    }

    #[test]
    fn suffix_fallback() {
        let t = LexiconTagger::default();
        assert_eq!(t.tag("42"), PosTag::Number);
        assert_eq!(t.tag("skating"), PosTag::VerbOther);
        assert_eq!(t.tag("painted"), PosTag::VerbOther);
        assert_eq!(t.tag("quickly"), PosTag::Other);
        assert_eq!(t.tag("famous"), PosTag::Adjective);
        assert_eq!(t.tag("zebra"), PosTag::Noun);
        assert_eq!(t.tag("&"), PosTag::Other);
    }

    #[test]
    fn bad_lexicon_line() {
        assert!(LexiconTagger::from_tsv("word Noun").is_err());
        assert!(LexiconTagger::from_tsv("word\tVerb").is_err());
    }
}
