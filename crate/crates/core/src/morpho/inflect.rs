use std::collections::HashMap;

const BUNDLED_GERUNDS: &str = include_str!("../../data/gerunds.tsv");
const BUNDLED_PLURALS: &str = include_str!("../../data/plurals.tsv");

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn vowel_groups(word: &str) -> usize {
    let mut groups = 0;
    let mut prev = false;
    for c in word.chars() {
        let v = is_vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    groups
}

/// Parse `base<TAB>inflected` lines.
pub fn parse_exceptions(text: &str) -> Result<HashMap<String, String>, String> {
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (base, inflected) = line
            .split_once('\t')
            .ok_or_else(|| format!("exceptions line {}: expected base<TAB>inflected", i + 1))?;
        map.insert(base.trim().to_owned(), inflected.trim().to_owned());
    }
    Ok(map)
}

/// Rule-based English inflection backed by exception lists.
#[derive(Debug, Clone, Default)]
pub struct Inflector {
    gerunds: HashMap<String, String>,
    plurals: HashMap<String, String>,
}

impl Inflector {
    pub fn new(gerunds: HashMap<String, String>, plurals: HashMap<String, String>) -> Self {
        Inflector { gerunds, plurals }
    }

    pub fn bundled() -> Self {
        Inflector {
            gerunds: parse_exceptions(BUNDLED_GERUNDS).expect("bundled gerunds are valid"),
            plurals: parse_exceptions(BUNDLED_PLURALS).expect("bundled plurals are valid"),
        }
    }

    pub fn gerund(&self, verb: &str) -> String {
        if let Some(g) = self.gerunds.get(verb) {
            return g.clone();
        }
        let chars: Vec<char> = verb.chars().collect();
        let n = chars.len();
        if n >= 2 && verb.ends_with("ie") {
            return format!("{}ying", &verb[..verb.len() - 2]);
        }
        if n > 2 && chars[n - 1] == 'e' && !is_vowel(chars[n - 2]) && chars[n - 2] != 'y' {
            return format!("{}ing", &verb[..verb.len() - 1]);
        }
        // consonant-vowel-consonant monosyllable: run -> running
        if n >= 3
            && vowel_groups(verb) == 1
            && !is_vowel(chars[n - 1])
            && !matches!(chars[n - 1], 'w' | 'x' | 'y')
            && is_vowel(chars[n - 2])
            && !is_vowel(chars[n - 3])
        {
            return format!("{verb}{}ing", chars[n - 1]);
        }
        format!("{verb}ing")
    }

    pub fn pluralize(&self, noun: &str) -> String {
        if let Some(p) = self.plurals.get(noun) {
            return p.clone();
        }
        let chars: Vec<char> = noun.chars().collect();
        let n = chars.len();
        if ["s", "x", "z", "ch", "sh"].iter().any(|s| noun.ends_with(s)) {
            return format!("{noun}es");
        }
        if n >= 2 && chars[n - 1] == 'y' && !is_vowel(chars[n - 2]) {
            return format!("{}ies", &noun[..noun.len() - 1]);
        }
        format!("{noun}s")
    }
}
