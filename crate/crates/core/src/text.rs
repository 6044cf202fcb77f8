//! Surface normalization shared by parsing, generation and scoring.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("phrase {0:?} is empty after normalization")]
pub struct EmptyPhrase(pub String);

/// Lowercase, map underscores to spaces, collapse whitespace and split into words.
pub fn normalize_surface(phrase: &str) -> Result<Vec<String>, EmptyPhrase> {
    let words: Vec<String> = phrase
        .replace('_', " ")
        .to_lowercase()
        .split_whitespace()
        .map(str::to_owned)
        .collect();
    if words.is_empty() {
        return Err(EmptyPhrase(phrase.to_owned()));
    }
    Ok(words)
}

/// Split a camel-case identifier into lowercase words.
///
/// Runs of capitals are kept together as an acronym, so `ExternalURL`
/// becomes `external url` and `HTTPServer` becomes `http server`.
pub fn split_camel_case(ident: &str) -> Vec<String> {
    let chars: Vec<char> = ident.chars().collect();
    let mut words = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphanumeric() {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            continue;
        }
        if c.is_uppercase() && !current.is_empty() {
            let prev = chars[i - 1];
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            if prev.is_lowercase() || prev.is_numeric() || (prev.is_uppercase() && next_lower) {
                words.push(std::mem::take(&mut current));
            }
        }
        current.extend(c.to_lowercase());
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

pub fn join_words(words: &[String]) -> String {
    words.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn casefold_and_collapse() {
        assert_eq!(normalize_surface("Pet  Store").unwrap(), vec!["pet", "store"]);
    }

    #[test]
    fn underscore_separator() {
        assert_eq!(normalize_surface("pet_store").unwrap(), vec!["pet", "store"]);
    }

    #[test]
    fn blank_is_error() {
        assert!(normalize_surface("   ").is_err());
        assert!(normalize_surface("_ _").is_err());
    }

    #[test]
    fn camel_case() {
        assert_eq!(split_camel_case("AtLocation"), vec!["at", "location"]);
        assert_eq!(split_camel_case("IsA"), vec!["is", "a"]);
        assert_eq!(split_camel_case("CapableOf"), vec!["capable", "of"]);
        assert_eq!(split_camel_case("ExternalURL"), vec!["external", "url"]);
        assert_eq!(split_camel_case("HTTPServer"), vec!["http", "server"]);
        assert_eq!(split_camel_case("dbpedia"), vec!["dbpedia"]);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "[a-zA-Z_ \t]{0,24}") {
            if let Ok(once) = normalize_surface(&s) {
                let twice = normalize_surface(&join_words(&once)).unwrap();
                prop_assert_eq!(once, twice);
            }
        }
    }
}
