use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

/// Parse a flat `key = value` file. Keys are flag names without the leading
/// dashes; `#` starts a comment line. Later keys override earlier ones.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError {
            line: i + 1,
            message: format!("expected key = value, got {line:?}"),
        })?;
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() {
            return Err(ConfigError {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        out.insert(key.to_owned(), value.trim().to_owned());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_pairs() {
        let cfg = parse_config_file("# run\nmode = coherency\n--lambda=4\n\nseed = 7\nseed = 8\n").unwrap();
        assert_eq!(cfg["mode"], "coherency");
        assert_eq!(cfg["lambda"], "4");
        assert_eq!(cfg["seed"], "8");
    }

    #[test]
    fn rejects_bare_words() {
        let err = parse_config_file("mode = x\nnonsense\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(parse_config_file(" = 3").is_err());
    }
}
