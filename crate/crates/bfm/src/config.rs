//! Plain-text run configuration and parameter-list parsing.
//!
//! A config file holds one `key = value` pair per line. Blank lines and lines
//! starting with `#` are ignored, keys are lower-case flag names without the
//! leading dashes, and a key may appear only once. Values run to the end of
//! the line and are trimmed; an optional pair of surrounding double quotes is
//! stripped.

use crate::error::{BfmError, Result};

/// One `key = value` line of a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEntry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

fn perr(line: usize, column: usize, reason: impl Into<String>) -> BfmError {
    BfmError::Parse {
        line,
        column,
        reason: reason.into(),
    }
}

pub fn parse_config_str(text: &str) -> Result<Vec<ConfigEntry>> {
    let mut out: Vec<ConfigEntry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some(eq) = raw.find('=') else {
            return Err(perr(line, 1, "expected `key = value`"));
        };
        let key = raw[..eq].trim();
        if key.is_empty() {
            return Err(perr(line, 1, "empty key"));
        }
        let key_col = raw.find(key).unwrap_or(0) + 1;
        if let Some((off, c)) = key
            .char_indices()
            .find(|(_, c)| !(c.is_ascii_lowercase() || c.is_ascii_digit() || *c == '-' || *c == '_'))
        {
            return Err(perr(line, key_col + off, format!("invalid character {c:?} in key")));
        }
        if key.starts_with('-') {
            return Err(perr(line, key_col, "keys are written without leading dashes"));
        }
        let mut value = raw[eq + 1..].trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        if value.contains('"') {
            return Err(perr(line, eq + 2, "stray quote in value"));
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            return Err(perr(
                line,
                key_col,
                format!("duplicate key `{key}` (first on line {})", prev.line),
            ));
        }
        out.push(ConfigEntry {
            key: key.to_string(),
            value: value.to_string(),
            line,
        });
    }
    Ok(out)
}

pub fn parse_config(path: &std::path::Path) -> Result<Vec<ConfigEntry>> {
    let text = std::fs::read_to_string(path).map_err(|source| BfmError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

/// Comma-separated list of finite, strictly positive numbers.
pub fn parse_params(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Err(perr(1, 1, "empty parameter list"));
    }
    let mut out = Vec::new();
    let mut col = 1;
    for field in s.split(',') {
        let t = field.trim();
        let v: f64 = t.parse().map_err(|_| perr(1, col, format!("`{t}` is not a number")))?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(perr(1, col, format!("`{t}` must be finite and > 0")));
        }
        out.push(v);
        col += field.len() + 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn config_basic() {
        let text = "# run\nmodel = bfm\n\nseed=7\n out-dir = \"a b\" \n";
        let e = parse_config_str(text).unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!((e[0].key.as_str(), e[0].value.as_str(), e[0].line), ("model", "bfm", 2));
        assert_eq!(e[1].value, "7");
        assert_eq!(e[2].value, "a b");
    }

    #[test]
    fn config_errors_have_positions() {
        for (text, line) in [
            ("model bfm", 1),
            ("a=1\nModel=2", 2),
            ("a=1\na=2", 2),
            ("--seed=1", 1),
            ("=3", 1),
        ] {
            match parse_config_str(text) {
                Err(BfmError::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn params_parse() {
        assert_eq!(parse_params("0.01,2.0, 0.6 ,0.6").unwrap(), vec![0.01, 2.0, 0.6, 0.6]);
        assert!(parse_params("").is_err());
        assert!(parse_params("1,,2").is_err());
        assert!(parse_params("1,-2").is_err());
        assert!(parse_params("1,inf").is_err());
        match parse_params("1,0") {
            Err(BfmError::Parse { column, .. }) => assert_eq!(column, 3),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn params_round_trip(v in prop::collection::vec(1e-300f64..1e300, 1..8)) {
            let s = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
            prop_assert_eq!(parse_params(&s).unwrap(), v);
        }

        #[test]
        fn config_never_panics(s in "\\PC{0,200}") {
            let _ = parse_config_str(&s);
        }
    }
}
