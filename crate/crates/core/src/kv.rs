//! Plain `key=value` text: one entry per line, `#` starts a comment.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KvError {
    #[error("line {line}: expected `key=value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: cannot parse {value:?}: {reason}")]
    Value {
        key: String,
        value: String,
        reason: String,
    },
}

/// Entries in file order. Keys are trimmed; values are trimmed of surrounding whitespace.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>, KvError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| KvError::Syntax {
            line: i + 1,
            text: raw.to_string(),
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(KvError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        }
        if out.iter().any(|(e, _)| e == k) {
            return Err(KvError::Duplicate {
                line: i + 1,
                key: k.to_string(),
            });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn write_kv<K: AsRef<str>, V: AsRef<str>>(entries: &[(K, V)]) -> String {
    let mut s = String::new();
    for (k, v) in entries {
        s.push_str(k.as_ref());
        s.push('=');
        s.push_str(v.as_ref());
        s.push('\n');
    }
    s
}

pub fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, KvError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| KvError::Value {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}
