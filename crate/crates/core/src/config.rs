//! Plain `key = value` settings files with `#` comments.

use std::path::Path;

use crate::error::{Error, Result};

/// Parses settings in file order. Keys may be written with or without a
/// leading `--`; duplicate keys keep the last value.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::param(format!("config line {}: expected `key = value`", lineno + 1))
        })?;
        let key = key.trim().trim_start_matches("--").to_string();
        if key.is_empty() {
            return Err(Error::param(format!("config line {}: empty key", lineno + 1)));
        }
        let value = value.trim().trim_matches('"').to_string();
        out.retain(|(k, _)| *k != key);
        out.push((key, value));
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    parse(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}
