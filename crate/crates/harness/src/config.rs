//! Flat `key = value` configuration files.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Keys use `snake_case`; list values may be written `[1, 3/2, 3]` or
//! `1, 3/2, 3`. Rationals are accepted as `p/q`, integers or decimals.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::HarnessError;

/// Raw settings, keyed by name. Later insertions override earlier ones.
pub type Settings = BTreeMap<String, String>;

pub fn parse_config(text: &str) -> Result<Settings, HarnessError> {
    let mut out = Settings::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(HarnessError::config(
                format!("line {}", lineno + 1),
                format!("expected key = value, got {line:?}"),
            ));
        };
        let key = key.trim().replace('-', "_");
        if key.is_empty() {
            return Err(HarnessError::config(format!("line {}", lineno + 1), "empty key"));
        }
        out.insert(key, value.trim().trim_matches('"').to_string());
    }
    Ok(out)
}

/// Reads a config file. A JSON run manifest is accepted too, in which case
/// its recorded plan is used.
pub fn read_config(path: &Path) -> Result<Settings, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| HarnessError::config("config", format!("invalid JSON: {e}")))?;
        let plan = v
            .get("plan")
            .and_then(|p| p.as_object())
            .ok_or_else(|| HarnessError::config("plan", "manifest has no plan object"))?;
        return plan
            .iter()
            .map(|(k, v)| match v.as_str() {
                Some(s) => Ok((k.clone(), s.to_string())),
                None => Err(HarnessError::config(k, "manifest plan values must be strings")),
            })
            .collect();
    }
    parse_config(&text)
}
