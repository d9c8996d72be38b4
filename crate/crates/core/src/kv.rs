//! Plain `key = value` text blocks, used for checkpoint headers and CLI
//! config files. Blank lines and `#` comments are ignored.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub fn parse(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected key = value, got {line:?}", i + 1)));
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        out.insert(key.to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Canonical rendering: one `key=value` line per entry, sorted by key.
pub fn render(map: &BTreeMap<String, String>) -> String {
    map.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub(crate) fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = map.get(key).ok_or_else(|| Error::Config(format!("missing key {key}")))?;
    raw.parse().map_err(|_| Error::Config(format!("bad value for {key}: {raw:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_renders() {
        let m = parse("# comment\n b = 2\n\na=hello world \n").unwrap();
        assert_eq!(m["a"], "hello world");
        assert_eq!(render(&m), "a=hello world\nb=2\n");
        assert_eq!(get::<u32>(&m, "b").unwrap(), 2);
        assert!(get::<u32>(&m, "a").is_err());
        assert!(get::<u32>(&m, "c").is_err());
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(parse("just words").is_err());
        assert!(parse("= value").is_err());
    }
}
