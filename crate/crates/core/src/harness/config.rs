//! Config files: one `key=value` per line, `#` comments.

use crate::error::{Error, Result};
use std::collections::BTreeMap;

pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!("line {}: expected key=value, got {line:?}", lineno + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_skips_comments() {
        let text = "# run setup\nk=3\nm = 2\n\ndeltas=1,0.1\n";
        let map = parse_key_values(text).unwrap();
        assert_eq!(map.get("k").unwrap(), "3");
        assert_eq!(map.get("m").unwrap(), "2");
        assert_eq!(map.get("deltas").unwrap(), "1,0.1");
        assert!(parse_key_values("what is this").is_err());
    }
}
