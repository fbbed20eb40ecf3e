//! Line-oriented `key = value` text. `#` starts a comment; blank lines are
//! ignored; a key may appear once.
//!
//! Entries added with [`KeyValues::set`] carry no line and are reported as
//! coming from the command line.

use std::str::FromStr;

use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::io::fmt_f64;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    key: String,
    value: String,
    /// 1-based source line; 0 for values set programmatically.
    line: usize,
}

impl Entry {
    fn location(&self) -> String {
        if self.line == 0 {
            format!("command-line value for '{}'", self.key)
        } else {
            format!("line {}", self.line)
        }
    }
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<Entry> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                Error::parse(
                    format!("line {line}"),
                    format!("expected 'key = value', got '{content}'"),
                )
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(format!("line {line}"), "empty key"));
            }
            if let Some(prev) = entries.iter().find(|e| e.key == key) {
                return Err(Error::parse(
                    format!("line {line}"),
                    format!("duplicate key '{key}' (first set on line {})", prev.line),
                ));
            }
            entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(Self { entries })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.key.as_str())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .map(|e| e.value.as_str())
    }

    /// Source line of `key`; `Some(0)` when it was set programmatically.
    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.key == key).map(|e| e.line)
    }

    /// Human-readable origin of `key` for error messages.
    pub fn location_of(&self, key: &str) -> Option<String> {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .map(Entry::location)
    }

    /// Sets `key`, replacing any parsed value.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.entries.iter_mut().find(|e| e.key == key) {
            Some(e) => {
                e.value = value;
                e.line = 0;
            }
            None => self.entries.push(Entry {
                key: key.to_string(),
                value,
                line: 0,
            }),
        }
    }

    /// Parses `key` if present, reporting the line on failure.
    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some(e) = self.entries.iter().find(|e| e.key == key) else {
            return Ok(None);
        };
        e.value.parse::<T>().map(Some).map_err(|_| {
            Error::parse(
                e.location(),
                format!("cannot parse value '{}' for key '{key}'", e.value),
            )
        })
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parse_opt(key)?
            .ok_or_else(|| Error::parse("input", format!("missing required key '{key}'")))
    }

    /// Fails on the first key not in `allowed` (exact names) or not starting
    /// with one of `allowed_prefixes`.
    pub fn reject_unknown(&self, allowed: &[&str], allowed_prefixes: &[&str]) -> Result<()> {
        for e in &self.entries {
            let known = allowed.contains(&e.key.as_str())
                || allowed_prefixes.iter().any(|p| e.key.starts_with(p));
            if !known {
                return Err(Error::parse(
                    e.location(),
                    format!("unknown key '{}'", e.key),
                ));
            }
        }
        Ok(())
    }
}

pub fn read_intrinsics(text: &str) -> Result<Intrinsics> {
    let kv = KeyValues::parse(text)?;
    kv.reject_unknown(&["fx", "fy", "cx", "cy", "skew"], &[])?;
    let fx: f64 = kv.require("fx")?;
    let fy: f64 = kv.require("fy")?;
    let cx: f64 = kv.require("cx")?;
    let cy: f64 = kv.require("cy")?;
    let skew: f64 = kv.parse_opt("skew")?.unwrap_or(0.0);
    Intrinsics::with_skew(fx, fy, cx, cy, skew)
}

pub fn write_intrinsics(k: &Intrinsics) -> String {
    format!(
        "fx = {}\nfy = {}\ncx = {}\ncy = {}\nskew = {}\n",
        fmt_f64(k.fx),
        fmt_f64(k.fy),
        fmt_f64(k.cx),
        fmt_f64(k.cy),
        fmt_f64(k.skew)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reads_minimal_file() {
        let k = read_intrinsics("fx = 500\nfy = 500\ncx = 320\ncy = 240").unwrap();
        assert_eq!(
            k,
            Intrinsics::with_skew(500.0, 500.0, 320.0, 240.0, 0.0).unwrap()
        );
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# camera\n\nfx=1 # inline\nfy = 2\n  cx = 3\ncy = 4\nskew = 0.5\n";
        let k = read_intrinsics(text).unwrap();
        assert_eq!((k.fx, k.fy, k.cx, k.cy, k.skew), (1.0, 2.0, 3.0, 4.0, 0.5));
    }

    #[test]
    fn missing_key_is_named() {
        let err = read_intrinsics("fx = 500\ncx = 320\ncy = 240").unwrap_err();
        assert!(err.to_string().contains("'fy'"), "{err}");
    }

    #[test]
    fn bad_values_report_line() {
        let err = read_intrinsics("fx = 500\nfy = abc\ncx = 1\ncy = 1").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(read_intrinsics("fx = -1\nfy = 1\ncx = 1\ncy = 1").is_err());
        assert!(read_intrinsics("fx = 1\nfy = 1\ncx = 1\ncy = 1\nfz = 3").is_err());
        assert!(read_intrinsics("fx = 1\nfx = 2").is_err());
        assert!(read_intrinsics("fx 1").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(
            fx in 1e-3..1e5f64, fy in 1e-3..1e5f64,
            cx in -1e4..1e4f64, cy in -1e4..1e4f64, skew in -10.0..10.0f64
        ) {
            let k = Intrinsics::with_skew(fx, fy, cx, cy, skew).unwrap();
            let back = read_intrinsics(&write_intrinsics(&k)).unwrap();
            prop_assert_eq!(back, k);
        }
    }
}
