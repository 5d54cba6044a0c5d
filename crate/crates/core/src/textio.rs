//! Line-oriented text helpers shared by the file formats.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_string(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Non-empty lines with their 1-based line numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub(crate) fn parse_num<T: std::str::FromStr>(path: &Path, line: usize, tok: &str) -> Result<T> {
    tok.trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("cannot parse {tok:?}")))
}

pub(crate) fn parse_row(path: &Path, line: usize, text: &str) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|t| parse_num::<f64>(path, line, t))
        .collect()
}

/// Parses `key=value` lines, requiring every key in `required` exactly once.
pub(crate) fn parse_header(path: &Path, text: &str, required: &[&str]) -> Result<Vec<usize>> {
    let mut values: Vec<Option<usize>> = vec![None; required.len()];
    for (line, l) in content_lines(text) {
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| Error::parse(path, line, "expected key=value"))?;
        let idx = required
            .iter()
            .position(|r| *r == k.trim())
            .ok_or_else(|| Error::parse(path, line, format!("unknown key {:?}", k.trim())))?;
        values[idx] = Some(parse_num(path, line, v)?);
    }
    required
        .iter()
        .zip(values)
        .map(|(k, v)| v.ok_or_else(|| Error::parse(path, 0, format!("missing key {k}"))))
        .collect()
}

pub(crate) fn write_row<'a>(out: &mut String, xs: impl Iterator<Item = &'a f64>) {
    let mut first = true;
    for x in xs {
        if !first {
            out.push(' ');
        }
        first = false;
        write!(out, "{x}").unwrap();
    }
    out.push('\n');
}


/// Value of a `key=value` line whose key must be `key`.
pub(crate) fn key_value(path: &Path, line: usize, text: &str, key: &str) -> Result<String> {
    text.strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .map(|s| s.trim().to_string())
        .ok_or_else(|| Error::parse(path, line, format!("expected {key}=...")))
}

pub(crate) fn expect_tag(path: &Path, (line, text): (usize, &str), tag: &str) -> Result<()> {
    if text.trim() == tag {
        Ok(())
    } else {
        Err(Error::parse(path, line, format!("expected {tag}, found {text:?}")))
    }
}
