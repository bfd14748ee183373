//! Shared helpers for the line-oriented text formats.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// 17 significant digits: enough for every f64 to round-trip exactly.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn push_reals<'a>(out: &mut String, values: impl IntoIterator<Item = &'a f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        out.push_str(&real(*v));
        first = false;
    }
    out.push('\n');
}

pub fn push_ints(out: &mut String, values: impl IntoIterator<Item = usize>) {
    let line: Vec<String> = values.into_iter().map(|v| v.to_string()).collect();
    out.push_str(&line.join(" "));
    out.push('\n');
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Line cursor that reports 1-based line numbers in errors.
pub struct Cursor<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(text: &'a str) -> Self {
        let mut lines: Vec<&str> = text.split('\n').collect();
        if lines.last() == Some(&"") {
            lines.pop();
        }
        Cursor { lines, pos: 0 }
    }

    pub fn line_no(&self) -> usize {
        self.pos
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.lines.len()
    }

    pub fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).map(|l| l.trim_end_matches('\r'))
    }

    pub fn next_line(&mut self) -> Result<&'a str> {
        let line = self
            .peek()
            .ok_or_else(|| Error::format(self.pos + 1, "unexpected end of file"))?;
        self.pos += 1;
        Ok(line)
    }

    pub fn err(&self, msg: impl Into<String>) -> Error {
        Error::format(self.pos, msg)
    }

    /// Consumes a `<MAGIC> <version>` header line.
    pub fn expect_header(&mut self, magic: &str, version: u32) -> Result<()> {
        let line = self.next_line()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(magic) {
            return Err(self.err(format!("expected magic {magic:?}")));
        }
        match parts.next().and_then(|v| v.parse::<u32>().ok()) {
            Some(v) if v == version && parts.next().is_none() => Ok(()),
            _ => Err(self.err(format!("unsupported {magic} version"))),
        }
    }

    /// Parses a `key value key value ...` line, checking keys in order.
    pub fn keyed<T: FromStr>(&mut self, keys: &[&str]) -> Result<Vec<T>> {
        let line = self.next_line()?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 * keys.len() {
            return Err(self.err(format!("expected fields {keys:?}")));
        }
        keys.iter()
            .enumerate()
            .map(|(i, key)| {
                if tokens[2 * i] != *key {
                    return Err(self.err(format!("expected key {key:?}, found {:?}", tokens[2 * i])));
                }
                tokens[2 * i + 1]
                    .parse::<T>()
                    .map_err(|_| self.err(format!("bad value for {key:?}")))
            })
            .collect()
    }

    pub fn values<T: FromStr>(&mut self, expected: usize) -> Result<Vec<T>> {
        let line = self.next_line()?;
        let values = line
            .split_whitespace()
            .map(|t| t.parse::<T>().map_err(|_| self.err(format!("cannot parse {t:?}"))))
            .collect::<Result<Vec<T>>>()?;
        if values.len() != expected {
            return Err(self.err(format!("expected {expected} values, found {}", values.len())));
        }
        Ok(values)
    }

    pub fn expect_end(&self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(l) if l.trim().is_empty() && self.pos + 1 >= self.lines.len() => Ok(()),
            Some(_) => Err(Error::format(self.pos + 1, "trailing content")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, f64::MAX, 5e-324, 0.0] {
            assert_eq!(real(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn cursor_reports_line_numbers() {
        let mut c = Cursor::new("CGRF 1\nn 2 v x\n");
        c.expect_header("CGRF", 1).unwrap();
        match c.keyed::<usize>(&["n", "v"]) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
