//! Line reader shared by the plain-text formats.

use std::io::BufRead;

use crate::error::{Error, Result};

pub(crate) struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    pub fn new(r: R) -> Self {
        Self { inner: r.lines(), line: 0 }
    }

    pub fn next_fields(&mut self) -> Result<Vec<String>> {
        loop {
            self.line += 1;
            let text = self.inner.next().ok_or_else(|| Error::Parse {
                line: self.line,
                msg: "unexpected end of file".into(),
            })??;
            let t = text.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok(t.split_whitespace().map(str::to_owned).collect());
        }
    }

    pub fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    pub fn tagged(&mut self, tag: &str, count: usize) -> Result<Vec<String>> {
        let f = self.next_fields()?;
        if f.first().map(String::as_str) != Some(tag) || f.len() != count + 1 {
            return Err(self.err(format!("expected `{tag}` with {count} values")));
        }
        Ok(f[1..].to_vec())
    }

    pub fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("cannot parse `{s}`")))
    }
}
