//! Text format for probability matrices:
//!
//! ```text
//! CTCMAT 1
//! T C1
//! p00 p01 … (T lines of C1 values, blank last)
//! ```
//!
//! Values are written with 17 significant digits, so files round-trip
//! bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use htr_core::decode::ProbMatrix;

use crate::error::{Error, Result};

pub const HEADER: &str = "CTCMAT 1";

pub fn parse(text: &str) -> Result<ProbMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, HEADER)) => {}
        Some((_, other)) => {
            return Err(Error::Format(format!(
                "expected header {HEADER:?}, found {other:?}"
            )))
        }
        None => return Err(Error::Format("empty matrix file".into())),
    }
    let (lineno, dims) = lines
        .next()
        .ok_or_else(|| Error::Format("missing dimension line".into()))?;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e| Error::Format(format!("line {lineno}: bad dimensions: {e}")))?;
    let [steps, classes] = dims[..] else {
        return Err(Error::Format(format!("line {lineno}: expected \"T C1\"")));
    };
    let mut data = Vec::with_capacity(steps * classes);
    let mut rows = 0;
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|e| Error::Format(format!("line {lineno}: {tok:?}: {e}")))?;
            data.push(v);
        }
        if data.len() - before != classes {
            return Err(Error::Format(format!(
                "line {lineno}: expected {classes} values, found {}",
                data.len() - before
            )));
        }
        rows += 1;
    }
    if rows != steps {
        return Err(Error::Format(format!(
            "expected {steps} rows, found {rows}"
        )));
    }
    Ok(ProbMatrix::new(steps, classes, data)?)
}

pub fn to_string(m: &ProbMatrix) -> String {
    let mut out = format!("{HEADER}\n{} {}\n", m.steps(), m.classes());
    for t in 0..m.steps() {
        for (i, v) in m.row(t).iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    out
}

pub fn read(path: impl AsRef<Path>) -> Result<ProbMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    parse(&text).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write(path: impl AsRef<Path>, m: &ProbMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_string(m)).map_err(Error::io(path))
}
