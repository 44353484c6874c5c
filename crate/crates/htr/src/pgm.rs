//! Netpbm grayscale images: P2 (ASCII) and P5 (binary) in, P5 out.

use std::fs;
use std::path::Path;

use htr_core::preprocess::GrayImage;

use crate::error::{Error, Result};

/// Header tokens with `#` comments skipped; returns the offset after the
/// last token.
fn header_tokens(bytes: &[u8], count: usize) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'#' {
            i += 1;
        }
        if start == i {
            return Err(Error::Format("truncated PGM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    Ok((tokens, i))
}

fn number(tok: &str, what: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::Format(format!("PGM {what} {tok:?} is not a number")))
}

pub fn parse(bytes: &[u8]) -> Result<GrayImage> {
    let (head, end) = header_tokens(bytes, 4)?;
    let binary = match head[0].as_str() {
        "P5" => true,
        "P2" => false,
        other => return Err(Error::Format(format!("unsupported PGM magic {other:?}"))),
    };
    let width = number(&head[1], "width")?;
    let height = number(&head[2], "height")?;
    let maxval = number(&head[3], "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!(
            "unsupported PGM maxval {maxval} (only 1..=255)"
        )));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("PGM dimensions overflow".into()))?;
    let raw: Vec<usize> = if binary {
        let body = bytes.get(end + 1..).unwrap_or_default();
        if body.len() < n {
            return Err(Error::Format(format!(
                "PGM raster has {} bytes, expected {n}",
                body.len()
            )));
        }
        body[..n].iter().map(|&b| usize::from(b)).collect()
    } else {
        let text = std::str::from_utf8(&bytes[end..])
            .map_err(|_| Error::Format("P2 raster is not ASCII".into()))?;
        let vals = text
            .split_whitespace()
            .map(|t| number(t, "sample"))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != n {
            return Err(Error::Format(format!(
                "P2 raster has {} samples, expected {n}",
                vals.len()
            )));
        }
        vals
    };
    let pixels = raw
        .into_iter()
        .map(|v| {
            if v > maxval {
                Err(Error::Format(format!("sample {v} exceeds maxval {maxval}")))
            } else {
                Ok(((v * 255 + maxval / 2) / maxval) as u8)
            }
        })
        .collect::<Result<Vec<u8>>>()?;
    Ok(GrayImage::new(width, height, pixels)?)
}

/// Binary P5 with maxval 255.
pub fn encode(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

pub fn read(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(Error::io(path))?;
    parse(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(img)).map_err(Error::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_example() {
        let img = parse(b"P2 2 2 255 0 64 128 255").unwrap();
        assert_eq!(img.pixels(), &[0, 64, 128, 255]);
    }

    #[test]
    fn comments_and_small_maxval() {
        let img = parse(b"P2\n# a comment\n2 1\n# another\n1\n0 1\n").unwrap();
        assert_eq!(img.pixels(), &[0, 255]);
    }

    #[test]
    fn rejects_wide_samples_and_bad_input() {
        assert!(matches!(
            parse(b"P5 1 1 65535\n\0\0"),
            Err(Error::Format(_))
        ));
        assert!(parse(b"P6 1 1 255\n\0\0\0").is_err());
        assert!(parse(b"P5 2 2 255\n\0").is_err());
        assert!(parse(b"P2 1 1 255 256").is_err());
        assert!(parse(b"P2 1").is_err());
    }
}
