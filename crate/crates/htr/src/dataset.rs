//! Image datasets on disk: a directory of PGM files plus `manifest.tsv`
//! with one `filename<TAB>label` line per image.

use std::fs;
use std::path::Path;

use htr_core::preprocess::GrayImage;
use htr_core::synthdata::Sample;

use crate::error::{Error, Result};
use crate::pgm;

pub const MANIFEST: &str = "manifest.tsv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub file: String,
    pub label: String,
}

pub fn parse_manifest(text: &str) -> Result<Vec<Entry>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| match line.split_once('\t') {
            Some((file, label)) if !file.is_empty() && !label.contains('\t') => Ok(Entry {
                file: file.to_string(),
                label: label.to_string(),
            }),
            _ => Err(Error::Format(format!(
                "manifest line {}: expected \"filename<TAB>label\"",
                i + 1
            ))),
        })
        .collect()
}

pub fn manifest_string(entries: &[Entry]) -> Result<String> {
    let mut out = String::new();
    for e in entries {
        let bad = |s: &str| s.contains(['\t', '\n', '\r']);
        if bad(&e.file) || bad(&e.label) || e.file.is_empty() {
            return Err(Error::Format(format!(
                "entry {:?} cannot be written to a manifest",
                e.file
            )));
        }
        out.push_str(&e.file);
        out.push('\t');
        out.push_str(&e.label);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Vec<Entry>> {
    let path = dir.as_ref().join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
    parse_manifest(&text)
}

/// Every manifest entry with its decoded image, in manifest order.
pub fn load(dir: impl AsRef<Path>) -> Result<Vec<(Entry, GrayImage)>> {
    let dir = dir.as_ref();
    let entries = read_manifest(dir)?;
    if entries.is_empty() {
        return Err(Error::Format(format!("{}: empty manifest", dir.display())));
    }
    entries
        .into_iter()
        .map(|e| {
            let img = pgm::read(dir.join(&e.file))?;
            Ok((e, img))
        })
        .collect()
}

/// Writes `00000.pgm`, `00001.pgm`, … and the manifest.
pub fn write_samples(dir: impl AsRef<Path>, samples: &[Sample]) -> Result<Vec<Entry>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let width = samples.len().saturating_sub(1).to_string().len().max(5);
    let mut entries = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let file = format!("{i:0width$}.pgm");
        pgm::write(dir.join(&file), &s.image)?;
        entries.push(Entry {
            file,
            label: s.label.clone(),
        });
    }
    let path = dir.join(MANIFEST);
    fs::write(&path, manifest_string(&entries)?).map_err(Error::io(&path))?;
    Ok(entries)
}
