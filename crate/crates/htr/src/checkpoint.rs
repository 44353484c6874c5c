//! Binary model checkpoints.
//!
//! ```text
//! magic    "HTRCKPT\0"
//! version  u32 = 1
//! config   u32 length + UTF-8 "key=value" lines
//! charset  u32 length + UTF-8 charset file
//! blocks   u32 count, then per block:
//!          u32 name length + name, u32 rows, u32 cols, rows·cols f64
//! ```
//!
//! All integers and floats are little-endian. Blocks appear in the model's
//! parameter order and must match the configured shapes exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use htr_core::lexicon::parse_charset;
use htr_core::model::{AttentionPosition, Gru, ModelConfig, Params, ToyModel};
use htr_core::numkit::Mat2;
use htr_core::preprocess::Step;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HTRCKPT\0";
pub const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

fn config_text(c: &ModelConfig) -> String {
    let steps: Vec<&str> = c.preprocess.iter().map(|s| s.name()).collect();
    format!(
        "image_height={}\nstrip={}\nfeatures={}\nhidden={}\nmax_steps={}\nposition={}\nbidirectional={}\npreprocess={}\n",
        c.image_height,
        c.strip,
        c.features,
        c.hidden,
        c.max_steps,
        c.position.name(),
        c.bidirectional,
        steps.join(",")
    )
}

pub fn encode(model: &ToyModel) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_str(&mut out, &config_text(model.config()));
    put_str(&mut out, &model.charset().to_file_string());
    let blocks = model.params().blocks();
    put_u32(&mut out, blocks.len());
    for (name, m) in blocks {
        put_str(&mut out, name);
        put_u32(&mut out, m.rows());
        put_u32(&mut out, m.cols());
        for v in m.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("checkpoint is truncated".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn string(&mut self) -> Result<&'a str> {
        let n = self.u32()?;
        std::str::from_utf8(self.take(n)?)
            .map_err(|_| Error::Format("checkpoint string is not UTF-8".into()))
    }
}

fn parse_config(text: &str) -> Result<ModelConfig> {
    let mut kv = BTreeMap::new();
    for line in text.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad config line {line:?}")))?;
        kv.insert(k, v);
    }
    let get = |k: &str| {
        kv.get(k)
            .copied()
            .ok_or_else(|| Error::Format(format!("config is missing {k}")))
    };
    let num = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| Error::Format(format!("config {k} is not a number")))
    };
    let bidirectional = match get("bidirectional")? {
        "true" => true,
        "false" => false,
        other => return Err(Error::Format(format!("bidirectional={other:?}"))),
    };
    let preprocess = get("preprocess")?
        .split(',')
        .filter(|s| !s.is_empty())
        .map(Step::parse)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ModelConfig {
        image_height: num("image_height")?,
        strip: num("strip")?,
        features: num("features")?,
        hidden: num("hidden")?,
        max_steps: num("max_steps")?,
        position: AttentionPosition::parse(get("position")?)?,
        bidirectional,
        preprocess,
    })
}

pub fn decode(bytes: &[u8]) -> Result<ToyModel> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let config = parse_config(r.string()?)?;
    let charset = parse_charset(r.string()?)?;

    let count = r.u32()?;
    let mut blocks = BTreeMap::new();
    let mut order = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.string()?.to_string();
        let (rows, cols) = (r.u32()?, r.u32()?);
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Format("block size overflows".into()))?;
        let data = r
            .take(n)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let m = Mat2::from_vec(rows, cols, data)
            .map_err(|e| Error::Format(format!("block {name}: {e}")))?;
        order.push(name.clone());
        if blocks.insert(name.clone(), m).is_some() {
            return Err(Error::Format(format!("duplicate block {name}")));
        }
    }
    if r.at != bytes.len() {
        return Err(Error::Format("trailing bytes after the last block".into()));
    }

    let mut take = |name: &str| {
        blocks
            .remove(name)
            .ok_or_else(|| Error::Format(format!("missing block {name}")))
    };
    let mut gru = |prefix: &str| -> Result<Gru> {
        Ok(Gru {
            input: take(&format!("{prefix}.input"))?,
            recurrent: take(&format!("{prefix}.recurrent"))?,
            bias: take(&format!("{prefix}.bias"))?,
        })
    };
    let gru_fwd = gru("gru")?;
    let gru_rev = if config.bidirectional {
        Some(gru("gru_reverse")?)
    } else {
        None
    };
    let params = Params {
        proj_w: take("projection.weight")?,
        proj_b: take("projection.bias")?,
        attn_w: take("attention.weight")?,
        attn_b: take("attention.bias")?,
        gru: gru_fwd,
        gru_rev,
        out_w: take("output.weight")?,
        out_b: take("output.bias")?,
    };
    if let Some(extra) = blocks.keys().next() {
        return Err(Error::Format(format!("unexpected block {extra}")));
    }
    let expected: Vec<&str> = params.blocks().iter().map(|(n, _)| *n).collect();
    if order != expected {
        return Err(Error::Format("blocks are out of order".into()));
    }
    Ok(ToyModel::from_parts(config, charset, params)?)
}

pub fn save(path: impl AsRef<Path>, model: &ToyModel) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(model)).map_err(Error::io(path))
}

pub fn load(path: impl AsRef<Path>) -> Result<ToyModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(Error::io(path))?;
    decode(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}
