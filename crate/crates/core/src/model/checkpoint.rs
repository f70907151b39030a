//! Binary checkpoint container.
//!
//! ```text
//! "MAMF" | version: u32 | config_len: u32 | config (canonical JSON)
//! | record_count: u32
//! | per record: name_len: u32 | name | rank: u32 | dims: u32 * rank | f32 * numel
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::{ModelConfig, ModelWeights};
use crate::error::{Error, Result};
use crate::tensor::{ParamSet, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MAMF";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub fn encode(weights: &ModelWeights) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut buf, CHECKPOINT_VERSION);
    let config = weights.config.to_canonical();
    put_u32(&mut buf, config.len() as u32);
    buf.extend_from_slice(config.as_bytes());
    put_u32(&mut buf, weights.params.len() as u32);
    for (name, t) in &weights.params {
        put_u32(&mut buf, name.len() as u32);
        buf.extend_from_slice(name.as_bytes());
        put_u32(&mut buf, t.rank() as u32);
        for &d in t.shape() {
            put_u32(&mut buf, d as u32);
        }
        for &x in t.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn corrupt(&self, detail: impl Into<String>) -> Error {
        Error::Corrupt {
            path: self.path.to_path_buf(),
            detail: detail.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| self.corrupt(format!("truncated while reading {what}")))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)? as usize;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| self.corrupt(format!("{what} is not UTF-8")))
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<ModelWeights> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(r.corrupt("bad magic bytes"));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let config_text = r.string("config")?;
    let config: ModelConfig = serde_json::from_str(&config_text)
        .map_err(|e| r.corrupt(format!("config: {e}")))?;
    config.validate()?;

    let count = r.u32("record count")? as usize;
    let mut params = ParamSet::with_capacity(count.min(1024));
    for _ in 0..count {
        let name = r.string("parameter name")?;
        let rank = r.u32("rank")? as usize;
        if rank == 0 || rank > 8 {
            return Err(r.corrupt(format!("{name}: invalid rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dimension")? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| r.corrupt(format!("{name}: shape overflows")))?;
        let raw = r.take(n.checked_mul(4).ok_or_else(|| r.corrupt("size overflow"))?, &name)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| r.corrupt(format!("{name}: {e}")))?;
        if params.insert(name.clone(), t).is_some() {
            return Err(r.corrupt(format!("duplicate parameter {name}")));
        }
    }
    if r.pos != bytes.len() {
        return Err(r.corrupt("trailing bytes after last record"));
    }

    let expected = ModelWeights::init(&config)?;
    if expected.params.len() != params.len() {
        return Err(Error::shape(
            "checkpoint",
            format!("{} parameters, config declares {}", params.len(), expected.params.len()),
        ));
    }
    for (name, t) in &expected.params {
        match params.get(name) {
            Some(p) if p.shape() == t.shape() => {}
            Some(p) => {
                return Err(Error::shape(
                    "checkpoint",
                    format!("{name} has shape {:?}, config declares {:?}", p.shape(), t.shape()),
                ))
            }
            None => return Err(Error::shape("checkpoint", format!("missing parameter {name}"))),
        }
    }
    Ok(ModelWeights { config, params })
}

pub fn save_checkpoint(weights: &ModelWeights, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(weights)).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint; with `expected`, also requires a matching
/// architecture.
pub fn load_checkpoint(path: impl AsRef<Path>, expected: Option<&ModelConfig>) -> Result<ModelWeights> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let weights = decode(&bytes, path)?;
    if let Some(want) = expected {
        if !weights.config.same_architecture(want) {
            return Err(Error::ConfigMismatch(format!(
                "checkpoint has {}, run expects {}",
                weights.config.to_canonical(),
                want.to_canonical()
            )));
        }
    }
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let w = ModelWeights::init(&ModelConfig::default()).unwrap();
        let back = decode(&encode(&w), Path::new("mem")).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn truncation_and_magic() {
        let bytes = encode(&ModelWeights::init(&ModelConfig::default()).unwrap());
        for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
            let err = decode(&bytes[..cut], Path::new("x")).unwrap_err();
            assert!(matches!(err, Error::Corrupt { .. }), "cut {cut}: {err}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad, Path::new("x")), Err(Error::Corrupt { .. })));
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(decode(&extra, Path::new("x")), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = encode(&ModelWeights::init(&ModelConfig::default()).unwrap());
        bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            decode(&bytes, Path::new("x")),
            Err(Error::Version { found: 2, .. })
        ));
    }

    #[test]
    fn shape_mismatch_against_config() {
        let mut w = ModelWeights::init(&ModelConfig::default()).unwrap();
        w.params.insert("head.out.bias".into(), Tensor::zeros(&[3]).unwrap());
        assert!(matches!(
            decode(&encode(&w), Path::new("x")),
            Err(Error::Shape { .. })
        ));
    }
}
