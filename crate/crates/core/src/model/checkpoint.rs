//! Binary checkpoints. Layout, all integers u32 little-endian:
//!
//! ```text
//! "MVFM" version config_len config_json param_count
//! { name_len name ndim dims.. f64_le values.. } * param_count
//! ```
//!
//! Values are stored as raw f64 bits, so a round trip is bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{ModelConfig, MvfModel};
use crate::error::{Error, Result};
use crate::tensor::{ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MVFM";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("checkpoint field exceeds u32");
    buf.extend_from_slice(&v.to_le_bytes());
}

pub fn encode_checkpoint(model: &MvfModel) -> Vec<u8> {
    let config = serde_json::to_vec(model.config()).expect("model config serialises");
    let mut buf = Vec::with_capacity(64 + config.len() + model.num_parameters() * 8);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    put_u32(&mut buf, config.len());
    buf.extend_from_slice(&config);
    put_u32(&mut buf, model.params().len());
    for (name, t) in model.params().iter() {
        put_u32(&mut buf, name.len());
        buf.extend_from_slice(name.as_bytes());
        put_u32(&mut buf, t.shape().len());
        for &d in t.shape() {
            put_u32(&mut buf, d);
        }
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
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
    fn err(&self, message: impl Into<String>) -> Error {
        Error::format(self.path, format!("{} (at byte {})", message.into(), self.pos))
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(self.err(format!("truncated while reading {what}"))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }
}

/// Parses a checkpoint; `path` is only used in error messages.
pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<MvfModel> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::format(path, "not a checkpoint (bad magic)"));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(r.err(format!("unsupported checkpoint version {version}")));
    }
    let config_len = r.u32("config length")?;
    let config: ModelConfig = serde_json::from_slice(r.take(config_len, "config")?)
        .map_err(|e| Error::format(path, format!("bad model config: {e}")))?;
    let count = r.u32("parameter count")?;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let name_len = r.u32("name length")?;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| r.err("parameter name is not UTF-8"))?
            .to_string();
        let ndim = r.u32("rank")?;
        if ndim == 0 || ndim > 8 {
            return Err(r.err(format!("parameter {name} has rank {ndim}")));
        }
        let shape = (0..ndim).map(|_| r.u32("dimension")).collect::<Result<Vec<_>>>()?;
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| r.err("parameter size overflows"))?;
        let raw = r.take(numel.saturating_mul(8), "values")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = Tensor::new(&shape, data).map_err(|e| r.err(format!("parameter {name}: {e}")))?;
        params.insert(name, tensor).map_err(|e| r.err(e.to_string()))?;
    }
    if r.pos != bytes.len() {
        return Err(r.err(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    MvfModel::from_parts(config, params).map_err(|e| Error::format(path, e.to_string()))
}

/// Writes atomically: a temp file in the same directory, then rename.
pub fn save_checkpoint(model: &MvfModel, path: &Path) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("checkpoint");
    let tmp = dir.join(format!(".{file_name}.tmp-{}", std::process::id()));
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(format!("creating {}", tmp.display()), e))?;
    file.write_all(&encode_checkpoint(model))
        .and_then(|_| file.sync_all())
        .map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming onto {}", path.display()), e))
}

pub fn load_checkpoint(path: &Path) -> Result<MvfModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_checkpoint(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Aggregation, EncoderKind, TaskMode};

    fn model() -> MvfModel {
        let cfg = ModelConfig {
            encoder_kind: EncoderKind::TemporalConv,
            feature_dim: 4,
            aggregation: Aggregation::Max,
            task_mode: TaskMode::MultiTask,
            hidden_dim: 3,
            frames: 16,
            height: 2,
            width: 3,
        };
        MvfModel::init(cfg, 11).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let back = decode_checkpoint(&encode_checkpoint(&m), Path::new("m.mvfm")).unwrap();
        assert_eq!(back.config(), m.config());
        for (name, t) in m.params().iter() {
            let u = back.params().get(name).unwrap();
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(t), bits(u), "{name}");
        }
    }

    #[test]
    fn save_and_load_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/checkpoint.mvfm");
        save_checkpoint(&model(), &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), model());
    }

    #[test]
    fn every_truncation_is_a_format_error() {
        let bytes = encode_checkpoint(&model());
        for cut in (0..bytes.len()).step_by(7) {
            let r = decode_checkpoint(&bytes[..cut], Path::new("x"));
            assert!(matches!(r, Err(Error::Format { .. })), "cut {cut}");
        }
    }

    #[test]
    fn bad_magic_and_trailing_bytes_rejected() {
        let mut bytes = encode_checkpoint(&model());
        bytes.push(0);
        assert!(decode_checkpoint(&bytes, Path::new("x")).is_err());
        bytes[0] = b'X';
        assert!(decode_checkpoint(&bytes, Path::new("x")).is_err());
    }
}
