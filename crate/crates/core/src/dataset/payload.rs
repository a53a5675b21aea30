//! MVFC clip payloads.
//!
//! Layout (little-endian): magic `MVFC`, `u32` version, `u32` frame count,
//! `u32` height, `u32` width, then `frames × height × width` `f32` pixels in
//! frame-major order, each in `[0, 1]`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"MVFC";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadHeader {
    pub version: u32,
    pub frame_count: u32,
    pub height: u32,
    pub width: u32,
}

/// Serializes a `[F×H×W]` tensor. Values are narrowed to `f32`.
pub fn encode_frames(frames: &Tensor) -> Result<Vec<u8>> {
    let shape = frames.shape();
    if shape.len() != 3 {
        return Err(Error::shape("encode_frames", shape, &[0, 0, 0]));
    }
    if let Some(bad) = frames.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("pixel value {bad} outside [0, 1]")));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + frames.numel() * 4);
    out.extend_from_slice(MAGIC);
    for v in [VERSION, shape[0] as u32, shape[1] as u32, shape[2] as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &v in frames.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_header(path: &Path, bytes: &[u8]) -> Result<PayloadHeader> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(path, format!("bad magic {:?}", &bytes[..4])));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let header = PayloadHeader {
        version: word(0),
        frame_count: word(1),
        height: word(2),
        width: word(3),
    };
    if header.version != VERSION {
        return Err(Error::format(path, format!("unsupported version {}", header.version)));
    }
    if header.frame_count == 0 || header.height == 0 || header.width == 0 {
        return Err(Error::format(path, "zero-sized dimension in header"));
    }
    Ok(header)
}

pub fn decode_frames(path: &Path, bytes: &[u8]) -> Result<Tensor> {
    let header = decode_header(path, bytes)?;
    let (f, h, w) = (
        header.frame_count as usize,
        header.height as usize,
        header.width as usize,
    );
    let expected = HEADER_LEN + f * h * w * 4;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!("payload is {} bytes, header implies {expected}", bytes.len()),
        ));
    }
    let mut data = Vec::with_capacity(f * h * w);
    for chunk in bytes[HEADER_LEN..].chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::format(path, format!("pixel value {v} outside [0, 1]")));
        }
        data.push(f64::from(v));
    }
    Tensor::new(&[f, h, w], data)
}

pub fn write_frames(path: &Path, frames: &Tensor) -> Result<()> {
    let bytes = encode_frames(frames)?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    file.write_all(&bytes)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_frames(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_frames(path, &bytes)
}
