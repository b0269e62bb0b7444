//! `UTFM` feature files: the magic bytes `UTFM`, five little-endian `u32`
//! header fields (version, height, width, channels, stride), then
//! `height * width * channels` little-endian `f32` values, row-major with
//! channels fastest.

use std::path::Path;

use crate::error::{Error, Result};
use crate::types::FeatureMap;

pub const MAGIC: &[u8; 4] = b"UTFM";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 5 * 4;

pub fn encode(fm: &FeatureMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + fm.data().len() * 4);
    out.extend_from_slice(MAGIC);
    for field in [
        VERSION,
        fm.height() as u32,
        fm.width() as u32,
        fm.channels() as u32,
        fm.stride(),
    ] {
        out.extend_from_slice(&field.to_le_bytes());
    }
    for v in fm.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<FeatureMap> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "feature file truncated: {} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic, expected UTFM".into()));
    }
    let field = |i: usize| {
        let at = 4 + 4 * i;
        u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
    };
    let (version, h, w, c, stride) = (field(0), field(1), field(2), field(3), field(4));
    if version != VERSION {
        return Err(Error::Format(format!("unsupported UTFM version {version}")));
    }
    if h == 0 || w == 0 || c == 0 || stride == 0 {
        return Err(Error::dim(format!(
            "feature file has zero dimension ({h}x{w}x{c}, stride {stride})"
        )));
    }
    let count = (h as u64) * (w as u64) * (c as u64);
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != count * 4 {
        return Err(Error::Format(format!(
            "header declares {count} values but payload holds {} bytes",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4-byte chunk")))
        .collect();
    FeatureMap::new(h as usize, w as usize, c as usize, stride, data)
}

pub fn load_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write_feature_map(path: impl AsRef<Path>, fm: &FeatureMap) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(fm)).map_err(|e| Error::io(path, e))
}
