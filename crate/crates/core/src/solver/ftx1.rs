//! `FTX1` force-texture container.
//!
//! Little-endian: magic `FTX1`, `u32` version (1), `u32` T', H, W, `u8` mode
//! id, `f32` fps, then `T'×H×W×2` `f32` values (frame, row, column, u/v).

use std::path::Path;

use super::{ConstraintMode, ForceTexture};
use crate::error::{Error, Result};
use crate::plane::VectorField;

pub const MAGIC: &[u8; 4] = b"FTX1";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 4 + 1 + 4;

pub fn encode(texture: &ForceTexture) -> Vec<u8> {
    let (w, h) = texture.dims();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * w * h * texture.len());
    buf.extend_from_slice(MAGIC);
    for v in [VERSION, texture.len() as u32, h as u32, w as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.push(texture.mode.id());
    buf.extend_from_slice(&(texture.fps as f32).to_le_bytes());
    for field in &texture.fields {
        for [u, v] in field.data() {
            buf.extend_from_slice(&(*u as f32).to_le_bytes());
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    buf
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<ForceTexture> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: "FTX1".into(),
            found: String::from_utf8_lossy(&bytes[..bytes.len().min(4)]).into_owned(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let float = |at: usize| f32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != VERSION {
        return Err(Error::format(
            "FTX1 header",
            format!("{}: unsupported version {version}", path.display()),
        ));
    }
    let (t, h, w) = (word(8) as usize, word(12) as usize, word(16) as usize);
    let mode = ConstraintMode::from_id(bytes[20]).ok_or_else(|| {
        Error::format("FTX1 header", format!("{}: unknown mode id {}", path.display(), bytes[20]))
    })?;
    let fps = f64::from(float(21));
    let expected = HEADER_LEN + 8 * t * h * w;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::format(
            "FTX1 payload",
            format!("{}: {} trailing bytes", path.display(), bytes.len() - expected),
        ));
    }
    let fields = (0..t)
        .map(|frame| {
            let base = HEADER_LEN + 8 * frame * h * w;
            let data = (0..h * w)
                .map(|p| {
                    let at = base + 8 * p;
                    [f64::from(float(at)), f64::from(float(at + 4))]
                })
                .collect();
            VectorField::from_vec(w, h, data)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForceTexture {
        imaginary_norms: vec![0.0; fields.len()],
        fields,
        mode,
        fps,
        roi: None,
    })
}

pub fn write_ftx1(texture: &ForceTexture, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(texture)).map_err(|e| Error::io(path, e))
}

pub fn read_ftx1(path: impl AsRef<Path>) -> Result<ForceTexture> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
