//! Middlebury-style `.flo` interchange files.
//!
//! Layout (little-endian): magic `PIEH`, `i32` width, `i32` height, then
//! `width*height` interleaved `f32` `(u, v)` pairs in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::plane::VectorField;

pub const MAGIC: &[u8; 4] = b"PIEH";
const HEADER_LEN: usize = 12;

pub fn encode(field: &VectorField) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * field.data().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(field.width() as i32).to_le_bytes());
    buf.extend_from_slice(&(field.height() as i32).to_le_bytes());
    for [u, v] in field.data() {
        buf.extend_from_slice(&(*u as f32).to_le_bytes());
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    buf
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<VectorField> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: "PIEH".into(),
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
    let width = i32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let height = i32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if width <= 0 || height <= 0 {
        return Err(Error::format(
            "flow file",
            format!("{}: dimensions {width}x{height}", path.display()),
        ));
    }
    let (w, h) = (width as usize, height as usize);
    let expected = HEADER_LEN + 8 * w * h;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::format(
            "flow file",
            format!(
                "{}: {} trailing bytes",
                path.display(),
                bytes.len() - expected
            ),
        ));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| {
            let u = f32::from_le_bytes(c[..4].try_into().expect("4 bytes"));
            let v = f32::from_le_bytes(c[4..].try_into().expect("4 bytes"));
            [f64::from(u), f64::from(v)]
        })
        .collect();
    VectorField::from_vec(w, h, data)
}

pub fn read_flow_file(path: impl AsRef<Path>) -> Result<VectorField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Values are stored as `f32`.
pub fn write_flow_file(field: &VectorField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(field)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.flo");
        write_flow_file(&VectorField::zeros(2, 2), &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 4 + 8 + 32);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode(&VectorField::zeros(2, 2));
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            decode(&bytes, Path::new("x.flo")),
            Err(Error::BadMagic { .. })
        ));
    }

    #[test]
    fn truncated() {
        let bytes = encode(&VectorField::zeros(3, 2));
        assert!(matches!(
            decode(&bytes[..bytes.len() - 3], Path::new("t.flo")),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(
            decode(&bytes[..7], Path::new("t.flo")),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn four_by_three_round_trip() {
        let field = VectorField::from_fn(4, 3, |x, y| {
            [f64::from(x as f32 * 0.37 - 1.1), f64::from(y as f32 * -2.9 + 0.01)]
        });
        let back = decode(&encode(&field), Path::new("r.flo")).unwrap();
        assert_eq!(encode(&back), encode(&field));
        for (a, b) in back.data().iter().zip(field.data()) {
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
    }
}
