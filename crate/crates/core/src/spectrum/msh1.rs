//! `MSH1` modal-basis container.
//!
//! Little-endian: magic `MSH1`, `u32` version (1), `u32` K, N, w, h, x0, y0,
//! `f32` fps, K `f32` frequencies, then the `2N×K` matrix as `complex64`
//! (`f32` re, `f32` im) in column-major order.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::ModalMatrix;
use crate::error::{Error, Result};
use crate::plane::Plane;
use crate::roi::RegionOfInterest;

pub const MAGIC: &[u8; 4] = b"MSH1";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 7 + 4;
// Columns pass through f32, so their norms only survive to single precision.
const STORED_NORM_TOL: f64 = 1e-5;

pub fn encode(modal: &ModalMatrix) -> Vec<u8> {
    let roi = modal.roi();
    let k = modal.n_modes();
    let cols = modal.columns();
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * k + 8 * cols.len());
    buf.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        k as u32,
        modal.n_pixels() as u32,
        roi.width as u32,
        roi.height as u32,
        roi.x0 as u32,
        roi.y0 as u32,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&(modal.fps() as f32).to_le_bytes());
    for &f in modal.frequencies() {
        buf.extend_from_slice(&(f as f32).to_le_bytes());
    }
    // nalgebra storage is column-major already.
    for z in cols.iter() {
        buf.extend_from_slice(&(z.re as f32).to_le_bytes());
        buf.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    buf
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn f32_at(bytes: &[u8], at: usize) -> f64 {
    f64::from(f32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")))
}

/// Decode a container. A masked region needs the image-sized organ mask it
/// was built with; without one, `N` must equal `w·h`.
pub fn decode(bytes: &[u8], path: &Path, mask: Option<&Plane>) -> Result<ModalMatrix> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: "MSH1".into(),
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
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(Error::format(
            "MSH1 header",
            format!("{}: unsupported version {version}", path.display()),
        ));
    }
    let [k, n, w, h, x0, y0] = [8, 12, 16, 20, 24, 28].map(|at| u32_at(bytes, at) as usize);
    let fps = f32_at(bytes, 32);
    let expected = HEADER_LEN + 4 * k + 8 * 2 * n * k;
    if bytes.len() != expected {
        if bytes.len() < expected {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                expected,
                found: bytes.len(),
            });
        }
        return Err(Error::format(
            "MSH1 payload",
            format!("{}: {} trailing bytes", path.display(), bytes.len() - expected),
        ));
    }
    let mut roi = RegionOfInterest::new(x0, y0, w, h)?;
    if let Some(mask) = mask {
        roi.check_fits(mask.width(), mask.height())?;
        roi = roi.masked_by(mask)?;
    }
    if roi.n_active() != n {
        return Err(Error::format(
            "MSH1 header",
            format!(
                "{}: N = {n} but the region has {} active pixels",
                path.display(),
                roi.n_active()
            ),
        ));
    }
    let freq_at = HEADER_LEN;
    let frequencies = (0..k).map(|i| f32_at(bytes, freq_at + 4 * i)).collect();
    let payload_at = freq_at + 4 * k;
    let values = (0..2 * n * k).map(|i| {
        let at = payload_at + 8 * i;
        Complex64::new(f32_at(bytes, at), f32_at(bytes, at + 4))
    });
    let columns = DMatrix::from_iterator(2 * n, k, values);
    ModalMatrix::with_tolerance(columns, frequencies, roi, fps, STORED_NORM_TOL)
}

pub fn write_msh1(modal: &ModalMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(modal)).map_err(|e| Error::io(path, e))
}

pub fn read_msh1(path: impl AsRef<Path>, mask: Option<&Plane>) -> Result<ModalMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path, mask)
}
