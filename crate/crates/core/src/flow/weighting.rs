use std::str::FromStr;

use super::MotionTexture;
use crate::error::{Error, Result};
use crate::plane::{Plane, VectorField};

// Below this, contrast is rounding noise on a flat image.
const MIN_CONTRAST: f64 = 1e-6;

/// How visibility weights are derived from the reference frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightingMode {
    /// Standard deviation of the reference over a square window.
    Contrast { window: usize },
    /// Standard deviation of the reference under a Gaussian window.
    Gaussian { sigma: f64 },
}

impl Default for WeightingMode {
    fn default() -> Self {
        WeightingMode::Contrast { window: 5 }
    }
}

impl FromStr for WeightingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contrast" => Ok(WeightingMode::Contrast { window: 5 }),
            "gaussian" => Ok(WeightingMode::Gaussian { sigma: 1.5 }),
            other => Err(Error::format(
                "weighting mode",
                format!("{other:?} (expected contrast|gaussian)"),
            )),
        }
    }
}

/// Per-pixel weights in [0,1], zero outside the organ mask.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    weights: Plane,
}

impl WeightMap {
    pub fn from_reference(reference: &Plane, mode: WeightingMode, mask: &Plane) -> Result<Self> {
        if reference.dims() != mask.dims() {
            return Err(Error::DimensionMismatch(format!(
                "mask {}x{} vs reference {}x{}",
                mask.width(),
                mask.height(),
                reference.width(),
                reference.height()
            )));
        }
        if mask.data().iter().all(|&m| m == 0.0) {
            return Err(Error::EmptyMask);
        }
        let contrast = match mode {
            WeightingMode::Contrast { window } => local_contrast(reference, window),
            WeightingMode::Gaussian { sigma } => gaussian_contrast(reference, sigma),
        };
        let peak = contrast
            .data()
            .iter()
            .zip(mask.data())
            .filter(|(_, &m)| m != 0.0)
            .map(|(&c, _)| c)
            .fold(0.0, f64::max);
        let (w, h) = reference.dims();
        let weights = Plane::from_fn(w, h, |x, y| {
            if mask.get(x, y) == 0.0 || peak <= MIN_CONTRAST {
                0.0
            } else {
                (contrast.get(x, y) / peak).clamp(0.0, 1.0)
            }
        });
        Ok(Self { weights })
    }

    /// Binary weights straight from a mask.
    pub fn from_mask(mask: &Plane) -> Result<Self> {
        if mask.data().iter().all(|&m| m == 0.0) {
            return Err(Error::EmptyMask);
        }
        Ok(Self {
            weights: mask.map(|m| if m != 0.0 { 1.0 } else { 0.0 }),
        })
    }

    pub fn plane(&self) -> &Plane {
        &self.weights
    }

    pub fn apply(&self, motion: &MotionTexture) -> Result<MotionTexture> {
        if motion.dims() != self.weights.dims() {
            return Err(Error::DimensionMismatch(
                "weight map and motion texture differ in size".into(),
            ));
        }
        let fields = motion
            .fields()
            .iter()
            .map(|f| {
                let data = f
                    .data()
                    .iter()
                    .zip(self.weights.data())
                    .map(|(d, &wt)| [d[0] * wt, d[1] * wt])
                    .collect();
                VectorField::from_vec(f.width(), f.height(), data)
            })
            .collect::<Result<Vec<_>>>()?;
        MotionTexture::new(fields, motion.fps(), motion.reference_index())
    }
}

/// Attenuate flow at poorly visible pixels and zero it outside `mask`
/// (nonzero = organ).
pub fn apply_weighting(
    motion: &MotionTexture,
    reference: &Plane,
    mode: WeightingMode,
    mask: &Plane,
) -> Result<MotionTexture> {
    WeightMap::from_reference(reference, mode, mask)?.apply(motion)
}

/// Population standard deviation of `img` over a `window`×`window`
/// neighbourhood (in-bounds pixels only).
pub fn local_contrast(img: &Plane, window: usize) -> Plane {
    let (w, h) = img.dims();
    let r = (window / 2) as isize;
    Plane::from_fn(w, h, |x, y| {
        let (mut s, mut s2, mut n) = (0.0, 0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let xx = x as isize + dx;
                let yy = y as isize + dy;
                if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                    continue;
                }
                let v = img.get(xx as usize, yy as usize);
                s += v;
                s2 += v * v;
                n += 1.0;
            }
        }
        let mean = s / n;
        (s2 / n - mean * mean).max(0.0).sqrt()
    })
}

fn gaussian_contrast(img: &Plane, sigma: f64) -> Plane {
    let (w, h) = img.dims();
    let r = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-r..=r)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    Plane::from_fn(w, h, |x, y| {
        let (mut s, mut s2, mut n) = (0.0, 0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let xx = x as isize + dx;
                let yy = y as isize + dy;
                if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                    continue;
                }
                let k = kernel[(dx + r) as usize] * kernel[(dy + r) as usize];
                let v = img.get(xx as usize, yy as usize);
                s += k * v;
                s2 += k * v * v;
                n += k;
            }
        }
        let mean = s / n;
        (s2 / n - mean * mean).max(0.0).sqrt()
    })
}
