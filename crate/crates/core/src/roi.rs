//! Rectangular region of interest with an optional binary sub-mask.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::plane::{Plane, VectorField};

/// Rectangle `x0, y0, width, height` in pixels, optionally restricted by a
/// mask of the same extent. Active pixels are enumerated row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionOfInterest {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
    mask: Option<Vec<bool>>,
}

impl RegionOfInterest {
    pub fn new(x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyRoi);
        }
        Ok(Self {
            x0,
            y0,
            width,
            height,
            mask: None,
        })
    }

    /// Whole-image region.
    pub fn full(width: usize, height: usize) -> Result<Self> {
        Self::new(0, 0, width, height)
    }

    /// Attach a sub-mask (`width*height` entries, row-major inside the rectangle).
    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.width * self.height {
            return Err(Error::DimensionMismatch(format!(
                "roi mask has {} entries, rectangle has {}",
                mask.len(),
                self.width * self.height
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::EmptyRoi);
        }
        self.mask = Some(mask);
        Ok(self)
    }

    /// Restrict the rectangle by an image-sized organ mask (nonzero = active).
    pub fn masked_by(self, mask: &Plane) -> Result<Self> {
        let sub = (0..self.height)
            .flat_map(|dy| (0..self.width).map(move |dx| (dx, dy)))
            .map(|(dx, dy)| mask.get(self.x0 + dx, self.y0 + dy) != 0.0)
            .collect();
        self.with_mask(sub)
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    /// Rectangle area `w_ψ·h_ψ`.
    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.x0 + self.width <= width && self.y0 + self.height <= height
    }

    pub fn check_fits(&self, width: usize, height: usize) -> Result<()> {
        if self.fits(width, height) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "roi {self} does not fit a {width}x{height} image"
            )))
        }
    }

    /// Active pixels in image coordinates, row-major.
    pub fn active_pixels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.area());
        for dy in 0..self.height {
            for dx in 0..self.width {
                if self.mask.as_ref().is_none_or(|m| m[dy * self.width + dx]) {
                    out.push((self.x0 + dx, self.y0 + dy));
                }
            }
        }
        out
    }

    pub fn n_active(&self) -> usize {
        match &self.mask {
            Some(m) => m.iter().filter(|&&a| a).count(),
            None => self.area(),
        }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        if x < self.x0 || y < self.y0 || x >= self.x0 + self.width || y >= self.y0 + self.height {
            return false;
        }
        match &self.mask {
            Some(m) => m[(y - self.y0) * self.width + (x - self.x0)],
            None => true,
        }
    }

    /// Stack a field over the active pixels: all `u` components, then all `v`.
    pub fn gather(&self, field: &VectorField) -> Vec<f64> {
        let pixels = self.active_pixels();
        let n = pixels.len();
        let mut out = vec![0.0; 2 * n];
        for (i, &(x, y)) in pixels.iter().enumerate() {
            let [u, v] = field.get(x, y);
            out[i] = u;
            out[n + i] = v;
        }
        out
    }

    /// Inverse of [`gather`](Self::gather): write a stacked `2N` vector into a
    /// zero field of the given size.
    pub fn scatter(&self, stacked: &[f64], width: usize, height: usize) -> VectorField {
        let pixels = self.active_pixels();
        let n = pixels.len();
        debug_assert_eq!(stacked.len(), 2 * n);
        let mut field = VectorField::zeros(width, height);
        for (i, &(x, y)) in pixels.iter().enumerate() {
            field.set(x, y, [stacked[i], stacked[n + i]]);
        }
        field
    }

    /// Same rectangle, ignoring any mask.
    pub fn same_rect(&self, other: &Self) -> bool {
        self.x0 == other.x0
            && self.y0 == other.y0
            && self.width == other.width
            && self.height == other.height
    }
}

impl fmt::Display for RegionOfInterest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x0, self.y0, self.width, self.height)
    }
}

/// Parses `x,y,w,h`.
impl FromStr for RegionOfInterest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format("roi", format!("{s:?}: {e}")))?;
        match parts.as_slice() {
            &[x, y, w, h] => Self::new(x, y, w, h),
            _ => Err(Error::format("roi", format!("{s:?}: expected x,y,w,h"))),
        }
    }
}
