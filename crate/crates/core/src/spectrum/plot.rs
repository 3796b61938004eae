use std::path::Path;

use image::{Rgb, RgbImage};

use super::PowerSpectrum;
use crate::error::Result;
use crate::raster;

const WIDTH: u32 = 640;
const HEIGHT: u32 = 360;
const MARGIN: f64 = 30.0;

const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);
const AXIS: Rgb<u8> = Rgb([0, 0, 0]);
const CURVE: Rgb<u8> = Rgb([31, 119, 180]);
const MARKER: Rgb<u8> = Rgb([214, 39, 40]);

/// Amplitude-vs-frequency line plot (log amplitude) with a triangle under
/// every selected bin.
pub fn render_spectrum_plot(power: &PowerSpectrum, selected: &[usize]) -> RgbImage {
    let mut img = RgbImage::from_pixel(WIDTH, HEIGHT, BACKGROUND);
    let (w, h) = (f64::from(WIDTH), f64::from(HEIGHT));
    let left = MARGIN;
    let right = w - MARGIN / 2.0;
    let top = MARGIN / 2.0;
    let bottom = h - MARGIN;
    raster::line(&mut img, (left, bottom), (right, bottom), AXIS);
    raster::line(&mut img, (left, bottom), (left, top), AXIS);

    let n = power.amplitudes.len();
    if n == 0 {
        return img;
    }
    let logs: Vec<f64> = power
        .amplitudes
        .iter()
        .map(|&a| (a.max(f64::MIN_POSITIVE)).log10())
        .collect();
    let positive: Vec<f64> = logs
        .iter()
        .zip(&power.amplitudes)
        .filter(|(_, &a)| a > 0.0)
        .map(|(&l, _)| l)
        .collect();
    let (lo, hi) = if positive.is_empty() {
        (0.0, 1.0)
    } else {
        let lo = positive.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = positive.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let xs = |b: usize| {
        if n == 1 {
            (left + right) / 2.0
        } else {
            left + (right - left) * b as f64 / (n - 1) as f64
        }
    };
    let ys = |b: usize| {
        let v = logs[b].clamp(lo, hi);
        bottom - (bottom - top) * (v - lo) / (hi - lo)
    };
    for b in 1..n {
        raster::line(&mut img, (xs(b - 1), ys(b - 1)), (xs(b), ys(b)), CURVE);
    }
    for &b in selected.iter().filter(|&&b| b < n) {
        raster::triangle_up(&mut img, xs(b).round() as i64, bottom as i64 + 3, 4, MARKER);
    }
    img
}

impl PowerSpectrum {
    pub fn save_plot(&self, path: impl AsRef<Path>, selected: &[usize]) -> Result<()> {
        raster::save(&render_spectrum_plot(self, selected), path.as_ref())
    }
}
