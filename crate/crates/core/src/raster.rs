//! Minimal deterministic RGB drawing used by plots and overlays.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};

pub(crate) fn put(img: &mut RgbImage, x: i64, y: i64, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

/// Bresenham segment, endpoints rounded to the nearest pixel.
pub(crate) fn line(img: &mut RgbImage, from: (f64, f64), to: (f64, f64), color: Rgb<u8>) {
    let (mut x0, mut y0) = (from.0.round() as i64, from.1.round() as i64);
    let (x1, y1) = (to.0.round() as i64, to.1.round() as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        put(img, x0, y0, color);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

pub(crate) fn rect_outline(img: &mut RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgb<u8>) {
    for x in x0..=x1 {
        put(img, x, y0, color);
        put(img, x, y1, color);
    }
    for y in y0..=y1 {
        put(img, x0, y, color);
        put(img, x1, y, color);
    }
}

/// Upward-pointing filled triangle with its apex at `(cx, top)`.
pub(crate) fn triangle_up(img: &mut RgbImage, cx: i64, top: i64, half: i64, color: Rgb<u8>) {
    for row in 0..=half {
        for x in cx - row..=cx + row {
            put(img, x, top + row, color);
        }
    }
}

pub(crate) fn save(img: &RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_hits_both_endpoints() {
        let mut img = RgbImage::new(10, 10);
        let c = Rgb([255, 0, 0]);
        line(&mut img, (1.0, 2.0), (8.0, 6.0), c);
        assert_eq!(*img.get_pixel(1, 2), c);
        assert_eq!(*img.get_pixel(8, 6), c);
    }

    #[test]
    fn clipped_drawing_does_not_panic() {
        let mut img = RgbImage::new(4, 4);
        line(&mut img, (-5.0, -5.0), (10.0, 10.0), Rgb([1, 2, 3]));
        triangle_up(&mut img, 3, 2, 4, Rgb([1, 1, 1]));
    }
}
