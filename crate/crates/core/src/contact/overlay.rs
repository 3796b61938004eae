use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::plane::Plane;
use crate::raster;
use crate::roi::RegionOfInterest;
use crate::solver::ForceTexture;

/// Colors and dimming of [`render_overlay`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlayStyle {
    pub arrow: Rgb<u8>,
    pub roi_box: Rgb<u8>,
    /// Background brightness factor.
    pub dim: f64,
}

impl Default for OverlayStyle {
    fn default() -> Self {
        Self {
            arrow: Rgb([255, 255, 0]),
            roi_box: Rgb([0, 0, 0]),
            dim: 0.8,
        }
    }
}

/// Arrow sample points: centers of `stride`-sized cells inside the ROI.
pub(crate) fn arrow_sites(roi: &RegionOfInterest, stride: usize) -> Vec<(usize, usize)> {
    let half = stride / 2;
    let mut sites = Vec::new();
    let mut y = roi.y0 + half.min(roi.height - 1);
    while y < roi.y0 + roi.height {
        let mut x = roi.x0 + half.min(roi.width - 1);
        while x < roi.x0 + roi.width {
            if roi.contains(x, y) {
                sites.push((x, y));
            }
            x += stride;
        }
        y += stride;
    }
    sites
}

/// Frame `t` dimmed, with the ROI outlined and one arrow per `stride` cell.
/// The longest arrow of the frame is `stride` pixels.
pub fn render_overlay(
    frame: &Plane,
    ft: &ForceTexture,
    t: usize,
    roi: &RegionOfInterest,
    stride: usize,
    style: &OverlayStyle,
) -> Result<RgbImage> {
    if t >= ft.len() {
        return Err(Error::InvalidInput(format!(
            "frame {t} outside a {}-frame force texture",
            ft.len()
        )));
    }
    if stride == 0 {
        return Err(Error::InvalidInput("overlay stride must be positive".into()));
    }
    if frame.dims() != ft.dims() {
        return Err(Error::DimensionMismatch(format!(
            "frame {}x{} vs force texture {}x{}",
            frame.width(),
            frame.height(),
            ft.dims().0,
            ft.dims().1
        )));
    }
    roi.check_fits(frame.width(), frame.height())?;

    let (w, h) = frame.dims();
    let mut img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let g = (frame.get(x as usize, y as usize).clamp(0.0, 1.0) * 255.0 * style.dim).round() as u8;
        Rgb([g, g, g])
    });
    raster::rect_outline(
        &mut img,
        roi.x0 as i64 - 1,
        roi.y0 as i64 - 1,
        (roi.x0 + roi.width) as i64,
        (roi.y0 + roi.height) as i64,
        style.roi_box,
    );

    let field = &ft.fields[t];
    let sites = arrow_sites(roi, stride);
    let peak = sites
        .iter()
        .map(|&(x, y)| {
            let [u, v] = field.get(x, y);
            u.hypot(v)
        })
        .fold(0.0, f64::max);
    if peak <= 0.0 || !peak.is_finite() {
        return Ok(img);
    }
    for &(x, y) in &sites {
        let [u, v] = field.get(x, y);
        let mag = u.hypot(v);
        if mag <= 0.0 {
            continue;
        }
        let len = stride as f64 * mag / peak;
        let (dx, dy) = (u / mag, v / mag);
        let start = (x as f64, y as f64);
        let tip = (start.0 + dx * len, start.1 + dy * len);
        raster::line(&mut img, start, tip, style.arrow);
        let head = (len * 0.35).max(1.0);
        for (cs, sn) in [(0.866, 0.5), (0.866, -0.5)] {
            let bx = -(dx * cs - dy * sn);
            let by = -(dx * sn + dy * cs);
            raster::line(&mut img, tip, (tip.0 + bx * head, tip.1 + by * head), style.arrow);
        }
    }
    Ok(img)
}

/// Site with the largest force magnitude in frame `t`.
pub fn strongest_site(ft: &ForceTexture, t: usize, roi: &RegionOfInterest, stride: usize) -> Option<(usize, usize)> {
    let field = ft.fields.get(t)?;
    arrow_sites(roi, stride)
        .into_iter()
        .map(|(x, y)| {
            let [u, v] = field.get(x, y);
            ((x, y), u.hypot(v))
        })
        .fold(None, |best: Option<((usize, usize), f64)>, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        })
        .map(|(p, _)| p)
}
