//! Contact-force signals aggregated from force textures, texture
//! normalization and arrow overlays.
//!
//! Exported signals use a `v`-up convention: `fv` is the negated row-direction
//! component so that positive values point up in the image.

mod overlay;

use std::path::Path;

use crate::error::{Error, Result};
use crate::plane::VectorField;
use crate::roi::RegionOfInterest;
use crate::solver::ForceTexture;

pub use overlay::{render_overlay, strongest_site, OverlayStyle};

/// Guard on standard deviations during normalization.
pub const STD_EPS: f64 = 1e-12;

/// How ROI sums are turned into a signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Divide by the rectangle area `w·h`, whatever the mask.
    #[default]
    RectangleArea,
    /// Divide by the number of active pixels.
    ActiveMean,
}

/// Per-frame contact force `(fu, fv)` and its norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactForceSignal {
    pub fu: Vec<f64>,
    pub fv: Vec<f64>,
    pub norm: Vec<f64>,
    pub fps: f64,
}

impl ContactForceSignal {
    /// `norm` is recomputed from the components.
    pub fn new(fu: Vec<f64>, fv: Vec<f64>, fps: f64) -> Result<Self> {
        if fu.len() != fv.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} u samples vs {} v samples",
                fu.len(),
                fv.len()
            )));
        }
        let norm = fu.iter().zip(&fv).map(|(u, v)| u.hypot(*v)).collect();
        Ok(Self { fu, fv, norm, fps })
    }

    pub fn len(&self) -> usize {
        self.fu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fu.is_empty()
    }

    pub fn time(&self, t: usize) -> f64 {
        t as f64 / self.fps
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,fu,fv,norm\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.time(i),
                self.fu[i],
                self.fv[i],
                self.norm[i]
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Parse a `t,fu,fv,norm` CSV; fps is inferred from the time column.
    pub fn parse_csv(text: &str, source: &Path) -> Result<Self> {
        let table = parse_table(text, source, &["t", "fu", "fv", "norm"])?;
        let t = &table[0];
        let fps = if t.len() >= 2 && t[1] > t[0] {
            1.0 / (t[1] - t[0])
        } else {
            1.0
        };
        let norm = table[3].clone();
        let mut signal = Self::new(table[1].clone(), table[2].clone(), fps)?;
        signal.norm = norm;
        Ok(signal)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }
}

/// Columns of a numeric CSV whose header must equal `header`.
pub(crate) fn parse_table(text: &str, source: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines
        .next()
        .ok_or_else(|| Error::format("csv", format!("{}: empty file", source.display())))?;
    let names: Vec<&str> = first.split(',').map(str::trim).collect();
    if names != header {
        return Err(Error::format(
            "csv",
            format!(
                "{}: header {:?}, expected {:?}",
                source.display(),
                names,
                header.join(",")
            ),
        ));
    }
    let mut columns = vec![Vec::new(); header.len()];
    for (row, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(Error::format(
                "csv",
                format!("{}: row {} has {} cells", source.display(), row + 1, cells.len()),
            ));
        }
        for (col, cell) in columns.iter_mut().zip(cells) {
            let value: f64 = cell.parse().map_err(|_| {
                Error::format("csv", format!("{}: bad number {cell:?}", source.display()))
            })?;
            col.push(value);
        }
    }
    Ok(columns)
}

/// Aggregate every frame over the ROI, dividing by `w·h`.
pub fn contact_force(ft: &ForceTexture, roi: &RegionOfInterest) -> Result<ContactForceSignal> {
    contact_force_with(ft, roi, Aggregation::RectangleArea)
}

pub fn contact_force_with(
    ft: &ForceTexture,
    roi: &RegionOfInterest,
    aggregation: Aggregation,
) -> Result<ContactForceSignal> {
    if roi.n_active() == 0 {
        return Err(Error::EmptyRoi);
    }
    let (w, h) = ft.dims();
    roi.check_fits(w, h)?;
    let denom = match aggregation {
        Aggregation::RectangleArea => roi.area(),
        Aggregation::ActiveMean => roi.n_active(),
    } as f64;
    let pixels = roi.active_pixels();
    let (mut fu, mut fv) = (Vec::with_capacity(ft.len()), Vec::with_capacity(ft.len()));
    for field in &ft.fields {
        let (su, sv) = pixels.iter().fold((0.0, 0.0), |(su, sv), &(x, y)| {
            let [u, v] = field.get(x, y);
            (su + u, sv + v)
        });
        fu.push(su / denom);
        fv.push(-sv / denom);
    }
    ContactForceSignal::new(fu, fv, ft.fps)
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn zscore(value: f64, mean: f64, std: f64) -> f64 {
    if std > STD_EPS {
        (value - mean) / std
    } else {
        0.0
    }
}

fn region_of(ft: &ForceTexture) -> Result<RegionOfInterest> {
    match &ft.roi {
        Some(r) => Ok(r.clone()),
        None => {
            let (w, h) = ft.dims();
            RegionOfInterest::full(w, h)
        }
    }
}

/// Per-frame z-score of each component over the ROI (spatial statistics).
pub fn normalize_spatial(ft: &ForceTexture) -> Result<ForceTexture> {
    let roi = region_of(ft)?;
    let pixels = roi.active_pixels();
    let (w, h) = ft.dims();
    let fields = ft
        .fields
        .iter()
        .map(|field| {
            let mut out = VectorField::zeros(w, h);
            for c in 0..2 {
                let (mean, std) = mean_std(pixels.iter().map(|&(x, y)| field.get(x, y)[c]));
                for &(x, y) in &pixels {
                    let mut d = out.get(x, y);
                    d[c] = zscore(field.get(x, y)[c], mean, std);
                    out.set(x, y, d);
                }
            }
            out
        })
        .collect();
    Ok(ForceTexture {
        fields,
        ..ft.clone()
    })
}

/// Per-pixel z-score of each component over time.
pub fn normalize_temporal(ft: &ForceTexture) -> Result<ForceTexture> {
    let roi = region_of(ft)?;
    let (w, h) = ft.dims();
    let mut fields = vec![VectorField::zeros(w, h); ft.len()];
    for (x, y) in roi.active_pixels() {
        for c in 0..2 {
            let (mean, std) = mean_std(ft.fields.iter().map(|f| f.get(x, y)[c]));
            for (out, f) in fields.iter_mut().zip(&ft.fields) {
                let mut d = out.get(x, y);
                d[c] = zscore(f.get(x, y)[c], mean, std);
                out.set(x, y, d);
            }
        }
    }
    Ok(ForceTexture {
        fields,
        ..ft.clone()
    })
}

/// Spatial z-score per frame, then temporal z-score per pixel. Values outside
/// the ROI are zeroed.
pub fn normalize_texture(ft: &ForceTexture) -> Result<ForceTexture> {
    if ft.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "normalization needs at least 2 frames, got {}",
            ft.len()
        )));
    }
    normalize_temporal(&normalize_spatial(ft)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::ConstraintMode;

    fn texture(fields: Vec<VectorField>) -> ForceTexture {
        let n = fields.len();
        ForceTexture {
            fields,
            mode: ConstraintMode::Displacement,
            fps: 10.0,
            roi: None,
            imaginary_norms: vec![0.0; n],
        }
    }

    #[test]
    fn uniform_force_is_recovered() {
        let ft = texture(vec![VectorField::filled(5, 4, [2.0, -3.0]); 3]);
        let roi = RegionOfInterest::new(1, 1, 3, 2).unwrap();
        let s = contact_force(&ft, &roi).unwrap();
        assert_eq!(s.fu, vec![2.0; 3]);
        assert_eq!(s.fv, vec![3.0; 3]);
        assert_eq!(s.norm[0], 2.0f64.hypot(3.0));
    }

    #[test]
    fn single_pixel_is_divided_by_area() {
        let mut f = VectorField::zeros(6, 6);
        f.set(3, 3, [6.0, 0.0]);
        let ft = texture(vec![f.clone(), f]);
        let roi = RegionOfInterest::new(1, 1, 4, 3).unwrap();
        assert_eq!(contact_force(&ft, &roi).unwrap().fu[0], 0.5);
        let masked = roi
            .clone()
            .with_mask((0..12).map(|i| i % 2 == 0).collect())
            .unwrap();
        let lit = contact_force(&ft, &masked).unwrap().fu[0];
        let mean = contact_force_with(&ft, &masked, Aggregation::ActiveMean).unwrap().fu[0];
        assert!((lit - 0.5).abs() < 1e-15);
        assert!((mean - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_texture_normalizes_to_zero() {
        let ft = texture(vec![VectorField::filled(3, 3, [1.5, 1.5]); 4]);
        let n = normalize_texture(&ft).unwrap();
        assert!(n.fields.iter().all(VectorField::is_zero));
    }

    #[test]
    fn csv_round_trip() {
        let s = ContactForceSignal::new(vec![0.5, -1.25], vec![3.0, 0.0], 30.0).unwrap();
        let back = ContactForceSignal::parse_csv(&s.to_csv(), Path::new("s.csv")).unwrap();
        assert_eq!(back.fu, s.fu);
        assert_eq!(back.norm, s.norm);
        assert!((back.fps - 30.0).abs() < 1e-9);
        assert!(ContactForceSignal::parse_csv("a,b\n1,2\n", Path::new("x")).is_err());
    }
}
