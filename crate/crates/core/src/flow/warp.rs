use crate::error::{Error, Result};
use crate::plane::{Plane, VectorField};

// A target pixel counts as filled once it has received this much splat weight.
const MIN_SPLAT_WEIGHT: f64 = 0.5;

/// Forward-warped image with a validity mask.
#[derive(Debug, Clone)]
pub struct WarpedImage {
    pub image: Plane,
    /// `true` where enough source mass landed to define the pixel.
    pub valid: Vec<bool>,
}

impl WarpedImage {
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Mean absolute difference against `other` over valid pixels.
    pub fn mean_abs_error(&self, other: &Plane) -> f64 {
        let (sum, n) = self
            .image
            .data()
            .iter()
            .zip(other.data())
            .zip(&self.valid)
            .filter(|(_, &v)| v)
            .fold((0.0, 0usize), |(s, n), ((a, b), _)| (s + (a - b).abs(), n + 1));
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    }
}

/// Build `I'_t` with `I'_t(p + M(p)) = I_0(p)` by bilinear splatting of every
/// reference pixel onto its displaced position. Targets outside the image are
/// dropped; pixels that receive too little weight are marked invalid and set
/// to zero.
pub fn warp_image(reference: &Plane, displacement: &VectorField) -> Result<WarpedImage> {
    if reference.dims() != displacement.dims() {
        return Err(Error::DimensionMismatch(format!(
            "image {}x{} vs displacement {}x{}",
            reference.width(),
            reference.height(),
            displacement.width(),
            displacement.height()
        )));
    }
    let (w, h) = reference.dims();
    let mut acc = vec![0.0; w * h];
    let mut weight = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let [u, v] = displacement.get(x, y);
            let tx = x as f64 + u;
            let ty = y as f64 + v;
            let x0 = tx.floor();
            let y0 = ty.floor();
            let ax = tx - x0;
            let ay = ty - y0;
            let value = reference.get(x, y);
            for (dx, dy, wgt) in [
                (0, 0, (1.0 - ax) * (1.0 - ay)),
                (1, 0, ax * (1.0 - ay)),
                (0, 1, (1.0 - ax) * ay),
                (1, 1, ax * ay),
            ] {
                if wgt == 0.0 {
                    continue;
                }
                let px = x0 as i64 + dx;
                let py = y0 as i64 + dy;
                if px < 0 || py < 0 || px >= w as i64 || py >= h as i64 {
                    continue;
                }
                let i = py as usize * w + px as usize;
                acc[i] += wgt * value;
                weight[i] += wgt;
            }
        }
    }
    let valid: Vec<bool> = weight.iter().map(|&wt| wt >= MIN_SPLAT_WEIGHT).collect();
    let data = acc
        .iter()
        .zip(&weight)
        .zip(&valid)
        .map(|((&a, &wt), &ok)| if ok { a / wt } else { 0.0 })
        .collect();
    Ok(WarpedImage {
        image: Plane::from_vec(w, h, data)?,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::textured;

    #[test]
    fn zero_displacement_is_identity() {
        let img = textured(12, 9, 1);
        let out = warp_image(&img, &VectorField::zeros(12, 9)).unwrap();
        assert_eq!(out.image, img);
        assert!(out.valid.iter().all(|&v| v));
    }

    #[test]
    fn unit_shift_moves_right() {
        let img = textured(10, 6, 2);
        let out = warp_image(&img, &VectorField::filled(10, 6, [1.0, 0.0])).unwrap();
        for y in 0..6 {
            assert!(!out.valid[y * 10]);
            for x in 1..10 {
                assert_eq!(out.image.get(x, y), img.get(x - 1, y));
            }
        }
    }

    #[test]
    fn size_mismatch() {
        assert!(warp_image(&Plane::new(3, 3), &VectorField::zeros(3, 4)).is_err());
    }
}
