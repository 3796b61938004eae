// Dense coarse-to-fine Lucas-Kanade.
//
// Every pixel solves the 2x2 normal equations of the brightness-constancy
// residual over a square window warped by that pixel's current flow. Each
// level refines the flow upsampled from the coarser level; gradients are
// averaged between the reference and the warped target.

use super::FlowConfig;
use rayon::prelude::*;

use crate::plane::{Plane, VectorField};

const BINOMIAL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
// Coarsest pyramid level is never smaller than this on either side.
const MIN_LEVEL_SIZE: usize = 8;
// Tikhonov term on the structure tensor, relative to a unit-gradient window.
const RIDGE: f64 = 1e-6;
const FLAT_RANGE: f64 = 1e-9;

/// Flow from `reference` to `target` such that
/// `target(p + flow(p)) ≈ reference(p)`.
///
/// Returns the field and whether either input was constant (in which case the
/// field is zero).
pub fn dense_flow(reference: &Plane, target: &Plane, config: &FlowConfig) -> (VectorField, bool) {
    let (w, h) = reference.dims();
    if is_flat(reference) || is_flat(target) {
        return (VectorField::zeros(w, h), true);
    }

    let ref_pyr = pyramid(reference, config.levels);
    let tgt_pyr = pyramid(target, config.levels);
    let top = ref_pyr.len() - 1;

    let (tw, th) = ref_pyr[top].dims();
    let mut flow = VectorField::zeros(tw, th);
    for level in (0..=top).rev() {
        let r = &ref_pyr[level];
        let t = &tgt_pyr[level];
        if level != top {
            flow = upsample(&flow, r.width(), r.height());
        }
        for _ in 0..config.iterations {
            refine(r, t, &mut flow, config.window);
        }
    }
    (flow, false)
}

fn is_flat(img: &Plane) -> bool {
    let (lo, hi) = img.min_max();
    hi - lo < FLAT_RANGE
}

fn refine(reference: &Plane, target: &Plane, flow: &mut VectorField, window: usize) {
    let (w, h) = reference.dims();
    let (rx, ry) = gradients(reference);
    let (tx, ty) = gradients(target);
    let radius = (window / 2) as isize;
    let ridge = RIDGE * (window * window) as f64;

    let updates: Vec<[f64; 2]> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (px, py) = ((i % w) as isize, (i / w) as isize);
            let [u, v] = flow.data()[i];
            let (mut a, mut b, mut c, mut bu, mut bv) = (ridge, 0.0, ridge, 0.0, 0.0);
            for dy in -radius..=radius {
                for dx in -radius..=radius {
                    let (qx, qy) = (px + dx, py + dy);
                    if qx < 0 || qy < 0 || qx >= w as isize || qy >= h as isize {
                        continue;
                    }
                    let (qx, qy) = (qx as usize, qy as usize);
                    let (sx, sy) = (qx as f64 + u, qy as f64 + v);
                    let gx = 0.5 * (rx.get(qx, qy) + tx.sample(sx, sy));
                    let gy = 0.5 * (ry.get(qx, qy) + ty.sample(sx, sy));
                    let it = target.sample(sx, sy) - reference.get(qx, qy);
                    a += gx * gx;
                    b += gx * gy;
                    c += gy * gy;
                    bu -= gx * it;
                    bv -= gy * it;
                }
            }
            let det = a * c - b * b;
            if det <= 0.0 {
                return [0.0; 2];
            }
            [(c * bu - b * bv) / det, (a * bv - b * bu) / det]
        })
        .collect();
    for (d, du) in flow.data_mut().iter_mut().zip(updates) {
        d[0] += du[0];
        d[1] += du[1];
    }
}

/// Central differences, one-sided at the border.
fn gradients(img: &Plane) -> (Plane, Plane) {
    let (w, h) = img.dims();
    let gx = Plane::from_fn(w, h, |x, y| {
        if w < 2 {
            return 0.0;
        }
        match x {
            0 => img.get(1, y) - img.get(0, y),
            _ if x == w - 1 => img.get(x, y) - img.get(x - 1, y),
            _ => 0.5 * (img.get(x + 1, y) - img.get(x - 1, y)),
        }
    });
    let gy = Plane::from_fn(w, h, |x, y| {
        if h < 2 {
            return 0.0;
        }
        match y {
            0 => img.get(x, 1) - img.get(x, 0),
            _ if y == h - 1 => img.get(x, y) - img.get(x, y - 1),
            _ => 0.5 * (img.get(x, y + 1) - img.get(x, y - 1)),
        }
    });
    (gx, gy)
}

pub(crate) fn pyramid(img: &Plane, levels: usize) -> Vec<Plane> {
    let mut out = vec![img.clone()];
    while out.len() < levels.max(1) {
        let last = out.last().expect("non-empty");
        if last.width() / 2 < MIN_LEVEL_SIZE || last.height() / 2 < MIN_LEVEL_SIZE {
            break;
        }
        out.push(downsample(last));
    }
    out
}

fn downsample(img: &Plane) -> Plane {
    let blurred = binomial_blur(img);
    let (w, h) = img.dims();
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    Plane::from_fn(nw, nh, |x, y| blurred.get(2 * x, 2 * y))
}

fn binomial_blur(img: &Plane) -> Plane {
    let (w, h) = img.dims();
    let horiz = Plane::from_fn(w, h, |x, y| {
        BINOMIAL
            .iter()
            .enumerate()
            .map(|(k, c)| c * img.get_clamped(x as isize + k as isize - 2, y as isize))
            .sum()
    });
    Plane::from_fn(w, h, |x, y| {
        BINOMIAL
            .iter()
            .enumerate()
            .map(|(k, c)| c * horiz.get_clamped(x as isize, y as isize + k as isize - 2))
            .sum()
    })
}

fn upsample(flow: &VectorField, w: usize, h: usize) -> VectorField {
    let sx = flow.width() as f64 / w as f64;
    let sy = flow.height() as f64 / h as f64;
    VectorField::from_fn(w, h, |x, y| {
        let [u, v] = flow.sample(x as f64 * sx, y as f64 * sy);
        [u / sx, v / sy]
    })
}
