use crate::plane::Plane;
use crate::synth::ProceduralTexture;

pub fn textured(w: usize, h: usize, seed: u64) -> Plane {
    ProceduralTexture::new(seed).render(w, h)
}

/// Texture content moved by `(dx, dy)`.
pub fn translated(w: usize, h: usize, seed: u64, dx: f64, dy: f64) -> Plane {
    ProceduralTexture::new(seed).render_shifted(w, h, dx, dy)
}
