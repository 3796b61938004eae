//! Motion textures: dense displacement fields relative to a reference frame.
//!
//! A motion texture `M_t` maps the reference image onto frame `t` so that
//! `I_t(p + M_t(p)) = I_0(p)`. Textures are produced here by a classical
//! coarse-to-fine gradient-based estimator ([`compute_flow`]) or loaded from
//! interchange files written by an external flow exporter ([`flo`]).

pub mod flo;
mod lk;
mod warp;
mod weighting;

use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::plane::{Plane, VectorField};

pub use lk::dense_flow;
pub use warp::{warp_image, WarpedImage};
pub use weighting::{apply_weighting, local_contrast, WeightMap, WeightingMode};

/// Grayscale frames sharing one size, with intensities in [0,1].
#[derive(Debug, Clone)]
pub struct FrameSequence {
    frames: Vec<Plane>,
    fps: f64,
    reference_index: usize,
}

impl FrameSequence {
    pub fn new(frames: Vec<Plane>, fps: f64, reference_index: usize) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidInput("empty frame sequence".into()));
        }
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidInput(format!("fps must be positive, got {fps}")));
        }
        if reference_index >= frames.len() {
            return Err(Error::InvalidInput(format!(
                "reference index {reference_index} outside {} frames",
                frames.len()
            )));
        }
        let dims = frames[0].dims();
        if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.dims() != dims) {
            return Err(Error::DimensionMismatch(format!(
                "frame {i} is {}x{}, frame 0 is {}x{}",
                f.width(),
                f.height(),
                dims.0,
                dims.1
            )));
        }
        Ok(Self {
            frames,
            fps,
            reference_index,
        })
    }

    /// Load every `.png` in `dir`, sorted by file name, converted to luma.
    pub fn load_dir(dir: impl AsRef<Path>, fps: f64, reference_index: usize) -> Result<Self> {
        let paths = list_with_extension(dir.as_ref(), "png")?;
        let frames = paths
            .iter()
            .map(Plane::load_png)
            .collect::<Result<Vec<_>>>()?;
        Self::new(frames, fps, reference_index)
    }

    pub fn frames(&self) -> &[Plane] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn reference_index(&self) -> usize {
        self.reference_index
    }

    pub fn reference(&self) -> &Plane {
        &self.frames[self.reference_index]
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }
}

/// `T` displacement fields (pixels) relative to the reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionTexture {
    fields: Vec<VectorField>,
    fps: f64,
    reference_index: usize,
}

impl MotionTexture {
    pub fn new(fields: Vec<VectorField>, fps: f64, reference_index: usize) -> Result<Self> {
        if fields.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "motion texture needs at least 2 frames, got {}",
                fields.len()
            )));
        }
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidInput(format!("fps must be positive, got {fps}")));
        }
        if reference_index >= fields.len() {
            return Err(Error::InvalidInput(format!(
                "reference index {reference_index} outside {} frames",
                fields.len()
            )));
        }
        let dims = fields[0].dims();
        if fields.iter().any(|f| f.dims() != dims) {
            return Err(Error::DimensionMismatch(
                "motion texture frames differ in size".into(),
            ));
        }
        if !fields.iter().all(VectorField::is_finite) {
            return Err(Error::NonFinite("motion texture"));
        }
        if !fields[reference_index].is_zero() {
            return Err(Error::InvalidInput(format!(
                "displacement of reference frame {reference_index} is not zero"
            )));
        }
        Ok(Self {
            fields,
            fps,
            reference_index,
        })
    }

    /// Load every `.flo` file in `dir`, sorted by file name.
    pub fn load_dir(dir: impl AsRef<Path>, fps: f64, reference_index: usize) -> Result<Self> {
        let paths = list_with_extension(dir.as_ref(), "flo")?;
        let fields = paths
            .iter()
            .map(flo::read_flow_file)
            .collect::<Result<Vec<_>>>()?;
        Self::new(fields, fps, reference_index)
    }

    /// Write `frame_NNNN.flo` files into `dir`; returns the written paths.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::with_capacity(self.fields.len());
        for (t, field) in self.fields.iter().enumerate() {
            let path = dir.join(format!("frame_{t:04}.flo"));
            flo::write_flow_file(field, &path)?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn field(&self, t: usize) -> &VectorField {
        &self.fields[t]
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn reference_index(&self) -> usize {
        self.reference_index
    }

    pub fn dims(&self) -> (usize, usize) {
        self.fields[0].dims()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            fields: self.fields.iter().map(|f| f.scaled(alpha)).collect(),
            fps: self.fps,
            reference_index: self.reference_index,
        }
    }

    pub fn into_fields(self) -> Vec<VectorField> {
        self.fields
    }
}

/// Parameters of the built-in pyramidal gradient-based estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    /// Pyramid levels, including full resolution.
    pub levels: usize,
    /// Side of the square integration window (odd).
    pub window: usize,
    /// Gauss-Newton refinements per level.
    pub iterations: usize,
    /// Chain frame-to-frame flows instead of matching every frame against
    /// the reference directly.
    pub accumulate: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            levels: 3,
            window: 5,
            iterations: 3,
            accumulate: false,
        }
    }
}

/// Output of [`compute_flow`].
#[derive(Debug, Clone)]
pub struct FlowEstimate {
    pub motion: MotionTexture,
    /// Frames whose flow was forced to zero because an input was
    /// constant-intensity.
    pub degenerate_frames: Vec<usize>,
}

/// Estimate the motion texture of `frames` relative to their reference frame.
pub fn compute_flow(frames: &FrameSequence, config: &FlowConfig) -> Result<FlowEstimate> {
    if frames.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "flow needs at least 2 frames, got {}",
            frames.len()
        )));
    }
    if config.window % 2 == 0 {
        return Err(Error::InvalidInput(format!(
            "flow window must be odd, got {}",
            config.window
        )));
    }
    let (w, h) = frames.dims();
    let r = frames.reference_index();
    let reference = frames.reference();

    let results: Vec<(VectorField, bool)> = if config.accumulate {
        accumulate_flow(frames, config)
    } else {
        frames
            .frames()
            .par_iter()
            .enumerate()
            .map(|(t, frame)| {
                if t == r {
                    (VectorField::zeros(w, h), false)
                } else {
                    lk::dense_flow(reference, frame, config)
                }
            })
            .collect()
    };

    let mut degenerate_frames = Vec::new();
    let mut fields = Vec::with_capacity(results.len());
    for (t, (field, degenerate)) in results.into_iter().enumerate() {
        if degenerate {
            warn!("frame {t}: constant intensity, flow set to zero");
            degenerate_frames.push(t);
        }
        fields.push(field);
    }
    let motion = MotionTexture::new(fields, frames.fps(), r)?;
    Ok(FlowEstimate {
        motion,
        degenerate_frames,
    })
}

/// Chain neighbouring-frame flows outward from the reference:
/// `M_t(p) = M_n(p) + f_{n→t}(p + M_n(p))` with `n` the neighbour nearer the
/// reference.
fn accumulate_flow(frames: &FrameSequence, config: &FlowConfig) -> Vec<(VectorField, bool)> {
    let (w, h) = frames.dims();
    let r = frames.reference_index();
    let steps: Vec<(VectorField, bool)> = (0..frames.len())
        .into_par_iter()
        .map(|t| {
            if t == r {
                (VectorField::zeros(w, h), false)
            } else {
                let near = if t > r { t - 1 } else { t + 1 };
                lk::dense_flow(&frames.frames()[near], &frames.frames()[t], config)
            }
        })
        .collect();

    let mut out: Vec<Option<(VectorField, bool)>> = vec![None; frames.len()];
    out[r] = Some((VectorField::zeros(w, h), false));
    let forward = (r + 1..frames.len()).map(|t| (t, t - 1));
    let backward = (0..r).rev().map(|t| (t, t + 1));
    for (t, near) in forward.chain(backward) {
        let (prev, prev_degenerate) = out[near].clone().expect("neighbour resolved first");
        let (step, step_degenerate) = &steps[t];
        let chained = VectorField::from_fn(w, h, |x, y| {
            let [pu, pv] = prev.get(x, y);
            let [su, sv] = step.sample(x as f64 + pu, y as f64 + pv);
            [pu + su, pv + sv]
        });
        out[t] = Some((chained, prev_degenerate || *step_degenerate));
    }
    out.into_iter().map(|o| o.expect("all frames resolved")).collect()
}

pub(crate) fn list_with_extension(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case(ext))
        {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no .{ext} files in {}",
            dir.display()
        )));
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::textured;

    #[test]
    fn static_sequence_gives_zero_flow() {
        let img = textured(24, 24, 3);
        let frames = FrameSequence::new(vec![img.clone(), img.clone(), img], 30.0, 0).unwrap();
        let est = compute_flow(&frames, &FlowConfig::default()).unwrap();
        for f in est.motion.fields() {
            assert!(f.max_magnitude() < 1e-9);
        }
        assert!(est.degenerate_frames.is_empty());
    }

    #[test]
    fn constant_frames_are_flagged() {
        let flat = Plane::filled(16, 16, 0.5);
        let frames = FrameSequence::new(vec![flat.clone(), flat], 30.0, 0).unwrap();
        let est = compute_flow(&frames, &FlowConfig::default()).unwrap();
        assert_eq!(est.degenerate_frames, vec![1]);
        assert!(est.motion.field(1).is_zero());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = FrameSequence::new(vec![Plane::new(4, 4), Plane::new(5, 4)], 30.0, 0);
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn reference_must_be_zero() {
        let fields = vec![VectorField::filled(2, 2, [1.0, 0.0]), VectorField::zeros(2, 2)];
        assert!(MotionTexture::new(fields.clone(), 30.0, 0).is_err());
        assert!(MotionTexture::new(fields, 30.0, 1).is_ok());
    }

    #[test]
    fn accumulated_mode_tracks_translation() {
        let frames: Vec<Plane> = (0..4)
            .map(|t| crate::testutil::translated(32, 32, 7, 0.75 * t as f64, 0.0))
            .collect();
        let seq = FrameSequence::new(frames, 30.0, 0).unwrap();
        let cfg = FlowConfig {
            accumulate: true,
            ..FlowConfig::default()
        };
        let est = compute_flow(&seq, &cfg).unwrap();
        let f = est.motion.field(3);
        let (mut su, mut n) = (0.0, 0.0);
        for y in 8..24 {
            for x in 8..24 {
                su += f.get(x, y)[0];
                n += 1.0;
            }
        }
        assert!((su / n - 2.25).abs() < 0.2, "mean u = {}", su / n);
    }
}
