//! Vision-based contact force estimation from image-space modal bases.
//!
//! A modal basis is learned from video of natural cyclic motion
//! ([`spectrum`]); force textures are then recovered from interaction video
//! by a per-frame least-squares constraint solve ([`solver`]), aggregated
//! into contact-force signals ([`contact`]) and scored against reference
//! forces ([`eval`]). [`synth`] provides a simulated ground truth.

pub mod contact;
pub mod error;
pub mod eval;
pub mod flow;
pub mod plane;
mod raster;
pub mod roi;
pub mod solver;
pub mod spectrum;
pub mod synth;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use plane::{Plane, VectorField};
pub use roi::RegionOfInterest;
