//! Per-frame recovery of image-space force maps from motion through a fixed
//! modal basis.
//!
//! Every constraint mode reduces to
//! `F = scale · (S C Sᴴ)⁺ (x_t − S Sᴴ x_{t−1})`, where `x` is acceleration,
//! velocity or displacement, `S` the modal matrix and `C` a positive diagonal
//! correction (identity except in displacement mode).

pub mod ftx1;

use std::fmt;
use std::str::FromStr;

use log::debug;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::MotionTexture;
use crate::plane::VectorField;
use crate::roi::RegionOfInterest;
use crate::spectrum::ModalMatrix;

pub const DEFAULT_RTOL: f64 = 1e-6;

/// Velocity (px/s) and acceleration (px/s²) of a motion texture.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTextures {
    pub velocity: Vec<VectorField>,
    pub acceleration: Vec<VectorField>,
    pub fps: f64,
}

fn combine(fields: &[&VectorField], weights: &[f64]) -> VectorField {
    let (w, h) = fields[0].dims();
    let mut out = VectorField::zeros(w, h);
    for (f, &c) in fields.iter().zip(weights) {
        for (o, d) in out.data_mut().iter_mut().zip(f.data()) {
            o[0] += c * d[0];
            o[1] += c * d[1];
        }
    }
    out
}

/// Central differences in time; one-sided at the first and last frame.
pub fn finite_difference(motion: &MotionTexture) -> Result<DerivativeTextures> {
    let t = motion.len();
    if t < 3 {
        return Err(Error::InvalidInput(format!(
            "finite differences need at least 3 frames, got {t}"
        )));
    }
    let fps = motion.fps();
    let m = motion.fields();
    let velocity = (0..t)
        .map(|i| match i {
            0 => combine(&[&m[1], &m[0]], &[fps, -fps]),
            _ if i == t - 1 => combine(&[&m[i], &m[i - 1]], &[fps, -fps]),
            _ => combine(&[&m[i + 1], &m[i - 1]], &[0.5 * fps, -0.5 * fps]),
        })
        .collect();
    let f2 = fps * fps;
    let acceleration = (0..t)
        .map(|i| {
            let c = i.clamp(1, t - 2);
            combine(&[&m[c + 1], &m[c], &m[c - 1]], &[f2, -2.0 * f2, f2])
        })
        .collect();
    Ok(DerivativeTextures {
        velocity,
        acceleration,
        fps,
    })
}

/// Minimum-norm least-squares solution of `A x = b`; singular values below
/// `rtol·σ_max` are treated as zero.
pub fn pseudo_solve(a: &DMatrix<Complex64>, b: &DVector<Complex64>, rtol: f64) -> DVector<Complex64> {
    assert_eq!(a.nrows(), b.len(), "pseudo_solve: rhs length");
    if a.is_empty() {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let s_max = svd.singular_values.max();
    let mut coeffs = u.adjoint() * b;
    for (c, &s) in coeffs.iter_mut().zip(svd.singular_values.iter()) {
        if s > rtol * s_max && s > 0.0 {
            *c /= Complex64::new(s, 0.0);
        } else {
            *c = Complex64::default();
        }
    }
    v_t.adjoint() * coeffs
}

/// How the diagonal correction in displacement mode is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrectionStrategy {
    Identity,
    /// `c_k = sinc²(f_k·dt)`, the attenuation of a bin-aligned oscillation
    /// averaged over one frame interval.
    #[default]
    Sinc2,
}

impl FromStr for CorrectionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "sinc2" => Ok(Self::Sinc2),
            other => Err(Error::format(
                "correction strategy",
                format!("{other:?} (expected identity|sinc2)"),
            )),
        }
    }
}

impl fmt::Display for CorrectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Identity => "identity",
            Self::Sinc2 => "sinc2",
        })
    }
}

/// Positive K×K diagonal, stored as its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionMatrix {
    diagonal: Vec<f64>,
    strategy: CorrectionStrategy,
    dt: f64,
}

impl CorrectionMatrix {
    pub fn identity(k: usize) -> Self {
        Self {
            diagonal: vec![1.0; k],
            strategy: CorrectionStrategy::Identity,
            dt: 0.0,
        }
    }

    pub fn sinc2(frequencies: &[f64], dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
        }
        let diagonal = frequencies
            .iter()
            .map(|&f| {
                let x = std::f64::consts::PI * f * dt;
                if x.abs() < 1e-8 {
                    1.0
                } else {
                    (x.sin() / x).powi(2)
                }
            })
            .collect();
        Self::from_diagonal(diagonal, CorrectionStrategy::Sinc2, dt)
    }

    pub fn build(strategy: CorrectionStrategy, frequencies: &[f64], dt: f64) -> Result<Self> {
        match strategy {
            CorrectionStrategy::Identity => Ok(Self::identity(frequencies.len())),
            CorrectionStrategy::Sinc2 => Self::sinc2(frequencies, dt),
        }
    }

    /// Entries must lie in `(0, 1]`.
    pub fn from_diagonal(diagonal: Vec<f64>, strategy: CorrectionStrategy, dt: f64) -> Result<Self> {
        if let Some(c) = diagonal.iter().find(|&&c| !(c > 0.0 && c <= 1.0)) {
            return Err(Error::InvalidInput(format!(
                "correction entry {c} outside (0, 1]"
            )));
        }
        Ok(Self {
            diagonal,
            strategy,
            dt,
        })
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn strategy(&self) -> CorrectionStrategy {
        self.strategy
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

/// Which motion derivative drives the constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstraintMode {
    Acceleration,
    Velocity,
    #[default]
    Displacement,
}

impl ConstraintMode {
    pub fn id(self) -> u8 {
        match self {
            Self::Acceleration => 0,
            Self::Velocity => 1,
            Self::Displacement => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Self::Acceleration),
            1 => Some(Self::Velocity),
            2 => Some(Self::Displacement),
            _ => None,
        }
    }
}

impl FromStr for ConstraintMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accel" => Ok(Self::Acceleration),
            "vel" => Ok(Self::Velocity),
            "disp" => Ok(Self::Displacement),
            other => Err(Error::format(
                "constraint mode",
                format!("{other:?} (expected accel|vel|disp)"),
            )),
        }
    }
}

impl fmt::Display for ConstraintMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Acceleration => "accel",
            Self::Velocity => "vel",
            Self::Displacement => "disp",
        })
    }
}

/// Real force vector over the ROI (u block then v block) and the norm of
/// the discarded imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedForce {
    pub force: Vec<f64>,
    pub imaginary_norm: f64,
}

/// Factorization of `S C^{1/2}` shared by every frame solve.
#[derive(Debug, Clone)]
pub struct ModalSolver {
    basis: DMatrix<Complex64>,
    basis_adjoint: DMatrix<Complex64>,
    left: DMatrix<Complex64>,
    left_adjoint: DMatrix<Complex64>,
    inv_sq: Vec<f64>,
    correction: CorrectionMatrix,
}

impl ModalSolver {
    /// `rtol` applies to the singular values of `S C Sᴴ`, i.e. to the squared
    /// singular values of `S C^{1/2}`.
    pub fn new(modal: &ModalMatrix, correction: &CorrectionMatrix, rtol: f64) -> Result<Self> {
        Self::from_basis(modal.columns().clone(), correction, rtol)
    }

    pub fn identity(modal: &ModalMatrix, rtol: f64) -> Result<Self> {
        Self::new(modal, &CorrectionMatrix::identity(modal.n_modes()), rtol)
    }

    pub fn from_basis(
        basis: DMatrix<Complex64>,
        correction: &CorrectionMatrix,
        rtol: f64,
    ) -> Result<Self> {
        let k = basis.ncols();
        if correction.diagonal.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "correction has {} entries for {k} modes",
                correction.diagonal.len()
            )));
        }
        if !(rtol >= 0.0 && rtol < 1.0) {
            return Err(Error::InvalidInput(format!("rtol must lie in [0, 1), got {rtol}")));
        }
        let mut weighted = basis.clone();
        for (j, &c) in correction.diagonal.iter().enumerate() {
            weighted.column_mut(j).scale_mut(c.sqrt());
        }
        let svd = weighted.svd(true, false);
        let u = svd.u.expect("u requested");
        let s_max = svd.singular_values.max();
        let keep: Vec<usize> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0.0 && s * s > rtol * s_max * s_max)
            .map(|(i, _)| i)
            .collect();
        let left = u.select_columns(&keep);
        let inv_sq = keep
            .iter()
            .map(|&i| svd.singular_values[i].powi(-2))
            .collect();
        debug!(
            "modal solver: rank {} of {k} (sigma_max {s_max:.3e})",
            keep.len()
        );
        Ok(Self {
            basis_adjoint: basis.adjoint(),
            basis,
            left_adjoint: left.adjoint(),
            left,
            inv_sq,
            correction: correction.clone(),
        })
    }

    pub fn rank(&self) -> usize {
        self.inv_sq.len()
    }

    pub fn rows(&self) -> usize {
        self.basis.nrows()
    }

    pub fn correction(&self) -> &CorrectionMatrix {
        &self.correction
    }

    /// `S Sᴴ x`.
    pub fn project(&self, state: &DVector<Complex64>) -> DVector<Complex64> {
        &self.basis * (&self.basis_adjoint * state)
    }

    /// `(S C Sᴴ)⁺ r`.
    pub fn apply_pinv(&self, residual: &DVector<Complex64>) -> DVector<Complex64> {
        let mut coords = &self.left_adjoint * residual;
        for (c, &w) in coords.iter_mut().zip(&self.inv_sq) {
            *c *= w;
        }
        &self.left * coords
    }

    /// Dense `(S C Sᴴ)⁺`; meant for small bases and checks.
    pub fn pinv_matrix(&self) -> DMatrix<Complex64> {
        let mut scaled = self.left.clone();
        for (j, &w) in self.inv_sq.iter().enumerate() {
            scaled.column_mut(j).scale_mut(w);
        }
        scaled * &self.left_adjoint
    }

    fn solve_scaled(&self, now: &[f64], prev: &[f64], scale: f64) -> Result<SolvedForce> {
        let rows = self.rows();
        if now.len() != rows || prev.len() != rows {
            return Err(Error::DimensionMismatch(format!(
                "state vectors of length {} and {} for a {rows}-row basis",
                now.len(),
                prev.len()
            )));
        }
        let to_complex = |v: &[f64]| DVector::from_iterator(rows, v.iter().map(|&x| Complex64::new(x, 0.0)));
        let residual = to_complex(now) - self.project(&to_complex(prev));
        let f = self.apply_pinv(&residual);
        Ok(SolvedForce {
            force: f.iter().map(|z| z.re * scale).collect(),
            imaginary_norm: f.iter().map(|z| z.im * z.im).sum::<f64>().sqrt() * scale.abs(),
        })
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("dt must be positive, got {dt}")))
    }
}

pub fn solve_acceleration(solver: &ModalSolver, now: &[f64], prev: &[f64]) -> Result<SolvedForce> {
    solver.solve_scaled(now, prev, 1.0)
}

pub fn solve_velocity(solver: &ModalSolver, now: &[f64], prev: &[f64], dt: f64) -> Result<SolvedForce> {
    check_dt(dt)?;
    solver.solve_scaled(now, prev, 1.0 / dt)
}

/// Uses the solver's correction matrix.
pub fn solve_displacement(
    solver: &ModalSolver,
    now: &[f64],
    prev: &[f64],
    dt: f64,
) -> Result<SolvedForce> {
    check_dt(dt)?;
    solver.solve_scaled(now, prev, 1.0 / (dt * dt))
}

/// Per-frame image-space forces, zero outside the region they were solved on.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceTexture {
    pub fields: Vec<VectorField>,
    pub mode: ConstraintMode,
    pub fps: f64,
    pub roi: Option<RegionOfInterest>,
    /// Imaginary residual norm per frame (zero when loaded from disk).
    pub imaginary_norms: Vec<f64>,
}

impl ForceTexture {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.fields.first().map_or((0, 0), VectorField::dims)
    }
}

/// Solve every frame of `motion` over the modal matrix's region.
///
/// Frame 0 has no predecessor and uses itself as the previous state.
pub fn estimate_force_texture(
    modal: &ModalMatrix,
    motion: &MotionTexture,
    mode: ConstraintMode,
    correction: CorrectionStrategy,
    rtol: f64,
) -> Result<ForceTexture> {
    let (w, h) = motion.dims();
    let roi = modal.roi();
    roi.check_fits(w, h)?;
    if motion.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "force estimation needs at least 3 frames, got {}",
            motion.len()
        )));
    }
    let dt = 1.0 / motion.fps();
    let corr = match mode {
        ConstraintMode::Displacement => {
            CorrectionMatrix::build(correction, modal.frequencies(), dt)?
        }
        _ => CorrectionMatrix::identity(modal.n_modes()),
    };
    let solver = ModalSolver::new(modal, &corr, rtol)?;

    let states: Vec<Vec<f64>> = match mode {
        ConstraintMode::Displacement => motion.fields().iter().map(|f| roi.gather(f)).collect(),
        ConstraintMode::Velocity => finite_difference(motion)?
            .velocity
            .iter()
            .map(|f| roi.gather(f))
            .collect(),
        ConstraintMode::Acceleration => finite_difference(motion)?
            .acceleration
            .iter()
            .map(|f| roi.gather(f))
            .collect(),
    };

    let solved: Vec<SolvedForce> = (0..states.len())
        .into_par_iter()
        .map(|t| {
            let prev = &states[t.saturating_sub(1)];
            match mode {
                ConstraintMode::Acceleration => solve_acceleration(&solver, &states[t], prev),
                ConstraintMode::Velocity => solve_velocity(&solver, &states[t], prev, dt),
                ConstraintMode::Displacement => solve_displacement(&solver, &states[t], prev, dt),
            }
        })
        .collect::<Result<_>>()?;

    let imaginary_norms: Vec<f64> = solved.iter().map(|s| s.imaginary_norm).collect();
    let worst = imaginary_norms.iter().copied().fold(0.0, f64::max);
    debug!("force texture: largest imaginary residual {worst:.3e}");
    let fields = solved
        .iter()
        .map(|s| roi.scatter(&s.force, w, h))
        .collect::<Vec<_>>();
    if !fields.iter().all(VectorField::is_finite) {
        return Err(Error::NonFinite("force texture"));
    }
    Ok(ForceTexture {
        fields,
        mode,
        fps: motion.fps(),
        roi: Some(roi.clone()),
        imaginary_norms,
    })
}
