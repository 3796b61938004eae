//! Temporal spectra of motion textures and the truncated complex modal basis.

pub mod msh1;
mod plot;

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::flow::MotionTexture;
use crate::plane::Plane;
use crate::roi::RegionOfInterest;

pub use plot::render_spectrum_plot;

/// Tolerance on the unit norm of in-memory modal columns.
pub const COLUMN_NORM_TOL: f64 = 1e-9;

/// Nonnegative-frequency temporal DFT coefficients of every pixel and
/// direction. Bin `b` sits at `b·fps/T` Hz; bins `0..floor(T/2)` are kept.
#[derive(Debug, Clone)]
pub struct SpectralStack {
    width: usize,
    height: usize,
    frames: usize,
    fps: f64,
    // [bin][y][x][component]
    coefficients: Vec<Complex64>,
}

impl SpectralStack {
    pub fn n_bins(&self) -> usize {
        self.frames / 2
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.fps / self.frames as f64
    }

    pub fn bin_frequencies(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|b| self.bin_frequency(b)).collect()
    }

    /// `(u, v)` coefficients of `bin` at pixel `(x, y)`.
    pub fn coefficient(&self, bin: usize, x: usize, y: usize) -> [Complex64; 2] {
        let i = ((bin * self.height + y) * self.width + x) * 2;
        [self.coefficients[i], self.coefficients[i + 1]]
    }
}

fn forward_plan(len: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(len)
}

/// Unnormalized forward DFT of a real series (all `T` bins).
pub fn temporal_dft(signal: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = signal.iter().map(|&s| Complex64::new(s, 0.0)).collect();
    forward_plan(signal.len()).process(&mut buf);
    buf
}

/// Inverse of [`temporal_dft`], including the `1/T` factor.
pub fn inverse_dft(spectrum: &[Complex64]) -> Vec<Complex64> {
    let mut buf = spectrum.to_vec();
    FftPlanner::new()
        .plan_fft_inverse(spectrum.len())
        .process(&mut buf);
    let scale = 1.0 / spectrum.len() as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Per-pixel, per-direction temporal DFT of a motion texture.
pub fn mode_shapes(motion: &MotionTexture) -> Result<SpectralStack> {
    let frames = motion.len();
    if frames < 4 {
        return Err(Error::InvalidInput(format!(
            "spectrum needs at least 4 frames, got {frames}"
        )));
    }
    if !motion.fields().iter().all(|f| f.is_finite()) {
        return Err(Error::NonFinite("motion texture"));
    }
    let (width, height) = motion.dims();
    let n_bins = frames / 2;
    let plan = forward_plan(frames);
    let pixels = width * height;

    // [pixel][component] -> first n_bins coefficients
    let per_pixel: Vec<[Vec<Complex64>; 2]> = (0..pixels)
        .into_par_iter()
        .map(|p| {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            [0, 1].map(|c| {
                let mut buf: Vec<Complex64> = motion
                    .fields()
                    .iter()
                    .map(|f| Complex64::new(f.data()[p][c], 0.0))
                    .collect();
                plan.process_with_scratch(&mut buf, &mut scratch);
                buf.truncate(n_bins);
                buf
            })
        })
        .collect();

    let mut coefficients = vec![Complex64::default(); n_bins * pixels * 2];
    for (p, comps) in per_pixel.iter().enumerate() {
        for (c, series) in comps.iter().enumerate() {
            for (b, &z) in series.iter().enumerate() {
                coefficients[(b * pixels + p) * 2 + c] = z;
            }
        }
    }
    Ok(SpectralStack {
        width,
        height,
        frames,
        fps: motion.fps(),
        coefficients,
    })
}

/// Mean coefficient magnitude per bin over active pixels and both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub amplitudes: Vec<f64>,
    pub frequencies: Vec<f64>,
}

impl PowerSpectrum {
    /// CSV with header `bin,frequency_hz,amplitude,selected`.
    pub fn write_csv(&self, path: impl AsRef<Path>, selected: &[usize]) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("bin,frequency_hz,amplitude,selected\n");
        for (b, (f, a)) in self.frequencies.iter().zip(&self.amplitudes).enumerate() {
            out.push_str(&format!(
                "{b},{f},{a},{}\n",
                u8::from(selected.contains(&b))
            ));
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn peak_bin(&self) -> usize {
        self.amplitudes
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (b, &a)| if a > best.1 { (b, a) } else { best })
            .0
    }
}

pub fn power_spectrum(spec: &SpectralStack, mask: &Plane) -> Result<PowerSpectrum> {
    if mask.dims() != spec.dims() {
        return Err(Error::DimensionMismatch(format!(
            "mask {}x{} vs spectrum {}x{}",
            mask.width(),
            mask.height(),
            spec.width,
            spec.height
        )));
    }
    let active: Vec<usize> = mask
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m != 0.0)
        .map(|(i, _)| i)
        .collect();
    if active.is_empty() {
        return Err(Error::EmptyMask);
    }
    let pixels = spec.width * spec.height;
    let denom = (2 * active.len()) as f64;
    let amplitudes = (0..spec.n_bins())
        .map(|b| {
            active
                .iter()
                .map(|&p| {
                    let i = (b * pixels + p) * 2;
                    spec.coefficients[i].norm() + spec.coefficients[i + 1].norm()
                })
                .sum::<f64>()
                / denom
        })
        .collect();
    Ok(PowerSpectrum {
        amplitudes,
        frequencies: spec.bin_frequencies(),
    })
}

/// Selected frequency bins, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSelection {
    pub bins: Vec<usize>,
    pub frequencies: Vec<f64>,
}

/// How bins are chosen for the modal basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BandStrategy {
    /// Contiguous bins starting right above DC (or at DC).
    #[default]
    First,
    /// The `K` bins with the largest mean amplitude.
    TopEnergy,
}

fn band_bounds(spec: &SpectralStack, k: usize, skip_dc: bool) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidInput("K must be at least 1".into()));
    }
    let first = usize::from(skip_dc);
    let available = spec.n_bins().saturating_sub(first);
    if k > available {
        return Err(Error::BandTooWide {
            requested: k,
            available,
        });
    }
    Ok(first)
}

/// Bins `1..=K` when `skip_dc`, else `0..K`.
pub fn select_band(spec: &SpectralStack, k: usize, skip_dc: bool) -> Result<BandSelection> {
    let first = band_bounds(spec, k, skip_dc)?;
    let bins: Vec<usize> = (first..first + k).collect();
    Ok(BandSelection {
        frequencies: bins.iter().map(|&b| spec.bin_frequency(b)).collect(),
        bins,
    })
}

/// The `K` most energetic bins (ties to the lower bin), returned ascending.
pub fn select_top_band(
    spec: &SpectralStack,
    power: &PowerSpectrum,
    k: usize,
    skip_dc: bool,
) -> Result<BandSelection> {
    let first = band_bounds(spec, k, skip_dc)?;
    let mut ranked: Vec<usize> = (first..spec.n_bins()).collect();
    ranked.sort_by(|&a, &b| {
        power.amplitudes[b]
            .total_cmp(&power.amplitudes[a])
            .then(a.cmp(&b))
    });
    let mut bins: Vec<usize> = ranked.into_iter().take(k).collect();
    bins.sort_unstable();
    Ok(BandSelection {
        frequencies: bins.iter().map(|&b| spec.bin_frequency(b)).collect(),
        bins,
    })
}

/// Truncated modal basis over a region of interest: `2N×K`, u block then v
/// block, unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalMatrix {
    columns: DMatrix<Complex64>,
    frequencies: Vec<f64>,
    roi: RegionOfInterest,
    fps: f64,
}

impl ModalMatrix {
    pub fn new(
        columns: DMatrix<Complex64>,
        frequencies: Vec<f64>,
        roi: RegionOfInterest,
        fps: f64,
    ) -> Result<Self> {
        Self::with_tolerance(columns, frequencies, roi, fps, COLUMN_NORM_TOL)
    }

    pub(crate) fn with_tolerance(
        columns: DMatrix<Complex64>,
        frequencies: Vec<f64>,
        roi: RegionOfInterest,
        fps: f64,
        tol: f64,
    ) -> Result<Self> {
        let k = columns.ncols();
        if k == 0 {
            return Err(Error::InvalidInput("modal matrix needs K >= 1".into()));
        }
        if frequencies.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "{} frequencies for {k} modes",
                frequencies.len()
            )));
        }
        if columns.nrows() != 2 * roi.n_active() {
            return Err(Error::DimensionMismatch(format!(
                "modal matrix has {} rows, roi needs {}",
                columns.nrows(),
                2 * roi.n_active()
            )));
        }
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidInput(format!("fps must be positive, got {fps}")));
        }
        if columns.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("modal matrix"));
        }
        if let Some(f) = frequencies.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "mode frequency {f} Hz (the DC bin is not a mode)"
            )));
        }
        for (j, col) in columns.column_iter().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > tol {
                return Err(Error::InvalidInput(format!(
                    "modal column {j} has norm {norm}"
                )));
            }
        }
        Ok(Self {
            columns,
            frequencies,
            roi,
            fps,
        })
    }

    pub fn columns(&self) -> &DMatrix<Complex64> {
        &self.columns
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn roi(&self) -> &RegionOfInterest {
        &self.roi
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn n_modes(&self) -> usize {
        self.columns.ncols()
    }

    pub fn n_pixels(&self) -> usize {
        self.columns.nrows() / 2
    }
}

/// Stack the selected bins over the active ROI pixels and normalize each
/// column.
pub fn assemble_modal_matrix(
    spec: &SpectralStack,
    band: &BandSelection,
    roi: &RegionOfInterest,
) -> Result<ModalMatrix> {
    roi.check_fits(spec.width, spec.height)?;
    if band.bins.is_empty() {
        return Err(Error::InvalidInput("empty band selection".into()));
    }
    if let Some(&b) = band.bins.iter().find(|&&b| b >= spec.n_bins()) {
        return Err(Error::InvalidInput(format!(
            "bin {b} outside the {} available bins",
            spec.n_bins()
        )));
    }
    let pixels = roi.active_pixels();
    let n = pixels.len();
    let mut columns = DMatrix::<Complex64>::zeros(2 * n, band.bins.len());
    for (j, &bin) in band.bins.iter().enumerate() {
        for (i, &(x, y)) in pixels.iter().enumerate() {
            let [u, v] = spec.coefficient(bin, x, y);
            columns[(i, j)] = u;
            columns[(n + i, j)] = v;
        }
        let norm = columns.column(j).norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroEnergyBin { bin });
        }
        columns.column_mut(j).unscale_mut(norm);
    }
    let frequencies = band.bins.iter().map(|&b| spec.bin_frequency(b)).collect();
    ModalMatrix::new(columns, frequencies, roi.clone(), spec.fps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::VectorField;
    use std::f64::consts::PI;

    fn single_pixel(series: &[f64], fps: f64) -> MotionTexture {
        let fields = series
            .iter()
            .map(|&u| VectorField::filled(1, 1, [u, 0.0]))
            .collect();
        MotionTexture::new(fields, fps, 0).unwrap()
    }

    fn direct_dft(x: &[f64]) -> Vec<Complex64> {
        let t = x.len();
        (0..t)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(n, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * n) as f64 / t as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn zero_motion_has_zero_spectrum() {
        let motion = MotionTexture::new(vec![VectorField::zeros(3, 2); 6], 30.0, 0).unwrap();
        let spec = mode_shapes(&motion).unwrap();
        assert!(spec.coefficients.iter().all(|z| *z == Complex64::default()));
        let p = power_spectrum(&spec, &Plane::filled(3, 2, 1.0)).unwrap();
        assert!(p.amplitudes.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn matches_direct_dft() {
        let series: Vec<f64> = (0..30).map(|t| ((t * 7919) % 13) as f64 / 13.0 - 0.5).collect();
        let mut motion_series = series.clone();
        motion_series[0] = 0.0;
        let spec = mode_shapes(&single_pixel(&motion_series, 30.0)).unwrap();
        let oracle = direct_dft(&motion_series);
        assert_eq!(spec.n_bins(), 15);
        for b in 0..15 {
            assert!((spec.coefficient(b, 0, 0)[0] - oracle[b]).norm() < 1e-9);
        }
    }

    #[test]
    fn constant_series_is_dc_only() {
        let c = 0.7;
        let spectrum = temporal_dft(&[c; 16]);
        assert!((spectrum[0].re - 16.0 * c).abs() < 1e-12);
        assert!(spectrum[1..].iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn two_pixel_amplitude_average() {
        let t = 32;
        let a = 0.25;
        let fields = (0..t)
            .map(|n| {
                let s = (2.0 * PI * 4.0 * n as f64 / t as f64).sin();
                VectorField::from_vec(2, 1, vec![[a * s, 0.0], [3.0 * a * s, 0.0]]).unwrap()
            })
            .collect();
        let spec = mode_shapes(&MotionTexture::new(fields, 32.0, 0).unwrap()).unwrap();
        let p = power_spectrum(&spec, &Plane::filled(2, 1, 1.0)).unwrap();
        // |DFT| of a·sin at an aligned bin is a·T/2 per pixel; the v components are
        // zero and count in the mean, halving it.
        let per_direction_mean = 2.0 * a * (t as f64 / 2.0);
        assert!((p.amplitudes[4] - per_direction_mean / 2.0).abs() < 1e-12);
        assert_eq!(p.peak_bin(), 4);
    }

    #[test]
    fn band_selection_bounds() {
        let motion = MotionTexture::new(vec![VectorField::zeros(1, 1); 10], 10.0, 0).unwrap();
        let spec = mode_shapes(&motion).unwrap();
        assert_eq!(select_band(&spec, 1, true).unwrap().bins, vec![1]);
        assert_eq!(select_band(&spec, 4, true).unwrap().bins, vec![1, 2, 3, 4]);
        assert!(matches!(
            select_band(&spec, 5, true),
            Err(Error::BandTooWide { .. })
        ));
        assert_eq!(select_band(&spec, 5, false).unwrap().bins, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn hand_normalized_column() {
        let spec = SpectralStack {
            width: 1,
            height: 1,
            frames: 4,
            fps: 4.0,
            coefficients: vec![
                Complex64::default(),
                Complex64::default(),
                Complex64::new(3.0, 4.0),
                Complex64::default(),
            ],
        };
        let band = select_band(&spec, 1, true).unwrap();
        let roi = RegionOfInterest::full(1, 1).unwrap();
        let m = assemble_modal_matrix(&spec, &band, &roi).unwrap();
        assert!((m.columns()[(0, 0)] - Complex64::new(0.6, 0.8)).norm() < 1e-15);
        assert_eq!(m.columns()[(1, 0)], Complex64::default());
        assert_eq!(m.frequencies(), &[1.0]);

        let zero = SpectralStack {
            coefficients: vec![Complex64::default(); 4],
            ..spec
        };
        assert!(matches!(
            assemble_modal_matrix(&zero, &band, &roi),
            Err(Error::ZeroEnergyBin { bin: 1 })
        ));
    }
}
