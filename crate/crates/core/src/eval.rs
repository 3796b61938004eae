//! Comparison of predicted contact-force signals against reference forces.

use std::fmt;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::contact::{parse_table, ContactForceSignal};
use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-9;
const STD_EPS: f64 = 1e-12;

/// Pinhole intrinsics plus a world→camera rotation (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: [f64; 9],
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, rotation: [f64; 9]) -> Result<Self> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            rotation,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn identity() -> Self {
        Self {
            fx: 1.0,
            fy: 1.0,
            cx: 0.0,
            cy: 0.0,
            rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        }
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        self.rotation[3 * i + j]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidInput(format!(
                "focal lengths must be positive, got fx = {}, fy = {}",
                self.fx, self.fy
            )));
        }
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| self.r(k, i) * self.r(k, j)).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        if !(worst <= ORTHONORMAL_TOL) {
            return Err(Error::NonOrthonormalRotation(worst));
        }
        let det = self.r(0, 0) * (self.r(1, 1) * self.r(2, 2) - self.r(1, 2) * self.r(2, 1))
            - self.r(0, 1) * (self.r(1, 0) * self.r(2, 2) - self.r(1, 2) * self.r(2, 0))
            + self.r(0, 2) * (self.r(1, 0) * self.r(2, 1) - self.r(1, 1) * self.r(2, 0));
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::NonOrthonormalRotation((det - 1.0).abs()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cam: Self = toml::from_str(text).map_err(|e| Error::format("camera model", e.to_string()))?;
        cam.validate()?;
        Ok(cam)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("camera model serializes")
    }
}

/// Timestamped 3D force samples in the sensor frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceForceSeries {
    pub times: Vec<f64>,
    pub forces: Vec<[f64; 3]>,
}

impl ReferenceForceSeries {
    pub fn new(times: Vec<f64>, forces: Vec<[f64; 3]>) -> Result<Self> {
        if times.len() != forces.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} timestamps for {} forces",
                times.len(),
                forces.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("timestamps must be strictly increasing".into()));
        }
        Ok(Self { times, forces })
    }

    /// CSV with header `t,fx,fy,fz`.
    pub fn parse_csv(text: &str, source: &Path) -> Result<Self> {
        let cols = parse_table(text, source, &["t", "fx", "fy", "fz"])?;
        let forces = (0..cols[0].len())
            .map(|i| [cols[1][i], cols[2][i], cols[3][i]])
            .collect();
        Self::new(cols[0].clone(), forces)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }
}

/// Rotate each force into the camera frame, drop the optical-axis component
/// and scale by the focal lengths. The image `v` axis points up.
pub fn project_force(series: &ReferenceForceSeries, cam: &CameraModel) -> Result<Vec<[f64; 2]>> {
    cam.validate()?;
    Ok(series
        .forces
        .iter()
        .map(|f| {
            let cam_x: f64 = (0..3).map(|j| cam.r(0, j) * f[j]).sum();
            let cam_y: f64 = (0..3).map(|j| cam.r(1, j) * f[j]).sum();
            [cam.fx * cam_x, -cam.fy * cam_y]
        })
        .collect())
}

/// Linear interpolation onto `target_len` uniformly spaced samples; both
/// endpoints are kept exactly.
pub fn resample_linear(signal: &[f64], target_len: usize) -> Result<Vec<f64>> {
    if signal.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "resampling needs at least 2 samples, got {}",
            signal.len()
        )));
    }
    if target_len < 2 {
        return Err(Error::InvalidInput(format!(
            "resampling target length must be at least 2, got {target_len}"
        )));
    }
    if target_len == signal.len() {
        return Ok(signal.to_vec());
    }
    let last = signal.len() - 1;
    let step = last as f64 / (target_len - 1) as f64;
    Ok((0..target_len)
        .map(|i| {
            if i == target_len - 1 {
                return signal[last];
            }
            let pos = i as f64 * step;
            let j = (pos.floor() as usize).min(last - 1);
            let a = pos - j as f64;
            signal[j] * (1.0 - a) + signal[j + 1] * a
        })
        .collect())
}

/// Zero mean, unit population standard deviation; constant input maps to
/// zeros.
pub fn znorm(signal: &[f64]) -> Vec<f64> {
    let n = signal.len() as f64;
    if signal.is_empty() {
        return Vec::new();
    }
    let mean = signal.iter().sum::<f64>() / n;
    let std = (signal.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    if std <= STD_EPS {
        return vec![0.0; signal.len()];
    }
    signal.iter().map(|v| (v - mean) / std).collect()
}

/// Normalized correlation at lag `k`: `Σ p_t·r_{t+k}` over all `t`, with
/// `r` zero outside its range, divided by `sqrt(Σ p_t² · Σ r_{t+k}²)`.
pub fn correlation_at_lag(pred: &[f64], reference: &[f64], k: isize) -> f64 {
    let (mut num, mut rr) = (0.0, 0.0);
    for (t, &p) in pred.iter().enumerate() {
        let j = t as isize + k;
        if j < 0 || j as usize >= reference.len() {
            continue;
        }
        let r = reference[j as usize];
        num += p * r;
        rr += r * r;
    }
    let pp: f64 = pred.iter().map(|p| p * p).sum();
    let den = (pp * rr).sqrt();
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Strongest normalized correlation over `k ∈ [−max_lag, max_lag]`.
///
/// "Strongest" is largest `|R|`; the signed value is returned. Ties go to the
/// smaller `|k|`, then to the negative lag.
pub fn max_cross_correlation(pred: &[f64], reference: &[f64], max_lag: usize) -> Result<(f64, isize)> {
    if pred.len() != reference.len() {
        return Err(Error::DimensionMismatch(format!(
            "signals of length {} and {}; resample first",
            pred.len(),
            reference.len()
        )));
    }
    if max_lag >= pred.len() {
        return Err(Error::InvalidInput(format!(
            "max lag {max_lag} must be below the signal length {}",
            pred.len()
        )));
    }
    if pred.iter().all(|&p| p == 0.0) {
        return Err(Error::DegenerateSignal("prediction has zero energy"));
    }
    if reference.iter().all(|&r| r == 0.0) {
        return Err(Error::DegenerateSignal("reference has zero energy"));
    }
    let max_lag = max_lag as isize;
    let mut best = (correlation_at_lag(pred, reference, 0), 0isize);
    for m in 1..=max_lag {
        for k in [-m, m] {
            let r = correlation_at_lag(pred, reference, k);
            if r.abs() > best.0.abs() {
                best = (r, k);
            }
        }
    }
    Ok(best)
}

/// Agreement measures on the overlap of two z-normalized signals at a lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagMetrics {
    pub cosine: f64,
    pub mae: f64,
    pub rmse: f64,
}

/// Pairs `(p_t, r_{t+k})` of the z-normalized signals.
pub fn metrics_at_lag(pred: &[f64], reference: &[f64], k: isize) -> Result<LagMetrics> {
    let p = znorm(pred);
    let r = znorm(reference);
    let pairs: Vec<(f64, f64)> = p
        .iter()
        .enumerate()
        .filter_map(|(t, &a)| {
            let j = t as isize + k;
            (j >= 0 && (j as usize) < r.len()).then(|| (a, r[j as usize]))
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::InvalidInput(format!("lag {k} leaves no overlap")));
    }
    let n = pairs.len() as f64;
    let dot: f64 = pairs.iter().map(|(a, b)| a * b).sum();
    let na: f64 = pairs.iter().map(|(a, _)| a * a).sum::<f64>().sqrt();
    let nb: f64 = pairs.iter().map(|(_, b)| b * b).sum::<f64>().sqrt();
    let cosine = if na > 0.0 && nb > 0.0 { dot / (na * nb) } else { 0.0 };
    let mae = pairs.iter().map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    let rmse = (pairs.iter().map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n).sqrt();
    Ok(LagMetrics { cosine, mae, rmse })
}

/// Channel of a metrics row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Norm,
    U,
    V,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Norm => "Norm",
            Channel::U => "u",
            Channel::V => "v",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelMetrics {
    pub channel: Channel,
    pub cc: f64,
    pub lag: isize,
    pub cosine: f64,
    pub rmse: f64,
    pub mae: f64,
}

/// One row per channel: Norm, u, v.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<ChannelMetrics>,
}

impl MetricsReport {
    pub fn channel(&self, channel: Channel) -> Option<&ChannelMetrics> {
        self.rows.iter().find(|r| r.channel == channel)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("channel,cc,lag,cosine,rmse,mae\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.channel, r.cc, r.lag, r.cosine, r.rmse, r.mae
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Image-space reference force, `v` up.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageForce {
    pub fu: Vec<f64>,
    pub fv: Vec<f64>,
}

impl ImageForce {
    pub fn from_projected(samples: &[[f64; 2]]) -> Self {
        Self {
            fu: samples.iter().map(|s| s[0]).collect(),
            fv: samples.iter().map(|s| s[1]).collect(),
        }
    }

    pub fn norm(&self) -> Vec<f64> {
        self.fu.iter().zip(&self.fv).map(|(u, v)| u.hypot(*v)).collect()
    }
}

pub fn default_max_lag(len: usize) -> usize {
    len / 4
}

/// Resample the reference onto the prediction's length, z-normalize both and
/// score every channel at its own best lag. A constant `u` or `v` channel
/// gets NaN metrics; a constant norm is an error.
pub fn evaluate(
    pred: &ContactForceSignal,
    reference: &ImageForce,
    max_lag: Option<usize>,
) -> Result<MetricsReport> {
    let n = pred.len();
    let max_lag = max_lag.unwrap_or_else(|| default_max_lag(n));
    let ref_norm = reference.norm();
    let channels = [
        (Channel::Norm, &pred.norm, &ref_norm),
        (Channel::U, &pred.fu, &reference.fu),
        (Channel::V, &pred.fv, &reference.fv),
    ];
    let mut rows = Vec::with_capacity(3);
    for (channel, p, r) in channels {
        let r = resample_linear(r, n)?;
        let (pz, rz) = (znorm(p), znorm(&r));
        let (cc, lag) = match max_cross_correlation(&pz, &rz, max_lag) {
            Ok(best) => best,
            // A silent component (e.g. a purely horizontal push) has no
            // defined correlation; only the norm channel is mandatory.
            Err(Error::DegenerateSignal(why)) if channel != Channel::Norm => {
                warn!("channel {channel}: {why}; metrics set to NaN");
                rows.push(ChannelMetrics {
                    channel,
                    cc: f64::NAN,
                    lag: 0,
                    cosine: f64::NAN,
                    rmse: f64::NAN,
                    mae: f64::NAN,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let m = metrics_at_lag(&pz, &rz, lag)?;
        rows.push(ChannelMetrics {
            channel,
            cc,
            lag,
            cosine: m.cosine,
            rmse: m.rmse,
            mae: m.mae,
        });
    }
    Ok(MetricsReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_cases() {
        let series = ReferenceForceSeries::new(vec![0.0, 1.0], vec![[0.0, 0.0, 5.0], [1.0, 0.0, 0.0]]).unwrap();
        let p = project_force(&series, &CameraModel::identity()).unwrap();
        assert_eq!(p, vec![[0.0, 0.0], [1.0, 0.0]]);
        // 90° about the camera z axis sends world x to camera y.
        let rz = CameraModel::new(1.0, 2.0, 0.0, 0.0, [0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let p = project_force(&series, &rz).unwrap();
        assert!((p[1][0]).abs() < 1e-15 && (p[1][1] + 2.0).abs() < 1e-15);
        assert!(matches!(
            CameraModel::new(1.0, 1.0, 0.0, 0.0, [1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
            Err(Error::NonOrthonormalRotation(_))
        ));
        assert!(CameraModel::new(1.0, 1.0, 0.0, 0.0, [-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn resample_cases() {
        assert_eq!(resample_linear(&[0.0, 2.0], 3).unwrap(), vec![0.0, 1.0, 2.0]);
        let s = [1.0, 5.0, -2.0];
        assert_eq!(resample_linear(&s, 3).unwrap(), s.to_vec());
        assert!(resample_linear(&s, 1).is_err());
        let ramp: Vec<f64> = (0..100).map(|i| 0.5 + 2.0 * i as f64).collect();
        let out = resample_linear(&ramp, 37).unwrap();
        for (i, v) in out.iter().enumerate() {
            let x = i as f64 * 99.0 / 36.0;
            assert!((v - (0.5 + 2.0 * x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn znorm_cases() {
        assert_eq!(znorm(&[3.0; 4]), vec![0.0; 4]);
        assert_eq!(znorm(&[0.0, 2.0]), vec![-1.0, 1.0]);
    }

    #[test]
    fn self_and_negated_correlation() {
        let x: Vec<f64> = (0..50).map(|t| ((t as f64) * 0.3).sin() + 0.01 * t as f64).collect();
        let (r, k) = max_cross_correlation(&x, &x, 10).unwrap();
        assert!((r - 1.0).abs() < 1e-12 && k == 0);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let (r, k) = max_cross_correlation(&x, &neg, 10).unwrap();
        assert!((r + 1.0).abs() < 1e-12 && k == 0);
        assert!(matches!(
            max_cross_correlation(&x, &[0.0; 50], 3),
            Err(Error::DegenerateSignal(_))
        ));
    }

    #[test]
    fn metric_identities() {
        let x = [1.0, 3.0, -2.0, 0.5];
        let m = metrics_at_lag(&x, &x, 0).unwrap();
        assert!((m.cosine - 1.0).abs() < 1e-12 && m.mae == 0.0 && m.rmse == 0.0);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((metrics_at_lag(&x, &neg, 0).unwrap().cosine + 1.0).abs() < 1e-12);
        assert!(metrics_at_lag(&x, &x, 4).is_err());
    }

    #[test]
    fn camera_toml_round_trip() {
        let cam = CameraModel::identity();
        assert_eq!(CameraModel::from_toml_str(&cam.to_toml_string()).unwrap(), cam);
    }
}
