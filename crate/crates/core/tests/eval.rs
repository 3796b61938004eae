use std::f64::consts::PI;

use modalforce::contact::ContactForceSignal;
use modalforce::eval::{
    correlation_at_lag, evaluate, max_cross_correlation, metrics_at_lag, project_force,
    resample_linear, znorm, CameraModel, Channel, ImageForce, ReferenceForceSeries,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rot_z(theta: f64) -> [f64; 9] {
    let (s, c) = theta.sin_cos();
    [c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]
}

fn series(forces: Vec<[f64; 3]>) -> ReferenceForceSeries {
    let times = (0..forces.len()).map(|i| i as f64 * 0.01).collect();
    ReferenceForceSeries::new(times, forces).unwrap()
}

/// A noisy bump: no two lags look alike.
fn aperiodic(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let c = rng.random_range(0.3..0.7) * n as f64;
    (0..n)
        .map(|t| (-(t as f64 - c).powi(2) / 30.0).exp() + 0.05 * rng.random_range(-1.0..1.0))
        .collect()
}

#[test]
fn projection_cases() {
    let cam = CameraModel::identity();
    let p = project_force(&series(vec![[0.0, 0.0, 5.0], [1.0, 0.0, 0.0]]), &cam).unwrap();
    assert_eq!(p[0], [0.0, 0.0]);
    assert_eq!(p[1], [1.0, 0.0]);

    // Rotating 90° about the optical axis sends camera-frame x to image y;
    // the image v axis points up, hence the sign.
    let cam = CameraModel::new(2.0, 3.0, 0.0, 0.0, rot_z(PI / 2.0)).unwrap();
    let p = project_force(&series(vec![[1.0, 0.0, 0.0]]), &cam).unwrap();
    let by_hand = [0.0, -3.0];
    assert!((p[0][0] - by_hand[0]).abs() < 1e-12 && (p[0][1] - by_hand[1]).abs() < 1e-12, "{p:?}");
}

#[test]
fn resample_cases() {
    assert_eq!(resample_linear(&[1.0, 4.0, 2.0], 3).unwrap(), vec![1.0, 4.0, 2.0]);
    assert_eq!(resample_linear(&[0.0, 2.0], 3).unwrap(), vec![0.0, 1.0, 2.0]);
    let ramp: Vec<f64> = (0..100).map(|i| 0.5 * i as f64 - 3.0).collect();
    let r = resample_linear(&ramp, 37).unwrap();
    for (i, v) in r.iter().enumerate() {
        let line = -3.0 + 0.5 * 99.0 * i as f64 / 36.0;
        assert!((v - line).abs() <= 1e-12);
    }
}

#[test]
fn znorm_cases() {
    assert_eq!(znorm(&[3.0; 5]), vec![0.0; 5]);
    assert_eq!(znorm(&[0.0, 2.0]), vec![-1.0, 1.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let x: Vec<f64> = (0..40).map(|_| rng.random_range(-9.0..9.0)).collect();
        let once = znorm(&x);
        for (a, b) in once.iter().zip(znorm(&once)) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn self_and_negated_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = aperiodic(80, &mut rng);
    let (r, k) = max_cross_correlation(&x, &x, 20).unwrap();
    assert!((r - 1.0).abs() < 1e-12);
    assert_eq!(k, 0);
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    let (r, _) = max_cross_correlation(&x, &neg, 20).unwrap();
    assert!((r + 1.0).abs() < 1e-12);
}

#[test]
fn shifted_sinusoid_lag_matches_brute_force() {
    let n = 120;
    let x = znorm(&(0..n).map(|t| (2.0 * PI * t as f64 / 37.0).sin()).collect::<Vec<_>>());
    let shifted: Vec<f64> = (0..n).map(|t| if t >= 5 { x[t - 5] } else { 0.0 }).collect();
    let max_lag = 15;
    let (_, k) = max_cross_correlation(&x, &shifted, max_lag).unwrap();

    // Oracle: every lag evaluated straight from the definition.
    let brute = |k: isize| {
        let (mut num, mut rr) = (0.0, 0.0);
        for t in 0..n as isize {
            let j = t + k;
            if (0..n as isize).contains(&j) {
                num += x[t as usize] * shifted[j as usize];
                rr += shifted[j as usize].powi(2);
            }
        }
        num / (x.iter().map(|v| v * v).sum::<f64>() * rr).sqrt()
    };
    let best = (-(max_lag as isize)..=max_lag as isize)
        .max_by(|&a, &b| brute(a).abs().total_cmp(&brute(b).abs()))
        .unwrap();
    assert_eq!(best, 5);
    assert_eq!(k, 5);
    for lag in -5..=5 {
        assert!((correlation_at_lag(&x, &shifted, lag) - brute(lag)).abs() < 1e-12);
    }
}

#[test]
fn metric_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = aperiodic(50, &mut rng);
    let m = metrics_at_lag(&x, &x, 0).unwrap();
    assert!((m.cosine - 1.0).abs() < 1e-12);
    assert!(m.mae < 1e-12 && m.rmse < 1e-12);
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    assert!((metrics_at_lag(&x, &neg, 0).unwrap().cosine + 1.0).abs() < 1e-12);

    for _ in 0..20 {
        let a: Vec<f64> = (0..30).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..30).map(|_| rng.random_range(-2.0..2.0)).collect();
        let k = rng.random_range(-4i64..=4) as isize;
        let m = metrics_at_lag(&a, &b, k).unwrap();
        let (za, zb) = (znorm(&a), znorm(&b));
        let sq: Vec<f64> = (0..30isize)
            .filter(|t| (0..30).contains(&(t + k)))
            .map(|t| (za[t as usize] - zb[(t + k) as usize]).powi(2))
            .collect();
        let mse = sq.iter().sum::<f64>() / sq.len() as f64;
        assert!((m.rmse * m.rmse - mse).abs() <= 1e-12);
    }
}

#[test]
fn shorter_reference_is_resampled() {
    let n = 90;
    let fu: Vec<f64> = (0..n).map(|t| (t as f64 / 9.0).sin() + 1.5).collect();
    let pred = ContactForceSignal::new(fu.clone(), vec![0.0; n], 30.0).unwrap();
    let short: Vec<f64> = resample_linear(&fu, 40).unwrap();
    let reference = ImageForce { fu: short, fv: vec![0.0; 40] };
    let report = evaluate(&pred, &reference, None).unwrap();
    let norm = report.channel(Channel::Norm).unwrap();
    assert!(norm.cc > 0.99);
    assert_eq!(norm.lag, 0);
    // The silent v channel is reported, not fatal.
    assert!(report.channel(Channel::V).unwrap().cc.is_nan());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn correlation_is_scale_invariant(seed in any::<u64>(), alpha in 1e-3f64..1e3, k in -6isize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ax: Vec<f64> = x.iter().map(|v| alpha * v).collect();
        let ay: Vec<f64> = y.iter().map(|v| alpha * v).collect();
        prop_assert!((correlation_at_lag(&ax, &y, k) - correlation_at_lag(&x, &y, k)).abs() <= 1e-12);
        prop_assert!((correlation_at_lag(&x, &ay, k) - correlation_at_lag(&x, &y, k)).abs() <= 1e-12);
        let (r1, k1) = max_cross_correlation(&ax, &y, 8).unwrap();
        let (r0, k0) = max_cross_correlation(&x, &y, 8).unwrap();
        prop_assert!((r1 - r0).abs() <= 1e-12);
        prop_assert_eq!(k1, k0);
    }

    #[test]
    fn argmax_lag_recovers_shift(seed in any::<u64>(), k in -10isize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 100;
        let x = aperiodic(n, &mut rng);
        // Reference delayed by k: r_{t+k} = x_t.
        let r: Vec<f64> = (0..n as isize)
            .map(|t| {
                let s = t - k;
                if (0..n as isize).contains(&s) { x[s as usize] } else { 0.0 }
            })
            .collect();
        let (_, found) = max_cross_correlation(&x, &r, 12).unwrap();
        prop_assert_eq!(found, k);
    }

    #[test]
    fn rotation_about_optical_axis_keeps_peak_time(seed in any::<u64>(), theta in 0.0f64..(2.0 * PI)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let forces: Vec<[f64; 3]> = (0..30)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let s = series(forces);
        let peak = |cam: &CameraModel| {
            let p = project_force(&s, cam).unwrap();
            (0..p.len()).max_by(|&a, &b| p[a][0].hypot(p[a][1]).total_cmp(&p[b][0].hypot(p[b][1]))).unwrap()
        };
        let base = CameraModel::new(1.5, 1.5, 0.0, 0.0, rot_z(0.0)).unwrap();
        let turned = CameraModel::new(1.5, 1.5, 0.0, 0.0, rot_z(theta)).unwrap();
        prop_assert_eq!(peak(&base), peak(&turned));
    }

    #[test]
    fn metrics_are_finite(seed in any::<u64>(), n in 8usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fu: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let fv: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let pred = ContactForceSignal::new(fu, fv, 30.0).unwrap();
        let rf = ImageForce {
            fu: (0..n).map(|_| rng.random_range(-5.0..5.0)).collect(),
            fv: (0..n).map(|_| rng.random_range(-5.0..5.0)).collect(),
        };
        let report = evaluate(&pred, &rf, None).unwrap();
        for row in &report.rows {
            prop_assert!(row.cc.is_finite() && row.cosine.is_finite() && row.rmse.is_finite() && row.mae.is_finite());
        }
    }
}
