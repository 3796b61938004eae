use std::f64::consts::PI;

use modalforce::flow::MotionTexture;
use modalforce::spectrum::{
    assemble_modal_matrix, inverse_dft, mode_shapes, power_spectrum, select_band, select_top_band,
    temporal_dft,
};
use modalforce::{Error, Plane, RegionOfInterest, VectorField};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct O(T²) transform, `X_k = Σ x_t e^{-2πikt/T}`.
fn naive_dft(x: &[f64]) -> Vec<Complex64> {
    let t_len = x.len() as f64;
    (0..x.len())
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| Complex64::from_polar(v, -2.0 * PI * k as f64 * t as f64 / t_len))
                .sum()
        })
        .collect()
}

/// Motion whose pixel (x, y) follows `series(x, y, t)` in `u` and zero in `v`;
/// `series` must vanish at t = 0.
fn motion_from(w: usize, h: usize, t_len: usize, fps: f64, series: impl Fn(usize, usize, usize) -> f64) -> MotionTexture {
    let fields = (0..t_len)
        .map(|t| VectorField::from_fn(w, h, |x, y| [series(x, y, t), 0.0]))
        .collect();
    MotionTexture::new(fields, fps, 0).unwrap()
}

#[test]
fn bin_aligned_sinusoid_concentrates_in_its_bin() {
    let (t_len, fps) = (128, 32.0);
    let motion = motion_from(1, 1, t_len, fps, |_, _, t| (2.0 * PI * 2.0 * t as f64 / fps).sin());
    let spec = mode_shapes(&motion).unwrap();
    assert_eq!(spec.n_bins(), 64);

    let series: Vec<f64> = (0..t_len).map(|t| motion.field(t).get(0, 0)[0]).collect();
    let oracle = naive_dft(&series);
    let energy: Vec<f64> = (0..spec.n_bins()).map(|b| spec.coefficient(b, 0, 0)[0].norm_sqr()).collect();
    for b in 0..spec.n_bins() {
        let c = spec.coefficient(b, 0, 0)[0];
        assert!((c - oracle[b]).norm() <= 1e-9 * t_len as f64, "bin {b}");
    }
    let total: f64 = energy[1..].iter().sum();
    assert!(energy[8] / total >= 1.0 - 1e-9, "share {}", energy[8] / total);
    for (b, e) in energy.iter().enumerate() {
        if b != 8 {
            assert!(*e <= 1e-9 * energy[8], "bin {b} holds {e}");
        }
    }
    let power = power_spectrum(&spec, &Plane::filled(1, 1, 1.0)).unwrap();
    assert_eq!(power.peak_bin(), 8);
}

#[test]
fn parseval_holds_on_random_signals() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..1000 {
        let n = rng.random_range(2..200);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let spectrum = temporal_dft(&x);
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = spectrum.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
        assert!((time - freq).abs() <= 1e-9 * time.max(f64::MIN_POSITIVE), "trial {trial}: {time} vs {freq}");
    }
}

#[test]
fn inverse_transform_reproduces_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let n = rng.random_range(1..150);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let back = inverse_dft(&temporal_dft(&x));
        let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let err = x.iter().zip(&back).map(|(a, b)| (Complex64::new(*a, 0.0) - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 1e-9 * scale);
    }
}

#[test]
fn two_pixel_mean_amplitude() {
    let (t_len, fps, a) = (64, 16.0, 0.7);
    // Each pixel moves diagonally, so both directions carry its amplitude.
    let fields = (0..t_len)
        .map(|t| {
            VectorField::from_fn(2, 1, |x, _| {
                let amp = if x == 0 { a } else { 3.0 * a };
                let s = amp * (2.0 * PI * 3.0 * t as f64 / t_len as f64).sin();
                [s, s]
            })
        })
        .collect();
    let motion = MotionTexture::new(fields, fps, 0).unwrap();
    let spec = mode_shapes(&motion).unwrap();
    let power = power_spectrum(&spec, &Plane::filled(2, 1, 1.0)).unwrap();
    let expected = 2.0 * a * (t_len as f64 / 2.0);
    assert!((power.amplitudes[3] - expected).abs() < 1e-9, "{} vs {expected}", power.amplitudes[3]);
}

#[test]
fn band_of_twenty_covers_low_hertz_range() {
    // 30 fps, 200 frames: bins are 0.15 Hz apart.
    let motion = motion_from(1, 1, 200, 30.0, |_, _, t| (t as f64 * 0.37).sin());
    let spec = mode_shapes(&motion).unwrap();
    let band = select_band(&spec, 20, true).unwrap();
    assert_eq!(band.bins, (1..=20).collect::<Vec<_>>());
    let lo = band.frequencies[0];
    let hi = band.frequencies[19];
    assert!((0.1..=0.25).contains(&lo), "{lo}");
    assert!((hi - 3.0).abs() < 1e-12, "{hi}");
}

#[test]
fn band_bounds() {
    let motion = motion_from(1, 1, 30, 30.0, |_, _, t| t as f64);
    let spec = mode_shapes(&motion).unwrap();
    assert_eq!(select_band(&spec, 1, true).unwrap().bins, vec![1]);
    assert!(matches!(select_band(&spec, 15, true), Err(Error::BandTooWide { .. })));
    assert!(select_band(&spec, 14, true).is_ok());
}

#[test]
fn modal_matrix_shape_and_unit_columns() {
    let (w, h) = (5, 4);
    let motion = motion_from(w, h, 32, 30.0, |x, y, t| {
        let t = t as f64;
        ((x + 1) as f64 * 0.3 * t).sin() + ((y + 2) as f64 * 0.11 * t).cos() - 1.0
    });
    let spec = mode_shapes(&motion).unwrap();
    let band = select_band(&spec, 6, true).unwrap();
    let roi = RegionOfInterest::new(1, 1, 3, 2).unwrap();
    let modal = assemble_modal_matrix(&spec, &band, &roi).unwrap();
    assert_eq!(modal.columns().shape(), (2 * 6, 6));
    for c in modal.columns().column_iter() {
        assert!((c.norm() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn orthonormal_columns_give_idempotent_projector() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let raw = DMatrix::from_fn(16, 4, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let q = raw.qr().q();
    let roi = RegionOfInterest::new(0, 0, 4, 2).unwrap();
    let modal = modalforce::spectrum::ModalMatrix::new(q, vec![0.5, 1.0, 1.5, 2.0], roi, 30.0).unwrap();
    let s = modal.columns();
    let p = s * s.adjoint();
    let p2 = &p * &p;
    assert!((p2 - &p).norm() <= 1e-9 * p.norm());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Relabelling pixels must not change which bins are chosen.
    #[test]
    fn band_selection_ignores_pixel_order(
        seed in any::<u64>(),
        k in 1usize..8,
        skip_dc in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h, t_len) = (4, 3, 24);
        let amps: Vec<[f64; 3]> = (0..w * h).map(|_| [rng.random(), rng.random_range(0.1..2.0), rng.random()]).collect();
        let mut perm: Vec<usize> = (0..w * h).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let build = |order: &[usize]| {
            motion_from(w, h, t_len, 30.0, |x, y, t| {
                let a = amps[order[y * w + x]];
                a[0] * ((a[1] * t as f64 + a[2]).sin() - a[2].sin())
            })
        };
        let identity: Vec<usize> = (0..w * h).collect();
        let s1 = mode_shapes(&build(&identity)).unwrap();
        let s2 = mode_shapes(&build(&perm)).unwrap();
        let mask = Plane::filled(w, h, 1.0);
        let p1 = power_spectrum(&s1, &mask).unwrap();
        let p2 = power_spectrum(&s2, &mask).unwrap();
        prop_assert_eq!(select_band(&s1, k, skip_dc).unwrap().bins, select_band(&s2, k, skip_dc).unwrap().bins);
        let t1 = select_top_band(&s1, &p1, k, skip_dc).unwrap();
        let t2 = select_top_band(&s2, &p2, k, skip_dc).unwrap();
        prop_assert_eq!(&t1.bins, &t2.bins);
        prop_assert_eq!(select_top_band(&s1, &p1, k, skip_dc).unwrap().bins, t1.bins);
    }

    #[test]
    fn parseval_per_pixel(x in prop::collection::vec(-10.0f64..10.0, 1..64)) {
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = temporal_dft(&x).iter().map(|c| c.norm_sqr()).sum::<f64>() / x.len() as f64;
        prop_assert!((time - freq).abs() <= 1e-9 * time.max(1e-300));
    }
}
