//! Wave packets and almost-period scans against independent computations.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;

use quasikdv::almostper::{
    almost_period_scan, concentration_diagnostic, limit_periodic_audit, packet_inner_product,
    stepanov_norm, wave_packet_evolved, wave_packet_initial, AlmostPeriodQuery, WavePacketSpec,
};
use quasikdv::quad::simpson;
use quasikdv::waves::square_wave;
use quasikdv::Error;

/// Airy evolution `e^{itξ³}` of periodic samples on `[−L, L)` by FFT.
fn airy_fft(samples: &[Complex64], half_width: f64, t: f64) -> Vec<Complex64> {
    let n = samples.len();
    let mut planner = FftPlanner::new();
    let mut buf = samples.to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let m = if k <= n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        };
        let xi = PI * m / half_width;
        *v *= Complex64::from_polar(1.0 / n as f64, t * xi * xi * xi);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf
}

#[test]
fn evolved_packet_matches_spectral_evolution() {
    let (half_width, n) = (40.0, 8192);
    let dx = 2.0 * half_width / n as f64;
    for (eta, t0) in [(2.0, 0.05), (-3.0, 0.02), (0.0, 0.1)] {
        let spec = WavePacketSpec {
            eta,
            t0,
            ..Default::default()
        };
        let grid: Vec<f64> = (0..n).map(|j| -half_width + j as f64 * dx).collect();
        let initial: Vec<Complex64> = grid
            .iter()
            .map(|&x| wave_packet_initial(&spec, x))
            .collect();
        let evolved = airy_fft(&initial, half_width, t0);
        let mut err: f64 = 0.0;
        for (x, want) in grid.iter().zip(&evolved) {
            if x.abs() <= 15.0 {
                err = err.max((wave_packet_evolved(&spec, *x).unwrap() - want).norm());
            }
        }
        assert!(err < 1e-8, "eta = {eta}, t0 = {t0}: {err:e}");
    }
}

#[test]
fn evolution_preserves_the_l2_norm() {
    // ‖φ(t₀)‖² = ∫ e^{−ξ²} dξ = √π
    for eta in [0.0, 8.0, -64.0] {
        let spec = WavePacketSpec {
            eta,
            t0: 1e-3,
            ..Default::default()
        };
        let h = 1e-3;
        let f: Vec<f64> = (0..=60_000)
            .map(|j| {
                wave_packet_evolved(&spec, -30.0 + j as f64 * h)
                    .unwrap()
                    .norm_sqr()
            })
            .collect();
        let g: Vec<f64> = (0..=60_000)
            .map(|j| wave_packet_initial(&spec, -30.0 + j as f64 * h).norm_sqr())
            .collect();
        assert!(
            (simpson(&f, h) - PI.sqrt()).abs() < 1e-8,
            "evolved, eta = {eta}"
        );
        assert!(
            (simpson(&g, h) - PI.sqrt()).abs() < 1e-8,
            "initial, eta = {eta}"
        );
    }
}

#[test]
fn inner_product_is_hermitian_and_positive() {
    let spec = WavePacketSpec::default();
    let ab = packet_inner_product(&spec, 4.0, 0.5, -2.0, -1.0).unwrap();
    let ba = packet_inner_product(&spec, -2.0, -1.0, 4.0, 0.5).unwrap();
    assert!((ab - ba.conj()).norm() < 1e-13);
    // e^{iηx} cancels on the diagonal: ∫ e^{−x²} |P|² is η-independent
    let d0 = packet_inner_product(&spec, 0.0, 0.0, 0.0, 0.0).unwrap();
    let d1 = packet_inner_product(&spec, 1024.0, 0.0, 1024.0, 0.0).unwrap();
    assert!(d0.im.abs() < 1e-14 && d0.re > 0.5);
    assert!((d0 - d1).norm() < 1e-9);
    // t₀ → 0: P(x) = e^{−x²/2}, so ∫e^{−2x²} = √(π/2)
    assert!((d0.re - (PI / 2.0).sqrt()).abs() < 1e-5, "{d0}");
}

#[test]
fn packets_reject_unresolvable_frequencies() {
    let spec = WavePacketSpec::default();
    assert!(matches!(
        packet_inner_product(&spec, 2f64.powi(25), 0.0, 0.0, 0.0),
        Err(Error::UnderResolved { .. })
    ));
    let bad = WavePacketSpec { t0: 0.0, ..spec };
    assert!(matches!(
        concentration_diagnostic(&bad),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn layers_are_periodic_and_real() {
    let spec = WavePacketSpec::default();
    for n in 1..=4 {
        let audit = limit_periodic_audit(&spec, n).unwrap();
        assert!(audit.period_defect < 1e-10, "{audit:?}");
        assert!(audit.max_imaginary < 1e-12, "{audit:?}");
        // two packets of height ≤ 1 at t₀2ⁿ ≪ 1
        assert!(
            audit.sup_norm <= 2.0 + 1e-9 && audit.sup_norm > 1.5,
            "{audit:?}"
        );
    }
}

#[test]
fn scan_agrees_with_the_closed_form_for_a_sine() {
    // sup_x |sin(x+ℓ) − sin x| = 2|sin(ℓ/2)| once the window exceeds a period
    let eps = 0.1;
    let query = AlmostPeriodQuery::symmetric(eps, (0.0, 20.0), 0.005, 4000, 20_001);
    let report = almost_period_scan(f64::sin, &query).unwrap();
    for l in &query.shift_grid {
        let exact = 2.0 * (0.5 * l).sin().abs();
        if (exact - eps).abs() < 1e-6 {
            continue;
        }
        let accepted = report.accepted.iter().any(|a| a == l);
        assert_eq!(accepted, exact < eps, "shift {l}: exact {exact}");
    }
    let mirrored: Vec<f64> = report.accepted.iter().rev().map(|l| -l).collect();
    assert_eq!(report.accepted, mirrored);
    // accepted clusters sit at 0, ±2π; the largest gap is a period minus one cluster
    let gap = report.inclusion_length.unwrap();
    assert!(gap < TAU && report.relatively_dense(TAU), "{gap}");
}

#[test]
fn scan_of_a_constant_accepts_everything() {
    let query = AlmostPeriodQuery::symmetric(1e-9, (0.0, 5.0), 0.37, 50, 10_000);
    let report = almost_period_scan(|_| 3.0, &query).unwrap();
    assert_eq!(report.accepted.len(), 101);
    assert!((report.inclusion_length.unwrap() - 0.37).abs() < 1e-12);
    let few = AlmostPeriodQuery {
        samples: 99,
        ..query
    };
    assert!(almost_period_scan(|_| 3.0, &few).is_err());
}

#[test]
fn stepanov_norm_bounds() {
    let shifts: Vec<f64> = (0..40).map(|k| k as f64 * 0.25).collect();
    for p in [1.0, 2.0, 4.0] {
        let c = stepanov_norm(|_| -1.5, p, &shifts, 401).unwrap();
        assert!((c - 1.5 * 2f64.powf(1.0 / p)).abs() < 1e-12, "p = {p}: {c}");
        let sq = stepanov_norm(
            |x| square_wave(x) + square_wave(2f64.sqrt() * x),
            p,
            &shifts,
            4001,
        )
        .unwrap();
        // |f| ≤ 2 everywhere, and equals 2 on a set of positive measure
        assert!(sq <= 2.0 * 2f64.powf(1.0 / p) + 1e-9, "p = {p}: {sq}");
        assert!(sq > 2f64.powf(1.0 / p), "p = {p}: {sq}");
    }
}
