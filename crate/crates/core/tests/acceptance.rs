//! Acceptance suite: one PASS/FAIL line per criterion, then a nonzero exit
//! if any criterion failed.
//!
//! Run with `cargo test --test acceptance` (optimized test profile).

use std::f64::consts::{PI, SQRT_2, TAU};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quasikdv::almostper::{
    almost_period_scan, concentration_diagnostic, packet_inner_product, write_concentration_csv,
    AlmostPeriodQuery, WavePacketSpec, DIAGONAL_THRESHOLD,
};
use quasikdv::exec;
use quasikdv::greens::{
    convergence_orders, greens_field, verify_dynamic_identity, verify_gronwall_identity,
    verify_qdiff_identity, verify_static_identity, DynamicIdentity, ForcedPair, SampledPotential,
    StaticIdentity, TestFunction, Weight,
};
use quasikdv::kdv::{solve, write_field_csv, SolverConfig};
use quasikdv::smoothing::smoothing_difference;
use quasikdv::waves::{
    airy_propagate, evaluate_field, jump_profile, square_wave_both, square_wave_coefficients,
    talbot_reconstruct, write_profile_csv, SpatialSampling,
};
use quasikdv::{CoefficientField, FrequencyBasis, FrequencyIndex};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 1

fn random_potential(rng: &mut ChaCha8Rng, h: f64) -> SampledPotential {
    let bumps: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-6.0..6.0),
                rng.gen_range(0.2..2.0),
            )
        })
        .collect();
    let waves: Vec<(f64, f64, f64)> = (0..2)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.2..3.0),
                rng.gen_range(0.0..TAU),
            )
        })
        .collect();
    let raw = move |x: f64| {
        let b: f64 = bumps
            .iter()
            .map(|&(a, c, w)| a * (-(x - c) * (x - c) / (w * w)).exp())
            .sum();
        let w: f64 = waves.iter().map(|&(a, k, p)| a * (k * x + p).cos()).sum();
        b + 0.5 * w
    };
    let probe = SampledPotential::from_fn(8.0, h, &raw).unwrap();
    let target = 0.25 * rng.gen_range(0.5..1.0);
    let scale = target / probe.sup_norm();
    SampledPotential::from_fn(8.0, h, |x| scale * raw(x)).unwrap()
}

fn greens_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut worst: f64 = f64::INFINITY;
    for _ in 0..20 {
        let pot = random_potential(&mut rng, 1.0 / 64.0);
        if pot.sup_norm() > 0.25 {
            return Err(format!("generator produced sup {}", pot.sup_norm()));
        }
        let field = greens_field(&pot, 1.0, 1e-8).map_err(|e| e.to_string())?;
        worst = worst.min(field.audit.min_slack());
    }
    check(
        worst >= 0.0,
        format!("min slack over 20 potentials {worst:.3e}"),
    )
}

// ---------------------------------------------------------------- 2

fn static_identities() -> Outcome {
    let potentials: [(&str, fn(f64) -> f64); 5] = [
        ("gauss", |x| 0.2 * (-x * x).exp()),
        ("sech2", |x| -0.15 / x.cosh().powi(2)),
        ("modulated", |x| 0.2 * x.cos() * (-x * x / 2.0).exp()),
        ("offset", |x| -0.2 * (-(x - 1.0) * (x - 1.0)).exp()),
        ("odd", |x| 0.15 * (2.0 * x).sin() * (-x * x / 2.0).exp()),
    ];
    let kinds = [
        StaticIdentity::QEquation,
        StaticIdentity::GSecond,
        StaticIdentity::GThird,
        StaticIdentity::GIdentity,
    ];
    let test_fn = TestFunction::Gaussian {
        a: 1.0,
        center: 0.3,
    };
    let mut worst_residual: f64 = 0.0;
    let mut worst_order = f64::INFINITY;
    for (_, q) in potentials {
        for kind in kinds {
            let residuals: Vec<f64> = [16.0, 32.0, 64.0]
                .iter()
                .map(|&m| {
                    let pot = SampledPotential::from_fn(8.0, 1.0 / m, q).unwrap();
                    verify_static_identity(kind, &pot, 1.0, Some(test_fn), 1e-12).unwrap()
                })
                .collect();
            worst_residual = worst_residual.max(residuals[2]);
            worst_order = worst_order.min(*convergence_orders(&residuals).last().unwrap());
        }
    }
    check(
        worst_residual < 1e-4 && worst_order >= 3.5,
        format!("max residual at h=1/64 {worst_residual:.3e}, min order {worst_order:.2}"),
    )
}

// ---------------------------------------------------------------- 3

fn bump(t: f64, x: f64) -> f64 {
    0.3 * (-x * x).exp() * t.cos()
}

fn static_bump(_t: f64, x: f64) -> f64 {
    0.3 * (-x * x).exp()
}

fn slices() -> Vec<f64> {
    (0..=64).map(|k| k as f64 / 64.0).collect()
}

fn dynamic_identities() -> Outcome {
    let kappa = 1.2;
    let mut dyn_res = Vec::new();
    let mut gron_res = Vec::new();
    let mut gron_signed = Vec::new();
    let mut lhs = 0.0;
    for nx in [128.0, 256.0, 512.0] {
        let h = 16.0 / nx;
        let p1 = ForcedPair::manufacture(slices(), 8.0, h, bump).map_err(|e| e.to_string())?;
        let p2 =
            ForcedPair::manufacture(slices(), 8.0, h, static_bump).map_err(|e| e.to_string())?;
        if nx > 128.0 {
            let mut r: f64 = 0.0;
            for kind in [DynamicIdentity::GDt, DynamicIdentity::OneOverGDt] {
                r = r.max(
                    verify_dynamic_identity(&p1, kappa, 0.5, kind, 1e-12)
                        .map_err(|e| e.to_string())?,
                );
            }
            dyn_res.push(r);
        }
        let g = verify_gronwall_identity(&p1, &p2, kappa, Weight::Sech { r: 1.0 }, 1.0, 1e-12)
            .map_err(|e| e.to_string())?;
        gron_res.push(g.residual);
        gron_signed.push(g.lhs - g.rhs);
        lhs = g.lhs;
    }
    let dyn_order = convergence_orders(&dyn_res)[0];
    // the time quadrature leaves an h-independent part in the residual;
    // differences of the signed residual cancel it
    let d = &gron_signed;
    let gron_order = ((d[0] - d[1]) / (d[1] - d[2])).abs().log2();
    check(
        dyn_res[1] < 1e-3 && gron_res[2] < 1e-3 && dyn_order >= 3.0 && gron_order >= 3.0,
        format!(
            "g_t residual {:.3e} (order {dyn_order:.2}), Gronwall residual {:.3e} of {lhs:.3e} (h-order {gron_order:.2})",
            dyn_res[1], gron_res[2]
        ),
    )
}

// ---------------------------------------------------------------- 4

fn qdiff_identity() -> Outcome {
    let psi = Weight::Sech { r: 1.0 };
    let kappa = 1.0;
    let mut constant: f64 = 0.0;
    let zero = SampledPotential::constant(0.0, 24.0, 1.0 / 32.0).map_err(|e| e.to_string())?;
    for c in [0.1, 0.2, -0.2] {
        let pot = SampledPotential::constant(c, 24.0, 1.0 / 32.0).map_err(|e| e.to_string())?;
        let r = verify_qdiff_identity(&zero, &pot, kappa, psi, 1e-12).map_err(|e| e.to_string())?;
        // ∫ −c·sech x dx = −cπ
        if (r.lhs + c * PI).abs() > 1e-9 {
            return Err(format!("constant pair c = {c}: lhs {} is not -c*pi", r.lhs));
        }
        constant = constant.max(r.residual);
    }
    let mut gaussian: f64 = 0.0;
    let pairs: [(fn(f64) -> f64, fn(f64) -> f64); 2] = [
        (
            |x| 0.2 * (-x * x).exp(),
            |x| -0.15 * (-2.0 * (x - 0.5) * (x - 0.5)).exp(),
        ),
        (
            |x| 0.1 * (-x * x / 2.0).exp(),
            |x| 0.2 * (-(x + 1.0) * (x + 1.0)).exp(),
        ),
    ];
    for (a, b) in pairs {
        let p1 = SampledPotential::from_fn(8.0, 1.0 / 32.0, a).map_err(|e| e.to_string())?;
        let p2 = SampledPotential::from_fn(8.0, 1.0 / 32.0, b).map_err(|e| e.to_string())?;
        let r = verify_qdiff_identity(&p1, &p2, kappa, psi, 1e-12).map_err(|e| e.to_string())?;
        gaussian = gaussian.max(r.residual);
    }
    check(
        constant < 1e-5 && gaussian < 1e-4,
        format!("constant pairs {constant:.3e}, Gaussian pairs {gaussian:.3e}"),
    )
}

// ---------------------------------------------------------------- 5

fn talbot() -> Outcome {
    let n = 4001;
    let sampling = SpatialSampling::uniform(-PI, PI, 4096).unwrap();
    let mut worst: f64 = 0.0;
    for (p, q) in [(1, 1), (1, 2), (1, 3), (2, 5)] {
        let rec = talbot_reconstruct(p, q, 1.0, n, &sampling).map_err(|e| e.to_string())?;
        worst = worst.max(rec.max_deviation_outside_jumps(1.0, n, &sampling));
    }
    let basis = FrequencyBasis::new(1.0, SQRT_2, 2.0, None).unwrap();
    let field = airy_propagate(
        &square_wave_coefficients(1, n).unwrap(),
        TAU / SQRT_2,
        &basis,
    );
    let increment = |m: usize| {
        let s = SpatialSampling::uniform(-PI, PI, m).unwrap();
        let v = evaluate_field(&field, &basis, &s).unwrap();
        jump_profile(&v, &s).unwrap().max_increment
    };
    let (coarse, fine) = (increment(2048), increment(16384));
    let ratio = coarse / fine;
    check(
        worst < 5e-3 && ratio >= 3.0,
        format!("rational max deviation {worst:.3e}; irrational increment {coarse:.3e} -> {fine:.3e} ({ratio:.2}x)"),
    )
}

// ---------------------------------------------------------------- 6

fn smoothing_l1(data: &CoefficientField, n: i64) -> quasikdv::Result<(f64, f64)> {
    let basis = FrequencyBasis::default();
    let cfg = SolverConfig {
        dt: 1e-4,
        t_final: 0.01,
        n,
        ..Default::default()
    };
    let traj = solve(data, &cfg, &basis)?;
    let report = smoothing_difference(&traj, &basis)?.with_bookkeeping(0.9, 8.0);
    Ok((
        *report.l1_difference.last().unwrap(),
        *report.l1_linear.last().unwrap(),
    ))
}

fn ten_mode_field() -> CoefficientField {
    let modes = [
        (1, 0),
        (0, 1),
        (1, 1),
        (1, -1),
        (2, 0),
        (0, 2),
        (2, 1),
        (1, 2),
        (2, -1),
        (-1, 2),
    ];
    let half = modes.iter().enumerate().map(|(k, &(a, b))| {
        (
            FrequencyIndex::new(a, b),
            Complex64::from_polar(0.4 / (1.0 + k as f64), 0.7 * k as f64),
        )
    });
    CoefficientField::from_half(4, half).unwrap()
}

fn kdv_solver() -> Outcome {
    let data = square_wave_both(32).map_err(|e| e.to_string())?;
    let (a, _) = smoothing_l1(&data.scale(0.1), 32).map_err(|e| e.to_string())?;
    let (b, _) = smoothing_l1(&data.scale(0.05), 32).map_err(|e| e.to_string())?;
    let ratio = a / b;
    let basis = FrequencyBasis::default();
    let init = ten_mode_field();
    let run = |dt: f64| {
        let cfg = SolverConfig {
            dt,
            t_final: 0.04,
            n: 4,
            ..Default::default()
        };
        solve(&init, &cfg, &basis).map(|t| t.final_state().clone())
    };
    let (u1, u2, u4) = (
        run(2e-3).map_err(|e| e.to_string())?,
        run(1e-3).map_err(|e| e.to_string())?,
        run(5e-4).map_err(|e| e.to_string())?,
    );
    let order = (u1.sub(&u2).magnitude() / u2.sub(&u4).magnitude()).log2();
    check(
        (ratio - 4.0).abs() <= 0.5 && order >= 3.5,
        format!("epsilon ratio {ratio:.3}; RK4 Richardson order {order:.2}"),
    )
}

// ---------------------------------------------------------------- 7

fn smoothing_trend() -> Outcome {
    let (d32, l32) = smoothing_l1(&square_wave_both(32).unwrap(), 32).map_err(|e| e.to_string())?;
    let (d64, l64) = smoothing_l1(&square_wave_both(64).unwrap(), 64).map_err(|e| e.to_string())?;
    let change = (d64 - d32).abs() / d32;
    // two axes, ±k, |q̂_k| = 2/(πk) for odd k
    let predicted: f64 = (33..=64)
        .step_by(2)
        .map(|k| 4.0 * 2.0 / (PI * k as f64))
        .sum();
    let growth = l64 - l32;
    check(
        change < 0.2 && (growth - predicted).abs() < 1e-10 * predicted.max(1.0),
        format!("difference {d32:.4} -> {d64:.4} ({:.1}%); linear growth {growth:.12} vs {predicted:.12}", 100.0 * change),
    )
}

// ---------------------------------------------------------------- 8

fn almost_periods() -> Outcome {
    let sq = |x: f64| quasikdv::waves::square_wave(x) + quasikdv::waves::square_wave(SQRT_2 * x);
    let query = AlmostPeriodQuery::symmetric(1.0, (0.0, 20.0), 0.01, 10_000, 20_001);
    let rough = almost_period_scan(sq, &query).map_err(|e| e.to_string())?;
    let only_zero = rough.accepted.len() == 1 && rough.accepted[0].abs() < 1e-12;

    let basis = FrequencyBasis::default();
    let t = TAU * (5f64.sqrt() - 1.0) / 2.0;
    let field = airy_propagate(&square_wave_both(255).unwrap(), t, &basis);
    let freqs: Vec<(f64, Complex64)> = field.iter().map(|(xi, v)| (basis.dot(xi), v)).collect();
    let evolved = |x: f64| {
        freqs
            .iter()
            .map(|&(d, v)| (v * Complex64::from_polar(1.0, d * x)).re)
            .sum::<f64>()
    };
    let query = AlmostPeriodQuery::symmetric(2.0, (0.0, 20.0), 0.1, 1000, 20_001);
    let smooth = almost_period_scan(evolved, &query).map_err(|e| e.to_string())?;
    let nonzero = smooth.accepted.iter().any(|l| l.abs() > 1.0);
    let length = smooth.inclusion_length.unwrap_or(f64::INFINITY);
    check(
        only_zero && nonzero && smooth.relatively_dense(50.0),
        format!(
            "t=0 accepted {:?} of {}; irrational slice {} accepted, inclusion length {length:.2}",
            rough.accepted,
            rough.candidates,
            smooth.accepted.len()
        ),
    )
}

// ---------------------------------------------------------------- 9

fn packets() -> Outcome {
    let spec = WavePacketSpec::default();
    let mut min_diag = f64::INFINITY;
    for n in 1..=10 {
        for sign in [1.0, -1.0] {
            let eta = sign * (1u64 << n) as f64;
            let d = packet_inner_product(&spec, eta, 0.0, eta, 0.0).map_err(|e| e.to_string())?;
            min_diag = min_diag.min(d.re);
        }
    }
    let report = concentration_diagnostic(&spec).map_err(|e| e.to_string())?;
    let envelope_ok = report
        .off_diagonal_abs
        .iter()
        .zip(&report.off_diagonal_envelope)
        .all(|(a, e)| a <= e);
    let required = 0.5 * report.packets_per_level as f64 * 0.5;
    let increments: Vec<f64> = report
        .partial_sums
        .windows(2)
        .map(|w| w[1] - w[0])
        .collect();
    let min_inc = increments.iter().copied().fold(f64::INFINITY, f64::min);
    check(
        min_diag >= DIAGONAL_THRESHOLD && envelope_ok && min_inc >= required,
        format!(
            "min diagonal {min_diag:.5}; off-diagonal {:.3} <= envelope {:.3}; min increment {min_inc:.3} (need {required})",
            report.off_diagonal_abs.last().unwrap(),
            report.off_diagonal_envelope.last().unwrap()
        ),
    )
}

// ---------------------------------------------------------------- 10

fn csv_suite() -> Vec<(&'static str, Vec<u8>)> {
    let mut out = Vec::new();
    let pot = SampledPotential::from_fn(8.0, 1.0 / 16.0, |x| 0.2 * (-x * x).exp()).unwrap();
    let mut buf = Vec::new();
    greens_field(&pot, 1.0, 1e-10)
        .unwrap()
        .write_csv(&mut buf)
        .unwrap();
    out.push(("greens", buf));

    let sampling = SpatialSampling::uniform(-PI, PI, 1024).unwrap();
    let rec = talbot_reconstruct(1, 3, 1.0, 401, &sampling).unwrap();
    let mut buf = Vec::new();
    write_profile_csv(&mut buf, &sampling, &rec.direct).unwrap();
    out.push(("profile", buf));

    let basis = FrequencyBasis::default();
    let cfg = SolverConfig {
        n: 12,
        t_final: 0.002,
        ..Default::default()
    };
    let traj = solve(&square_wave_both(12).unwrap(), &cfg, &basis).unwrap();
    let mut buf = Vec::new();
    write_field_csv(&mut buf, traj.final_state()).unwrap();
    out.push(("state", buf));
    let mut buf = Vec::new();
    smoothing_difference(&traj, &basis)
        .unwrap()
        .write_csv(&mut buf)
        .unwrap();
    out.push(("smoothing", buf));

    let spec = WavePacketSpec {
        n_max: 3,
        ..Default::default()
    };
    let mut buf = Vec::new();
    write_concentration_csv(&spec, &mut buf).unwrap();
    out.push(("concentration", buf));
    out
}

fn determinism() -> Outcome {
    let reference = exec::with_workers(1, csv_suite);
    for workers in [4, 8] {
        let other = exec::with_workers(workers, csv_suite);
        for ((name, a), (_, b)) in reference.iter().zip(&other) {
            if a != b {
                return Err(format!(
                    "{name}.csv differs between 1 and {workers} workers"
                ));
            }
        }
    }
    let again = exec::with_workers(1, csv_suite);
    check(
        again == reference,
        format!(
            "{} CSVs bitwise identical across 1, 4, 8 workers and a rerun",
            reference.len()
        ),
    )
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "Green's bounds",
            budget: Duration::from_secs(30),
            run: greens_bounds,
        },
        Criterion {
            id: 2,
            name: "static identities",
            budget: Duration::from_secs(120),
            run: static_identities,
        },
        Criterion {
            id: 3,
            name: "dynamic and Gronwall identities",
            budget: Duration::from_secs(300),
            run: dynamic_identities,
        },
        Criterion {
            id: 4,
            name: "q-difference identity",
            budget: Duration::from_secs(60),
            run: qdiff_identity,
        },
        Criterion {
            id: 5,
            name: "Talbot reconstruction",
            budget: Duration::from_secs(60),
            run: talbot,
        },
        Criterion {
            id: 6,
            name: "KdV solver",
            budget: Duration::from_secs(300),
            run: kdv_solver,
        },
        Criterion {
            id: 7,
            name: "nonlinear smoothing trend",
            budget: Duration::from_secs(900),
            run: smoothing_trend,
        },
        Criterion {
            id: 8,
            name: "almost periodicity",
            budget: Duration::from_secs(120),
            run: almost_periods,
        },
        Criterion {
            id: 9,
            name: "packet construction",
            budget: Duration::from_secs(600),
            run: packets,
        },
        Criterion {
            id: 10,
            name: "determinism",
            budget: Duration::from_secs(600),
            run: determinism,
        },
    ];
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failures = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.contains(&c.id) {
            continue;
        }
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= c.budget;
        let (pass, detail) = match outcome {
            Ok(d) => (in_budget, d),
            Err(d) => (false, d),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {:<32} {}  [{:.1}s / {}s] {}",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            detail
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
