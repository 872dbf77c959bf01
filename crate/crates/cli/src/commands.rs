//! The subcommands.
//!
//! [`plan`] resolves and validates every parameter without computing
//! anything; the returned [`Job`] then runs its stages against a
//! [`Recorder`].

use std::f64::consts::{PI, TAU};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use quasikdv::almostper::{
    almost_period_scan, stepanov_norm, AlmostPeriodQuery, AlmostPeriodReport,
};
use quasikdv::greens::{
    convergence_orders, greens_field, verify_dynamic_identity, verify_gronwall_identity,
    verify_static_identity, DynamicIdentity, ForcedPair, IdentityReport, SampledPotential,
    StaticIdentity, TestFunction, Weight,
};
use quasikdv::io::fmt_f64;
use quasikdv::kdv::{solve, write_trajectory, Scheme, SolverConfig, Trajectory};
use quasikdv::lattice::g_theta_norm;
use quasikdv::smoothing::{normal_form_audit, smoothing_difference, SmoothingReport};
use quasikdv::waves::{
    airy_propagate, evaluate_field, jump_profile, profile_filename, square_wave, square_wave_both,
    talbot_reconstruct, write_profile_csv, SpatialSampling, TalbotDecomposition, TimeLabel,
    GIBBS_WINDOW,
};
use quasikdv::{CoefficientField, Error, FrequencyBasis, Result};

use crate::args::{self, Command};
use crate::manifest::{Check, Recorder};

/// A validated run.
pub trait Job: Send + Sync {
    fn run(&self, rec: &mut Recorder) -> Result<()>;
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(format!(
            "{name} must be positive and finite, got {x}"
        )))
    }
}

/// Resolves `cmd` into a job; no numerical work happens here.
pub fn plan(cmd: &Command, seed: u64) -> Result<Box<dyn Job>> {
    Ok(match cmd {
        Command::AiryEvolve(a) => Box::new(AiryJob::plan(a)?),
        Command::Talbot(a) => Box::new(TalbotJob::plan(a)?),
        Command::KdvSolve(a) => Box::new(KdvJob {
            flow: Flow::plan(&a.flow)?,
            config: solver_config(&a.solver, a.flow.n)?,
        }),
        Command::SmoothingReport(a) => Box::new(SmoothingJob::plan(a)?),
        Command::GreensVerify(a) => Box::new(GreensJob::plan(a, seed)?),
        Command::GronwallCheck(a) => Box::new(GronwallJob::plan(a)?),
        Command::AlmostPeriods(a) => Box::new(AlmostJob::plan(a)?),
        Command::StepanovDemo(a) => Box::new(StepanovJob::plan(a)?),
        Command::DeiftPipeline(a) => Box::new(DeiftJob::plan(a)?),
    })
}

// ------------------------------------------------------------ shared

/// Basis and initial data of a square-wave (or supplied) run.
struct Flow {
    basis: FrequencyBasis,
    initial: CoefficientField,
    n: i64,
    epsilon: f64,
    from_input: bool,
}

impl Flow {
    fn plan(a: &args::FlowArgs) -> Result<Self> {
        let (a1, a2) = args::parse_pair(&a.alpha).map_err(invalid)?;
        let basis = FrequencyBasis::new(a1, a2, a.gamma, None)?;
        if !a.epsilon.is_finite() {
            return Err(invalid("epsilon must be finite"));
        }
        let data = match &a.input {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
                CoefficientField::from_json(&text, Some(a.n))?
            }
            None => square_wave_both(a.n)?,
        };
        Ok(Self {
            basis,
            initial: data.scale(a.epsilon),
            n: a.n,
            epsilon: a.epsilon,
            from_input: a.input.is_some(),
        })
    }

    /// The data as a function: closed-form square waves, or the series of
    /// the supplied coefficients.
    fn profile(&self) -> Box<dyn Fn(f64) -> f64 + Sync> {
        if self.from_input {
            series(&self.initial, &self.basis)
        } else {
            let (a1, a2, e) = (self.basis.alpha1, self.basis.alpha2, self.epsilon);
            Box::new(move |x| e * (square_wave(a1 * x) + square_wave(a2 * x)))
        }
    }
}

fn solver_config(a: &args::SolverArgs, n: i64) -> Result<SolverConfig> {
    let config = SolverConfig {
        dt: a.dt,
        t_final: a.t_final,
        n,
        picard_tol: a.picard_tol,
        picard_max_iter: a.picard_max_iter,
        scheme: a.scheme.parse::<Scheme>()?,
        nonlinearity: !a.linear,
    };
    config.validate()?;
    Ok(config)
}

/// `x ↦ Re Σ q̂_ξ e^{i(α·ξ)x}`.
fn series(field: &CoefficientField, basis: &FrequencyBasis) -> Box<dyn Fn(f64) -> f64 + Sync> {
    let freqs: Vec<(f64, num_complex::Complex64)> =
        field.iter().map(|(xi, v)| (basis.dot(xi), v)).collect();
    Box::new(move |x| {
        freqs
            .iter()
            .map(|&(d, v)| {
                let (s, c) = (d * x).sin_cos();
                v.re * c - v.im * s
            })
            .sum()
    })
}

fn l2_mass(field: &CoefficientField) -> f64 {
    field.iter().map(|(_, v)| v.norm_sqr()).sum()
}

/// `t = π(√5 − 1)`, the golden-ratio multiple of `2π`.
fn golden_time() -> f64 {
    TAU * (5f64.sqrt() - 1.0) / 2.0
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn write_smoothing(rec: &mut Recorder, report: &SmoothingReport) -> Result<()> {
    rec.write_with("smoothing.csv", |w| report.write_csv(w))?;
    rec.write_text("smoothing_meta.json", &report.metadata_json()?)?;
    rec.check(Check::equals(
        "theta_in_window",
        flag(report.theta_in_window()),
        1.0,
    ));
    let (d, l) = (
        *report.l1_difference.last().unwrap(),
        *report.l1_linear.last().unwrap(),
    );
    rec.note("l1_difference_final", d);
    rec.note("l1_linear_final", l);
    Ok(())
}

fn scan_json(
    name: &str,
    report: &AlmostPeriodReport,
    extra: serde_json::Value,
) -> serde_json::Value {
    json!({
        "function": name,
        "profile": extra,
        "epsilon": report.epsilon,
        "window": [report.window.0, report.window.1],
        "step": report.step,
        "candidates": report.candidates,
        "accepted": report.accepted,
        "inclusion_length": report.inclusion_length,
    })
}

// ------------------------------------------------------------ airy-evolve

struct AiryJob {
    flow: Flow,
    t: f64,
    label: TimeLabel,
    sampling: SpatialSampling,
}

/// `p/q` (integers) as `t = 2πp/q`, or a plain number.
fn parse_time(s: &str) -> Result<(f64, Option<(i64, i64)>)> {
    match s.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad numerator in {s:?}")))?;
            let q: i64 = q
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad denominator in {s:?}")))?;
            if q < 1 {
                return Err(invalid(format!("denominator must be >= 1 in {s:?}")));
            }
            Ok((TAU * p as f64 / q as f64, Some((p, q))))
        }
        None => {
            let t: f64 = s
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad time {s:?}")))?;
            if !t.is_finite() {
                return Err(invalid("t must be finite"));
            }
            Ok((t, None))
        }
    }
}

impl AiryJob {
    fn plan(a: &args::AiryArgs) -> Result<Self> {
        let flow = Flow::plan(&a.flow)?;
        let (t, ratio) = parse_time(&a.t)?;
        // the rational label means α₁³t/2π = p/q
        let label = match ratio {
            Some((p, q)) if flow.basis.alpha1 == 1.0 => TimeLabel::Rational { p, q },
            _ => TimeLabel::Real(t),
        };
        let sampling = SpatialSampling::uniform(a.x_min, a.x_max, a.samples)?;
        Ok(Self {
            flow,
            t,
            label,
            sampling,
        })
    }
}

impl Job for AiryJob {
    fn run(&self, rec: &mut Recorder) -> Result<()> {
        rec.stage("airy-evolve", |rec| {
            let f = &self.flow;
            rec.write_text("coefficients_t0.json", &f.initial.to_json()?)?;
            let evolved = airy_propagate(&f.initial, self.t, &f.basis);
            rec.write_text("coefficients.json", &evolved.to_json()?)?;
            let values = evaluate_field(&evolved, &f.basis, &self.sampling)?;
            rec.write_with(&profile_filename(self.label, f.n), |w| {
                write_profile_csv(w, &self.sampling, &values)
            })?;
            let before = f.initial.magnitude();
            let drift = (evolved.magnitude() - before).abs() / before.max(f64::MIN_POSITIVE);
            rec.check(Check::at_most("l1_norm_relative_drift", drift, 1e-12));
            rec.note("t", self.t);
            rec.note("l1_norm", before);
            rec.note(
                "max_increment",
                jump_profile(&values, &self.sampling)?.max_increment,
            );
            Ok(())
        })
    }
}

// ------------------------------------------------------------ talbot

struct TalbotJob {
    p: i64,
    q: i64,
    alpha: f64,
    n: i64,
    sampling: SpatialSampling,
}

impl TalbotJob {
    fn plan(a: &args::TalbotArgs) -> Result<Self> {
        TalbotDecomposition::new(a.p, a.q, a.alpha)?;
        if a.n < 1 {
            return Err(invalid(format!("N must be >= 1, got {}", a.n)));
        }
        let sampling = SpatialSampling::uniform(-PI / a.alpha, PI / a.alpha, a.samples)?;
        Ok(Self {
            p: a.p,
            q: a.q,
            alpha: a.alpha,
            n: a.n,
            sampling,
        })
    }
}

impl Job for TalbotJob {
    fn run(&self, rec: &mut Recorder) -> Result<()> {
        rec.stage("talbot", |rec| {
            let (p, q) = (self.p, self.q);
            let r = talbot_reconstruct(p, q, self.alpha, self.n, &self.sampling)?;
            let d = &r.decomposition;
            rec.write_with(
                &profile_filename(TimeLabel::Rational { p, q }, self.n),
                |w| write_profile_csv(w, &self.sampling, &r.direct),
            )?;
            rec.write_with(&format!("oracle_t2pi_{p}over{q}.csv"), |w| {
                write_profile_csv(w, &self.sampling, &r.samples)
            })?;
            rec.write_with("talbot_weights.csv", |w| {
                writeln!(w, "k,re,im,abs")?;
                for (k, v) in d.weights.iter().enumerate() {
                    writeln!(
                        w,
                        "{k},{},{},{}",
                        fmt_f64(v.re),
                        fmt_f64(v.im),
                        fmt_f64(v.norm())
                    )?;
                }
                Ok(())
            })?;
            let deviation = r.max_deviation_outside_jumps(self.alpha, self.n, &self.sampling);
            let unitarity = d.unitarity();
            rec.write_json(
                "talbot.json",
                &json!({
                    "p": p,
                    "q": q,
                    "alpha": self.alpha,
                    "N": self.n,
                    "time": r.time,
                    "shift_step": d.shift_step,
                    "unitarity": unitarity,
                    "nonzero_weights": d.nonzero_weights(),
                    "gibbs_window": GIBBS_WINDOW,
                    "max_deviation_outside_jumps": deviation,
                }),
            )?;
            rec.check(Check::below(
                "weight_unitarity_error",
                (unitarity - 1.0).abs(),
                1e-12,
            ));
            rec.check(Check::below("max_deviation_outside_jumps", deviation, 5e-3));
            Ok(())
        })
    }
}

// ------------------------------------------------------------ kdv-solve

struct KdvJob {
    flow: Flow,
    config: SolverConfig,
}

/// θ used for the norm check when the command has no `--theta`.
const DEFAULT_THETA: f64 = 0.9;

/// Final `G^θ` norm within 10% of the initial one; mass drift goes to the summary.
fn check_solution(
    rec: &mut Recorder,
    traj: &Trajectory,
    basis: &FrequencyBasis,
    theta: f64,
) -> Result<()> {
    let m0 = l2_mass(&traj.states[0]);
    let drift = traj
        .states
        .iter()
        .map(|s| (l2_mass(s) - m0).abs())
        .fold(0.0, f64::max)
        / m0.max(f64::MIN_POSITIVE);
    rec.note("l2_mass_relative_drift", drift);
    let g0 = g_theta_norm(&traj.states[0], theta, basis)?;
    let g1 = g_theta_norm(traj.final_state(), theta, basis)?;
    let change = if g0 > 0.0 { (g1 - g0).abs() / g0 } else { g1 };
    rec.note("g_theta_norm_final", g1);
    rec.check(Check::at_most("g_theta_norm_relative_change", change, 0.1));
    Ok(())
}

impl Job for KdvJob {
    fn run(&self, rec: &mut Recorder) -> Result<()> {
        let traj = rec.stage("kdv-solve", |rec| {
            let traj = solve(&self.flow.initial, &self.config, &self.flow.basis)?;
            write_trajectory(&traj, &rec.path("trajectory"))?;
            rec.artifact("trajectory/trajectory.json");
            rec.artifact(format!(
                "trajectory/state_*.csv ({} files)",
                traj.states.len()
            ));
            Ok(traj)
        })?;
        check_solution(rec, &traj, &self.flow.basis, DEFAULT_THETA)?;
        rec.note("steps", traj.times.len() - 1);
        rec.note("l1_norm_final", traj.final_state().magnitude());
        Ok(())
    }
}

// ------------------------------------------------------------ smoothing-report

struct SmoothingJob {
    flow: Flow,
    config: SolverConfig,
    theta: f64,
    margin: f64,
    audit: bool,
}

impl SmoothingJob {
    fn plan(a: &args::SmoothingArgs) -> Result<Self> {
        if !(a.theta > 0.0 && a.theta < 1.0) {
            return Err(invalid(format!(
                "theta must lie in (0, 1), got {}",
                a.theta
            )));
        }
        Ok(Self {
            flow: Flow::plan(&a.flow)?,
            config: solver_config(&a.solver, a.flow.n)?,
            theta: a.theta,
            margin: positive("margin", a.margin)?,
            audit: a.audit,
        })
    }
}

impl Job for SmoothingJob {
    fn run(&self, rec: &mut Recorder) -> Result<()> {
        let traj = rec.stage("kdv-solve", |_| {
            solve(&self.flow.initial, &self.config, &self.flow.basis)
        })?;
        check_solution(rec, &traj, &self.flow.basis, self.theta)?;
        rec.stage("smoothing-report", |rec| {
            let report = smoothing_difference(&traj, &self.flow.basis)?
                .with_bookkeeping(self.theta, self.margin);
            write_smoothing(rec, &report)
        })?;
        if self.audit {
            rec.stage("normal-form-audit", |rec| {
                // the quadrature error dominates at solver resolution, so
                // the check is convergence under halving dt
                let coarse = normal_form_audit(&traj, self.margin)?;
                let half = SolverConfig {
                    dt: self.config.dt / 2.0,
                    ..self.config
                };
                let fine_traj = solve(&self.flow.initial, &half, &self.flow.basis)?;
                let fine = normal_form_audit(&fine_traj, self.margin)?;
                rec.write_json(
                    "normal_form.json",
                    &json!({ "dt": [self.config.dt, half.dt], "audits": [coarse, fine] }),
                )?;
                let ratio = coarse.residual / fine.residual.max(f64::MIN_POSITIVE);
                rec.note(
                    "normal_form_relative_residual",
                    fine.residual / fine.scale.max(f64::MIN_POSITIVE),
                );
                rec.check(Check::below(
                    "normal_form_region_empty",
                    flag(fine.scale == 0.0),
                    1.0,
                ));
                rec.check(Check::at_least("normal_form_residual_ratio", ratio, 1.0));
                Ok(())
            })?;
        }
        Ok(())
    }
}

// ------------------------------------------------------------ greens-verify

#[derive(Clone, Copy, Debug)]
enum PotentialSpec {
    Constant(f64),
    Gauss { a: f64, center: f64 },
    Sech2(f64),
    Random,
}

impl std::str::FromStr for PotentialSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64> {
            let v: f64 = parts
                .get(i)
                .ok_or_else(|| invalid(format!("potential {s:?} is missing a number")))?
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad number in potential {s:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(invalid(format!("non-finite number in potential {s:?}")))
            }
        };
        let spec = match (parts[0], parts.len()) {
            ("constant", 2) => PotentialSpec::Constant(num(1)?),
            ("gauss", 2) => PotentialSpec::Gauss {
                a: num(1)?,
                center: 0.0,
            },
            ("gauss", 3) => PotentialSpec::Gauss {
                a: num(1)?,
                center: num(2)?,
            },
            ("sech2", 2) => PotentialSpec::Sech2(num(1)?),
            ("random", 1) => PotentialSpec::Random,
            _ => return Err(invalid(format!(
                "unknown potential {s:?}; expected constant:c, gauss:a[:center], sech2:a or random"
            ))),
        };
        Ok(spec)
    }
}

impl PotentialSpec {
    fn sample(self, half_width: f64, h: f64) -> Result<SampledPotential> {
        match self {
            PotentialSpec::Constant(c) => SampledPotential::constant(c, half_width, h),
            PotentialSpec::Gauss { a, center } => SampledPotential::from_fn(half_width, h, |x| {
                a * (-(x - center) * (x - center)).exp()
            }),
            PotentialSpec::Sech2(a) => {
                SampledPotential::from_fn(half_width, h, |x| a / x.cosh().powi(2))
            }
            PotentialSpec::Random => Err(invalid("random potentials are drawn per seed")),
        }
    }
}

/// Four Gaussian bumps plus two cosines, rescaled so that the sup norm is
/// uniform in `[1/8, 1/4]`.
fn random_potential(rng: &mut ChaCha8Rng, half_width: f64, h: f64) -> Result<SampledPotential> {
    let bumps: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-0.75 * half_width..0.75 * half_width),
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
    let probe = SampledPotential::from_fn(half_width, h, &raw)?;
    let scale = 0.25 * rng.gen_range(0.5..1.0) / probe.sup_norm();
    SampledPotential::from_fn(half_width, h, |x| scale * raw(x))
}

struct GreensJob {
    spec: PotentialSpec,
    kappa: f64,
    half_width: f64,
    /// Coarse to fine.
    spacings: Vec<f64>,
    tol: f64,
    identities: Vec<StaticIdentity>,
    count: usize,
    seed: u64,
}

impl GreensJob {
    fn plan(a: &args::GreensArgs, seed: u64) -> Result<Self> {
        let spec: PotentialSpec = a.q.parse()?;
        let h = positive("h", args::parse_ratio(&a.h).map_err(invalid)?)?;
        if a.levels < 1 || a.levels > 8 {
            return Err(invalid(format!(
                "levels must be in 1..=8, got {}",
                a.levels
            )));
        }
        let identities = if a.identity == "all" {
            vec![
                StaticIdentity::QEquation,
                StaticIdentity::GSecond,
                StaticIdentity::GThird,
                StaticIdentity::GIdentity,
            ]
        } else {
            vec![a.identity.parse()?]
        };
        if a.count < 1 {
            return Err(invalid("count must be >= 1"));
        }
        let job = Self {
            spec,
            kappa: positive("kappa", a.kappa)?,
            half_width: positive("L", a.half_width)?,
            spacings: (0..a.levels)
                .rev()
                .map(|k| h * (1u64 << k) as f64)
                .collect(),
            tol: positive("tol", a.tol)?,
            identities,
            count: a.count,
            seed,
        };
        // grid and hypothesis problems surface now rather than mid-run
        if !matches!(spec, PotentialSpec::Random) {
            for &h in &job.spacings {
                let pot = spec.sample(job.half_width, h)?;
                let required = 4.0 * pot.sup_norm();
                if job.kappa * job.kappa < required {
                    return Err(Error::HypothesisViolated {
                        kappa_sq: job.kappa * job.kappa,
                        required,
                    });
                }
            }
        }
        Ok(job)
    }

    fn finest(&self) -> f64 {
        *self.spacings.last().unwrap()
    }

    fn run_random(&self, rec: &mut Recorder) -> Result<()> {
        rec.stage("greens-random", |rec| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let mut rows = Vec::with_capacity(self.count);
            for k in 0..self.count {
                let pot = random_potential(&mut rng, self.half_width, self.finest())?;
                let field = greens_field(&pot, self.kappa, self.tol)?;
                rows.push((
                    k,
                    pot.sup_norm(),
                    field.audit.min_slack(),
                    field.series_terms_used,
                ));
            }
            rec.write_with("greens_random.csv", |w| {
                writeln!(w, "index,sup_norm,min_slack,series_terms")?;
                for (k, sup, slack, terms) in &rows {
                    writeln!(w, "{k},{},{},{terms}", fmt_f64(*sup), fmt_f64(*slack))?;
                }
                Ok(())
            })?;
            let worst = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
            rec.check(Check::at_least("min_slack", worst, 0.0));
            rec.note("seed", self.seed);
            Ok(())
        })
    }
}

impl Job for GreensJob {
    fn run(&self, rec: &mut Recorder) -> Result<()> {
        if matches!(self.spec, PotentialSpec::Random) {
            return self.run_random(rec);
        }
        rec.stage("greens-field", |rec| {
            let pot = self.spec.sample(self.half_width, self.finest())?;
            let field = greens_field(&pot, self.kappa, self.tol)?;
            rec.write_with("greens.csv", |w| field.write_csv(w))?;
            rec.write_json(
                "greens_audit.json",
                &json!({
                    "kappa": field.kappa,
                    "h": field.h,
                    "series_terms_used": field.series_terms_used,
                    "tail_bound": field.tail_bound,
                    "derivative_tail_bound": field.derivative_tail_bound,
                    "audit": field.audit,
                    "min_slack": field.audit.min_slack(),
                }),
            )?;
            rec.check(Check::at_least("min_slack", field.audit.min_slack(), 0.0));
            Ok(())
        })?;
        rec.stage("static-identities", |rec| {
            let test_fn = TestFunction::Gaussian {
                a: 1.0,
                center: 0.3,
            };
            let pots = self
                .spacings
                .iter()
                .map(|&h| self.spec.sample(self.half_width, h))
                .collect::<Result<Vec<_>>>()?;
            // constants: every level, since only the test-function quadrature errs
            let constant = matches!(self.spec, PotentialSpec::Constant(_));
            let threshold = if constant { 1e-10 } else { 1e-4 };
            let mut reports = Vec::new();
            for &kind in &self.identities {
                let residuals = pots
                    .iter()
                    .map(|p| verify_static_identity(kind, p, self.kappa, Some(test_fn), self.tol))
                    .collect::<Result<Vec<f64>>>()?;
                let orders = convergence_orders(&residuals);
                let name = serde_json::to_value(kind)?
                    .as_str()
                    .unwrap_or_default()
                    .to_string();
                for (i, (p, &r)) in pots.iter().zip(&residuals).enumerate() {
                    reports.push(IdentityReport {
                        kind: name.clone(),
                        h: p.h(),
                        residual: r,
                        order_estimate: if i == 0 { None } else { Some(orders[i - 1]) },
                    });
                }
                let judged = if constant {
                    residuals.iter().copied().fold(0.0, f64::max)
                } else {
                    *residuals.last().unwrap()
                };
                rec.check(Check::below(&format!("{name}_residual"), judged, threshold));
            }
            rec.write_json("identities.json", &reports)
        })
    }
}

// ------------------------------------------------------------ gronwall-check

struct GronwallJob {
    a: args::GronwallArgs,
}

impl GronwallJob {
    fn plan(a: &args::GronwallArgs) -> Result<Self> {
        positive("kappa", a.kappa)?;
        positive("L", a.half_width)?;
        positive("T", a.t_final)?;
        positive("R", a.weight_scale)?;
        positive("tol", a.tol)?;
        if !a.amplitude.is_finite() {
            return Err(invalid("amplitude must be finite"));
        }
        if a.nx < 16 || a.nx % 4 != 0 {
            return Err(invalid(format!(
                "nx must be a multiple of 4 and >= 16, got {}",
                a.nx
            )));
        }
        if a.nt < 2 || a.nt % 2 != 0 {
            return Err(invalid(format!("nt must be even and >= 2, got {}", a.nt)));
        }
        // the bump's sup is |A| at every slice
        let required = 4.0 * a.amplitude.abs();
        if a.kappa * a.kappa < required {
            return Err(Error::HypothesisViolated {
                kappa_sq: a.kappa * a.kappa,
                required,
            });
        }
        Ok(Self { a: a.clone() })
    }
}

impl Job for GronwallJob {
    fn run(&self, rec: &mut Recorder) -> Result<()> {
        let a = &self.a;
        rec.stage("gronwall-check", |rec| {
            let times: Vec<f64> = (0..=a.nt)
                .map(|k| a.t_final * k as f64 / a.nt as f64)
                .collect();
            let amp = a.amplitude;
            let mut levels = Vec::new();
            let (mut dyn_res, mut gron_res, mut signed) = (Vec::new(), Vec::new(), Vec::new());
            for nx in [a.nx / 4, a.nx / 2, a.nx] {
                let h = 2.0 * a.half_width / nx as f64;
                let p1 = ForcedPair::manufacture(times.clone(), a.half_width, h, |t, x| {
                    amp * (-x * x).exp() * t.cos()
                })?;
                let p2 = ForcedPair::manufacture(times.clone(), a.half_width, h, |_, x| {
                    amp * (-x * x).exp()
                })?;
                let t_mid = times[a.nt / 2];
                let g_dt =
                    verify_dynamic_identity(&p1, a.kappa, t_mid, DynamicIdentity::GDt, a.tol)?;
                let inv_dt = verify_dynamic_identity(
                    &p1,
                    a.kappa,
                    t_mid,
                    DynamicIdentity::OneOverGDt,
                    a.tol,
                )?;
                let g = verify_gronwall_identity(
                    &p1,
                    &p2,
                    a.kappa,
                    Weight::Sech { r: a.weight_scale },
                    a.t_final,
                    a.tol,
                )?;
                dyn_res.push(g_dt.max(inv_dt));
                gron_res.push(g.residual);
                signed.push(g.lhs - g.rhs);
                levels.push(json!({
                    "nx": nx,
                    "h": p1.h,
                    "dynamic_t": t_mid,
                    "g-dt": g_dt,
                    "one-over-g-dt": inv_dt,
                    "gronwall": g,
                }));
            }
            let dyn_order = convergence_orders(&dyn_res)[1];
            // differencing the signed residual removes the time-quadrature part
            let gron_order = ((signed[0] - signed[1]) / (signed[1] - signed[2]))
                .abs()
                .log2();
            rec.write_json(
                "gronwall.json",
                &json!({
                    "kappa": a.kappa,
                    "nt": a.nt,
                    "T": a.t_final,
                    "weight": Weight::Sech { r: a.weight_scale },
                    "levels": levels,
                    "dynamic_order": dyn_order,
                    "gronwall_h_order": gron_order,
                }),
            )?;
            rec.check(Check::below("dynamic_residual", dyn_res[2], 1e-3));
            rec.check(Check::below("gronwall_residual", gron_res[2], 1e-3));
            rec.check(Check::at_least("dynamic_order", dyn_order, 3.0));
            rec.check(Check::at_least("gronwall_h_order", gron_order, 3.0));
            Ok(())
        })
    }
}

// ------------------------------------------------------------ almost-periods

enum AlmostFunction {
    Square,
    SquareBoth,
    Evolved,
}

struct AlmostJob {
    function: AlmostFunction,
    alpha: f64,
    t: f64,
    n: i64,
    query: AlmostPeriodQuery,
}

fn parse_slice_time(s: &str) -> Result<f64> {
    if s == "golden" {
        return Ok(golden_time());
    }
    Ok(parse_time(s)?.0)
}

impl AlmostJob {
    fn plan(a: &args::AlmostArgs) -> Result<Self> {
        let function = match a.function.as_str() {
            "square" => AlmostFunction::Square,
            "square-both" => AlmostFunction::SquareBoth,
            "evolved" => AlmostFunction::Evolved,
            other => {
                return Err(invalid(format!(
                    "unknown function {other:?}; expected square, square-both or evolved"
                )))
            }
        };
        positive("step", a.step)?;
        if a.count < 0 {
            return Err(invalid("count must be >= 0"));
        }
        if a.n < 1 {
            return Err(invalid(format!("N must be >= 1, got {}", a.n)));
        }
        let query =
            AlmostPeriodQuery::symmetric(a.epsilon, (a.x_min, a.x_max), a.step, a.count, a.samples);
        query.validate()?;
        FrequencyBasis::new(1.0, a.alpha, 2.0, None)?;
        Ok(Self {
            function,
            alpha: a.alpha,
            t: parse_slice_time(&a.t)?,
            n: a.n,
            query,
        })
    }
}

impl Job for AlmostJob {
    fn run(&self, rec: &mut Recorder) -> Result<()> {
        rec.stage("almost-periods", |rec| {
            let alpha = self.alpha;
            let (name, profile, f): (&str, _, Box<dyn Fn(f64) -> f64 + Sync>) = match self.function
            {
                AlmostFunction::Square => ("square", json!({}), Box::new(square_wave)),
                AlmostFunction::SquareBoth => (
                    "square-both",
                    json!({ "alpha": alpha }),
                    Box::new(move |x| square_wave(x) + square_wave(alpha * x)),
                ),
                AlmostFunction::Evolved => {
                    let basis = FrequencyBasis::new(1.0, alpha, 2.0, None)?;
                    let field = airy_propagate(&square_wave_both(self.n)?, self.t, &basis);
                    (
                        "evolved",
                        json!({ "alpha": alpha, "t": self.t, "N": self.n }),
                        series(&field, &basis),
                    )
                }
            };
            let report = almost_period_scan(f, &self.query)?;
            write_scan(rec, "almost_periods", name, &report, profile)?;
            rec.check(Check::equals(
                "zero_shift_accepted",
                flag(report.accepted.contains(&0.0)),
                1.0,
            ));
            Ok(())
        })
    }
}

fn write_scan(
    rec: &mut Recorder,
    stem: &str,
    name: &str,
    report: &AlmostPeriodReport,
    profile: serde_json::Value,
) -> Result<()> {
    rec.write_json(&format!("{stem}.json"), &scan_json(name, report, profile))?;
    rec.write_with(&format!("{stem}_accepted.csv"), |w| {
        writeln!(w, "shift")?;
        for l in &report.accepted {
            writeln!(w, "{}", fmt_f64(*l))?;
        }
        Ok(())
    })?;
    rec.note(&format!("{stem}_accepted"), report.accepted.len());
    rec.note(&format!("{stem}_inclusion_length"), report.inclusion_length);
    Ok(())
}

// ------------------------------------------------------------ stepanov-demo

struct StepanovJob {
    p: f64,
    alpha: f64,
    shifts: Vec<f64>,
    offsets: Vec<f64>,
    nodes: usize,
}

impl StepanovJob {
    fn plan(a: &args::StepanovArgs) -> Result<Self> {
        if !(a.p >= 1.0 && a.p.is_finite()) {
            return Err(invalid(format!("p must be finite and >= 1, got {}", a.p)));
        }
        positive("alpha", a.alpha)?;
        positive("span", a.span)?;
        let mut shifts = args::parse_list(&a.shifts).map_err(invalid)?;
        for &l in &shifts {
            positive("shift", l)?;
        }
        // largest shift first, so the norms should decrease down the table
        shifts.sort_by(|x, y| y.partial_cmp(x).unwrap());
        if a.offsets < 1 {
            return Err(invalid("offsets must be >= 1"));
        }
        if a.nodes < 3 || a.nodes > 10_000_001 {
            return Err(invalid(format!(
                "nodes must be in 3..=10^7+1, got {}",
                a.nodes
            )));
        }
        let offsets = if a.offsets == 1 {
            vec![0.0]
        } else {
            (0..a.offsets)
                .map(|k| a.span * k as f64 / (a.offsets - 1) as f64)
                .collect()
        };
        Ok(Self {
            p: a.p,
            alpha: a.alpha,
            shifts,
            offsets,
            nodes: a.nodes,
        })
    }
}

impl Job for StepanovJob {
    fn run(&self, rec: &mut Recorder) -> Result<()> {
        rec.stage("stepanov-demo", |rec| {
            let alpha = self.alpha;
            let f = move |x: f64| square_wave(x) + square_wave(alpha * x);
            let (lo, hi) = (-1.0, self.offsets.last().unwrap() + 1.0);
            let mut rows = Vec::new();
            for &l in &self.shifts {
                let d = |x: f64| f(x + l) - f(x);
                let stepanov = stepanov_norm(d, self.p, &self.offsets, self.nodes)?;
                // a spacing of ℓ/4 lands inside every mismatch interval
                let m = ((hi - lo) / (0.25 * l)).ceil() as usize + 1;
                let sup = (0..m)
                    .map(|j| d(lo + (hi - lo) * j as f64 / (m - 1) as f64).abs())
                    .fold(0.0, f64::max);
                rows.push((l, stepanov, sup));
            }
            rec.write_with("stepanov.csv", |w| {
                writeln!(w, "shift,stepanov_norm,sup_norm")?;
                for (l, s, u) in &rows {
                    writeln!(w, "{},{},{}", fmt_f64(*l), fmt_f64(*s), fmt_f64(*u))?;
                }
                Ok(())
            })?;
            let rows_json: Vec<_> = rows
                .iter()
                .map(|(l, s, u)| json!({ "shift": l, "stepanov_norm": s, "sup_norm": u }))
                .collect();
            rec.write_json(
                "stepanov.json",
                &json!({ "p": self.p, "alpha": alpha, "nodes": self.nodes, "offsets": self.offsets.len(), "rows": rows_json }),
            )?;
            let decreasing = rows.windows(2).all(|w| w[1].1 < w[0].1);
            let min_sup = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
            rec.check(Check::equals("stepanov_decreasing", flag(decreasing), 1.0));
            rec.check(Check::at_least("min_sup_norm", min_sup, 1.0));
            Ok(())
        })
    }
}

// ------------------------------------------------------------ deift-pipeline

struct DeiftJob {
    flow: Flow,
    config: SolverConfig,
    eps_rough: f64,
    eps_smooth: f64,
    slice: CoefficientField,
}

impl DeiftJob {
    fn plan(a: &args::DeiftArgs) -> Result<Self> {
        let flow = Flow::plan(&a.flow)?;
        let config = solver_config(&a.solver, a.flow.n)?;
        if a.slice_n < 1 {
            return Err(invalid(format!("slice_n must be >= 1, got {}", a.slice_n)));
        }
        let slice = if flow.from_input {
            flow.initial.clone()
        } else {
            square_wave_both(a.slice_n)?.scale(flow.epsilon)
        };
        Ok(Self {
            flow,
            config,
            eps_rough: positive("epsilon_rough", a.epsilon_rough)?,
            eps_smooth: positive("epsilon_smooth", a.epsilon_smooth)?,
            slice,
        })
    }
}

impl Job for DeiftJob {
    fn run(&self, rec: &mut Recorder) -> Result<()> {
        let f = &self.flow;
        let traj = rec.stage("kdv-solve", |rec| {
            let traj = solve(&f.initial, &self.config, &f.basis)?;
            write_trajectory(&traj, &rec.path("trajectory"))?;
            rec.artifact("trajectory/trajectory.json");
            rec.artifact(format!(
                "trajectory/state_*.csv ({} files)",
                traj.states.len()
            ));
            let sampling = SpatialSampling::uniform(-10.0, 10.0, 2001)?;
            let values = evaluate_field(traj.final_state(), &f.basis, &sampling)?;
            let name = profile_filename(TimeLabel::Real(self.config.t_final), f.n);
            rec.write_with(&name, |w| write_profile_csv(w, &sampling, &values))?;
            Ok(traj)
        })?;
        check_solution(rec, &traj, &self.flow.basis, DEFAULT_THETA)?;

        rec.stage("smoothing-report", |rec| {
            let report = smoothing_difference(&traj, &f.basis)?
                .with_bookkeeping(0.9, quasikdv::smoothing::DEFAULT_MARGIN);
            write_smoothing(rec, &report)
        })?;

        rec.stage("almost-periods-t0", |rec| {
            let query = AlmostPeriodQuery::symmetric(self.eps_rough, (0.0, 20.0), 0.01, 10_000, 20_001);
            let report = almost_period_scan(f.profile(), &query)?;
            let profile = json!({ "alpha": [f.basis.alpha1, f.basis.alpha2], "t": 0.0, "epsilon": f.epsilon });
            write_scan(rec, "almost_periods_t0", "initial-data", &report, profile)?;
            let only_zero = report.accepted == [0.0];
            rec.check(Check::equals("t0_accepts_only_zero", flag(only_zero), 1.0));
            Ok(())
        })?;

        let t = golden_time();
        let evolved = airy_propagate(&self.slice, t, &f.basis);
        rec.stage("almost-periods-slice", |rec| {
            let query =
                AlmostPeriodQuery::symmetric(self.eps_smooth, (0.0, 20.0), 0.1, 1000, 20_001);
            let report = almost_period_scan(series(&evolved, &f.basis), &query)?;
            let profile = json!({
                "alpha": [f.basis.alpha1, f.basis.alpha2],
                "t": t,
                "N": self.slice.radius(),
                "epsilon": f.epsilon,
            });
            write_scan(
                rec,
                "almost_periods_slice",
                "linear-slice",
                &report,
                profile,
            )?;
            let nonzero = report.accepted.iter().filter(|l| l.abs() > 1.0).count();
            rec.check(Check::at_least(
                "slice_nonzero_almost_periods",
                nonzero as f64,
                1.0,
            ));
            rec.check(Check::at_most(
                "slice_inclusion_length",
                report.inclusion_length.unwrap_or(f64::INFINITY),
                50.0,
            ));
            Ok(())
        })?;

        rec.stage("continuity-profile", |rec| {
            let increment = |m: usize| -> Result<(SpatialSampling, Vec<f64>, f64)> {
                let s = SpatialSampling::uniform(-PI, PI, m)?;
                let v = evaluate_field(&evolved, &f.basis, &s)?;
                let inc = jump_profile(&v, &s)?.max_increment;
                Ok((s, v, inc))
            };
            let (_, _, coarse) = increment(2048)?;
            let (s, v, fine) = increment(16_384)?;
            rec.write_with("continuity_profile.csv", |w| write_profile_csv(w, &s, &v))?;
            rec.note("max_increment_2048", coarse);
            rec.note("max_increment_16384", fine);
            rec.check(Check::at_least(
                "continuity_increment_ratio",
                coarse / fine,
                3.0,
            ));
            Ok(())
        })
    }
}
