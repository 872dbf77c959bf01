//! Time integration of the KdV coefficient system
//! `q̂_ξ' = i(α·ξ)³ q̂_ξ + 3i(α·ξ) Σ_{ξ⁽¹⁾+ξ⁽²⁾=ξ} q̂_{ξ⁽¹⁾} q̂_{ξ⁽²⁾}`
//! on the box `|ξ₁|, |ξ₂| ≤ N`.
//!
//! The linear part is removed with the interaction representation
//! `û_ξ(t) = e^{−it(α·ξ)³} q̂_ξ(t)`; the remaining system is integrated by
//! classical RK4 or by a trapezoidal Duhamel fixed point.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::io::fmt_f64;
use crate::lattice::{CoefficientField, FrequencyBasis, FrequencyIndex};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative tolerance of the per-step Hermitian audit.
pub const SYMMETRY_AUDIT: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ExponentialRk4,
    PicardFixedPoint,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential-rk4" | "rk4" => Ok(Scheme::ExponentialRk4),
            "picard-fixed-point" | "picard" => Ok(Scheme::PicardFixedPoint),
            _ => Err(Error::InvalidParameter(format!("unknown scheme {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    /// Horizon; negative values integrate backwards with step `−dt`.
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "N")]
    pub n: i64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub scheme: Scheme,
    /// `false` drops the quadratic term (pure Airy flow).
    #[serde(default = "default_true")]
    pub nonlinearity: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            t_final: 0.01,
            n: 32,
            picard_tol: 1e-12,
            picard_max_iter: 50,
            scheme: Scheme::ExponentialRk4,
            nonlinearity: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !self.t_final.is_finite() {
            return Err(Error::InvalidParameter("T must be finite".into()));
        }
        if self.n < 1 {
            return Err(Error::InvalidParameter(format!(
                "N must be >= 1, got {}",
                self.n
            )));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "picard_tol must be positive".into(),
            ));
        }
        if self.picard_max_iter == 0 {
            return Err(Error::InvalidParameter(
                "picard_max_iter must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// The output times `0, ±dt, ±2dt, …, T`; the last step is shortened to
    /// land on `T`.
    pub fn times(&self) -> Vec<f64> {
        let span = self.t_final.abs();
        let sign = if self.t_final < 0.0 { -1.0 } else { 1.0 };
        let steps = ((span / self.dt) - 1e-9).ceil().max(0.0) as usize;
        let mut times: Vec<f64> = (0..=steps)
            .map(|k| sign * (k as f64 * self.dt).min(span))
            .collect();
        if let Some(last) = times.last_mut() {
            if steps > 0 {
                *last = self.t_final;
            }
        }
        times
    }
}

/// Dense storage on the box `|ξ₁|, |ξ₂| ≤ N`, row-major in `ξ₁`.
///
/// The origin slot exists but is always zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeGrid {
    n: i64,
    side: usize,
    data: Vec<Complex64>,
}

impl ModeGrid {
    pub fn zeros(n: i64) -> Self {
        let side = (2 * n + 1) as usize;
        Self {
            n,
            side,
            data: vec![ZERO; side * side],
        }
    }

    pub fn radius(&self) -> i64 {
        self.n
    }

    #[inline]
    fn offset(&self, xi1: i64, xi2: i64) -> usize {
        (xi1 + self.n) as usize * self.side + (xi2 + self.n) as usize
    }

    pub fn get(&self, xi: FrequencyIndex) -> Complex64 {
        if xi.sup_norm() > self.n {
            return ZERO;
        }
        self.data[self.offset(xi.xi1, xi.xi2)]
    }

    /// Entries of `field` outside the box are dropped.
    pub fn from_field(field: &CoefficientField, n: i64) -> Self {
        let mut g = Self::zeros(n);
        for (xi, v) in field.iter() {
            if xi.sup_norm() <= n {
                let o = g.offset(xi.xi1, xi.xi2);
                g.data[o] = v;
            }
        }
        g
    }

    /// The nonzero entries as a field of radius `N`.
    pub fn to_field(&self) -> CoefficientField {
        let mut entries = Vec::new();
        for xi1 in -self.n..=self.n {
            for xi2 in -self.n..=self.n {
                let v = self.data[self.offset(xi1, xi2)];
                if v != ZERO {
                    entries.push((FrequencyIndex::new(xi1, xi2), v));
                }
            }
        }
        CoefficientField::from_sorted_unchecked(self.n, entries)
    }

    /// Canonical half-plane indices of the box, in a fixed order.
    pub fn half_indices(n: i64) -> Vec<FrequencyIndex> {
        let mut out = Vec::with_capacity(((2 * n + 1) * (2 * n + 1) / 2) as usize);
        for xi1 in 0..=n {
            let lo = if xi1 == 0 { 1 } else { -n };
            for xi2 in lo..=n {
                out.push(FrequencyIndex::new(xi1, xi2));
            }
        }
        out
    }

    /// Builds a grid from half-plane values and their mirrored conjugates.
    fn from_half(n: i64, half: &[FrequencyIndex], values: &[Complex64]) -> Self {
        let mut g = Self::zeros(n);
        for (&xi, &v) in half.iter().zip(values) {
            let a = g.offset(xi.xi1, xi.xi2);
            let b = g.offset(-xi.xi1, -xi.xi2);
            g.data[a] = v;
            g.data[b] = v.conj();
        }
        g
    }

    /// `(a ⋆ b)_ξ = Σ_{ξ⁽¹⁾+ξ⁽²⁾=ξ} a_{ξ⁽¹⁾} b_{ξ⁽²⁾}` at one output index,
    /// both factors restricted to the box. Rows of `a` that are entirely zero
    /// are skipped via `live_rows`.
    fn convolve_at(&self, other: &Self, live_rows: &[bool], xi: FrequencyIndex) -> Complex64 {
        let n = self.n;
        let (o1, o2) = (xi.xi1, xi.xi2);
        let mut acc = ZERO;
        for s1 in (o1 - n).max(-n)..=(o1 + n).min(n) {
            if !live_rows[(s1 + n) as usize] {
                continue;
            }
            let lo = (o2 - n).max(-n);
            let hi = (o2 + n).min(n);
            let a_row = self.offset(s1, 0);
            let b_row = other.offset(o1 - s1, 0);
            for s2 in lo..=hi {
                let a = self.data[(a_row as i64 + s2) as usize];
                let b = other.data[(b_row as i64 + o2 - s2) as usize];
                acc += a * b;
            }
        }
        acc
    }

    fn live_rows(&self) -> Vec<bool> {
        self.data
            .chunks(self.side)
            .map(|row| row.iter().any(|v| *v != ZERO))
            .collect()
    }
}

/// Precomputed `α·ξ` over the box, plus the half-plane output list.
#[derive(Clone, Debug)]
pub struct Spectrum {
    n: i64,
    half: Vec<FrequencyIndex>,
    /// `α·ξ` on the half-plane list.
    dots: Vec<f64>,
}

impl Spectrum {
    pub fn new(basis: &FrequencyBasis, n: i64) -> Self {
        let half = ModeGrid::half_indices(n);
        let dots = half.iter().map(|&xi| basis.dot(xi)).collect();
        Self { n, half, dots }
    }

    pub fn half(&self) -> &[FrequencyIndex] {
        &self.half
    }

    /// `3i(α·ξ)(q ⋆ q)_ξ` on the half-plane list.
    fn quadratic(&self, q: &ModeGrid) -> Vec<Complex64> {
        let live = q.live_rows();
        exec::map_range(self.half.len(), |k| {
            let c = q.convolve_at(q, &live, self.half[k]);
            Complex64::new(0.0, 3.0 * self.dots[k]) * c
        })
    }

    /// Interaction-representation vector field at time `s`:
    /// `e^{−is d³} · 3id (q ⋆ q)` with `q = e^{is d³} û`.
    fn interaction_rhs(&self, s: f64, u: &[Complex64]) -> Vec<Complex64> {
        let phases: Vec<Complex64> = self
            .dots
            .iter()
            .map(|&d| Complex64::from_polar(1.0, s * d * d * d))
            .collect();
        let q: Vec<Complex64> = u.iter().zip(&phases).map(|(u, p)| u * p).collect();
        let grid = ModeGrid::from_half(self.n, &self.half, &q);
        self.quadratic(&grid)
            .into_iter()
            .zip(&phases)
            .map(|(v, p)| v * p.conj())
            .collect()
    }

    fn values(&self, field: &CoefficientField) -> Vec<Complex64> {
        self.half.iter().map(|&xi| field.get(xi)).collect()
    }

    fn field(&self, values: &[Complex64]) -> CoefficientField {
        ModeGrid::from_half(self.n, &self.half, values).to_field()
    }

    /// `e^{±it d³}` applied to half-plane values.
    fn rotate(&self, t: f64, values: &[Complex64]) -> Vec<Complex64> {
        values
            .iter()
            .zip(&self.dots)
            .map(|(v, &d)| v * Complex64::from_polar(1.0, t * d * d * d))
            .collect()
    }
}

/// `ξ ↦ 3i(α·ξ) Σ q̂_{ξ⁽¹⁾} q̂_{ξ⁽²⁾}` over decompositions inside the box,
/// truncated back to radius `N`. The origin output is discarded.
pub fn nonlinear_term(
    field: &CoefficientField,
    basis: &FrequencyBasis,
    n: i64,
) -> CoefficientField {
    let spec = Spectrum::new(basis, n);
    let grid = ModeGrid::from_field(field, n);
    spec.field(&spec.quadratic(&grid))
}

/// The interaction-representation vector field
/// `û'_ξ(s) = 3i(α·ξ) Σ e^{−3is(α·ξ)(α·ξ⁽¹⁾)(α·ξ⁽²⁾)} û_{ξ⁽¹⁾} û_{ξ⁽²⁾}` on the box.
pub fn interaction_derivative(
    u: &CoefficientField,
    s: f64,
    basis: &FrequencyBasis,
    n: i64,
) -> CoefficientField {
    let spec = Spectrum::new(basis, n);
    spec.field(&spec.interaction_rhs(s, &spec.values(u)))
}

fn axpy(y: &[Complex64], a: f64, x: &[Complex64]) -> Vec<Complex64> {
    y.iter().zip(x).map(|(y, x)| y + x * a).collect()
}

fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

/// Advances the interaction variable `û` from `t` to `t + h`.
fn advance(
    spec: &Spectrum,
    u: &[Complex64],
    t: f64,
    h: f64,
    config: &SolverConfig,
) -> Result<Vec<Complex64>> {
    if !config.nonlinearity {
        return Ok(u.to_vec());
    }
    match config.scheme {
        Scheme::ExponentialRk4 => {
            let k1 = spec.interaction_rhs(t, u);
            let k2 = spec.interaction_rhs(t + 0.5 * h, &axpy(u, 0.5 * h, &k1));
            let k3 = spec.interaction_rhs(t + 0.5 * h, &axpy(u, 0.5 * h, &k2));
            let k4 = spec.interaction_rhs(t + h, &axpy(u, h, &k3));
            Ok((0..u.len())
                .map(|i| u[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0))
                .collect())
        }
        Scheme::PicardFixedPoint => {
            // û(t+h) = û(t) + (h/2)[F(t, û(t)) + F(t+h, û(t+h))], Euler predictor
            let f0 = spec.interaction_rhs(t, u);
            let mut next = axpy(u, h, &f0);
            let mut residual = f64::INFINITY;
            for _ in 0..config.picard_max_iter {
                let f1 = spec.interaction_rhs(t + h, &next);
                let candidate: Vec<Complex64> = (0..u.len())
                    .map(|i| u[i] + (f0[i] + f1[i]) * (0.5 * h))
                    .collect();
                residual = max_abs_diff(&candidate, &next);
                next = candidate;
                if !residual.is_finite() {
                    break;
                }
                if residual < config.picard_tol {
                    return Ok(next);
                }
            }
            Err(Error::PicardDivergence {
                time: t + h,
                residual,
                iterations: config.picard_max_iter,
            })
        }
    }
}

/// One step of size `dt` (sign of `config.t_final`) from `state` at time `t`.
pub fn step(
    state: &CoefficientField,
    t: f64,
    config: &SolverConfig,
    basis: &FrequencyBasis,
) -> Result<CoefficientField> {
    config.validate()?;
    let h = if config.t_final < 0.0 {
        -config.dt
    } else {
        config.dt
    };
    let spec = Spectrum::new(basis, config.n);
    // the interaction variable is taken relative to t, so û(t) = q̂(t)
    let u = spec.values(state);
    let u1 = advance_relative(&spec, &u, t, h, config)?;
    Ok(spec.field(&spec.rotate(h, &u1)))
}

/// `advance` for an interaction variable anchored at `t` rather than `0`.
fn advance_relative(
    spec: &Spectrum,
    u: &[Complex64],
    t: f64,
    h: f64,
    config: &SolverConfig,
) -> Result<Vec<Complex64>> {
    advance(spec, u, 0.0, h, config).map_err(|e| match e {
        Error::PicardDivergence {
            residual,
            iterations,
            ..
        } => Error::PicardDivergence {
            time: t + h,
            residual,
            iterations,
        },
        other => other,
    })
}

/// Time-stamped states of one run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CoefficientField>,
    pub config: SolverConfig,
    pub basis: FrequencyBasis,
}

impl Trajectory {
    /// `û(t_k) = e^{−it_k(α·ξ)³} q̂(t_k)`.
    pub fn interaction_state(&self, k: usize) -> CoefficientField {
        crate::waves::airy_propagate(&self.states[k], -self.times[k], &self.basis)
    }

    pub fn final_state(&self) -> &CoefficientField {
        self.states.last().expect("trajectory is never empty")
    }
}

fn audit_symmetry(field: &CoefficientField) -> Result<()> {
    let residue = field.symmetry_defect();
    let threshold = SYMMETRY_AUDIT * field.magnitude();
    if residue > threshold {
        return Err(Error::SymmetryViolation { residue, threshold });
    }
    Ok(())
}

/// Integrates from `initial` over `config.times()`.
pub fn solve(
    initial: &CoefficientField,
    config: &SolverConfig,
    basis: &FrequencyBasis,
) -> Result<Trajectory> {
    config.validate()?;
    audit_symmetry(initial)?;
    let times = config.times();
    let spec = Spectrum::new(basis, config.n);
    let mut u = spec.values(initial);
    let mut states = Vec::with_capacity(times.len());
    states.push(spec.field(&u));
    for w in times.windows(2) {
        let (t, h) = (w[0], w[1] - w[0]);
        u = advance(&spec, &u, t, h, config)?;
        let state = spec.field(&spec.rotate(w[1], &u));
        audit_symmetry(&state)?;
        states.push(state);
    }
    Ok(Trajectory {
        times,
        states,
        config: *config,
        basis: *basis,
    })
}

#[derive(Serialize)]
struct TrajectoryHeader<'a> {
    config: &'a SolverConfig,
    basis: &'a FrequencyBasis,
    times: &'a [f64],
    files: Vec<String>,
}

/// Writes `trajectory.json` (config, basis, times, file list) and one
/// `state_<k>.csv` per time with half-plane records `xi1,xi2,re,im`.
pub fn write_trajectory(traj: &Trajectory, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let files: Vec<String> = (0..traj.states.len())
        .map(|k| format!("state_{k:05}.csv"))
        .collect();
    for (state, name) in traj.states.iter().zip(&files) {
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(name))?);
        write_field_csv(&mut w, state)?;
        w.flush()?;
    }
    let header = TrajectoryHeader {
        config: &traj.config,
        basis: &traj.basis,
        times: &traj.times,
        files,
    };
    std::fs::write(
        dir.join("trajectory.json"),
        crate::io::to_json_pretty(&header)?,
    )?;
    Ok(())
}

/// `xi1,xi2,re,im` rows over the canonical half-plane.
pub fn write_field_csv<W: Write>(mut w: W, field: &CoefficientField) -> Result<()> {
    writeln!(w, "xi1,xi2,re,im")?;
    for (xi, v) in field.half_entries() {
        writeln!(
            w,
            "{},{},{},{}",
            xi.xi1,
            xi.xi2,
            fmt_f64(v.re),
            fmt_f64(v.im)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waves::{airy_propagate, square_wave_both};

    fn pair_10() -> CoefficientField {
        CoefficientField::from_half(4, [(FrequencyIndex::new(1, 0), Complex64::new(1.0, 0.0))])
            .unwrap()
    }

    #[test]
    fn nonlinear_term_hand_convolution() {
        let b = FrequencyBasis::default();
        let out = nonlinear_term(&pair_10(), &b, 4);
        assert!((out.get(FrequencyIndex::new(2, 0)) - Complex64::new(0.0, 6.0)).norm() < 1e-14);
        assert_eq!(out.get(FrequencyIndex::new(1, 0)), ZERO);
        assert_eq!(
            out.get(FrequencyIndex::new(-2, 0)),
            Complex64::new(0.0, -6.0)
        );
        assert_eq!(out.len(), 2);
        assert!(nonlinear_term(&CoefficientField::empty(4), &b, 4).is_empty());
    }

    #[test]
    fn nonlinear_term_matches_pairwise_sum() {
        let b = FrequencyBasis::default();
        let f = CoefficientField::from_half(
            3,
            [
                (FrequencyIndex::new(1, -1), Complex64::new(0.3, 0.1)),
                (FrequencyIndex::new(0, 2), Complex64::new(-0.2, 0.4)),
                (FrequencyIndex::new(2, 1), Complex64::new(0.05, -0.3)),
            ],
        )
        .unwrap();
        let out = nonlinear_term(&f, &b, 3);
        let mut expected = std::collections::BTreeMap::new();
        for (a, va) in f.iter() {
            for (c, vc) in f.iter() {
                let s = a + c;
                if s.is_zero() || s.sup_norm() > 3 {
                    continue;
                }
                *expected.entry(s).or_insert(ZERO) += va * vc;
            }
        }
        for (xi, v) in &expected {
            let want = Complex64::new(0.0, 3.0 * b.dot(*xi)) * v;
            assert!((out.get(*xi) - want).norm() < 1e-15, "{xi}");
        }
        assert_eq!(out.len(), expected.values().filter(|v| **v != ZERO).count());
    }

    #[test]
    fn single_step_first_order_growth() {
        let b = FrequencyBasis::default();
        let cfg = SolverConfig {
            dt: 1e-4,
            n: 4,
            ..Default::default()
        };
        let s = step(&pair_10(), 0.0, &cfg, &b).unwrap();
        let a = s.get(FrequencyIndex::new(2, 0)).norm();
        assert!((a - 6.0e-4).abs() < 1e-6, "{a}");
        let z = step(&CoefficientField::empty(4), 0.0, &cfg, &b).unwrap();
        assert!(z.is_empty());
    }

    #[test]
    fn linear_runs_reduce_to_airy() {
        let b = FrequencyBasis::default();
        let init = square_wave_both(8).unwrap();
        let cfg = SolverConfig {
            n: 8,
            nonlinearity: false,
            ..Default::default()
        };
        let traj = solve(&init, &cfg, &b).unwrap();
        assert_eq!(traj.final_state(), &airy_propagate(&init, 0.01, &b));
        let one = step(&init, 0.0, &cfg, &b).unwrap();
        let want = airy_propagate(&init, 1e-4, &b);
        for (xi, v) in want.iter() {
            assert!((one.get(xi) - v).norm() < 1e-15);
        }
    }

    #[test]
    fn schemes_agree_and_zero_data_stays_zero() {
        let b = FrequencyBasis::default();
        let init = square_wave_both(6).unwrap();
        let rk = SolverConfig {
            n: 6,
            t_final: 0.002,
            ..Default::default()
        };
        let pc = SolverConfig {
            scheme: Scheme::PicardFixedPoint,
            ..rk
        };
        let a = solve(&init, &rk, &b).unwrap();
        let c = solve(&init, &pc, &b).unwrap();
        let diff = a.final_state().sub(c.final_state()).magnitude();
        // trapezoid is second order: O(dt²) against RK4
        assert!(diff < 1e-4, "{diff}");
        let z = solve(&CoefficientField::empty(6), &rk, &b).unwrap();
        assert!(z.states.iter().all(|s| s.is_empty()));
        assert_eq!(z.times.len(), 21);
    }

    #[test]
    fn picard_reports_divergence() {
        let b = FrequencyBasis::default();
        let init = square_wave_both(6).unwrap().scale(50.0);
        let cfg = SolverConfig {
            n: 6,
            dt: 0.05,
            t_final: 0.1,
            scheme: Scheme::PicardFixedPoint,
            picard_max_iter: 5,
            ..Default::default()
        };
        match solve(&init, &cfg, &b) {
            Err(Error::PicardDivergence { time, .. }) => assert!((time - 0.05).abs() < 1e-15),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn times_land_on_horizon() {
        let cfg = SolverConfig {
            dt: 0.3,
            t_final: -1.0,
            ..Default::default()
        };
        assert_eq!(
            cfg.times(),
            vec![0.0, -0.3, -0.6, -0.8999999999999999, -1.0]
        );
        let exact = SolverConfig::default().times();
        assert_eq!(exact.len(), 101);
        assert_eq!(*exact.last().unwrap(), 0.01);
    }

    #[test]
    fn backward_run_inverts_forward_run() {
        let b = FrequencyBasis::default();
        let init = square_wave_both(5).unwrap().scale(0.5);
        let fwd = SolverConfig {
            n: 5,
            t_final: 0.005,
            ..Default::default()
        };
        let end = solve(&init, &fwd, &b).unwrap().final_state().clone();
        let back = SolverConfig {
            t_final: -0.005,
            ..fwd
        };
        let recovered = solve(&end, &back, &b).unwrap();
        let err = recovered.final_state().sub(&init).magnitude();
        assert!(err < 1e-9, "{err}");
    }
}
