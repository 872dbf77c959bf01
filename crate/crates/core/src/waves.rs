//! Square-wave data, the Airy propagator, physical-space evaluation of
//! lattice sums, and rational-time (Talbot) reconstruction.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::io::fmt_f64;
use crate::lattice::{CoefficientField, FrequencyBasis, FrequencyIndex};

/// Relative threshold for the imaginary residue in [`evaluate_field`].
pub const IMAGINARY_AUDIT: f64 = 1e-9;

/// Total width, in units of `2π/N`, of the window excluded around each jump
/// when a partial sum is compared with a piecewise-constant profile.
///
/// The Dirichlet tail of a unit-height jump decays like `2/(πNδ)` at
/// distance `δ`; with this width the envelope at the window edge is
/// `1/(20π²) ≈ 2.5e-3`.
pub const GIBBS_WINDOW: f64 = 80.0;

/// Ordered sample points inside a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialSampling {
    points: Vec<f64>,
    window: (f64, f64),
}

impl SpatialSampling {
    pub fn new(points: Vec<f64>, window: (f64, f64)) -> Result<Self> {
        if !(window.0 <= window.1) {
            return Err(Error::InvalidParameter(format!(
                "empty window [{}, {}]",
                window.0, window.1
            )));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter(
                "sample points must be strictly increasing".into(),
            ));
        }
        if points.iter().any(|&x| x < window.0 || x > window.1) {
            return Err(Error::InvalidParameter(
                "sample point outside window".into(),
            ));
        }
        Ok(Self { points, window })
    }

    /// `n` equispaced points `x_j = x_min + j·(x_max − x_min)/(n − 1)`.
    pub fn uniform(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < 2 || !(x_min < x_max) {
            return Err(Error::InvalidParameter(format!(
                "uniform sampling needs n >= 2 and x_min < x_max (got n = {n}, [{x_min}, {x_max}])"
            )));
        }
        let h = (x_max - x_min) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|j| x_min + j as f64 * h).collect();
        points[n - 1] = x_max;
        Self::new(points, (x_min, x_max))
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// The 2π-periodic square wave `sgn(sin x)`, zero at the jumps.
pub fn square_wave(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y == 0.0 || y == PI {
        0.0
    } else if y < PI {
        1.0
    } else {
        -1.0
    }
}

/// Fourier coefficients of `sq(α_c x)` on axis `component`, truncated
/// symmetrically to odd `|k| ≤ n`: `ξ = k e_c ↦ 2/(πik)`.
pub fn square_wave_coefficients(component: u8, n: i64) -> Result<CoefficientField> {
    if n < 1 {
        return Err(Error::InvalidParameter(format!("N must be >= 1, got {n}")));
    }
    let axis = |k: i64| match component {
        1 => Ok(FrequencyIndex::new(k, 0)),
        2 => Ok(FrequencyIndex::new(0, k)),
        _ => Err(Error::InvalidParameter(format!(
            "component must be 1 or 2, got {component}"
        ))),
    };
    let mut half = Vec::new();
    for k in (1..=n).step_by(2) {
        half.push((axis(k)?, Complex64::new(0.0, -2.0 / (PI * k as f64))));
    }
    CoefficientField::from_half(n, half)
}

/// Square-wave data on both axes, `sq(α₁x) + sq(α₂x)`, each truncated at `n`.
pub fn square_wave_both(n: i64) -> Result<CoefficientField> {
    Ok(square_wave_coefficients(1, n)?.add(&square_wave_coefficients(2, n)?))
}

/// Multiplies every amplitude by `e^{it(α·ξ)³}`.
pub fn airy_propagate(
    field: &CoefficientField,
    t: f64,
    basis: &FrequencyBasis,
) -> CoefficientField {
    if t == 0.0 {
        return field.clone();
    }
    field.map_entries(|xi, v| {
        let d = basis.dot(xi);
        v * Complex64::from_polar(1.0, t * d * d * d)
    })
}

/// Evaluates `Σ q̂_ξ e^{i(α·ξ)x}` at every sample point.
///
/// The full (non-symmetrized) sum is formed; its imaginary part is audited
/// against `1e-9·Σ|q̂_ξ|` and then dropped.
pub fn evaluate_field(
    field: &CoefficientField,
    basis: &FrequencyBasis,
    sampling: &SpatialSampling,
) -> Result<Vec<f64>> {
    let freqs: Vec<(f64, Complex64)> = field.iter().map(|(xi, v)| (basis.dot(xi), v)).collect();
    let threshold = IMAGINARY_AUDIT * field.magnitude();
    let points = sampling.points();
    let sums = exec::map_range(points.len(), |j| {
        let x = points[j];
        let mut acc = Complex64::new(0.0, 0.0);
        for &(d, v) in &freqs {
            let (s, c) = (d * x).sin_cos();
            acc += v * Complex64::new(c, s);
        }
        acc
    });
    let residue = sums.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if residue > threshold {
        return Err(Error::SymmetryViolation { residue, threshold });
    }
    Ok(sums.into_iter().map(|z| z.re).collect())
}

/// Multiplier weights for the rational time `α³t = 2πp/q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TalbotDecomposition {
    pub p: i64,
    pub q: i64,
    /// `d_k`, `k = 0, …, q−1`.
    pub weights: Vec<Complex64>,
    /// `2π/(q·α)`: the shift between consecutive translates in `x`.
    pub shift_step: f64,
}

impl TalbotDecomposition {
    /// `d_k = (1/q) Σ_{r mod q} e^{2πi p r³/q} e^{−2πi k r/q}`.
    pub fn new(p: i64, q: i64, alpha: f64) -> Result<Self> {
        if q < 1 || gcd(p, q) != 1 {
            return Err(Error::NotCoprime { p, q });
        }
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        let qq = q as i128;
        // phases are reduced exactly in integers before scaling by 2π/q
        let root = |m: i128| Complex64::from_polar(1.0, TAU * (m.rem_euclid(qq) as f64) / q as f64);
        let weights = (0..qq)
            .map(|k| {
                let s: Complex64 = (0..qq).map(|r| root(p as i128 * r * r * r - k * r)).sum();
                s / q as f64
            })
            .collect();
        Ok(Self {
            p,
            q,
            weights,
            shift_step: TAU / (q as f64 * alpha),
        })
    }

    /// `Σ_k |d_k|²` (one for every coprime pair).
    pub fn unitarity(&self) -> f64 {
        self.weights.iter().map(|d| d.norm_sqr()).sum()
    }

    /// Weights whose modulus exceeds `1e-12`.
    pub fn nonzero_weights(&self) -> usize {
        self.weights.iter().filter(|d| d.norm() > 1e-12).count()
    }

    /// `Σ_k d_k sq(αx + 2πk/q)`, real part.
    pub fn evaluate(&self, alpha: f64, x: f64) -> f64 {
        let q = self.q as f64;
        self.weights
            .iter()
            .enumerate()
            .map(|(k, d)| d.re * square_wave(alpha * x + TAU * k as f64 / q))
            .sum()
    }

    /// Jump locations of the reconstructed profile in `[a, b]`: the points
    /// `αx + 2πk/q ∈ πℤ` for `k` with a nonzero weight.
    pub fn jump_points(&self, alpha: f64, a: f64, b: f64) -> Vec<f64> {
        let q = self.q as f64;
        let mut out = Vec::new();
        for (k, d) in self.weights.iter().enumerate() {
            if d.norm() <= 1e-12 {
                continue;
            }
            let offset = TAU * k as f64 / q;
            let m0 = ((alpha * a + offset) / PI).floor() as i64 - 1;
            let m1 = ((alpha * b + offset) / PI).ceil() as i64 + 1;
            for m in m0..=m1 {
                let x = (m as f64 * PI - offset) / alpha;
                if x >= a && x <= b {
                    out.push(x);
                }
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        out
    }
}

/// Marks the sample points farther than `GIBBS_WINDOW·π/N` from every jump.
pub fn outside_gibbs_windows(jumps: &[f64], n: i64, sampling: &SpatialSampling) -> Vec<bool> {
    let half = 0.5 * GIBBS_WINDOW * TAU / n as f64;
    sampling
        .points()
        .iter()
        .map(|&x| jumps.iter().all(|&y| (x - y).abs() >= half))
        .collect()
}

/// Output of [`talbot_reconstruct`].
#[derive(Clone, Debug, PartialEq)]
pub struct TalbotReconstruction {
    pub decomposition: TalbotDecomposition,
    /// The piecewise-constant Gauss-sum profile.
    pub samples: Vec<f64>,
    /// The direct symmetric partial sum at the same time.
    pub direct: Vec<f64>,
    /// `t` with `α³t = 2πp/q`.
    pub time: f64,
}

impl TalbotReconstruction {
    /// `max |direct − samples|` over points outside the Gibbs windows.
    pub fn max_deviation_outside_jumps(
        &self,
        alpha: f64,
        n: i64,
        sampling: &SpatialSampling,
    ) -> f64 {
        let (a, b) = sampling.window();
        let margin = GIBBS_WINDOW * TAU / n as f64;
        let jumps = self
            .decomposition
            .jump_points(alpha, a - margin, b + margin);
        let keep = outside_gibbs_windows(&jumps, n, sampling);
        self.samples
            .iter()
            .zip(&self.direct)
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|((s, d), _)| (s - d).abs())
            .fold(0.0, f64::max)
    }
}

/// Reconstructs the Airy evolution of `sq(αx)` at `α³t = 2πp/q` as a
/// weighted sum of `q` translates, and evaluates the truncated series
/// (`|k| ≤ n`) at the same time for comparison.
pub fn talbot_reconstruct(
    p: i64,
    q: i64,
    alpha: f64,
    n: i64,
    sampling: &SpatialSampling,
) -> Result<TalbotReconstruction> {
    let decomposition = TalbotDecomposition::new(p, q, alpha)?;
    let time = TAU * p as f64 / (q as f64 * alpha.powi(3));
    let points = sampling.points();
    let samples = exec::map_range(points.len(), |j| decomposition.evaluate(alpha, points[j]));
    let basis = single_axis_basis(alpha)?;
    let field = airy_propagate(&square_wave_coefficients(1, n)?, time, &basis);
    let direct = evaluate_field(&field, &basis, sampling)?;
    Ok(TalbotReconstruction {
        decomposition,
        samples,
        direct,
        time,
    })
}

/// A basis whose first wavenumber is `alpha`; used for one-axis data, where
/// the second wavenumber never enters.
pub fn single_axis_basis(alpha: f64) -> Result<FrequencyBasis> {
    FrequencyBasis::new(alpha, alpha * std::f64::consts::SQRT_2, 2.0, None)
}

pub(crate) fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a as i64
}

/// Consecutive-sample increments of a profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpReport {
    pub max_increment: f64,
    pub increments: Vec<f64>,
}

/// `|f(x_{j+1}) − f(x_j)|` for consecutive samples, and their maximum.
pub fn jump_profile(samples: &[f64], sampling: &SpatialSampling) -> Result<JumpReport> {
    if samples.len() != sampling.len() {
        return Err(Error::GridMismatch);
    }
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(
            "jump profile needs at least two samples".into(),
        ));
    }
    let increments: Vec<f64> = samples.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let max_increment = increments.iter().copied().fold(0.0, f64::max);
    Ok(JumpReport {
        max_increment,
        increments,
    })
}

/// A time label for profile files: exact rational multiple of `2π` when
/// known.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeLabel {
    /// `α³t/2π = p/q`.
    Rational {
        p: i64,
        q: i64,
    },
    Real(f64),
}

/// `profile_t2pi_<p>over<q>_N<n>.csv`, or `profile_t_<t>_N<n>.csv`.
pub fn profile_filename(t: TimeLabel, n: i64) -> String {
    match t {
        TimeLabel::Rational { p, q } => format!("profile_t2pi_{p}over{q}_N{n}.csv"),
        TimeLabel::Real(t) => format!("profile_t_{}_N{n}.csv", fmt_f64(t)),
    }
}

/// Writes `x,value` rows.
pub fn write_profile_csv<W: Write>(
    mut w: W,
    sampling: &SpatialSampling,
    values: &[f64],
) -> Result<()> {
    if values.len() != sampling.len() {
        return Err(Error::GridMismatch);
    }
    writeln!(w, "x,value")?;
    for (x, v) in sampling.points().iter().zip(values) {
        writeln!(w, "{},{}", fmt_f64(*x), fmt_f64(*v))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn square_wave_coefficient_values() {
        let f = square_wave_coefficients(1, 5).unwrap();
        let v = f.get(FrequencyIndex::new(1, 0));
        assert_relative_eq!(v.im, -0.636_619_772_367_581_3, max_relative = 1e-15);
        assert_eq!(v.re, 0.0);
        assert_eq!(f.get(FrequencyIndex::new(2, 0)), Complex64::new(0.0, 0.0));
        let g = square_wave_coefficients(2, 5).unwrap();
        assert_relative_eq!(
            g.get(FrequencyIndex::new(0, 3)).im,
            -2.0 / (3.0 * PI),
            max_relative = 1e-15
        );
        assert_eq!(g.len(), 6);
        assert!(square_wave_coefficients(3, 5).is_err());
        assert!(square_wave_coefficients(1, 0).is_err());
    }

    #[test]
    fn airy_identity_and_full_period() {
        let b = FrequencyBasis::default();
        let f = square_wave_both(9).unwrap();
        assert_eq!(airy_propagate(&f, 0.0, &b), f);
        let single = CoefficientField::from_half(
            1,
            [(FrequencyIndex::new(1, 0), Complex64::new(0.3, -0.2))],
        )
        .unwrap();
        let g = airy_propagate(&single, TAU, &b);
        assert!((g.get(FrequencyIndex::new(1, 0)) - Complex64::new(0.3, -0.2)).norm() < 1e-15);
    }

    #[test]
    fn evaluate_sine_and_empty() {
        let b = FrequencyBasis::default();
        let f = CoefficientField::from_half(
            1,
            [(FrequencyIndex::new(1, 0), Complex64::new(0.0, -0.5))],
        )
        .unwrap();
        let s = SpatialSampling::uniform(-3.0, 3.0, 61).unwrap();
        let v = evaluate_field(&f, &b, &s).unwrap();
        for (x, y) in s.points().iter().zip(&v) {
            assert!((y - x.sin()).abs() < 1e-15);
        }
        let z = evaluate_field(&CoefficientField::empty(1), &b, &s).unwrap();
        assert!(z.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn evaluate_rejects_asymmetric_data() {
        let b = FrequencyBasis::default();
        let f = CoefficientField::from_sorted_unchecked(
            1,
            vec![(FrequencyIndex::new(1, 0), Complex64::new(1.0, 0.0))],
        );
        let s = SpatialSampling::uniform(0.1, 1.0, 5).unwrap();
        assert!(matches!(
            evaluate_field(&f, &b, &s),
            Err(Error::SymmetryViolation { .. })
        ));
    }

    #[test]
    fn square_wave_partial_sum_at_quarter_period() {
        let b = FrequencyBasis::default();
        let f = square_wave_coefficients(1, 2001).unwrap();
        let s = SpatialSampling::new(vec![PI / 2.0], (0.0, PI)).unwrap();
        let v = evaluate_field(&f, &b, &s).unwrap();
        assert!((v[0] - 1.0).abs() < 2e-3, "{}", v[0]);
    }

    #[test]
    fn talbot_trivial_and_half_period() {
        let d0 = TalbotDecomposition::new(0, 1, 1.0).unwrap();
        assert_eq!(d0.weights, vec![Complex64::new(1.0, 0.0)]);
        let d = TalbotDecomposition::new(1, 2, 1.0).unwrap();
        // d_0 = (1 + e^{iπ})/2 = 0, d_1 = (1 − e^{iπ}·e^{−iπ}... ) = 1
        assert!(d.weights[0].norm() < 1e-15);
        assert!((d.weights[1] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        for x in [0.3, 1.0, 2.5, 4.0] {
            assert_eq!(d.evaluate(1.0, x), -square_wave(x));
        }
        assert!(matches!(
            TalbotDecomposition::new(2, 4, 1.0),
            Err(Error::NotCoprime { .. })
        ));
        assert!(matches!(
            TalbotDecomposition::new(1, 0, 1.0),
            Err(Error::NotCoprime { .. })
        ));
    }

    #[test]
    fn talbot_weights_are_unitary() {
        for (p, q) in [(1, 3), (2, 5), (3, 7), (5, 12), (-1, 9), (7, 30)] {
            let d = TalbotDecomposition::new(p, q, 1.0).unwrap();
            assert!((d.unitarity() - 1.0).abs() < 1e-10, "{p}/{q}");
            assert!(d.nonzero_weights() <= q as usize);
        }
    }

    #[test]
    fn jump_profile_examples() {
        let s = SpatialSampling::uniform(-0.5, 0.5, 11).unwrap();
        let flat = jump_profile(&[2.0; 11], &s).unwrap();
        assert_eq!(flat.max_increment, 0.0);
        let sq: Vec<f64> = s.points().iter().map(|&x| square_wave(x)).collect();
        let r = jump_profile(&sq, &s).unwrap();
        // the grid hits x = 0 exactly, where sq = 0, so the jump is split
        assert_eq!(r.max_increment, 1.0);
        let s2 = SpatialSampling::uniform(-0.55, 0.45, 11).unwrap();
        let sq2: Vec<f64> = s2.points().iter().map(|&x| square_wave(x)).collect();
        assert_eq!(jump_profile(&sq2, &s2).unwrap().max_increment, 2.0);
    }

    #[test]
    fn profile_filenames() {
        assert_eq!(
            profile_filename(TimeLabel::Rational { p: 1, q: 2 }, 2001),
            "profile_t2pi_1over2_N2001.csv"
        );
    }
}
