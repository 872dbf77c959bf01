//! Almost-periodicity diagnostics (Bohr ε-almost periods, Stepanov norms)
//! and Airy wave packets whose superposition concentrates `L²` mass in
//! finite time.
//!
//! A packet with initial transform
//! `exp{−it₀η³ − 3it₀η²(ξ−η) − 3it₀η(ξ−η)² − (ξ−η)²/2}` reaches
//! `φ̂(t₀, ξ; η) = exp{it₀(ξ−η)³ − (ξ−η)²/2}` at time `t₀`, so
//! `φ(t₀, x; η) = e^{iηx} P(x)` with the η-independent profile
//! `P(z) = (2π)^{−1/2} ∫ e^{izζ + it₀ζ³ − ζ²/2} dζ`. `P` is tabulated once
//! per `t₀` on `[−40, 40]` from the frequency window `|ζ| ≤ 10` and read
//! back by cubic Hermite interpolation.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::io::fmt_f64;
use crate::lattice::japanese_bracket;
use crate::quad::{simpson, simpson_weights};

/// Lower bound asserted for diagonal packet inner products.
pub const DIAGONAL_THRESHOLD: f64 = 0.5;

/// Frozen constant `C` in
/// `[1 + (x−3t₀η²)²/(1+t₀²η²)]·|φ(0,x;η)| ≤ C(1+t₀²η²)^{−1/4}`,
/// from [`calibrate_initial_envelope`] at `t₀ = 10⁻⁶` rounded up.
pub const INITIAL_ENVELOPE_C: f64 = 7.0;

/// Frozen constant `C` in `|⟨φ_{η',y'}, e^{−x²}φ_{η,y}⟩| ≤ C⟨y⟩⁻²⟨y'⟩⁻²⟨η−η'⟩⁻²`,
/// from [`calibrate_off_diagonal`] at `t₀ = 10⁻⁶` rounded up.
pub const OFF_DIAGONAL_C: f64 = 14.0;

/// Largest quadrature grid [`packet_inner_product`] will allocate.
pub const MAX_QUADRATURE_POINTS: usize = 1 << 24;

/// Half-width of the weighted inner-product window (`e^{−100}` beyond).
const WEIGHT_WINDOW: f64 = 10.0;

/// Largest inner-product spacing regardless of frequency.
const ENVELOPE_STEP: f64 = 1.0 / 16.0;

/// Profile table extent and spacing.
const TABLE_HALF_WIDTH: f64 = 40.0;
const TABLE_STEP: f64 = 0.01;

/// Frequency window and spacing for tabulating the profile.
const SPECTRAL_HALF_WIDTH: f64 = 10.0;
const SPECTRAL_STEP: f64 = 0.005;

/// Windowed test for `ε`-almost periods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmostPeriodQuery {
    pub epsilon: f64,
    /// `[x_min, x_max]` over which the sup is approximated.
    pub window: (f64, f64),
    /// Candidate shifts `ℓ`.
    pub shift_grid: Vec<f64>,
    /// Points on the main sampling lattice (at least `10⁴`).
    pub samples: usize,
}

impl AlmostPeriodQuery {
    /// Candidates `k·step` for `|k| ≤ count`.
    pub fn symmetric(
        epsilon: f64,
        window: (f64, f64),
        step: f64,
        count: i64,
        samples: usize,
    ) -> Self {
        Self {
            epsilon,
            window,
            shift_grid: (-count..=count).map(|k| k as f64 * step).collect(),
            samples,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.window.0 < self.window.1) {
            return Err(Error::InvalidParameter("empty scan window".into()));
        }
        if self.samples < 10_000 {
            return Err(Error::InvalidParameter(format!(
                "the sup needs at least 10^4 samples, got {}",
                self.samples
            )));
        }
        Ok(())
    }

    /// Spacing of the main lattice; a second lattice sits half a step over.
    pub fn step(&self) -> f64 {
        (self.window.1 - self.window.0) / (self.samples - 1) as f64
    }
}

/// Outcome of an almost-period scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmostPeriodReport {
    pub epsilon: f64,
    pub window: (f64, f64),
    pub step: f64,
    pub candidates: usize,
    pub accepted: Vec<f64>,
    /// Observed inclusion length: the largest gap between consecutive
    /// accepted shifts or between the scanned range's ends and the nearest
    /// accepted shift. `None` when nothing was accepted.
    pub inclusion_length: Option<f64>,
}

impl AlmostPeriodReport {
    /// True when every sub-interval of the scanned range of length
    /// `length` contains an accepted shift.
    pub fn relatively_dense(&self, length: f64) -> bool {
        self.inclusion_length.is_some_and(|g| g <= length)
    }
}

/// Accepts `ℓ` when `max |f(x+ℓ) − f(x)| < ε` over the sampled window.
///
/// The window is sampled on a lattice of `samples` points and on the same
/// lattice shifted by half a step, so that a jump mismatch narrower than
/// the step is still likely to be hit. When every candidate is a multiple
/// of the half-step, `f` is tabulated once on the union lattice.
pub fn almost_period_scan<F>(f: F, query: &AlmostPeriodQuery) -> Result<AlmostPeriodReport>
where
    F: Fn(f64) -> f64 + Sync,
{
    query.validate()?;
    let half = 0.5 * query.step();
    let x0 = query.window.0;
    let m = 2 * query.samples - 1;
    let offsets: Option<Vec<i64>> = query
        .shift_grid
        .iter()
        .map(|&l| {
            let k = (l / half).round();
            ((l / half - k).abs() < 1e-9 * (1.0 + k.abs())).then_some(k as i64)
        })
        .collect();
    let accept: Vec<bool> = match offsets {
        Some(offsets) => {
            let lo = offsets.iter().copied().min().unwrap_or(0).min(0);
            let hi = offsets.iter().copied().max().unwrap_or(0).max(0);
            let len = (hi - lo) as usize + m;
            let table = exec::map_range(len, |j| f(x0 + (j as i64 + lo) as f64 * half));
            let base = (-lo) as usize;
            exec::map_range(offsets.len(), |c| {
                let shift = (offsets[c] - lo) as usize;
                (0..m).all(|j| (table[shift + j] - table[base + j]).abs() < query.epsilon)
            })
        }
        None => exec::map_range(query.shift_grid.len(), |c| {
            let l = query.shift_grid[c];
            (0..m).all(|j| {
                let x = x0 + j as f64 * half;
                (f(x + l) - f(x)).abs() < query.epsilon
            })
        }),
    };
    let mut accepted: Vec<f64> = query
        .shift_grid
        .iter()
        .zip(&accept)
        .filter(|(_, &a)| a)
        .map(|(&l, _)| l)
        .collect();
    accepted.sort_by(|a, b| a.total_cmp(b));
    let lo = query
        .shift_grid
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = query
        .shift_grid
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let inclusion_length = match (accepted.first(), accepted.last()) {
        (Some(&first), Some(&last)) => Some(
            accepted
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold((first - lo).max(hi - last), f64::max),
        ),
        _ => None,
    };
    Ok(AlmostPeriodReport {
        epsilon: query.epsilon,
        window: query.window,
        step: query.step(),
        candidates: query.shift_grid.len(),
        accepted,
        inclusion_length,
    })
}

/// `(sup_y ∫_{−1}^{1} |f(x+y)|^p dx)^{1/p}` over `shift_grid`, Simpson on
/// `nodes` points.
pub fn stepanov_norm<F>(f: F, p: f64, shift_grid: &[f64], nodes: usize) -> Result<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "p must be finite and >= 1, got {p}"
        )));
    }
    if nodes < 3 || shift_grid.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least three nodes and one shift".into(),
        ));
    }
    let h = 2.0 / (nodes - 1) as f64;
    let w = simpson_weights(nodes, h);
    let integrals = exec::map_range(shift_grid.len(), |s| {
        let y = shift_grid[s];
        (0..nodes)
            .map(|j| w[j] * f(-1.0 + j as f64 * h + y).abs().powf(p))
            .sum::<f64>()
    });
    Ok(integrals.into_iter().fold(0.0, f64::max).powf(1.0 / p))
}

/// Parameters of the packet construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavePacketSpec {
    pub eta: f64,
    pub t0: f64,
    /// Dyadic scales `n = 1..=n_max` (frequencies `±2ⁿ`).
    pub n_max: u32,
    /// Translates `k2ⁿ` with `|k| ≤ k_max`.
    pub k_max: u32,
}

impl Default for WavePacketSpec {
    fn default() -> Self {
        Self {
            eta: 0.0,
            t0: 1e-6,
            n_max: 6,
            k_max: 1,
        }
    }
}

impl WavePacketSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0) || !self.t0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "t0 must be positive, got {}",
                self.t0
            )));
        }
        if self.n_max < 1 {
            return Err(Error::InvalidParameter("n_max must be >= 1".into()));
        }
        if self.n_max > 30 {
            return Err(Error::InvalidParameter(format!(
                "n_max = {} is beyond 2^30",
                self.n_max
            )));
        }
        Ok(())
    }

    pub fn with_eta(self, eta: f64) -> Self {
        Self { eta, ..self }
    }
}

/// `φ(0, x; η) = (1+6it₀η)^{−1/2} exp{−it₀η³ + iηx − (x−3t₀η²)²/(2(1+6it₀η))}`
/// with the principal square root.
pub fn wave_packet_initial(spec: &WavePacketSpec, x: f64) -> Complex64 {
    let (t0, eta) = (spec.t0, spec.eta);
    let a = Complex64::new(1.0, 6.0 * t0 * eta);
    let u = x - 3.0 * t0 * eta * eta;
    let phase = Complex64::new(0.0, -t0 * eta * eta * eta + eta * x);
    (phase - 0.5 * u * u / a).exp() / a.sqrt()
}

/// `φ̂(t₀, ξ; η) = exp{it₀(ξ−η)³ − (ξ−η)²/2}`.
pub fn wave_packet_evolved_hat(spec: &WavePacketSpec, xi: f64) -> Complex64 {
    let d = xi - spec.eta;
    Complex64::new(-0.5 * d * d, spec.t0 * d * d * d).exp()
}

/// Samples of `P` and `P'` on `z_j = −40 + j·0.01`.
struct ProfileTable {
    values: Vec<Complex64>,
    slopes: Vec<Complex64>,
}

impl ProfileTable {
    fn build(t0: f64) -> Result<Self> {
        let m = (2.0 * SPECTRAL_HALF_WIDTH / SPECTRAL_STEP).round() as usize + 1;
        let norm = 1.0 / (2.0 * PI).sqrt();
        let spectrum: Vec<(f64, Complex64)> = (0..m)
            .map(|j| {
                let z = -SPECTRAL_HALF_WIDTH + j as f64 * SPECTRAL_STEP;
                (z, Complex64::new(-0.5 * z * z, t0 * z * z * z).exp() * norm)
            })
            .collect();
        let w = simpson_weights(m, SPECTRAL_STEP);
        let n = (2.0 * TABLE_HALF_WIDTH / TABLE_STEP).round() as usize + 1;
        let pairs = exec::map_range(n, |i| {
            let x = -TABLE_HALF_WIDTH + i as f64 * TABLE_STEP;
            let mut p = Complex64::new(0.0, 0.0);
            let mut dp = Complex64::new(0.0, 0.0);
            for (j, &(z, s)) in spectrum.iter().enumerate() {
                let e = Complex64::from_polar(w[j], x * z) * s;
                p += e;
                dp += e * Complex64::new(0.0, z);
            }
            (p, dp)
        });
        let edge = pairs[0].0.norm().max(pairs[n - 1].0.norm());
        if edge > 1e-12 {
            return Err(Error::UnderResolved {
                required: n,
                limit: n,
            });
        }
        let (values, slopes) = pairs.into_iter().unzip();
        Ok(Self { values, slopes })
    }

    fn eval(&self, z: f64) -> Complex64 {
        let s = (z + TABLE_HALF_WIDTH) / TABLE_STEP;
        if !(s >= 0.0) || s >= (self.values.len() - 1) as f64 {
            return Complex64::new(0.0, 0.0);
        }
        let j = s.floor() as usize;
        let u = s - j as f64;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u),
            u * (1.0 - u) * (1.0 - u),
            u * u * (3.0 - 2.0 * u),
            u * u * (u - 1.0),
        );
        self.values[j] * h00
            + self.slopes[j] * (h10 * TABLE_STEP)
            + self.values[j + 1] * h01
            + self.slopes[j + 1] * (h11 * TABLE_STEP)
    }
}

fn profile(t0: f64) -> Result<Arc<ProfileTable>> {
    static CACHE: OnceLock<Mutex<Vec<(u64, Arc<ProfileTable>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let key = t0.to_bits();
    if let Some((_, t)) = cache
        .lock()
        .expect("profile cache poisoned")
        .iter()
        .find(|(k, _)| *k == key)
    {
        return Ok(t.clone());
    }
    let table = Arc::new(ProfileTable::build(t0)?);
    let mut guard = cache.lock().expect("profile cache poisoned");
    if let Some((_, t)) = guard.iter().find(|(k, _)| *k == key) {
        return Ok(t.clone());
    }
    guard.push((key, table.clone()));
    Ok(table)
}

/// `φ(t₀, x; η) = e^{iηx} P(x)`.
pub fn wave_packet_evolved(spec: &WavePacketSpec, x: f64) -> Result<Complex64> {
    spec.validate()?;
    Ok(Complex64::from_polar(1.0, spec.eta * x) * profile(spec.t0)?.eval(x))
}

/// Uniform grid on `[−10, 10]` resolving frequencies up to `max_eta` and
/// the unit-width envelope.
fn weight_grid(max_eta: f64) -> Result<(Vec<f64>, f64)> {
    let h_max = (PI / (4.0 * max_eta.abs() + 4.0)).min(ENVELOPE_STEP);
    let mut intervals = (2.0 * WEIGHT_WINDOW / h_max).ceil() as usize;
    intervals += intervals % 2;
    if intervals + 1 > MAX_QUADRATURE_POINTS {
        return Err(Error::UnderResolved {
            required: intervals + 1,
            limit: MAX_QUADRATURE_POINTS,
        });
    }
    let h = 2.0 * WEIGHT_WINDOW / intervals as f64;
    Ok((
        (0..=intervals)
            .map(|j| -WEIGHT_WINDOW + j as f64 * h)
            .collect(),
        h,
    ))
}

/// Samples of the evolved packet `φ(t₀, x − y; η)` on `grid`.
fn packet_samples(table: &ProfileTable, eta: f64, y: f64, grid: &[f64]) -> Vec<Complex64> {
    grid.iter()
        .map(|&x| Complex64::from_polar(1.0, eta * (x - y)) * table.eval(x - y))
        .collect()
}

/// `⟨φ(t₀, x−y₁; η₁), e^{−x²} φ(t₀, x−y₂; η₂)⟩`, antilinear in the first
/// slot, by Simpson's rule on `[−10, 10]` with spacing at most
/// `min(π/(4·max|η| + 4), 1/16)`.
pub fn packet_inner_product(
    spec: &WavePacketSpec,
    eta1: f64,
    y1: f64,
    eta2: f64,
    y2: f64,
) -> Result<Complex64> {
    spec.validate()?;
    let table = profile(spec.t0)?;
    let (grid, h) = weight_grid(eta1.abs().max(eta2.abs()))?;
    let a = packet_samples(&table, eta1, y1, &grid);
    let b = packet_samples(&table, eta2, y2, &grid);
    let f: Vec<Complex64> = (0..grid.len())
        .map(|j| a[j].conj() * b[j] * (-grid[j] * grid[j]).exp())
        .collect();
    Ok(simpson(&f, h))
}

/// One packet of the construction: scale `n`, translate `k2ⁿ`, sign of `±2ⁿ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketIndex {
    pub n: u32,
    pub k: i64,
    pub positive: bool,
}

impl PacketIndex {
    pub fn eta(&self) -> f64 {
        let e = (1u64 << self.n) as f64;
        if self.positive {
            e
        } else {
            -e
        }
    }

    pub fn shift(&self) -> f64 {
        self.k as f64 * (1u64 << self.n) as f64
    }
}

fn packets(spec: &WavePacketSpec) -> Vec<PacketIndex> {
    let k = spec.k_max as i64;
    let mut out = Vec::new();
    for n in 1..=spec.n_max {
        for k in -k..=k {
            for positive in [true, false] {
                out.push(PacketIndex { n, k, positive });
            }
        }
    }
    out
}

/// `∫|u(t₀)|²e^{−x²}` for the truncated construction, level by level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub t0: f64,
    pub k_max: u32,
    /// Entry `m` is the weighted mass with scales `1..=m+1`.
    pub partial_sums: Vec<f64>,
    pub diagonal: Vec<f64>,
    pub off_diagonal: Vec<f64>,
    /// `Σ_{a≠b} |⟨φ_a, e^{−x²}φ_b⟩|`.
    pub off_diagonal_abs: Vec<f64>,
    /// `Σ_{a≠b} C⟨y_a⟩⁻²⟨y_b⟩⁻²⟨η_a−η_b⟩⁻²` with the frozen `C`.
    pub off_diagonal_envelope: Vec<f64>,
    /// Smallest diagonal inner product among the untranslated (`k = 0`)
    /// packets; translates by `k2ⁿ ≠ 0` sit where the weight is small.
    pub min_centred_diagonal: f64,
    /// Number of packets per scale.
    pub packets_per_level: usize,
}

/// Weighted mass of `u(t₀) = Σ_{n ≤ n_max} Σ_{|k| ≤ k_max} Σ_± φ(t₀, x−k2ⁿ; ±2ⁿ)`
/// and its diagonal / off-diagonal split, for every truncation level.
pub fn concentration_diagnostic(spec: &WavePacketSpec) -> Result<ConcentrationReport> {
    spec.validate()?;
    let table = profile(spec.t0)?;
    let list = packets(spec);
    let (grid, h) = weight_grid((1u64 << spec.n_max) as f64)?;
    let weights = simpson_weights(grid.len(), h);
    let samples: Vec<Vec<Complex64>> = exec::map_range(list.len(), |a| {
        packet_samples(&table, list[a].eta(), list[a].shift(), &grid)
    });
    let m = list.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a..m).map(move |b| (a, b))).collect();
    let gram = exec::map_range(pairs.len(), |p| {
        let (a, b) = pairs[p];
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..grid.len() {
            acc += samples[a][j].conj() * samples[b][j] * (weights[j] * (-grid[j] * grid[j]).exp());
        }
        acc
    });
    let levels = spec.n_max as usize;
    let mut report = ConcentrationReport {
        t0: spec.t0,
        k_max: spec.k_max,
        partial_sums: vec![0.0; levels],
        diagonal: vec![0.0; levels],
        off_diagonal: vec![0.0; levels],
        off_diagonal_abs: vec![0.0; levels],
        off_diagonal_envelope: vec![0.0; levels],
        min_centred_diagonal: f64::INFINITY,
        packets_per_level: 2 * (2 * spec.k_max as usize + 1),
    };
    for (p, &(a, b)) in pairs.iter().enumerate() {
        let level = list[a].n.max(list[b].n) as usize - 1;
        let v = gram[p];
        if a == b {
            report.diagonal[level] += v.re;
            if list[a].k == 0 {
                report.min_centred_diagonal = report.min_centred_diagonal.min(v.re);
            }
        } else {
            let env = OFF_DIAGONAL_C
                / (japanese_bracket(list[a].shift()).powi(2)
                    * japanese_bracket(list[b].shift()).powi(2)
                    * japanese_bracket(list[a].eta() - list[b].eta()).powi(2));
            // each unordered pair stands for two conjugate terms
            report.off_diagonal[level] += 2.0 * v.re;
            report.off_diagonal_abs[level] += 2.0 * v.norm();
            report.off_diagonal_envelope[level] += 2.0 * env;
        }
    }
    for l in 1..levels {
        report.diagonal[l] += report.diagonal[l - 1];
        report.off_diagonal[l] += report.off_diagonal[l - 1];
        report.off_diagonal_abs[l] += report.off_diagonal_abs[l - 1];
        report.off_diagonal_envelope[l] += report.off_diagonal_envelope[l - 1];
    }
    for l in 0..levels {
        report.partial_sums[l] = report.diagonal[l] + report.off_diagonal[l];
    }
    Ok(report)
}

/// Writes `x,re,im,weighted_density` for `u(t₀)` on `[−10, 10]`.
pub fn write_concentration_csv<W: Write>(spec: &WavePacketSpec, mut w: W) -> Result<()> {
    spec.validate()?;
    let table = profile(spec.t0)?;
    let list = packets(spec);
    let (grid, _) = weight_grid((1u64 << spec.n_max) as f64)?;
    let u = exec::map_range(grid.len(), |j| {
        let x = grid[j];
        list.iter()
            .map(|p| {
                Complex64::from_polar(1.0, p.eta() * (x - p.shift())) * table.eval(x - p.shift())
            })
            .fold(Complex64::new(0.0, 0.0), |acc, v| acc + v)
    });
    writeln!(w, "x,re,im,weighted_density")?;
    for (x, v) in grid.iter().zip(&u) {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(*x),
            fmt_f64(v.re),
            fmt_f64(v.im),
            fmt_f64(v.norm_sqr() * (-x * x).exp())
        )?;
    }
    Ok(())
}

/// Sampled diagnostics of the `n`-th periodic layer
/// `Σ_k Σ_± φ(0, x − k2ⁿ; ±2ⁿ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerAudit {
    pub n: u32,
    pub sup_norm: f64,
    /// `sup_norm · 2^{n/2}`.
    pub ratio: f64,
    /// `max |layer(x + 2ⁿ) − layer(x)|` over the samples.
    pub period_defect: f64,
    /// Largest imaginary part of the layer over the samples.
    pub max_imaginary: f64,
}

/// Value of the `n`-th layer at `x`, summing every translate within
/// `40σ` of `x` (σ the packet width); the rest is below `e^{−800}`.
pub fn layer_value(spec: &WavePacketSpec, n: u32, x: f64) -> Complex64 {
    let period = (1u64 << n) as f64;
    let eta = period;
    let a = spec.t0 * eta;
    let sigma = (1.0 + 36.0 * a * a).sqrt();
    let centre = 3.0 * spec.t0 * eta * eta;
    let reach = 40.0 * sigma;
    let k_lo = ((x - centre - reach) / period).ceil() as i64;
    let k_hi = ((x - centre + reach) / period).floor() as i64;
    let plus = spec.with_eta(eta);
    let minus = spec.with_eta(-eta);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in k_lo..=k_hi {
        let z = x - k as f64 * period;
        acc += wave_packet_initial(&plus, z) + wave_packet_initial(&minus, z);
    }
    acc
}

/// Sup norm of the `n`-th layer sampled over one period around the packet
/// centre, at spacing `π/(8·2ⁿ)` (capped at `2²⁴` samples).
pub fn limit_periodic_audit(spec: &WavePacketSpec, n: u32) -> Result<LayerAudit> {
    spec.validate()?;
    if n < 1 || n > spec.n_max {
        return Err(Error::InvalidParameter(format!(
            "layer {n} is outside 1..={}",
            spec.n_max
        )));
    }
    let period = (1u64 << n) as f64;
    let a = spec.t0 * period;
    let sigma = (1.0 + 36.0 * a * a).sqrt();
    let centre = 3.0 * spec.t0 * period * period;
    let half = (0.5 * period).min(12.0 * sigma);
    let step = PI / (8.0 * period);
    let count = (2.0 * half / step).ceil() as usize + 1;
    if count > MAX_QUADRATURE_POINTS {
        return Err(Error::UnderResolved {
            required: count,
            limit: MAX_QUADRATURE_POINTS,
        });
    }
    let step = 2.0 * half / (count - 1) as f64;
    let stats = exec::map_range(count, |j| {
        let x = centre - half + j as f64 * step;
        let v = layer_value(spec, n, x);
        let shifted = layer_value(spec, n, x + period);
        (v.re.abs(), (shifted - v).norm(), v.im.abs())
    });
    let sup_norm = stats.iter().map(|s| s.0).fold(0.0, f64::max);
    Ok(LayerAudit {
        n,
        sup_norm,
        ratio: sup_norm * 2f64.powf(0.5 * n as f64),
        period_defect: stats.iter().map(|s| s.1).fold(0.0, f64::max),
        max_imaginary: stats.iter().map(|s| s.2).fold(0.0, f64::max),
    })
}

/// `sup_x [1 + (x−3t₀η²)²/(1+t₀²η²)]·|φ(0,x;η)|·(1+t₀²η²)^{1/4}`, sampled
/// on `|x − 3t₀η²| ≤ 12σ`.
pub fn initial_envelope_ratio(t0: f64, eta: f64) -> f64 {
    let spec = WavePacketSpec {
        eta,
        t0,
        ..WavePacketSpec::default()
    };
    let a2 = t0 * t0 * eta * eta;
    let sigma = (1.0 + 36.0 * a2).sqrt();
    let centre = 3.0 * t0 * eta * eta;
    let m = 4001;
    (0..m)
        .map(|j| {
            let u = -12.0 * sigma + 24.0 * sigma * j as f64 / (m - 1) as f64;
            (1.0 + u * u / (1.0 + a2))
                * wave_packet_initial(&spec, centre + u).norm()
                * (1.0 + a2).powf(0.25)
        })
        .fold(0.0, f64::max)
}

/// Largest [`initial_envelope_ratio`] over `η = ±2ⁿ`, `n ≤ 20`.
pub fn calibrate_initial_envelope(t0: f64) -> f64 {
    (0..=20)
        .flat_map(|n| [1.0, -1.0].map(|s| s * (1u64 << n) as f64))
        .map(|eta| initial_envelope_ratio(t0, eta))
        .fold(0.0, f64::max)
}

/// Off-diagonal calibration set: `η, η' ∈ {0, ±1, ±2, 4, 8}`,
/// `y, y' ∈ {0, ±½, ±1, ±2, ±3, ±4}`, excluding the diagonal.
pub fn off_diagonal_calibration_set() -> Vec<(f64, f64, f64, f64)> {
    let etas = [0.0, 1.0, -1.0, 2.0, -2.0, 4.0, 8.0];
    let ys = [0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0];
    let mut out = Vec::new();
    for &e1 in &etas {
        for &e2 in &etas {
            for &y1 in &ys {
                for &y2 in &ys {
                    if e1 != e2 || y1 != y2 {
                        out.push((e1, y1, e2, y2));
                    }
                }
            }
        }
    }
    out
}

/// Largest `|⟨φ_{η',y'}, e^{−x²}φ_{η,y}⟩|·⟨y⟩²⟨y'⟩²⟨η−η'⟩²` over the
/// calibration set.
pub fn calibrate_off_diagonal(t0: f64) -> Result<f64> {
    let spec = WavePacketSpec {
        t0,
        ..WavePacketSpec::default()
    };
    let set = off_diagonal_calibration_set();
    let ratios = exec::map_range(set.len(), |i| {
        let (e1, y1, e2, y2) = set[i];
        packet_inner_product(&spec, e1, y1, e2, y2).map(|v| {
            v.norm()
                * japanese_bracket(y1).powi(2)
                * japanese_bracket(y2).powi(2)
                * japanese_bracket(e1 - e2).powi(2)
        })
    });
    let mut best: f64 = 0.0;
    for r in ratios {
        best = best.max(r?);
    }
    Ok(best)
}
