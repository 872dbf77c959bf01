//! Green's functions of `−∂ₓ² + q + κ²` for bounded `q`, computed from the
//! Neumann series `G = Σ_ℓ (−1)^ℓ (G₀q)^ℓ G₀`, and numerical checks of the
//! identities satisfied by the diagonal `g(x) = G(x, x)`.
//!
//! # Engine
//!
//! For a fixed source `y` the terms `T_ℓ(·, y)` obey
//! `T_{ℓ+1}(x) = ∫ G₀(x, z) q(z) T_ℓ(z) dz`. The free kernel
//! `e^{−κ|x−z|}/2κ` is semiseparable, so each pass is two cumulative
//! exponential recursions over the grid (`O(n)` per source and term).
//! Interval integrals use product integration: a local cubic interpolant of
//! `q·T_ℓ` against the exact exponential weight. Interpolation stencils never
//! straddle the source node, where `T_ℓ` has a kink.
//!
//! Potentials are sampled on a uniform grid over `[−L, L]`. By default they
//! vanish outside the window, which makes all integrals finite-range and
//! exact up to quadrature. A potential flagged [`Extension::Truncated`] is
//! only known on the window; its results carry an extra envelope
//! `e^{−κ(L−max(|x|,|y|))/2}` in their error budget.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::io::fmt_f64;
use crate::quad::simpson;

/// How a sampled potential continues outside its window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extension {
    /// Identically zero outside `[−L, L]`.
    Zero,
    /// Unknown outside the window (e.g. a constant potential on `ℝ`).
    Truncated,
}

/// A real bounded potential on the uniform grid `x_i = −L + i·h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledPotential {
    half_width: f64,
    h: f64,
    values: Vec<f64>,
    sup_norm: f64,
    extension: Extension,
}

impl SampledPotential {
    /// `values[i]` sits at `−L + i·h`; the grid must close exactly at `L`.
    pub fn new(
        half_width: f64,
        h: f64,
        values: Vec<f64>,
        sup_norm: f64,
        extension: Extension,
    ) -> Result<Self> {
        if !(half_width > 0.0) || !(h > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need L > 0 and h > 0 (L = {half_width}, h = {h})"
            )));
        }
        let intervals = 2.0 * half_width / h;
        if (intervals - intervals.round()).abs() > 1e-9 * intervals
            || values.len() != intervals.round() as usize + 1
        {
            return Err(Error::InvalidParameter(format!(
                "{} samples do not tile [-{half_width}, {half_width}] with spacing {h}",
                values.len()
            )));
        }
        if values.len() < 5 {
            return Err(Error::InvalidParameter(
                "grid needs at least five nodes".into(),
            ));
        }
        let observed = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if !(observed <= sup_norm) || !sup_norm.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "declared sup norm {sup_norm} is below max |q| = {observed}"
            )));
        }
        Ok(Self {
            half_width,
            h,
            values,
            sup_norm,
            extension,
        })
    }

    /// Samples `f` on `[−L, L]` with spacing `h` (rounded so the grid closes);
    /// the declared sup norm is the sampled maximum.
    pub fn from_fn<F: Fn(f64) -> f64>(half_width: f64, h: f64, f: F) -> Result<Self> {
        let intervals = (2.0 * half_width / h).round().max(4.0) as usize;
        let h = 2.0 * half_width / intervals as f64;
        let values: Vec<f64> = (0..=intervals)
            .map(|i| f(-half_width + i as f64 * h))
            .collect();
        let sup = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        Self::new(half_width, h, values, sup, Extension::Zero)
    }

    /// `q ≡ c` on all of `ℝ`, seen through the window.
    pub fn constant(c: f64, half_width: f64, h: f64) -> Result<Self> {
        let mut p = Self::from_fn(half_width, h, |_| c)?;
        p.extension = Extension::Truncated;
        Ok(p)
    }

    pub fn with_sup_norm(mut self, sup_norm: f64) -> Result<Self> {
        let observed = self.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if !(observed <= sup_norm) {
            return Err(Error::InvalidParameter(format!(
                "declared sup norm {sup_norm} is below max |q| = {observed}"
            )));
        }
        self.sup_norm = sup_norm;
        Ok(self)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    /// Index of the node at `x`, if `x` is one.
    pub fn node_index(&self, x: f64) -> Result<usize> {
        let s = (x + self.half_width) / self.h;
        let i = s.round();
        if (s - i).abs() > 1e-9 || i < 0.0 || i as usize >= self.len() {
            return Err(Error::NotOnGrid { x });
        }
        Ok(i as usize)
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.len() == other.len() && self.h == other.h && self.half_width == other.half_width
    }

    /// `q'` by fourth-order central differences; samples beyond the window
    /// are zero for [`Extension::Zero`] and one-sided stencils are used
    /// otherwise.
    pub fn derivative(&self) -> Vec<f64> {
        match self.extension {
            Extension::Zero => {
                let n = self.len() as isize;
                let at = |i: isize| {
                    if i < 0 || i >= n {
                        0.0
                    } else {
                        self.values[i as usize]
                    }
                };
                (0..n)
                    .map(|i| {
                        (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2))
                            / (12.0 * self.h)
                    })
                    .collect()
            }
            Extension::Truncated => fd::first(&self.values, self.h),
        }
    }
}

/// `G₀(x, y) = e^{−κ|x−y|}/(2κ)`.
pub fn free_kernel(x: f64, y: f64, kappa: f64) -> f64 {
    (-kappa * (x - y).abs()).exp() / (2.0 * kappa)
}

/// Finite-difference stencils on uniform samples. Outputs are computed
/// wherever the stencil fits and padded by one-sided formulas otherwise.
pub mod fd {
    /// Fourth-order first derivative.
    pub fn first(f: &[f64], h: f64) -> Vec<f64> {
        let n = f.len();
        (0..n)
            .map(|i| {
                if i >= 2 && i + 2 < n {
                    (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h)
                } else if i + 4 < n {
                    (-25.0 * f[i] + 48.0 * f[i + 1] - 36.0 * f[i + 2] + 16.0 * f[i + 3]
                        - 3.0 * f[i + 4])
                        / (12.0 * h)
                } else {
                    (25.0 * f[i] - 48.0 * f[i - 1] + 36.0 * f[i - 2] - 16.0 * f[i - 3]
                        + 3.0 * f[i - 4])
                        / (12.0 * h)
                }
            })
            .collect()
    }

    /// Fourth-order second derivative at interior node `i` (needs `i ± 2`).
    pub fn second_at(f: &[f64], i: usize, h: f64) -> f64 {
        (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / (12.0 * h * h)
    }

    /// Fourth-order third derivative at interior node `i` (needs `i ± 3`).
    pub fn third_at(f: &[f64], i: usize, h: f64) -> f64 {
        (f[i - 3] - 8.0 * f[i - 2] + 13.0 * f[i - 1] - 13.0 * f[i + 1] + 8.0 * f[i + 2] - f[i + 3])
            / (8.0 * h * h * h)
    }

    /// Sixth-order first derivative of `f` at `x` with step `h`.
    pub fn first_6<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
        let c = [3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
        let mut s = 0.0;
        for (k, ck) in c.iter().enumerate() {
            let d = (k + 1) as f64 * h;
            s += ck * (f(x + d) - f(x - d));
        }
        s / h
    }

    /// Sixth-order third derivative of `f` at `x` with step `h`.
    pub fn third_6<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
        let c = [-61.0 / 30.0, 169.0 / 120.0, -3.0 / 10.0, 7.0 / 240.0];
        let mut s = 0.0;
        for (k, ck) in c.iter().enumerate() {
            let d = (k + 1) as f64 * h;
            s += ck * (f(x + d) - f(x - d));
        }
        s / (h * h * h)
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` (Newton on `P_m`).
fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let mut x = (PI * (k as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=m {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Product-integration weights for one interval `[x_i, x_i + h]` and one
/// interpolation stencil.
#[derive(Clone, Debug)]
struct Stencil {
    /// Node offsets relative to `i`.
    offsets: Vec<isize>,
    /// `∫₀ʰ e^{−κ(h−s)} ℓ_k(s) ds`.
    left: Vec<f64>,
    /// `∫₀ʰ e^{−κs} ℓ_k(s) ds`.
    right: Vec<f64>,
}

impl Stencil {
    fn new(offsets: Vec<isize>, kappa: f64, h: f64, rule: &[(f64, f64)]) -> Self {
        let nodes: Vec<f64> = offsets.iter().map(|&o| o as f64 * h).collect();
        let lagrange = |k: usize, s: f64| {
            nodes
                .iter()
                .enumerate()
                .filter(|(m, _)| *m != k)
                .map(|(_, &sm)| (s - sm) / (nodes[k] - sm))
                .product::<f64>()
        };
        let mut left = vec![0.0; nodes.len()];
        let mut right = vec![0.0; nodes.len()];
        for &(u, w) in rule {
            let s = 0.5 * h * (u + 1.0);
            let w = 0.5 * h * w;
            for k in 0..nodes.len() {
                let l = lagrange(k, s);
                left[k] += w * (-kappa * (h - s)).exp() * l;
                right[k] += w * (-kappa * s).exp() * l;
            }
        }
        Self {
            offsets,
            left,
            right,
        }
    }
}

/// Nodes per interpolation stencil (quintic).
const STENCIL_NODES: usize = 6;

/// Stencils of every width `2..=STENCIL_NODES` and every placement that
/// covers the interval `[0, 1]`.
#[derive(Clone, Debug)]
struct StencilTable {
    stencils: Vec<Stencil>,
}

impl StencilTable {
    fn new(kappa: f64, h: f64) -> Self {
        let rule = gauss_legendre(16);
        let mut stencils = Vec::new();
        for w in 2..=STENCIL_NODES {
            for back in 0..w - 1 {
                let start = -(back as isize);
                let offsets = (start..start + w as isize).collect();
                stencils.push(Stencil::new(offsets, kappa, h, &rule));
            }
        }
        Self { stencils }
    }

    fn index(w: usize, back: usize) -> usize {
        // widths below `w` contribute 1 + 2 + … + (w − 2) entries
        (w - 1) * (w - 2) / 2 + back
    }

    /// Stencil for interval `[i, i+1]` inside the smooth piece `[lo, hi]`:
    /// as wide as the piece allows and as centred as possible.
    fn choose(i: usize, lo: usize, hi: usize) -> usize {
        let w = STENCIL_NODES.min(hi - lo + 1);
        let centred = i.saturating_sub(w / 2 - 1);
        let start = centred.clamp(lo, hi + 1 - w);
        Self::index(w, i - start)
    }
}

/// Number of series terms `m` (orders `0..m`) whose analytic tail
/// `(1/4κ)·r^m/(1−r)·decay` is below `tol`, with `r = 2‖q‖/κ²`.
fn terms_for(ratio: f64, kappa: f64, decay: f64, tol: f64) -> (usize, f64) {
    let tail = |m: usize| decay * ratio.powi(m as i32) / ((1.0 - ratio) * 4.0 * kappa);
    let mut m = 1;
    while tail(m) >= tol && m < 10_000 {
        m += 1;
    }
    (m, tail(m))
}

fn check_hypothesis(pot: &SampledPotential, kappa: f64) -> Result<()> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    if kappa * kappa < 4.0 * pot.sup_norm {
        return Err(Error::HypothesisViolated {
            kappa_sq: kappa * kappa,
            required: 4.0 * pot.sup_norm,
        });
    }
    Ok(())
}

/// One source column `G(x_i, y_j)` of the Green's function.
#[derive(Clone, Debug)]
pub struct Column {
    pub j: usize,
    /// `G(x_i, y_j)` for every node `i`.
    pub values: Vec<f64>,
    /// `g'(y_j)` from the differentiated series.
    pub g_prime: f64,
    /// `|T_{m−1}(y_j, y_j)|`, the last term included.
    pub last_term: f64,
}

impl Column {
    pub fn g(&self) -> f64 {
        self.values[self.j]
    }
}

/// Series evaluator for one potential and spectral parameter.
#[derive(Clone, Debug)]
pub struct GreensEngine<'a> {
    pot: &'a SampledPotential,
    kappa: f64,
    terms: usize,
    ratio: f64,
    table: StencilTable,
    /// Weights against `e^{−2κ|x−y|}`, for `∫ G² φ`.
    square_table: StencilTable,
}

impl<'a> GreensEngine<'a> {
    /// Chooses the number of terms so the diagonal tail is below `tol`.
    pub fn new(pot: &'a SampledPotential, kappa: f64, tol: f64) -> Result<Self> {
        check_hypothesis(pot, kappa)?;
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {tol}"
            )));
        }
        let ratio = 2.0 * pot.sup_norm / (kappa * kappa);
        let (terms, _) = terms_for(ratio, kappa, 1.0, tol);
        Ok(Self::with_terms(pot, kappa, terms))
    }

    /// Uses exactly `terms` series terms (orders `0..terms`).
    pub fn with_terms(pot: &'a SampledPotential, kappa: f64, terms: usize) -> Self {
        Self {
            pot,
            kappa,
            terms: terms.max(1),
            ratio: 2.0 * pot.sup_norm / (kappa * kappa),
            table: StencilTable::new(kappa, pot.h),
            square_table: StencilTable::new(2.0 * kappa, pot.h),
        }
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    /// Analytic bound on the omitted terms of `G(x, y)` at `|x−y| = dist`.
    pub fn tail_bound(&self, dist: f64) -> f64 {
        (-0.5 * self.kappa * dist).exp() * self.ratio.powi(self.terms as i32)
            / ((1.0 - self.ratio) * 4.0 * self.kappa)
    }

    /// Analytic bound on the omitted terms of `g'`.
    pub fn derivative_tail_bound(&self) -> f64 {
        0.5 * self.ratio.powi(self.terms as i32) / (1.0 - self.ratio)
    }

    /// Extra error allowance at `(x, y)` for a truncated potential.
    pub fn truncation_envelope(&self, x: f64, y: f64) -> f64 {
        match self.pot.extension {
            Extension::Zero => 0.0,
            Extension::Truncated => {
                (-0.5 * self.kappa * (self.pot.half_width - x.abs().max(y.abs()))).exp()
            }
        }
    }

    /// Sums the series for the source node `j`.
    pub fn column(&self, j: usize) -> Column {
        let pot = self.pot;
        let n = pot.len();
        let kappa = self.kappa;
        let decay = (-kappa * pot.h).exp();
        let y = pot.x(j);
        let choice: Vec<usize> = (0..n - 1)
            .map(|i| {
                let (lo, hi) = if i < j { (0, j) } else { (j, n - 1) };
                StencilTable::choose(i, lo, hi)
            })
            .collect();
        let mut t: Vec<f64> = (0..n).map(|i| free_kernel(pot.x(i), y, kappa)).collect();
        let mut total = t.clone();
        let mut g_prime = 0.0;
        let mut last_term = t[j];
        let mut f = vec![0.0; n];
        let mut left = vec![0.0; n];
        let mut right = vec![0.0; n];
        for l in 1..self.terms {
            for i in 0..n {
                f[i] = pot.values[i] * t[i];
            }
            left[0] = 0.0;
            for i in 0..n - 1 {
                let s = &self.table.stencils[choice[i]];
                let mut acc = 0.0;
                for (o, w) in s.offsets.iter().zip(&s.left) {
                    acc += w * f[(i as isize + o) as usize];
                }
                left[i + 1] = decay * left[i] + acc;
            }
            right[n - 1] = 0.0;
            for i in (0..n - 1).rev() {
                let s = &self.table.stencils[choice[i]];
                let mut acc = 0.0;
                for (o, w) in s.offsets.iter().zip(&s.right) {
                    acc += w * f[(i as isize + o) as usize];
                }
                right[i] = decay * right[i + 1] + acc;
            }
            let sign = if l % 2 == 1 { -1.0 } else { 1.0 };
            for i in 0..n {
                t[i] = (left[i] + right[i]) / (2.0 * kappa);
                total[i] += sign * t[i];
            }
            g_prime += sign * (right[j] - left[j]);
            last_term = t[j].abs();
        }
        Column {
            j,
            values: total,
            g_prime,
            last_term,
        }
    }

    /// `∫ G(y, y_j)² φ(y) dy` over the window: product integration of the
    /// smooth factor `G² e^{2κ|y−y_j|} φ` against `e^{−2κ|y−y_j|}`, on each
    /// side of the kink separately.
    pub fn square_integral(&self, c: &Column, phi: &[f64]) -> f64 {
        let n = self.pot.len();
        let (h, j) = (self.pot.h, c.j);
        let rate = 2.0 * self.kappa;
        let mut total = 0.0;
        for i in 0..n - 1 {
            let (lo, hi) = if i < j { (0, j) } else { (j, n - 1) };
            let s = &self.square_table.stencils[StencilTable::choose(i, lo, hi)];
            // weights carry e^{−2κ|y−y_b|} from the interval end y_b nearest
            // y_j; the remaining factor e^{−2κ|y_b−y_j|} cancels against the
            // smooth factor, leaving e^{2κ(|y_m−y_j|−|y_b−y_j|)}
            let (weights, base, side) = if i < j {
                (&s.left, i + 1, -1.0)
            } else {
                (&s.right, i, 1.0)
            };
            for (o, w) in s.offsets.iter().zip(weights) {
                let m = (i as isize + o) as usize;
                let shift = side * (m as f64 - base as f64) * h;
                total += w * c.values[m] * c.values[m] * phi[m] * (rate * shift).exp();
            }
        }
        total
    }

    /// Runs `f` on every source column (in parallel when enabled); results
    /// are returned in node order.
    pub fn sweep<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&Column) -> T + Sync + Send,
    {
        exec::map_range(self.pot.len(), |j| f(&self.column(j)))
    }
}

/// A certified series value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeumannValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

/// `G(x, y)` at grid nodes by the Neumann series, stopped when the analytic
/// tail `(1/4κ) Σ_{m>ℓ} (2‖q‖/κ²)^m e^{−κ|x−y|/2}` drops below `tol`.
pub fn neumann_green(
    pot: &SampledPotential,
    kappa: f64,
    x: f64,
    y: f64,
    tol: f64,
) -> Result<NeumannValue> {
    check_hypothesis(pot, kappa)?;
    let i = pot.node_index(x)?;
    let j = pot.node_index(y)?;
    if pot.extension == Extension::Truncated {
        let envelope = (-0.5 * kappa * (pot.half_width - x.abs().max(y.abs()))).exp();
        if envelope > tol {
            return Err(Error::DomainTooSmall { envelope, tol });
        }
    }
    let ratio = 2.0 * pot.sup_norm / (kappa * kappa);
    let (terms, tail) = terms_for(ratio, kappa, (-0.5 * kappa * (x - y).abs()).exp(), tol);
    let engine = GreensEngine::with_terms(pot, kappa, terms);
    Ok(NeumannValue {
        value: engine.column(j).values[i],
        tail_bound: tail,
        terms,
    })
}

/// Pointwise slack in the bounds every [`GreensField`] must satisfy; all
/// entries are nonnegative for a valid field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreensAudit {
    /// `min (g − tail) − 1/(4κ)`.
    pub lower_slack: f64,
    /// `3/(4κ) − max (g + tail)`.
    pub upper_slack: f64,
    /// `1/2 − max (|g'| + tail')`.
    pub derivative_slack: f64,
    /// `min (3/(4κ))e^{−κ|x−y|/2} − |G(x,y)| − tail` over all node pairs.
    pub kernel_slack: f64,
    /// `max |g'_series − g'_differences|` over interior nodes.
    pub derivative_crosscheck: f64,
}

impl GreensAudit {
    pub fn min_slack(&self) -> f64 {
        self.lower_slack
            .min(self.upper_slack)
            .min(self.derivative_slack)
            .min(self.kernel_slack)
    }
}

/// Diagonal Green's function on the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreensField {
    pub kappa: f64,
    pub half_width: f64,
    pub h: f64,
    pub g: Vec<f64>,
    pub g_prime: Vec<f64>,
    pub series_terms_used: usize,
    /// Series tail bound for `g` (uniform in `x`).
    pub tail_bound: f64,
    /// Series tail bound for `g'`.
    pub derivative_tail_bound: f64,
    /// Per-node budget: series tail plus any truncation envelope.
    pub tail_bounds: Vec<f64>,
    pub audit: GreensAudit,
}

impl GreensField {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.len() == other.len()
            && self.h == other.h
            && self.half_width == other.half_width
            && self.kappa == other.kappa
    }

    /// `x,g,g_prime,tail_bound` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,g,g_prime,tail_bound")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(self.x(i)),
                fmt_f64(self.g[i]),
                fmt_f64(self.g_prime[i]),
                fmt_f64(self.tail_bounds[i])
            )?;
        }
        Ok(())
    }
}

struct ColumnSummary {
    g: f64,
    g_prime: f64,
    kernel_slack: f64,
    forcing: f64,
}

fn build_field(
    pot: &SampledPotential,
    kappa: f64,
    tol: f64,
    forcing: Option<&[f64]>,
) -> Result<(GreensField, Vec<f64>)> {
    let engine = GreensEngine::new(pot, kappa, tol)?;
    if let Some(f) = forcing {
        if f.len() != pot.len() {
            return Err(Error::GridMismatch);
        }
    }
    let h = pot.h;
    let summaries = engine.sweep(|c| {
        let y = pot.x(c.j);
        let mut kernel_slack = f64::INFINITY;
        for (i, v) in c.values.iter().enumerate() {
            let d = (pot.x(i) - y).abs();
            let bound = 0.75 / kappa * (-0.5 * kappa * d).exp();
            kernel_slack = kernel_slack.min(bound - v.abs() - engine.tail_bound(d));
        }
        ColumnSummary {
            g: c.g(),
            g_prime: c.g_prime,
            kernel_slack,
            forcing: forcing.map_or(0.0, |f| engine.square_integral(c, f)),
        }
    });
    let g: Vec<f64> = summaries.iter().map(|s| s.g).collect();
    let g_prime: Vec<f64> = summaries.iter().map(|s| s.g_prime).collect();
    let tail = engine.tail_bound(0.0);
    let dtail = engine.derivative_tail_bound();
    let tail_bounds: Vec<f64> = (0..pot.len())
        .map(|i| tail + engine.truncation_envelope(pot.x(i), pot.x(i)))
        .collect();
    let fd_gp = fd::first(&g, h);
    let n = g.len();
    let derivative_crosscheck = (2..n - 2)
        .map(|i| (fd_gp[i] - g_prime[i]).abs())
        .fold(0.0, f64::max);
    let mut audit = GreensAudit {
        lower_slack: f64::INFINITY,
        upper_slack: f64::INFINITY,
        derivative_slack: f64::INFINITY,
        kernel_slack: summaries
            .iter()
            .map(|s| s.kernel_slack)
            .fold(f64::INFINITY, f64::min),
        derivative_crosscheck,
    };
    // The computed field is the Green's function of the zero-extended
    // potential, so the bounds are audited against the series tails only.
    for i in 0..n {
        audit.lower_slack = audit.lower_slack.min(g[i] - tail - 0.25 / kappa);
        audit.upper_slack = audit.upper_slack.min(0.75 / kappa - g[i] - tail);
        audit.derivative_slack = audit.derivative_slack.min(0.5 - g_prime[i].abs() - dtail);
    }
    let field = GreensField {
        kappa,
        half_width: pot.half_width,
        h,
        g,
        g_prime,
        series_terms_used: engine.terms(),
        tail_bound: tail,
        derivative_tail_bound: dtail,
        tail_bounds,
        audit,
    };
    let forcing_values = summaries.iter().map(|s| s.forcing).collect();
    Ok((field, forcing_values))
}

/// `g` and `g'` on the whole grid, with the type invariants audited.
///
/// Fails with `InvariantViolated` if any audited bound has negative slack.
pub fn greens_field(pot: &SampledPotential, kappa: f64, tol: f64) -> Result<GreensField> {
    let (field, _) = build_field(pot, kappa, tol, None)?;
    check_audit(&field)?;
    Ok(field)
}

fn check_audit(field: &GreensField) -> Result<()> {
    let a = field.audit;
    if a.min_slack() < 0.0 {
        return Err(Error::InvariantViolated(format!(
            "Green's function bounds fail: lower {:.3e}, upper {:.3e}, derivative {:.3e}, kernel {:.3e}",
            a.lower_slack, a.upper_slack, a.derivative_slack, a.kernel_slack
        )));
    }
    Ok(())
}

/// `g`, `g'` and `F̃(x) = ∫ G(x,y)F(y)G(y,x) dy` from a single sweep.
/// `F` is given on the potential's grid and taken to vanish outside it.
pub fn greens_with_forcing(
    pot: &SampledPotential,
    kappa: f64,
    forcing: &[f64],
    tol: f64,
) -> Result<(GreensField, Vec<f64>)> {
    let (field, tilde) = build_field(pot, kappa, tol, Some(forcing))?;
    check_audit(&field)?;
    Ok((field, tilde))
}

/// Modified forcing at one node, with a certificate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingValue {
    pub value: f64,
    /// Bound on the error caused by the omitted series terms.
    pub tail_bound: f64,
}

/// `F̃(x) = ∫ G(x,y) F(y) G(y,x) dy` at the node `x`.
pub fn modified_forcing(
    pot: &SampledPotential,
    kappa: f64,
    forcing: &[f64],
    x: f64,
    tol: f64,
) -> Result<ForcingValue> {
    if forcing.len() != pot.len() {
        return Err(Error::GridMismatch);
    }
    let engine = GreensEngine::new(pot, kappa, tol)?;
    let j = pot.node_index(x)?;
    let c = engine.column(j);
    let sup_f = forcing.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let t = engine.tail_bound(0.0) + engine.truncation_envelope(x, x);
    // |G² − G_m²| ≤ t(2|G| + t) with |G| ≤ (3/4κ)e^{−κ|x−y|/2}
    let tail_bound = sup_f * t * (1.5 / kappa + t) * (2.0 / kappa);
    Ok(ForcingValue {
        value: engine.square_integral(&c, forcing),
        tail_bound,
    })
}

/// A smooth rapidly decaying test function with closed-form derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TestFunction {
    /// `e^{−a(x−c)²}`.
    Gaussian { a: f64, center: f64 },
}

impl TestFunction {
    /// `(f, f', f'')` and `f'''` at `x`.
    pub fn derivatives(&self, x: f64) -> [f64; 4] {
        match *self {
            TestFunction::Gaussian { a, center } => {
                let u = x - center;
                let e = (-a * u * u).exp();
                [
                    e,
                    -2.0 * a * u * e,
                    (4.0 * a * a * u * u - 2.0 * a) * e,
                    (-8.0 * a * a * a * u * u * u + 12.0 * a * a * u) * e,
                ]
            }
        }
    }
}

/// Weight `ψ` for the distance functional and the integral identities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Weight {
    /// `sech(x/R)`.
    Sech { r: f64 },
    /// `e^{−a x²}`.
    Gaussian { a: f64 },
}

impl Weight {
    /// `[ψ, ψ', ψ'', ψ''']` at `x`.
    pub fn derivatives(&self, x: f64) -> [f64; 4] {
        match *self {
            Weight::Sech { r } => {
                let u = x / r;
                let s = 1.0 / u.cosh();
                let t = u.tanh();
                [
                    s,
                    -s * t / r,
                    s * (t * t - s * s) / (r * r),
                    (5.0 * s * s * s * t - s * t * t * t) / (r * r * r),
                ]
            }
            Weight::Gaussian { a } => TestFunction::Gaussian { a, center: 0.0 }.derivatives(x),
        }
    }

    pub fn sample(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&x| self.derivatives(x)[0]).collect()
    }
}

/// The four static identities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StaticIdentity {
    /// `q = [g'/2g]' + [g'/2g]² + 1/(4g²) − κ²`.
    QEquation,
    /// `g'' = 2(q+κ²)g + (g')²/2g − 1/2g`.
    GSecond,
    /// `g''' = 2(qg)' + 2qg' + 4κ²g'`.
    GThird,
    /// `∫ G(x,y)²[−f''' + 2qf' + 2(qf)' + 4κ²f'](y) dy = 2f'g − 2fg'`.
    GIdentity,
}

impl std::str::FromStr for StaticIdentity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q-equation" => Ok(Self::QEquation),
            "g-second" => Ok(Self::GSecond),
            "g-third" => Ok(Self::GThird),
            "G-identity" | "g-identity" => Ok(Self::GIdentity),
            _ => Err(Error::InvalidParameter(format!("unknown identity {s:?}"))),
        }
    }
}

/// JSON-serializable verifier output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub kind: String,
    pub h: f64,
    pub residual: f64,
    pub order_estimate: Option<f64>,
}

/// Nodes kept clear of the window edges by the finite-difference stencils.
const EDGE: usize = 3;

/// Max residual of a static identity over interior nodes.
///
/// Derivatives of `g` are fourth-order differences except `g'`, which comes
/// from the series; the G-identity integral uses the engine quadrature.
pub fn verify_static_identity(
    kind: StaticIdentity,
    pot: &SampledPotential,
    kappa: f64,
    test_fn: Option<TestFunction>,
    tol: f64,
) -> Result<f64> {
    let h = pot.h;
    let q = pot.values();
    let n = pot.len();
    let kk = kappa * kappa;
    let (field, tilde) = match kind {
        StaticIdentity::GIdentity => {
            let f = test_fn.ok_or_else(|| {
                Error::InvalidParameter("G-identity needs a test function".into())
            })?;
            let dq = pot.derivative();
            let phi: Vec<f64> = (0..n)
                .map(|i| {
                    let [v, d1, _, d3] = f.derivatives(pot.x(i));
                    -d3 + 2.0 * q[i] * d1 + 2.0 * (dq[i] * v + q[i] * d1) + 4.0 * kk * d1
                })
                .collect();
            greens_with_forcing(pot, kappa, &phi, tol)?
        }
        _ => (greens_field(pot, kappa, tol)?, Vec::new()),
    };
    let (g, gp) = (&field.g, &field.g_prime);
    let dq = pot.derivative();
    let mut residual: f64 = 0.0;
    for i in EDGE..n - EDGE {
        let r = match kind {
            StaticIdentity::QEquation => {
                let gpp = fd::second_at(g, i, h);
                let w = gp[i] / (2.0 * g[i]);
                let dw = gpp / (2.0 * g[i]) - gp[i] * gp[i] / (2.0 * g[i] * g[i]);
                q[i] - (dw + w * w + 1.0 / (4.0 * g[i] * g[i]) - kk)
            }
            StaticIdentity::GSecond => {
                let gpp = fd::second_at(g, i, h);
                gpp - (2.0 * (q[i] + kk) * g[i] + gp[i] * gp[i] / (2.0 * g[i]) - 1.0 / (2.0 * g[i]))
            }
            StaticIdentity::GThird => {
                let gppp = fd::third_at(g, i, h);
                gppp - (2.0 * (dq[i] * g[i] + q[i] * gp[i]) + 2.0 * q[i] * gp[i] + 4.0 * kk * gp[i])
            }
            StaticIdentity::GIdentity => {
                let [v, d1, _, _] = test_fn.expect("checked above").derivatives(pot.x(i));
                tilde[i] - (2.0 * d1 * g[i] - 2.0 * v * gp[i])
            }
        };
        residual = residual.max(r.abs());
    }
    Ok(residual)
}

/// Empirical orders `log₂(r_k / r_{k+1})` for residuals at halving `h`.
pub fn convergence_orders(residuals: &[f64]) -> Vec<f64> {
    residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// A spacetime potential and forcing on a common `(t, x)` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcedPair {
    pub times: Vec<f64>,
    pub half_width: f64,
    pub h: f64,
    /// `q[k][i] = q(t_k, x_i)`.
    pub q: Vec<Vec<f64>>,
    /// `f[k][i] = F(t_k, x_i)`.
    pub f: Vec<Vec<f64>>,
    pub manufactured: bool,
    /// Declared `sup_{t,x} |q|`.
    pub sup_norm: f64,
}

impl ForcedPair {
    /// Samples `q` and sets `F = ∂ₜq + q''' − 6qq'` by sixth-order
    /// differences (in `t` with the time step, in `x` with `h`), so that
    /// `(q, F)` solves `∂ₜq = −q''' + 6qq' + F` to sixth order.
    pub fn manufacture<Q>(times: Vec<f64>, half_width: f64, h: f64, q: Q) -> Result<Self>
    where
        Q: Fn(f64, f64) -> f64 + Sync,
    {
        if times.len() < 2 {
            return Err(Error::InvalidParameter(
                "need at least two time slices".into(),
            ));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0)
            || times
                .windows(2)
                .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-12 * dt)
        {
            return Err(Error::InvalidParameter(
                "time slices must be uniform and increasing".into(),
            ));
        }
        let probe = SampledPotential::from_fn(half_width, h, |x| q(times[0], x))?;
        let h = probe.h;
        let grid = probe.grid();
        let mut qs = Vec::with_capacity(times.len());
        let mut fs = Vec::with_capacity(times.len());
        for &t in &times {
            let qt: Vec<f64> = grid.iter().map(|&x| q(t, x)).collect();
            let ft: Vec<f64> = grid
                .iter()
                .zip(&qt)
                .map(|(&x, &qv)| {
                    let qt_dt = fd::first_6(&|s| q(s, x), t, dt);
                    let q3 = fd::third_6(&|y| q(t, y), x, h);
                    let q1 = fd::first_6(&|y| q(t, y), x, h);
                    qt_dt + q3 - 6.0 * qv * q1
                })
                .collect();
            qs.push(qt);
            fs.push(ft);
        }
        let sup_norm = qs.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
        Ok(Self {
            times,
            half_width,
            h,
            q: qs,
            f: fs,
            manufactured: true,
            sup_norm,
        })
    }

    pub fn potential(&self, k: usize) -> Result<SampledPotential> {
        SampledPotential::new(
            self.half_width,
            self.h,
            self.q[k].clone(),
            self.sup_norm,
            Extension::Zero,
        )
    }

    fn slice_index(&self, t: f64) -> Result<usize> {
        let dt = self.times[1] - self.times[0];
        let k = ((t - self.times[0]) / dt).round();
        if k < 0.0
            || k as usize >= self.times.len()
            || (self.times[k as usize] - t).abs() > 1e-9 * dt.max(1.0)
        {
            return Err(Error::InvalidParameter(format!(
                "t = {t} is not a time slice"
            )));
        }
        Ok(k as usize)
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.times == other.times && self.h == other.h && self.half_width == other.half_width
    }
}

/// Which evolution law [`verify_dynamic_identity`] checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicIdentity {
    /// `∂ₜg = {−g'' + 3(g')²/2g − 3/2g − 6κ²g + 6κ}' − F̃`.
    GDt,
    /// `∂ₜ(1/2g) = {−(1/2g)'' + 3(g')²/4g³ + 1/4g³ − 3κ²/g + 4κ³}' + F̃/2g²`.
    OneOverGDt,
}

/// Max residual of the evolution law for `g` at slice `t`.
///
/// `∂ₜg` is a fourth-order central difference over five slices; the `x`
/// derivatives are expanded by hand so only `g''` and `g'''` are
/// differenced.
pub fn verify_dynamic_identity(
    pair: &ForcedPair,
    kappa: f64,
    t: f64,
    kind: DynamicIdentity,
    tol: f64,
) -> Result<f64> {
    check_pair_hypothesis(pair, kappa)?;
    let k = pair.slice_index(t)?;
    if k < 2 || k + 2 >= pair.times.len() {
        return Err(Error::InvalidParameter(format!(
            "slice {k} needs two neighbours on each side for the time derivative"
        )));
    }
    let dt = pair.times[1] - pair.times[0];
    let mut g_slices = Vec::with_capacity(5);
    for m in [k - 2, k - 1, k + 1, k + 2] {
        g_slices.push(greens_field(&pair.potential(m)?, kappa, tol)?.g);
    }
    let (field, tilde) = greens_with_forcing(&pair.potential(k)?, kappa, &pair.f[k], tol)?;
    let (g, gp) = (&field.g, &field.g_prime);
    let h = pair.h;
    let kk = kappa * kappa;
    let mut residual: f64 = 0.0;
    for i in EDGE..g.len() - EDGE {
        let g_t = (g_slices[0][i] - 8.0 * g_slices[1][i] + 8.0 * g_slices[2][i] - g_slices[3][i])
            / (12.0 * dt);
        let (gv, g1) = (g[i], gp[i]);
        let g2 = fd::second_at(g, i, h);
        let g3 = fd::third_at(g, i, h);
        let r = match kind {
            DynamicIdentity::GDt => {
                let bracket_x = -g3 + 3.0 * g1 * g2 / gv - 1.5 * g1 * g1 * g1 / (gv * gv)
                    + 1.5 * g1 / (gv * gv)
                    - 6.0 * kk * g1;
                g_t - bracket_x + tilde[i]
            }
            DynamicIdentity::OneOverGDt => {
                let lhs = -g_t / (2.0 * gv * gv);
                let w3 = -g3 / (2.0 * gv * gv) + 3.0 * g1 * g2 / gv.powi(3)
                    - 3.0 * g1.powi(3) / gv.powi(4);
                let bracket_x = -w3 + 1.5 * g1 * g2 / gv.powi(3)
                    - 2.25 * g1.powi(3) / gv.powi(4)
                    - 0.75 * g1 / gv.powi(4)
                    + 3.0 * kk * g1 / (gv * gv);
                lhs - bracket_x - tilde[i] / (2.0 * gv * gv)
            }
        };
        residual = residual.max(r.abs());
    }
    Ok(residual)
}

fn check_pair_hypothesis(pair: &ForcedPair, kappa: f64) -> Result<()> {
    if kappa * kappa < 4.0 * pair.sup_norm {
        return Err(Error::HypothesisViolated {
            kappa_sq: kappa * kappa,
            required: 4.0 * pair.sup_norm,
        });
    }
    Ok(())
}

/// `∫ (g₁−g₂)²/(2g₁g₂) ψ dx` by Simpson's rule on the common grid.
pub fn gronwall_distance(g1: &GreensField, g2: &GreensField, psi: &[f64]) -> Result<f64> {
    if !g1.same_grid(g2) || psi.len() != g1.len() {
        return Err(Error::GridMismatch);
    }
    let integrand: Vec<f64> = (0..g1.len())
        .map(|i| {
            let (a, b) = (g1.g[i], g2.g[i]);
            (a - b) * (a - b) / (2.0 * a * b) * psi[i]
        })
        .collect();
    Ok(simpson(&integrand, g1.h))
}

/// Both sides of the Gronwall identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Per-slice data for one pair.
struct SliceData {
    q: Vec<f64>,
    g: Vec<f64>,
    gp: Vec<f64>,
    tilde: Vec<f64>,
}

fn slice_data(pair: &ForcedPair, k: usize, kappa: f64, tol: f64) -> Result<SliceData> {
    let (field, tilde) = greens_with_forcing(&pair.potential(k)?, kappa, &pair.f[k], tol)?;
    Ok(SliceData {
        q: pair.q[k].clone(),
        g: field.g,
        gp: field.g_prime,
        tilde,
    })
}

/// The spatial integrand of the Gronwall identity's right side at one node.
#[allow(clippy::too_many_arguments)]
pub fn gronwall_integrand(
    kappa: f64,
    psi: [f64; 4],
    (q1, g1, p1, f1): (f64, f64, f64, f64),
    (q2, g2, p2, f2): (f64, f64, f64, f64),
) -> f64 {
    let kk = kappa * kappa;
    let [s0, s1, s2, s3] = psi;
    let d = (g1 - g2) * (g1 - g2) / (2.0 * g1 * g2);
    let a2 = -(p1 / g2 + p2 / g1) + 2.0 * (p1 / g1 + p2 / g2);
    let sum_log = p1 / g1 + p2 / g2;
    let inv_diff = 1.0 / g1 - 1.0 / g2;
    let a1 = 2.5 * sum_log * sum_log - 7.0 * p1 * p2 / (g1 * g2) - 12.0 * kk
        + 1.5 * (p1 - p2) * (p1 - p2) / (g1 * g2)
        + (0.5 - 2.0 * p1 * p2) * inv_diff * inv_diff
        + 2.0 * q1 * g1 / g2
        + 2.0 * q2 * g2 / g1
        + 2.0 * kk * (g1 / g2 + g2 / g1)
        - 2.0 * (q1 + q2);
    let a0 = -(p1 / g1.powi(3) + p2 / g2.powi(3))
        - (2.0 * kk - p1 * p2 / (2.0 * g1 * g2)) * sum_log
        - 2.0 * (q1 * p2 / g2 + q2 * p1 / g1)
        + (p1 / g2 + p2 / g1) / (2.0 * g1 * g2);
    let first = d * (-0.5 * s3 + 1.5 * s2 * a2 - 1.5 * s1 * a1 + 1.5 * s0 * a0);
    let second = 1.5 * s1 * (g1 - g2) / (g1 * g2)
        * (2.0 * q1 * g1 - 2.0 * q2 * g2 + p1 * p1 / (2.0 * g1) - p2 * p2 / (2.0 * g2));
    let third = -s0 * (g1 * g1 - g2 * g2) / (2.0 * g1 * g2) * (f1 / g1 - f2 / g2);
    first + second + third
}

/// Evaluates both sides of the Gronwall identity at slice `t0`: the left
/// side directly, the right side by Simpson's rule in time over the slices
/// in `[0, t0]` (the first slice is `t = 0`).
pub fn verify_gronwall_identity(
    pair1: &ForcedPair,
    pair2: &ForcedPair,
    kappa: f64,
    psi: Weight,
    t0: f64,
    tol: f64,
) -> Result<GronwallReport> {
    if !pair1.same_grid(pair2) {
        return Err(Error::GridMismatch);
    }
    if pair1.times[0] != 0.0 {
        return Err(Error::InvalidParameter(
            "the first time slice must be t = 0".into(),
        ));
    }
    check_pair_hypothesis(pair1, kappa)?;
    check_pair_hypothesis(pair2, kappa)?;
    let max_difference = pair1.q[0]
        .iter()
        .zip(&pair2.q[0])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if max_difference > 1e-12 * pair1.sup_norm.max(pair2.sup_norm).max(1.0) {
        return Err(Error::InitialDataMismatch { max_difference });
    }
    let k0 = pair1.slice_index(t0)?;
    if k0 == 0 {
        return Ok(GronwallReport {
            lhs: 0.0,
            rhs: 0.0,
            residual: 0.0,
        });
    }
    let h = pair1.h;
    let grid: Vec<f64> = (0..pair1.q[0].len())
        .map(|i| -pair1.half_width + i as f64 * h)
        .collect();
    let psi_d: Vec<[f64; 4]> = grid.iter().map(|&x| psi.derivatives(x)).collect();
    let mut spatial = Vec::with_capacity(k0 + 1);
    let mut lhs = 0.0;
    for k in 0..=k0 {
        let a = slice_data(pair1, k, kappa, tol)?;
        let b = slice_data(pair2, k, kappa, tol)?;
        let integrand: Vec<f64> = (0..grid.len())
            .map(|i| {
                gronwall_integrand(
                    kappa,
                    psi_d[i],
                    (a.q[i], a.g[i], a.gp[i], a.tilde[i]),
                    (b.q[i], b.g[i], b.gp[i], b.tilde[i]),
                )
            })
            .collect();
        spatial.push(simpson(&integrand, h));
        if k == k0 {
            let d: Vec<f64> = (0..grid.len())
                .map(|i| (a.g[i] - b.g[i]).powi(2) / (2.0 * a.g[i] * b.g[i]) * psi_d[i][0])
                .collect();
            lhs = simpson(&d, h);
        }
    }
    let dt = pair1.times[1] - pair1.times[0];
    let rhs = simpson(&spatial, dt);
    Ok(GronwallReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

/// Both sides of the `q`-difference identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QDiffReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// `∫(q₁−q₂)ψ` against the functional of `g₁, g₂, g₁', g₂'` that the
/// identity equates it with; both integrals by Simpson's rule.
pub fn verify_qdiff_identity(
    pot1: &SampledPotential,
    pot2: &SampledPotential,
    kappa: f64,
    psi: Weight,
    tol: f64,
) -> Result<QDiffReport> {
    if !pot1.same_grid(pot2) {
        return Err(Error::GridMismatch);
    }
    let a = greens_field(pot1, kappa, tol)?;
    let b = greens_field(pot2, kappa, tol)?;
    let kk = kappa * kappa;
    let h = pot1.h;
    let n = pot1.len();
    let mut lhs_i = Vec::with_capacity(n);
    let mut rhs_i = Vec::with_capacity(n);
    for i in 0..n {
        let [s0, s1, s2, _] = psi.derivatives(pot1.x(i));
        let (q1, q2) = (pot1.values[i], pot2.values[i]);
        let (g1, g2, p1, p2) = (a.g[i], b.g[i], a.g_prime[i], b.g_prime[i]);
        let s = 1.0 / g1 + 1.0 / g2;
        let ds = -p1 / (g1 * g1) - p2 / (g2 * g2);
        let brace = s2 * s + 0.5 * s1 * (3.0 * ds + (p1 + p2) / (g1 * g2))
            - 0.5 * s0 * s * (2.0 * (q1 + q2) + 4.0 * kk - 0.5 * s * s + 3.0 / (g1 * g2))
            + s0 * 0.75 * (p1 * p1 / g1.powi(3) + p2 * p2 / g2.powi(3))
            - s0 / (4.0 * g1 * g2) * (p1 * p1 / g1 + p2 * p2 / g2);
        lhs_i.push((q1 - q2) * s0);
        rhs_i.push(0.25 * (g1 - g2) * brace);
    }
    let lhs = simpson(&lhs_i, h);
    let rhs = simpson(&rhs_i, h);
    Ok(QDiffReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}
