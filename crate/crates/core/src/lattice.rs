//! Frequency-lattice arithmetic on `{α·ξ : ξ ∈ ℤ² ∖ 0}`.
//!
//! A quasiperiodic function with frequency vector `α = (α₁, α₂)` is stored as
//! a finite, Hermitian-symmetric map from lattice indices `ξ` to complex
//! amplitudes `q̂_ξ`, representing `Σ q̂_ξ e^{i(α·ξ)x}`. This module owns the
//! `α·ξ` arithmetic, the Diophantine scan, and the norms used elsewhere
//! (`G^θ`, `ℓ¹`, weak-`ℓ¹`).

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Japanese bracket `⟨x⟩ = (1 + x²)^{1/2}`.
pub fn japanese_bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// A lattice index `ξ = (ξ₁, ξ₂)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrequencyIndex {
    pub xi1: i64,
    pub xi2: i64,
}

impl FrequencyIndex {
    pub const fn new(xi1: i64, xi2: i64) -> Self {
        Self { xi1, xi2 }
    }

    pub fn is_zero(self) -> bool {
        self.xi1 == 0 && self.xi2 == 0
    }

    /// Euclidean length `|ξ|`.
    pub fn norm(self) -> f64 {
        ((self.xi1 * self.xi1 + self.xi2 * self.xi2) as f64).sqrt()
    }

    /// `max(|ξ₁|, |ξ₂|)`, the radius used for truncation boxes.
    pub fn sup_norm(self) -> i64 {
        self.xi1.abs().max(self.xi2.abs())
    }

    /// Representative half-plane: `ξ₁ > 0`, or `ξ₁ = 0` and `ξ₂ > 0`.
    pub fn is_canonical(self) -> bool {
        self.xi1 > 0 || (self.xi1 == 0 && self.xi2 > 0)
    }
}

impl std::ops::Add for FrequencyIndex {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.xi1 + rhs.xi1, self.xi2 + rhs.xi2)
    }
}

impl std::ops::Sub for FrequencyIndex {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.xi1 - rhs.xi1, self.xi2 - rhs.xi2)
    }
}

impl std::ops::Neg for FrequencyIndex {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.xi1, -self.xi2)
    }
}

impl fmt::Display for FrequencyIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.xi1, self.xi2)
    }
}

/// The frequency vector `α` together with its Diophantine metadata.
///
/// `c0` is an empirical constant: floating-point `α` is rational, so the
/// Diophantine bound `|α·ξ| ≥ C₀|ξ|^{-γ}` can only be checked on a finite
/// index range (see [`verify_diophantine`]).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBasis {
    pub alpha1: f64,
    pub alpha2: f64,
    pub gamma: f64,
    pub c0: Option<f64>,
}

impl FrequencyBasis {
    pub fn new(alpha1: f64, alpha2: f64, gamma: f64, c0: Option<f64>) -> Result<Self> {
        if !(alpha1 > 0.0 && alpha2 > 0.0) || !alpha1.is_finite() || !alpha2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "wavenumbers must be positive and finite, got ({alpha1}, {alpha2})"
            )));
        }
        if !(gamma > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Diophantine exponent must exceed 1, got {gamma}"
            )));
        }
        if let Some(c) = c0 {
            if !(c > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "C0 must be positive, got {c}"
                )));
            }
        }
        Ok(Self {
            alpha1,
            alpha2,
            gamma,
            c0,
        })
    }

    /// `α·ξ`.
    pub fn dot(&self, xi: FrequencyIndex) -> f64 {
        dot_frequency(self, xi)
    }
}

impl Default for FrequencyBasis {
    /// `α = (1, √2)`, `γ = 2`, `C₀` unset.
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: std::f64::consts::SQRT_2,
            gamma: 2.0,
            c0: None,
        }
    }
}

/// `α₁ξ₁ + α₂ξ₂`.
pub fn dot_frequency(basis: &FrequencyBasis, xi: FrequencyIndex) -> f64 {
    basis.alpha1 * xi.xi1 as f64 + basis.alpha2 * xi.xi2 as f64
}

/// Outcome of a range-bounded Diophantine scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiophantineReport {
    /// Box radius scanned: all `ξ ≠ 0` with `|ξ₁|, |ξ₂| ≤ radius`.
    pub radius: i64,
    pub gamma: f64,
    /// `min |α·ξ| |ξ|^γ` over the scanned box.
    pub min_product: f64,
    /// The (canonical half-plane) index attaining the minimum.
    pub witness: FrequencyIndex,
    /// `min_product ≥ c0`, when the basis declares a `c0`.
    pub satisfies_c0: Option<bool>,
}

/// Scans `0 < max(|ξ₁|,|ξ₂|) ≤ radius` for the smallest `|α·ξ| |ξ|^γ`.
///
/// Only the canonical half-plane is visited (the product is even in `ξ`);
/// ties keep the lexicographically first index.
pub fn verify_diophantine(basis: &FrequencyBasis, radius: i64) -> Result<DiophantineReport> {
    if radius < 1 {
        return Err(Error::InvalidParameter(format!(
            "radius must be >= 1, got {radius}"
        )));
    }
    let mut best = f64::INFINITY;
    let mut witness = FrequencyIndex::new(0, 1);
    for xi1 in 0..=radius {
        for xi2 in -radius..=radius {
            let xi = FrequencyIndex::new(xi1, xi2);
            if !xi.is_canonical() {
                continue;
            }
            let d = basis.dot(xi).abs();
            if d == 0.0 {
                return Err(Error::RationalDependence { witness: xi });
            }
            let product = d * xi.norm().powf(basis.gamma);
            if product < best {
                best = product;
                witness = xi;
            }
        }
    }
    Ok(DiophantineReport {
        radius,
        gamma: basis.gamma,
        min_product: best,
        witness,
        satisfies_c0: basis.c0.map(|c| best >= c),
    })
}

/// A finite Hermitian-symmetric coefficient field.
///
/// Entries are kept sorted by index; every constructor inserts `ξ` and `-ξ`
/// together with conjugate values, and rejects `ξ = (0, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    entries: Vec<(FrequencyIndex, Complex64)>,
    radius: i64,
}

impl CoefficientField {
    /// An empty field with truncation radius `radius`.
    pub fn empty(radius: i64) -> Self {
        Self {
            entries: Vec::new(),
            radius,
        }
    }

    /// Builds a field from values on one of each pair `±ξ`; the mirror entry
    /// `-ξ ↦ conj(value)` is implied. Duplicate indices accumulate.
    ///
    /// A self-paired entry is impossible because `ξ = -ξ` only at the
    /// excluded origin.
    pub fn from_half<I>(radius: i64, half: I) -> Result<Self>
    where
        I: IntoIterator<Item = (FrequencyIndex, Complex64)>,
    {
        let mut entries = Vec::new();
        for (xi, v) in half {
            if xi.is_zero() {
                return Err(Error::ZeroIndex);
            }
            if xi.sup_norm() > radius {
                return Err(Error::OutsideTruncation { index: xi, radius });
            }
            entries.push((xi, v));
            entries.push((-xi, v.conj()));
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        // merge duplicates
        let mut merged: Vec<(FrequencyIndex, Complex64)> = Vec::with_capacity(entries.len());
        for (xi, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == xi => last.1 += v,
                _ => merged.push((xi, v)),
            }
        }
        Ok(Self {
            entries: merged,
            radius,
        })
    }

    /// Wraps entries already known to be Hermitian-symmetric and sorted.
    pub(crate) fn from_sorted_unchecked(
        radius: i64,
        entries: Vec<(FrequencyIndex, Complex64)>,
    ) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        Self { entries, radius }
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(FrequencyIndex, Complex64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (FrequencyIndex, Complex64)> + '_ {
        self.entries.iter().copied()
    }

    /// Amplitude at `ξ` (zero when absent).
    pub fn get(&self, xi: FrequencyIndex) -> Complex64 {
        match self.entries.binary_search_by(|e| e.0.cmp(&xi)) {
            Ok(i) => self.entries[i].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Applies `f(ξ, q̂_ξ)` entrywise; `f` must respect Hermitian symmetry,
    /// i.e. `f(-ξ, conj z) = conj f(ξ, z)`.
    pub fn map_entries<F>(&self, f: F) -> Self
    where
        F: Fn(FrequencyIndex, Complex64) -> Complex64,
    {
        Self {
            entries: self.entries.iter().map(|&(xi, v)| (xi, f(xi, v))).collect(),
            radius: self.radius,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_entries(|_, v| v * c)
    }

    /// `self - other` over the union of supports.
    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a + b)
    }

    fn combine<F: Fn(Complex64, Complex64) -> Complex64>(&self, other: &Self, f: F) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::with_capacity(a.len().max(b.len()));
        while i < a.len() || j < b.len() {
            let ord = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) => x.0.cmp(&y.0),
                (Some(_), None) => Ordering::Less,
                _ => Ordering::Greater,
            };
            match ord {
                Ordering::Less => {
                    out.push((a[i].0, f(a[i].1, zero)));
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((b[j].0, f(zero, b[j].1)));
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, f(a[i].1, b[j].1)));
                    i += 1;
                    j += 1;
                }
            }
        }
        Self {
            entries: out,
            radius: self.radius.max(other.radius),
        }
    }

    /// `max_ξ |q̂_{-ξ} - conj(q̂_ξ)|` (zero for every field built here).
    pub fn symmetry_defect(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(xi, v)| (self.get(-xi) - v.conj()).norm())
            .fold(0.0, f64::max)
    }

    /// `Σ |q̂_ξ|`.
    pub fn magnitude(&self) -> f64 {
        self.entries.iter().map(|e| e.1.norm()).sum()
    }

    /// `max |q̂_ξ|`.
    pub fn max_amplitude(&self) -> f64 {
        self.entries.iter().map(|e| e.1.norm()).fold(0.0, f64::max)
    }

    /// Entries in the canonical half-plane (the serialized form).
    pub fn half_entries(&self) -> impl Iterator<Item = (FrequencyIndex, Complex64)> + '_ {
        self.iter().filter(|(xi, _)| xi.is_canonical())
    }

    /// Serializes as a JSON array of `{xi1, xi2, re, im}` records over the
    /// canonical half-plane; the mirror entries are implied.
    pub fn to_json(&self) -> Result<String> {
        let records: Vec<CoefficientRecord> = self
            .half_entries()
            .map(|(xi, v)| CoefficientRecord {
                xi1: xi.xi1,
                xi2: xi.xi2,
                re: v.re,
                im: v.im,
            })
            .collect();
        crate::io::to_json_pretty(&records)
    }

    /// Parses the JSON form. Either member of each `±ξ` pair may be given;
    /// supplying both is rejected. The radius defaults to the largest stored
    /// `max(|ξ₁|, |ξ₂|)`.
    pub fn from_json(text: &str, radius: Option<i64>) -> Result<Self> {
        let records: Vec<CoefficientRecord> = serde_json::from_str(text)?;
        let mut seen = std::collections::BTreeSet::new();
        for r in &records {
            let xi = FrequencyIndex::new(r.xi1, r.xi2);
            let key = if xi.is_canonical() { xi } else { -xi };
            if !seen.insert(key) {
                return Err(Error::InvalidParameter(format!(
                    "index {xi} given twice (or with its mirror)"
                )));
            }
        }
        let radius = radius.unwrap_or_else(|| {
            records
                .iter()
                .map(|r| FrequencyIndex::new(r.xi1, r.xi2).sup_norm())
                .max()
                .unwrap_or(0)
        });
        Self::from_half(
            radius,
            records.into_iter().map(|r| {
                (
                    FrequencyIndex::new(r.xi1, r.xi2),
                    Complex64::new(r.re, r.im),
                )
            }),
        )
    }
}

/// One serialized coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub xi1: i64,
    pub xi2: i64,
    pub re: f64,
    pub im: f64,
}

/// `‖f‖_{G^θ} = ( Σ_ξ [⟨ξ₁⟩^θ⟨ξ₂⟩^θ |q̂_ξ| / |α·ξ|^{1/2}]² )^{1/2}`.
pub fn g_theta_norm(field: &CoefficientField, theta: f64, basis: &FrequencyBasis) -> Result<f64> {
    let mut sum = 0.0;
    for (xi, v) in field.iter() {
        let d = basis.dot(xi).abs();
        if d == 0.0 {
            return Err(Error::RationalDependence { witness: xi });
        }
        let w = japanese_bracket(xi.xi1 as f64).powf(theta)
            * japanese_bracket(xi.xi2 as f64).powf(theta);
        let term = w * v.norm();
        sum += term * term / d;
    }
    Ok(sum.sqrt())
}

/// `(ℓ¹, weak-ℓ¹)` of a field: `Σ|q̂_ξ|` and `sup_k k·a*_k` where `a*` is the
/// decreasing rearrangement of the amplitudes.
pub fn l1_and_weak_l1(field: &CoefficientField) -> (f64, f64) {
    let mags: Vec<f64> = field.iter().map(|(_, v)| v.norm()).collect();
    l1_and_weak_l1_of(&mags)
}

/// As [`l1_and_weak_l1`], for a bare list of magnitudes.
pub fn l1_and_weak_l1_of(magnitudes: &[f64]) -> (f64, f64) {
    let mut sorted: Vec<f64> = magnitudes.iter().map(|m| m.abs()).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let l1 = sorted.iter().sum();
    let weak = sorted
        .iter()
        .enumerate()
        .map(|(k, a)| (k + 1) as f64 * a)
        .fold(0.0, f64::max);
    (l1, weak)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dot_frequency_examples() {
        let b = FrequencyBasis::default();
        assert_eq!(dot_frequency(&b, FrequencyIndex::new(1, 0)), 1.0);
        assert_eq!(dot_frequency(&b, FrequencyIndex::new(0, 1)), SQRT_2);
        assert_relative_eq!(dot_frequency(&b, FrequencyIndex::new(1, -1)), 1.0 - SQRT_2);
    }

    #[test]
    fn basis_rejects_bad_parameters() {
        assert!(FrequencyBasis::new(0.0, 1.0, 2.0, None).is_err());
        assert!(FrequencyBasis::new(1.0, -1.0, 2.0, None).is_err());
        assert!(FrequencyBasis::new(1.0, SQRT_2, 1.0, None).is_err());
        assert!(FrequencyBasis::new(1.0, SQRT_2, 2.0, Some(0.0)).is_err());
    }

    #[test]
    fn rational_dependence_is_detected() {
        let b = FrequencyBasis::new(1.0, 2.0, 2.0, None).unwrap();
        match verify_diophantine(&b, 5) {
            Err(Error::RationalDependence { witness }) => {
                assert_eq!(witness, FrequencyIndex::new(2, -1))
            }
            other => panic!("expected RationalDependence, got {other:?}"),
        }
    }

    #[test]
    fn diophantine_radius_one_enumeration() {
        // The eight indices with max(|ξ₁|,|ξ₂|) ≤ 1, enumerated by hand.
        let b = FrequencyBasis::default();
        let r = verify_diophantine(&b, 1).unwrap();
        assert_eq!(r.witness, FrequencyIndex::new(1, -1));
        assert_relative_eq!(r.min_product, (SQRT_2 - 1.0) * 2.0, max_relative = 1e-14);
        assert_relative_eq!(r.min_product, 0.828_427_124_746_19, max_relative = 1e-12);
        assert_eq!(r.satisfies_c0, None);
    }

    #[test]
    fn diophantine_radius_fifty_matches_brute_force() {
        let b = FrequencyBasis::new(1.0, SQRT_2, 2.0, Some(0.1)).unwrap();
        // exhaustive scan of the full box (both half-planes)
        let mut best = f64::INFINITY;
        for a in -50i64..=50 {
            for c in -50i64..=50 {
                if a == 0 && c == 0 {
                    continue;
                }
                let d = (a as f64 + SQRT_2 * c as f64).abs();
                best = best.min(d * (a * a + c * c) as f64);
            }
        }
        let r = verify_diophantine(&b, 50).unwrap();
        assert!(r.min_product > 0.0);
        assert_relative_eq!(r.min_product, best, max_relative = 1e-14);
        assert_eq!(r.satisfies_c0, Some(r.min_product >= 0.1));
        let d = b.dot(r.witness).abs() * r.witness.norm().powf(2.0);
        assert_eq!(d, r.min_product);
        // minimum over a superset cannot increase
        let smaller = verify_diophantine(&b, 20).unwrap();
        assert!(r.min_product <= smaller.min_product);
    }

    #[test]
    fn g_theta_norm_examples() {
        let b = FrequencyBasis::default();
        assert_eq!(
            g_theta_norm(&CoefficientField::empty(3), 0.9, &b).unwrap(),
            0.0
        );
        let f = CoefficientField::from_half(1, [(FrequencyIndex::new(1, 0), c(1.0, 0.0))]).unwrap();
        assert_relative_eq!(
            g_theta_norm(&f, 0.0, &b).unwrap(),
            SQRT_2,
            max_relative = 1e-15
        );
        // θ = 1: ⟨1⟩ = √2, ⟨0⟩ = 1, so each term is 2, norm √4
        assert_relative_eq!(
            g_theta_norm(&f, 1.0, &b).unwrap(),
            2.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn g_theta_norm_rejects_degenerate_alpha() {
        let b = FrequencyBasis::new(1.0, 2.0, 2.0, None).unwrap();
        let f =
            CoefficientField::from_half(2, [(FrequencyIndex::new(2, -1), c(1.0, 0.0))]).unwrap();
        assert!(matches!(
            g_theta_norm(&f, 0.5, &b),
            Err(Error::RationalDependence { .. })
        ));
    }

    #[test]
    fn l1_examples() {
        assert_eq!(l1_and_weak_l1(&CoefficientField::empty(1)), (0.0, 0.0));
        let (l1, weak) = l1_and_weak_l1_of(&[1.0, 0.5, 1.0 / 3.0]);
        assert_relative_eq!(l1, 11.0 / 6.0, max_relative = 1e-15);
        assert_relative_eq!(weak, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn constructors_reject_origin_and_out_of_box() {
        assert!(matches!(
            CoefficientField::from_half(2, [(FrequencyIndex::new(0, 0), c(1.0, 0.0))]),
            Err(Error::ZeroIndex)
        ));
        assert!(matches!(
            CoefficientField::from_half(2, [(FrequencyIndex::new(3, 0), c(1.0, 0.0))]),
            Err(Error::OutsideTruncation { .. })
        ));
    }

    #[test]
    fn json_round_trip_and_mirror() {
        let f = CoefficientField::from_half(
            4,
            [
                (FrequencyIndex::new(1, -2), c(0.25, -1.5)),
                (FrequencyIndex::new(0, 3), c(-2.0, 0.125)),
            ],
        )
        .unwrap();
        let text = f.to_json().unwrap();
        let back = CoefficientField::from_json(&text, Some(4)).unwrap();
        assert_eq!(back, f);
        // a non-canonical representative is accepted and mirrored
        let g = CoefficientField::from_json(r#"[{"xi1":-1,"xi2":2,"re":0.25,"im":1.5}]"#, None)
            .unwrap();
        assert_eq!(g.get(FrequencyIndex::new(1, -2)), c(0.25, -1.5));
        assert_eq!(g.radius(), 2);
        // both members of a pair is an error
        assert!(CoefficientField::from_json(
            r#"[{"xi1":1,"xi2":0,"re":1,"im":0},{"xi1":-1,"xi2":0,"re":1,"im":0}]"#,
            None
        )
        .is_err());
    }

    #[test]
    fn sub_and_add_over_union_support() {
        let a = CoefficientField::from_half(2, [(FrequencyIndex::new(1, 0), c(1.0, 1.0))]).unwrap();
        let b = CoefficientField::from_half(2, [(FrequencyIndex::new(0, 1), c(2.0, 0.0))]).unwrap();
        let d = a.sub(&b);
        assert_eq!(d.len(), 4);
        assert_eq!(d.get(FrequencyIndex::new(0, -1)), c(-2.0, 0.0));
        assert_eq!(d.add(&b).get(FrequencyIndex::new(0, 1)), c(0.0, 0.0));
        assert_eq!(d.symmetry_defect(), 0.0);
    }
}
