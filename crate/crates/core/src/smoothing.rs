//! Nonlinear smoothing diagnostics and the normal-form machinery:
//! resonance factorization, the Case 1 / Case 2 region split, and the
//! boundary term `B(s)` of the integrated interaction equation.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::kdv::{interaction_derivative, Trajectory};
use crate::lattice::{CoefficientField, FrequencyBasis, FrequencyIndex};
use crate::quad::simpson;
use crate::waves::airy_propagate;

/// Default constant standing in for "much larger than".
pub const DEFAULT_MARGIN: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub times: Vec<f64>,
    /// `‖q̂(t) − e^{it(α·ξ)³}q̂(0)‖_{ℓ¹}`.
    pub l1_difference: Vec<f64>,
    /// `‖e^{it(α·ξ)³}q̂(0)‖_{ℓ¹}`.
    pub l1_linear: Vec<f64>,
    #[serde(rename = "N")]
    pub n: i64,
    pub theta: f64,
    /// Diophantine exponent of the basis.
    pub gamma: f64,
    /// Exponent used to place `θ` in `(max{7/8, γ/2}, 1)`; the window is
    /// empty for `γ ≥ 2`, in which case `1.5` is used.
    pub gamma_window: f64,
    pub margin: f64,
}

/// Compares each state with the Airy evolution of the first one.
///
/// `theta` and `margin` are bookkeeping only and are recorded in the report.
pub fn smoothing_difference(traj: &Trajectory, basis: &FrequencyBasis) -> Result<SmoothingReport> {
    let initial = traj
        .states
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
    let mut l1_difference = Vec::with_capacity(traj.states.len());
    let mut l1_linear = Vec::with_capacity(traj.states.len());
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let linear = airy_propagate(initial, *t, basis);
        l1_difference.push(state.sub(&linear).magnitude());
        l1_linear.push(linear.magnitude());
    }
    Ok(SmoothingReport {
        times: traj.times.clone(),
        l1_difference,
        l1_linear,
        n: traj.config.n,
        theta: 0.9,
        gamma: basis.gamma,
        gamma_window: window_gamma(basis.gamma),
        margin: DEFAULT_MARGIN,
    })
}

/// `γ` itself when the θ-window is nonempty, else `1.5`.
pub fn window_gamma(gamma: f64) -> f64 {
    if gamma < 2.0 {
        gamma
    } else {
        1.5
    }
}

impl SmoothingReport {
    /// True when `max{7/8, γ_w/2} < θ < 1`.
    pub fn theta_in_window(&self) -> bool {
        self.theta > (0.875f64).max(0.5 * self.gamma_window) && self.theta < 1.0
    }

    pub fn with_bookkeeping(mut self, theta: f64, margin: f64) -> Self {
        self.theta = theta;
        self.margin = margin;
        self
    }

    /// `t,l1_difference,l1_linear` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,l1_difference,l1_linear")?;
        for k in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{}",
                fmt_f64(self.times[k]),
                fmt_f64(self.l1_difference[k]),
                fmt_f64(self.l1_linear[k])
            )?;
        }
        Ok(())
    }

    /// `{N, theta, gamma, gamma_window, theta_in_window, margin}`.
    pub fn metadata_json(&self) -> Result<String> {
        crate::io::to_json_pretty(&serde_json::json!({
            "N": self.n,
            "theta": self.theta,
            "gamma": self.gamma,
            "gamma_window": self.gamma_window,
            "theta_in_window": self.theta_in_window(),
            "margin": self.margin,
        }))
    }
}

/// `Φ = 3[α·(ξʲ+ξᵏ)][α·(ξʲ+ξˡ)][α·(ξᵏ+ξˡ)]`.
pub fn resonance_phase(xi: [FrequencyIndex; 3], basis: &FrequencyBasis) -> f64 {
    let [a, b, c] = xi.map(|x| basis.dot(x));
    3.0 * (a + b) * (a + c) * (b + c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    Case1,
    Case2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub case: Case,
    /// The inputs were exchanged so that `|α·ξ⁽¹⁾| ≥ |α·ξ⁽²⁾|`.
    pub swapped: bool,
}

/// Classifies the decomposition `ξ = ξ⁽¹⁾ + ξ⁽²⁾`.
///
/// After ordering so that `|α·ξ⁽¹⁾| ≥ |α·ξ⁽²⁾|`, and labelling the larger
/// coordinate of `ξ⁽¹⁾` as the first, the pair is Case 2 when
/// `|ξ⁽¹⁾₁| > margin·(|ξ⁽¹⁾₂| + |ξ⁽²⁾₁| + |ξ⁽²⁾₂|)`.
pub fn region_classifier(
    xi1: FrequencyIndex,
    xi2: FrequencyIndex,
    basis: &FrequencyBasis,
    margin: f64,
) -> Classification {
    let swapped = basis.dot(xi1).abs() < basis.dot(xi2).abs();
    let (big, small) = if swapped { (xi2, xi1) } else { (xi1, xi2) };
    let lead = big.xi1.abs().max(big.xi2.abs());
    let other = big.xi1.abs().min(big.xi2.abs());
    let rest = (other + small.xi1.abs() + small.xi2.abs()) as f64;
    let case = if lead as f64 > margin * rest {
        Case::Case2
    } else {
        Case::Case1
    };
    Classification { case, swapped }
}

/// True for ordered pairs in the region `R`: already normalized (no swap)
/// and Case 2. Each unordered decomposition is counted at most once.
pub fn in_region(
    xi1: FrequencyIndex,
    xi2: FrequencyIndex,
    basis: &FrequencyBasis,
    margin: f64,
) -> bool {
    let c = region_classifier(xi1, xi2, basis, margin);
    !c.swapped && c.case == Case::Case2
}

/// Region sum `ξ ↦ Σ_R w(ξ, ξ⁽¹⁾, ξ⁽²⁾) a_{ξ⁽¹⁾} b_{ξ⁽²⁾}` over canonical
/// outputs, mirrored to a Hermitian field. `truncate` drops outputs outside
/// the box of that radius.
fn region_sum<W>(
    a: &CoefficientField,
    b: &CoefficientField,
    basis: &FrequencyBasis,
    margin: f64,
    truncate: Option<i64>,
    weight: W,
) -> CoefficientField
where
    W: Fn(FrequencyIndex, FrequencyIndex, FrequencyIndex) -> Complex64,
{
    let mut acc: BTreeMap<FrequencyIndex, Complex64> = BTreeMap::new();
    for (x1, v1) in a.iter() {
        for (x2, v2) in b.iter() {
            let xi = x1 + x2;
            if xi.is_zero() || !xi.is_canonical() {
                continue;
            }
            if truncate.is_some_and(|n| xi.sup_norm() > n) {
                continue;
            }
            if !in_region(x1, x2, basis, margin) {
                continue;
            }
            *acc.entry(xi).or_default() += weight(xi, x1, x2) * v1 * v2;
        }
    }
    let radius = truncate.unwrap_or(a.radius() + b.radius());
    CoefficientField::from_half(radius, acc.into_iter().filter(|(_, v)| v.norm() > 0.0))
        .expect("region outputs are nonzero and inside the box")
}

/// `B(s)_ξ = Σ_R −e^{−3is(α·ξ)(α·ξ⁽¹⁾)(α·ξ⁽²⁾)} û_{ξ⁽¹⁾}û_{ξ⁽²⁾} / [(α·ξ⁽¹⁾)(α·ξ⁽²⁾)]`
/// for the interaction-representation state `û(s)`.
pub fn boundary_term(
    state: &CoefficientField,
    s: f64,
    basis: &FrequencyBasis,
    margin: f64,
) -> CoefficientField {
    boundary_term_in(state, s, basis, margin, None)
}

fn boundary_term_in(
    state: &CoefficientField,
    s: f64,
    basis: &FrequencyBasis,
    margin: f64,
    truncate: Option<i64>,
) -> CoefficientField {
    region_sum(state, state, basis, margin, truncate, |xi, x1, x2| {
        let (d, d1, d2) = (basis.dot(xi), basis.dot(x1), basis.dot(x2));
        -Complex64::from_polar(1.0, -3.0 * s * d * d1 * d2) / (d1 * d2)
    })
}

/// Triangle-inequality bound `Σ_R |û_{ξ⁽¹⁾}û_{ξ⁽²⁾}| / |α·ξ⁽¹⁾||α·ξ⁽²⁾|` over
/// all ordered region pairs, which dominates `‖B(s)‖_{ℓ¹}`.
pub fn boundary_term_bound(state: &CoefficientField, basis: &FrequencyBasis, margin: f64) -> f64 {
    let mut total = 0.0;
    for (x1, v1) in state.iter() {
        for (x2, v2) in state.iter() {
            if (x1 + x2).is_zero() || !in_region(x1, x2, basis, margin) {
                continue;
            }
            total += v1.norm() * v2.norm() / (basis.dot(x1) * basis.dot(x2)).abs();
        }
    }
    total
}

/// Outcome of the integration-by-parts audit on the region `R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalFormAudit {
    /// `max_ξ |LHS − RHS|`.
    pub residual: f64,
    /// `max_ξ |LHS|`, the scale of the region contribution.
    pub scale: f64,
    pub margin: f64,
}

/// Checks, on the Case 2 region,
///
/// `∫₀ᵗ 3i(α·ξ) Σ_R e^{−3is(α·ξ)(α·ξ⁽¹⁾)(α·ξ⁽²⁾)} û₁û₂ ds
///   = B(t) − B(0) + ∫₀ᵗ Σ_R e^{…}/[(α·ξ⁽¹⁾)(α·ξ⁽²⁾)] (û₁'û₂ + û₁û₂') ds`
///
/// with both time integrals by Simpson's rule over the trajectory, `û'`
/// from the interaction equation, and outputs truncated to the solver box.
pub fn normal_form_audit(traj: &Trajectory, margin: f64) -> Result<NormalFormAudit> {
    let basis = &traj.basis;
    let n = traj.config.n;
    let m = traj.times.len();
    if m < 3 {
        return Err(Error::InvalidParameter(
            "normal-form audit needs at least three states".into(),
        ));
    }
    let h = traj.times[1] - traj.times[0];
    if traj
        .times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - h).abs() > 1e-12 * h.abs())
    {
        return Err(Error::InvalidParameter(
            "normal-form audit needs uniform time steps".into(),
        ));
    }
    let mut lhs_samples = Vec::with_capacity(m);
    let mut rem_samples = Vec::with_capacity(m);
    for k in 0..m {
        let s = traj.times[k];
        let u = traj.interaction_state(k);
        let du = interaction_derivative(&u, s, basis, n);
        lhs_samples.push(region_sum(&u, &u, basis, margin, Some(n), |xi, x1, x2| {
            let (d, d1, d2) = (basis.dot(xi), basis.dot(x1), basis.dot(x2));
            Complex64::new(0.0, 3.0 * d) * Complex64::from_polar(1.0, -3.0 * s * d * d1 * d2)
        }));
        let phase = |xi: FrequencyIndex, x1: FrequencyIndex, x2: FrequencyIndex| {
            let (d, d1, d2) = (basis.dot(xi), basis.dot(x1), basis.dot(x2));
            Complex64::from_polar(1.0, -3.0 * s * d * d1 * d2) / (d1 * d2)
        };
        let a = region_sum(&du, &u, basis, margin, Some(n), phase);
        let b = region_sum(&u, &du, basis, margin, Some(n), phase);
        rem_samples.push(a.add(&b));
    }
    let keys: Vec<FrequencyIndex> = {
        let mut set = std::collections::BTreeSet::new();
        for f in lhs_samples.iter().chain(&rem_samples) {
            set.extend(f.iter().map(|(xi, _)| xi));
        }
        set.into_iter().collect()
    };
    let b0 = boundary_term_in(
        &traj.interaction_state(0),
        traj.times[0],
        basis,
        margin,
        Some(n),
    );
    let b1 = boundary_term_in(
        &traj.interaction_state(m - 1),
        traj.times[m - 1],
        basis,
        margin,
        Some(n),
    );
    let mut residual: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for xi in keys
        .into_iter()
        .chain(b1.iter().map(|e| e.0))
        .chain(b0.iter().map(|e| e.0))
    {
        let lhs_series: Vec<Complex64> = lhs_samples.iter().map(|f| f.get(xi)).collect();
        let rem_series: Vec<Complex64> = rem_samples.iter().map(|f| f.get(xi)).collect();
        let lhs = simpson(&lhs_series, h);
        let rhs = b1.get(xi) - b0.get(xi) + simpson(&rem_series, h);
        residual = residual.max((lhs - rhs).norm());
        scale = scale.max(lhs.norm());
    }
    Ok(NormalFormAudit {
        residual,
        scale,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kdv::{solve, SolverConfig};
    use crate::waves::square_wave_both;
    use std::f64::consts::SQRT_2;

    fn fi(a: i64, b: i64) -> FrequencyIndex {
        FrequencyIndex::new(a, b)
    }

    #[test]
    fn resonance_examples() {
        let b = FrequencyBasis::default();
        // (a+b)³ − a³ − b³ = 3(a+b)ab with a = 1, b = 2
        let one = FrequencyBasis::new(1.0, 2.0, 2.0, None).unwrap();
        let phi = resonance_phase([fi(1, 0), fi(0, 1), fi(-1, 0)], &one);
        // pairs sum to α·(1,1) = 3, α·(0,0) = 0, α·(−1,1) = 1
        assert_eq!(phi, 0.0);
        assert_eq!(27.0 - 1.0 - 8.0, 3.0 * 3.0 * 1.0 * 2.0);
        assert_eq!(resonance_phase([fi(2, 3), fi(-2, -3), fi(1, 5)], &b), 0.0);
        let v = resonance_phase([fi(1, 0), fi(0, 1), fi(1, -1)], &b);
        assert!((v - 3.0 * (1.0 + SQRT_2) * (2.0 - SQRT_2)).abs() < 1e-14);
        assert!((v - 3.0 * SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn resonance_is_symmetric() {
        let b = FrequencyBasis::default();
        let xs = [fi(3, -1), fi(-2, 4), fi(5, 2)];
        let base = resonance_phase(xs, &b);
        for perm in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let p = resonance_phase([xs[perm[0]], xs[perm[1]], xs[perm[2]]], &b);
            assert!((p - base).abs() <= 1e-12 * base.abs());
        }
    }

    #[test]
    fn classifier_examples() {
        let b = FrequencyBasis::default();
        let c = region_classifier(fi(100, 0), fi(1, 1), &b, 10.0);
        assert_eq!(
            c,
            Classification {
                case: Case::Case2,
                swapped: false
            }
        );
        assert_eq!(
            region_classifier(fi(2, 1), fi(1, 1), &b, 10.0).case,
            Case::Case1
        );
        let s = region_classifier(fi(1, 1), fi(100, 0), &b, 10.0);
        assert_eq!(
            s,
            Classification {
                case: Case::Case2,
                swapped: true
            }
        );
        // the dominant coordinate may sit on the second axis
        assert_eq!(
            region_classifier(fi(0, 90), fi(1, 0), &b, 10.0).case,
            Case::Case2
        );
    }

    #[test]
    fn classifier_is_order_independent() {
        let b = FrequencyBasis::default();
        for a1 in -8..=8 {
            for a2 in -8..=8 {
                for c1 in -8..=8 {
                    for c2 in -8..=8 {
                        let (x, y) = (fi(a1, a2), fi(c1, c2));
                        if x.is_zero() || y.is_zero() {
                            continue;
                        }
                        let p = region_classifier(x, y, &b, 2.0);
                        let q = region_classifier(y, x, &b, 2.0);
                        assert_eq!(p.case, q.case);
                        // at most one ordering is counted in R
                        assert!(!(in_region(x, y, &b, 2.0) && in_region(y, x, &b, 2.0)));
                    }
                }
            }
        }
    }

    #[test]
    fn boundary_single_term() {
        let b = FrequencyBasis::default();
        let state = CoefficientField::from_half(
            100,
            [
                (fi(100, 0), Complex64::new(1.0, 0.0)),
                (fi(1, 1), Complex64::new(1.0, 0.0)),
            ],
        )
        .unwrap();
        let s = 0.37;
        let out = boundary_term(&state, s, &b, 8.0);
        let (d1, d2) = (100.0, 1.0 + SQRT_2);
        let d = d1 + d2;
        let want = -Complex64::from_polar(1.0, -3.0 * s * d * d1 * d2) / (d1 * d2);
        assert!((out.get(fi(101, 1)) - want).norm() < 1e-15);
        assert_eq!(out.get(fi(-101, -1)), want.conj());
        assert!(out.magnitude() <= boundary_term_bound(&state, &b, 8.0) * (1.0 + 1e-12));
    }

    #[test]
    fn boundary_vanishes_without_region_pairs() {
        let b = FrequencyBasis::default();
        let f = square_wave_both(5).unwrap();
        assert!(boundary_term(&f, 0.1, &b, 100.0).is_empty());
    }

    #[test]
    fn smoothing_report_basics() {
        let b = FrequencyBasis::default();
        let init = square_wave_both(6).unwrap();
        let cfg = SolverConfig {
            n: 6,
            t_final: 0.001,
            ..Default::default()
        };
        let r = smoothing_difference(&solve(&init, &cfg, &b).unwrap(), &b).unwrap();
        assert_eq!(r.l1_difference[0], 0.0);
        assert!(r.l1_difference[10] > 0.0);
        let lin = SolverConfig {
            nonlinearity: false,
            ..cfg
        };
        let z = smoothing_difference(&solve(&init, &lin, &b).unwrap(), &b).unwrap();
        assert!(z.l1_difference.iter().all(|&v| v == 0.0));
        // gauge invariance: |q̂(t) − e^{itd³}q̂(0)| = |û(t) − û(0)| per mode
        let traj = solve(&init, &cfg, &b).unwrap();
        let k = traj.states.len() - 1;
        let du = traj.interaction_state(k).sub(&traj.states[0]).magnitude();
        let rep = smoothing_difference(&traj, &b).unwrap();
        assert!((du - rep.l1_difference[k]).abs() < 1e-12 * du);
    }

    #[test]
    fn normal_form_identity_holds_on_small_box() {
        let b = FrequencyBasis::default();
        let init = square_wave_both(8).unwrap().scale(0.5);
        let cfg = SolverConfig {
            n: 8,
            dt: 2e-5,
            t_final: 2e-3,
            ..Default::default()
        };
        let traj = solve(&init, &cfg, &b).unwrap();
        let audit = normal_form_audit(&traj, 2.0).unwrap();
        assert!(audit.scale > 1e-4, "{audit:?}");
        assert!(audit.residual < 1e-6 * audit.scale.max(1.0), "{audit:?}");
    }
}
