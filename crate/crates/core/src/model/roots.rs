use serde::Serialize;

use super::law::{ImmigrationLaw, OffspringLaw};
use super::ModelSpec;

/// Default absolute tolerance for the root finders.
pub const ROOT_TOL: f64 = 1e-15;

/// Offspring means within this distance of one are treated as critical.
const CRITICAL_EPS: f64 = 1e-12;

/// `|p̃'(varphi) - 1|` below this is reported as a tangency.
pub const TANGENCY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub varphi: f64,
    pub phi: f64,
    pub criticality: Criticality,
    pub explosive: bool,
    pub offspring_mean: f64,
    /// `p̃'(varphi-)`.
    pub slope_at_varphi: f64,
    /// The branching drift touches zero tangentially at `varphi`.
    pub tangency: bool,
}

/// Bisection on a sign change, `f(lo) > 0 > f(hi)` (or the reverse), to absolute
/// width `tol`, then Newton steps that must stay inside the final bracket.
fn bracketed_root(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64 {
    let f_lo_positive = f(lo) > 0.0;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == f_lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut z = 0.5 * (lo + hi);
    for _ in 0..4 {
        let d = df(z);
        if !(d.is_finite() && d != 0.0) {
            break;
        }
        let next = z - f(z) / d;
        if !(next >= lo && next <= hi) || next == z {
            break;
        }
        z = next;
    }
    z
}

/// First point of `(0, 1)` where an increasing function reaches `target`.
fn increasing_crossing(g: impl Fn(f64) -> f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn criticality(spec: &ModelSpec) -> Criticality {
    let m = spec.offspring_mean();
    if m > 1.0 + CRITICAL_EPS {
        Criticality::Supercritical
    } else if m < 1.0 - CRITICAL_EPS {
        Criticality::Subcritical
    } else {
        Criticality::Critical
    }
}

/// Smallest root of `p̃(z) = z` in `(0, 1]`.
pub fn root_varphi(spec: &ModelSpec, tol: f64) -> f64 {
    if criticality(spec) != Criticality::Supercritical {
        return 1.0;
    }
    let law = spec.offspring();
    // p̃ - id is convex with a single minimum at the root of p̃' = 1.
    let z_min = increasing_crossing(|z| law.derivative(z), 1.0);
    bracketed_root(
        |z| law.pgf_unchecked(z) - z,
        |z| law.derivative(z) - 1.0,
        0.0,
        z_min,
        tol,
    )
}

/// Root `phi_q` of `q = mu (r̃(z) - 1)`; `phi` at `q = 0`; zero without culling.
pub fn root_phi_q(spec: &ModelSpec, q: f64, tol: f64) -> f64 {
    if !spec.has_culling() {
        return 0.0;
    }
    let imm = spec.immigration();
    let mu = spec.mu();
    if q > 0.0 {
        return bracketed_root(
            |z| mu * (imm.pgf_unchecked(z) - 1.0) - q,
            |z| mu * imm.derivative(z),
            0.0,
            1.0,
            tol,
        );
    }
    // q = 0: besides z = 1 there is a second root iff r̃ dips below one, i.e.
    // the net jump mean is positive.
    if imm.mean() <= 0.0 {
        return 1.0;
    }
    let z_min = increasing_crossing(|z| imm.derivative(z), 0.0);
    bracketed_root(
        |z| imm.pgf_unchecked(z) - 1.0,
        |z| imm.derivative(z),
        0.0,
        z_min,
        tol,
    )
}

/// Root `varphi_qbar` of `(lambda + qbar) z = lambda p̃(z)`; `varphi` at `qbar = 0`.
pub fn root_varphi_qbar(spec: &ModelSpec, qbar: f64, tol: f64) -> f64 {
    if qbar <= 0.0 {
        return root_varphi(spec, tol);
    }
    let law = spec.offspring();
    let lambda = spec.lambda();
    bracketed_root(
        |z| lambda * law.pgf_unchecked(z) - (lambda + qbar) * z,
        |z| lambda * law.derivative(z) - (lambda + qbar),
        0.0,
        1.0,
        tol,
    )
}

/// Explosivity: `varphi < 1` and `∫^1 dz / (z - p̃(z)) < ∞`.
///
/// Finite-support laws have `z - p̃(z) ~ (m - 1)(1 - z)` at one, so the integral
/// diverges; the Sibuya mixture has `z - p̃(z) ~ (1 - p0)(1 - z)^alpha`, which is
/// integrable.
pub fn is_explosive(spec: &ModelSpec) -> bool {
    match spec.offspring() {
        OffspringLaw::Tabular(_) => false,
        OffspringLaw::SibuyaMix { .. } => true,
    }
}

pub fn classify(spec: &ModelSpec) -> RegimeReport {
    let varphi = root_varphi(spec, ROOT_TOL);
    let slope = if varphi < 1.0 {
        spec.offspring().derivative(varphi)
    } else {
        spec.offspring_mean()
    };
    RegimeReport {
        varphi,
        phi: root_phi_q(spec, 0.0, ROOT_TOL),
        criticality: criticality(spec),
        explosive: is_explosive(spec),
        offspring_mean: spec.offspring_mean(),
        slope_at_varphi: slope,
        tangency: (slope - 1.0).abs() < TANGENCY_EPS,
    }
}

/// Immigration mean `r̃'(1-)`, exposed for the extinction classification.
pub(crate) fn immigration_mean(spec: &ModelSpec) -> f64 {
    match spec.immigration() {
        ImmigrationLaw::None => 0.0,
        law => law.mean(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;

    #[test]
    fn varphi_examples() {
        assert!((root_varphi(&m2(), ROOT_TOL) - 0.5).abs() < 1e-14);
        assert_eq!(root_varphi(&m1(), ROOT_TOL), 1.0);
        assert!((root_varphi(&m4(), ROOT_TOL) - 0.36).abs() < 1e-14);
    }

    #[test]
    fn phi_q_examples() {
        assert!((root_phi_q(&m2(), 1.0, ROOT_TOL) - 0.5).abs() < 1e-14);
        assert_eq!(root_phi_q(&m3(), 1.0, ROOT_TOL), 0.0);
        assert_eq!(root_phi_q(&m2(), 0.0, ROOT_TOL), 1.0);
        let q = 3.0;
        assert!((root_phi_q(&m2(), q, ROOT_TOL) - 1.0 / (1.0 + q)).abs() < 1e-14);
    }

    #[test]
    fn varphi_qbar_examples() {
        assert_eq!(root_varphi_qbar(&m1(), 0.0, ROOT_TOL), 1.0);
        let r = root_varphi_qbar(&m1(), 1.0, ROOT_TOL);
        assert!((r - (4.0 - 13f64.sqrt())).abs() < 1e-14);
        let r = root_varphi_qbar(&m2(), 3.0, ROOT_TOL);
        assert!((r - (1.5 - 7f64.sqrt() / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn classification() {
        let r = classify(&m1());
        assert_eq!(r.criticality, Criticality::Subcritical);
        assert_eq!((r.varphi, r.phi, r.explosive), (1.0, 0.0, false));
        let r = classify(&m2());
        assert_eq!(r.criticality, Criticality::Supercritical);
        assert!((r.varphi - 0.5).abs() < 1e-14);
        assert_eq!((r.phi, r.explosive), (1.0, false));
        let r = classify(&m3());
        assert_eq!(r.criticality, Criticality::Subcritical);
        assert_eq!((r.varphi, r.phi), (1.0, 0.0));
        assert!(classify(&m4()).explosive);
        let r = classify(&m5());
        assert_eq!(r.criticality, Criticality::Critical);
        assert!(r.tangency);
    }

    #[test]
    fn culling_with_positive_net_mean_has_interior_phi() {
        // r̃(z) = 0.5/z + 0.5 z^2: r̃ = 1 at z = 1 and at z = (√5 - 1)/2.
        let spec = ModelSpec::new(
            OffspringLaw::tabular(vec![0.75, 0.0, 0.25]),
            1.0,
            ImmigrationLaw::tabular(&[(-1, 0.5), (2, 0.5)]).unwrap(),
            1.0,
        )
        .unwrap();
        let phi = root_phi_q(&spec, 0.0, ROOT_TOL);
        assert!((phi - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-14);
    }
}
