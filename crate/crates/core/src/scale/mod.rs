//! The scale functions `Phi_q`, `Psi_q`, `Phi_0`, `Phi_{q,qbar}` and the
//! harmonic-equation check.

mod harmonic;

use serde::Serialize;

pub use harmonic::harmonic_residual;

use crate::error::{Error, Result};
use crate::model::{
    immigration_mean, is_explosive, root_phi_q, root_varphi, root_varphi_qbar, Abscissa, Criticality,
    ImmigrationLaw, ModelSpec, ROOT_TOL,
};
use crate::quad::kernel::{End, Kernel, Rate};
use crate::quad::QuadConfig;

/// `|phi_q - varphi|` below this selects the power branch.
pub const TIE_TOL: f64 = 1e-9;

/// Slack on the strict inequality `q > mu (r̃(varphi_qbar) - 1)`.
const STRICT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleTag {
    PhiQ,
    PsiQ,
    Phi0,
    PhiQQbar,
}

#[allow(clippy::large_enum_variant)]
enum Form {
    /// `base^x`.
    Power { base: f64 },
    /// `shift + factor ∫ exp(L) / D · v^x`.
    Integral { kernel: Kernel, factor: f64, shift: f64 },
}

/// A scale function bound to one model and one set of rates. Repeated
/// evaluations share the cached log-weight grid.
pub struct Scale {
    tag: ScaleTag,
    q: f64,
    qbar: f64,
    form: Form,
    cfg: QuadConfig,
}

impl std::fmt::Debug for Scale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scale")
            .field("tag", &self.tag)
            .field("q", &self.q)
            .field("qbar", &self.qbar)
            .field("power_base", &self.power_base())
            .finish()
    }
}

fn check_rate(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { name, value: v, domain: "[0, inf)" })
    }
}

fn lower_end(spec: &ModelSpec, qbar: f64) -> End {
    End { at: 0.0, drift: spec.drift(0.0, qbar) }
}

/// Whether the `Phi_0` integral is finite when `varphi = 1`, `mu > 0`, `phi < 1`.
///
/// Near one the branching drift is `lambda (1 - m)(1 - v)` (subcritical) or
/// `lambda sigma^2 / 2 (1 - v)^2` (critical), and `mu (1 - r̃)` is `mu m_r (1 - v)`
/// or `mu (1 - v)^alpha`; the integrand then behaves like `(1 - v)^{kappa - 2}` with
/// `kappa = mu m_r / (lambda sigma^2 / 2)`, or decays faster than any power in the
/// critical Sibuya case.
pub fn phi_0_integral_finite(spec: &ModelSpec) -> bool {
    if crate::model::criticality(spec) != Criticality::Critical {
        return false;
    }
    match spec.immigration() {
        ImmigrationLaw::Sibuya { .. } => true,
        ImmigrationLaw::None => false,
        ImmigrationLaw::Tabular { .. } => {
            let sigma2 = spec.offspring_second_factorial_moment();
            let kappa = spec.mu_eff() * immigration_mean(spec) / (spec.lambda() * sigma2 / 2.0);
            kappa > 1.0
        }
    }
}

impl Scale {
    /// `Phi_q` with the root `phi_q` as delimiter.
    pub fn phi_q(spec: &ModelSpec, q: f64, cfg: &QuadConfig) -> Result<Self> {
        let phi_q = root_phi_q(spec, q, ROOT_TOL);
        Self::phi_q_from(spec, q, phi_q, cfg)
    }

    /// `Phi_q` up to a constant factor, using `theta` in `[0, varphi)` as the
    /// delimiter of the integrating factor.
    pub fn phi_q_from(spec: &ModelSpec, q: f64, theta: f64, cfg: &QuadConfig) -> Result<Self> {
        check_rate("q", q)?;
        cfg.validate()?;
        if q <= 0.0 {
            return Err(Error::Domain { name: "q", value: q, domain: "(0, inf)" });
        }
        let varphi = root_varphi(spec, ROOT_TOL);
        let phi_q = root_phi_q(spec, q, ROOT_TOL);
        if (phi_q - varphi).abs() < TIE_TOL {
            return Ok(Scale { tag: ScaleTag::PhiQ, q, qbar: 0.0, form: Form::Power { base: varphi }, cfg: *cfg });
        }
        if phi_q > varphi {
            return Err(Error::regime("phi_q <= varphi", format!("phi_q > varphi: phi_q={phi_q}, varphi={varphi}")));
        }
        if !(theta >= 0.0 && theta < varphi) {
            return Err(Error::Precondition(format!("delimiter {theta} must lie in [0, varphi={varphi})")));
        }
        let kernel = Kernel::new(spec, Rate::scale(q), lower_end(spec, 0.0), End::root(varphi), theta, cfg);
        Ok(Scale { tag: ScaleTag::PhiQ, q, qbar: 0.0, form: Form::Integral { kernel, factor: q, shift: 0.0 }, cfg: *cfg })
    }

    /// `Psi_q` (explosive models only).
    pub fn psi_q(spec: &ModelSpec, q: f64, cfg: &QuadConfig) -> Result<Self> {
        check_rate("q", q)?;
        cfg.validate()?;
        if !is_explosive(spec) {
            return Err(Error::regime("explosive", "Psi_q needs an explosive branching mechanism"));
        }
        if q <= 0.0 {
            return Err(Error::Domain { name: "q", value: q, domain: "(0, inf)" });
        }
        let varphi = root_varphi(spec, ROOT_TOL);
        let phi_q = root_phi_q(spec, q, ROOT_TOL);
        if phi_q >= varphi {
            return Err(Error::regime("phi_q < varphi", format!("phi_q={phi_q}, varphi={varphi}")));
        }
        let kernel = Kernel::new(spec, Rate::scale(q), End::root(varphi), End::root(1.0), 1.0, cfg);
        Ok(Scale { tag: ScaleTag::PsiQ, q, qbar: 0.0, form: Form::Integral { kernel, factor: q, shift: 1.0 }, cfg: *cfg })
    }

    /// `Phi_0`, following the case split on the immigration term at `varphi`
    /// and the finiteness of the defining integral.
    pub fn phi_0(spec: &ModelSpec, cfg: &QuadConfig) -> Result<Self> {
        cfg.validate()?;
        let varphi = root_varphi(spec, ROOT_TOL);
        let phi = root_phi_q(spec, 0.0, ROOT_TOL);
        if phi > varphi + TIE_TOL {
            return Err(Error::regime("phi <= varphi", format!("phi > varphi: phi={phi}, varphi={varphi}")));
        }
        let mu = spec.mu_eff();
        let at_varphi = if mu > 0.0 && varphi < 1.0 {
            mu * spec.immigration().deficit(&Abscissa::at(varphi))
        } else {
            0.0
        };
        let integral = at_varphi > 0.0 || (mu > 0.0 && phi < 1.0 && varphi == 1.0 && phi_0_integral_finite(spec));
        let form = if integral {
            let rate = Rate { constant: 0.0, immigration: true, qbar: 0.0 };
            let kernel = Kernel::new(spec, rate, lower_end(spec, 0.0), End::root(varphi), phi.min(varphi), cfg);
            Form::Integral { kernel, factor: mu, shift: 0.0 }
        } else {
            Form::Power { base: varphi }
        };
        Ok(Scale { tag: ScaleTag::Phi0, q: 0.0, qbar: 0.0, form, cfg: *cfg })
    }

    /// `Phi_{q,qbar}`, the scale function of the avalanche-size transform.
    pub fn phi_q_qbar(spec: &ModelSpec, q: f64, qbar: f64, cfg: &QuadConfig) -> Result<Self> {
        check_rate("q", q)?;
        check_rate("qbar", qbar)?;
        cfg.validate()?;
        let top = root_varphi_qbar(spec, qbar, ROOT_TOL);
        if !(q > 0.0 || top < 1.0) {
            return Err(Error::regime("q > 0 or varphi_qbar < 1", format!("q={q}, varphi_qbar={top}")));
        }
        let mu = spec.mu_eff();
        if mu == 0.0 && q == 0.0 {
            return Ok(Scale { tag: ScaleTag::PhiQQbar, q, qbar, form: Form::Power { base: top }, cfg: *cfg });
        }
        let bound = if mu > 0.0 { -mu * spec.immigration().deficit(&Abscissa::at(top)) } else { 0.0 };
        let kappa = q - bound;
        if !(kappa > STRICT_TOL) {
            return Err(Error::regime(
                "q > mu (r(varphi_qbar) - 1)",
                format!("q={q}, mu (r(varphi_qbar) - 1)={bound}"),
            ));
        }
        let theta = root_phi_q(spec, q, ROOT_TOL);
        if theta >= top {
            return Err(Error::regime("phi_q < varphi_qbar", format!("phi_q={theta}, varphi_qbar={top}")));
        }
        let rate = Rate { constant: q, immigration: true, qbar };
        let kernel = Kernel::new(spec, rate, lower_end(spec, qbar), End::root(top), theta, cfg);
        let form = Form::Integral { kernel, factor: kappa, shift: 0.0 };
        Ok(Scale { tag: ScaleTag::PhiQQbar, q, qbar, form, cfg: *cfg })
    }

    pub fn tag(&self) -> ScaleTag {
        self.tag
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn qbar(&self) -> f64 {
        self.qbar
    }

    /// `Some(base)` when the function is `base^x`.
    pub fn power_base(&self) -> Option<f64> {
        match self.form {
            Form::Power { base } => Some(base),
            Form::Integral { .. } => None,
        }
    }

    pub fn config(&self) -> &QuadConfig {
        &self.cfg
    }

    /// Value at the population level `x`.
    pub fn value(&self, x: u64) -> Result<f64> {
        self.transform(x as f64, |_| 1.0, 1.0)
    }

    /// `shift · g1 + factor ∫ exp(L)/D · v^x g(v) dv`, or `base^x g(base)` for
    /// the power branch. With `g` a generating function this is the mixture
    /// `Σ_k c_k f(x + k)` of the scale function, and `g1 = g(1) = Σ_k c_k`.
    pub fn transform(&self, x: f64, g: impl Fn(&Abscissa) -> f64, g1: f64) -> Result<f64> {
        match &self.form {
            Form::Power { base } => {
                let at = Abscissa::at(*base);
                Ok(at.pow(x) * g(&at))
            }
            Form::Integral { kernel, factor, shift } => {
                let r = kernel.integrate(|n| {
                    let lw = n.log_weight();
                    if lw == f64::NEG_INFINITY {
                        return 0.0;
                    }
                    let w = (lw + x * n.at.ln()).exp() * g(&n.at);
                    if n.drift < 0.0 {
                        -w
                    } else {
                        w
                    }
                })?;
                Ok(shift * g1 + factor * r.value)
            }
        }
    }
}

/// `Phi_q(x)`.
pub fn phi_q_fn(spec: &ModelSpec, q: f64, x: u64, cfg: &QuadConfig) -> Result<f64> {
    Scale::phi_q(spec, q, cfg)?.value(x)
}

/// `Psi_q(x)`.
pub fn psi_q_fn(spec: &ModelSpec, q: f64, x: u64, cfg: &QuadConfig) -> Result<f64> {
    Scale::psi_q(spec, q, cfg)?.value(x)
}

/// `Phi_0(x)`.
pub fn phi_0_fn(spec: &ModelSpec, x: u64, cfg: &QuadConfig) -> Result<f64> {
    Scale::phi_0(spec, cfg)?.value(x)
}

/// `Phi_{q,qbar}(x)`.
pub fn phi_q_qbar_fn(spec: &ModelSpec, q: f64, qbar: f64, x: u64, cfg: &QuadConfig) -> Result<f64> {
    Scale::phi_q_qbar(spec, q, qbar, cfg)?.value(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::quad::integrate;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    const LN15: f64 = 0.405_465_108_108_164_4;

    #[test]
    fn phi_q_closed_forms() {
        let s = Scale::phi_q(&m1(), 0.5, &cfg()).unwrap();
        assert!((s.value(0).unwrap() - 1.0).abs() < 1e-9);
        assert!((s.value(1).unwrap() - (3.0 - 6.0 * LN15)).abs() < 1e-9);
        assert!((s.value(2).unwrap() - 6.0 * (2.5 - 6.0 * LN15)).abs() < 1e-9);
        let s = Scale::phi_q(&m1(), 1.0, &cfg()).unwrap();
        assert!((s.value(1).unwrap() - (15.0 - 36.0 * LN15)).abs() < 1e-9);
    }

    #[test]
    fn power_branch_on_tie() {
        let s = Scale::phi_q(&m2(), 1.0, &cfg()).unwrap();
        assert!((s.power_base().unwrap() - 0.5).abs() < 1e-15);
        assert!((s.value(3).unwrap() - 0.125).abs() < 1e-15);
        let err = Scale::phi_q(&m2(), 0.5, &cfg()).unwrap_err();
        assert!(err.is_refusal());
    }

    #[test]
    fn m2_closed_form_above_tie() {
        // Closed form of the M2 transform at q = 2.
        let s = Scale::phi_q(&m2(), 2.0, &cfg()).unwrap();
        let r = s.value(1).unwrap() / s.value(0).unwrap();
        assert!((r - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-9, "{r}");
    }

    #[test]
    fn uniform_infimum_instance() {
        let s = Scale::phi_q(&m3(), 1.0, &cfg()).unwrap();
        let f0 = s.value(0).unwrap();
        for x in 1..=6u64 {
            let r = s.value(x).unwrap() / f0;
            assert!((r - 1.0 / (x as f64 + 1.0)).abs() < 1e-10, "x={x} r={r}");
        }
    }

    #[test]
    fn psi_closed_forms() {
        let s = Scale::psi_q(&m4(), 1.0, &cfg()).unwrap();
        assert!(s.value(0).unwrap().abs() < 1e-10);
        assert!((s.value(1).unwrap() - 1.28 / 12.0).abs() < 1e-9);
        let s = Scale::psi_q(&m4(), 2.0, &cfg()).unwrap();
        assert!((s.value(1).unwrap() - 1.28 / 30.0).abs() < 1e-9);
        assert!(Scale::psi_q(&m1(), 1.0, &cfg()).is_err());
    }

    #[test]
    fn phi_0_case_split() {
        assert_eq!(phi_0_fn(&m1(), 3, &cfg()).unwrap(), 1.0);
        assert_eq!(phi_0_fn(&m3(), 3, &cfg()).unwrap(), 1.0);
        assert!((phi_0_fn(&m4(), 2, &cfg()).unwrap() - 0.1296).abs() < 1e-14);
        assert!(Scale::phi_0(&m2(), &cfg()).unwrap_err().is_refusal());
        let s = Scale::phi_0(&m5(), &cfg()).unwrap();
        assert!(s.power_base().is_none());
        let r = s.value(1).unwrap() / s.value(0).unwrap();
        assert!((r - 0.339_693_920_317).abs() < 1e-8, "{r}");
    }

    #[test]
    fn finiteness_classification() {
        assert!(phi_0_integral_finite(&m5()));
        assert!(!phi_0_integral_finite(&m3()));
        let crit = |mu: f64| {
            ModelSpec::new(
                crate::model::OffspringLaw::tabular(vec![0.5, 0.0, 0.5]),
                1.0,
                ImmigrationLaw::tabular(&[(1, 1.0)]).unwrap(),
                mu,
            )
            .unwrap()
        };
        assert!(!phi_0_integral_finite(&crit(0.4)));
        assert!(phi_0_integral_finite(&crit(0.6)));
    }

    #[test]
    fn avalanche_scale() {
        let top = 4.0 - 13f64.sqrt();
        let s = Scale::phi_q_qbar(&m1(), 0.0, 1.0, &cfg()).unwrap();
        assert!((s.power_base().unwrap() - top).abs() < 1e-15);
        let a = Scale::phi_q_qbar(&m1(), 0.5, 0.0, &cfg()).unwrap();
        let b = Scale::phi_q(&m1(), 0.5, &cfg()).unwrap();
        let ra = a.value(2).unwrap() / a.value(0).unwrap();
        let rb = b.value(2).unwrap() / b.value(0).unwrap();
        assert!((ra - rb).abs() < 1e-12);
        assert!(Scale::phi_q_qbar(&m1(), 0.0, 0.0, &cfg()).unwrap_err().is_refusal());
    }

    #[test]
    fn avalanche_without_culling_matches_direct_quadrature() {
        // r_{-1} = 0, q = 0 on M3 with qbar = 0.5: D(w) = (w - r1)(w - r2) / 2 and
        // mu (1 - w) / D has the partial fractions A/(w - r1) + B/(w - r2).
        let spec = m3();
        let qbar = 0.5;
        let top = root_varphi_qbar(&spec, qbar, ROOT_TOL);
        let (r1, r2) = (top, 5.0 - top);
        let a = 2.0 * (1.0 - r1) / (r1 - r2);
        let b = 2.0 * (1.0 - r2) / (r2 - r1);
        // With u = (1 - v/r1)^{-a} the integrand exp(L)/D dv becomes smooth in u.
        let p = -1.0 / a;
        let direct = |x: i32| {
            let f = |u: f64| {
                let v = r1 * (1.0 - u.powf(p));
                (1.0 - v / r2).powf(-b) * v.powi(x) / (-0.5 * a * (r2 - v))
            };
            integrate(f, 0.0, 1.0, &cfg()).unwrap().value
        };
        let s = Scale::phi_q_qbar(&spec, 0.0, qbar, &cfg()).unwrap();
        let want = direct(2) / direct(0);
        let got = s.value(2).unwrap() / s.value(0).unwrap();
        assert!((got - want).abs() < 1e-9, "{got} {want}");
    }

    #[test]
    fn delimiter_ratio_invariance() {
        let spec = m2();
        let q = 3.0;
        let a = Scale::phi_q(&spec, q, &cfg()).unwrap();
        let b = Scale::phi_q_from(&spec, q, 0.25, &cfg()).unwrap();
        let ra = a.value(4).unwrap() / a.value(1).unwrap();
        let rb = b.value(4).unwrap() / b.value(1).unwrap();
        assert!((ra - rb).abs() < 1e-9 * ra);
    }

    #[test]
    fn integration_by_parts_form_without_immigration() {
        // mu = 0: Phi_q(x) = 1{x=0} + x ∫_0^1 omega(v) v^{x-1} dv with
        // omega(v) = (3(1 - v) / (3 - v))^{2q} on M1.
        for q in [0.5, 2.0] {
            let s = Scale::phi_q(&m1(), q, &cfg()).unwrap();
            for x in [1, 2, 5] {
                let omega = |v: f64| (3.0 * (1.0 - v) / (3.0 - v)).powf(2.0 * q);
                let ibp = x as f64 * integrate(|v| omega(v) * v.powi(x - 1), 0.0, 1.0, &cfg()).unwrap().value;
                assert!((s.value(x as u64).unwrap() - ibp).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn monotone_and_vanishing() {
        for (spec, q) in [(m1(), 0.25), (m3(), 4.0), (m4(), 1.0)] {
            let s = Scale::phi_q(&spec, q, &cfg()).unwrap();
            let vals: Vec<f64> = (0..=30).map(|x| s.value(x).unwrap()).collect();
            assert!(vals.iter().all(|v| *v > 0.0));
            assert!(vals.windows(2).all(|w| w[1] < w[0]));
            assert!(vals[30] / vals[0] < vals[15] / vals[0]);
        }
        let s = Scale::psi_q(&m4(), 1.0, &cfg()).unwrap();
        let vals: Vec<f64> = (0..=20).map(|x| s.value(x).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
        assert!(vals.iter().all(|v| *v < 1.0));
    }
}
