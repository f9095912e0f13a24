//! Laplace transforms, probabilities and means of first-passage and explosion
//! times, built from the scale functions.

mod atmin;
mod conditioned;
mod tilt;

pub use atmin::{atmin_law, atmin_lt_g, atmin_lt_residual, AtMinLaw};
pub use conditioned::{conditioned_generator, ConditionedGenerator, GeneratorRow};
pub use tilt::tilted_model;

use crate::error::{Error, Result};
use crate::model::{is_explosive, root_phi_q, root_varphi, Criticality, ModelSpec, ROOT_TOL};
use crate::quad::kernel::{End, Kernel, Rate};
use crate::quad::QuadConfig;
use crate::scale::{phi_0_integral_finite, Scale};

fn check_levels(x: u64, a: u64) -> Result<()> {
    if a > x {
        return Err(Error::Domain { name: "a", value: a as f64, domain: "a <= x" });
    }
    Ok(())
}

/// `Phi_q` for `q > 0`, `Phi_0` for `q = 0`.
pub(crate) fn scale_for(spec: &ModelSpec, q: f64, cfg: &QuadConfig) -> Result<Scale> {
    if q == 0.0 {
        Scale::phi_0(spec, cfg)
    } else {
        Scale::phi_q(spec, q, cfg)
    }
}

fn ratio(s: &Scale, x: u64, a: u64) -> Result<f64> {
    if x == a {
        return Ok(1.0);
    }
    Ok(s.value(x)? / s.value(a)?)
}

/// `E_x[exp(-q T_a); T_a < ∞]` for the first passage `T_a` below or at `a`.
pub fn lt_first_passage(spec: &ModelSpec, q: f64, x: u64, a: u64, cfg: &QuadConfig) -> Result<f64> {
    check_levels(x, a)?;
    ratio(&scale_for(spec, q, cfg)?, x, a)
}

/// `P_x(T_a < ∞)`.
pub fn prob_passage(spec: &ModelSpec, x: u64, a: u64, cfg: &QuadConfig) -> Result<f64> {
    check_levels(x, a)?;
    ratio(&Scale::phi_0(spec, cfg)?, x, a)
}

/// Whether extinction is almost sure from every start.
pub fn certain_extinction(spec: &ModelSpec, cfg: &QuadConfig) -> Result<bool> {
    cfg.validate()?;
    let varphi = root_varphi(spec, ROOT_TOL);
    let phi = root_phi_q(spec, 0.0, ROOT_TOL);
    if phi > varphi + crate::scale::TIE_TOL {
        return Err(Error::regime("phi <= varphi", format!("phi > varphi: phi={phi}, varphi={varphi}")));
    }
    Ok(varphi == 1.0 && (spec.mu_eff() == 0.0 || phi == 1.0 || !phi_0_integral_finite(spec)))
}

fn require_explosive(spec: &ModelSpec) -> Result<()> {
    if is_explosive(spec) {
        Ok(())
    } else {
        Err(Error::regime("explosive", "the branching mechanism does not explode"))
    }
}

/// `E_x[exp(-q zeta); zeta < T_a]`.
pub fn lt_explosion_before(spec: &ModelSpec, q: f64, x: u64, a: u64, cfg: &QuadConfig) -> Result<f64> {
    check_levels(x, a)?;
    require_explosive(spec)?;
    if x == a {
        return Ok(0.0);
    }
    let psi = Scale::psi_q(spec, q, cfg)?;
    let phi = Scale::phi_q(spec, q, cfg)?;
    Ok(psi.value(x)? - psi.value(a)? * phi.value(x)? / phi.value(a)?)
}

/// `P_x(zeta < T_a) = 1 - P_x(T_a < ∞)`.
pub fn prob_explosion_before(spec: &ModelSpec, x: u64, a: u64, cfg: &QuadConfig) -> Result<f64> {
    check_levels(x, a)?;
    require_explosive(spec)?;
    Ok(1.0 - prob_passage(spec, x, a, cfg)?)
}

/// `E_x[T_a]` under certain extinction with `phi < 1`.
pub fn mean_first_passage(spec: &ModelSpec, x: u64, a: u64, cfg: &QuadConfig) -> Result<f64> {
    check_levels(x, a)?;
    if !certain_extinction(spec, cfg)? {
        return Err(Error::Precondition("mean_first_passage needs certain extinction".into()));
    }
    let phi = root_phi_q(spec, 0.0, ROOT_TOL);
    if phi >= 1.0 {
        return Err(Error::Precondition(format!("mean_first_passage needs phi < 1, got {phi}")));
    }
    if x == a {
        return Ok(0.0);
    }
    if crate::model::criticality(spec) == Criticality::Critical {
        return Err(Error::Divergent("critical branching: the mean passage time is infinite".into()));
    }
    let rate = Rate { constant: 0.0, immigration: true, qbar: 0.0 };
    let lo = End { at: 0.0, drift: spec.drift(0.0, 0.0) };
    let kernel = Kernel::new(spec, rate, lo, End::root(1.0), 1.0, cfg);
    let gap = (x - a) as f64;
    let r = kernel.integrate(|n| {
        let lw = n.log_weight();
        if lw == f64::NEG_INFINITY {
            return 0.0;
        }
        let ln_v = n.at.ln();
        // v^a - v^x without cancellation near one.
        -(lw + a as f64 * ln_v).exp() * (gap * ln_v).exp_m1()
    });
    match r {
        Ok(r) if r.value.is_finite() && r.value > 0.0 => Ok(r.value),
        Ok(r) => Err(Error::Divergent(format!("mean passage integral evaluated to {}", r.value))),
        Err(e) => Err(Error::Divergent(format!("mean passage integral failed: {e}"))),
    }
}

/// `E_x[zeta; zeta < ∞]` for explosive models without immigration.
pub fn mean_explosion(spec: &ModelSpec, x: u64, cfg: &QuadConfig) -> Result<f64> {
    cfg.validate()?;
    if spec.mu_eff() != 0.0 {
        return Err(Error::Precondition("mean_explosion needs mu = 0".into()));
    }
    require_explosive(spec)?;
    if x == 0 {
        return Err(Error::Domain { name: "x", value: 0.0, domain: ">= 1" });
    }
    let varphi = root_varphi(spec, ROOT_TOL);
    let rate = Rate { constant: 1.0, immigration: false, qbar: 0.0 };
    let kernel = Kernel::new(spec, rate, End::root(varphi), End::root(1.0), 1.0, cfg);
    let xf = x as f64;
    // The kernel's log-weight is `∫_v^1 1/D = -∫_v^1 dw / (lambda (w - p̃(w)))`.
    let r = kernel.integrate(|n| {
        if n.log_omega == f64::NEG_INFINITY {
            return 0.0;
        }
        -n.log_omega * ((xf - 1.0) * n.at.ln()).exp()
    })?;
    Ok(xf * r.value)
}

/// `E_x[exp(-q T_a - qbar ∫_0^{T_a} X_s ds); T_a < ∞]`.
pub fn lt_joint_avalanche(spec: &ModelSpec, q: f64, qbar: f64, x: u64, a: u64, cfg: &QuadConfig) -> Result<f64> {
    check_levels(x, a)?;
    ratio(&Scale::phi_q_qbar(spec, q, qbar, cfg)?, x, a)
}
