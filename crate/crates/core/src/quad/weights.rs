//! `rho`, `gamma_q` and the log integrating factors `ln omega`.

use serde::Serialize;

use super::kernel::{End, Kernel, Rate};
use super::QuadConfig;
use crate::error::{Error, Result};
use crate::model::{is_explosive, root_phi_q, root_varphi, ModelSpec, ROOT_TOL};

const SINGULAR_EPS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightEval {
    pub v: f64,
    pub rho: f64,
    pub gamma_q: f64,
    pub log_omega: f64,
}

fn check_open_unit(v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain { name: "v", value: v, domain: "(0, 1)" })
    }
}

fn check_q(q: f64) -> Result<()> {
    if q >= 0.0 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { name: "q", value: q, domain: "[0, inf)" })
    }
}

/// `lambda |p̃(v) - v|`.
pub fn rho(spec: &ModelSpec, v: f64) -> Result<f64> {
    check_open_unit(v)?;
    let varphi = root_varphi(spec, ROOT_TOL);
    if (v - varphi).abs() < SINGULAR_EPS {
        return Err(Error::Singularity(varphi));
    }
    Ok(spec.drift(v, 0.0).abs())
}

/// `(q + mu (1 - r̃(v))) / rho(v)`.
pub fn gamma_q(spec: &ModelSpec, q: f64, v: f64) -> Result<f64> {
    check_q(q)?;
    let r = rho(spec, v)?;
    let mut n = q;
    if spec.mu_eff() > 0.0 {
        n += spec.mu_eff() * spec.immigration().deficit(&crate::model::Abscissa::at(v));
    }
    Ok(n / r)
}

pub(crate) fn lower_kernel(spec: &ModelSpec, rate: Rate, theta: f64, cfg: &QuadConfig) -> Kernel {
    let varphi = root_varphi(spec, ROOT_TOL);
    let lo = End { at: 0.0, drift: spec.drift(0.0, rate.qbar) };
    Kernel::new(spec, rate, lo, End::root(varphi), theta, cfg)
}

pub(crate) fn upper_kernel(spec: &ModelSpec, rate: Rate, cfg: &QuadConfig) -> Kernel {
    let varphi = root_varphi(spec, ROOT_TOL);
    Kernel::new(spec, rate, End::root(varphi), End::root(1.0), 1.0, cfg)
}

/// `-∫_{phi_q}^v gamma_q` for `v` in `(0, varphi)`.
pub fn log_omega_lower(spec: &ModelSpec, q: f64, v: f64, cfg: &QuadConfig) -> Result<f64> {
    check_q(q)?;
    let phi_q = root_phi_q(spec, q, ROOT_TOL);
    log_omega_lower_from(spec, q, phi_q, v, cfg)
}

/// As [`log_omega_lower`] with the delimiter `theta` in `[0, varphi)` in place
/// of `phi_q`.
pub fn log_omega_lower_from(spec: &ModelSpec, q: f64, theta: f64, v: f64, cfg: &QuadConfig) -> Result<f64> {
    check_q(q)?;
    cfg.validate()?;
    let varphi = root_varphi(spec, ROOT_TOL);
    if !(theta < varphi) || theta < 0.0 {
        return Err(Error::Precondition(format!("delimiter {theta} must lie in [0, varphi={varphi})")));
    }
    if !(v > 0.0 && v < varphi) {
        return Err(Error::Domain { name: "v", value: v, domain: "(0, varphi)" });
    }
    let k = lower_kernel(spec, Rate::scale(q), theta, cfg);
    Ok(k.log_omega_at(v)?)
}

/// `-∫_v^1 gamma_q` for `v` in `(varphi, 1)` (explosive models).
pub fn log_omega_upper(spec: &ModelSpec, q: f64, v: f64, cfg: &QuadConfig) -> Result<f64> {
    check_q(q)?;
    cfg.validate()?;
    if !is_explosive(spec) {
        return Err(Error::Precondition("log_omega_upper requires an explosive model".into()));
    }
    if q <= 0.0 {
        return Err(Error::Domain { name: "q", value: q, domain: "(0, inf)" });
    }
    let varphi = root_varphi(spec, ROOT_TOL);
    if !(v > varphi && v < 1.0) {
        return Err(Error::Domain { name: "v", value: v, domain: "(varphi, 1)" });
    }
    let k = upper_kernel(spec, Rate::scale(q), cfg);
    Ok(k.log_omega_at(v)?)
}

/// All weight quantities at `v`; `log_omega` is the lower factor below
/// `varphi` and the upper one above it.
pub fn weight_eval(spec: &ModelSpec, q: f64, v: f64, cfg: &QuadConfig) -> Result<WeightEval> {
    let rho = rho(spec, v)?;
    let gamma_q = gamma_q(spec, q, v)?;
    let varphi = root_varphi(spec, ROOT_TOL);
    let log_omega = if v < varphi {
        let phi_q = root_phi_q(spec, q, ROOT_TOL);
        if phi_q >= varphi {
            return Err(Error::regime("phi_q < varphi", format!("phi_q={phi_q}, varphi={varphi}")));
        }
        log_omega_lower(spec, q, v, cfg)?
    } else {
        log_omega_upper(spec, q, v, cfg)?
    };
    Ok(WeightEval { v, rho, gamma_q, log_omega })
}
