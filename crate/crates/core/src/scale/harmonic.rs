use super::{Scale, ScaleTag};
use crate::error::{Error, Result};
use crate::model::{Abscissa, ImmigrationLaw, ModelSpec, OffspringLaw};
use crate::quad::QuadConfig;

/// Relative residual of
/// `(q + qbar x + lambda x + mu) f(x) = lambda x Σ p_k f(x+k-1) + mu Σ r_k f(x+k)`.
///
/// Finite-support laws are summed directly; the Sibuya families use the
/// generating-function form of the mixtures.
pub fn harmonic_residual(spec: &ModelSpec, q: f64, qbar: f64, tag: ScaleTag, x: u64, cfg: &QuadConfig) -> Result<f64> {
    let f = match tag {
        ScaleTag::PhiQ => Scale::phi_q(spec, q, cfg)?,
        ScaleTag::PsiQ => Scale::psi_q(spec, q, cfg)?,
        ScaleTag::PhiQQbar => Scale::phi_q_qbar(spec, q, qbar, cfg)?,
        ScaleTag::Phi0 => {
            return Err(Error::Precondition("harmonic_residual covers Phi_q, Psi_q and Phi_{q,qbar}".into()))
        }
    };
    residual_of(spec, &f, x)
}

/// As [`harmonic_residual`] for an already built scale function.
pub(crate) fn residual_of(spec: &ModelSpec, f: &Scale, x: u64) -> Result<f64> {
    if x == 0 {
        return Err(Error::Domain { name: "x", value: 0.0, domain: ">= 1" });
    }
    let xf = x as f64;
    let lambda = spec.lambda();
    let mu = spec.mu_eff();
    let lhs = (f.q() + f.qbar() * xf + lambda * xf + mu) * f.value(x)?;

    let branch = match spec.offspring() {
        OffspringLaw::Tabular(pmf) => {
            let mut s = 0.0;
            for (k, p) in pmf.iter().enumerate() {
                if *p != 0.0 {
                    s += p * f.value(x + k as u64 - 1)?;
                }
            }
            s
        }
        law @ OffspringLaw::SibuyaMix { .. } => {
            f.transform(xf - 1.0, |at: &Abscissa| law.pgf_unchecked(at.value()), 1.0)?
        }
    };

    let imm = match spec.immigration() {
        _ if mu == 0.0 => 0.0,
        ImmigrationLaw::None => 0.0,
        ImmigrationLaw::Tabular { culling, batches } => {
            let mut s = culling * f.value(x - 1)?;
            for (k, r) in batches.iter().enumerate().skip(1) {
                if *r != 0.0 {
                    s += r * f.value(x + k as u64)?;
                }
            }
            s
        }
        law @ ImmigrationLaw::Sibuya { .. } => {
            f.transform(xf, |at: &Abscissa| 1.0 - law.deficit(at), 1.0)?
        }
    };

    let rhs = lambda * xf * branch + mu * imm;
    Ok(((lhs - rhs) / lhs).abs())
}
