use crate::error::{Error, Result};
use crate::model::{root_varphi_qbar, ImmigrationLaw, ModelSpec, OffspringLaw, ROOT_TOL};
use crate::model::PMF_SUM_TOL;
use crate::quad::QuadConfig;

/// Exponentially tilts a pmf by `z^k`; infinite supports are cut where the
/// remaining tilted mass drops below `PMF_SUM_TOL` and renormalized.
fn tilt_pmf(pmf: impl Fn(u64) -> f64, first: u64, finite_len: Option<u64>, z: f64, total: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut acc = 0.0;
    let mut k = first;
    loop {
        let p = pmf(k) * z.powi(k as i32 - first as i32) / total;
        out.push(p);
        acc += p;
        k += 1;
        match finite_len {
            Some(n) if k >= n => break,
            None if 1.0 - acc < PMF_SUM_TOL || z.powf(k as f64) < f64::MIN_POSITIVE => break,
            _ => {}
        }
    }
    if finite_len.is_none() {
        for p in out.iter_mut() {
            *p /= acc;
        }
    }
    out
}

/// The model under the `(q, qbar)` measure change: offspring
/// `p_k z^k / p̃(z)` at rate `lambda + qbar`, immigration `r_k z^k / r̃(z)` at
/// rate `mu r̃(z)`, with `z = varphi_qbar`.
pub fn tilted_model(spec: &ModelSpec, qbar: f64, cfg: &QuadConfig) -> Result<ModelSpec> {
    cfg.validate()?;
    if !(qbar >= 0.0 && qbar.is_finite()) {
        return Err(Error::Domain { name: "qbar", value: qbar, domain: "[0, inf)" });
    }
    let z = root_varphi_qbar(spec, qbar, ROOT_TOL);
    if !(z < 1.0) {
        return Err(Error::regime("varphi_qbar < 1", format!("varphi_qbar={z}")));
    }
    let law = spec.offspring();
    let pz = law.pgf_unchecked(z);
    let offspring = match law {
        OffspringLaw::Tabular(p) => tilt_pmf(|k| law.pmf(k), 0, Some(p.len() as u64), z, pz),
        OffspringLaw::SibuyaMix { .. } => tilt_pmf(|k| law.pmf(k), 0, None, z, pz),
    };
    let lambda = spec.lambda() + qbar;
    let (immigration, mu) = match spec.immigration() {
        ImmigrationLaw::None => (ImmigrationLaw::None, spec.mu()),
        imm => {
            let rz = imm.pgf_unchecked(z);
            // Index i of the tilted vector holds r'_{i-1}.
            let finite = match imm {
                ImmigrationLaw::Tabular { batches, .. } => Some(batches.len() as u64 + 1),
                _ => None,
            };
            let tilted = tilt_pmf(|i| imm.pmf(i as i64 - 1), 0, finite, z, rz * z);
            let entries: Vec<(i64, f64)> = tilted
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(i, p)| (i as i64 - 1, *p))
                .collect();
            (ImmigrationLaw::tabular(&entries)?, spec.mu() * rz)
        }
    };
    ModelSpec::new(OffspringLaw::tabular(offspring), lambda, immigration, mu)
}
