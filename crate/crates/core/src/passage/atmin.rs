use serde::Serialize;

use super::scale_for;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::quad::QuadConfig;

/// Law of the level `X_G` of the last strict minimum before an independent
/// exponential time (or of the overall infimum at `q = 0`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtMinLaw {
    pub q: f64,
    pub x: u64,
    /// `P_x(X_G = k)` for `k = 0..=x`.
    pub pmf: Vec<f64>,
    /// The scale function at `0..=x`.
    pub scale: Vec<f64>,
}

impl AtMinLaw {
    /// Conditional transform of `G` given `X_G = k`.
    pub fn lt_g(&self, spec: &ModelSpec, alpha: f64, k: u64, cfg: &QuadConfig) -> Result<f64> {
        atmin_lt_g(spec, self.q, alpha, self.x, k, cfg)
    }

    /// Conditional transform of `e_q - G` given `X_G = k`.
    pub fn lt_residual(&self, spec: &ModelSpec, alpha: f64, k: u64, cfg: &QuadConfig) -> Result<f64> {
        atmin_lt_residual(spec, self.q, alpha, self.x, k, cfg)
    }
}

pub fn atmin_law(spec: &ModelSpec, q: f64, x: u64, cfg: &QuadConfig) -> Result<AtMinLaw> {
    let s = scale_for(spec, q, cfg)?;
    let scale: Vec<f64> = (0..=x).map(|k| s.value(k)).collect::<Result<_>>()?;
    let fx = scale[x as usize];
    let pmf = (0..=x as usize)
        .map(|k| {
            let here = fx / scale[k];
            if k == 0 {
                here
            } else {
                here - fx / scale[k - 1]
            }
        })
        .collect();
    Ok(AtMinLaw { q, x, pmf, scale })
}

fn check(alpha: f64, x: u64, k: u64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Domain { name: "alpha", value: alpha, domain: "[0, inf)" });
    }
    if k > x {
        return Err(Error::Domain { name: "k", value: k as f64, domain: "k <= x" });
    }
    Ok(())
}

pub fn atmin_lt_g(spec: &ModelSpec, q: f64, alpha: f64, x: u64, k: u64, cfg: &QuadConfig) -> Result<f64> {
    check(alpha, x, k)?;
    if alpha == 0.0 || k == x {
        return Ok(1.0);
    }
    let base = scale_for(spec, q, cfg)?;
    let up = scale_for(spec, q + alpha, cfg)?;
    Ok(up.value(x)? / base.value(x)? * base.value(k)? / up.value(k)?)
}

pub fn atmin_lt_residual(spec: &ModelSpec, q: f64, alpha: f64, x: u64, k: u64, cfg: &QuadConfig) -> Result<f64> {
    check(alpha, x, k)?;
    if !(q > 0.0) {
        return Err(Error::Domain { name: "q", value: q, domain: "(0, inf)" });
    }
    if alpha == 0.0 {
        return Ok(1.0);
    }
    let lead = q / (q + alpha);
    if k == 0 {
        return Ok(lead);
    }
    let base = scale_for(spec, q, cfg)?;
    let up = scale_for(spec, q + alpha, cfg)?;
    let num = 1.0 - up.value(k)? / up.value(k - 1)?;
    let den = 1.0 - base.value(k)? / base.value(k - 1)?;
    Ok(lead * num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    const LN15: f64 = 0.405_465_108_108_164_4;

    #[test]
    fn uniform_on_m3() {
        for x in 1..=6u64 {
            let law = atmin_law(&m3(), 1.0, x, &cfg()).unwrap();
            for p in &law.pmf {
                assert!((p - 1.0 / (x as f64 + 1.0)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn m1_law_and_transforms() {
        let law = atmin_law(&m1(), 0.5, 2, &cfg()).unwrap();
        let want = [0.403_256_108_106, 0.307_691_458_512, 0.289_052_433_382];
        for (p, w) in law.pmf.iter().zip(want) {
            assert!((p - w).abs() < 1e-10);
        }
        assert!((law.pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(atmin_law(&m1(), 0.5, 0, &cfg()).unwrap().pmf, vec![1.0]);

        // Closed forms: Phi_q(1) and Phi_q(2) at q = 1/2 and q = 1.
        let (a1, a2) = (3.0 - 6.0 * LN15, 6.0 * (2.5 - 6.0 * LN15));
        let (b1, b2) = (15.0 - 36.0 * LN15, 18.0 * (6.5 - 16.0 * LN15));
        let g = atmin_lt_g(&m1(), 0.5, 0.5, 2, 1, &cfg()).unwrap();
        assert!((g - b2 * a1 / (a2 * b1)).abs() < 1e-9);
        assert!((g - 0.788_467_513_211).abs() < 1e-9);
        let r = atmin_lt_residual(&m1(), 0.5, 0.5, 2, 1, &cfg()).unwrap();
        assert!((r - 0.5 * (1.0 - b1) / (1.0 - a1)).abs() < 1e-9);
        assert_eq!(atmin_lt_g(&m1(), 0.5, 0.0, 2, 1, &cfg()).unwrap(), 1.0);
        assert_eq!(atmin_lt_g(&m1(), 0.5, 3.0, 2, 2, &cfg()).unwrap(), 1.0);
        assert_eq!(atmin_lt_residual(&m1(), 0.5, 1.5, 2, 0, &cfg()).unwrap(), 0.25);
    }

    #[test]
    fn sums_to_one() {
        for x in 1..=10 {
            let law = atmin_law(&m4(), 0.5, x, &cfg()).unwrap();
            assert!((law.pmf.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(law.pmf.iter().all(|p| *p >= 0.0));
        }
    }
}
