use serde::Serialize;

use super::scale_for;
use crate::error::{Error, Result};
use crate::model::{root_phi_q, root_varphi, ImmigrationLaw, ModelSpec, OffspringLaw, ROOT_TOL};
use crate::model::{sibuya_survival, PMF_SUM_TOL};
use crate::quad::QuadConfig;

/// Largest jump evaluated for infinite-support laws.
const MAX_JUMP: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorRow {
    pub state: u64,
    /// `q + mu + lambda x`.
    pub leave_rate: f64,
    /// `(target, probability)`, targets in increasing order.
    pub jumps: Vec<(u64, f64)>,
    /// Probability of being killed (state 1 only).
    pub kill_prob: f64,
    /// Mass of jumps beyond the truncation of infinite-support laws.
    pub tail_prob: f64,
}

/// Generator of the chain conditioned to reach zero before the exponential
/// clock, truncated to states `1..=x_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionedGenerator {
    pub q: f64,
    pub rows: Vec<GeneratorRow>,
    /// Killing rate at state 1.
    pub kill_rate: f64,
}

/// Up-jump mass of the unconditioned chain by jump size.
struct Jumps<'a> {
    spec: &'a ModelSpec,
    lambda: f64,
    x: f64,
}

impl Jumps<'_> {
    fn offspring(&self, k: u64) -> f64 {
        self.spec.offspring_pmf_normalized(k)
    }

    /// Rate of `x -> x + k`, `k >= 1`.
    fn up(&self, k: u64) -> f64 {
        self.offspring(k + 1) * self.lambda * self.x + self.spec.mu_eff() * self.spec.immigration().pmf(k as i64)
    }

    /// Upper bound on the total rate of jumps larger than `k`.
    fn tail(&self, k: u64) -> f64 {
        let p_tail = match self.spec.offspring() {
            OffspringLaw::Tabular(p) => {
                let m = p.len() as u64;
                if k + 2 >= m { 0.0 } else { 1.0 }
            }
            OffspringLaw::SibuyaMix { p0, alpha } => {
                (1.0 - p0) * sibuya_survival(*alpha, k + 1) / (1.0 - self.spec.offspring().p1())
            }
        };
        let r_tail = match self.spec.immigration() {
            ImmigrationLaw::Sibuya { alpha } => sibuya_survival(*alpha, k),
            ImmigrationLaw::Tabular { batches, .. } => {
                if (k as usize) + 1 >= batches.len() { 0.0 } else { 1.0 }
            }
            ImmigrationLaw::None => 0.0,
        };
        p_tail * self.lambda * self.x + self.spec.mu_eff() * r_tail
    }
}

pub fn conditioned_generator(spec: &ModelSpec, q: f64, x_max: u64, cfg: &QuadConfig) -> Result<ConditionedGenerator> {
    if x_max == 0 {
        return Err(Error::Domain { name: "x_max", value: 0.0, domain: ">= 1" });
    }
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::Domain { name: "q", value: q, domain: "[0, inf)" });
    }
    let varphi = root_varphi(spec, ROOT_TOL);
    let phi_q = root_phi_q(spec, q, ROOT_TOL);
    if phi_q > varphi + crate::scale::TIE_TOL {
        return Err(Error::regime(
            "q >= max(mu (r(varphi) - 1), 0)",
            format!("phi_q > varphi: phi_q={phi_q}, varphi={varphi}"),
        ));
    }
    let s = scale_for(spec, q, cfg)?;
    let mut values: Vec<f64> = Vec::new();
    let mut value = |n: u64| -> Result<f64> {
        while values.len() as u64 <= n {
            values.push(s.value(values.len() as u64)?);
        }
        Ok(values[n as usize])
    };
    let lambda = spec.branch_rate();
    let mu = spec.mu_eff();
    let down = spec.offspring_pmf_normalized(0) * lambda;
    let cull = mu * spec.immigration().culling();
    let mut rows = Vec::with_capacity(x_max as usize);
    let mut kill_rate = 0.0;
    for x in 1..=x_max {
        let xf = x as f64;
        let leave = q + mu + lambda * xf;
        let fx = value(x)?;
        let mut jumps = Vec::new();
        let mut kill_prob = 0.0;
        let first = (down * xf + cull) * value(x - 1)? / fx;
        if x == 1 {
            kill_rate = first;
            kill_prob = first / leave;
        } else {
            jumps.push((x - 1, first / leave));
        }
        let rates = Jumps { spec, lambda, x: xf };
        let mut total = kill_prob + jumps.iter().map(|j| j.1).sum::<f64>();
        let mut k = 1;
        loop {
            let r = rates.up(k);
            if r > 0.0 {
                let p = r * value(x + k)? / (leave * fx);
                jumps.push((x + k, p));
                total += p;
            }
            // Scale functions decrease in x, so this bounds the remaining mass.
            let bound = rates.tail(k) * value(x + k)? / (leave * fx);
            if bound < PMF_SUM_TOL || k >= MAX_JUMP {
                break;
            }
            k += 1;
        }
        rows.push(GeneratorRow { state: x, leave_rate: leave, jumps, kill_prob, tail_prob: (1.0 - total).max(0.0) });
    }
    Ok(ConditionedGenerator { q, rows, kill_rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn m1_state_one() {
        let g = conditioned_generator(&m1(), 0.5, 4, &cfg()).unwrap();
        let r = &g.rows[0];
        assert_eq!(r.leave_rate, 1.5);
        assert_eq!(r.jumps.len(), 1);
        assert!((r.jumps[0].1 - 0.118_491_261_103).abs() < 1e-10);
        assert!((g.kill_rate - 1.322_263_108_345).abs() < 1e-9);
        assert!((r.kill_prob + r.jumps[0].1 - 1.0).abs() < 1e-8);
        for row in &g.rows[1..] {
            let s: f64 = row.jumps.iter().map(|j| j.1).sum();
            assert!((s - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn m3_rows_sum_to_one() {
        let g = conditioned_generator(&m3(), 1.0, 6, &cfg()).unwrap();
        let row = &g.rows[1];
        // Phi proportional to 1/(x+1): (p0 lambda x) Phi(1) / (leave Phi(2)) = 3/4.
        let want = (0.75 * 2.0 * 2.0) * (1.0 / 2.0) / (6.0 * (1.0 / 3.0));
        assert!((row.jumps[0].1 - want).abs() < 1e-10);
        for row in &g.rows[1..] {
            let s: f64 = row.jumps.iter().map(|j| j.1).sum();
            assert!((s - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn heavy_tail_truncation_reports_remainder() {
        let g = conditioned_generator(&m4(), 1.0, 3, &cfg()).unwrap();
        for row in &g.rows[1..] {
            let s: f64 = row.jumps.iter().map(|j| j.1).sum();
            assert!((s + row.tail_prob - 1.0).abs() < 1e-8);
            assert!(row.tail_prob < 1e-8);
        }
        assert!(conditioned_generator(&m2(), 0.5, 3, &cfg()).unwrap_err().is_refusal());
    }
}
