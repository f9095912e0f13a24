use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use super::{branch_count, Estimate, Sample, SimConfig, NEGLIGIBLE_EXPONENT};
use crate::control::ControlProblem;
use crate::error::{Error, Result};

/// Immigration policy for the controlled chain.
#[derive(Clone)]
pub enum Policy {
    /// Immigrate just enough to keep the population above `a`.
    Barrier(u64),
    /// Refill to `floor + m` whenever the population drops below it.
    TopUp(u64),
    /// Number of immigrants to add given the level after a death (and the
    /// initial level at time zero).
    Custom(Arc<dyn Fn(u64) -> u64 + Send + Sync>),
}

impl fmt::Debug for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Barrier(a) => write!(f, "Barrier({a})"),
            Policy::TopUp(m) => write!(f, "TopUp({m})"),
            Policy::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Policy {
    fn immigrants(&self, floor: u64, level: u64) -> u64 {
        match self {
            Policy::Barrier(a) => (a + 1).saturating_sub(level),
            Policy::TopUp(m) => (floor + m).saturating_sub(level),
            Policy::Custom(f) => f(level),
        }
    }
}

fn controlled_path(
    problem: &ControlProblem,
    policy: &Policy,
    x0: u64,
    cfg: &SimConfig,
    rng: &mut impl Rng,
) -> Result<Sample> {
    let spec = problem.spec();
    let floor = problem.floor();
    let q = problem.q();
    let lambda = spec.branch_rate();
    let mut t = 0.0;
    let mut cost = 0.0;
    let mut x = x0;
    let apply = |x: &mut u64, t: f64, cost: &mut f64| -> Result<()> {
        let add = policy.immigrants(floor, *x);
        *x = x.saturating_add(add);
        if *x <= floor {
            return Err(Error::Admissibility { level: *x, floor });
        }
        *cost += (-q * t).exp() * add as f64;
        Ok(())
    };
    apply(&mut x, t, &mut cost)?;
    let mut jumps = 0u64;
    loop {
        if q * t > NEGLIGIBLE_EXPONENT || x >= cfg.explosion_threshold {
            return Ok(Sample::Value(cost));
        }
        if jumps >= cfg.max_jumps {
            return Ok(Sample::Censored { bound: f64::INFINITY });
        }
        let hold: f64 = Exp1.sample(rng);
        t += hold / (lambda * x as f64);
        if t > cfg.horizon {
            return Ok(Sample::Censored { bound: f64::INFINITY });
        }
        jumps += 1;
        let k = branch_count(spec, rng);
        x = (x - 1).saturating_add(k);
        if k == 0 {
            apply(&mut x, t, &mut cost)?;
        }
    }
}

/// Monte Carlo discounted immigration cost `E_x[∫ e^{-qt} dc_t]` of a policy.
///
/// Costs are summed until the discount falls below `exp(-40)` or the
/// population reaches the explosion threshold.
pub fn simulate_controlled(
    problem: &ControlProblem,
    policy: &Policy,
    x0: u64,
    cfg: &SimConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    if let Policy::Barrier(a) = policy {
        if *a < problem.floor() {
            return Err(Error::Domain { name: "a", value: *a as f64, domain: "a >= floor" });
        }
    }
    let samples: Vec<Result<Sample>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| controlled_path(problem, policy, x0, cfg, &mut cfg.path_rng(i)))
        .collect();
    let samples: Vec<Sample> = samples.into_iter().collect::<Result<_>>()?;
    Ok(Estimate::from_samples(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::barrier_value;
    use crate::model::fixtures::m1;
    use crate::quad::QuadConfig;

    fn problem(floor: u64) -> ControlProblem {
        ControlProblem::new(&m1(), floor, 0.5, &QuadConfig::default()).unwrap()
    }

    #[test]
    fn barrier_matches_value() {
        let p = problem(0);
        let cfg = SimConfig { seed: 11, n_paths: 20_000, ..SimConfig::default() };
        let e = simulate_controlled(&p, &Policy::Barrier(0), 1, &cfg).unwrap();
        let v = barrier_value(&p, 0, 1).unwrap();
        assert!(e.agrees(v, 4.0), "{e:?} vs {v}");
    }

    #[test]
    fn lump_at_time_zero() {
        // Starting at the floor, the barrier pays one unit immediately.
        let p = problem(0);
        let cfg = SimConfig { seed: 2, n_paths: 20_000, ..SimConfig::default() };
        let e0 = simulate_controlled(&p, &Policy::Barrier(0), 0, &cfg).unwrap();
        let e1 = simulate_controlled(&p, &Policy::Barrier(0), 1, &cfg).unwrap();
        assert!((e0.mean - e1.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inadmissible_policy_is_rejected() {
        let p = problem(1);
        let cfg = SimConfig { n_paths: 100, ..SimConfig::default() };
        let lazy = Policy::Custom(Arc::new(|_| 0));
        let err = simulate_controlled(&p, &lazy, 3, &cfg).unwrap_err();
        assert!(matches!(err, Error::Admissibility { floor: 1, .. }));
        assert!(simulate_controlled(&p, &Policy::Barrier(0), 3, &cfg).is_err());
    }

    #[test]
    fn custom_barrier_equals_builtin() {
        let p = problem(0);
        let cfg = SimConfig { seed: 4, n_paths: 500, ..SimConfig::default() };
        let custom = Policy::Custom(Arc::new(|x| 1u64.saturating_sub(x)));
        let a = simulate_controlled(&p, &custom, 2, &cfg).unwrap();
        let b = simulate_controlled(&p, &Policy::Barrier(0), 2, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
