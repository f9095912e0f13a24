//! Discounted immigration control with barrier strategies.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{criticality, Criticality, ModelSpec};
use crate::quad::QuadConfig;
use crate::scale::Scale;

/// Relative slack allowed in the Bellman inequality checks.
const BELLMAN_TOL: f64 = 1e-9;

/// Minimize `E ∫ e^{-qt} dc_t` over immigration controls keeping the
/// population above `floor`.
#[derive(Debug)]
pub struct ControlProblem {
    spec: ModelSpec,
    floor: u64,
    q: f64,
    scale: Scale,
}

impl ControlProblem {
    pub fn new(spec: &ModelSpec, floor: u64, q: f64, cfg: &QuadConfig) -> Result<Self> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(Error::Domain { name: "q", value: q, domain: "[0, inf)" });
        }
        if spec.mu_eff() != 0.0 {
            return Err(Error::Precondition("control problems require mu = 0".into()));
        }
        if q == 0.0 && criticality(spec) != Criticality::Supercritical {
            return Err(Error::regime(
                "q > 0 or supercritical branching",
                "q = 0 with non-supercritical branching makes every cost infinite",
            ));
        }
        let scale = if q > 0.0 { Scale::phi_q(spec, q, cfg)? } else { Scale::phi_0(spec, cfg)? };
        Ok(ControlProblem { spec: spec.clone(), floor, q, scale })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn floor(&self) -> u64 {
        self.floor
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// The scale function defining the barrier costs.
    pub fn scale(&self) -> &Scale {
        &self.scale
    }

    fn check_barrier(&self, a: u64) -> Result<()> {
        if a < self.floor {
            return Err(Error::Domain { name: "a", value: a as f64, domain: "a >= floor" });
        }
        Ok(())
    }
}

/// `B(a) = Phi(a) - Phi(a + 1)`.
pub fn barrier_gap(problem: &ControlProblem, a: u64) -> Result<f64> {
    problem.check_barrier(a)?;
    Ok(problem.scale.value(a)? - problem.scale.value(a + 1)?)
}

/// Cost `W_a(x)` of the barrier strategy at level `a`.
pub fn barrier_value(problem: &ControlProblem, a: u64, x: u64) -> Result<f64> {
    let b = barrier_gap(problem, a)?;
    if x > a {
        Ok(problem.scale.value(x)? / b)
    } else {
        Ok((a + 1 - x) as f64 + problem.scale.value(a + 1)? / b)
    }
}

/// The value function, attained by the barrier at the floor.
pub fn optimal_value(problem: &ControlProblem, x: u64) -> Result<f64> {
    barrier_value(problem, problem.floor, x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BellmanViolation {
    /// `"ii"` for starts at or below the floor, `"iii"` above it.
    pub inequality: &'static str,
    pub x: u64,
    pub f: u64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BellmanReport {
    pub passed: bool,
    pub checks: usize,
    pub violation: Option<BellmanViolation>,
}

/// Checks on a finite grid that no immediate lump immigration `f` improves on
/// the barrier at the floor.
pub fn verify_bellman(problem: &ControlProblem, x_max: u64, f_max: u64) -> Result<BellmanReport> {
    let fl = problem.floor;
    let b = barrier_gap(problem, fl)?;
    let phi = |n: u64| problem.scale.value(n);
    let mut checks = 0;
    let mut report = |inequality, x, f, lhs: f64, rhs: f64| -> Option<BellmanViolation> {
        checks += 1;
        if lhs < rhs - BELLMAN_TOL * rhs.abs().max(1.0) {
            Some(BellmanViolation { inequality, x, f, lhs, rhs })
        } else {
            None
        }
    };
    let below = (fl + 1) as f64 + phi(fl + 1)? / b;
    for x in 0..=fl {
        for f in (fl + 2 - x)..=f_max {
            let lhs = f as f64 + phi(x + f)? / b;
            if let Some(v) = report("ii", x, f, lhs, below - x as f64) {
                return Ok(BellmanReport { passed: false, checks, violation: Some(v) });
            }
        }
    }
    for x in (fl + 1)..=x_max {
        let rhs = phi(x)? / b;
        for f in 1..=f_max {
            let lhs = f as f64 + phi(x + f)? / b;
            if let Some(v) = report("iii", x, f, lhs, rhs) {
                return Ok(BellmanReport { passed: false, checks, violation: Some(v) });
            }
        }
    }
    Ok(BellmanReport { passed: true, checks, violation: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn m1_barrier_costs() {
        let p = ControlProblem::new(&m1(), 0, 0.5, &cfg()).unwrap();
        assert!((barrier_gap(&p, 0).unwrap() - 0.432_790_648_649).abs() < 1e-10);
        assert!((barrier_gap(&p, 1).unwrap() - 0.163_953_243_245).abs() < 1e-10);
        assert!((barrier_value(&p, 0, 1).unwrap() - 1.310_585_968_347).abs() < 1e-9);
        assert!((barrier_value(&p, 0, 0).unwrap() - 2.310_585_968_347).abs() < 1e-9);
        assert!((barrier_value(&p, 1, 2).unwrap() - 2.459_579_939_530).abs() < 1e-9);
        assert!((optimal_value(&p, 2).unwrap() - 0.931_757_905_040).abs() < 1e-9);
        assert!(barrier_gap(&ControlProblem::new(&m1(), 2, 0.5, &cfg()).unwrap(), 1).is_err());
    }

    #[test]
    fn pure_supercritical_at_zero_discount() {
        let p = ControlProblem::new(&m2_pure(), 0, 0.0, &cfg()).unwrap();
        assert!((optimal_value(&p, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!(ControlProblem::new(&m1(), 0, 0.0, &cfg()).unwrap_err().is_refusal());
        assert!(ControlProblem::new(&m2(), 0, 1.0, &cfg()).is_err());
    }

    #[test]
    fn bellman_checks() {
        for floor in [0, 2] {
            let p = ControlProblem::new(&m1(), floor, 0.5, &cfg()).unwrap();
            let r = verify_bellman(&p, 10, 10).unwrap();
            assert!(r.passed && r.checks > 0, "{r:?}");
            let r = verify_bellman(&p, 10, 0).unwrap();
            assert!(r.passed && r.checks == 0);
        }
    }
}
