//! Monte Carlo concordance at 10^5 paths against closed-form values.

use bgwscale_core::control::ControlProblem;
use bgwscale_core::model::fixtures::*;
use bgwscale_core::model::{ImmigrationLaw, ModelSpec, OffspringLaw};
use bgwscale_core::quad::QuadConfig;
use bgwscale_core::sim::*;

const PATHS: usize = 100_000;

fn cfg() -> SimConfig {
    SimConfig { seed: 7, n_paths: PATHS, ..SimConfig::default() }
}

fn ln15() -> f64 {
    1.5f64.ln()
}

/// `Φ_{1/2}` of M1 at 1 and 2 (the value at 0 is 1).
fn m1_phi_half() -> (f64, f64) {
    (3.0 - 6.0 * ln15(), 6.0 * (2.5 - 6.0 * ln15()))
}

fn within(e: &Estimate, v: f64, k: f64, what: &str) {
    assert!(
        (e.mean - v).abs() <= k * e.std_err,
        "{what}: mean {} se {} expected {v}",
        e.mean,
        e.std_err
    );
}

#[test]
fn single_death_time_and_area() {
    let lambda = 2.0;
    // Outside the analytic standing assumptions, but a valid chain to simulate.
    let spec = ModelSpec::new_unvalidated(OffspringLaw::tabular(vec![1.0]), lambda, ImmigrationLaw::None, 0.0);
    let t = estimate_mean_passage(&spec, 1, 0, &cfg()).unwrap();
    within(&t, 1.0 / lambda, 4.0, "time");
    let c = cfg();
    let areas: Vec<Sample> = (0..PATHS)
        .map(|i| Sample::Value(simulate_path(&spec, 1, 0, None, &c, &mut c.path_rng(i)).area))
        .collect();
    within(&Estimate::from_samples(&areas), 1.0 / lambda, 4.0, "area");
}

#[test]
fn m4_threshold_fraction() {
    let c = cfg();
    let hits: Vec<Sample> = (0..PATHS)
        .map(|i| {
            let p = simulate_path(&m4(), 1, 0, None, &c, &mut c.path_rng(i));
            Sample::Value(f64::from(u8::from(p.kind == OutcomeKind::ExceededThreshold)))
        })
        .collect();
    within(&Estimate::from_samples(&hits), 0.64, 4.0, "M4 explosion fraction");
}

#[test]
fn m3_minimum_at_clock_is_uniform() {
    for (k, e) in estimate_atmin_law(&m3(), 1.0, 3, &cfg()).unwrap().iter().enumerate() {
        within(e, 0.25, 4.0, &format!("cell {k}"));
    }
}

#[test]
fn first_passage_transforms() {
    let c = SimConfig { explosion_threshold: 1000, ..cfg() };
    within(&estimate_lt_passage(&m2(), 1.0, 1, 0, &c).unwrap(), 0.5, 3.0, "M2 q=1");
    within(&estimate_lt_passage(&m2(), 2.0, 1, 0, &c).unwrap(), 2.0 * 2f64.ln() - 1.0, 3.0, "M2 q=2");
    let (phi1, _) = m1_phi_half();
    within(&estimate_lt_passage(&m1(), 0.5, 1, 0, &cfg()).unwrap(), phi1, 3.0, "M1 q=0.5");
    let e = estimate_lt_passage(&m1(), 0.0, 1, 0, &cfg()).unwrap();
    assert_eq!((e.mean, e.censored_fraction), (1.0, 0.0));
    within(&estimate_lt_passage(&m3(), 1.0, 3, 1, &cfg()).unwrap(), 0.5, 3.0, "M3 q=1");
}

#[test]
fn passage_bounds_for_supercritical_culling() {
    // P_x(T_a < ∞) lies between varphi^{x-a} and phi^{x-a}.
    let c = SimConfig { explosion_threshold: 1000, ..cfg() };
    let e = estimate_lt_passage(&m2(), 0.0, 3, 1, &c).unwrap();
    assert!(e.mean + 3.0 * e.std_err >= 0.25 && e.mean <= 1.0, "{e:?}");
}

#[test]
fn avalanche_transforms() {
    let top = 4.0 - 13f64.sqrt();
    within(&estimate_joint_avalanche(&m1(), 0.0, 1.0, 2, 0, &cfg()).unwrap(), top * top, 3.0, "M1 avalanche");
    // (1 + X) functional on M3 at q = 1.
    let qbar = 0.5;
    let root = (5.0 - 13f64.sqrt()) / 2.0;
    let e = estimate_joint_avalanche(&m3(), 1.0 + qbar, qbar, 3, 1, &cfg()).unwrap();
    within(&e, 0.5 * root * root, 3.0, "M3 shifted avalanche");
}

#[test]
fn mean_passage_times() {
    within(&estimate_mean_passage(&m1(), 1, 0, &cfg()).unwrap(), 4.0 * ln15(), 3.0, "M1 (1,0)");
    within(&estimate_mean_passage(&m1(), 2, 1, &cfg()).unwrap(), 12.0 * ln15() - 4.0, 3.0, "M1 (2,1)");
}

#[test]
fn explosion_transforms() {
    let e = estimate_explosion(&m4(), 1.0, 1, 0, &cfg()).unwrap();
    within(&e.estimate, 1.28 / 12.0, 3.0, "M4 q=1");
    assert!(e.proxy_diff.abs() < 3.0 * e.estimate.std_err, "{e:?}");
    let e = estimate_explosion(&m4(), 0.0, 1, 0, &cfg()).unwrap();
    within(&e.estimate, 0.64, 3.0, "M4 probability");
    let e = estimate_mean_explosion(&m4(), 1, &cfg()).unwrap();
    within(&e.estimate, 1.92, 3.0, "M4 mean");
}

#[test]
fn clock_and_weighting_agree() {
    let a = estimate_clock_passage(&m1(), 0.5, 1, 0, &cfg()).unwrap();
    let b = estimate_lt_passage(&m1(), 0.5, 1, 0, &cfg()).unwrap();
    let se = (a.std_err * a.std_err + b.std_err * b.std_err).sqrt();
    assert!((a.mean - b.mean).abs() <= 3.0 * se, "{a:?} {b:?}");
}

#[test]
fn barrier_costs() {
    let problem = ControlProblem::new(&m1(), 0, 0.5, &QuadConfig::default()).unwrap();
    let (phi1, phi2) = m1_phi_half();
    let v1 = phi1 / (1.0 - phi1);
    within(&simulate_controlled(&problem, &Policy::Barrier(0), 1, &cfg()).unwrap(), v1, 3.0, "barrier(0)");
    let w = phi2 / (phi1 - phi2);
    within(&simulate_controlled(&problem, &Policy::Barrier(1), 2, &cfg()).unwrap(), w, 3.0, "barrier(1)");
    let e = simulate_controlled(&problem, &Policy::TopUp(2), 1, &cfg()).unwrap();
    assert!(e.mean >= v1 - 3.0 * e.std_err, "{e:?}");
}
