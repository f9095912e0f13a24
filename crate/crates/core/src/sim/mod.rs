//! Exact event-driven simulation and Monte Carlo estimators.
//!
//! Path `i` draws from a ChaCha8 stream selected by `(seed, i)`, paths run in
//! parallel and are reduced in index order, so estimates do not depend on the
//! number of worker threads.

mod control;
mod sample;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

pub use control::{simulate_controlled, Policy};
pub use sample::{sample_immigration, sample_offspring, sample_sibuya};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, OffspringLaw};

/// Paths stop once their discount weight is below `exp(-NEGLIGIBLE_EXPONENT)`.
pub(super) const NEGLIGIBLE_EXPONENT: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub max_jumps: u64,
    pub explosion_threshold: u64,
    pub horizon: f64,
    pub q: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            n_paths: 100_000,
            max_jumps: 10_000_000,
            explosion_threshold: 1_000_000,
            horizon: f64::INFINITY,
            q: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Domain { name: "n_paths", value: 0.0, domain: ">= 1" });
        }
        if self.explosion_threshold < 2 {
            return Err(Error::Domain {
                name: "explosion_threshold",
                value: self.explosion_threshold as f64,
                domain: ">= 2",
            });
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Domain { name: "horizon", value: self.horizon, domain: "(0, inf]" });
        }
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return Err(Error::Domain { name: "q", value: self.q, domain: "[0, inf)" });
        }
        Ok(())
    }

    /// The random stream of path `index`.
    pub fn path_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    HitLevel,
    ExceededThreshold,
    /// Jump budget or horizon exhausted.
    Censored,
    ClockRang,
    /// The discount weight fell below `exp(-40)`.
    Negligible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathOutcome {
    pub kind: OutcomeKind,
    pub time: f64,
    pub level: u64,
    pub min: u64,
    /// Time of the last strict new minimum.
    pub min_time: f64,
    pub area: f64,
    pub jumps: u64,
    /// First time the population reached `explosion_threshold / 10`.
    pub proxy_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
    pub censored_fraction: f64,
    /// Upper bound on the mass the censored paths could add to `mean`.
    pub bias_bound: f64,
}

/// One path's contribution to an estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sample {
    Value(f64),
    /// Excluded from the mean; `bound` caps what the path could have added.
    Censored { bound: f64 },
}

impl Estimate {
    pub fn from_samples(samples: &[Sample]) -> Self {
        let n_all = samples.len();
        let values = || {
            samples.iter().filter_map(|s| match s {
                Sample::Value(v) => Some(*v),
                Sample::Censored { .. } => None,
            })
        };
        let n = values().count();
        let mean = if n > 0 { values().sum::<f64>() / n as f64 } else { f64::NAN };
        let ss: f64 = values().map(|v| (v - mean) * (v - mean)).sum();
        let std_err = if n > 1 { (ss / (n - 1) as f64 / n as f64).sqrt() } else { 0.0 };
        let omitted: f64 = samples
            .iter()
            .map(|s| match s {
                Sample::Censored { bound } => *bound,
                Sample::Value(_) => 0.0,
            })
            .sum();
        let denom = n_all.max(1) as f64;
        Estimate {
            mean,
            std_err,
            n,
            censored_fraction: (n_all - n) as f64 / denom,
            bias_bound: omitted / denom,
        }
    }

    /// `|mean - value| <= k std_err`, with a tiny floor for exact estimates.
    pub fn agrees(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_err + 1e-12
    }
}

/// Discount applied along a path, used to stop once it is negligible.
#[derive(Debug, Clone, Copy, Default)]
struct Discount {
    q: f64,
    qbar: f64,
}

pub(super) fn branch_count(spec: &ModelSpec, rng: &mut impl Rng) -> u64 {
    // The atom at one is a no-op; it is removed from the law and the rate.
    loop {
        let k = sample_offspring(spec.offspring(), rng);
        if k != 1 {
            return k;
        }
        if let OffspringLaw::Tabular(_) = spec.offspring() {
            return k;
        }
    }
}

fn run_path(
    spec: &ModelSpec,
    x0: u64,
    a: Option<u64>,
    clock: f64,
    discount: Discount,
    cfg: &SimConfig,
    rng: &mut impl Rng,
) -> PathOutcome {
    let lambda = spec.branch_rate();
    let mu = spec.mu_eff();
    let threshold = cfg.explosion_threshold;
    let proxy = (threshold / 10).max(1);
    let mut out = PathOutcome {
        kind: OutcomeKind::HitLevel,
        time: 0.0,
        level: x0,
        min: x0,
        min_time: 0.0,
        area: 0.0,
        jumps: 0,
        proxy_time: (x0 >= proxy).then_some(0.0),
    };
    if a.is_some_and(|a| x0 <= a) {
        return out;
    }
    if x0 >= threshold {
        out.kind = OutcomeKind::ExceededThreshold;
        return out;
    }
    let mut x = x0;
    loop {
        if out.jumps >= cfg.max_jumps {
            out.kind = OutcomeKind::Censored;
            break;
        }
        // Zero is absorbing; only the clock can still ring there.
        if x == 0 && clock == 0.0 {
            out.kind = OutcomeKind::HitLevel;
            break;
        }
        let xf = x as f64;
        let total = lambda * xf + if x == 0 { 0.0 } else { mu } + clock;
        let e: f64 = Exp1.sample(rng);
        let hold = e / total;
        if out.time + hold > cfg.horizon {
            out.area += xf * (cfg.horizon - out.time);
            out.time = cfg.horizon;
            out.kind = OutcomeKind::Censored;
            break;
        }
        out.time += hold;
        out.area += xf * hold;
        if discount.q * out.time + discount.qbar * out.area > NEGLIGIBLE_EXPONENT {
            out.kind = OutcomeKind::Negligible;
            break;
        }
        let u: f64 = rng.random::<f64>() * total;
        if u < clock {
            out.kind = OutcomeKind::ClockRang;
            break;
        }
        out.jumps += 1;
        if u < clock + lambda * xf {
            x = (x - 1).saturating_add(branch_count(spec, rng));
        } else {
            let j = sample_immigration(spec.immigration(), rng);
            x = if j < 0 { x - 1 } else { x.saturating_add(j as u64) };
        }
        if x < out.min {
            out.min = x;
            out.min_time = out.time;
        }
        if out.proxy_time.is_none() && x >= proxy {
            out.proxy_time = Some(out.time);
        }
        if a.is_some_and(|a| x <= a) {
            out.kind = OutcomeKind::HitLevel;
            break;
        }
        if x >= threshold {
            out.kind = OutcomeKind::ExceededThreshold;
            break;
        }
    }
    out.level = x;
    out
}

/// One path from `x0` until it reaches `a`, exceeds the explosion threshold,
/// exhausts its budget, or an independent clock of rate `qclock` rings.
pub fn simulate_path(
    spec: &ModelSpec,
    x0: u64,
    a: u64,
    qclock: Option<f64>,
    cfg: &SimConfig,
    rng: &mut impl Rng,
) -> PathOutcome {
    run_path(spec, x0, Some(a), qclock.unwrap_or(0.0), Discount::default(), cfg, rng)
}

fn paths<T: Send>(
    spec: &ModelSpec,
    x0: u64,
    a: Option<u64>,
    clock: f64,
    discount: Discount,
    cfg: &SimConfig,
    f: impl Fn(&PathOutcome, &mut ChaCha8Rng) -> T + Sync,
) -> Result<Vec<T>> {
    cfg.validate()?;
    if let Some(a) = a.filter(|&a| a > x0) {
        return Err(Error::Domain { name: "a", value: a as f64, domain: "a <= x" });
    }
    Ok((0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = cfg.path_rng(i);
            let out = run_path(spec, x0, a, clock, discount, cfg, &mut rng);
            f(&out, &mut rng)
        })
        .collect())
}

fn weighted(
    spec: &ModelSpec,
    q: f64,
    qbar: f64,
    x: u64,
    a: u64,
    cfg: &SimConfig,
) -> Result<Estimate> {
    let samples = paths(spec, x, Some(a), 0.0, Discount { q, qbar }, cfg, |p, _| match p.kind {
        OutcomeKind::HitLevel => Sample::Value((-q * p.time - qbar * p.area).exp()),
        OutcomeKind::Censored => Sample::Censored { bound: (-q * p.time - qbar * p.area).exp() },
        _ => Sample::Value(0.0),
    })?;
    Ok(Estimate::from_samples(&samples))
}

/// Monte Carlo `E_x[exp(-q T_a); T_a < ∞]`.
pub fn estimate_lt_passage(spec: &ModelSpec, q: f64, x: u64, a: u64, cfg: &SimConfig) -> Result<Estimate> {
    weighted(spec, q, 0.0, x, a, cfg)
}

/// Monte Carlo `E_x[exp(-q T_a - qbar ∫ X); T_a < ∞]`.
pub fn estimate_joint_avalanche(
    spec: &ModelSpec,
    q: f64,
    qbar: f64,
    x: u64,
    a: u64,
    cfg: &SimConfig,
) -> Result<Estimate> {
    weighted(spec, q, qbar, x, a, cfg)
}

/// Monte Carlo `P_x(T_a <= e_q)` with the exponential clock simulated.
pub fn estimate_clock_passage(spec: &ModelSpec, q: f64, x: u64, a: u64, cfg: &SimConfig) -> Result<Estimate> {
    let samples = paths(spec, x, Some(a), q, Discount::default(), cfg, |p, _| match p.kind {
        OutcomeKind::HitLevel => Sample::Value(1.0),
        OutcomeKind::Censored => Sample::Censored { bound: 1.0 },
        _ => Sample::Value(0.0),
    })?;
    Ok(Estimate::from_samples(&samples))
}

/// Monte Carlo `E_x[T_a]`; paths that do not reach `a` are censored.
pub fn estimate_mean_passage(spec: &ModelSpec, x: u64, a: u64, cfg: &SimConfig) -> Result<Estimate> {
    let samples = paths(spec, x, Some(a), 0.0, Discount::default(), cfg, |p, _| match p.kind {
        OutcomeKind::HitLevel => Sample::Value(p.time),
        _ => Sample::Censored { bound: f64::INFINITY },
    })?;
    Ok(Estimate::from_samples(&samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExplosionEstimate {
    pub estimate: Estimate,
    /// The same estimator with the crossing of `threshold / 10` as explosion.
    pub proxy: Estimate,
    /// `estimate.mean - proxy.mean`.
    pub proxy_diff: f64,
}

fn explosion(
    spec: &ModelSpec,
    x: u64,
    a: u64,
    cfg: &SimConfig,
    weight: impl Fn(f64) -> f64 + Sync,
    bound: f64,
) -> Result<ExplosionEstimate> {
    let samples = paths(spec, x, Some(a), 0.0, Discount::default(), cfg, |p, _| {
        let full = match p.kind {
            OutcomeKind::ExceededThreshold => Sample::Value(weight(p.time)),
            OutcomeKind::Censored => Sample::Censored { bound },
            _ => Sample::Value(0.0),
        };
        let proxy = match (p.proxy_time, p.kind) {
            (Some(t), _) => Sample::Value(weight(t)),
            (None, OutcomeKind::Censored) => Sample::Censored { bound },
            _ => Sample::Value(0.0),
        };
        (full, proxy)
    })?;
    let (full, proxy): (Vec<_>, Vec<_>) = samples.into_iter().unzip();
    let estimate = Estimate::from_samples(&full);
    let proxy = Estimate::from_samples(&proxy);
    Ok(ExplosionEstimate { estimate, proxy, proxy_diff: estimate.mean - proxy.mean })
}

/// Monte Carlo `E_x[exp(-q zeta); zeta < T_a]`, threshold crossing standing
/// in for explosion.
pub fn estimate_explosion(spec: &ModelSpec, q: f64, x: u64, a: u64, cfg: &SimConfig) -> Result<ExplosionEstimate> {
    explosion(spec, x, a, cfg, |t| (-q * t).exp(), 1.0)
}

/// Monte Carlo `E_x[zeta; zeta < ∞]`, threshold crossing standing in for
/// explosion.
pub fn estimate_mean_explosion(spec: &ModelSpec, x: u64, cfg: &SimConfig) -> Result<ExplosionEstimate> {
    explosion(spec, x, 0, cfg, |t| t, f64::INFINITY)
}

/// Monte Carlo law of the running minimum at an independent exponential time
/// of rate `q`: one indicator estimate per level `0..=x`.
pub fn estimate_atmin_law(spec: &ModelSpec, q: f64, x: u64, cfg: &SimConfig) -> Result<Vec<Estimate>> {
    if !(q > 0.0) {
        return Err(Error::Domain { name: "q", value: q, domain: "(0, inf)" });
    }
    // An exploded path cannot come back down: its minimum is final.
    let mins = paths(spec, x, None, q, Discount::default(), cfg, |p, _| match p.kind {
        OutcomeKind::ClockRang | OutcomeKind::ExceededThreshold => Some(p.min),
        _ => None,
    })?;
    Ok((0..=x)
        .map(|k| {
            let s: Vec<Sample> = mins
                .iter()
                .map(|m| match m {
                    Some(m) => Sample::Value(if *m == k { 1.0 } else { 0.0 }),
                    None => Sample::Censored { bound: 1.0 },
                })
                .collect();
            Estimate::from_samples(&s)
        })
        .collect())
}

/// Monte Carlo transforms `E[exp(-alpha G) | X_G = k]` and
/// `E[exp(-alpha (e_q - G)) | X_G = k]`, where `G` is the time of the last
/// strict new minimum before the clock `e_q`.
pub fn estimate_atmin_transforms(
    spec: &ModelSpec,
    q: f64,
    alpha: f64,
    x: u64,
    k: u64,
    cfg: &SimConfig,
) -> Result<(Estimate, Estimate)> {
    if !(q > 0.0) {
        return Err(Error::Domain { name: "q", value: q, domain: "(0, inf)" });
    }
    let pairs = paths(spec, x, None, q, Discount::default(), cfg, |p, rng| match p.kind {
        OutcomeKind::ClockRang | OutcomeKind::ExceededThreshold if p.min == k => {
            // The clock has not rung at an explosion; draw its remaining time.
            let rest = if p.kind == OutcomeKind::ClockRang {
                0.0
            } else {
                let e: f64 = Exp1.sample(rng);
                e / q
            };
            Some((
                Sample::Value((-alpha * p.min_time).exp()),
                Sample::Value((-alpha * (p.time + rest - p.min_time)).exp()),
            ))
        }
        OutcomeKind::ClockRang | OutcomeKind::ExceededThreshold => None,
        _ => Some((Sample::Censored { bound: 1.0 }, Sample::Censored { bound: 1.0 })),
    })?;
    let (g, r): (Vec<_>, Vec<_>) = pairs.into_iter().flatten().unzip();
    Ok((Estimate::from_samples(&g), Estimate::from_samples(&r)))
}
