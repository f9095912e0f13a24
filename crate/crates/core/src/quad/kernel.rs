//! Outer integrals of the form `∫ exp(L(v)) / D(v) · w(v) dv` where
//! `D(v) = lambda (p̃(v) - v) - qbar v` and `L(v) = -∫_θ^v N / D` with
//! `N(w) = c + mu (1 - r̃(w))`. The log-weight `L` is built once per node on a
//! nested tanh-sinh grid and reused for every outer weight `w`.

use std::collections::HashMap;
use std::sync::Mutex;

use super::gk::adaptive;
use super::tanh_sinh::{level_ts, node, t_of, MAX_LEVEL, MIN_LEVEL, T_MAX};
use super::{Integral, QuadConfig, QuadError};
use crate::model::{Abscissa, ModelSpec};

/// Smallest usable `ln(distance)`.
const S_FLOOR: f64 = -708.0;

/// Numerator `c + mu (1 - r̃)` (immigration term optional) and the `qbar` shift
/// of the drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Rate {
    pub constant: f64,
    pub immigration: bool,
    pub qbar: f64,
}

impl Rate {
    pub fn scale(q: f64) -> Self {
        Rate { constant: q, immigration: true, qbar: 0.0 }
    }
}

/// An integration endpoint with the drift value there (zero at roots).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct End {
    pub at: f64,
    pub drift: f64,
}

impl End {
    pub fn root(at: f64) -> Self {
        End { at, drift: 0.0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Node {
    pub at: Abscissa,
    pub ln_jac: f64,
    pub log_omega: f64,
    pub drift: f64,
    ln_abs_drift: f64,
}

impl Node {
    /// `L(v) - ln|D(v)|`; `-inf` where the weight has underflowed.
    pub fn log_weight(&self) -> f64 {
        self.log_omega - self.ln_abs_drift
    }
}

#[derive(Debug, Clone, Copy)]
enum Anchor {
    Lo,
    Hi,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    anchor: Anchor,
    dist: f64,
}

#[derive(Default)]
struct Cache {
    levels: Vec<Vec<Node>>,
    by_key: HashMap<i64, (Point, f64)>,
}

pub(crate) struct Kernel {
    spec: ModelSpec,
    rate: Rate,
    lo: End,
    hi: End,
    delim: Point,
    t_delim: f64,
    /// Coefficients of `e ↦ D(end + e) - D(end)` for finite-support
    /// offspring laws, so tangential roots keep their relative accuracy.
    lo_poly: Option<Vec<f64>>,
    hi_poly: Option<Vec<f64>>,
    cfg: QuadConfig,
    inner: QuadConfig,
    cache: Mutex<Cache>,
}

fn drift_poly(spec: &ModelSpec, at: f64, qbar: f64) -> Option<Vec<f64>> {
    let lambda = spec.lambda();
    let mut c = spec.offspring().taylor_at(at)?;
    c[0] = 0.0;
    for x in c.iter_mut() {
        *x *= lambda;
    }
    if c.len() < 2 {
        c.resize(2, 0.0);
    }
    c[1] -= lambda + qbar;
    Some(c)
}

fn key(t: f64) -> i64 {
    (t * (1u64 << MAX_LEVEL) as f64).round() as i64
}

impl Kernel {
    pub fn new(spec: &ModelSpec, rate: Rate, lo: End, hi: End, delim: f64, cfg: &QuadConfig) -> Self {
        debug_assert!(lo.at < hi.at && delim >= lo.at && delim <= hi.at);
        let (delim_pt, t_delim) = if delim <= lo.at {
            (Point { anchor: Anchor::Lo, dist: 0.0 }, f64::NEG_INFINITY)
        } else if delim >= hi.at {
            (Point { anchor: Anchor::Hi, dist: 0.0 }, f64::INFINITY)
        } else {
            let mid = 0.5 * (lo.at + hi.at);
            let pt = if delim < mid {
                Point { anchor: Anchor::Lo, dist: delim - lo.at }
            } else {
                Point { anchor: Anchor::Hi, dist: hi.at - delim }
            };
            (pt, t_of(delim, lo.at, hi.at))
        };
        Kernel {
            spec: spec.clone(),
            rate,
            lo,
            hi,
            delim: delim_pt,
            t_delim,
            lo_poly: drift_poly(spec, lo.at, rate.qbar),
            hi_poly: drift_poly(spec, hi.at, rate.qbar),
            cfg: *cfg,
            inner: QuadConfig {
                rel_tol: (cfg.rel_tol * 1e-2).max(1e-14),
                abs_tol: (cfg.abs_tol * 1e-1).max(1e-16),
                max_depth: cfg.max_depth,
            },
            cache: Mutex::new(Cache::default()),
        }
    }

    fn end(&self, a: Anchor) -> End {
        match a {
            Anchor::Lo => self.lo,
            Anchor::Hi => self.hi,
        }
    }

    fn abscissa(&self, p: Point) -> Abscissa {
        match p.anchor {
            Anchor::Lo => Abscissa::new(self.lo.at, p.dist),
            Anchor::Hi => Abscissa::new(self.hi.at, -p.dist),
        }
    }

    fn drift(&self, p: Point) -> f64 {
        let end = self.end(p.anchor);
        let (poly, e) = match p.anchor {
            Anchor::Lo => (&self.lo_poly, p.dist),
            Anchor::Hi => (&self.hi_poly, -p.dist),
        };
        match poly {
            Some(c) => end.drift + e * c[1..].iter().rev().fold(0.0, |acc, a| acc * e + a),
            None => self.spec.drift_from(&self.abscissa(p), end.drift, self.rate.qbar),
        }
    }

    fn numerator(&self, at: &Abscissa) -> f64 {
        let mut n = self.rate.constant;
        if self.rate.immigration {
            let mu = self.spec.mu_eff();
            if mu > 0.0 {
                n += mu * self.spec.immigration().deficit(at);
            }
        }
        n
    }

    /// Signed `N / D` at a point.
    fn gamma(&self, p: Point) -> f64 {
        self.numerator(&self.abscissa(p)) / self.drift(p)
    }

    fn rebase(&self, p: Point, anchor: Anchor) -> Point {
        match (p.anchor, anchor) {
            (Anchor::Lo, Anchor::Lo) | (Anchor::Hi, Anchor::Hi) => p,
            _ => Point { anchor, dist: (self.hi.at - self.lo.at) - p.dist },
        }
    }

    /// Oriented `∫_from^to N / D`.
    fn piece(&self, from: Point, to: Point) -> Result<f64, QuadError> {
        let anchor = if from.dist <= to.dist { from.anchor } else { to.anchor };
        let (a, b) = (self.rebase(from, anchor), self.rebase(to, anchor));
        if a.dist == b.dist {
            return Ok(0.0);
        }
        let sa = if a.dist > 0.0 { a.dist.ln() } else { S_FLOOR.min(b.dist.ln() - 40.0) };
        let sb = if b.dist > 0.0 { b.dist.ln() } else { S_FLOOR.min(a.dist.ln() - 40.0) };
        let sigma = match anchor {
            Anchor::Lo => 1.0,
            Anchor::Hi => -1.0,
        };
        let f = |s: f64| {
            let d = s.exp();
            self.gamma(Point { anchor, dist: d }) * d
        };
        match adaptive(f, sa, sb, &self.inner) {
            Ok(r) => Ok(sigma * r.value),
            Err(QuadError::NonFinite { estimate }) => Err(QuadError::NonFinite { estimate: sigma * estimate }),
            Err(e) => Err(e),
        }
    }

    fn extend(&self, from: Point, l_from: f64, to: Point) -> Result<f64, QuadError> {
        if l_from == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        match self.piece(from, to) {
            Ok(v) => Ok(l_from - v),
            Err(QuadError::NonFinite { estimate }) if estimate > 0.0 => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    }

    fn ensure_level(&self, cache: &mut Cache, level: usize) -> Result<(), QuadError> {
        while cache.levels.len() <= level {
            let lv = cache.levels.len();
            let h = 0.5f64.powi(lv as i32);
            let mut ts = level_ts(lv);
            if lv == 0 {
                let td = self.t_delim;
                let order = |t: f64| {
                    if td.is_finite() {
                        (t - td).abs()
                    } else if td > 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                ts.sort_by(|a, b| order(*a).total_cmp(&order(*b)));
            }
            let mut nodes = Vec::with_capacity(ts.len());
            for t in ts {
                let nd = node(t, self.lo.at, self.hi.at);
                if nd.dist == 0.0 {
                    continue;
                }
                let here = Point {
                    anchor: if t < 0.0 { Anchor::Lo } else { Anchor::Hi },
                    dist: nd.dist,
                };
                let toward = if t < self.t_delim { t + h } else { t - h };
                let crosses = if t < self.t_delim { toward >= self.t_delim } else { toward <= self.t_delim };
                let (from, l_from) = if crosses || toward.abs() > T_MAX {
                    (self.delim, 0.0)
                } else {
                    cache.by_key.get(&key(toward)).copied().unwrap_or((self.delim, 0.0))
                };
                let drift = self.drift(here);
                let mut log_omega = self.extend(from, l_from, here)?;
                let mut ln_abs_drift = drift.abs().ln();
                if drift == 0.0 || !drift.is_finite() {
                    log_omega = f64::NEG_INFINITY;
                    ln_abs_drift = 0.0;
                }
                cache.by_key.insert(key(t), (here, log_omega));
                nodes.push(Node { at: nd.at, ln_jac: nd.ln_jac, log_omega, drift, ln_abs_drift });
            }
            cache.levels.push(nodes);
        }
        Ok(())
    }

    /// `∫ f(node) dv` over the kernel interval, with `f` evaluated at cached
    /// nodes.
    pub fn integrate(&self, f: impl Fn(&Node) -> f64) -> Result<Integral, QuadError> {
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        let mut sum = 0.0;
        let mut prev = f64::NAN;
        let mut evals = 0;
        let mut err = f64::INFINITY;
        for level in 0..=MAX_LEVEL {
            self.ensure_level(&mut cache, level)?;
            let h = 0.5f64.powi(level as i32);
            for nd in &cache.levels[level] {
                let y = f(nd);
                evals += 1;
                if y != 0.0 {
                    sum += y * nd.ln_jac.exp();
                }
            }
            let estimate = sum * h;
            if !estimate.is_finite() {
                return Err(QuadError::NonFinite { estimate });
            }
            if level > 0 {
                err = (estimate - prev).abs();
                if level >= MIN_LEVEL && err <= self.cfg.abs_tol.max(self.cfg.rel_tol * estimate.abs()) {
                    return Ok(Integral { value: estimate, error: err, evals });
                }
            }
            prev = estimate;
        }
        Err(QuadError::NonConvergence { estimate: prev, error: err })
    }

    /// `L(v)` at an arbitrary interior point.
    pub fn log_omega_at(&self, v: f64) -> Result<f64, QuadError> {
        let mid = 0.5 * (self.lo.at + self.hi.at);
        let p = if v < mid {
            Point { anchor: Anchor::Lo, dist: v - self.lo.at }
        } else {
            Point { anchor: Anchor::Hi, dist: self.hi.at - v }
        };
        self.extend(self.delim, 0.0, p)
    }
}
