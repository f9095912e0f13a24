use statrs::function::gamma::ln_gamma;

use super::Abscissa;
use crate::error::{Error, Result};

/// Tolerance on the total mass of a tabular pmf.
pub const PMF_SUM_TOL: f64 = 1e-12;

/// Number-of-offspring distribution `p = (p_k)`.
#[derive(Debug, Clone, PartialEq)]
pub enum OffspringLaw {
    /// Finite-support pmf; index `k` holds `p_k`.
    Tabular(Vec<f64>),
    /// `p̃(z) = p0 + (1 - p0)(1 - (1 - z)^alpha)`: an atom at zero mixed with a
    /// Sibuya law.
    SibuyaMix { p0: f64, alpha: f64 },
}

/// Immigration/culling distribution `r = (r_k)` on `{-1} ∪ ℕ`.
#[derive(Debug, Clone, PartialEq)]
pub enum ImmigrationLaw {
    None,
    /// `culling` is `r_{-1}`; `batches[k]` is `r_k` for `k >= 1` (`batches[0]` is unused and zero).
    Tabular { culling: f64, batches: Vec<f64> },
    /// `r̃(z) = 1 - (1 - z)^alpha`, no culling.
    Sibuya { alpha: f64 },
}

/// `P(K = k)` for a Sibuya(alpha) variable, `k >= 1`.
pub fn sibuya_pmf(alpha: f64, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    alpha / k as f64 * sibuya_survival(alpha, k - 1)
}

/// Below this index the survival product is multiplied out.
const STIRLING_FROM: u64 = 32;

/// `ln Γ(x - alpha) - ln Γ(x)` for `x >= 32`, without the cancellation of
/// subtracting two large `ln Γ` values.
fn ln_gamma_shift(alpha: f64, x: f64) -> f64 {
    let z = x - alpha;
    let tail = |z: f64| {
        let r = 1.0 / (z * z);
        (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r / 1680.0))) / z
    };
    -alpha * x.ln() + (z - 0.5) * (-alpha / x).ln_1p() + alpha + tail(z) - tail(x)
}

/// `P(K > k)` for a Sibuya(alpha) variable.
pub fn sibuya_survival(alpha: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k < STIRLING_FROM {
        return (1..=k).map(|j| 1.0 - alpha / j as f64).product();
    }
    (ln_gamma_shift(alpha, k as f64 + 1.0) - ln_gamma(1.0 - alpha)).exp()
}

fn check_unit(v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "v",
            value: v,
            domain: "(0,1]",
        })
    }
}

fn tabular_problems(label: &str, probs: impl Iterator<Item = f64>, out: &mut Vec<String>) {
    let mut sum = 0.0;
    for p in probs {
        if !(0.0..=1.0).contains(&p) {
            out.push(format!("{label} probabilities must lie in [0,1]"));
            return;
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PMF_SUM_TOL {
        out.push(format!("{label} pmf sums to {sum}, not 1"));
    }
}

impl OffspringLaw {
    pub fn tabular(pmf: impl Into<Vec<f64>>) -> Self {
        OffspringLaw::Tabular(pmf.into())
    }

    pub(crate) fn problems(&self, out: &mut Vec<String>) {
        match self {
            OffspringLaw::Tabular(pmf) => {
                if pmf.is_empty() {
                    out.push("offspring pmf is empty".into());
                    return;
                }
                tabular_problems("offspring", pmf.iter().copied(), out);
            }
            OffspringLaw::SibuyaMix { p0, alpha } => {
                if !(*p0 > 0.0 && *p0 < 1.0) {
                    out.push(format!("sibuya_mix p0={p0} must lie in (0,1)"));
                }
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    out.push(format!("sibuya_mix alpha={alpha} must lie in (0,1)"));
                }
            }
        }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        match self {
            OffspringLaw::Tabular(pmf) => pmf.get(k as usize).copied().unwrap_or(0.0),
            OffspringLaw::SibuyaMix { p0, alpha } => {
                if k == 0 {
                    *p0
                } else {
                    (1.0 - p0) * sibuya_pmf(*alpha, k)
                }
            }
        }
    }

    pub fn p0(&self) -> f64 {
        self.pmf(0)
    }

    pub fn p1(&self) -> f64 {
        self.pmf(1)
    }

    /// Largest `k` with `p_k > 0`, or `None` for infinite support.
    pub fn support_max(&self) -> Option<usize> {
        match self {
            OffspringLaw::Tabular(pmf) => pmf.iter().rposition(|&p| p > 0.0),
            OffspringLaw::SibuyaMix { .. } => None,
        }
    }

    /// `p̃'(1-)`; infinite for the Sibuya family.
    pub fn mean(&self) -> f64 {
        match self {
            OffspringLaw::Tabular(pmf) => pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum(),
            OffspringLaw::SibuyaMix { .. } => f64::INFINITY,
        }
    }

    /// Generating function on `(0, 1]`.
    pub fn pgf(&self, v: f64) -> Result<f64> {
        check_unit(v)?;
        Ok(self.pgf_unchecked(v))
    }

    pub(crate) fn pgf_unchecked(&self, v: f64) -> f64 {
        match self {
            OffspringLaw::Tabular(pmf) => pmf.iter().rev().fold(0.0, |acc, p| acc * v + p),
            OffspringLaw::SibuyaMix { p0, alpha } => p0 + (1.0 - p0) * (1.0 - (1.0 - v).powf(*alpha)),
        }
    }

    /// `p̃(v) - p̃(base)` for `v = base + offset`.
    pub(crate) fn pgf_increment(&self, at: &Abscissa) -> f64 {
        if at.offset == 0.0 {
            return 0.0;
        }
        match self {
            OffspringLaw::Tabular(pmf) => pmf
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, p)| if *p == 0.0 { 0.0 } else { p * at.pow_increment(k as i32) })
                .sum(),
            OffspringLaw::SibuyaMix { p0, alpha } => {
                (1.0 - p0) * tail_power_increment(at.base, at.offset, *alpha)
            }
        }
    }

    /// Coefficients of `e ↦ p̃(base + e)` (finite support only), by repeated
    /// synthetic division.
    pub(crate) fn taylor_at(&self, base: f64) -> Option<Vec<f64>> {
        let OffspringLaw::Tabular(pmf) = self else {
            return None;
        };
        let mut c = pmf.clone();
        let n = c.len();
        for i in 0..n.saturating_sub(1) {
            for k in (i..n - 1).rev() {
                c[k] += base * c[k + 1];
            }
        }
        Some(c)
    }

    /// `p̃'(v)` for `v` in `(0,1)`.
    pub fn derivative(&self, v: f64) -> f64 {
        match self {
            OffspringLaw::Tabular(pmf) => pmf
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, p)| acc * v + k as f64 * p),
            OffspringLaw::SibuyaMix { p0, alpha } => {
                (1.0 - p0) * alpha * (1.0 - v).powf(alpha - 1.0)
            }
        }
    }
}

/// `(1 - base)^alpha - (1 - base - offset)^alpha`.
fn tail_power_increment(base: f64, offset: f64, alpha: f64) -> f64 {
    if base == 1.0 {
        -(-offset).powf(alpha)
    } else {
        let gap = 1.0 - base;
        -gap.powf(alpha) * (alpha * (-offset / gap).ln_1p()).exp_m1()
    }
}

impl ImmigrationLaw {
    /// Builds a tabular law from `(k, r_k)` pairs with `k ∈ {-1} ∪ ℕ`.
    pub fn tabular(entries: &[(i64, f64)]) -> Result<Self> {
        let mut culling = 0.0;
        let top = entries.iter().map(|(k, _)| *k).max().unwrap_or(0).max(0) as usize;
        let mut batches = vec![0.0; top + 1];
        for &(k, r) in entries {
            match k {
                -1 => culling += r,
                0 => {
                    if r != 0.0 {
                        return Err(Error::InvalidModel(vec![
                            "immigration mass at 0 is not allowed (r_0 = 0)".into(),
                        ]));
                    }
                }
                k if k > 0 => batches[k as usize] += r,
                _ => {
                    return Err(Error::InvalidModel(vec![format!(
                        "immigration support must be in {{-1}} ∪ ℕ, got {k}"
                    )]))
                }
            }
        }
        Ok(ImmigrationLaw::Tabular { culling, batches })
    }

    pub fn is_none(&self) -> bool {
        matches!(self, ImmigrationLaw::None)
    }

    pub(crate) fn problems(&self, out: &mut Vec<String>) {
        match self {
            ImmigrationLaw::None => {}
            ImmigrationLaw::Tabular { culling, batches } => {
                if batches.first().is_some_and(|r| *r != 0.0) {
                    out.push("immigration mass at 0 is not allowed (r_0 = 0)".into());
                }
                tabular_problems(
                    "immigration",
                    std::iter::once(*culling).chain(batches.iter().skip(1).copied()),
                    out,
                );
            }
            ImmigrationLaw::Sibuya { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    out.push(format!("sibuya alpha={alpha} must lie in (0,1)"));
                }
            }
        }
    }

    /// `r_k` for `k ∈ {-1} ∪ ℕ`.
    pub fn pmf(&self, k: i64) -> f64 {
        match self {
            ImmigrationLaw::None => 0.0,
            ImmigrationLaw::Tabular { culling, batches } => match k {
                -1 => *culling,
                k if k > 0 => batches.get(k as usize).copied().unwrap_or(0.0),
                _ => 0.0,
            },
            ImmigrationLaw::Sibuya { alpha } => {
                if k > 0 {
                    sibuya_pmf(*alpha, k as u64)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn culling(&self) -> f64 {
        self.pmf(-1)
    }

    /// Largest batch size with positive mass, `None` for infinite support.
    pub fn support_max(&self) -> Option<usize> {
        match self {
            ImmigrationLaw::None => Some(0),
            ImmigrationLaw::Tabular { batches, .. } => {
                Some(batches.iter().rposition(|&p| p > 0.0).unwrap_or(0))
            }
            ImmigrationLaw::Sibuya { .. } => None,
        }
    }

    /// Whether some `r_k > 0` with `k >= 1`.
    pub fn has_arrivals(&self) -> bool {
        match self {
            ImmigrationLaw::None => false,
            ImmigrationLaw::Tabular { batches, .. } => batches.iter().skip(1).any(|&r| r > 0.0),
            ImmigrationLaw::Sibuya { .. } => true,
        }
    }

    /// `r̃'(1-)`, the mean jump; infinite for the Sibuya family.
    pub fn mean(&self) -> f64 {
        match self {
            ImmigrationLaw::None => 0.0,
            ImmigrationLaw::Tabular { culling, batches } => {
                -culling + batches.iter().enumerate().map(|(k, r)| k as f64 * r).sum::<f64>()
            }
            ImmigrationLaw::Sibuya { .. } => f64::INFINITY,
        }
    }

    pub fn pgf(&self, v: f64) -> Result<f64> {
        if self.is_none() {
            return Err(Error::NoImmigration);
        }
        check_unit(v)?;
        Ok(self.pgf_unchecked(v))
    }

    pub(crate) fn pgf_unchecked(&self, v: f64) -> f64 {
        match self {
            ImmigrationLaw::None => 1.0,
            ImmigrationLaw::Tabular { culling, batches } => {
                let poly = batches.iter().skip(1).rev().fold(0.0, |acc, r| acc * v + r) * v;
                culling / v + poly
            }
            ImmigrationLaw::Sibuya { alpha } => 1.0 - (1.0 - v).powf(*alpha),
        }
    }

    /// `1 - r̃(v)`, accurate near `v = 1` when the abscissa is based at `1`.
    pub(crate) fn deficit(&self, at: &Abscissa) -> f64 {
        match self {
            ImmigrationLaw::None => 0.0,
            ImmigrationLaw::Sibuya { alpha } => at.one_minus().powf(*alpha),
            ImmigrationLaw::Tabular { culling, batches } => {
                if at.base == 1.0 {
                    let mut inc = culling * at.pow_increment(-1);
                    for (k, r) in batches.iter().enumerate().skip(1) {
                        if *r != 0.0 {
                            inc += r * at.pow_increment(k as i32);
                        }
                    }
                    -inc
                } else {
                    1.0 - self.pgf_unchecked(at.value())
                }
            }
        }
    }

    /// `r̃'(v)` for `v` in `(0,1)`.
    pub fn derivative(&self, v: f64) -> f64 {
        match self {
            ImmigrationLaw::None => 0.0,
            ImmigrationLaw::Tabular { culling, batches } => {
                let poly = batches
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, r)| acc * v + k as f64 * r);
                poly - culling / (v * v)
            }
            ImmigrationLaw::Sibuya { alpha } => alpha * (1.0 - v).powf(alpha - 1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1() -> OffspringLaw {
        OffspringLaw::tabular(vec![0.75, 0.0, 0.25])
    }

    fn m4() -> OffspringLaw {
        OffspringLaw::SibuyaMix {
            p0: 0.2,
            alpha: 0.5,
        }
    }

    #[test]
    fn offspring_pgf_examples() {
        assert!((m1().pgf(0.5).unwrap() - 0.8125).abs() < 1e-15);
        assert!((m4().pgf(0.75).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(m1().pgf(1.0).unwrap(), 1.0);
        assert!((m4().pgf(1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(m1().pgf(0.0), Err(Error::Domain { .. })));
        assert!(matches!(m1().pgf(1.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn immigration_pgf_examples() {
        let cull = ImmigrationLaw::tabular(&[(-1, 1.0)]).unwrap();
        assert!((cull.pgf(0.5).unwrap() - 2.0).abs() < 1e-15);
        let one = ImmigrationLaw::tabular(&[(1, 1.0)]).unwrap();
        assert!((one.pgf(0.5).unwrap() - 0.5).abs() < 1e-15);
        let sib = ImmigrationLaw::Sibuya { alpha: 0.5 };
        assert!((sib.pgf(0.75).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ImmigrationLaw::None.pgf(0.5), Err(Error::NoImmigration));
        assert!(ImmigrationLaw::tabular(&[(0, 0.5), (1, 0.5)]).is_err());
    }

    #[test]
    fn sibuya_pmf_matches_generating_function() {
        // 1 - (1 - z)^a = Σ p_k z^k; compare at z = 0.3 with a long partial sum.
        let alpha = 0.4;
        let z: f64 = 0.3;
        let sum: f64 = (1..400).map(|k| sibuya_pmf(alpha, k) * z.powi(k as i32)).sum();
        assert!((sum - (1.0 - (1.0 - z).powf(alpha))).abs() < 1e-14);
        assert!((sibuya_pmf(alpha, 1) - alpha).abs() < 1e-14);
        // Survival product ∏ (1 - a/j).
        let prod: f64 = (1..=5).map(|j| 1.0 - alpha / j as f64).product();
        assert!((sibuya_survival(alpha, 5) - prod).abs() < 1e-14);
        let mut prod = 1.0;
        for k in 1..=200u64 {
            prod *= 1.0 - alpha / k as f64;
            assert!((sibuya_survival(alpha, k) / prod - 1.0).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn increments_agree_with_direct_differences() {
        let law = m1();
        let at = Abscissa::new(0.6, -0.1);
        let direct = law.pgf_unchecked(0.5) - law.pgf_unchecked(0.6);
        assert!((law.pgf_increment(&at) - direct).abs() < 1e-15);
        let at = Abscissa::new(1.0, -0.19);
        let direct = m4().pgf_unchecked(0.81) - 1.0;
        assert!((m4().pgf_increment(&at) - direct).abs() < 1e-15);
        let at = Abscissa::new(0.36, 0.1);
        let direct = m4().pgf_unchecked(0.46) - m4().pgf_unchecked(0.36);
        assert!((m4().pgf_increment(&at) - direct).abs() < 1e-15);
        let imm = ImmigrationLaw::tabular(&[(-1, 0.5), (2, 0.5)]).unwrap();
        let at = Abscissa::new(1.0, -0.2);
        assert!((imm.deficit(&at) - (1.0 - imm.pgf_unchecked(0.8))).abs() < 1e-15);
    }

    #[test]
    fn taylor_shift() {
        let law = OffspringLaw::tabular(vec![0.5, 0.0, 0.5]);
        assert_eq!(law.taylor_at(1.0).unwrap(), vec![1.0, 1.0, 0.5]);
        let c = m1().taylor_at(0.5).unwrap();
        assert!((c[0] - 0.8125).abs() < 1e-15 && (c[1] - 0.25).abs() < 1e-15);
        assert!(m4().taylor_at(0.5).is_none());
    }

    #[test]
    fn means_and_derivatives() {
        assert_eq!(m1().mean(), 0.5);
        assert!(m4().mean().is_infinite());
        assert!((m1().derivative(0.5) - 0.25).abs() < 1e-15);
        let imm = ImmigrationLaw::tabular(&[(-1, 1.0)]).unwrap();
        assert_eq!(imm.mean(), -1.0);
        assert!((imm.derivative(0.5) + 4.0).abs() < 1e-15);
    }
}
