use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::law::{ImmigrationLaw, OffspringLaw};
use super::Abscissa;
use crate::error::{Error, Result};

/// A killed ctBGW chain with immigration and culling: individuals die at rate
/// `lambda` leaving `k` children with probability `p_k`; independently, at rate
/// `mu`, `k` immigrants arrive (`k >= 1`) or one individual is culled (`k = -1`).
///
/// Tabular offspring laws are stored with `p_1 = 0` and the rate rescaled to
/// `lambda (1 - p_1)`. The Sibuya mixture keeps its closed form (and hence its
/// atom at one); [`ModelSpec::branch_rate`] and
/// [`ModelSpec::offspring_pmf_normalized`] expose the equivalent chain without it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    offspring: OffspringLaw,
    lambda: f64,
    immigration: ImmigrationLaw,
    mu: f64,
    input_lambda: f64,
}

impl ModelSpec {
    /// Validates and normalizes.
    pub fn new(
        offspring: OffspringLaw,
        lambda: f64,
        immigration: ImmigrationLaw,
        mu: f64,
    ) -> Result<Self> {
        let raw = Self::new_unvalidated(offspring, lambda, immigration, mu);
        let problems = raw.validate();
        if !problems.is_empty() {
            return Err(Error::InvalidModel(problems));
        }
        raw.normalize_remove_p1()
    }

    pub fn new_unvalidated(
        offspring: OffspringLaw,
        lambda: f64,
        immigration: ImmigrationLaw,
        mu: f64,
    ) -> Self {
        ModelSpec {
            offspring,
            lambda,
            immigration,
            mu,
            input_lambda: lambda,
        }
    }

    pub fn offspring(&self) -> &OffspringLaw {
        &self.offspring
    }

    pub fn immigration(&self) -> &ImmigrationLaw {
        &self.immigration
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// The reproduction rate given at construction, before removing `p_1`.
    pub fn input_lambda(&self) -> f64 {
        self.input_lambda
    }

    /// Rate of branching events that change the population, `lambda (1 - p_1)`.
    pub fn branch_rate(&self) -> f64 {
        self.lambda * (1.0 - self.offspring.p1())
    }

    /// Offspring pmf conditioned on `k != 1`.
    pub fn offspring_pmf_normalized(&self, k: u64) -> f64 {
        if k == 1 {
            0.0
        } else {
            self.offspring.pmf(k) / (1.0 - self.offspring.p1())
        }
    }

    /// Effective immigration rate: zero when there is no mechanism.
    pub(crate) fn mu_eff(&self) -> f64 {
        if self.immigration.is_none() {
            0.0
        } else {
            self.mu
        }
    }

    /// `mu * r_{-1} > 0`.
    pub fn has_culling(&self) -> bool {
        self.mu_eff() > 0.0 && self.immigration.culling() > 0.0
    }

    /// Every violated standing assumption, as human-readable messages.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            out.push(format!("lambda={} must be finite and > 0", self.lambda));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            out.push(format!("mu={} must be finite and >= 0", self.mu));
        }
        let before = out.len();
        self.offspring.problems(&mut out);
        self.immigration.problems(&mut out);
        if self.mu > 0.0 && self.immigration.is_none() {
            out.push("mu > 0 requires an immigration/culling law".into());
        }
        if out.len() > before {
            return out;
        }
        let p0 = self.offspring.p0();
        let p1 = self.offspring.p1();
        if p0 <= 0.0 {
            out.push(format!("p₀>0 violated (p₀={p0})"));
        }
        if p1 >= 1.0 {
            out.push("degenerate offspring law p₁ = 1".into());
            return out;
        }
        let grows = self.mu_eff() > 0.0 && self.immigration.has_arrivals();
        if !grows && p0 + p1 >= 1.0 - 1e-15 {
            out.push("a.s. nonincreasing paths: need μ r_k > 0 for some k ≥ 1 or p₀ + p₁ < 1".into());
        }
        out
    }

    /// Removes the atom at one from a tabular offspring law, rescaling `lambda`.
    /// Sibuya mixtures are returned unchanged (see [`ModelSpec::branch_rate`]).
    pub fn normalize_remove_p1(&self) -> Result<Self> {
        let mut out = self.clone();
        if let OffspringLaw::Tabular(pmf) = &self.offspring {
            let p1 = pmf.get(1).copied().unwrap_or(0.0);
            if p1 >= 1.0 {
                return Err(Error::InvalidModel(vec!["degenerate offspring law p₁ = 1".into()]));
            }
            if p1 > 0.0 {
                let mut new = pmf.clone();
                new[1] = 0.0;
                for p in new.iter_mut() {
                    *p /= 1.0 - p1;
                }
                while new.len() > 1 && new.last() == Some(&0.0) {
                    new.pop();
                }
                out.offspring = OffspringLaw::Tabular(new);
                out.lambda = self.lambda * (1.0 - p1);
            }
        }
        Ok(out)
    }

    /// `p̃'(1-)`.
    pub fn offspring_mean(&self) -> f64 {
        self.offspring.mean()
    }

    /// `p̃''(1-)` for tabular laws.
    pub(crate) fn offspring_second_factorial_moment(&self) -> f64 {
        match &self.offspring {
            OffspringLaw::Tabular(pmf) => pmf
                .iter()
                .enumerate()
                .map(|(k, p)| (k * k.saturating_sub(1)) as f64 * p)
                .sum(),
            OffspringLaw::SibuyaMix { .. } => f64::INFINITY,
        }
    }

    /// Signed drift `lambda (p̃(v) - v) - qbar v` at `v = base + offset`, where
    /// `base_drift` is the drift at `base` (zero when `base` is a root).
    pub(crate) fn drift_from(&self, at: &Abscissa, base_drift: f64, qbar: f64) -> f64 {
        base_drift + self.lambda * self.offspring.pgf_increment(at) - (self.lambda + qbar) * at.offset
    }

    pub(crate) fn drift(&self, v: f64, qbar: f64) -> f64 {
        self.lambda * (self.offspring.pgf_unchecked(v) - v) - qbar * v
    }

    /// Reads the JSON model format.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        file.into_spec()
    }

    /// Writes the JSON model format (normalized values).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from_spec(self)).expect("model serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    offspring: OffspringFile,
    lambda: f64,
    #[serde(default = "ImmigrationFile::none")]
    immigration: ImmigrationFile,
    #[serde(default)]
    mu: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum OffspringFile {
    Tabular { pmf: BTreeMap<String, f64> },
    SibuyaMix { p0: f64, alpha: f64 },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ImmigrationFile {
    None,
    Tabular { pmf: BTreeMap<String, f64> },
    Sibuya { alpha: f64 },
}

impl ImmigrationFile {
    fn none() -> Self {
        ImmigrationFile::None
    }
}

fn parse_entries(pmf: &BTreeMap<String, f64>) -> Result<Vec<(i64, f64)>> {
    pmf.iter()
        .map(|(k, v)| {
            k.trim()
                .parse::<i64>()
                .map(|k| (k, *v))
                .map_err(|_| Error::Format(format!("pmf key {k:?} is not a decimal integer")))
        })
        .collect()
}

fn key_sorted(entries: impl Iterator<Item = (i64, f64)>) -> BTreeMap<String, f64> {
    entries.filter(|(_, p)| *p != 0.0).map(|(k, p)| (k.to_string(), p)).collect()
}

impl ModelFile {
    fn into_spec(self) -> Result<ModelSpec> {
        let offspring = match self.offspring {
            OffspringFile::Tabular { pmf } => {
                let entries = parse_entries(&pmf)?;
                if let Some((k, _)) = entries.iter().find(|(k, _)| *k < 0) {
                    return Err(Error::Format(format!("offspring pmf key {k} is negative")));
                }
                let top = entries.iter().map(|(k, _)| *k).max().unwrap_or(0) as usize;
                let mut v = vec![0.0; top + 1];
                for (k, p) in entries {
                    v[k as usize] += p;
                }
                OffspringLaw::Tabular(v)
            }
            OffspringFile::SibuyaMix { p0, alpha } => OffspringLaw::SibuyaMix { p0, alpha },
        };
        let immigration = match self.immigration {
            ImmigrationFile::None => ImmigrationLaw::None,
            ImmigrationFile::Tabular { pmf } => ImmigrationLaw::tabular(&parse_entries(&pmf)?)?,
            ImmigrationFile::Sibuya { alpha } => ImmigrationLaw::Sibuya { alpha },
        };
        ModelSpec::new(offspring, self.lambda, immigration, self.mu)
    }

    fn from_spec(spec: &ModelSpec) -> Self {
        let offspring = match &spec.offspring {
            OffspringLaw::Tabular(pmf) => OffspringFile::Tabular {
                pmf: key_sorted(pmf.iter().enumerate().map(|(k, p)| (k as i64, *p))),
            },
            OffspringLaw::SibuyaMix { p0, alpha } => OffspringFile::SibuyaMix {
                p0: *p0,
                alpha: *alpha,
            },
        };
        let immigration = match &spec.immigration {
            ImmigrationLaw::None => ImmigrationFile::None,
            ImmigrationLaw::Tabular { culling, batches } => ImmigrationFile::Tabular {
                pmf: key_sorted(
                    std::iter::once((-1, *culling))
                        .chain(batches.iter().enumerate().skip(1).map(|(k, r)| (k as i64, *r))),
                ),
            },
            ImmigrationLaw::Sibuya { alpha } => ImmigrationFile::Sibuya { alpha: *alpha },
        };
        ModelFile {
            offspring,
            lambda: spec.lambda,
            immigration,
            mu: spec.mu,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tab(pmf: &[f64], lambda: f64) -> ModelSpec {
        ModelSpec::new_unvalidated(OffspringLaw::tabular(pmf.to_vec()), lambda, ImmigrationLaw::None, 0.0)
    }

    #[test]
    fn normalization_examples() {
        let n = tab(&[0.5, 0.5], 2.0).normalize_remove_p1().unwrap();
        assert_eq!(n.offspring(), &OffspringLaw::Tabular(vec![1.0]));
        assert_eq!(n.lambda(), 1.0);
        let n = tab(&[0.25, 0.5, 0.25], 4.0).normalize_remove_p1().unwrap();
        assert_eq!(n.offspring(), &OffspringLaw::Tabular(vec![0.5, 0.0, 0.5]));
        assert_eq!(n.lambda(), 2.0);
        let m1 = tab(&[0.75, 0.0, 0.25], 1.0);
        assert_eq!(m1.normalize_remove_p1().unwrap(), m1);
        assert!(tab(&[0.0, 1.0], 1.0).normalize_remove_p1().is_err());
    }

    #[test]
    fn validation_examples() {
        assert!(tab(&[0.75, 0.0, 0.25], 1.0).validate().is_empty());
        let culled = ModelSpec::new_unvalidated(
            OffspringLaw::tabular(vec![1.0]),
            1.0,
            ImmigrationLaw::tabular(&[(-1, 1.0)]).unwrap(),
            1.0,
        );
        let v = culled.validate();
        assert!(v.iter().any(|m| m.contains("a.s. nonincreasing paths")), "{v:?}");
        let v = tab(&[0.0, 0.0, 1.0], 1.0).validate();
        assert!(v.iter().any(|m| m.contains("p₀>0")), "{v:?}");
        assert!(!tab(&[0.5, 0.6], 1.0).validate().is_empty());
        assert!(!tab(&[0.5, 0.0, 0.5], -1.0).validate().is_empty());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"offspring":{"type":"tabular","pmf":{"0":0.3333333333333333,"2":0.6666666666666666}},
            "lambda":3,"immigration":{"type":"tabular","pmf":{"-1":1}},"mu":1}"#;
        let spec = ModelSpec::from_json(text).unwrap();
        assert_eq!(spec.immigration().culling(), 1.0);
        let back = ModelSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back, spec);
        let m4 = r#"{"offspring":{"type":"sibuya_mix","p0":0.2,"alpha":0.5},"lambda":1,"immigration":{"type":"none"},"mu":0}"#;
        let spec = ModelSpec::from_json(m4).unwrap();
        assert_eq!(ModelSpec::from_json(&spec.to_json()).unwrap(), spec);
        assert!(ModelSpec::from_json(r#"{"offspring":{"type":"tabular","pmf":{"x":1}},"lambda":1}"#).is_err());
    }
}
