//! Permutation-symmetric statistics `θ(x_1, …, x_M)`.
//!
//! Built-ins evaluate on an internally sorted copy of the sample, so any
//! reordering of the input gives a bit-identical value.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::Point;
use crate::numeric::compensated_sum;

type Evaluator = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// The registry of built-in statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    Mean,
    /// Plug-in variance, divisor M.
    VarianceM,
    /// Midpoint of the two central order statistics when M is even.
    Median,
    Max,
    /// Drops `floor(gamma * M)` points from each end.
    TrimmedMean { gamma: f64 },
    /// `1{mean > c}`.
    ThresholdMean { c: f64 },
}

impl Builtin {
    pub const NAMES: [&'static str; 6] =
        ["mean", "variance_m", "median", "max", "trimmed_mean", "threshold_mean"];

    fn eval_sorted(&self, x: &[f64]) -> f64 {
        match *self {
            Builtin::Mean => mean_of(x),
            Builtin::VarianceM => {
                let m = mean_of(x);
                compensated_sum(x.iter().map(|v| (v - m) * (v - m))) / x.len() as f64
            }
            Builtin::Median => {
                let n = x.len();
                if n % 2 == 1 {
                    x[n / 2]
                } else {
                    0.5 * (x[n / 2 - 1] + x[n / 2])
                }
            }
            Builtin::Max => x[x.len() - 1],
            Builtin::TrimmedMean { gamma } => {
                let cut = (gamma * x.len() as f64).floor() as usize;
                mean_of(&x[cut..x.len() - cut])
            }
            Builtin::ThresholdMean { c } => {
                if mean_of(x) > c {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

fn mean_of(x: &[f64]) -> f64 {
    compensated_sum(x.iter().copied()) / x.len() as f64
}

/// A named real-valued statistic of a nonempty finite sample.
///
/// The name together with the parameters identifies the statistic in memo
/// keys, so distinct custom statistics need distinct names.
#[derive(Clone)]
pub struct StatisticSpec {
    name: String,
    params: BTreeMap<String, f64>,
    kind: Kind,
}

#[derive(Clone)]
enum Kind {
    Builtin(Builtin),
    Custom(Arc<Evaluator>),
}

impl StatisticSpec {
    /// Looks up a built-in by name. Parameters not listed for the statistic
    /// are rejected; missing ones default to 0.
    pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let allowed: &[&str] = match name {
            "mean" | "variance_m" | "median" | "max" => &[],
            "trimmed_mean" => &["gamma"],
            "threshold_mean" => &["c"],
            _ => return Err(Error::UnknownStatistic(name.to_string())),
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidParameter {
                stat: name.to_string(),
                reason: format!("unexpected parameter '{k}'"),
            });
        }
        if let Some((k, v)) = params.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                stat: name.to_string(),
                reason: format!("parameter {k} = {v} is not finite"),
            });
        }
        let get = |k: &str| params.get(k).copied().unwrap_or(0.0);
        let builtin = match name {
            "mean" => Builtin::Mean,
            "variance_m" => Builtin::VarianceM,
            "median" => Builtin::Median,
            "max" => Builtin::Max,
            "trimmed_mean" => {
                let gamma = get("gamma");
                if !(0.0..0.5).contains(&gamma) {
                    return Err(Error::InvalidParameter {
                        stat: name.to_string(),
                        reason: format!("gamma = {gamma} outside [0, 0.5)"),
                    });
                }
                Builtin::TrimmedMean { gamma }
            }
            "threshold_mean" => Builtin::ThresholdMean { c: get("c") },
            _ => unreachable!(),
        };
        let mut stored = BTreeMap::new();
        for k in allowed {
            stored.insert(k.to_string(), get(k));
        }
        Ok(StatisticSpec { name: name.to_string(), params: stored, kind: Kind::Builtin(builtin) })
    }

    pub fn mean() -> Self {
        Self::builtin("mean", &BTreeMap::new()).unwrap()
    }

    pub fn variance_m() -> Self {
        Self::builtin("variance_m", &BTreeMap::new()).unwrap()
    }

    pub fn median() -> Self {
        Self::builtin("median", &BTreeMap::new()).unwrap()
    }

    pub fn max() -> Self {
        Self::builtin("max", &BTreeMap::new()).unwrap()
    }

    pub fn trimmed_mean(gamma: f64) -> Result<Self> {
        Self::builtin("trimmed_mean", &BTreeMap::from([("gamma".to_string(), gamma)]))
    }

    pub fn threshold_mean(c: f64) -> Self {
        Self::builtin("threshold_mean", &BTreeMap::from([("c".to_string(), c)]))
            .expect("finite threshold")
    }

    /// A user-supplied statistic. The closure receives the sample in the
    /// order given and must be symmetric for the engine's results to mean
    /// anything; [`check_symmetry`] can spot-check that.
    pub fn custom<F>(name: &str, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        StatisticSpec { name: name.to_string(), params: BTreeMap::new(), kind: Kind::Custom(Arc::new(f)) }
    }

    /// Parses `NAME[:param=value,...]`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, rest) = match text.split_once(':') {
            Some((n, r)) => (n.trim(), Some(r)),
            None => (text.trim(), None),
        };
        let mut params = BTreeMap::new();
        if let Some(rest) = rest {
            for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (k, v) = item.split_once('=').ok_or_else(|| Error::InvalidParameter {
                    stat: name.to_string(),
                    reason: format!("expected param=value, got '{item}'"),
                })?;
                let v: f64 = v.trim().parse().map_err(|_| Error::InvalidParameter {
                    stat: name.to_string(),
                    reason: format!("cannot parse '{}' as a number", v.trim()),
                })?;
                params.insert(k.trim().to_string(), v);
            }
        }
        Self::builtin(name, &params)
    }

    /// All built-ins with the parameters used throughout the test suites.
    pub fn all_builtins() -> Vec<Self> {
        vec![
            Self::mean(),
            Self::variance_m(),
            Self::median(),
            Self::max(),
            Self::trimmed_mean(0.2).unwrap(),
            Self::threshold_mean(0.0),
        ]
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Stable identifier used in memo keys, e.g. `threshold_mean:c=0`.
    pub fn id(&self) -> String {
        self.to_string()
    }

    pub fn evaluate(&self, sample: &[Point]) -> Result<f64> {
        if sample.is_empty() {
            return Err(Error::StatisticOnEmptySample);
        }
        let values: Vec<f64> = sample.iter().map(|p| p.value()).collect();
        Ok(self.evaluate_values(values))
    }

    /// Evaluates on raw values. Callers guarantee a nonempty sample.
    pub(crate) fn evaluate_values(&self, mut values: Vec<f64>) -> f64 {
        debug_assert!(!values.is_empty());
        match &self.kind {
            Kind::Builtin(b) => {
                values.sort_unstable_by(f64::total_cmp);
                b.eval_sorted(&values)
            }
            Kind::Custom(f) => f(&values),
        }
    }
}

impl fmt::Display for StatisticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            write!(f, "{}{k}={v}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

impl fmt::Debug for StatisticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StatisticSpec({self})")
    }
}

impl FromStr for StatisticSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Evaluates `stat` on `sample`.
pub fn evaluate(stat: &StatisticSpec, sample: &[Point]) -> Result<f64> {
    stat.evaluate(sample)
}

/// True iff `trials` random permutations of `sample` all evaluate to the
/// same bits as the sample itself.
pub fn check_symmetry(stat: &StatisticSpec, sample: &[Point], trials: usize, seed: u64) -> Result<bool> {
    let reference = stat.evaluate(sample)?.to_bits();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm = sample.to_vec();
    for _ in 0..trials {
        perm.shuffle(&mut rng);
        if stat.evaluate(&perm)?.to_bits() != reference {
            return Ok(false);
        }
    }
    Ok(true)
}
