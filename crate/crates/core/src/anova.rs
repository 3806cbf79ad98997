//! ANOVA decomposition of a symmetric statistic under i.i.d. sampling.
//!
//! With partial expectations `μ_ν` from the [`Engine`], the interaction
//! function of order `k` is the inclusion–exclusion sum
//!
//! ```text
//! α_k(x_1..x_k) = Σ_{S ⊆ {1..k}} (-1)^{k-|S|} μ_{|S|}(x_S)
//! ```
//!
//! and `θ(x_1..x_M)` equals the sum of `α_{|S|}(x_S)` over all subsets `S`
//! of sample positions.

use serde::Serialize;

use crate::engine::{Engine, ValueKind};
use crate::error::{Error, Result};
use crate::model::{DiscreteDistribution, Point};
use crate::numeric::CompensatedSum;
use crate::statistics::StatisticSpec;

/// The decomposition of one statistic at one resample size `M` under one
/// base distribution `F`.
#[derive(Debug, Clone, Copy)]
pub struct Decomposition<'a> {
    engine: &'a Engine,
    stat: &'a StatisticSpec,
    dist: &'a DiscreteDistribution,
    m: usize,
}

/// Subsets of `0..n` ordered by size, then lexicographically.
pub fn subsets_by_size(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..=n).flat_map(move |k| combinations(n, k))
}

/// All k-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut current: Option<Vec<usize>> = if k <= n { Some((0..k).collect()) } else { None };
    std::iter::from_fn(move || {
        let out = current.clone()?;
        let next = {
            let mut c = out.clone();
            match (0..k).rev().find(|&i| c[i] < n - k + i) {
                Some(i) => {
                    c[i] += 1;
                    for j in i + 1..k {
                        c[j] = c[j - 1] + 1;
                    }
                    Some(c)
                }
                None => None,
            }
        };
        current = next;
        Some(out)
    })
}

impl<'a> Decomposition<'a> {
    pub fn new(engine: &'a Engine, stat: &'a StatisticSpec, dist: &'a DiscreteDistribution, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("resample size M must be at least 1".into()));
        }
        Ok(Decomposition { engine, stat, dist, m })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn engine(&self) -> &'a Engine {
        self.engine
    }

    pub fn stat(&self) -> &'a StatisticSpec {
        self.stat
    }

    pub fn dist(&self) -> &'a DiscreteDistribution {
        self.dist
    }

    /// `μ_k(points)`.
    pub fn partial_expectation(&self, points: &[Point]) -> Result<f64> {
        self.engine.expect_iid(self.stat, self.dist, self.m, points)
    }

    /// The grand mean `α_0 = μ_0 = θ_M^B(F)`.
    pub fn grand_mean(&self) -> Result<f64> {
        self.partial_expectation(&[])
    }

    /// Interaction function `α_k(points)` with `k = points.len()`.
    pub fn term(&self, points: &[Point]) -> Result<f64> {
        let k = points.len();
        if k > self.m {
            return Err(Error::OrderExceedsResampleSize { k, m: self.m });
        }
        let mut sorted = points.to_vec();
        sorted.sort_unstable();
        self.engine.memoized(ValueKind::Interaction, self.stat, self.dist, self.m, &sorted, || {
            let mut acc = CompensatedSum::new();
            let mut subset = Vec::with_capacity(k);
            for s in subsets_by_size(k) {
                subset.clear();
                subset.extend(s.iter().map(|&i| sorted[i]));
                let mu = self.partial_expectation(&subset)?;
                acc.add(if (k - s.len()) % 2 == 0 { mu } else { -mu });
            }
            Ok(acc.total())
        })
    }

    /// `Σ_{S ⊆ positions} α_{|S|}(sample_S)`, which reproduces
    /// `θ(sample)`.
    pub fn reconstruct(&self, sample: &[Point]) -> Result<f64> {
        if sample.len() != self.m {
            return Err(Error::InvalidArgument(format!(
                "reconstruction needs exactly M = {} points, got {}",
                self.m,
                sample.len()
            )));
        }
        let mut acc = CompensatedSum::new();
        for s in subsets_by_size(self.m) {
            let pts: Vec<Point> = s.iter().map(|&i| sample[i]).collect();
            acc.add(self.term(&pts)?);
        }
        Ok(acc.total())
    }

    /// `Σ_i w_i α_k(points with x_i inserted at slot)` over the support of
    /// `F`, where `k = points.len() + 1` and `slot` is 1-based.
    pub fn marginal_residual(&self, k: usize, points: &[Point], slot: usize) -> Result<f64> {
        if k == 0 || k > self.m {
            return Err(Error::OrderExceedsResampleSize { k, m: self.m });
        }
        if points.len() != k - 1 {
            return Err(Error::InvalidArgument(format!(
                "order {k} marginal needs {} fixed points, got {}",
                k - 1,
                points.len()
            )));
        }
        if slot == 0 || slot > k {
            return Err(Error::SlotOutOfRange { slot, k });
        }
        let mut acc = CompensatedSum::new();
        let mut args = Vec::with_capacity(k);
        for (x, w) in self.dist.iter() {
            args.clear();
            args.extend_from_slice(&points[..slot - 1]);
            args.push(x);
            args.extend_from_slice(&points[slot - 1..]);
            acc.add(w * self.term(&args)?);
        }
        Ok(acc.total())
    }

    /// All interaction terms of `sample` grouped by order, plus the
    /// reconstruction check.
    pub fn report(&self, sample: &[Point]) -> Result<AnovaReport> {
        let statistic_value = self.stat.evaluate(sample)?;
        let reconstruction = self.reconstruct(sample)?;
        let mut orders = Vec::with_capacity(self.m + 1);
        for k in 0..=self.m {
            let mut terms = Vec::new();
            for s in combinations(self.m, k) {
                let pts: Vec<Point> = s.iter().map(|&i| sample[i]).collect();
                let alpha_value = self.term(&pts)?;
                terms.push(AnovaEntry { points: pts.iter().map(|p| p.value()).collect(), alpha_value });
            }
            let sum = terms.iter().map(|t| t.alpha_value).collect::<CompensatedSum>().total();
            orders.push(AnovaOrder { k, terms, sum });
        }
        Ok(AnovaReport {
            statistic: self.stat.id(),
            m: self.m,
            sample: sample.iter().map(|p| p.value()).collect(),
            orders,
            statistic_value,
            reconstruction,
            residual: reconstruction - statistic_value,
        })
    }
}

/// One interaction value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaEntry {
    pub points: Vec<f64>,
    pub alpha_value: f64,
}

/// All terms of one order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaOrder {
    pub k: usize,
    pub terms: Vec<AnovaEntry>,
    pub sum: f64,
}

/// Full decomposition of one sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaReport {
    pub statistic: String,
    pub m: usize,
    pub sample: Vec<f64>,
    pub orders: Vec<AnovaOrder>,
    pub statistic_value: f64,
    pub reconstruction: f64,
    pub residual: f64,
}

/// `α_k^M(points)` for `stat` under `dist`.
pub fn anova_term(
    engine: &Engine,
    stat: &StatisticSpec,
    dist: &DiscreteDistribution,
    m: usize,
    points: &[Point],
) -> Result<f64> {
    Decomposition::new(engine, stat, dist, m)?.term(points)
}

/// Sum of all ANOVA terms of `sample`.
pub fn anova_reconstruct(
    engine: &Engine,
    stat: &StatisticSpec,
    dist: &DiscreteDistribution,
    m: usize,
    sample: &[Point],
) -> Result<f64> {
    Decomposition::new(engine, stat, dist, m)?.reconstruct(sample)
}

/// `E_F α_k` in one argument slot (1-based).
pub fn marginal_residual(
    engine: &Engine,
    stat: &StatisticSpec,
    dist: &DiscreteDistribution,
    m: usize,
    k: usize,
    points: &[Point],
    slot: usize,
) -> Result<f64> {
    Decomposition::new(engine, stat, dist, m)?.marginal_residual(k, points, slot)
}
