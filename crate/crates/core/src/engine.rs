//! Exact expectations over i.i.d. draws from a finitely supported
//! distribution.
//!
//! `M` draws from an `n`-point support are enumerated as compositions of `M`
//! into `n` nonnegative counts, each weighted by its multinomial probability.
//! For a symmetric statistic this gives the same value as summing over all
//! `n^M` ordered tuples, at a cost of `C(n + M - 1, M)` evaluations.

use std::collections::HashMap;
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::model::{DiscreteDistribution, DistributionKey, MultisetKey, Point};
use crate::numeric::{binomial, ln_multinomial, multinomial, CompensatedSum, EXACT_FACTORIAL_LIMIT};
use crate::statistics::StatisticSpec;

/// Default cap on the number of compositions enumerated per expectation.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// One multiset of draws: how many times each support point occurs.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    pub counts: Vec<u32>,
    /// `M! / Π counts_i!`
    pub coefficient: f64,
    /// `coefficient × Π w_i^{counts_i}`
    pub weight: f64,
}

/// Number of compositions of `m` into `n` parts, `C(n + m - 1, m)`.
pub fn composition_count(n: usize, m: usize) -> u128 {
    if n == 0 {
        return if m == 0 { 1 } else { 0 };
    }
    binomial((n + m - 1) as u64, m as u64)
}

/// Fails with [`Error::EnumerationTooLarge`] when `C(n+m-1, m)` exceeds the
/// budget.
pub fn check_budget(n: usize, m: usize, budget: u64) -> Result<()> {
    let required = composition_count(n, m);
    if required > budget as u128 {
        return Err(Error::EnumerationTooLarge { required, budget });
    }
    Ok(())
}

/// Iterator over compositions in lexicographically decreasing order of the
/// count vector: `(m, 0, …, 0)` first, `(0, …, 0, m)` last.
#[derive(Debug, Clone)]
pub struct Compositions<'w> {
    weights: &'w [f64],
    counts: Vec<u32>,
    done: bool,
}

impl<'w> Compositions<'w> {
    fn new(weights: &'w [f64], m: u32) -> Self {
        let mut counts = vec![0; weights.len()];
        counts[0] = m;
        Compositions { weights, counts, done: false }
    }

    fn weight_of(&self, coefficient: f64) -> f64 {
        let total: u32 = self.counts.iter().sum();
        if total <= EXACT_FACTORIAL_LIMIT {
            let mut w = coefficient;
            for (&c, &p) in self.counts.iter().zip(self.weights) {
                if c > 0 {
                    w *= p.powi(c as i32);
                }
            }
            w
        } else {
            let mut log = ln_multinomial(&self.counts);
            for (&c, &p) in self.counts.iter().zip(self.weights) {
                if c > 0 {
                    log += c as f64 * p.ln();
                }
            }
            log.exp()
        }
    }

    fn advance(&mut self) {
        let n = self.counts.len();
        // rightmost nonzero position that can shed a unit to its right
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| self.counts[i] > 0) else {
            self.done = true;
            return;
        };
        let tail: u32 = self.counts[i + 1..].iter().sum();
        self.counts[i] -= 1;
        for c in &mut self.counts[i + 1..] {
            *c = 0;
        }
        self.counts[i + 1] = tail + 1;
    }
}

impl Iterator for Compositions<'_> {
    type Item = Composition;

    fn next(&mut self) -> Option<Composition> {
        if self.done {
            return None;
        }
        let coefficient = multinomial(&self.counts);
        let item = Composition { counts: self.counts.clone(), coefficient, weight: self.weight_of(coefficient) };
        self.advance();
        Some(item)
    }
}

/// Enumerates the compositions of `m` draws over a support with the given
/// probabilities.
pub fn enumerate_compositions(weights: &[f64], m: usize, budget: u64) -> Result<Compositions<'_>> {
    if weights.is_empty() {
        return Err(Error::InvalidArgument("support must be nonempty".into()));
    }
    check_budget(weights.len(), m, budget)?;
    Ok(Compositions::new(weights, m as u32))
}

/// Memo key for partial expectations and interaction values.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    kind: ValueKind,
    stat: String,
    dist: DistributionKey,
    m: usize,
    fixed: MultisetKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum ValueKind {
    PartialExpectation,
    Interaction,
}

/// Memoizing exact-expectation engine.
///
/// Values are pure functions of their key, so concurrent writers racing on
/// one key store the same bits.
#[derive(Debug)]
pub struct Engine {
    budget: u64,
    memo: RwLock<HashMap<CacheKey, f64>>,
}

impl Default for Engine {
    fn default() -> Self {
        Self::new()
    }
}

impl Engine {
    pub fn new() -> Self {
        Self::with_budget(DEFAULT_BUDGET)
    }

    pub fn with_budget(budget: u64) -> Self {
        Engine { budget, memo: RwLock::new(HashMap::new()) }
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    /// Number of memoized values.
    pub fn cache_len(&self) -> usize {
        self.memo.read().unwrap().len()
    }

    pub fn clear_cache(&self) {
        self.memo.write().unwrap().clear();
    }

    pub(crate) fn memoized<F>(
        &self,
        kind: ValueKind,
        stat: &StatisticSpec,
        dist: &DiscreteDistribution,
        m: usize,
        sorted_points: &[Point],
        compute: F,
    ) -> Result<f64>
    where
        F: FnOnce() -> Result<f64>,
    {
        let key = CacheKey {
            kind,
            stat: stat.id(),
            dist: dist.content_key(),
            m,
            fixed: MultisetKey::from_sorted(sorted_points),
        };
        if let Some(&v) = self.memo.read().unwrap().get(&key) {
            return Ok(v);
        }
        let v = compute()?;
        self.memo.write().unwrap().insert(key, v);
        Ok(v)
    }

    /// Partial expectation `μ_k(fixed) = E_F θ(fixed_1, …, fixed_k, X_{k+1}, …, X_M)`.
    ///
    /// The order of `fixed` does not matter; the result is memoized under the
    /// sorted multiset.
    pub fn expect_iid(
        &self,
        stat: &StatisticSpec,
        dist: &DiscreteDistribution,
        m: usize,
        fixed: &[Point],
    ) -> Result<f64> {
        if fixed.len() > m {
            return Err(Error::TooManyFixed { fixed: fixed.len(), m });
        }
        if m == 0 {
            return Err(Error::StatisticOnEmptySample);
        }
        let mut sorted = fixed.to_vec();
        sorted.sort_unstable();
        self.memoized(ValueKind::PartialExpectation, stat, dist, m, &sorted, || {
            self.expect_uncached(stat, dist, m, &sorted)
        })
    }

    /// Same as [`Engine::expect_iid`] without touching the memo.
    pub fn expect_uncached(
        &self,
        stat: &StatisticSpec,
        dist: &DiscreteDistribution,
        m: usize,
        fixed: &[Point],
    ) -> Result<f64> {
        if fixed.len() > m {
            return Err(Error::TooManyFixed { fixed: fixed.len(), m });
        }
        if m == 0 {
            return Err(Error::StatisticOnEmptySample);
        }
        let free = m - fixed.len();
        let fixed_values: Vec<f64> = fixed.iter().map(|p| p.value()).collect();
        if free == 0 {
            return Ok(stat.evaluate_values(fixed_values));
        }
        let support: Vec<f64> = dist.support().iter().map(|p| p.value()).collect();
        let mut acc = CompensatedSum::new();
        let mut sample = Vec::with_capacity(m);
        for comp in enumerate_compositions(dist.weights(), free, self.budget)? {
            sample.clear();
            sample.extend_from_slice(&fixed_values);
            for (&c, &x) in comp.counts.iter().zip(&support) {
                sample.extend(std::iter::repeat_n(x, c as usize));
            }
            acc.add(comp.weight * stat.evaluate_values(sample.clone()));
        }
        Ok(acc.total())
    }

    /// The bagged functional `θ_M^B(F) = E_F θ(X_1, …, X_M)`.
    pub fn exact_bagged(&self, stat: &StatisticSpec, dist: &DiscreteDistribution, m: usize) -> Result<f64> {
        if m == 0 {
            return Err(Error::InvalidArgument("resample size M must be at least 1".into()));
        }
        self.expect_iid(stat, dist, m, &[])
    }
}
