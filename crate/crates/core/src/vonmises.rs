//! Influence functions and the finite von Mises expansion of a bagged
//! functional.
//!
//! For `θ_M^B(F) = E_F θ(X_1..X_M)` the order-`k` influence function is
//! `ψ_k^B = M!/(M-k)! · α_k^M` for `k ≤ M` and vanishes for `k > M`, so
//!
//! ```text
//! θ_M^B(G) = Σ_{k=0}^{M} C(M,k) · E_G α_k^M(X_1..X_k)
//! ```
//!
//! holds exactly for every `G`. [`influence_numeric`] recomputes `ψ_k^B`
//! without the ANOVA route, as the mixed partial derivative of
//! `θ_M^B((1 - Σ s_i) F + Σ s_i δ_{x_i})` taken with a stencil that is exact
//! for the degree-`M` polynomial this function is in each `s_i`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::anova::{combinations, Decomposition};
use crate::engine::{enumerate_compositions, Engine};
use crate::error::{Error, Result};
use crate::model::{DiscreteDistribution, MixtureSpec, Point};
use crate::numeric::{binomial, falling_factorial, CompensatedSum};
use crate::statistics::StatisticSpec;
use crate::stencil::{forward_derivative_weights, mixed_partial};

/// Highest order accepted by the finite-difference oracle.
pub const NUMERIC_MAX_ORDER: usize = 4;

/// Largest sample accepted by [`superset_compare`].
pub const SUPERSET_MAX_N: usize = 6;

/// `ψ_k^B(points)` for the `M`-bagged version of `stat` around `dist`, with
/// `k = points.len() ≥ 1`.
#[derive(Debug, Clone, Copy)]
pub struct InfluenceQuery<'a> {
    pub stat: &'a StatisticSpec,
    pub dist: &'a DiscreteDistribution,
    pub m: usize,
    pub points: &'a [Point],
}

impl InfluenceQuery<'_> {
    pub fn k(&self) -> usize {
        self.points.len()
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidArgument("resample size M must be at least 1".into()));
        }
        if self.points.is_empty() {
            return Err(Error::InvalidArgument(
                "influence order k must be at least 1; order 0 is the grand mean".into(),
            ));
        }
        Ok(())
    }
}

/// `ψ_k^B = M!/(M-k)! · α_k^M`, and exactly 0 for `k > M`.
pub fn influence_theorem(engine: &Engine, q: &InfluenceQuery<'_>) -> Result<f64> {
    q.validate()?;
    let k = q.k();
    if k > q.m {
        return Ok(0.0);
    }
    let alpha = Decomposition::new(engine, q.stat, q.dist, q.m)?.term(q.points)?;
    Ok(falling_factorial(q.m as u64, k as u64) as f64 * alpha)
}

/// Mixed partial `∂^k/∂s_1…∂s_k θ_M^B(F̃)` at `s = 0`, from exact bagged
/// values on the grid `s_i ∈ {0, h, …, M h}`, `h = 1/(M k)`.
pub fn influence_numeric(engine: &Engine, q: &InfluenceQuery<'_>) -> Result<f64> {
    q.validate()?;
    let k = q.k();
    if k > NUMERIC_MAX_ORDER {
        return Err(Error::NumericOrderLimit(k));
    }
    let nodes = q.m + 1;
    let grid = nodes.pow(k as u32);
    if grid as u64 > engine.budget() {
        return Err(Error::EnumerationTooLarge { required: grid as u128, budget: engine.budget() });
    }
    let denom = (q.m * k) as f64;
    let values: Vec<f64> = (0..grid)
        .into_par_iter()
        .map(|index| {
            // row-major digits, first contaminant most significant
            let mut rest = index;
            let mut digits = vec![0usize; k];
            for d in digits.iter_mut().rev() {
                *d = rest % nodes;
                rest /= nodes;
            }
            let contaminants = digits.iter().zip(q.points).map(|(&d, &x)| (d as f64 / denom, x)).collect();
            let mixture = MixtureSpec::new(q.dist.clone(), contaminants).realize()?;
            engine.expect_uncached(q.stat, &mixture, q.m, &[])
        })
        .collect::<Result<_>>()?;
    let weights = forward_derivative_weights(q.m, 1.0 / denom)?;
    mixed_partial(&weights, k, &values)
}

/// Per-order terms of a von Mises expansion and the exact value it should
/// reproduce.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub statistic: String,
    pub m: usize,
    /// `c_0 … c_M`
    pub contributions: Vec<f64>,
    pub total: f64,
    pub exact_reference: f64,
    /// `total - exact_reference`
    pub residual: f64,
}

impl ExpansionReport {
    fn from_contributions(stat: &StatisticSpec, m: usize, contributions: Vec<f64>, exact_reference: f64) -> Self {
        let total = contributions.iter().copied().collect::<CompensatedSum>().total();
        ExpansionReport {
            statistic: stat.id(),
            m,
            contributions,
            total,
            exact_reference,
            residual: total - exact_reference,
        }
    }

    /// Number of terms, `M + 1`.
    pub fn len(&self) -> usize {
        self.contributions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contributions.is_empty()
    }
}

/// The expansion of `θ_M^B(G)` around `F`:
/// `c_k = C(M,k) · E_G α_k^M(X_1..X_k)`.
pub fn vonmises_eval(
    engine: &Engine,
    stat: &StatisticSpec,
    base: &DiscreteDistribution,
    m: usize,
    eval: &DiscreteDistribution,
) -> Result<ExpansionReport> {
    let d = Decomposition::new(engine, stat, base, m)?;
    let mut contributions = Vec::with_capacity(m + 1);
    contributions.push(d.grand_mean()?);
    let mut args = Vec::with_capacity(m);
    for k in 1..=m {
        let mut acc = CompensatedSum::new();
        for comp in enumerate_compositions(eval.weights(), k, engine.budget())? {
            args.clear();
            for (&c, &x) in comp.counts.iter().zip(eval.support()) {
                args.extend(std::iter::repeat_n(x, c as usize));
            }
            acc.add(comp.weight * d.term(&args)?);
        }
        contributions.push(binomial(m as u64, k as u64) as f64 * acc.total());
    }
    let exact = engine.exact_bagged(stat, eval, m)?;
    Ok(ExpansionReport::from_contributions(stat, m, contributions, exact))
}

/// The expansion at the empirical distribution of `sample`, summing
/// `N^{-k} Σ_{j_1..j_k} α_k^M(y_{j_1}..y_{j_k})` over unconstrained index
/// tuples. Duplicate sample values are kept as separate indices.
pub fn plug_in_expansion(
    engine: &Engine,
    stat: &StatisticSpec,
    base: &DiscreteDistribution,
    m: usize,
    sample: &[Point],
) -> Result<ExpansionReport> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let d = Decomposition::new(engine, stat, base, m)?;
    let n = sample.len();
    let index_weights = vec![1.0 / n as f64; n];
    let mut contributions = Vec::with_capacity(m + 1);
    contributions.push(d.grand_mean()?);
    let mut args = Vec::with_capacity(m);
    for k in 1..=m {
        let mut acc = CompensatedSum::new();
        for comp in enumerate_compositions(&index_weights, k, engine.budget())? {
            args.clear();
            for (&c, &y) in comp.counts.iter().zip(sample) {
                args.extend(std::iter::repeat_n(y, c as usize));
            }
            acc.add(comp.weight * d.term(&args)?);
        }
        contributions.push(binomial(m as u64, k as u64) as f64 * acc.total());
    }
    let exact = engine.exact_bagged(stat, &DiscreteDistribution::empirical(sample)?, m)?;
    Ok(ExpansionReport::from_contributions(stat, m, contributions, exact))
}

/// `μ_0^M + (M/N) Σ_i α_1^M(x_i)`.
pub fn first_order_approx(
    engine: &Engine,
    stat: &StatisticSpec,
    base: &DiscreteDistribution,
    m: usize,
    sample: &[Point],
) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let d = Decomposition::new(engine, stat, base, m)?;
    let mut main = CompensatedSum::new();
    for &x in sample {
        main.add(d.term(&[x])?);
    }
    Ok(d.grand_mean()? + m as f64 / sample.len() as f64 * main.total())
}

/// One order of the superset comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupersetOrder {
    pub k: usize,
    /// `C(N,k)/N^k · Σ` over all `N^k` index tuples.
    pub bagged_unconstrained_sum: f64,
    /// Same weight, tuples with pairwise distinct indices.
    pub distinct_index_part: f64,
    /// Same weight, tuples with at least one repeated index.
    pub repeated_index_part: f64,
    /// `Σ` over strictly increasing index tuples.
    pub raw_ordered_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupersetTotals {
    pub bagged_total: f64,
    pub raw_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupersetReferences {
    pub exact_bagged_at_f_n: f64,
    pub raw_statistic_value: f64,
}

/// The `N`-bagged expansion at `F_N` next to the ANOVA expansion of the raw
/// statistic, order by order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupersetReport {
    pub statistic: String,
    pub n: usize,
    pub sample: Vec<f64>,
    pub per_order: Vec<SupersetOrder>,
    pub totals: SupersetTotals,
    pub references: SupersetReferences,
}

impl SupersetReport {
    /// Largest `|bagged - (distinct + repeated)|` over orders.
    pub fn partition_error(&self) -> f64 {
        self.per_order
            .iter()
            .map(|o| (o.bagged_unconstrained_sum - (o.distinct_index_part + o.repeated_index_part)).abs())
            .fold(0.0, f64::max)
    }

    /// `|raw_total - θ(sample)|`
    pub fn raw_error(&self) -> f64 {
        (self.totals.raw_total - self.references.raw_statistic_value).abs()
    }

    /// `|bagged_total - θ_N^B(F_N)|`
    pub fn bagged_error(&self) -> f64 {
        (self.totals.bagged_total - self.references.exact_bagged_at_f_n).abs()
    }
}

/// Builds the [`SupersetReport`] with `M = N = sample.len()`.
pub fn superset_compare(
    engine: &Engine,
    stat: &StatisticSpec,
    base: &DiscreteDistribution,
    sample: &[Point],
) -> Result<SupersetReport> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if n > SUPERSET_MAX_N {
        return Err(Error::SupersetSizeLimit(n));
    }
    let d = Decomposition::new(engine, stat, base, n)?;
    let mut per_order = Vec::with_capacity(n + 1);
    let mut args = Vec::with_capacity(n);
    for k in 0..=n {
        let scale = binomial(n as u64, k as u64) as f64 / (n as f64).powi(k as i32);
        let (mut all, mut distinct, mut repeated) =
            (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
        let mut idx = vec![0usize; k];
        loop {
            args.clear();
            args.extend(idx.iter().map(|&i| sample[i]));
            let a = d.term(&args)?;
            all.add(a);
            if has_repeat(&idx) {
                repeated.add(a);
            } else {
                distinct.add(a);
            }
            // odometer over N^k tuples
            let Some(pos) = (0..k).rev().find(|&p| idx[p] + 1 < n) else { break };
            idx[pos] += 1;
            for i in &mut idx[pos + 1..] {
                *i = 0;
            }
        }
        let mut raw = CompensatedSum::new();
        for c in combinations(n, k) {
            args.clear();
            args.extend(c.iter().map(|&i| sample[i]));
            raw.add(d.term(&args)?);
        }
        per_order.push(SupersetOrder {
            k,
            bagged_unconstrained_sum: scale * all.total(),
            distinct_index_part: scale * distinct.total(),
            repeated_index_part: scale * repeated.total(),
            raw_ordered_sum: raw.total(),
        });
    }
    let totals = SupersetTotals {
        bagged_total: per_order.iter().map(|o| o.bagged_unconstrained_sum).collect::<CompensatedSum>().total(),
        raw_total: per_order.iter().map(|o| o.raw_ordered_sum).collect::<CompensatedSum>().total(),
    };
    let references = SupersetReferences {
        exact_bagged_at_f_n: engine.exact_bagged(stat, &DiscreteDistribution::empirical(sample)?, n)?,
        raw_statistic_value: stat.evaluate(sample)?,
    };
    Ok(SupersetReport {
        statistic: stat.id(),
        n,
        sample: sample.iter().map(|p| p.value()).collect(),
        per_order,
        totals,
        references,
    })
}

fn has_repeat(idx: &[usize]) -> bool {
    (0..idx.len()).any(|i| idx[i + 1..].contains(&idx[i]))
}

/// Bagged values along `(1 - s) F + s δ_x` for several resample sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathCurve {
    pub statistic: String,
    pub x: f64,
    pub m_list: Vec<usize>,
    pub s: Vec<f64>,
    /// `θ` of the mixture where it is a point mass, else `None`.
    pub raw: Vec<Option<f64>>,
    /// `bagged[i][j]` is the `M = m_list[i]` value at `s[j]`.
    pub bagged: Vec<Vec<f64>>,
    /// Max residual of the least-squares degree-`M` polynomial fit, per `M`.
    pub fit_residual: Vec<f64>,
}

/// Evaluates the bagged functional on `grid` equispaced `s ∈ [0, 1]`.
pub fn smoothing_path(
    engine: &Engine,
    stat: &StatisticSpec,
    base: &DiscreteDistribution,
    x: Point,
    m_list: &[usize],
    grid: usize,
) -> Result<PathCurve> {
    if grid < 2 {
        return Err(Error::InvalidArgument(format!("grid must have at least 2 points, got {grid}")));
    }
    if m_list.is_empty() || m_list.contains(&0) {
        return Err(Error::InvalidArgument("M list must be nonempty with every M ≥ 1".into()));
    }
    let s: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    let mixtures: Vec<DiscreteDistribution> =
        s.iter().map(|&si| MixtureSpec::new(base.clone(), vec![(si, x)]).realize()).collect::<Result<_>>()?;
    let raw = mixtures
        .iter()
        .map(|mix| if mix.is_point_mass() { stat.evaluate(mix.support()).map(Some) } else { Ok(None) })
        .collect::<Result<_>>()?;
    let mut bagged = Vec::with_capacity(m_list.len());
    let mut fit_residual = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let values: Vec<f64> =
            mixtures.iter().map(|mix| engine.expect_uncached(stat, mix, m, &[])).collect::<Result<_>>()?;
        fit_residual.push(polynomial_fit_residual(&s, &values, m));
        bagged.push(values);
    }
    Ok(PathCurve { statistic: stat.id(), x: x.value(), m_list: m_list.to_vec(), s, raw, bagged, fit_residual })
}

/// Max absolute residual of the least-squares polynomial of `degree` through
/// `(s, y)` with `s ∈ [0, 1]`, fitted in a Legendre basis on `2s - 1`.
pub fn polynomial_fit_residual(s: &[f64], y: &[f64], degree: usize) -> f64 {
    let cols = degree + 1;
    let design = DMatrix::from_fn(s.len(), cols, |i, j| legendre(j, 2.0 * s[i] - 1.0));
    let rhs = DVector::from_column_slice(y);
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .expect("SVD computed with both factors");
    let fitted = design * coef;
    fitted.iter().zip(y).map(|(f, v)| (f - v).abs()).fold(0.0, f64::max)
}

fn legendre(n: usize, t: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, t);
    if n == 0 {
        return p0;
    }
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * t * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}
