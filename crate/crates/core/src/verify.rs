//! Runtime self-check: sweeps the engine's invariants over small random
//! problems and reports one line per property.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::anova::Decomposition;
use crate::engine::{enumerate_compositions, Engine};
use crate::error::Result;
use crate::model::{DiscreteDistribution, Point};
use crate::montecarlo::mc_bagged;
use crate::statistics::{check_symmetry, StatisticSpec};
use crate::vonmises::{
    first_order_approx, influence_numeric, influence_theorem, plug_in_expansion, smoothing_path,
    superset_compare, vonmises_eval, InfluenceQuery,
};

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    /// Largest resample size swept.
    pub m_max: usize,
    pub seed: u64,
    /// Random samples per (statistic, F, M) case in the tautology sweep.
    pub samples_per_case: usize,
    /// Seeds in the Monte Carlo consistency check.
    pub mc_seeds: usize,
    pub mc_replicates: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { m_max: 5, seed: 2024, samples_per_case: 20, mc_seeds: 100, mc_replicates: 10_000 }
    }
}

/// Outcome of one invariant.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    /// Worst observed error, in the units of `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub seconds: f64,
}

struct Tally {
    cases: usize,
    worst: f64,
    failed: bool,
}

impl Tally {
    fn new() -> Self {
        Tally { cases: 0, worst: 0.0, failed: false }
    }

    /// Records `err` against `tol`.
    fn record(&mut self, err: f64, tol: f64) {
        self.cases += 1;
        if err.is_nan() || err > tol {
            self.failed = true;
        }
        if err > self.worst || err.is_nan() {
            self.worst = err;
        }
    }

    fn flag(&mut self, ok: bool) {
        self.record(if ok { 0.0 } else { 1.0 }, 0.0);
    }
}

fn pts(v: &[f64]) -> Vec<Point> {
    Point::from_values(v).expect("finite literals")
}

/// Three-point base distributions on {-1, 0, 1}: uniform plus random
/// weights bounded away from zero.
fn bases(rng: &mut ChaCha8Rng, count: usize) -> Vec<DiscreteDistribution> {
    let support = pts(&[-1.0, 0.0, 1.0]);
    let mut out = vec![DiscreteDistribution::uniform(&support).unwrap()];
    while out.len() < count {
        out.push(random_weights(rng, &support));
    }
    out
}

fn random_weights(rng: &mut ChaCha8Rng, support: &[Point]) -> DiscreteDistribution {
    let raw: Vec<f64> = support.iter().map(|_| 0.1 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let w = raw.iter().map(|r| r / total).collect();
    DiscreteDistribution::new(support.to_vec(), w).unwrap()
}

fn random_sample(rng: &mut ChaCha8Rng, support: &[Point], n: usize) -> Vec<Point> {
    (0..n).map(|_| support[rng.random_range(0..support.len())]).collect()
}

fn rel(err: f64, scale: f64) -> f64 {
    err / scale.abs().max(1.0)
}

type Check = fn(&Engine, &VerifyConfig, &mut ChaCha8Rng, &mut Tally) -> Result<()>;

const CHECKS: &[(&str, &str, f64, Check)] = &[
    ("statistics", "permutation_invariance", 0.0, check_permutation),
    ("exact_engine", "composition_weights_sum_to_one", 1e-10, check_composition_weights),
    ("exact_engine", "fixed_argument_order_irrelevant", 0.0, check_fixed_order),
    ("exact_engine", "bagged_mean_closed_form", 1e-12, check_mean_closed_form),
    ("exact_engine", "bagged_variance_closed_form", 1e-10, check_variance_closed_form),
    ("exact_engine", "point_mass_and_single_draw", 1e-15, check_point_mass),
    ("anova", "tautology", 1e-9, check_tautology),
    ("anova", "vanishing_marginals", 1e-9, check_marginals),
    ("anova", "term_symmetry", 0.0, check_term_symmetry),
    ("anova", "main_effect_scales_with_m", 1e-12, check_main_effect_scaling),
    ("vonmises", "theorem_matches_numeric_oracle", 1e-6, check_theorem),
    ("vonmises", "vanishing_above_m", 1e-6, check_vanishing_above_m),
    ("vonmises", "finite_expansion_exact", 1e-8, check_finite_expansion),
    ("vonmises", "plug_in_matches_merged_empirical", 1e-10, check_plug_in),
    ("vonmises", "first_order_is_truncation", 1e-12, check_first_order),
    ("vonmises", "path_polynomial_degree", 1e-9, check_polynomial_degree),
    ("vonmises", "superset_accounting", 1e-8, check_superset),
    ("vonmises", "single_draw_expansion_has_two_terms", 1e-12, check_m1_expansion),
    ("montecarlo", "seed_determinism", 0.0, check_mc_determinism),
    ("montecarlo", "consistency_with_exact", 5.0, check_mc_consistency),
    ("montecarlo", "stderr_scaling", 0.0, check_mc_scaling),
];

/// Runs every check. A check that errors is reported as failed.
pub fn run_all(engine: &Engine, config: &VerifyConfig) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, &(module, name, tolerance, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(i as u64));
            let mut tally = Tally::new();
            let start = Instant::now();
            if check(engine, config, &mut rng, &mut tally).is_err() {
                tally.failed = true;
                tally.worst = f64::NAN;
            }
            CheckResult {
                module,
                name,
                passed: !tally.failed,
                cases: tally.cases,
                worst: tally.worst,
                tolerance,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn check_permutation(_: &Engine, _: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let support = pts(&[-1.5, 0.0, 0.25, 2.0]);
    for stat in StatisticSpec::all_builtins() {
        for n in 1..=8 {
            let sample = random_sample(rng, &support, n);
            t.flag(check_symmetry(&stat, &sample, 20, rng.random())?);
        }
    }
    Ok(())
}

fn check_composition_weights(e: &Engine, c: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for n in 1..=4 {
        let support: Vec<Point> = (0..n).map(|i| Point::new(i as f64).unwrap()).collect();
        let d = random_weights(rng, &support);
        for m in 0..=c.m_max.max(8) {
            let s: f64 = enumerate_compositions(d.weights(), m, e.budget())?.map(|c| c.weight).sum();
            t.record((s - 1.0).abs(), 1e-10);
        }
    }
    Ok(())
}

fn check_fixed_order(e: &Engine, c: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for d in bases(rng, 2) {
        for stat in StatisticSpec::all_builtins() {
            for m in 2..=c.m_max {
                let fixed = random_sample(rng, d.support(), m - 1);
                let mut rev = fixed.clone();
                rev.reverse();
                let a = e.expect_iid(&stat, &d, m, &fixed)?;
                let b = e.expect_uncached(&stat, &d, m, &rev)?;
                t.flag(a.to_bits() == b.to_bits());
            }
        }
    }
    Ok(())
}

fn check_mean_closed_form(e: &Engine, _: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let support = pts(&[-2.0, -0.5, 1.0, 3.0]);
    for _ in 0..5 {
        let d = random_weights(rng, &support);
        for m in 1..=8 {
            t.record((e.exact_bagged(&StatisticSpec::mean(), &d, m)? - d.mean()).abs(), 1e-12);
        }
    }
    Ok(())
}

fn check_variance_closed_form(e: &Engine, _: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let support = pts(&[-2.0, -0.5, 1.0, 3.0]);
    for _ in 0..5 {
        let d = random_weights(rng, &support);
        for m in 1..=8 {
            let want = (m as f64 - 1.0) / m as f64 * d.variance();
            t.record((e.exact_bagged(&StatisticSpec::variance_m(), &d, m)? - want).abs(), 1e-10);
        }
    }
    Ok(())
}

fn check_point_mass(e: &Engine, c: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let x = Point::new(0.75).unwrap();
    let delta = DiscreteDistribution::point_mass(x);
    for stat in StatisticSpec::all_builtins() {
        for m in 1..=c.m_max {
            t.flag(e.exact_bagged(&stat, &delta, m)? == stat.evaluate(&vec![x; m])?);
        }
        for d in bases(rng, 2) {
            let want: f64 = d.iter().map(|(p, w)| w * stat.evaluate(&[p]).unwrap()).sum();
            t.record((e.exact_bagged(&stat, &d, 1)? - want).abs(), 1e-15);
        }
    }
    Ok(())
}

fn check_tautology(e: &Engine, c: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for d in bases(rng, 3) {
        for stat in StatisticSpec::all_builtins() {
            for m in 1..=c.m_max {
                let dec = Decomposition::new(e, &stat, &d, m)?;
                for _ in 0..c.samples_per_case {
                    let sample = random_sample(rng, d.support(), m);
                    let theta = stat.evaluate(&sample)?;
                    t.record(rel((dec.reconstruct(&sample)? - theta).abs(), theta), 1e-9);
                }
            }
        }
    }
    Ok(())
}

fn check_marginals(e: &Engine, c: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for d in bases(rng, 2) {
        for stat in StatisticSpec::all_builtins() {
            for m in 1..=c.m_max {
                let dec = Decomposition::new(e, &stat, &d, m)?;
                for k in 1..=m.min(4) {
                    let points = random_sample(rng, d.support(), k - 1);
                    for slot in 1..=k {
                        t.record(dec.marginal_residual(k, &points, slot)?.abs(), 1e-9);
                    }
                }
            }
        }
    }
    Ok(())
}

fn check_term_symmetry(e: &Engine, c: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let d = bases(rng, 2).pop().unwrap();
    for stat in StatisticSpec::all_builtins() {
        let m = c.m_max.min(4);
        let dec = Decomposition::new(e, &stat, &d, m)?;
        let points = random_sample(rng, d.support(), m);
        let mut rev = points.clone();
        rev.reverse();
        t.flag(dec.term(&points)?.to_bits() == dec.term(&rev)?.to_bits());
    }
    Ok(())
}

fn check_main_effect_scaling(e: &Engine, _: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let mean = StatisticSpec::mean();
    for d in bases(rng, 3) {
        for &x in d.support() {
            let a2 = Decomposition::new(e, &mean, &d, 2)?.term(&[x])?;
            let a4 = Decomposition::new(e, &mean, &d, 4)?.term(&[x])?;
            t.record((a2 - 2.0 * a4).abs(), 1e-12);
            t.record((a2 - (x.value() - d.mean()) / 2.0).abs(), 1e-12);
        }
    }
    Ok(())
}

fn check_theorem(e: &Engine, c: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let grid = pts(&[-1.0, 0.0, 1.0]);
    for d in bases(rng, 2) {
        for stat in StatisticSpec::all_builtins() {
            for m in 1..=c.m_max.min(6) {
                for k in 1..=m.min(3) {
                    let points = random_sample(rng, &grid, k);
                    let q = InfluenceQuery { stat: &stat, dist: &d, m, points: &points };
                    let a = influence_theorem(e, &q)?;
                    let b = influence_numeric(e, &q)?;
                    t.record(rel((a - b).abs(), a), 1e-6);
                }
            }
        }
    }
    Ok(())
}

fn check_vanishing_above_m(e: &Engine, c: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let grid = pts(&[-1.0, 0.0, 1.0]);
    for d in bases(rng, 2) {
        for stat in StatisticSpec::all_builtins() {
            for m in 1..=c.m_max.min(3) {
                let points = random_sample(rng, &grid, m + 1);
                let q = InfluenceQuery { stat: &stat, dist: &d, m, points: &points };
                t.record(influence_numeric(e, &q)?.abs(), 1e-6);
                t.flag(influence_theorem(e, &q)? == 0.0);
            }
        }
    }
    Ok(())
}

fn check_finite_expansion(e: &Engine, c: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let support = pts(&[-1.0, 0.0, 1.0]);
    for stat in StatisticSpec::all_builtins() {
        for _ in 0..4 {
            let f = random_weights(rng, &support);
            let g = random_weights(rng, &support);
            for m in 1..=c.m_max.min(6) {
                let r = vonmises_eval(e, &stat, &f, m, &g)?;
                t.flag(r.len() == m + 1);
                t.record(rel(r.residual.abs(), r.exact_reference), 1e-8);
            }
        }
    }
    Ok(())
}

fn check_plug_in(e: &Engine, c: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for f in bases(rng, 2) {
        for stat in StatisticSpec::all_builtins() {
            for m in 1..=c.m_max.min(4) {
                let n = rng.random_range(1..=5);
                let sample = random_sample(rng, f.support(), n);
                let a = plug_in_expansion(e, &stat, &f, m, &sample)?;
                let b = vonmises_eval(e, &stat, &f, m, &DiscreteDistribution::empirical(&sample)?)?;
                t.record((a.total - b.total).abs(), 1e-10);
            }
        }
    }
    Ok(())
}

fn check_first_order(e: &Engine, c: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for f in bases(rng, 2) {
        for stat in StatisticSpec::all_builtins() {
            for m in 1..=c.m_max.min(4) {
                let sample = random_sample(rng, f.support(), 3);
                let r = plug_in_expansion(e, &stat, &f, m, &sample)?;
                let v = first_order_approx(e, &stat, &f, m, &sample)?;
                t.record((v - (r.contributions[0] + r.contributions[1])).abs(), 1e-12);
            }
        }
    }
    Ok(())
}

fn check_polynomial_degree(e: &Engine, c: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let m_list: Vec<usize> = (1..=c.m_max.min(3)).collect();
    for f in bases(rng, 2) {
        for stat in StatisticSpec::all_builtins() {
            let x = f.support()[rng.random_range(0..f.len())];
            let p = smoothing_path(e, &stat, &f, x, &m_list, 21)?;
            for r in p.fit_residual {
                t.record(r, 1e-9);
            }
        }
    }
    Ok(())
}

fn check_superset(e: &Engine, _: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    for f in bases(rng, 2) {
        for stat in StatisticSpec::all_builtins() {
            for n in 1..=4 {
                let sample = random_sample(rng, f.support(), n);
                let r = superset_compare(e, &stat, &f, &sample)?;
                t.record(r.partition_error(), 1e-12);
                t.record(r.raw_error(), 1e-9);
                t.record(r.bagged_error(), 1e-8);
            }
        }
    }
    Ok(())
}

fn check_m1_expansion(e: &Engine, _: &VerifyConfig, rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let support = pts(&[-1.0, 0.0, 1.0]);
    for stat in StatisticSpec::all_builtins() {
        let f = random_weights(rng, &support);
        let g = random_weights(rng, &support);
        let r = vonmises_eval(e, &stat, &f, 1, &g)?;
        t.flag(r.len() == 2);
        let direct: f64 = g.iter().map(|(p, w)| w * stat.evaluate(&[p]).unwrap()).sum();
        t.record((r.total - direct).abs(), 1e-12);
    }
    Ok(())
}

fn check_mc_determinism(_: &Engine, _: &VerifyConfig, _: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let f = DiscreteDistribution::uniform(&pts(&[-1.0, 1.0]))?;
    let thr = StatisticSpec::threshold_mean(0.0);
    for seed in [1u64, 42, 1 << 40] {
        let a = mc_bagged(&thr, &f, 2, 1000, seed)?;
        let b = mc_bagged(&thr, &f, 2, 1000, seed)?;
        t.flag(a.estimate.to_bits() == b.estimate.to_bits() && a.stderr.to_bits() == b.stderr.to_bits());
    }
    let a = mc_bagged(&thr, &f, 2, 1000, 5)?;
    let b = mc_bagged(&thr, &f, 2, 1000, 6)?;
    t.flag(a.estimate != b.estimate);
    Ok(())
}

/// Counts seeds where the estimate misses by more than 4 standard errors;
/// the tolerance is the number of misses allowed out of `mc_seeds`.
fn check_mc_consistency(e: &Engine, c: &VerifyConfig, _: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let f = DiscreteDistribution::uniform(&pts(&[-1.0, 1.0]))?;
    let thr = StatisticSpec::threshold_mean(0.0);
    let exact = e.exact_bagged(&thr, &f, 2)?;
    let mut misses = 0usize;
    for seed in 0..c.mc_seeds as u64 {
        let r = mc_bagged(&thr, &f, 2, c.mc_replicates, seed)?;
        if (r.estimate - exact).abs() > 4.0 * r.stderr {
            misses += 1;
        }
    }
    t.record(misses as f64, (c.mc_seeds / 20) as f64);
    Ok(())
}

fn check_mc_scaling(_: &Engine, c: &VerifyConfig, _: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let f = DiscreteDistribution::uniform(&pts(&[-1.0, 1.0]))?;
    let thr = StatisticSpec::threshold_mean(0.0);
    let b = c.mc_replicates.max(100);
    for seed in [3u64, 4, 5] {
        let small = mc_bagged(&thr, &f, 2, b, seed)?;
        let large = mc_bagged(&thr, &f, 2, 4 * b, seed)?;
        let ratio = small.stderr / large.stderr;
        t.flag((2.0 / 1.5..=2.0 * 1.5).contains(&ratio));
    }
    Ok(())
}
