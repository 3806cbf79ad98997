//! Seeded Monte Carlo bagging.
//!
//! Replicate `i` draws from its own ChaCha stream, selected by `i` on a
//! generator keyed by the seed, so each replicate value is fixed by
//! `(seed, i)` alone. Values are gathered in index order and reduced
//! sequentially, making the estimate independent of thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::DiscreteDistribution;
use crate::numeric::CompensatedSum;
use crate::statistics::StatisticSpec;

/// Monte Carlo estimate of `θ_M^B(F)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    /// Sample standard deviation of the replicates over `√B`.
    pub stderr: f64,
    pub replicates: usize,
    pub seed: u64,
}

/// Inverse-CDF sampler over the sorted support.
#[derive(Debug, Clone)]
struct InverseCdf {
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl InverseCdf {
    fn new(dist: &DiscreteDistribution) -> Self {
        let mut acc = CompensatedSum::new();
        let cumulative = dist
            .weights()
            .iter()
            .map(|&w| {
                acc.add(w);
                acc.total()
            })
            .collect();
        InverseCdf {
            values: dist.support().iter().map(|p| p.value()).collect(),
            cumulative,
        }
    }

    fn draw(&self, u: f64) -> f64 {
        // first index with cumulative > u; rounding shortfall maps to the last point
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.values[i.min(self.values.len() - 1)]
    }
}

fn replicate_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Averages `stat` over `replicates` bootstrap samples of size `m` from
/// `dist`.
pub fn mc_bagged(
    stat: &StatisticSpec,
    dist: &DiscreteDistribution,
    m: usize,
    replicates: usize,
    seed: u64,
) -> Result<McEstimate> {
    if m == 0 {
        return Err(Error::InvalidArgument("resample size M must be at least 1".into()));
    }
    if replicates == 0 {
        return Err(Error::InvalidArgument("replicate count B must be at least 1".into()));
    }
    let sampler = InverseCdf::new(dist);
    let values: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            let sample: Vec<f64> = (0..m).map(|_| sampler.draw(rng.random::<f64>())).collect();
            stat.evaluate_values(sample)
        })
        .collect();

    let b = replicates as f64;
    let estimate = values.iter().copied().collect::<CompensatedSum>().total() / b;
    let all_equal = values.iter().all(|v| v.to_bits() == values[0].to_bits());
    let stderr = if all_equal {
        0.0
    } else {
        let ss = values.iter().map(|v| (v - estimate) * (v - estimate)).collect::<CompensatedSum>().total();
        (ss / (b - 1.0)).sqrt() / b.sqrt()
    };
    Ok(McEstimate { estimate: if all_equal { values[0] } else { estimate }, stderr, replicates, seed })
}
