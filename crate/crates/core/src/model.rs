//! Sample points, finitely supported distributions and mixtures.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Weights must sum to 1 within this tolerance before renormalization.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Tolerance on the contaminant mass of a mixture.
pub const MIXTURE_SUM_TOLERANCE: f64 = 1e-12;

/// A finite real sample value.
///
/// Negative zero is folded into positive zero so that equal values always
/// share one bit pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Point(f64);

impl Point {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidPoint(value));
        }
        Ok(Point(if value == 0.0 { 0.0 } else { value }))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn from_values(values: &[f64]) -> Result<Vec<Point>> {
        values.iter().map(|&v| Point::new(v)).collect()
    }
}

impl Eq for Point {}

impl PartialOrd for Point {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Point {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl TryFrom<f64> for Point {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Point::new(value)
    }
}

impl From<Point> for f64 {
    fn from(p: Point) -> f64 {
        p.0
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Canonical key of a multiset of points: the bit patterns of the values in
/// nondecreasing order. Permutations of a sample share one key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultisetKey(Vec<u64>);

impl MultisetKey {
    pub fn new(points: &[Point]) -> Self {
        let mut sorted = points.to_vec();
        sorted.sort_unstable();
        Self::from_sorted(&sorted)
    }

    /// Key of an already sorted slice.
    pub fn from_sorted(points: &[Point]) -> Self {
        debug_assert!(points.windows(2).all(|w| w[0] <= w[1]));
        MultisetKey(points.iter().map(|p| p.0.to_bits()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Fixed-width little-endian encoding, eight bytes per point.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|b| b.to_le_bytes()).collect()
    }

    pub fn points(&self) -> Vec<Point> {
        self.0.iter().map(|&b| Point(f64::from_bits(b))).collect()
    }
}

/// A probability measure with finite support.
///
/// Support points are distinct and sorted; every stored weight is strictly
/// positive and the weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    support: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    /// Builds a distribution from points and weights.
    ///
    /// Duplicate points are merged with summed weight and zero-weight points
    /// are dropped. The weights must sum to 1 within
    /// [`WEIGHT_SUM_TOLERANCE`]; they are then divided by their sum.
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidWeights(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidWeights(format!("weight {w} is negative or not finite")));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
        }
        Self::from_unnormalized(points, weights)
    }

    /// Merges, drops zeros and divides by the total without checking that the
    /// total is near 1.
    fn from_unnormalized(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        let mut pairs: Vec<(Point, f64)> = points.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));

        let mut support: Vec<Point> = Vec::with_capacity(pairs.len());
        let mut merged: Vec<Vec<f64>> = Vec::with_capacity(pairs.len());
        for (p, w) in pairs {
            if support.last() == Some(&p) {
                merged.last_mut().unwrap().push(w);
            } else {
                support.push(p);
                merged.push(vec![w]);
            }
        }
        let mut weights: Vec<f64> = merged.into_iter().map(compensated_sum).collect();

        let mut i = 0;
        while i < support.len() {
            if weights[i] == 0.0 {
                support.remove(i);
                weights.remove(i);
            } else {
                i += 1;
            }
        }
        if support.is_empty() {
            return Err(Error::InvalidWeights("all weights are zero".into()));
        }

        let total = compensated_sum(weights.iter().copied());
        if total != 1.0 {
            for w in &mut weights {
                *w /= total;
            }
        }
        Ok(DiscreteDistribution { support, weights })
    }

    /// The empirical distribution of a sample: weight proportional to
    /// multiplicity.
    pub fn empirical(sample: &[Point]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = sample.len() as f64;
        Self::from_unnormalized(sample.to_vec(), vec![1.0 / n; sample.len()])
    }

    /// Uniform weights over `points`, duplicates merged.
    pub fn uniform(points: &[Point]) -> Result<Self> {
        Self::empirical(points)
    }

    /// The point mass at `x`.
    pub fn point_mass(x: Point) -> Self {
        DiscreteDistribution { support: vec![x], weights: vec![1.0] }
    }

    pub fn support(&self) -> &[Point] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn is_point_mass(&self) -> bool {
        self.support.len() == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.support.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn total_weight(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.iter().map(|(p, w)| w * p.value()))
    }

    /// Population variance `Σ w (x - mean)²`.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        compensated_sum(self.iter().map(|(p, w)| {
            let d = p.value() - m;
            w * d * d
        }))
    }

    /// Exact content key: the bit patterns of support and weights.
    pub fn content_key(&self) -> DistributionKey {
        DistributionKey(
            self.support
                .iter()
                .map(|p| p.value().to_bits())
                .chain(self.weights.iter().map(|w| w.to_bits()))
                .collect(),
        )
    }
}

/// Bit-exact identity of a distribution, used as a memo key.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DistributionKey(Vec<u64>);

/// `(1 - Σ s_i) F + Σ s_i δ_{x_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub base: DiscreteDistribution,
    pub contaminants: Vec<(f64, Point)>,
}

impl MixtureSpec {
    pub fn new(base: DiscreteDistribution, contaminants: Vec<(f64, Point)>) -> Self {
        MixtureSpec { base, contaminants }
    }

    /// Realizes the mixture as a distribution. At total contaminant mass 1
    /// the base drops out entirely.
    pub fn realize(&self) -> Result<DiscreteDistribution> {
        if self.contaminants.is_empty() {
            return Ok(self.base.clone());
        }
        if let Some(&(s, _)) =
            self.contaminants.iter().find(|(s, _)| !s.is_finite() || *s < 0.0)
        {
            return Err(Error::InvalidWeights(format!("mixture weight {s} is negative or not finite")));
        }
        let mass = compensated_sum(self.contaminants.iter().map(|c| c.0));
        if mass > 1.0 + MIXTURE_SUM_TOLERANCE {
            return Err(Error::MixtureWeightsExceedOne(mass));
        }
        let keep = (1.0 - mass).max(0.0);

        let n = self.base.len() + self.contaminants.len();
        let mut points = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (p, w) in self.base.iter() {
            points.push(p);
            weights.push(w * keep);
        }
        for &(s, x) in &self.contaminants {
            points.push(x);
            weights.push(s);
        }
        DiscreteDistribution::from_unnormalized(points, weights)
    }
}

/// Free-function form of [`DiscreteDistribution::empirical`].
pub fn make_empirical(sample: &[Point]) -> Result<DiscreteDistribution> {
    DiscreteDistribution::empirical(sample)
}

/// Free-function form of [`MixtureSpec::realize`].
pub fn realize_mixture(spec: &MixtureSpec) -> Result<DiscreteDistribution> {
    spec.realize()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[f64]) -> Vec<Point> {
        Point::from_values(v).unwrap()
    }

    fn uniform_pm1() -> DiscreteDistribution {
        DiscreteDistribution::uniform(&pts(&[-1.0, 1.0])).unwrap()
    }

    #[test]
    fn empirical_two_point() {
        let d = make_empirical(&pts(&[-1.0, 1.0])).unwrap();
        assert_eq!(d.support(), pts(&[-1.0, 1.0]).as_slice());
        assert_eq!(d.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn empirical_merges_duplicates() {
        let d = make_empirical(&pts(&[1.0, -1.0, -1.0])).unwrap();
        assert_eq!(d.support(), pts(&[-1.0, 1.0]).as_slice());
        assert!((d.weights()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.weights()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empirical_single_point_is_point_mass() {
        let d = make_empirical(&pts(&[5.0])).unwrap();
        assert!(d.is_point_mass());
        assert_eq!(d, DiscreteDistribution::point_mass(Point::new(5.0).unwrap()));
    }

    #[test]
    fn empirical_errors() {
        assert_eq!(make_empirical(&[]), Err(Error::EmptySample));
        assert!(matches!(Point::new(f64::NAN), Err(Error::InvalidPoint(_))));
        assert!(matches!(Point::new(f64::INFINITY), Err(Error::InvalidPoint(_))));
    }

    #[test]
    fn weights_renormalized_or_rejected() {
        let d = DiscreteDistribution::new(pts(&[0.0, 1.0]), vec![0.5, 0.5 + 1e-10]).unwrap();
        assert!((d.total_weight() - 1.0).abs() < 1e-15);
        assert!(matches!(
            DiscreteDistribution::new(pts(&[0.0, 1.0]), vec![0.5, 0.6]),
            Err(Error::InvalidWeights(_))
        ));
        assert!(matches!(
            DiscreteDistribution::new(pts(&[0.0, 1.0]), vec![1.5, -0.5]),
            Err(Error::InvalidWeights(_))
        ));
    }

    #[test]
    fn zero_weight_points_dropped() {
        let d = DiscreteDistribution::new(pts(&[0.0, 1.0, 2.0]), vec![0.5, 0.0, 0.5]).unwrap();
        assert_eq!(d.support(), pts(&[0.0, 2.0]).as_slice());
    }

    #[test]
    fn negative_zero_is_canonical() {
        let a = Point::new(-0.0).unwrap();
        let b = Point::new(0.0).unwrap();
        assert_eq!(a.value().to_bits(), b.value().to_bits());
        assert_eq!(MultisetKey::new(&[a]), MultisetKey::new(&[b]));
    }

    #[test]
    fn mixture_examples() {
        let one = Point::new(1.0).unwrap();
        let m = realize_mixture(&MixtureSpec::new(uniform_pm1(), vec![(0.5, one)])).unwrap();
        assert_eq!(m.support(), pts(&[-1.0, 1.0]).as_slice());
        assert_eq!(m.weights(), &[0.25, 0.75]);

        let same = realize_mixture(&MixtureSpec::new(uniform_pm1(), vec![])).unwrap();
        assert_eq!(same, uniform_pm1());

        let zero = Point::new(0.0).unwrap();
        let delta = realize_mixture(&MixtureSpec::new(uniform_pm1(), vec![(1.0, zero)])).unwrap();
        assert_eq!(delta, DiscreteDistribution::point_mass(zero));
    }

    #[test]
    fn mixture_zero_contamination_is_identity() {
        let base = DiscreteDistribution::new(pts(&[-1.0, 0.0, 2.0]), vec![0.2, 0.3, 0.5]).unwrap();
        let spec = MixtureSpec::new(base.clone(), vec![(0.0, Point::new(0.0).unwrap()), (0.0, Point::new(7.0).unwrap())]);
        let m = spec.realize().unwrap();
        assert_eq!(m.support(), base.support());
        assert_eq!(m.weights(), base.weights());
    }

    #[test]
    fn mixture_rejects_excess_mass() {
        let x = Point::new(0.0).unwrap();
        let spec = MixtureSpec::new(uniform_pm1(), vec![(0.6, x), (0.5, x)]);
        assert!(matches!(spec.realize(), Err(Error::MixtureWeightsExceedOne(_))));
    }

    #[test]
    fn multiset_key_encoding() {
        let k = MultisetKey::new(&pts(&[2.0, -1.0]));
        assert_eq!(k.len(), 2);
        assert_eq!(k.to_bytes().len(), 16);
        assert_eq!(k.points(), pts(&[-1.0, 2.0]));
    }

    #[test]
    fn moments() {
        let d = DiscreteDistribution::new(pts(&[0.0, 1.0]), vec![0.25, 0.75]).unwrap();
        assert_eq!(d.mean(), 0.75);
        assert!((d.variance() - 0.1875).abs() < 1e-16);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sample() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(prop::sample::select(vec![-2.0, -1.0, 0.0, 0.5, 1.0, 3.0]), 1..12)
        }

        proptest! {
            #[test]
            fn empirical_permutation_invariant(v in sample(), seed in any::<u64>()) {
                use rand::{seq::SliceRandom, SeedableRng};
                let mut shuffled = v.clone();
                shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                let a = make_empirical(&pts(&v)).unwrap();
                let b = make_empirical(&pts(&shuffled)).unwrap();
                prop_assert_eq!(a, b);
            }

            #[test]
            fn total_weight_is_one(v in sample(), s in 0.0..1.0f64, x in -3.0..3.0f64) {
                let d = make_empirical(&pts(&v)).unwrap();
                prop_assert!((d.total_weight() - 1.0).abs() <= 1e-12);
                let m = MixtureSpec::new(d, vec![(s, Point::new(x).unwrap())]).realize().unwrap();
                prop_assert!((m.total_weight() - 1.0).abs() <= 1e-12);
                prop_assert!(m.support().windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
