//! Small numeric kernels: compensated summation and exact combinatorics.

/// Neumaier's variant of Kahan summation.
///
/// The result depends only on the order in which terms are added, so a fixed
/// iteration order gives bit-reproducible totals.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        s.extend(iter);
        s
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().total()
}

/// Binomial coefficient C(n, k), saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        let num = (n - i) as u128;
        let den = (i + 1) as u128;
        let g = gcd(acc, den);
        let (a, d) = (acc / g, den / g);
        let num = num / d;
        match a.checked_mul(num) {
            Some(v) => acc = v,
            None => return u128::MAX,
        }
    }
    acc
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Falling factorial M!/(M-k)! = M (M-1) ... (M-k+1); zero when k > M.
pub fn falling_factorial(m: u64, k: u64) -> u128 {
    if k > m {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((m - i) as u128);
    }
    acc
}

/// Largest total count for which multinomial coefficients are formed in
/// exact integer arithmetic (20! fits in u64).
pub const EXACT_FACTORIAL_LIMIT: u32 = 20;

/// `ln(n!)` by accumulation of logarithms.
pub fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

fn factorial_u64(n: u32) -> u64 {
    (1..=n as u64).product()
}

/// Multinomial coefficient `(Σ counts)! / Π counts_i!`.
///
/// Exact integer arithmetic when the total is at most 20, otherwise via
/// accumulated log-factorials.
pub fn multinomial(counts: &[u32]) -> f64 {
    let total: u32 = counts.iter().sum();
    if total <= EXACT_FACTORIAL_LIMIT {
        let mut acc = factorial_u64(total);
        for &c in counts {
            acc /= factorial_u64(c);
        }
        acc as f64
    } else {
        ln_multinomial(counts).exp()
    }
}

/// `ln` of the multinomial coefficient.
pub fn ln_multinomial(counts: &[u32]) -> f64 {
    let total: u32 = counts.iter().sum();
    ln_factorial(total) - counts.iter().map(|&c| ln_factorial(c)).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
    }

    #[test]
    fn binomial_saturates() {
        assert_eq!(binomial(10_000, 5_000), u128::MAX);
    }

    #[test]
    fn falling_factorial_values() {
        assert_eq!(falling_factorial(5, 0), 1);
        assert_eq!(falling_factorial(5, 2), 20);
        assert_eq!(falling_factorial(6, 6), 720);
        assert_eq!(falling_factorial(2, 3), 0);
    }

    #[test]
    fn multinomial_exact_and_log_paths_agree() {
        assert_eq!(multinomial(&[1, 1]), 2.0);
        assert_eq!(multinomial(&[2, 0]), 1.0);
        assert_eq!(multinomial(&[2, 1, 1]), 12.0);
        let big = [7, 8, 9];
        // 24!/(7!8!9!) = 8_413_788_240
        assert!((ln_multinomial(&big).exp() / 8_413_788_240.0 - 1.0).abs() < 1e-12);
        assert!((multinomial(&big) / 8_413_788_240.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
        let naive: f64 = xs.iter().sum();
        assert_ne!(naive, 2.0);
    }
}
