//! Summation, quantiles and paired bootstrap helpers for Monte-Carlo metrics.

use rand::Rng;

use crate::seed;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().copied().collect::<CompensatedSum>().value() / xs.len() as f64
}

/// Linear-interpolated sample quantile, `q` in [0, 1].
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Sorted samples paired with their empirical CDF values i/n.
pub fn empirical_cdf(xs: &[f64]) -> Vec<(f64, f64)> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect()
}

/// Fraction of bootstrap resamples whose mean of the paired differences
/// `diffs` is strictly negative (or nonpositive when `strict` is false).
pub fn bootstrap_confidence(diffs: &[f64], strict: bool, resamples: usize, seed: u64) -> f64 {
    if diffs.is_empty() || resamples == 0 {
        return 0.0;
    }
    let mut rng = seed::rng(seed);
    let n = diffs.len();
    let hits = (0..resamples)
        .filter(|_| {
            let s: CompensatedSum = (0..n).map(|_| diffs[rng.random_range(0..n)]).collect();
            if strict {
                s.value() < 0.0
            } else {
                s.value() <= 0.0
            }
        })
        .count();
    hits as f64 / resamples as f64
}
