//! Uniform client sampling without replacement, plus the exhaustive
//! expectation oracle used to test it.

use itertools::Itertools;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::SimRng;

/// A sampled participant set; `ids` is sorted so reductions run in a
/// canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleDraw {
    pub ids: Vec<usize>,
    /// Word position of the generator before the draw.
    pub seed_stream_position: u128,
}

/// Partial Fisher-Yates over `0..n`, then sort. A full draw (`s == n`)
/// consumes no randomness.
pub fn sample_subset(n: usize, s: usize, rng: &mut SimRng) -> Result<SampleDraw> {
    if s == 0 || s > n {
        return Err(Error::param(format!("sample size s={s} must lie in [1, n={n}]")));
    }
    let seed_stream_position = rng.get_word_pos();
    if s == n {
        return Ok(SampleDraw { ids: (0..n).collect(), seed_stream_position });
    }
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..s {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut ids = pool[..s].to_vec();
    ids.sort_unstable();
    Ok(SampleDraw { ids, seed_stream_position })
}

/// C(n, k), or `None` if it overflows `u64`.
pub fn binomial(n: usize, k: usize) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Population variance (1/n) Σ |x_i - x̄|².
pub fn population_variance(values: &[Vec<f64>]) -> f64 {
    let d = values.first().map_or(0, Vec::len);
    let mean = linalg::mean(values, d);
    values.iter().map(|v| linalg::dist_sq(v, &mean)).sum::<f64>() / values.len() as f64
}

/// Expected squared deviation of a uniform size-`s` subset mean from the
/// full mean: (n-s)/(n-1) · ζ²/s.
pub fn subset_variance_closed_form(n: usize, s: usize, zeta_sq: f64) -> f64 {
    if n == s {
        return 0.0;
    }
    (n - s) as f64 / (n - 1) as f64 * zeta_sq / s as f64
}

/// E|x̄_S - x̄|² by enumerating every size-`s` subset.
pub fn subset_mean_variance_oracle(values: &[Vec<f64>], s: usize, cap: u64) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::param("the enumeration oracle needs at least two vectors"));
    }
    if s == 0 || s > n {
        return Err(Error::param(format!("sample size s={s} must lie in [1, n={n}]")));
    }
    match binomial(n, s) {
        Some(c) if c <= cap => {}
        _ => return Err(Error::EnumerationCap { n, s, cap }),
    }
    let d = values[0].len();
    let full = linalg::mean(values, d);
    let mut total = 0.0;
    let mut count = 0usize;
    for subset in (0..n).combinations(s) {
        let m = linalg::mean(subset.iter().map(|&i| &values[i]), d);
        total += linalg::dist_sq(&m, &full);
        count += 1;
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    const CAP: u64 = 10_000;

    #[test]
    fn full_sample_is_everything() {
        let mut r = rng::seeded(1);
        for _ in 0..10 {
            assert_eq!(sample_subset(6, 6, &mut r).unwrap().ids, vec![0, 1, 2, 3, 4, 5]);
        }
    }

    #[test]
    fn rejects_oversized_sample() {
        let mut r = rng::seeded(1);
        assert!(sample_subset(3, 4, &mut r).is_err());
        assert!(sample_subset(3, 0, &mut r).is_err());
    }

    #[test]
    fn singletons_are_uniform() {
        let mut r = rng::seeded(7);
        let draws = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..draws {
            counts[sample_subset(5, 1, &mut r).unwrap().ids[0]] += 1;
        }
        let p = 0.2;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() <= 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn pairs_are_uniform() {
        let mut r = rng::seeded(11);
        let draws = 60_000;
        let pairs: Vec<Vec<usize>> = (0..4).combinations(2).collect();
        let mut counts = vec![0usize; pairs.len()];
        for _ in 0..draws {
            let ids = sample_subset(4, 2, &mut r).unwrap().ids;
            counts[pairs.iter().position(|p| *p == ids).unwrap()] += 1;
        }
        let p = 1.0 / 6.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in &counts {
            assert!((*c as f64 - draws as f64 * p).abs() <= 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn oracle_examples() {
        let three = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert!((subset_mean_variance_oracle(&three, 2, CAP).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(subset_mean_variance_oracle(&three, 3, CAP).unwrap(), 0.0);
        let two = vec![vec![0.0], vec![2.0]];
        assert_eq!(subset_mean_variance_oracle(&two, 1, CAP).unwrap(), 1.0);
        assert!((subset_variance_closed_form(2, 1, population_variance(&two)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn oracle_respects_cap() {
        let v: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        assert!(matches!(subset_mean_variance_oracle(&v, 15, CAP), Err(Error::EnumerationCap { .. })));
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), Some(10));
        assert_eq!(binomial(20, 5), Some(15_504));
        assert_eq!(binomial(3, 4), Some(0));
        assert_eq!(binomial(200, 100), None);
    }

    proptest! {
        #[test]
        fn draws_are_sorted_distinct_and_in_range(n in 1usize..40, frac in 0.0f64..1.0, seed in any::<u64>()) {
            let s = 1 + ((n - 1) as f64 * frac) as usize;
            let mut r = rng::seeded(seed);
            let draw = sample_subset(n, s, &mut r).unwrap();
            prop_assert_eq!(draw.ids.len(), s);
            prop_assert!(draw.ids.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(draw.ids.iter().all(|&i| i < n));
        }

        #[test]
        fn subset_means_are_unbiased(vals in proptest::collection::vec(-10.0f64..10.0, 2..7), s_frac in 0.0f64..1.0) {
            let n = vals.len();
            let s = 1 + ((n - 1) as f64 * s_frac) as usize;
            let mut acc = 0.0;
            let mut count = 0.0;
            for subset in (0..n).combinations(s) {
                acc += subset.iter().map(|&i| vals[i]).sum::<f64>() / s as f64;
                count += 1.0;
            }
            let mean = vals.iter().sum::<f64>() / n as f64;
            prop_assert!((acc / count - mean).abs() <= 1e-12 * (1.0 + mean.abs()));
        }
    }
}
