use serde::{Deserialize, Serialize};

use crate::sampler::RandomStream;

pub const BOOTSTRAP_RESAMPLES: usize = 10_000;
pub const CI_LEVEL: f64 = 0.95;

/// Point estimate with a percentile bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    /// True if the intervals do not overlap.
    pub fn separated_from(&self, other: &Estimate) -> bool {
        self.ci_high < other.ci_low || other.ci_high < self.ci_low
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap of `stat` over `samples`.
pub fn bootstrap<F>(samples: &[f64], stat: F, resamples: usize, level: f64, stream: &mut RandomStream) -> Estimate
where
    F: Fn(&[f64]) -> f64,
{
    let value = stat(samples);
    if samples.len() < 2 || resamples == 0 {
        return Estimate {
            value,
            ci_low: value,
            ci_high: value,
        };
    }
    let mut buf = vec![0.0; samples.len()];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = samples[stream.below(samples.len())];
            }
            stat(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Estimate {
        value,
        ci_low: quantile(&stats, tail),
        ci_high: quantile(&stats, 1.0 - tail),
    }
}

/// Ratio-of-sums bootstrap, resampling `(numerator, denominator)` pairs
/// together. Used for bit error rates clustered by channel.
pub fn bootstrap_ratio(pairs: &[(f64, f64)], resamples: usize, level: f64, stream: &mut RandomStream) -> Estimate {
    let ratio = |idx: &mut dyn Iterator<Item = usize>| {
        let (num, den) = idx.fold((0.0, 0.0), |(a, b), i| (a + pairs[i].0, b + pairs[i].1));
        if den > 0.0 {
            num / den
        } else {
            f64::NAN
        }
    };
    let value = ratio(&mut (0..pairs.len()));
    if pairs.len() < 2 || resamples == 0 {
        return Estimate {
            value,
            ci_low: value,
            ci_high: value,
        };
    }
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut idx = (0..pairs.len()).map(|_| stream.below(pairs.len())).collect::<Vec<_>>().into_iter();
            ratio(&mut idx)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Estimate {
        value,
        ci_low: quantile(&stats, tail),
        ci_high: quantile(&stats, 1.0 - tail),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_quantile() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
    }

    #[test]
    fn constant_samples_give_degenerate_interval() {
        let mut rs = RandomStream::standard(1);
        let e = bootstrap(&[2.0; 50], mean, 1000, CI_LEVEL, &mut rs);
        assert_eq!((e.value, e.ci_low, e.ci_high), (2.0, 2.0, 2.0));
    }

    #[test]
    fn bernoulli_coverage() {
        let p = 0.1;
        let mut rs = RandomStream::standard(77);
        let mut covered = 0;
        for _ in 0..100 {
            let xs: Vec<f64> = (0..400).map(|_| f64::from(u8::from(rs.unit() < p))).collect();
            let e = bootstrap(&xs, mean, 2000, CI_LEVEL, &mut rs);
            if e.ci_low <= p && p <= e.ci_high {
                covered += 1;
            }
        }
        assert!(covered >= 90, "coverage {covered}/100");
    }

    #[test]
    fn ratio_bootstrap_matches_pooled_rate() {
        let mut rs = RandomStream::standard(5);
        let pairs = [(1.0, 10.0), (0.0, 10.0), (3.0, 10.0), (0.0, 10.0)];
        let e = bootstrap_ratio(&pairs, 1000, CI_LEVEL, &mut rs);
        assert_eq!(e.value, 0.1);
        assert!(e.ci_low <= 0.1 && e.ci_high >= 0.1);
    }
}
