//! Streaming moments and goodness-of-fit statistics.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::theory::TheoryValues;

/// Single-pass mean and variance (Welford), mergeable across workers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    pub count: u64,
    pub mean: f64,
    /// Sum of squared deviations from the mean.
    pub m2: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for MomentAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl MomentAccumulator {
    pub fn new() -> Self {
        MomentAccumulator {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut acc = Self::new();
        xs.iter().for_each(|&x| acc.update(x));
        acc
    }

    pub fn update(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    /// Combine two accumulators (Chan et al. pairwise update).
    pub fn merge(&self, other: &MomentAccumulator) -> MomentAccumulator {
        if other.count == 0 {
            return *self;
        }
        if self.count == 0 {
            return *other;
        }
        let count = self.count + other.count;
        let (na, nb) = (self.count as f64, other.count as f64);
        let delta = other.mean - self.mean;
        MomentAccumulator {
            count,
            mean: self.mean + delta * nb / count as f64,
            m2: self.m2 + other.m2 + delta * delta * na * nb / count as f64,
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    /// Sample variance `m2 / (count - 1)`; `None` with fewer than two points.
    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| self.m2 / (self.count - 1) as f64)
    }
}

/// `(L₁ - ρn) / σ`.
pub fn standardize(l1: f64, theory: &TheoryValues) -> f64 {
    (l1 - theory.t1) / theory.sigma()
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn check_sorted(sample: &[f64]) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::domain("sample must be nonempty"));
    }
    if sample.iter().any(|x| x.is_nan()) || !sample.is_sorted() {
        return Err(Error::domain("sample must be sorted and free of NaN"));
    }
    Ok(())
}

/// One-sample Kolmogorov–Smirnov distance of a sorted sample to `cdf`,
/// evaluated on both sides of every jump.
pub fn ks_one_sample_with(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    check_sorted(sample)?;
    let m = sample.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sample.len() {
        let x = sample[i];
        let mut j = i;
        while j < sample.len() && sample[j] == x {
            j += 1;
        }
        let f = cdf(x);
        d = d.max((f - i as f64 / m).abs()).max((j as f64 / m - f).abs());
        i = j;
    }
    Ok(d)
}

/// One-sample KS distance to the standard normal.
pub fn ks_one_sample(sample: &[f64]) -> Result<f64> {
    ks_one_sample_with(sample, normal_cdf)
}

/// Two-sample KS distance between sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sorted(a)?;
    check_sorted(b)?;
    let (ma, mb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / ma - j as f64 / mb).abs());
    }
    Ok(d)
}

/// Asymptotic Kolmogorov critical coefficient `c(α) = √(-ln(α/2) / 2)`.
pub fn kolmogorov_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// One-sample critical value `c(α) / √m`.
pub fn ks_critical_one_sample(alpha: f64, m: usize) -> f64 {
    kolmogorov_coefficient(alpha) / (m as f64).sqrt()
}

/// Two-sample critical value `c(α) √((m + k) / (m k))`.
pub fn ks_critical_two_sample(alpha: f64, m: usize, k: usize) -> f64 {
    let (m, k) = (m as f64, k as f64);
    kolmogorov_coefficient(alpha) * ((m + k) / (m * k)).sqrt()
}

/// Minimum expected count per bin after pooling.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Pooled `(observed, expected)` counts.
    pub bins: Vec<(u64, f64)>,
}

/// Pearson chi-square of `observed` against `expected_pmf` (same indexing).
///
/// Adjacent bins are pooled left to right until each holds an expected count
/// of at least [`MIN_EXPECTED`]; a short tail is folded into the last pool.
/// Observations in zero-probability bins make the statistic infinite.
pub fn chi_square(observed: &[u64], expected_pmf: &[f64]) -> Result<ChiSquare> {
    if observed.len() != expected_pmf.len() {
        return Err(Error::domain("observed and expected lengths differ"));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::domain("no observations"));
    }
    let mut bins: Vec<(u64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0u64, 0.0);
    for (&o, &q) in observed.iter().zip(expected_pmf) {
        o_acc += o;
        e_acc += q * total as f64;
        if e_acc >= MIN_EXPECTED {
            bins.push((o_acc, e_acc));
            o_acc = 0;
            e_acc = 0.0;
        }
    }
    if o_acc > 0 || e_acc > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => bins.push((o_acc, e_acc)),
        }
    }
    let statistic: f64 = bins
        .iter()
        .map(|&(o, e)| {
            let diff = o as f64 - e;
            if e > 0.0 {
                diff * diff / e
            } else if o > 0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .sum();
    let dof = bins.len().saturating_sub(1);
    let p_value = if dof == 0 {
        if statistic.abs() < 1e-9 {
            1.0
        } else {
            0.0
        }
    } else if statistic.is_infinite() {
        0.0
    } else {
        1.0 - ChiSquared::new(dof as f64)
            .expect("positive degrees of freedom")
            .cdf(statistic)
    };
    Ok(ChiSquare {
        statistic,
        dof,
        p_value,
        bins,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub left: f64,
    pub right: f64,
    pub count: u64,
}

/// Equal-width bins over `[min, max]`; the last bin is closed on the right.
pub fn histogram(sample: &[f64], bin_count: usize) -> Result<Vec<Bin>> {
    if sample.is_empty() {
        return Err(Error::domain("cannot histogram an empty sample"));
    }
    if bin_count == 0 {
        return Err(Error::domain("bin_count must be positive"));
    }
    let lo = sample.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bin_count as f64;
    let mut bins: Vec<Bin> = (0..bin_count)
        .map(|i| Bin {
            left: lo + width * i as f64,
            right: if i + 1 == bin_count {
                hi
            } else {
                lo + width * (i + 1) as f64
            },
            count: 0,
        })
        .collect();
    for &x in sample {
        let idx = if width > 0.0 {
            (((x - lo) / width) as usize).min(bin_count - 1)
        } else {
            0
        };
        bins[idx].count += 1;
    }
    Ok(bins)
}

/// `bin_left,bin_right,count`
pub fn write_histogram_csv<W: Write>(bins: &[Bin], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_left", "bin_right", "count"])?;
    for b in bins {
        w.write_record([
            format!("{:.16e}", b.left),
            format!("{:.16e}", b.right),
            b.count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(sorted: &[f64]) -> f64 {
    quantile(sorted, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::seed_stream;
    use crate::theory::{Params, TheoryValues};
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};
    use statrs::distribution::Normal;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn moments_small_sample() {
        let acc = MomentAccumulator::from_slice(&[1.0, 2.0, 3.0]);
        assert_eq!(acc.mean, 2.0);
        assert_eq!(acc.variance(), Some(1.0));
        assert_eq!((acc.min, acc.max), (1.0, 3.0));
        assert_eq!(acc.merge(&MomentAccumulator::new()), acc);
        assert_eq!(MomentAccumulator::new().merge(&acc), acc);
        assert_eq!(MomentAccumulator::from_slice(&[4.0]).variance(), None);
    }

    #[test]
    fn moments_of_normal_quantile_grid() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let m = 1_000_000;
        let mut acc = MomentAccumulator::new();
        for i in 1..=m {
            acc.update(normal.inverse_cdf((i as f64 - 0.5) / m as f64));
        }
        assert!(acc.mean.abs() < 0.01);
        assert!((acc.variance().unwrap() - 1.0).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn merge_matches_concatenation(
            a in prop::collection::vec(-1e3f64..1e3, 0..40),
            b in prop::collection::vec(-1e3f64..1e3, 0..40),
            c in prop::collection::vec(-1e3f64..1e3, 0..40),
        ) {
            let (fa, fb, fc) = (
                MomentAccumulator::from_slice(&a),
                MomentAccumulator::from_slice(&b),
                MomentAccumulator::from_slice(&c),
            );
            let left = fa.merge(&fb).merge(&fc);
            let right = fa.merge(&fb.merge(&fc));
            let all: Vec<f64> = a.iter().chain(&b).chain(&c).copied().collect();
            let whole = MomentAccumulator::from_slice(&all);
            for acc in [left, right] {
                prop_assert_eq!(acc.count, whole.count);
                prop_assert!(close(acc.mean, whole.mean, 1e-9));
                prop_assert!(close(acc.m2, whole.m2, 1e-9));
            }
            prop_assert!(close(fa.merge(&fb).mean, fb.merge(&fa).mean, 1e-9));
        }

        #[test]
        fn ks_in_unit_interval(mut a in prop::collection::vec(-5f64..5.0, 1..60),
                               mut b in prop::collection::vec(-5f64..5.0, 1..60)) {
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let d1 = ks_one_sample(&a).unwrap();
            let d2 = ks_two_sample(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&d1));
            prop_assert!((0.0..=1.0).contains(&d2));
        }
    }

    #[test]
    fn standardize_examples() {
        let params = Params::new(100_000, 1.5).unwrap();
        let th = TheoryValues::new(&params).unwrap();
        assert_eq!(standardize(th.t1, &th), 0.0);
        assert!((standardize(th.t1 + th.sigma(), &th) - 1.0).abs() < 1e-12);
        let l1 = 58_000.0;
        let shift = standardize(l1 + th.sigma(), &th) - standardize(l1, &th);
        assert!((shift - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.959964) - 0.975).abs() < 1e-5);
        assert_eq!(normal_cdf(40.0), 1.0);
        assert_eq!(normal_cdf(-40.0), 0.0);

        // Simpson integration of the density as an independent check.
        let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for &x in &[-2.5, -1.0, 0.3, 1.959964, 3.0] {
            let (a, b, steps) = (-12.0, x, 20_000);
            let h = (b - a) / steps as f64;
            let mut sum = density(a) + density(b);
            for i in 1..steps {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                sum += w * density(a + h * i as f64);
            }
            assert!((normal_cdf(x) - sum * h / 3.0).abs() < 1e-7, "x = {x}");
        }
    }

    #[test]
    fn ks_one_sample_examples() {
        assert_eq!(ks_one_sample(&[0.0]).unwrap(), 0.5);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let m = 1000;
        let grid: Vec<f64> = (1..=m)
            .map(|i| normal.inverse_cdf((i as f64 - 0.5) / m as f64))
            .collect();
        assert!(ks_one_sample(&grid).unwrap() <= 1.0 / m as f64 + 1e-6);

        let mut s = seed_stream(17, 0);
        let mut draws: Vec<f64> = (0..4000).map(|_| StandardNormal.sample(&mut s)).collect();
        draws.sort_by(f64::total_cmp);
        assert!(ks_one_sample(&draws).unwrap() <= 1.95 / 4000f64.sqrt());

        assert!(ks_one_sample(&[]).is_err());
        assert!(ks_one_sample(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn ks_two_sample_examples() {
        let a = [1.0, 2.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[5.0, 6.0, 7.0]).unwrap(), 1.0);
        assert!((ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn critical_values() {
        assert!((kolmogorov_coefficient(0.001) - 1.9495).abs() < 1e-4);
        let c2 = ks_critical_two_sample(0.001, 20_000, 20_000);
        assert!((c2 - kolmogorov_coefficient(0.001) * (1e-4f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn chi_square_examples() {
        let pmf = [0.25, 0.5, 0.25];
        let r = chi_square(&[250, 500, 250], &pmf).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 2);
        assert!((r.p_value - 1.0).abs() < 1e-12);

        // Expected counts 1, 2, 47, 50 over 100 draws: first three pool.
        let r = chi_square(&[3, 0, 47, 50], &[0.01, 0.02, 0.47, 0.5]).unwrap();
        assert_eq!(r.bins.len(), 2);
        assert_eq!(r.bins[0].0, 50);
        assert!((r.bins[0].1 - 50.0).abs() < 1e-9);
        assert_eq!(r.dof, 1);

        // Short tail folds into the previous pool.
        let r = chi_square(&[50, 49, 1], &[0.5, 0.49, 0.01]).unwrap();
        assert_eq!(r.bins.len(), 2);
        assert!(r.bins.iter().all(|b| b.1 >= MIN_EXPECTED));

        let r = chi_square(&[10], &[1.0]).unwrap();
        assert_eq!((r.dof, r.p_value), (0, 1.0));
        assert!(chi_square(&[1, 2], &[1.0]).is_err());
    }

    #[test]
    fn histogram_examples() {
        assert!(histogram(&[], 4).is_err());
        let h = histogram(&[2.0, 2.0, 2.0], 5).unwrap();
        assert_eq!(h.iter().filter(|b| b.count > 0).count(), 1);
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sqrt()).collect();
        let h = histogram(&xs, 13).unwrap();
        assert_eq!(h.iter().map(|b| b.count).sum::<u64>(), 1000);
        assert_eq!(h.last().unwrap().right, xs[999]);

        let mut out = Vec::new();
        write_histogram_csv(&h, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("bin_left,bin_right,count\n"));
        assert_eq!(text.lines().count(), 14);
    }

    #[test]
    fn quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(median(&xs), 3.0);
        assert_eq!(quantile(&xs, 0.9), 4.6);
        assert_eq!(median(&[1.0, 2.0]), 1.5);
    }
}
