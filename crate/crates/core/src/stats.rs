//! Kolmogorov-Smirnov tests and test reports.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size `n` (or `n1 n2 / (n1 + n2)`).
    pub n_eff: f64,
}

/// Kolmogorov survival function `Q(l) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 l^2)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

/// One-sample test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    assert!(!samples.is_empty(), "KS test needs samples");
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    KsResult {
        statistic: d,
        p_value: p_value(d, n),
        n_eff: n,
    }
}

/// Two-sample test; ties are handled by advancing through equal values
/// together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    assert!(!a.is_empty() && !b.is_empty(), "KS test needs samples");
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n1, n2) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let v = xs[i].min(ys[j]);
        while i < n1 && xs[i] <= v {
            i += 1;
        }
        while j < n2 && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let n_eff = (n1 * n2) as f64 / (n1 + n2) as f64;
    KsResult {
        statistic: d,
        p_value: p_value(d, n_eff),
        n_eff,
    }
}

/// Outcome of one statistical or exact check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub sample_sizes: Vec<usize>,
    pub p_value: Option<f64>,
    pub pass: bool,
}

impl TestReport {
    /// Passes when `statistic < threshold`.
    pub fn below(
        name: impl Into<String>,
        statistic: f64,
        threshold: f64,
        sample_sizes: Vec<usize>,
    ) -> Self {
        TestReport {
            name: name.into(),
            statistic,
            threshold,
            sample_sizes,
            p_value: None,
            pass: statistic < threshold,
        }
    }

    /// Exact check: passes when there are no failures.
    pub fn exact(name: impl Into<String>, failures: usize, sample_sizes: Vec<usize>) -> Self {
        TestReport {
            name: name.into(),
            statistic: failures as f64,
            threshold: 0.0,
            sample_sizes,
            p_value: None,
            pass: failures == 0,
        }
    }

    /// Passes when the p-value is below `alpha` (a negative control).
    pub fn rejected(
        name: impl Into<String>,
        p_value: f64,
        alpha: f64,
        sample_sizes: Vec<usize>,
    ) -> Self {
        TestReport {
            name: name.into(),
            statistic: p_value,
            threshold: alpha,
            sample_sizes,
            p_value: Some(p_value),
            pass: p_value < alpha,
        }
    }

    /// Passes when the p-value is at least `alpha` (the null is not rejected).
    pub fn not_rejected(
        name: impl Into<String>,
        ks: KsResult,
        alpha: f64,
        sample_sizes: Vec<usize>,
    ) -> Self {
        TestReport {
            name: name.into(),
            statistic: ks.statistic,
            threshold: alpha,
            sample_sizes,
            p_value: Some(ks.p_value),
            pass: ks.p_value >= alpha,
        }
    }
}

/// Smallest p-value across `reports` multiplied by their number, capped at 1.
pub fn bonferroni(p_values: &[f64]) -> f64 {
    let m = p_values.len() as f64;
    p_values
        .iter()
        .fold(1.0f64, |acc, &p| acc.min(p * m))
        .min(1.0)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normal_cdf(x: f64) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        Normal::new(0.0, 1.0).unwrap().cdf(x)
    }

    #[test]
    fn kolmogorov_values() {
        assert!((kolmogorov_q(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_q(1.628) - 0.0100).abs() < 5e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
        assert!(kolmogorov_q(5.0) < 1e-20);
    }

    #[test]
    fn identical_samples() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let r = ks_two_sample(&xs, &xs);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn uniform_calibration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let r = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0));
        assert!(r.statistic < 0.01);
        // p-values are roughly uniform under the null
        let ps: Vec<f64> = (0..400)
            .map(|_| {
                let xs: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
                ks_one_sample(&xs, |x| x.clamp(0.0, 1.0)).p_value
            })
            .collect();
        let frac = ps.iter().filter(|&&p| p < 0.1).count() as f64 / ps.len() as f64;
        assert!((0.05..0.16).contains(&frac), "{frac}");
    }

    #[test]
    fn shifted_gaussian_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Vec<f64> = (0..2000)
            .map(|_| rng.sample::<f64, _>(StandardNormal) + 0.2)
            .collect();
        let b: Vec<f64> = (0..2000)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        assert!(ks_one_sample(&a, normal_cdf).p_value < 1e-3);
        assert!(ks_two_sample(&a, &b).p_value < 1e-3);
        assert!(ks_one_sample(&b, normal_cdf).p_value > 1e-3);
    }

    #[test]
    fn report_flags() {
        assert!(TestReport::below("x", 0.01, 0.05, vec![10]).pass);
        assert!(!TestReport::below("x", 0.05, 0.05, vec![10]).pass);
        assert_eq!(bonferroni(&[0.2, 0.004]), 0.008);
    }
}
