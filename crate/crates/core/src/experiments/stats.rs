//! Exact binomial inference and goodness-of-fit helpers.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

fn check_counts(k: u64, n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("number of trials must be positive"));
    }
    if k > n {
        return Err(Error::invalid(format!("{k} successes exceed {n} trials")));
    }
    Ok(())
}

fn beta_quantile(a: f64, b: f64, q: f64) -> f64 {
    Beta::new(a, b)
        .expect("shape parameters are positive")
        .inverse_cdf(q)
}

/// Exact two-sided Clopper-Pearson interval for `k` successes in `n` trials.
pub fn clopper_pearson(k: u64, n: u64, level: f64) -> Result<Interval> {
    check_counts(k, n)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let tail = (1.0 - level) / 2.0;
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 { 0.0 } else { beta_quantile(kf, nf - kf + 1.0, tail) };
    let hi = if k == n { 1.0 } else { beta_quantile(kf + 1.0, nf - kf, 1.0 - tail) };
    Ok(Interval { lo, hi })
}

/// `P(Bin(n, p0) ≥ k)`, the one-sided p-value for a rate above `p0`.
pub fn binomial_test_greater(k: u64, n: u64, p0: f64) -> Result<f64> {
    check_counts(k, n)?;
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::invalid(format!("null rate must lie in (0, 1), got {p0}")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    Ok(beta_reg(k as f64, (n - k + 1) as f64, p0))
}

/// Observed rate with its 95% Clopper-Pearson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub count: u64,
    pub runs: u64,
    pub rate: f64,
    pub ci: Interval,
}

impl RateEstimate {
    pub fn new(count: u64, runs: u64) -> Result<Self> {
        Ok(RateEstimate {
            count,
            runs,
            rate: count as f64 / runs as f64,
            ci: clopper_pearson(count, runs, 0.95)?,
        })
    }

    /// Binomial standard error at rate `p`.
    pub fn standard_error_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.runs as f64).sqrt()
    }
}

/// One-sample Kolmogorov-Smirnov distance between `samples` and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("samples contain NaN"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max))
}

/// Large-sample critical value of the KS distance at significance `level`.
pub fn ks_critical_value(num_samples: usize, level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt() / (num_samples as f64).sqrt()
}
