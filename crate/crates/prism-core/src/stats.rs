//! Small shared numeric helpers built on `statrs` distributions.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n-1 denominator). Zero for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn norm_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub fn norm_ppf(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

pub fn t_cdf(x: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("t distribution df > 0")
        .cdf(x)
}

pub fn t_ppf(p: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("t distribution df > 0")
        .inverse_cdf(p)
}

/// Upper tail of the chi-squared distribution.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(df).expect("chi2 df > 0").cdf(x)
}

/// Two-sided normal p-value for a standardized statistic.
pub fn two_sided_normal_p(z: f64) -> f64 {
    (2.0 * norm_cdf(-z.abs())).min(1.0)
}

/// Linear-interpolation quantile of a sorted slice (R type 7).
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&p));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = lo + 1;
    if hi >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
