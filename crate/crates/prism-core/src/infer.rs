//! Subgroup and overall estimation: PLE averaging, pseudo-outcome standard
//! errors, the normal-prior Bayesian update, within-subgroup OLS/GLM, and the
//! Miettinen-Nurminen score interval for risk differences.
//!
//! Point estimates on the PLE path never read the observed outcomes except
//! through the fitted arm models and the pseudo-outcome SE: `ple_average` is
//! a pure function of the PLE table and the subgroup assignment.

use crate::data::{OutcomeFamily, TrialDataset};
use crate::error::{Error, Result};
use crate::forest::PleTable;
use crate::stats::{norm_cdf, norm_ppf, t_ppf};

/// Prior configuration for the posterior update.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BayesConfig {
    /// Prior-variance scale; the reference choice is gamma = n, which makes
    /// the prior effectively uninformative.
    pub gamma: f64,
    /// Two-sided CI level is 1 - alpha.
    pub alpha: f64,
    /// Thresholds c for the probability statements P(theta > c), P(theta < c).
    pub thresholds: Vec<f64>,
}

impl BayesConfig {
    pub fn for_sample_size(n: usize) -> Self {
        BayesConfig {
            gamma: n as f64,
            alpha: 0.05,
            thresholds: vec![0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma <= 0.0 {
            return Err(Error::InvalidArg(format!(
                "prior scale gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(Error::InvalidArg(format!(
                "CI alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Normal posterior for one subgroup.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Posterior {
    pub mean: f64,
    pub var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProbStatement {
    pub threshold: f64,
    pub greater: f64,
    pub less: f64,
}

fn subgroup_rows(assignment: &[usize], k: usize) -> Vec<usize> {
    if k == 0 {
        (0..assignment.len()).collect()
    } else {
        (0..assignment.len()).filter(|&i| assignment[i] == k).collect()
    }
}

/// Average of the patient-level estimates over subgroup k (k = 0: everyone).
pub fn ple_average(ple: &PleTable, assignment: &[usize], k: usize) -> Result<f64> {
    let rows = subgroup_rows(assignment, k);
    if rows.is_empty() {
        return Err(Error::EmptySubgroup { k });
    }
    Ok(rows.iter().map(|&i| ple.theta_hat[i]).sum::<f64>() / rows.len() as f64)
}

/// Augmented inverse-propensity pseudo-outcomes: residual term plus model
/// term; their subgroup means are unbiased for the subgroup effects.
pub fn pseudo_outcomes(ds: &TrialDataset, ple: &PleTable) -> Result<Vec<f64>> {
    (0..ds.n())
        .map(|i| {
            let pi = ple.pi_hat[i];
            if !(pi > 0.0 && pi < 1.0) {
                return Err(Error::numeric(
                    "pseudo_outcomes",
                    format!("propensity {pi} outside (0, 1) at row {i}"),
                ));
            }
            let a = f64::from(ds.arm()[i]);
            let y = ds.y()[i];
            let (m0, m1) = (ple.mu0_hat[i], ple.mu1_hat[i]);
            let resid_term = a * (y - m1) / pi - (1.0 - a) * (y - m0) / (1.0 - pi);
            Ok(resid_term + (m1 - m0))
        })
        .collect()
}

/// Pseudo-outcome standard error of the subgroup PLE average:
/// sqrt( n_k^-2 * sum over the subgroup of (y*_i - theta_tilde)^2 ).
pub fn se_ple(y_star: &[f64], theta_tilde: f64, assignment: &[usize], k: usize) -> Result<f64> {
    let rows = subgroup_rows(assignment, k);
    if rows.len() < 2 {
        return Err(Error::InvalidArg(format!(
            "subgroup {k} has {} rows; the pseudo-outcome SE needs at least 2",
            rows.len()
        )));
    }
    let n_k = rows.len() as f64;
    let ss: f64 = rows
        .iter()
        .map(|&i| (y_star[i] - theta_tilde) * (y_star[i] - theta_tilde))
        .sum();
    Ok((ss / (n_k * n_k)).sqrt())
}

/// t-interval around a PLE average.
pub fn t_interval(theta_tilde: f64, se: f64, n_k: usize, alpha: f64) -> (f64, f64) {
    let t = t_ppf(1.0 - alpha / 2.0, (n_k - 1).max(1) as f64);
    (theta_tilde - t * se, theta_tilde + t * se)
}

/// Normal-prior/normal-likelihood update: precision addition (variance) and
/// precision-weighted mean.
pub fn bayes_update(
    theta_tilde: f64,
    var_tilde: f64,
    theta_0: f64,
    var_0: f64,
    cfg: &BayesConfig,
) -> Posterior {
    debug_assert!(var_tilde > 0.0 && var_0 > 0.0 && cfg.gamma > 0.0);
    let prior_var = cfg.gamma * var_0;
    let var = 1.0 / (1.0 / prior_var + 1.0 / var_tilde);
    let mean = var * (theta_0 / prior_var + theta_tilde / var_tilde);
    debug_assert!(var <= var_tilde && var <= prior_var);
    // the posterior mean is a convex combination of prior mean and estimate
    let w0 = var / prior_var;
    let w1 = var / var_tilde;
    debug_assert!((w0 + w1 - 1.0).abs() < 1e-10);
    Posterior { mean, var }
}

/// alpha/2 and 1-alpha/2 posterior quantiles.
pub fn posterior_ci(post: &Posterior, alpha: f64) -> (f64, f64) {
    let z = norm_ppf(1.0 - alpha / 2.0);
    let sd = post.var.sqrt();
    (post.mean - z * sd, post.mean + z * sd)
}

/// Normal tail areas in both directions for each threshold.
pub fn prob_statements(post: &Posterior, thresholds: &[f64]) -> Vec<ProbStatement> {
    let sd = post.var.sqrt();
    thresholds
        .iter()
        .map(|&c| {
            let z = (c - post.mean) / sd;
            ProbStatement {
                threshold: c,
                greater: 1.0 - norm_cdf(z),
                less: norm_cdf(z),
            }
        })
        .collect()
}

/// Within-subgroup model fit: least-squares slope on treatment (continuous)
/// or risk difference with Wald SE (binary). `flagged` marks single-arm
/// subgroups, which get a point estimate convention of the available arm and
/// no SE.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GlmEstimate {
    pub k: usize,
    pub n_k: usize,
    pub n0: usize,
    pub n1: usize,
    pub mean0: f64,
    pub mean1: f64,
    pub estimate: f64,
    pub se: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub flagged: bool,
}

/// Fit y ~ treatment on a row subset.
pub fn glm_estimate_rows(
    ds: &TrialDataset,
    rows: &[usize],
    k: usize,
    family: OutcomeFamily,
    alpha: f64,
) -> GlmEstimate {
    let mut sum = [0.0f64; 2];
    let mut sq = [0.0f64; 2];
    let mut cnt = [0usize; 2];
    for &i in rows {
        let a = ds.arm()[i] as usize;
        sum[a] += ds.y()[i];
        sq[a] += ds.y()[i] * ds.y()[i];
        cnt[a] += 1;
    }
    let (n0, n1) = (cnt[0], cnt[1]);
    if n0 == 0 || n1 == 0 {
        let mean_avail = if n0 > 0 {
            sum[0] / n0 as f64
        } else {
            sum[1] / n1 as f64
        };
        return GlmEstimate {
            k,
            n_k: rows.len(),
            n0,
            n1,
            mean0: if n0 > 0 { mean_avail } else { f64::NAN },
            mean1: if n1 > 0 { mean_avail } else { f64::NAN },
            estimate: f64::NAN,
            se: None,
            ci_low: None,
            ci_high: None,
            flagged: true,
        };
    }
    let mean0 = sum[0] / n0 as f64;
    let mean1 = sum[1] / n1 as f64;
    let estimate = mean1 - mean0;
    let (se, lo, hi) = match family {
        OutcomeFamily::Continuous => {
            let rss = (sq[0] - sum[0] * sum[0] / n0 as f64) + (sq[1] - sum[1] * sum[1] / n1 as f64);
            let df = rows.len().saturating_sub(2).max(1) as f64;
            let s2 = rss / df;
            let se = (s2 * (1.0 / n0 as f64 + 1.0 / n1 as f64)).sqrt();
            let t = t_ppf(1.0 - alpha / 2.0, df);
            (se, estimate - t * se, estimate + t * se)
        }
        OutcomeFamily::Binary => {
            let v = mean1 * (1.0 - mean1) / n1 as f64 + mean0 * (1.0 - mean0) / n0 as f64;
            let se = v.sqrt();
            let z = norm_ppf(1.0 - alpha / 2.0);
            (se, estimate - z * se, estimate + z * se)
        }
    };
    GlmEstimate {
        k,
        n_k: rows.len(),
        n0,
        n1,
        mean0,
        mean1,
        estimate,
        se: Some(se),
        ci_low: Some(lo),
        ci_high: Some(hi),
        flagged: false,
    }
}

/// Fit y ~ treatment within each subgroup of a 1-based assignment.
pub fn glm_within_subgroups(
    ds: &TrialDataset,
    assignment: &[usize],
    n_groups: usize,
    family: OutcomeFamily,
    alpha: f64,
) -> Vec<GlmEstimate> {
    (1..=n_groups)
        .map(|k| {
            let rows = subgroup_rows(assignment, k);
            glm_estimate_rows(ds, &rows, k, family, alpha)
        })
        .collect()
}

/// Score statistic for a risk difference delta with the restricted-MLE
/// variance and the N/(N-1) scale factor.
pub fn mn_score(x1: u64, n1: u64, x0: u64, n0: u64, delta: f64) -> f64 {
    let (p1, p0) = (x1 as f64 / n1 as f64, x0 as f64 / n0 as f64);
    let rd = p1 - p0;
    let (p1t, p0t) = restricted_mle(p1, p0, n1 as f64, n0 as f64, delta);
    let n = (n1 + n0) as f64;
    let var =
        (p1t * (1.0 - p1t) / n1 as f64 + p0t * (1.0 - p0t) / n0 as f64) * (n / (n - 1.0));
    if var <= 0.0 {
        return if rd == delta {
            0.0
        } else {
            f64::INFINITY * (rd - delta).signum()
        };
    }
    (rd - delta) / var.sqrt()
}

/// Restricted MLE of (p1, p0) under p1 - p0 = delta (closed-form cubic).
fn restricted_mle(p1: f64, p0: f64, n1: f64, n0: f64, delta: f64) -> (f64, f64) {
    let theta = n0 / n1;
    let a = 1.0 + theta;
    let b = -(1.0 + theta + p1 + theta * p0 + delta * (theta + 2.0));
    let c = delta * delta + delta * (2.0 * p1 + theta + 1.0) + p1 + theta * p0;
    let d = -p1 * delta * (1.0 + delta);
    let v = b.powi(3) / (27.0 * a.powi(3)) - b * c / (6.0 * a * a) + d / (2.0 * a);
    let disc = b * b / (9.0 * a * a) - c / (3.0 * a);
    let u = if v.abs() < 1e-30 {
        disc.max(0.0).sqrt()
    } else {
        v.signum() * disc.max(0.0).sqrt()
    };
    let p1t = if u.abs() < 1e-14 {
        -b / (3.0 * a)
    } else {
        let w = (std::f64::consts::PI + (v / u.powi(3)).clamp(-1.0, 1.0).acos()) / 3.0;
        2.0 * u * w.cos() - b / (3.0 * a)
    };
    let p1t = p1t.clamp(delta.max(0.0), (1.0 + delta).min(1.0));
    (p1t, p1t - delta)
}

/// Miettinen-Nurminen score interval for the difference of two proportions.
/// Bounds are the roots of |score(delta)| = z_{1-alpha/2}, found by bisection
/// on [-1, 1]; they clamp to the [-1, 1] range.
pub fn miettinen_nurminen_rd(
    x1: u64,
    n1: u64,
    x0: u64,
    n0: u64,
    alpha: f64,
) -> Result<(f64, f64, f64)> {
    if n1 == 0 || n0 == 0 || x1 > n1 || x0 > n0 {
        return Err(Error::InvalidArg(format!(
            "invalid 2x2 counts: x1={x1}/{n1}, x0={x0}/{n0}"
        )));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidArg(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let rd = x1 as f64 / n1 as f64 - x0 as f64 / n0 as f64;
    let z_crit = norm_ppf(1.0 - alpha / 2.0);

    // score(delta) decreases in delta; the lower bound solves score = +z,
    // the upper bound solves score = -z
    let bisect = |mut lo: f64, mut hi: f64, target: f64| -> f64 {
        for _ in 0..70 {
            let mid = 0.5 * (lo + hi);
            if mn_score(x1, n1, x0, n0, mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let eps = 1e-12;
    let lower = if mn_score(x1, n1, x0, n0, -1.0 + eps) <= z_crit {
        -1.0
    } else {
        bisect(-1.0 + eps, rd, z_crit)
    };
    let upper = if mn_score(x1, n1, x0, n0, 1.0 - eps) >= -z_crit {
        1.0
    } else {
        bisect(rd, 1.0 - eps, -z_crit)
    };
    Ok((rd, lower.clamp(-1.0, 1.0), upper.clamp(-1.0, 1.0)))
}

/// Benchmark estimates within a known partition (0-based group ids):
/// per-group OLS for continuous outcomes, Miettinen-Nurminen risk differences
/// for binary ones.
pub fn oracle_estimate(
    ds: &TrialDataset,
    partition: &[usize],
    n_groups: usize,
    family: OutcomeFamily,
    alpha: f64,
) -> Result<Vec<GlmEstimate>> {
    (0..n_groups)
        .map(|g| {
            let rows: Vec<usize> = (0..ds.n()).filter(|&i| partition[i] == g).collect();
            if rows.is_empty() {
                return Err(Error::EmptySubgroup { k: g + 1 });
            }
            match family {
                OutcomeFamily::Continuous => {
                    Ok(glm_estimate_rows(ds, &rows, g + 1, family, alpha))
                }
                OutcomeFamily::Binary => {
                    let mut est = glm_estimate_rows(ds, &rows, g + 1, family, alpha);
                    if !est.flagged {
                        let count = |arm: u8| {
                            rows.iter()
                                .filter(|&&i| ds.arm()[i] == arm && ds.y()[i] == 1.0)
                                .count() as u64
                        };
                        let (rd, lo, hi) = miettinen_nurminen_rd(
                            count(1),
                            est.n1 as u64,
                            count(0),
                            est.n0 as u64,
                            alpha,
                        )?;
                        est.estimate = rd;
                        est.ci_low = Some(lo);
                        est.ci_high = Some(hi);
                    }
                    Ok(est)
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::norm_ppf;
    use approx::assert_abs_diff_eq;

    fn ple_from(theta: Vec<f64>) -> PleTable {
        let n = theta.len();
        PleTable {
            mu0_hat: vec![0.0; n],
            mu1_hat: theta.clone(),
            theta_hat: theta,
            pi_hat: vec![0.5; n],
        }
    }

    #[test]
    fn ple_average_is_the_mean_and_errors_on_empty() {
        let ple = ple_from(vec![1.0, 2.0, 3.0]);
        let assignment = vec![1, 1, 1];
        assert_abs_diff_eq!(ple_average(&ple, &assignment, 1).unwrap(), 2.0);
        assert_abs_diff_eq!(ple_average(&ple, &assignment, 0).unwrap(), 2.0);
        assert!(matches!(
            ple_average(&ple, &assignment, 2),
            Err(Error::EmptySubgroup { k: 2 })
        ));
    }

    #[test]
    fn partition_identity_holds_to_1e12() {
        let mut rng = crate::rng::derive_rng(3, &[0]);
        use rand::Rng;
        for _ in 0..20 {
            let n = 257;
            let theta: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let assignment: Vec<usize> = (0..n).map(|_| rng.random_range(1..=4)).collect();
            let ple = ple_from(theta);
            let overall = ple_average(&ple, &assignment, 0).unwrap();
            let mut weighted = 0.0;
            for k in 1..=4 {
                let n_k = assignment.iter().filter(|&&a| a == k).count();
                if n_k > 0 {
                    weighted += n_k as f64 * ple_average(&ple, &assignment, k).unwrap();
                }
            }
            assert!((weighted - n as f64 * overall).abs() < 1e-12 * n as f64);
        }
    }

    #[test]
    fn pseudo_outcome_hand_values() {
        // y_i = mu(a_i) exactly: the pseudo-outcome reduces to the PLE
        let ds = TrialDataset::new(
            vec![1.5, 1.0],
            vec![1, 0],
            vec![vec![0.0, 1.0]],
            vec!["x".into()],
        )
        .unwrap();
        let ple = PleTable {
            mu0_hat: vec![1.0, 1.0],
            mu1_hat: vec![1.5, 1.5],
            theta_hat: vec![0.5, 0.5],
            pi_hat: vec![0.5, 0.5],
        };
        let ys = pseudo_outcomes(&ds, &ple).unwrap();
        assert_abs_diff_eq!(ys[0], 0.5);
        assert_abs_diff_eq!(ys[1], 0.5);

        // hand evaluation: pi=0.5, a=1, y=2, mu1=1.5, mu0=1.0 -> 1.5
        let ds = TrialDataset::new(
            vec![2.0, 1.0],
            vec![1, 0],
            vec![vec![0.0, 1.0]],
            vec!["x".into()],
        )
        .unwrap();
        let ys = pseudo_outcomes(&ds, &ple).unwrap();
        assert_abs_diff_eq!(ys[0], 1.5);
    }

    #[test]
    fn pseudo_outcomes_reject_degenerate_propensity() {
        let ds = TrialDataset::new(
            vec![1.0, 2.0],
            vec![0, 1],
            vec![vec![0.0, 1.0]],
            vec!["x".into()],
        )
        .unwrap();
        let mut ple = ple_from(vec![0.0, 0.0]);
        ple.pi_hat = vec![1.0, 1.0];
        assert!(pseudo_outcomes(&ds, &ple).is_err());
    }

    #[test]
    fn se_ple_hand_arithmetic_and_scaling() {
        let y_star = vec![0.0, 2.0];
        let se = se_ple(&y_star, 1.0, &[1, 1], 1).unwrap();
        assert_abs_diff_eq!(se, (0.5f64).sqrt(), epsilon = 1e-12);

        // duplicating every row scales the SE by 1/sqrt(2)
        let y4 = vec![0.0, 2.0, 0.0, 2.0];
        let se4 = se_ple(&y4, 1.0, &[1, 1, 1, 1], 1).unwrap();
        assert_abs_diff_eq!(se4, se / 2f64.sqrt(), epsilon = 1e-12);

        assert!(se_ple(&[1.0], 1.0, &[1], 1).is_err());
        // zero dispersion
        assert_abs_diff_eq!(se_ple(&[1.0, 1.0], 1.0, &[1, 1], 1).unwrap(), 0.0);
    }

    #[test]
    fn bayes_update_equal_precision_midpoint() {
        let cfg = BayesConfig {
            gamma: 1.0,
            alpha: 0.05,
            thresholds: vec![0.0],
        };
        let post = bayes_update(2.0, 1.0, 0.0, 1.0, &cfg);
        assert_abs_diff_eq!(post.mean, 1.0);
        assert_abs_diff_eq!(post.var, 0.5);
    }

    #[test]
    fn bayes_update_uninformative_limit() {
        let cfg = BayesConfig {
            gamma: 1e12,
            alpha: 0.05,
            thresholds: vec![0.0],
        };
        let post = bayes_update(2.0, 0.04, 0.5, 0.03, &cfg);
        assert_abs_diff_eq!(post.mean, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(post.var, 0.04, epsilon = 1e-9);
    }

    #[test]
    fn posterior_probability_is_half_at_the_mean() {
        let post = Posterior {
            mean: -0.3,
            var: 0.2,
        };
        let probs = prob_statements(&post, &[-0.3]);
        assert_abs_diff_eq!(probs[0].less, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(probs[0].greater, 0.5, epsilon = 1e-12);
        // directions sum to one
        let probs = prob_statements(&post, &[0.1]);
        assert_abs_diff_eq!(probs[0].less + probs[0].greater, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn uninformativeness_at_reference_scale() {
        // gamma = n = 800 with typical variances: the posterior mean moves by
        // well under 1% of the SE
        let cfg = BayesConfig {
            gamma: 800.0,
            alpha: 0.05,
            thresholds: vec![],
        };
        for (theta, var, theta0, var0) in [
            (0.4, 0.01, 0.24, 0.0025),
            (-0.2, 0.0004, -0.17, 0.0001),
            (0.05, 0.02, 0.0, 0.02),
        ] {
            let post = bayes_update(theta, var, theta0, var0, &cfg);
            assert!(
                (post.mean - theta).abs() <= 0.01 * var.sqrt(),
                "moved {} vs 0.01*se {}",
                (post.mean - theta).abs(),
                0.01 * var.sqrt()
            );
        }
    }

    #[test]
    fn glm_saturated_two_per_arm_is_mean_difference() {
        let ds = TrialDataset::new(
            vec![1.0, 3.0, 2.0, 6.0],
            vec![0, 0, 1, 1],
            vec![vec![0.0, 0.0, 0.0, 0.0]],
            vec!["x".into()],
        )
        .unwrap();
        let est = glm_estimate_rows(&ds, &[0, 1, 2, 3], 1, OutcomeFamily::Continuous, 0.05);
        assert_abs_diff_eq!(est.estimate, 2.0);
        assert!(!est.flagged);

        // identical arm outcomes -> estimate 0
        let ds = TrialDataset::new(
            vec![1.0, 1.0, 1.0, 1.0],
            vec![0, 0, 1, 1],
            vec![vec![0.0, 0.0, 0.0, 0.0]],
            vec!["x".into()],
        )
        .unwrap();
        let est = glm_estimate_rows(&ds, &[0, 1, 2, 3], 1, OutcomeFamily::Continuous, 0.05);
        assert_abs_diff_eq!(est.estimate, 0.0);
    }

    #[test]
    fn single_arm_subgroup_is_flagged() {
        let ds = TrialDataset::new(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0, 0, 1, 1],
            vec![vec![0.0, 0.0, 1.0, 1.0]],
            vec!["x".into()],
        )
        .unwrap();
        let ests = glm_within_subgroups(&ds, &[1, 1, 2, 2], 2, OutcomeFamily::Continuous, 0.05);
        assert!(ests[0].flagged && ests[1].flagged);
        assert!(ests[0].se.is_none());
    }

    #[test]
    fn mn_matches_independent_numeric_oracle() {
        // references computed with a numeric constrained-MLE implementation
        let cases = [
            (6u64, 20u64, 2u64, 20u64, 0.2, -0.05613137, 0.44455583),
            (15, 40, 7, 35, 0.175, -0.03394358, 0.36784265),
            (0, 10, 3, 12, -0.25, -0.53868575, 0.07108802),
            (44, 240, 94, 461, -0.0205712220, -0.07977258, 0.04323350),
            (5, 10, 5, 10, 0.0, -0.41009660, 0.41009660),
        ];
        for (x1, n1, x0, n0, rd_ref, lo_ref, hi_ref) in cases {
            let (rd, lo, hi) = miettinen_nurminen_rd(x1, n1, x0, n0, 0.05).unwrap();
            assert_abs_diff_eq!(rd, rd_ref, epsilon = 1e-10);
            assert_abs_diff_eq!(lo, lo_ref, epsilon = 1e-6);
            assert_abs_diff_eq!(hi, hi_ref, epsilon = 1e-6);
        }
    }

    #[test]
    fn mn_bounds_satisfy_the_score_equation() {
        let z = norm_ppf(0.975);
        for (x1, n1, x0, n0) in [(6u64, 20u64, 2u64, 20u64), (30, 100, 45, 120), (1, 15, 0, 14)] {
            let (_, lo, hi) = miettinen_nurminen_rd(x1, n1, x0, n0, 0.05).unwrap();
            assert!((mn_score(x1, n1, x0, n0, lo).abs() - z).abs() < 1e-6);
            assert!((mn_score(x1, n1, x0, n0, hi).abs() - z).abs() < 1e-6);
        }
    }

    #[test]
    fn mn_zero_difference_and_antisymmetry() {
        let (rd, lo, hi) = miettinen_nurminen_rd(7, 25, 7, 25, 0.05).unwrap();
        assert_abs_diff_eq!(rd, 0.0);
        assert!(lo < 0.0 && hi > 0.0);

        let (rd_a, lo_a, hi_a) = miettinen_nurminen_rd(9, 30, 4, 30, 0.05).unwrap();
        let (rd_b, lo_b, hi_b) = miettinen_nurminen_rd(4, 30, 9, 30, 0.05).unwrap();
        assert_abs_diff_eq!(rd_a, -rd_b, epsilon = 1e-12);
        assert_abs_diff_eq!(lo_a, -hi_b, epsilon = 1e-9);
        assert_abs_diff_eq!(hi_a, -lo_b, epsilon = 1e-9);
    }

    #[test]
    fn mn_degenerate_cells_stay_in_range() {
        for (x1, n1, x0, n0) in [(0u64, 10u64, 0u64, 10u64), (10, 10, 0, 10), (10, 10, 10, 10)] {
            let (rd, lo, hi) = miettinen_nurminen_rd(x1, n1, x0, n0, 0.05).unwrap();
            assert!((-1.0..=1.0).contains(&lo) && (-1.0..=1.0).contains(&hi));
            assert!(lo <= rd && rd <= hi);
        }
    }

    #[test]
    fn oracle_estimate_uses_mn_for_binary_groups() {
        let n = 60;
        let y: Vec<f64> = (0..n).map(|i| f64::from(i % 3 == 0)).collect();
        let arm: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let ds = TrialDataset::new(y, arm, vec![vec![0.0; n]], vec!["x".into()]).unwrap();
        let partition = vec![0usize; n];
        let ests = oracle_estimate(&ds, &partition, 1, OutcomeFamily::Binary, 0.05).unwrap();
        assert_eq!(ests.len(), 1);
        let est = &ests[0];
        let x1 = (0..n).filter(|&i| i % 2 == 1 && i % 3 == 0).count() as u64;
        let x0 = (0..n).filter(|&i| i % 2 == 0 && i % 3 == 0).count() as u64;
        let (rd, lo, hi) = miettinen_nurminen_rd(x1, 30, x0, 30, 0.05).unwrap();
        assert_abs_diff_eq!(est.estimate, rd);
        assert_abs_diff_eq!(est.ci_low.unwrap(), lo);
        assert_abs_diff_eq!(est.ci_high.unwrap(), hi);
    }
}
