//! Elastic-net covariate filter.
//!
//! Cyclic coordinate descent over a descending lambda path with 10-fold
//! cross-validation; the outcome is regressed on the covariates only (the
//! treatment indicator is excluded) and covariates with nonzero coefficients
//! at the CV-minimum lambda are retained. Binary outcomes use the logistic
//! deviance solved by iteratively reweighted least squares with an inner
//! coordinate descent.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{FilteredView, TrialDataset};
use crate::error::{Error, Result};

const N_LAMBDA: usize = 100;
const N_FOLDS: usize = 10;
const CD_TOL: f64 = 1e-10;
const CD_TOL_CV: f64 = 1e-6;
const CD_MAX_SWEEPS: usize = 10_000;
const IRLS_MAX_ITER: usize = 50;
const PROB_CLAMP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnetFamily {
    Gaussian,
    Binomial,
}

/// Column means and population standard deviations used to standardize the
/// design. Constant columns get sd 0 and are pinned to coefficient zero.
#[derive(Debug, Clone)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Scaler {
    fn fit(columns: &[Vec<f64>]) -> Scaler {
        let means: Vec<f64> = columns
            .iter()
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        let sds: Vec<f64> = columns
            .iter()
            .zip(&means)
            .map(|(c, &m)| {
                let v = c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / c.len() as f64;
                v.sqrt()
            })
            .collect();
        Scaler { means, sds }
    }

    fn transform(&self, columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
        columns
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if self.sds[j] > 0.0 {
                    c.iter().map(|x| (x - self.means[j]) / self.sds[j]).collect()
                } else {
                    vec![0.0; c.len()]
                }
            })
            .collect()
    }
}

/// Elastic-net path fit with cross-validation.
#[derive(Debug, Clone)]
pub struct ElasticNetFit {
    pub family: EnetFamily,
    pub alpha: f64,
    /// Strictly decreasing lambda grid; the first entry is lambda_max.
    pub lambda_grid: Vec<f64>,
    /// Coefficients on the standardized-predictor scale, one vector per lambda.
    pub coefficients: Vec<Vec<f64>>,
    /// Intercepts on the standardized-predictor scale.
    pub intercepts: Vec<f64>,
    /// Mean cross-validated deviance per lambda (gaussian: MSE).
    pub cv_mean: Vec<f64>,
    /// Standard error of the CV mean per lambda.
    pub cv_se: Vec<f64>,
    /// Index of the chosen lambda (CV minimum; ties go to the larger lambda).
    pub chosen: usize,
    pub scaler: Scaler,
}

impl ElasticNetFit {
    pub fn chosen_lambda(&self) -> f64 {
        self.lambda_grid[self.chosen]
    }

    pub fn chosen_coefficients(&self) -> &[f64] {
        &self.coefficients[self.chosen]
    }

    /// Coefficients mapped back to the original predictor scale, with the
    /// matching intercept.
    pub fn coefficients_original(&self, idx: usize) -> (f64, Vec<f64>) {
        let beta_std = &self.coefficients[idx];
        let mut beta = vec![0.0; beta_std.len()];
        let mut intercept = self.intercepts[idx];
        for j in 0..beta.len() {
            if self.scaler.sds[j] > 0.0 {
                beta[j] = beta_std[j] / self.scaler.sds[j];
                intercept -= beta[j] * self.scaler.means[j];
            }
        }
        (intercept, beta)
    }

    /// Largest subgradient violation of the penalized stationarity conditions
    /// at path index `idx`, evaluated on the raw data.
    pub fn max_kkt_residual(&self, columns: &[Vec<f64>], y: &[f64], idx: usize) -> f64 {
        let xs = self.scaler.transform(columns);
        let n = y.len() as f64;
        let beta = &self.coefficients[idx];
        let lambda = self.lambda_grid[idx];
        let eta: Vec<f64> = (0..y.len())
            .map(|i| {
                self.intercepts[idx] + xs.iter().zip(beta).map(|(c, b)| c[i] * b).sum::<f64>()
            })
            .collect();
        // "residual" in the gradient sense: y - mu(eta)
        let grad_resid: Vec<f64> = match self.family {
            EnetFamily::Gaussian => y.iter().zip(&eta).map(|(yi, ei)| yi - ei).collect(),
            EnetFamily::Binomial => y
                .iter()
                .zip(&eta)
                .map(|(yi, ei)| yi - 1.0 / (1.0 + (-ei).exp()))
                .collect(),
        };
        let mut worst = 0.0f64;
        for j in 0..beta.len() {
            if self.scaler.sds[j] == 0.0 {
                continue;
            }
            let g: f64 = xs[j].iter().zip(&grad_resid).map(|(x, r)| x * r).sum::<f64>() / n;
            let resid = if beta[j] != 0.0 {
                (g - lambda * (1.0 - self.alpha) * beta[j]
                    - lambda * self.alpha * beta[j].signum())
                .abs()
            } else {
                (g.abs() - lambda * self.alpha).max(0.0)
            };
            worst = worst.max(resid);
        }
        worst
    }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

fn check_finite(columns: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if y.iter().any(|v| !v.is_finite())
        || columns.iter().any(|c| c.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::numeric("elastic_net", "non-finite input"));
    }
    Ok(())
}

fn lambda_sequence(lambda_max: f64, n: usize, p: usize) -> Vec<f64> {
    let eps: f64 = if p > n { 0.01 } else { 0.001 };
    let ratio = eps.powf(1.0 / (N_LAMBDA as f64 - 1.0));
    (0..N_LAMBDA)
        .map(|k| lambda_max * ratio.powi(k as i32))
        .collect()
}

/// Penalized gaussian objective on standardized data (for the monotonicity
/// assertion).
fn gaussian_objective(resid: &[f64], beta: &[f64], alpha: f64, lambda: f64) -> f64 {
    let n = resid.len() as f64;
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let l2: f64 = beta.iter().map(|b| b * b).sum();
    rss / (2.0 * n) + lambda * (alpha * l1 + (1.0 - alpha) / 2.0 * l2)
}

/// One gaussian coordinate-descent solve at a fixed lambda. `beta` and
/// `resid` carry the warm start and are updated in place; `resid` must equal
/// `y_centered - X beta` on entry. Full sweeps alternate with sweeps over the
/// current active set until a full sweep converges.
fn gaussian_cd(
    xs: &[Vec<f64>],
    active: &[bool],
    alpha: f64,
    lambda: f64,
    tol: f64,
    beta: &mut [f64],
    resid: &mut [f64],
) {
    let n = resid.len() as f64;
    let inv_n = 1.0 / n;
    let denom = 1.0 + lambda * (1.0 - alpha);
    let gamma = lambda * alpha;
    let mut prev_obj = f64::INFINITY;

    let sweep = |full: bool, beta: &mut [f64], resid: &mut [f64]| -> f64 {
        let mut max_delta = 0.0f64;
        for j in 0..beta.len() {
            if !active[j] || (!full && beta[j] == 0.0) {
                continue;
            }
            let xj = &xs[j];
            let mut dot = 0.0;
            for i in 0..resid.len() {
                dot += xj[i] * resid[i];
            }
            let rho = beta[j] + dot * inv_n;
            let new = soft_threshold(rho, gamma) / denom;
            let delta = new - beta[j];
            if delta != 0.0 {
                for i in 0..resid.len() {
                    resid[i] -= xj[i] * delta;
                }
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        max_delta
    };

    for _round in 0..CD_MAX_SWEEPS {
        let full_delta = sweep(true, beta, resid);
        if cfg!(debug_assertions) {
            let obj = gaussian_objective(resid, beta, alpha, lambda);
            debug_assert!(
                obj <= prev_obj + 1e-10,
                "coordinate descent objective increased: {prev_obj} -> {obj}"
            );
            prev_obj = obj;
        }
        if full_delta < tol {
            return;
        }
        for _inner in 0..CD_MAX_SWEEPS {
            if sweep(false, beta, resid) < tol {
                break;
            }
        }
    }
}

/// Weighted coordinate descent for one IRLS inner problem. `resid` is the
/// working residual `z - b0 - X beta`.
#[allow(clippy::too_many_arguments)]
fn weighted_cd(
    xs: &[Vec<f64>],
    active: &[bool],
    w: &[f64],
    alpha: f64,
    lambda: f64,
    tol: f64,
    beta: &mut [f64],
    b0: &mut f64,
    resid: &mut [f64],
) {
    let n = resid.len() as f64;
    let wsum: f64 = w.iter().sum();
    let xtwx: Vec<f64> = xs
        .iter()
        .map(|c| c.iter().zip(w).map(|(x, wi)| wi * x * x).sum::<f64>() / n)
        .collect();
    for _sweep in 0..CD_MAX_SWEEPS {
        let mut max_delta = 0.0f64;
        for j in 0..beta.len() {
            if !active[j] || xtwx[j] <= 0.0 {
                continue;
            }
            let xj = &xs[j];
            let mut rho = xtwx[j] * beta[j];
            for i in 0..resid.len() {
                rho += w[i] * xj[i] * resid[i] / n;
            }
            let new = soft_threshold(rho, lambda * alpha) / (xtwx[j] + lambda * (1.0 - alpha));
            let delta = new - beta[j];
            if delta != 0.0 {
                for i in 0..resid.len() {
                    resid[i] -= xj[i] * delta;
                }
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        // unpenalized intercept
        let shift: f64 = w.iter().zip(resid.iter()).map(|(wi, r)| wi * r).sum::<f64>() / wsum;
        if shift != 0.0 {
            *b0 += shift;
            for r in resid.iter_mut() {
                *r -= shift;
            }
            max_delta = max_delta.max(shift.abs());
        }
        if max_delta < tol {
            break;
        }
    }
}

fn binomial_deviance(y: &[f64], p: &[f64]) -> f64 {
    -2.0 * y
        .iter()
        .zip(p)
        .map(|(yi, pi)| {
            let pc = pi.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            yi * pc.ln() + (1.0 - yi) * (1.0 - pc).ln()
        })
        .sum::<f64>()
}

struct PathFit {
    coefficients: Vec<Vec<f64>>,
    intercepts: Vec<f64>,
}

fn fit_path(
    xs: &[Vec<f64>],
    active: &[bool],
    y: &[f64],
    family: EnetFamily,
    alpha: f64,
    lambdas: &[f64],
    tol: f64,
) -> PathFit {
    match family {
        EnetFamily::Gaussian => {
            let ybar = y.iter().sum::<f64>() / y.len() as f64;
            let yc: Vec<f64> = y.iter().map(|v| v - ybar).collect();
            let mut beta = vec![0.0; xs.len()];
            let mut resid = yc;
            let mut coefficients = Vec::with_capacity(lambdas.len());
            for &lambda in lambdas {
                gaussian_cd(xs, active, alpha, lambda, tol, &mut beta, &mut resid);
                coefficients.push(beta.clone());
            }
            PathFit {
                intercepts: vec![ybar; lambdas.len()],
                coefficients,
            }
        }
        EnetFamily::Binomial => {
            let ybar = y.iter().sum::<f64>() / y.len() as f64;
            let ybar = ybar.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            let mut beta = vec![0.0; xs.len()];
            let mut b0 = (ybar / (1.0 - ybar)).ln();
            let mut coefficients = Vec::with_capacity(lambdas.len());
            let mut intercepts = Vec::with_capacity(lambdas.len());
            let n = y.len();
            for &lambda in lambdas {
                let mut dev_prev = f64::INFINITY;
                for _newton in 0..IRLS_MAX_ITER {
                    let eta: Vec<f64> = (0..n)
                        .map(|i| b0 + xs.iter().zip(&beta).map(|(c, b)| c[i] * b).sum::<f64>())
                        .collect();
                    let p: Vec<f64> = eta.iter().map(|e| 1.0 / (1.0 + (-e).exp())).collect();
                    let dev = binomial_deviance(y, &p);
                    if (dev_prev - dev).abs() < 1e-9 * (dev.abs() + 1e-9) {
                        break;
                    }
                    dev_prev = dev;
                    let w: Vec<f64> = p
                        .iter()
                        .map(|pi| (pi * (1.0 - pi)).max(1e-5))
                        .collect();
                    // working residual z - eta where z = eta + (y - p)/w
                    let mut resid: Vec<f64> = (0..n).map(|i| (y[i] - p[i]) / w[i]).collect();
                    weighted_cd(xs, active, &w, alpha, lambda, tol, &mut beta, &mut b0, &mut resid);
                }
                coefficients.push(beta.clone());
                intercepts.push(b0);
            }
            PathFit {
                coefficients,
                intercepts,
            }
        }
    }
}

fn lambda_max(xs: &[Vec<f64>], active: &[bool], y: &[f64], _family: EnetFamily, alpha: f64) -> f64 {
    // for both families the null-model gradient is (1/n) <x_j, y - ybar>
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    let resid: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    let mut max_grad = 0.0f64;
    for (j, c) in xs.iter().enumerate() {
        if !active[j] {
            continue;
        }
        let g: f64 = c.iter().zip(&resid).map(|(x, r)| x * r).sum::<f64>() / n;
        max_grad = max_grad.max(g.abs());
    }
    // guard the pure-ridge end of the alpha range the way glmnet does
    max_grad / alpha.max(1e-3)
}

/// Prediction deviance on held-out rows.
fn holdout_deviance(
    xs: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    family: EnetFamily,
    intercept: f64,
    beta: &[f64],
) -> f64 {
    let mut total = 0.0;
    for &i in rows {
        let eta = intercept + xs.iter().zip(beta).map(|(c, b)| c[i] * b).sum::<f64>();
        total += match family {
            EnetFamily::Gaussian => (y[i] - eta) * (y[i] - eta),
            EnetFamily::Binomial => {
                let p = (1.0 / (1.0 + (-eta).exp())).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                -2.0 * (y[i] * p.ln() + (1.0 - y[i]) * (1.0 - p).ln())
            }
        };
    }
    total
}

/// Fold assignment: a pure function of (n, rng state).
fn cv_folds(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut fold = vec![0usize; n];
    for (pos, &row) in order.iter().enumerate() {
        fold[row] = pos % k;
    }
    fold
}

/// Fit the elastic net of `y` on the covariate columns with a 10-fold
/// cross-validated lambda path.
pub fn fit_elastic_net(
    columns: &[Vec<f64>],
    y: &[f64],
    family: EnetFamily,
    alpha: f64,
    rng: &mut impl Rng,
) -> Result<ElasticNetFit> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArg(format!(
            "elastic net alpha must be in [0, 1], got {alpha}"
        )));
    }
    check_finite(columns, y)?;
    let n = y.len();
    if n <= N_FOLDS {
        return Err(Error::InvalidArg(format!(
            "need more than {N_FOLDS} rows for {N_FOLDS}-fold cross-validation, got {n}"
        )));
    }

    let scaler = Scaler::fit(columns);
    let xs = scaler.transform(columns);
    let active: Vec<bool> = scaler.sds.iter().map(|&s| s > 0.0).collect();
    let p = columns.len();

    let lmax = lambda_max(&xs, &active, y, family, alpha);
    if lmax <= 0.0 {
        // no covariate carries any gradient (e.g., all constant): all-zero fit
        let lambdas = vec![1.0];
        return Ok(ElasticNetFit {
            family,
            alpha,
            coefficients: vec![vec![0.0; p]],
            intercepts: vec![y.iter().sum::<f64>() / n as f64],
            cv_mean: vec![f64::INFINITY],
            cv_se: vec![0.0],
            chosen: 0,
            lambda_grid: lambdas,
            scaler,
        });
    }
    let lambdas = lambda_sequence(lmax, n, p);

    let full = fit_path(&xs, &active, y, family, alpha, &lambdas, CD_TOL);

    let fold_of = cv_folds(n, N_FOLDS, rng);
    let mut fold_dev = vec![[0.0f64; N_FOLDS]; lambdas.len()];
    let fold_sizes: Vec<usize> = (0..N_FOLDS)
        .map(|f| fold_of.iter().filter(|&&x| x == f).count())
        .collect();
    for f in 0..N_FOLDS {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        let xs_train: Vec<Vec<f64>> = xs
            .iter()
            .map(|c| train.iter().map(|&i| c[i]).collect())
            .collect();
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let fit = fit_path(&xs_train, &active, &y_train, family, alpha, &lambdas, CD_TOL_CV);
        for (l, beta) in fit.coefficients.iter().enumerate() {
            fold_dev[l][f] = holdout_deviance(&xs, y, &test, family, fit.intercepts[l], beta);
        }
    }

    let mut cv_mean = Vec::with_capacity(lambdas.len());
    let mut cv_se = Vec::with_capacity(lambdas.len());
    for devs in &fold_dev {
        let per_obs: Vec<f64> = devs
            .iter()
            .zip(&fold_sizes)
            .map(|(d, &s)| d / s as f64)
            .collect();
        let m = per_obs.iter().sum::<f64>() / N_FOLDS as f64;
        let var = per_obs.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
            / (N_FOLDS as f64 - 1.0);
        cv_mean.push(m);
        cv_se.push((var / N_FOLDS as f64).sqrt());
    }

    let mut chosen = 0usize;
    for (l, &m) in cv_mean.iter().enumerate() {
        if m < cv_mean[chosen] {
            chosen = l;
        }
    }

    Ok(ElasticNetFit {
        family,
        alpha,
        lambda_grid: lambdas,
        coefficients: full.coefficients,
        intercepts: full.intercepts,
        cv_mean,
        cv_se,
        chosen,
        scaler,
    })
}

/// Solve at one user-specified lambda (cold start). Used for checking the
/// path against direct solutions and for the unpenalized limit.
pub fn fit_at_lambda(
    columns: &[Vec<f64>],
    y: &[f64],
    family: EnetFamily,
    alpha: f64,
    lambda: f64,
) -> Result<(f64, Vec<f64>, Scaler)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArg(format!(
            "elastic net alpha must be in [0, 1], got {alpha}"
        )));
    }
    check_finite(columns, y)?;
    let scaler = Scaler::fit(columns);
    let xs = scaler.transform(columns);
    let active: Vec<bool> = scaler.sds.iter().map(|&s| s > 0.0).collect();
    let fit = fit_path(&xs, &active, y, family, alpha, &[lambda], CD_TOL);
    Ok((fit.intercepts[0], fit.coefficients[0].clone(), scaler))
}

/// Step-1 filter: regress the outcome on the covariates (treatment excluded)
/// and keep the columns with nonzero coefficients at the chosen lambda.
pub fn filter_covariates(
    ds: &TrialDataset,
    family: EnetFamily,
    alpha: f64,
    rng: &mut impl Rng,
) -> Result<(FilteredView, ElasticNetFit)> {
    let columns: Vec<Vec<f64>> = (0..ds.n_covariates())
        .map(|j| ds.covariate(j).to_vec())
        .collect();
    let fit = fit_elastic_net(&columns, ds.y(), family, alpha, rng)?;
    let kept: Vec<usize> = fit
        .chosen_coefficients()
        .iter()
        .enumerate()
        .filter(|(_, &b)| b != 0.0)
        .map(|(j, _)| j)
        .collect();
    let view = FilteredView::new(kept, ds.n_covariates())?;
    Ok((view, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use nalgebra::{DMatrix, DVector};
    use rand_distr::StandardNormal;

    fn ols_oracle(columns: &[Vec<f64>], y: &[f64]) -> (f64, Vec<f64>) {
        let n = y.len();
        let p = columns.len();
        let mut design = DMatrix::zeros(n, p + 1);
        for i in 0..n {
            design[(i, 0)] = 1.0;
            for j in 0..p {
                design[(i, j + 1)] = columns[j][i];
            }
        }
        let yv = DVector::from_column_slice(y);
        let xtx = design.transpose() * &design;
        let xty = design.transpose() * yv;
        let sol = xtx.lu().solve(&xty).expect("well-conditioned design");
        (sol[0], (0..p).map(|j| sol[j + 1]).collect())
    }

    fn random_fixture(n: usize, p: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = derive_rng(seed, &[0]);
        let columns: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                1.0 + 0.8 * columns[0][i] - 0.5 * columns[1 % p][i]
                    + 0.5 * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        (columns, y)
    }

    #[test]
    fn zero_lambda_matches_ols_to_1e8() {
        let (columns, y) = random_fixture(120, 3, 1);
        let (b0, beta_std, scaler) = fit_at_lambda(&columns, &y, EnetFamily::Gaussian, 0.5, 0.0).unwrap();
        let mut beta = vec![0.0; 3];
        let mut intercept = b0;
        for j in 0..3 {
            beta[j] = beta_std[j] / scaler.sds[j];
            intercept -= beta[j] * scaler.means[j];
        }
        let (b0_ols, beta_ols) = ols_oracle(&columns, &y);
        assert!((intercept - b0_ols).abs() < 1e-8, "{intercept} vs {b0_ols}");
        for j in 0..3 {
            assert!(
                (beta[j] - beta_ols[j]).abs() < 1e-8,
                "beta[{j}]: {} vs {}",
                beta[j],
                beta_ols[j]
            );
        }
    }

    /// Orthonormal design in the 1/n inner product: +-1 Hadamard-style
    /// columns, so standardization is the identity.
    fn orthonormal_fixture() -> (Vec<Vec<f64>>, Vec<f64>) {
        let h = [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, 1.0],
            [1.0, 1.0, -1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, 1.0],
            [-1.0, -1.0, 1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, -1.0],
        ];
        let columns: Vec<Vec<f64>> = (0..3).map(|j| h.iter().map(|r| r[j]).collect()).collect();
        let y = vec![2.0, 0.4, 1.1, -0.6, 0.9, -1.2, 0.3, -0.8];
        (columns, y)
    }

    #[test]
    fn orthonormal_lasso_is_soft_thresholding() {
        let (columns, y) = orthonormal_fixture();
        let n = y.len() as f64;
        let ybar = y.iter().sum::<f64>() / n;
        // OLS coefficient in the orthonormal design = (1/n) <x_j, y - ybar>
        let rho: Vec<f64> = columns
            .iter()
            .map(|c| c.iter().zip(&y).map(|(x, yi)| x * (yi - ybar)).sum::<f64>() / n)
            .collect();
        for lambda in [0.05, 0.2, 0.6] {
            let (_, beta, _) = fit_at_lambda(&columns, &y, EnetFamily::Gaussian, 1.0, lambda).unwrap();
            for j in 0..3 {
                let expected = soft_threshold(rho[j], lambda);
                assert!(
                    (beta[j] - expected).abs() < 1e-6,
                    "lambda={lambda}, j={j}: {} vs {}",
                    beta[j],
                    expected
                );
                // grid-search oracle on the separable objective
                let mut best = f64::INFINITY;
                let mut argmin = 0.0;
                let mut b = -2.0;
                while b <= 2.0 {
                    let f = 0.5 * b * b - rho[j] * b + lambda * b.abs();
                    if f < best {
                        best = f;
                        argmin = b;
                    }
                    b += 1e-4;
                }
                assert!(
                    (expected - argmin).abs() < 2e-4,
                    "grid oracle disagrees with soft threshold: {argmin} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn path_is_descending_and_starts_all_zero() {
        let (columns, y) = random_fixture(150, 6, 2);
        let mut rng = derive_rng(2, &[1]);
        let fit = fit_elastic_net(&columns, &y, EnetFamily::Gaussian, 0.5, &mut rng).unwrap();
        assert!(fit
            .lambda_grid
            .windows(2)
            .all(|w| w[0] > w[1]));
        assert!(fit.coefficients[0].iter().all(|&b| b == 0.0));
        assert_eq!(fit.lambda_grid.len(), 100);
    }

    #[test]
    fn kkt_residuals_hold_along_the_path() {
        let (columns, y) = random_fixture(150, 6, 3);
        let mut rng = derive_rng(3, &[1]);
        let fit = fit_elastic_net(&columns, &y, EnetFamily::Gaussian, 0.5, &mut rng).unwrap();
        for idx in 0..fit.lambda_grid.len() {
            let r = fit.max_kkt_residual(&columns, &y, idx);
            assert!(r <= 1e-6, "KKT residual {r} at index {idx}");
        }
    }

    #[test]
    fn warm_path_matches_cold_start() {
        let (columns, y) = random_fixture(150, 6, 4);
        let mut rng = derive_rng(4, &[1]);
        let fit = fit_elastic_net(&columns, &y, EnetFamily::Gaussian, 0.5, &mut rng).unwrap();
        for idx in [10, 50, 90] {
            let lambda = fit.lambda_grid[idx];
            let (_, cold, _) =
                fit_at_lambda(&columns, &y, EnetFamily::Gaussian, 0.5, lambda).unwrap();
            for j in 0..columns.len() {
                assert!(
                    (fit.coefficients[idx][j] - cold[j]).abs() < 1e-6,
                    "idx {idx} j {j}"
                );
            }
        }
    }

    #[test]
    fn alpha_out_of_range_and_nonfinite_rejected() {
        let (columns, y) = random_fixture(50, 2, 5);
        let mut rng = derive_rng(5, &[1]);
        assert!(fit_elastic_net(&columns, &y, EnetFamily::Gaussian, 1.5, &mut rng).is_err());
        let mut bad = columns.clone();
        bad[0][3] = f64::NAN;
        assert!(fit_elastic_net(&bad, &y, EnetFamily::Gaussian, 0.5, &mut rng).is_err());
    }

    #[test]
    fn perfect_predictor_is_retained_and_constant_never() {
        let mut rng = derive_rng(6, &[0]);
        let n = 100;
        let x0: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let constant = vec![3.0; n];
        let y = x0.clone();
        let ds = crate::data::TrialDataset::new(
            y,
            (0..n).map(|i| (i % 2) as u8).collect(),
            vec![x0, constant],
            vec!["x0".into(), "const".into()],
        )
        .unwrap();
        let mut rng = derive_rng(6, &[1]);
        let (view, _) = filter_covariates(&ds, EnetFamily::Gaussian, 0.5, &mut rng).unwrap();
        assert!(view.kept_columns().contains(&0));
        assert!(!view.kept_columns().contains(&1));
    }

    #[test]
    fn binomial_filter_keeps_strong_signal() {
        let mut rng = derive_rng(7, &[0]);
        let n = 400;
        let x0: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let x1: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let p = 1.0 / (1.0 + (-(2.0 * x0[i])).exp());
                f64::from(rng.random::<f64>() < p)
            })
            .collect();
        let columns = vec![x0, x1];
        let mut rng2 = derive_rng(7, &[1]);
        let fit = fit_elastic_net(&columns, &y, EnetFamily::Binomial, 0.5, &mut rng2).unwrap();
        assert!(fit.chosen_coefficients()[0] != 0.0);
        // KKT at the chosen lambda for the logistic objective
        let r = fit.max_kkt_residual(&columns, &y, fit.chosen);
        assert!(r <= 1e-5, "binomial KKT residual {r}");
    }
}

