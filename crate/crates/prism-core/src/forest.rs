//! Counterfactual forest: arm-specific bagged regression trees whose
//! cross-predictions difference into per-patient treatment-effect estimates.
//!
//! Trees are standard CART regression trees (variance-reduction splits, leaf
//! mean prediction) grown on bootstrap resamples, with every leaf holding at
//! least `min_node_size` in-bag rows. For 0/1 outcomes the leaf means are
//! probabilities, so the patient-level estimates stay in [-1, 1].

use rand::Rng;
use rayon::prelude::*;

use crate::data::{FilteredView, TrialDataset};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, derive_seed};
use crate::stats::mean;

#[derive(Debug, Clone, Copy)]
pub struct ForestConfig {
    pub num_trees: usize,
    /// Candidate features per split; `None` means `max(q/3, 1)`.
    pub mtry: Option<usize>,
    /// Minimum in-bag rows per leaf. The counterfactual PLE sets this to 10%
    /// of the total trial size (not the arm size).
    pub min_node_size: usize,
}

impl ForestConfig {
    pub fn with_defaults(total_n: usize) -> Self {
        ForestConfig {
            num_trees: 500,
            mtry: None,
            min_node_size: (0.10 * total_n as f64).ceil() as usize,
        }
    }

    fn mtry_for(&self, q: usize) -> usize {
        self.mtry.unwrap_or((q / 3).max(1)).clamp(1, q)
    }
}

#[derive(Debug, Clone)]
enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

/// Bagged regression forest over a fixed feature set.
#[derive(Debug, Clone)]
pub struct ForestModel {
    trees: Vec<Tree>,
    /// Per-tree bootstrap seeds, in tree order.
    pub tree_seeds: Vec<u64>,
    pub config: ForestConfig,
    train_min: f64,
    train_max: f64,
}

impl ForestModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        let pred = sum / self.trees.len() as f64;
        debug_assert!(
            pred >= self.train_min - 1e-12 && pred <= self.train_max + 1e-12,
            "forest prediction outside training outcome range"
        );
        pred
    }

    /// Predict every row of a row-major matrix.
    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }

    pub fn training_range(&self) -> (f64, f64) {
        (self.train_min, self.train_max)
    }
}

struct TreeBuilder<'a> {
    columns: &'a [Vec<f64>],
    y: &'a [f64],
    mtry: usize,
    min_node: usize,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    /// Grow the subtree over `rows` (in-bag indices, with multiplicities)
    /// and return its node index.
    fn grow(&mut self, rows: &mut [usize], rng: &mut impl Rng) -> u32 {
        let n = rows.len();
        let node_mean = mean_of(self.y, rows);
        if n < 2 * self.min_node {
            return self.push_leaf(node_mean);
        }

        let q = self.columns.len();
        let mut candidates = rand::seq::index::sample(rng, q, self.mtry).into_vec();
        candidates.sort_unstable();

        let sum_all: f64 = rows.iter().map(|&i| self.y[i]).sum();
        let sq_all: f64 = rows.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let parent_sse = sq_all - sum_all * sum_all / n as f64;

        let mut best: Option<(f64, usize, f64)> = None; // (child sse, feature, threshold)
        let mut order: Vec<usize> = rows.to_vec();
        for &feature in &candidates {
            let col = &self.columns[feature];
            order.sort_unstable_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap());
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for (k, &i) in order.iter().enumerate() {
                left_sum += self.y[i];
                left_sq += self.y[i] * self.y[i];
                let n_left = k + 1;
                let n_right = n - n_left;
                if n_left < self.min_node || n_right < self.min_node {
                    continue;
                }
                // splits only between distinct feature values
                let here = col[i];
                let next = col[order[k + 1]];
                if here == next {
                    continue;
                }
                let right_sum = sum_all - left_sum;
                let right_sq = sq_all - left_sq;
                let sse = (left_sq - left_sum * left_sum / n_left as f64)
                    + (right_sq - right_sum * right_sum / n_right as f64);
                if best.map_or(true, |(b, _, _)| sse < b) {
                    best = Some((sse, feature, 0.5 * (here + next)));
                }
            }
        }

        match best {
            Some((sse, feature, threshold)) if sse < parent_sse - 1e-12 * (1.0 + parent_sse) => {
                let col = &self.columns[feature];
                let split_at = partition(rows, |i| col[i] <= threshold);
                let (left_rows, right_rows) = rows.split_at_mut(split_at);
                // reserve the slot before recursing so child indices are stable
                let slot = self.push_leaf(node_mean) as usize;
                let left = self.grow(left_rows, rng);
                let right = self.grow(right_rows, rng);
                self.nodes[slot] = TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                slot as u32
            }
            _ => self.push_leaf(node_mean),
        }
    }

    fn push_leaf(&mut self, value: f64) -> u32 {
        self.nodes.push(TreeNode::Leaf { value });
        (self.nodes.len() - 1) as u32
    }
}

fn mean_of(y: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64
}

/// Stable partition in place; returns the count of rows satisfying `pred`.
fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut buf: Vec<usize> = Vec::with_capacity(rows.len());
    buf.extend(rows.iter().copied().filter(|&i| pred(i)));
    let split = buf.len();
    buf.extend(rows.iter().copied().filter(|&i| !pred(i)));
    rows.copy_from_slice(&buf);
    split
}

/// Fit a bagged regression forest of `config.num_trees` trees. Trees train in
/// parallel on per-tree streams derived from the caller's rng, so results do
/// not depend on scheduling.
pub fn fit_regression_forest(
    columns: &[Vec<f64>],
    y: &[f64],
    config: &ForestConfig,
    rng: &mut impl Rng,
) -> Result<ForestModel> {
    if columns.is_empty() {
        return Err(Error::InvalidArg(
            "regression forest needs at least one feature (q >= 1)".into(),
        ));
    }
    let n = y.len();
    if n == 0 || columns.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidArg(
            "feature columns and outcome must share one nonzero length".into(),
        ));
    }
    let base_seed: u64 = rng.random();
    let tree_seeds: Vec<u64> = (0..config.num_trees)
        .map(|t| derive_seed(base_seed, &[t as u64]))
        .collect();
    let mtry = config.mtry_for(columns.len());
    let min_node = config.min_node_size.max(1);

    let trees: Vec<Tree> = tree_seeds
        .par_iter()
        .map(|&seed| {
            let mut trng = derive_rng(seed, &[]);
            let mut rows: Vec<usize> = (0..n).map(|_| trng.random_range(0..n)).collect();
            let mut builder = TreeBuilder {
                columns,
                y,
                mtry,
                min_node,
                nodes: Vec::new(),
            };
            let root = builder.grow(&mut rows, &mut trng);
            debug_assert_eq!(root, 0);
            Tree {
                nodes: builder.nodes,
            }
        })
        .collect();

    let train_min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let train_max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ForestModel {
        trees,
        tree_seeds,
        config: *config,
        train_min,
        train_max,
    })
}

/// Per-patient counterfactual estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct PleTable {
    pub mu0_hat: Vec<f64>,
    pub mu1_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub pi_hat: Vec<f64>,
}

impl PleTable {
    pub fn n(&self) -> usize {
        self.theta_hat.len()
    }
}

/// Counterfactual PLE: a forest per treatment arm, each predicting all
/// patients; the difference is the patient-level estimate. The propensity is
/// the marginal arm-1 rate (randomized-trial rule). With an empty filter
/// (q = 0) the PLE degenerates to the constant arm-mean difference.
pub fn counterfactual_ple<R: Rng>(
    ds: &TrialDataset,
    fv: &FilteredView,
    config: &ForestConfig,
    rng: &mut R,
) -> Result<PleTable> {
    let n = ds.n();
    for arm in [0u8, 1u8] {
        if ds.n_in_arm(arm) == 0 {
            return Err(Error::EmptyArm { arm });
        }
    }
    let pi = ds.arm().iter().map(|&a| a as usize).sum::<usize>() as f64 / n as f64;
    let pi_hat = vec![pi; n];

    if fv.is_empty() {
        let mean_arm = |arm: u8| {
            let rows = ds.arm_rows(arm);
            rows.iter().map(|&i| ds.y()[i]).sum::<f64>() / rows.len() as f64
        };
        let (m0, m1) = (mean_arm(0), mean_arm(1));
        return Ok(PleTable {
            mu0_hat: vec![m0; n],
            mu1_hat: vec![m1; n],
            theta_hat: vec![m1 - m0; n],
            pi_hat,
        });
    }

    // row-major filtered covariates for prediction
    let kept = fv.kept_columns();
    let all_rows: Vec<Vec<f64>> = (0..n)
        .map(|i| kept.iter().map(|&j| ds.covariate(j)[i]).collect())
        .collect();

    let fit_arm = |arm: u8, rng: &mut R| -> Result<Vec<f64>> {
        let rows = ds.arm_rows(arm);
        let columns: Vec<Vec<f64>> = kept
            .iter()
            .map(|&j| rows.iter().map(|&i| ds.covariate(j)[i]).collect())
            .collect();
        let y: Vec<f64> = rows.iter().map(|&i| ds.y()[i]).collect();
        let forest = fit_regression_forest(&columns, &y, config, rng)?;
        Ok(forest.predict_rows(&all_rows))
    };

    let mu0_hat = fit_arm(0, rng)?;
    let mu1_hat = fit_arm(1, rng)?;
    let theta_hat: Vec<f64> = mu1_hat
        .iter()
        .zip(&mu0_hat)
        .map(|(m1, m0)| m1 - m0)
        .collect();
    Ok(PleTable {
        mu0_hat,
        mu1_hat,
        theta_hat,
        pi_hat,
    })
}

/// Arm means usable as the q = 0 fallback elsewhere.
pub fn arm_means(ds: &TrialDataset) -> (f64, f64) {
    let collect = |arm: u8| -> Vec<f64> { ds.arm_rows(arm).iter().map(|&i| ds.y()[i]).collect() };
    (mean(&collect(0)), mean(&collect(1)))
}
