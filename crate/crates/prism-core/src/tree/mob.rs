//! Model-based recursive partitioning on the observed outcomes.
//!
//! Each node fits the two-parameter base model `y ~ intercept + treatment`
//! (least squares for continuous outcomes; binomial likelihood with an
//! identity link for binary outcomes, whose MLE in this model is the arm-0
//! proportion and the risk difference). Per-row score contributions are
//! decorrelated with the node's outer-product information estimate, and each
//! candidate covariate gets a parameter-instability test: a sup-LM statistic
//! of the cumulative score process (breakpoints trimmed to [0.1, 0.9]) for
//! continuous covariates, a chi-square on per-level score sums for binary
//! ones. P-values are Bonferroni-adjusted across the candidates; the node
//! splits on the smallest adjusted p-value below alpha, at the cutpoint
//! minimizing the summed child objective (RSS or negative log-likelihood)
//! subject to the minimum node size.

use rayon::prelude::*;

use crate::data::{CovariateKind, FilteredView, OutcomeFamily, TrialDataset};
use crate::stats::chi2_sf;
use crate::tree::suplm::suplm_pvalue;
use crate::tree::{
    SplitKind, SplitRule, SubgroupNode, SubgroupTree, TreeSettings, TreeSource,
};

/// Relative tolerance for "the split must strictly reduce the objective".
const OBJ_DECREASE_TOL: f64 = 1e-12;

struct Ctx<'a> {
    ds: &'a TrialDataset,
    kept: &'a [usize],
    settings: TreeSettings,
    family: OutcomeFamily,
    nodes: Vec<SubgroupNode>,
}

/// Fit a MOB subgroup tree over the filtered covariates. An empty filter
/// yields a root-only tree.
pub fn fit_mob(
    ds: &TrialDataset,
    fv: &FilteredView,
    settings: &TreeSettings,
    family: OutcomeFamily,
) -> SubgroupTree {
    if fv.is_empty() {
        return SubgroupTree::root_only(ds.n(), *settings, TreeSource::MobObserved);
    }
    let mut ctx = Ctx {
        ds,
        kept: fv.kept_columns(),
        settings: *settings,
        family,
        nodes: Vec::new(),
    };
    let rows: Vec<usize> = (0..ds.n()).collect();
    let root = ctx.grow(rows, 1);
    debug_assert_eq!(root, 0);
    let mut tree = SubgroupTree {
        nodes: ctx.nodes,
        settings: *settings,
        source: TreeSource::MobObserved,
        n: ds.n(),
        k: 0,
    };
    super::mob::renumber_terminals(&mut tree);
    debug_assert!(tree.check_partition(), "MOB produced an invalid partition");
    tree
}

/// Assign 1-based subgroup indices to terminals in left-to-right order.
pub(crate) fn renumber_terminals(tree: &mut SubgroupTree) {
    fn walk(nodes: &mut Vec<SubgroupNode>, at: usize, next: &mut usize) {
        match nodes[at] {
            SubgroupNode::Terminal { .. } => {
                if let SubgroupNode::Terminal { subgroup, .. } = &mut nodes[at] {
                    *subgroup = *next;
                }
                *next += 1;
            }
            SubgroupNode::Internal { left, right, .. } => {
                walk(nodes, left, next);
                walk(nodes, right, next);
            }
        }
    }
    let mut next = 1usize;
    walk(&mut tree.nodes, 0, &mut next);
    tree.k = next - 1;
}

/// Two-parameter node fit: intercept = arm-0 mean, slope = difference of
/// arm means. Identical formulas for least squares and identity-link
/// binomial.
struct NodeFit {
    mean0: f64,
    mean1: f64,
}

fn fit_node(ds: &TrialDataset, rows: &[usize]) -> Option<NodeFit> {
    let mut sum = [0.0f64; 2];
    let mut cnt = [0usize; 2];
    for &i in rows {
        let a = ds.arm()[i] as usize;
        sum[a] += ds.y()[i];
        cnt[a] += 1;
    }
    if cnt[0] == 0 || cnt[1] == 0 {
        return None;
    }
    Some(NodeFit {
        mean0: sum[0] / cnt[0] as f64,
        mean1: sum[1] / cnt[1] as f64,
    })
}

/// Per-row score contributions of the fitted node model.
fn node_scores(
    ds: &TrialDataset,
    rows: &[usize],
    fit: &NodeFit,
    family: OutcomeFamily,
) -> Vec<[f64; 2]> {
    rows.iter()
        .map(|&i| {
            let a = ds.arm()[i];
            let mu = if a == 0 { fit.mean0 } else { fit.mean1 };
            let s = match family {
                OutcomeFamily::Continuous => ds.y()[i] - mu,
                OutcomeFamily::Binary => {
                    // identity-link binomial score; fitted values are arm
                    // proportions, so pure arms contribute exact zeros
                    let var = (mu * (1.0 - mu)).max(1e-10);
                    (ds.y()[i] - mu) / var
                }
            };
            [s, s * f64::from(a)]
        })
        .collect()
}

/// Inverse of the outer-product information (1/m) sum of psi psi^T.
/// None when the score matrix is numerically rank-deficient.
fn inverse_information(scores: &[[f64; 2]]) -> Option<[f64; 3]> {
    let m = scores.len() as f64;
    let (mut j11, mut j12, mut j22) = (0.0f64, 0.0f64, 0.0f64);
    for s in scores {
        j11 += s[0] * s[0];
        j12 += s[0] * s[1];
        j22 += s[1] * s[1];
    }
    j11 /= m;
    j12 /= m;
    j22 /= m;
    let det = j11 * j22 - j12 * j12;
    if j11 <= 0.0 || j22 <= 0.0 || det <= 1e-12 * j11 * j22 {
        return None;
    }
    Some([j22 / det, -j12 / det, j11 / det])
}

fn quad_form(jinv: &[f64; 3], v: &[f64; 2]) -> f64 {
    jinv[0] * v[0] * v[0] + 2.0 * jinv[1] * v[0] * v[1] + jinv[2] * v[1] * v[1]
}

struct CovariateTest {
    p_value: f64,
    statistic: f64,
}

/// Sup-LM over the ordered cumulative score process, trimmed to [0.1, 0.9].
fn suplm_test(
    values: &[f64],
    scores: &[[f64; 2]],
    order: &[usize],
    jinv: &[f64; 3],
) -> Option<CovariateTest> {
    let m = order.len();
    let lo = (0.1 * m as f64).ceil() as usize;
    let hi = (0.9 * m as f64).floor() as usize;
    let mut cum = [0.0f64; 2];
    let mut sup: Option<f64> = None;
    for (pos, &idx) in order.iter().enumerate() {
        cum[0] += scores[idx][0];
        cum[1] += scores[idx][1];
        let i = pos + 1;
        if i < lo || i > hi || i >= m {
            continue;
        }
        // breakpoints only between distinct covariate values
        if values[order[pos]] == values[order[pos + 1]] {
            continue;
        }
        let t = i as f64 / m as f64;
        let stat = quad_form(jinv, &cum) / (m as f64 * t * (1.0 - t));
        sup = Some(sup.map_or(stat, |s: f64| s.max(stat)));
    }
    sup.map(|statistic| CovariateTest {
        p_value: suplm_pvalue(statistic),
        statistic,
    })
}

/// Chi-square test on per-level score sums for a binary covariate
/// (df = 2 parameters x 1 level contrast).
fn level_chi2_test(
    values: &[f64],
    scores: &[[f64; 2]],
    rows_local: &[usize],
    jinv: &[f64; 3],
) -> Option<CovariateTest> {
    let m = rows_local.len() as f64;
    let mut sums = [[0.0f64; 2]; 2];
    let mut counts = [0usize; 2];
    for &idx in rows_local {
        let level = usize::from(values[idx] != 0.0);
        sums[level][0] += scores[idx][0];
        sums[level][1] += scores[idx][1];
        counts[level] += 1;
    }
    if counts[0] == 0 || counts[1] == 0 {
        return None;
    }
    let mut statistic = 0.0;
    for level in 0..2 {
        let pi = counts[level] as f64 / m;
        statistic += quad_form(jinv, &sums[level]) / (m * pi);
    }
    Some(CovariateTest {
        p_value: chi2_sf(statistic, 2.0),
        statistic,
    })
}

/// Node objective: summed within-arm RSS (continuous) or negative binomial
/// log-likelihood at the arm proportions (binary). Computed from per-arm
/// (count, sum, sum of squares).
fn objective(family: OutcomeFamily, cnt: [f64; 2], sum: [f64; 2], sq: [f64; 2]) -> f64 {
    let mut total = 0.0;
    for a in 0..2 {
        if cnt[a] == 0.0 {
            continue;
        }
        match family {
            OutcomeFamily::Continuous => {
                total += sq[a] - sum[a] * sum[a] / cnt[a];
            }
            OutcomeFamily::Binary => {
                let p = sum[a] / cnt[a];
                let mut ll = 0.0;
                if p > 0.0 {
                    ll += sum[a] * p.ln();
                }
                if p < 1.0 {
                    ll += (cnt[a] - sum[a]) * (1.0 - p).ln();
                }
                total -= ll;
            }
        }
    }
    total
}

impl Ctx<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        if let Some(split) = self.find_split(&rows, depth) {
            let col = self.ds.covariate(split.rule.column);
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| split.rule.goes_left(col[i]));
            let slot = self.push_terminal(rows, depth);
            let left = self.grow(left_rows, depth + 1);
            let right = self.grow(right_rows, depth + 1);
            self.nodes[slot] = SubgroupNode::Internal {
                rule: split.rule,
                p_value: split.p_value,
                statistic: split.statistic,
                depth,
                n_rows: split.n_rows,
                left,
                right,
            };
            slot
        } else {
            self.push_terminal(rows, depth)
        }
    }

    fn push_terminal(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        self.nodes.push(SubgroupNode::Terminal {
            subgroup: 0,
            depth,
            rows,
        });
        self.nodes.len() - 1
    }

    fn find_split(&self, rows: &[usize], depth: usize) -> Option<ChosenSplit> {
        let m = rows.len();
        if depth >= self.settings.max_depth || m < 2 * self.settings.min_node {
            return None;
        }
        let fit = fit_node(self.ds, rows)?;
        let scores_by_row = {
            // scores indexed by local position
            node_scores(self.ds, rows, &fit, self.family)
        };
        let jinv = inverse_information(&scores_by_row)?;

        let locals: Vec<usize> = (0..m).collect();
        let tests: Vec<Option<CovariateTest>> = self
            .kept
            .par_iter()
            .map(|&col| {
                let values: Vec<f64> = rows.iter().map(|&i| self.ds.covariate(col)[i]).collect();
                match self.ds.kinds()[col] {
                    CovariateKind::Binary => {
                        level_chi2_test(&values, &scores_by_row, &locals, &jinv)
                    }
                    CovariateKind::Continuous => {
                        let mut order = locals.clone();
                        order.sort_unstable_by(|&a, &b| {
                            values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b))
                        });
                        suplm_test(&values, &scores_by_row, &order, &jinv)
                    }
                }
            })
            .collect();

        let tested = tests.iter().flatten().count();
        if tested == 0 {
            return None;
        }
        let mut best: Option<(usize, f64, f64)> = None; // (kept idx, p_adj, stat)
        for (slot, test) in tests.iter().enumerate() {
            if let Some(t) = test {
                let p_adj = (t.p_value * tested as f64).min(1.0);
                if best.map_or(true, |(_, bp, _)| p_adj < bp) {
                    best = Some((slot, p_adj, t.statistic));
                }
            }
        }
        let (slot, p_adj, statistic) = best?;
        if p_adj >= self.settings.alpha {
            return None;
        }
        let column = self.kept[slot];
        self.search_cutpoint(rows, column)
            .map(|(kind, _)| ChosenSplit {
                rule: SplitRule {
                    column,
                    name: self.ds.names()[column].clone(),
                    kind,
                },
                p_value: p_adj,
                statistic,
                n_rows: m,
            })
    }

    /// Exhaustive admissible-cutpoint search minimizing the summed child
    /// objective; `None` when no admissible cutpoint strictly improves it.
    fn search_cutpoint(&self, rows: &[usize], column: usize) -> Option<(SplitKind, f64)> {
        let values = self.ds.covariate(column);
        let y = self.ds.y();
        let arm = self.ds.arm();
        let m = rows.len();
        let min_node = self.settings.min_node;

        let mut order: Vec<usize> = rows.to_vec();
        order.sort_unstable_by(|&a, &b| {
            values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b))
        });

        let mut tot_cnt = [0.0f64; 2];
        let mut tot_sum = [0.0f64; 2];
        let mut tot_sq = [0.0f64; 2];
        for &i in rows {
            let a = arm[i] as usize;
            tot_cnt[a] += 1.0;
            tot_sum[a] += y[i];
            tot_sq[a] += y[i] * y[i];
        }
        let parent = objective(self.family, tot_cnt, tot_sum, tot_sq);

        let mut cnt = [0.0f64; 2];
        let mut sum = [0.0f64; 2];
        let mut sq = [0.0f64; 2];
        let mut best: Option<(f64, f64)> = None; // (objective, threshold)
        for (pos, &i) in order.iter().enumerate() {
            let a = arm[i] as usize;
            cnt[a] += 1.0;
            sum[a] += y[i];
            sq[a] += y[i] * y[i];
            let n_left = pos + 1;
            if n_left < min_node || m - n_left < min_node || n_left >= m {
                continue;
            }
            let here = values[i];
            let next = values[order[pos + 1]];
            if here == next {
                continue;
            }
            let child = objective(self.family, cnt, sum, sq)
                + objective(
                    self.family,
                    [tot_cnt[0] - cnt[0], tot_cnt[1] - cnt[1]],
                    [tot_sum[0] - sum[0], tot_sum[1] - sum[1]],
                    [tot_sq[0] - sq[0], tot_sq[1] - sq[1]],
                );
            if best.map_or(true, |(b, _)| child < b) {
                best = Some((child, 0.5 * (here + next)));
            }
        }
        let (child_obj, threshold) = best?;
        if child_obj >= parent - OBJ_DECREASE_TOL * (1.0 + parent.abs()) {
            return None;
        }
        let kind = match self.ds.kinds()[column] {
            CovariateKind::Binary => SplitKind::BinaryLevel,
            CovariateKind::Continuous => SplitKind::LessEq(threshold),
        };
        Some((kind, child_obj))
    }
}

struct ChosenSplit {
    rule: SplitRule,
    p_value: f64,
    statistic: f64,
    n_rows: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Treatment effect differs only by binary X1; two continuous decoys.
    /// A large min-node fraction makes further splits inadmissible, so the
    /// fitted tree should be the single X1 split.
    pub(crate) fn x1_effect_dataset(n: usize, noise_sd: f64, seed: u64) -> TrialDataset {
        let mut rng = derive_rng(seed, &[0]);
        let x1: Vec<f64> = (0..n).map(|_| f64::from(rng.random::<f64>() < 0.5)).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let x3: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let arm: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                f64::from(arm[i]) * x1[i]
                    + noise_sd * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        TrialDataset::new(y, arm, vec![x1, x2, x3], vec!["X1".into(), "X2".into(), "X3".into()])
            .unwrap()
    }

    #[test]
    fn single_x1_split_recovered() {
        let mut recovered = 0;
        for seed in 0..20 {
            let ds = x1_effect_dataset(2000, 0.05, seed);
            let settings = TreeSettings {
                alpha: 0.10,
                max_depth: 4,
                min_node: 600,
            };
            let tree = fit_mob(&ds, &FilteredView::all(3), &settings, OutcomeFamily::Continuous);
            if tree.k == 2 && tree.split_columns() == vec![0] {
                recovered += 1;
            }
        }
        assert!(recovered >= 19, "recovered {recovered}/20");
    }

    #[test]
    fn q_zero_gives_root_only() {
        let ds = x1_effect_dataset(100, 0.1, 1);
        let tree = fit_mob(
            &ds,
            &FilteredView::new(vec![], 3).unwrap(),
            &TreeSettings::with_defaults(100),
            OutcomeFamily::Continuous,
        );
        assert!(tree.is_root_only());
        assert_eq!(tree.k, 1);
    }

    #[test]
    fn fits_are_deterministic() {
        let ds = x1_effect_dataset(400, 0.5, 2);
        let settings = TreeSettings::with_defaults(400);
        let t1 = fit_mob(&ds, &FilteredView::all(3), &settings, OutcomeFamily::Continuous);
        let t2 = fit_mob(&ds, &FilteredView::all(3), &settings, OutcomeFamily::Continuous);
        assert_eq!(t1, t2);
    }

    #[test]
    fn binary_outcome_identity_link_splits_on_risk_difference_shift() {
        let n = 2000;
        let mut rng = derive_rng(3, &[0]);
        let x1: Vec<f64> = (0..n).map(|_| f64::from(rng.random::<f64>() < 0.5)).collect();
        let arm: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        // risk difference 0.4 when X1 = 1, none otherwise
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let p = 0.3 + 0.4 * f64::from(arm[i]) * x1[i];
                f64::from(rng.random::<f64>() < p)
            })
            .collect();
        let ds = TrialDataset::new(y, arm, vec![x1], vec!["X1".into()]).unwrap();
        let settings = TreeSettings {
            alpha: 0.10,
            max_depth: 4,
            min_node: 600,
        };
        let tree = fit_mob(&ds, &FilteredView::all(1), &settings, OutcomeFamily::Binary);
        assert_eq!(tree.split_columns(), vec![0]);
        assert_eq!(tree.k, 2);
    }

    #[test]
    fn partition_and_self_consistency_hold() {
        let ds = x1_effect_dataset(900, 0.8, 4);
        let settings = TreeSettings::with_defaults(900);
        let tree = fit_mob(&ds, &FilteredView::all(3), &settings, OutcomeFamily::Continuous);
        assert!(tree.check_partition());
        // re-assigning the training rows reproduces the stored partition
        let assigned = tree.assign_subgroups(&ds);
        for node in &tree.nodes {
            if let SubgroupNode::Terminal { subgroup, rows, .. } = node {
                for &r in rows {
                    assert_eq!(assigned[r], *subgroup);
                }
            }
        }
        let sizes = tree.subgroup_sizes();
        assert_eq!(sizes.iter().sum::<usize>(), 900);
    }
}
