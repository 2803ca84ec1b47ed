//! Conditional-inference splitting of the patient-level estimates.
//!
//! Each node tests the association between the PLE vector (identity influence
//! function) and every candidate covariate with the standardized linear
//! statistic under the permutation-moment approximation (asymptotic
//! normal/chi-square; no resampling, so fits are deterministic). Bonferroni
//! across candidates, split while the smallest adjusted p-value is below
//! alpha; the cutpoint maximizes the standardized two-sample statistic of the
//! PLEs between children, subject to the minimum node size.

use rayon::prelude::*;

use crate::data::{FilteredView, TrialDataset};
use crate::forest::PleTable;
use crate::stats::two_sided_normal_p;
use crate::tree::{
    SplitKind, SplitRule, SubgroupNode, SubgroupTree, TreeSettings, TreeSource,
};
use crate::data::CovariateKind;

const OBJ_DECREASE_TOL: f64 = 1e-12;

struct Ctx<'a> {
    ds: &'a TrialDataset,
    theta: &'a [f64],
    kept: &'a [usize],
    settings: TreeSettings,
    nodes: Vec<SubgroupNode>,
}

/// Fit a CTREE over the filtered covariates with the PLEs as the response.
/// Constant PLEs (or an empty filter) give a root-only tree.
pub fn fit_ctree_on_ple(
    ple: &PleTable,
    ds: &TrialDataset,
    fv: &FilteredView,
    settings: &TreeSettings,
) -> SubgroupTree {
    if fv.is_empty() {
        return SubgroupTree::root_only(ds.n(), *settings, TreeSource::CtreeOnPle);
    }
    let mut ctx = Ctx {
        ds,
        theta: &ple.theta_hat,
        kept: fv.kept_columns(),
        settings: *settings,
        nodes: Vec::new(),
    };
    let rows: Vec<usize> = (0..ds.n()).collect();
    let root = ctx.grow(rows, 1);
    debug_assert_eq!(root, 0);
    let mut tree = SubgroupTree {
        nodes: ctx.nodes,
        settings: *settings,
        source: TreeSource::CtreeOnPle,
        n: ds.n(),
        k: 0,
    };
    super::mob::renumber_terminals(&mut tree);
    debug_assert!(tree.check_partition(), "CTREE produced an invalid partition");
    tree
}

/// Strasser-Weber conditional moments of the linear statistic T = sum g h:
/// standardized statistic and its two-sided asymptotic p-value. `None` when
/// either the response or the covariate is constant in the node.
fn association_test(g: &[f64], h: &[f64]) -> Option<(f64, f64)> {
    let m = g.len() as f64;
    let g_sum: f64 = g.iter().sum();
    let g_sq: f64 = g.iter().map(|v| v * v).sum();
    let h_bar = h.iter().sum::<f64>() / m;
    let v_h = h.iter().map(|v| (v - h_bar) * (v - h_bar)).sum::<f64>() / m;
    let scale = h.iter().map(|v| v * v).sum::<f64>() / m;
    if v_h <= 1e-14 * (1.0 + scale) {
        return None;
    }
    let t: f64 = g.iter().zip(h).map(|(gi, hi)| gi * hi).sum();
    let mean_t = g_sum * h_bar;
    let var_t = v_h * (m / (m - 1.0) * g_sq - g_sum * g_sum / (m - 1.0));
    if var_t <= 1e-14 * (1.0 + scale) * (1.0 + g_sq) {
        return None;
    }
    let z = (t - mean_t) / var_t.sqrt();
    Some((z.abs(), two_sided_normal_p(z)))
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
        let h: Vec<f64> = rows.iter().map(|&i| self.theta[i]).collect();

        let tests: Vec<Option<(f64, f64)>> = self
            .kept
            .par_iter()
            .map(|&col| {
                let g: Vec<f64> = rows.iter().map(|&i| self.ds.covariate(col)[i]).collect();
                association_test(&g, &h)
            })
            .collect();

        let tested = tests.iter().flatten().count();
        if tested == 0 {
            return None;
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for (slot, test) in tests.iter().enumerate() {
            if let Some((stat, p)) = test {
                let p_adj = (p * tested as f64).min(1.0);
                if best.map_or(true, |(_, bp, _)| p_adj < bp) {
                    best = Some((slot, p_adj, *stat));
                }
            }
        }
        let (slot, p_adj, statistic) = best?;
        if p_adj >= self.settings.alpha {
            return None;
        }
        let column = self.kept[slot];
        self.search_cutpoint(rows, &h, column).map(|kind| ChosenSplit {
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

    /// Cutpoint maximizing the standardized two-sample statistic of the PLEs
    /// between children; requires a strict reduction of the within-node SSE.
    fn search_cutpoint(&self, rows: &[usize], h: &[f64], column: usize) -> Option<SplitKind> {
        let values = self.ds.covariate(column);
        let m = rows.len();
        let min_node = self.settings.min_node;

        let mut order: Vec<usize> = (0..m).collect();
        order.sort_unstable_by(|&a, &b| {
            values[rows[a]]
                .partial_cmp(&values[rows[b]])
                .unwrap()
                .then(rows[a].cmp(&rows[b]))
        });

        let h_total: f64 = h.iter().sum();
        let h_bar = h_total / m as f64;
        let v_h = h.iter().map(|v| (v - h_bar) * (v - h_bar)).sum::<f64>() / m as f64;
        if v_h <= 0.0 {
            return None;
        }

        let mut cum = 0.0f64;
        let mut best: Option<(f64, f64, usize)> = None; // (|z|, threshold, n_left)
        for (pos, &local) in order.iter().enumerate() {
            cum += h[local];
            let n_left = pos + 1;
            if n_left < min_node || m - n_left < min_node || n_left >= m {
                continue;
            }
            let here = values[rows[local]];
            let next = values[rows[order[pos + 1]]];
            if here == next {
                continue;
            }
            let nl = n_left as f64;
            let var = v_h * nl * (m as f64 - nl) / (m as f64 - 1.0);
            if var <= 0.0 {
                continue;
            }
            let z = ((cum - nl * h_bar) / var.sqrt()).abs();
            if best.map_or(true, |(b, _, _)| z > b) {
                best = Some((z, 0.5 * (here + next), n_left));
            }
        }
        let (_, threshold, n_left) = best?;

        // strict SSE decrease check
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        let mut right_sum = 0.0;
        let mut right_sq = 0.0;
        for &local in &order[..n_left] {
            left_sum += h[local];
            left_sq += h[local] * h[local];
        }
        for &local in &order[n_left..] {
            right_sum += h[local];
            right_sq += h[local] * h[local];
        }
        let parent_sse = (left_sq + right_sq) - h_total * h_total / m as f64;
        let child_sse = (left_sq - left_sum * left_sum / n_left as f64)
            + (right_sq - right_sum * right_sum / (m - n_left) as f64);
        if child_sse >= parent_sse - OBJ_DECREASE_TOL * (1.0 + parent_sse.abs()) {
            return None;
        }

        Some(match self.ds.kinds()[column] {
            CovariateKind::Binary => SplitKind::BinaryLevel,
            CovariateKind::Continuous => SplitKind::LessEq(threshold),
        })
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

    fn ple_from(theta: Vec<f64>) -> PleTable {
        let n = theta.len();
        PleTable {
            mu0_hat: vec![0.0; n],
            mu1_hat: theta.clone(),
            theta_hat: theta,
            pi_hat: vec![0.5; n],
        }
    }

    fn dataset_with_columns(columns: Vec<Vec<f64>>, names: Vec<String>) -> TrialDataset {
        let n = columns[0].len();
        TrialDataset::new(
            (0..n).map(|i| i as f64).collect(),
            (0..n).map(|i| (i % 2) as u8).collect(),
            columns,
            names,
        )
        .unwrap()
    }

    #[test]
    fn constant_theta_gives_root_only() {
        let n = 200;
        let mut rng = derive_rng(1, &[0]);
        let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let ds = dataset_with_columns(vec![x], vec!["X1".into()]);
        let tree = fit_ctree_on_ple(
            &ple_from(vec![0.7; n]),
            &ds,
            &FilteredView::all(1),
            &TreeSettings::with_defaults(n),
        );
        assert!(tree.is_root_only());
    }

    #[test]
    fn x3_threshold_recovered_exactly() {
        let n = 800;
        let mut hits = 0;
        for seed in 0..20 {
            let mut rng = derive_rng(100 + seed, &[0]);
            let x3: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let decoy: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let theta: Vec<f64> = x3.iter().map(|&v| f64::from(v > 0.47)).collect();
            let ds = dataset_with_columns(vec![x3.clone(), decoy], vec!["X3".into(), "D".into()]);
            let tree = fit_ctree_on_ple(
                &ple_from(theta),
                &ds,
                &FilteredView::all(2),
                &TreeSettings::with_defaults(n),
            );
            // the cutpoint must land in the empirical gap around 0.47
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for &v in &x3 {
                if v <= 0.47 {
                    lo = lo.max(v);
                } else {
                    hi = hi.min(v);
                }
            }
            if tree.k == 2 && tree.split_columns() == vec![0] {
                if let SubgroupNode::Internal { rule, .. } = &tree.nodes[0] {
                    if let SplitKind::LessEq(c) = rule.kind {
                        if c > lo && c < hi {
                            hits += 1;
                        }
                    }
                }
            }
        }
        assert!(hits >= 19, "exact threshold recovery in {hits}/20");
    }

    #[test]
    fn binary_covariate_splits_by_level() {
        let n = 400;
        let mut rng = derive_rng(7, &[0]);
        let x1: Vec<f64> = (0..n).map(|_| f64::from(rng.random::<f64>() < 0.5)).collect();
        let theta: Vec<f64> = x1.iter().map(|&v| 2.0 * v).collect();
        let ds = dataset_with_columns(vec![x1], vec!["X1".into()]);
        let tree = fit_ctree_on_ple(
            &ple_from(theta),
            &ds,
            &FilteredView::all(1),
            &TreeSettings::with_defaults(n),
        );
        assert_eq!(tree.k, 2);
        match &tree.nodes[0] {
            SubgroupNode::Internal { rule, .. } => assert_eq!(rule.kind, SplitKind::BinaryLevel),
            _ => panic!("expected a split"),
        }
        let rules = tree.extract_rules();
        assert_eq!(rules[0].to_string(), "X1 = 0");
        assert_eq!(rules[1].to_string(), "X1 = 1");
    }

    #[test]
    fn deterministic_and_partition_valid() {
        let n = 600;
        let mut rng = derive_rng(9, &[0]);
        let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let theta: Vec<f64> = (0..n)
            .map(|i| x[i].signum() + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let ds = dataset_with_columns(vec![x, z], vec!["X".into(), "Z".into()]);
        let settings = TreeSettings::with_defaults(n);
        let t1 = fit_ctree_on_ple(&ple_from(theta.clone()), &ds, &FilteredView::all(2), &settings);
        let t2 = fit_ctree_on_ple(&ple_from(theta), &ds, &FilteredView::all(2), &settings);
        assert_eq!(t1, t2);
        assert!(t1.check_partition());
    }
}
