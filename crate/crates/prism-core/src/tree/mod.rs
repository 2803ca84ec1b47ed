//! Rule-based subgroup trees.
//!
//! Two tree builders share the types here: model-based recursive partitioning
//! on the observed outcomes ([`mob::fit_mob`]) and conditional-inference
//! splitting of the patient-level estimates ([`ctree::fit_ctree_on_ple`]).
//! Terminal nodes partition the rows exactly; a root-only tree means no
//! subgroups were found. Tree search uses no randomness: p-values come from
//! closed-form asymptotic approximations, so fits are deterministic given the
//! data and settings.

pub mod ctree;
pub mod mob;
pub mod suplm;

use std::collections::BTreeMap;
use std::fmt;

use crate::data::TrialDataset;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TreeSettings {
    /// Significance level for the Bonferroni-adjusted split tests.
    pub alpha: f64,
    /// Maximum node depth; the root has depth 1 and nodes at `max_depth` are
    /// terminal.
    pub max_depth: usize,
    /// Minimum rows per terminal node (both children of every split).
    pub min_node: usize,
}

impl TreeSettings {
    /// Reference settings: alpha 0.10, depth 4, min node 10% of n.
    pub fn with_defaults(n: usize) -> Self {
        TreeSettings {
            alpha: 0.10,
            max_depth: 4,
            min_node: (0.10 * n as f64).ceil() as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeSource {
    MobObserved,
    CtreeOnPle,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    /// Left child: x <= threshold; right child: x > threshold.
    LessEq(f64),
    /// Left child: x = 0; right child: x = 1.
    BinaryLevel,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitRule {
    /// Covariate index into the dataset's covariate table.
    pub column: usize,
    pub name: String,
    pub kind: SplitKind,
}

impl SplitRule {
    /// True if the row routes to the left child.
    pub fn goes_left(&self, value: f64) -> bool {
        match self.kind {
            SplitKind::LessEq(c) => value <= c,
            SplitKind::BinaryLevel => value == 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SubgroupNode {
    Internal {
        rule: SplitRule,
        /// Bonferroni-adjusted p-value of the instability/association test
        /// that produced the split.
        p_value: f64,
        statistic: f64,
        depth: usize,
        n_rows: usize,
        left: usize,
        right: usize,
    },
    Terminal {
        /// 1-based subgroup index, in left-to-right order.
        subgroup: usize,
        depth: usize,
        /// Training-row indices landing here.
        rows: Vec<usize>,
    },
}

/// A fitted subgroup tree over one dataset's rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupTree {
    pub nodes: Vec<SubgroupNode>,
    pub settings: TreeSettings,
    pub source: TreeSource,
    /// Number of training rows.
    pub n: usize,
    /// Number of terminal subgroups (1 for a root-only tree).
    pub k: usize,
}

impl SubgroupTree {
    pub fn is_root_only(&self) -> bool {
        self.k == 1 && self.nodes.len() == 1
    }

    /// Subgroup sizes indexed by k - 1.
    pub fn subgroup_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for node in &self.nodes {
            if let SubgroupNode::Terminal { subgroup, rows, .. } = node {
                sizes[subgroup - 1] = rows.len();
            }
        }
        sizes
    }

    /// Distinct covariate columns used in splits.
    pub fn split_columns(&self) -> Vec<usize> {
        let mut cols: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                SubgroupNode::Internal { rule, .. } => Some(rule.column),
                _ => None,
            })
            .collect();
        cols.sort_unstable();
        cols.dedup();
        cols
    }

    /// Route one covariate row to its 1-based subgroup index.
    pub fn assign_row(&self, row: &[f64]) -> usize {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                SubgroupNode::Terminal { subgroup, .. } => return *subgroup,
                SubgroupNode::Internal {
                    rule, left, right, ..
                } => {
                    at = if rule.goes_left(row[rule.column]) {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Route every row of a dataset (total: every row is assigned).
    pub fn assign_subgroups(&self, ds: &TrialDataset) -> Vec<usize> {
        let mut row = vec![0.0; ds.n_covariates()];
        (0..ds.n())
            .map(|i| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = ds.covariate(j)[i];
                }
                self.assign_row(&row)
            })
            .collect()
    }

    /// One human-readable conjunction per terminal node, in subgroup order.
    /// Repeated bounds on the same covariate are merged.
    pub fn extract_rules(&self) -> Vec<SubgroupRule> {
        let mut out = Vec::with_capacity(self.k);
        self.collect_rules(0, &BTreeMap::new(), &mut out);
        out.sort_by_key(|r| r.k);
        out
    }

    fn collect_rules(
        &self,
        at: usize,
        bounds: &BTreeMap<usize, Clause>,
        out: &mut Vec<SubgroupRule>,
    ) {
        match &self.nodes[at] {
            SubgroupNode::Terminal { subgroup, rows, .. } => {
                out.push(SubgroupRule {
                    k: *subgroup,
                    n_rows: rows.len(),
                    clauses: bounds.values().cloned().collect(),
                });
            }
            SubgroupNode::Internal {
                rule, left, right, ..
            } => {
                let mut l = bounds.clone();
                let mut r = bounds.clone();
                match rule.kind {
                    SplitKind::LessEq(c) => {
                        l.entry(rule.column)
                            .or_insert_with(|| Clause::interval(rule))
                            .tighten_hi(c);
                        r.entry(rule.column)
                            .or_insert_with(|| Clause::interval(rule))
                            .tighten_lo(c);
                    }
                    SplitKind::BinaryLevel => {
                        l.insert(rule.column, Clause::level(rule, 0));
                        r.insert(rule.column, Clause::level(rule, 1));
                    }
                }
                self.collect_rules(*left, &l, out);
                self.collect_rules(*right, &r, out);
            }
        }
    }

    /// Root-only tree over `n` rows (the no-subgroups outcome).
    pub fn root_only(n: usize, settings: TreeSettings, source: TreeSource) -> Self {
        SubgroupTree {
            nodes: vec![SubgroupNode::Terminal {
                subgroup: 1,
                depth: 1,
                rows: (0..n).collect(),
            }],
            settings,
            source,
            n,
            k: 1,
        }
    }

    /// Partition sanity: every row in exactly one terminal, sizes sum to n,
    /// min-node and depth limits hold.
    pub fn check_partition(&self) -> bool {
        let mut seen = vec![false; self.n];
        for node in &self.nodes {
            match node {
                SubgroupNode::Terminal { rows, depth, .. } => {
                    if !self.is_root_only() && rows.len() < self.settings.min_node {
                        return false;
                    }
                    if *depth > self.settings.max_depth {
                        return false;
                    }
                    for &r in rows {
                        if seen[r] {
                            return false;
                        }
                        seen[r] = true;
                    }
                }
                SubgroupNode::Internal { depth, .. } => {
                    if *depth >= self.settings.max_depth {
                        return false;
                    }
                }
            }
        }
        seen.iter().all(|&s| s)
    }
}

/// One conjunct of a subgroup rule.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Clause {
    pub column: usize,
    pub name: String,
    /// Open lower bound: value > lo.
    pub lo: Option<f64>,
    /// Closed upper bound: value <= hi.
    pub hi: Option<f64>,
    /// Binary level (0/1); exclusive with the bounds.
    pub level: Option<u8>,
}

impl Clause {
    fn interval(rule: &SplitRule) -> Clause {
        Clause {
            column: rule.column,
            name: rule.name.clone(),
            lo: None,
            hi: None,
            level: None,
        }
    }

    fn level(rule: &SplitRule, level: u8) -> Clause {
        Clause {
            column: rule.column,
            name: rule.name.clone(),
            lo: None,
            hi: None,
            level: Some(level),
        }
    }

    fn tighten_hi(&mut self, c: f64) {
        self.hi = Some(self.hi.map_or(c, |h| h.min(c)));
    }

    fn tighten_lo(&mut self, c: f64) {
        self.lo = Some(self.lo.map_or(c, |l| l.max(c)));
    }

    pub fn matches(&self, value: f64) -> bool {
        if let Some(level) = self.level {
            return value == f64::from(level);
        }
        self.lo.map_or(true, |lo| value > lo) && self.hi.map_or(true, |hi| value <= hi)
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(level) = self.level {
            return write!(f, "{} = {}", self.name, level);
        }
        match (self.lo, self.hi) {
            (Some(lo), Some(hi)) => write!(f, "{} < {} <= {}", fmt_num(lo), self.name, fmt_num(hi)),
            (Some(lo), None) => write!(f, "{} > {}", self.name, fmt_num(lo)),
            (None, Some(hi)) => write!(f, "{} <= {}", self.name, fmt_num(hi)),
            (None, None) => write!(f, "{}", self.name),
        }
    }
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// A terminal node's rule: the conjunction of its clauses.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SubgroupRule {
    /// 1-based subgroup index.
    pub k: usize,
    pub n_rows: usize,
    pub clauses: Vec<Clause>,
}

impl SubgroupRule {
    pub fn matches(&self, row: &[f64]) -> bool {
        self.clauses.iter().all(|c| c.matches(row[c.column]))
    }

    pub fn is_overall(&self) -> bool {
        self.clauses.is_empty()
    }
}

impl fmt::Display for SubgroupRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.clauses.is_empty() {
            return write!(f, "Overall");
        }
        let parts: Vec<String> = self.clauses.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(" & "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(column: usize, name: &str, kind: SplitKind) -> SplitRule {
        SplitRule {
            column,
            name: name.into(),
            kind,
        }
    }

    /// X1 binary split, then X2 <= 5 then X2 <= 3 nested on the left.
    fn nested_tree() -> SubgroupTree {
        let settings = TreeSettings {
            alpha: 0.10,
            max_depth: 4,
            min_node: 1,
        };
        SubgroupTree {
            nodes: vec![
                SubgroupNode::Internal {
                    rule: split(0, "X1", SplitKind::BinaryLevel),
                    p_value: 0.001,
                    statistic: 20.0,
                    depth: 1,
                    n_rows: 8,
                    left: 1,
                    right: 6,
                },
                SubgroupNode::Internal {
                    rule: split(1, "X2", SplitKind::LessEq(5.0)),
                    p_value: 0.002,
                    statistic: 15.0,
                    depth: 2,
                    n_rows: 6,
                    left: 2,
                    right: 5,
                },
                SubgroupNode::Internal {
                    rule: split(1, "X2", SplitKind::LessEq(3.0)),
                    p_value: 0.004,
                    statistic: 11.0,
                    depth: 3,
                    n_rows: 4,
                    left: 3,
                    right: 4,
                },
                SubgroupNode::Terminal {
                    subgroup: 1,
                    depth: 4,
                    rows: vec![0, 1],
                },
                SubgroupNode::Terminal {
                    subgroup: 2,
                    depth: 4,
                    rows: vec![2, 3],
                },
                SubgroupNode::Terminal {
                    subgroup: 3,
                    depth: 3,
                    rows: vec![4, 5],
                },
                SubgroupNode::Terminal {
                    subgroup: 4,
                    depth: 2,
                    rows: vec![6, 7],
                },
            ],
            settings,
            source: TreeSource::MobObserved,
            n: 8,
            k: 4,
        }
    }

    #[test]
    fn root_only_assigns_everyone_to_one() {
        let tree =
            SubgroupTree::root_only(5, TreeSettings::with_defaults(5), TreeSource::MobObserved);
        assert!(tree.is_root_only());
        assert_eq!(tree.assign_row(&[1.0, 2.0]), 1);
        let rules = tree.extract_rules();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].to_string(), "Overall");
        assert!(rules[0].matches(&[123.0]));
        assert!(tree.check_partition());
    }

    #[test]
    fn nested_bounds_merge() {
        let tree = nested_tree();
        let rules = tree.extract_rules();
        assert_eq!(rules.len(), 4);
        assert_eq!(rules[0].to_string(), "X1 = 0 & X2 <= 3");
        assert_eq!(rules[1].to_string(), "X1 = 0 & 3 < X2 <= 5");
        assert_eq!(rules[2].to_string(), "X1 = 0 & X2 > 5");
        assert_eq!(rules[3].to_string(), "X1 = 1");
        assert!(rules[1].matches(&[0.0, 4.0]));
        assert!(!rules[1].matches(&[0.0, 3.0]));
        assert!(!rules[1].matches(&[1.0, 4.0]));
    }

    #[test]
    fn routing_matches_rules() {
        let tree = nested_tree();
        let rules = tree.extract_rules();
        for row in [
            vec![0.0, 2.0],
            vec![0.0, 3.5],
            vec![0.0, 9.0],
            vec![1.0, 1.0],
        ] {
            let k = tree.assign_row(&row);
            for rule in &rules {
                assert_eq!(rule.matches(&row), rule.k == k, "row {row:?} rule {rule}");
            }
        }
        assert_eq!(tree.split_columns(), vec![0, 1]);
    }
}
