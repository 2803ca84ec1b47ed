//! Pipeline configurations and the end-to-end analysis run.
//!
//! Three named configurations cover the reference setups; `Custom` wires the
//! stages freely:
//!
//! - `Mob`: subgroups from model-based partitioning of the observed
//!   outcomes; within-subgroup OLS/GLM estimates.
//! - `PrismA`: elastic-net filter, counterfactual forest, MOB on the
//!   observed outcomes, PLE averaging with the Bayesian update.
//! - `PrismB`: elastic-net filter, counterfactual forest, CTREE on the
//!   PLEs, PLE averaging with the Bayesian update.
//!
//! Reports are pure functions of (dataset, config, seed): rerunning with the
//! manifest reproduces them byte for byte.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{FilteredView, OutcomeFamily, TrialDataset};
use crate::enet::{filter_covariates, ElasticNetFit, EnetFamily};
use crate::error::Result;
use crate::forest::{counterfactual_ple, ForestConfig, PleTable};
use crate::infer::{
    bayes_update, glm_estimate_rows, ple_average, posterior_ci, prob_statements, pseudo_outcomes,
    se_ple, BayesConfig, Posterior, ProbStatement,
};
use crate::rng::derive_rng;
use crate::tree::{
    ctree::fit_ctree_on_ple, mob::fit_mob, SplitKind, SubgroupNode, SubgroupTree, TreeSettings,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigName {
    Mob,
    PrismA,
    PrismB,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterChoice {
    None,
    ElasticNet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PleChoice {
    None,
    CounterfactualForest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmodChoice {
    MobObserved,
    CtreeOnPle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamChoice {
    /// PLE averaging with pseudo-outcome SEs and the Bayesian update.
    PleBayes,
    /// Within-subgroup OLS (continuous) or risk difference with Wald SE
    /// (binary).
    Glm,
}

/// Direction in which larger treatment effects mean benefit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenefitDirection {
    Greater,
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CustomStages {
    pub filter: FilterChoice,
    pub ple: PleChoice,
    pub submod: SubmodChoice,
    pub param: ParamChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubmodSettings {
    pub alpha: f64,
    pub max_depth: usize,
    pub min_node_fraction: f64,
}

impl Default for SubmodSettings {
    fn default() -> Self {
        SubmodSettings {
            alpha: 0.10,
            max_depth: 4,
            min_node_fraction: 0.10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestSettings {
    pub num_trees: usize,
    pub min_node_fraction: f64,
    pub mtry: Option<usize>,
}

impl Default for ForestSettings {
    fn default() -> Self {
        ForestSettings {
            num_trees: 500,
            min_node_fraction: 0.10,
            mtry: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BayesSettings {
    /// Prior-variance scale; `None` uses gamma = n.
    pub gamma: Option<f64>,
    pub ci_alpha: f64,
}

impl Default for BayesSettings {
    fn default() -> Self {
        BayesSettings {
            gamma: None,
            ci_alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub family: OutcomeFamily,
    pub configuration: ConfigName,
    #[serde(default)]
    pub custom: Option<CustomStages>,
    #[serde(default)]
    pub submod: SubmodSettings,
    #[serde(default)]
    pub forest: ForestSettings,
    #[serde(default)]
    pub bayes: BayesSettings,
    /// Thresholds c for the probability statements.
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default = "default_benefit_direction")]
    pub benefit_direction: BenefitDirection,
    /// Elastic-net mixing weight.
    #[serde(default = "default_enet_alpha")]
    pub enet_alpha: f64,
    /// Bootstrap resamples; 0 disables the bootstrap.
    #[serde(default)]
    pub bootstrap_b: usize,
    /// Keep the per-resample estimate vectors in the bootstrap report.
    #[serde(default)]
    pub bootstrap_keep_draws: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_thresholds() -> Vec<f64> {
    vec![0.0]
}

fn default_benefit_direction() -> BenefitDirection {
    BenefitDirection::Greater
}

fn default_enet_alpha() -> f64 {
    0.5
}

impl PipelineConfig {
    pub fn named(configuration: ConfigName, family: OutcomeFamily, seed: u64) -> Self {
        PipelineConfig {
            family,
            configuration,
            custom: None,
            submod: SubmodSettings::default(),
            forest: ForestSettings::default(),
            bayes: BayesSettings::default(),
            thresholds: default_thresholds(),
            benefit_direction: default_benefit_direction(),
            enet_alpha: default_enet_alpha(),
            bootstrap_b: 0,
            bootstrap_keep_draws: false,
            seed,
        }
    }

    /// Resolve the stage choices for this configuration.
    pub fn stages(&self) -> CustomStages {
        match self.configuration {
            ConfigName::Mob => CustomStages {
                filter: FilterChoice::None,
                ple: PleChoice::None,
                submod: SubmodChoice::MobObserved,
                param: ParamChoice::Glm,
            },
            ConfigName::PrismA => CustomStages {
                filter: FilterChoice::ElasticNet,
                ple: PleChoice::CounterfactualForest,
                submod: SubmodChoice::MobObserved,
                param: ParamChoice::PleBayes,
            },
            ConfigName::PrismB => CustomStages {
                filter: FilterChoice::ElasticNet,
                ple: PleChoice::CounterfactualForest,
                submod: SubmodChoice::CtreeOnPle,
                param: ParamChoice::PleBayes,
            },
            ConfigName::Custom => self.custom.unwrap_or(CustomStages {
                filter: FilterChoice::ElasticNet,
                ple: PleChoice::CounterfactualForest,
                submod: SubmodChoice::MobObserved,
                param: ParamChoice::PleBayes,
            }),
        }
    }

    pub fn tree_settings(&self, n: usize) -> TreeSettings {
        TreeSettings {
            alpha: self.submod.alpha,
            max_depth: self.submod.max_depth,
            min_node: (self.submod.min_node_fraction * n as f64).ceil() as usize,
        }
    }

    pub fn forest_config(&self, n: usize) -> ForestConfig {
        ForestConfig {
            num_trees: self.forest.num_trees,
            mtry: self.forest.mtry,
            min_node_size: (self.forest.min_node_fraction * n as f64).ceil() as usize,
        }
    }

    pub fn bayes_config(&self, n: usize) -> BayesConfig {
        BayesConfig {
            gamma: self.bayes.gamma.unwrap_or(n as f64),
            alpha: self.bayes.ci_alpha,
            thresholds: self.thresholds.clone(),
        }
    }

    /// Stable hash of the configuration (JSON serialization).
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex_digest(&json)
    }
}

/// One reported subgroup row (k = 0 is the overall population).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupEstimate {
    pub k: usize,
    pub rule: String,
    pub n_k: usize,
    pub n0: usize,
    pub n1: usize,
    /// Arm outcome means (response rates for binary outcomes).
    pub mean0: f64,
    pub mean1: f64,
    /// The configuration's point estimate of the subgroup treatment effect.
    pub estimate: f64,
    pub se: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// PLE average (present on the PLE/Bayes path).
    pub theta_tilde: Option<f64>,
    /// Pseudo-outcome SE of the PLE average.
    pub se_ple: Option<f64>,
    pub posterior: Option<Posterior>,
    /// Tail probabilities per configured threshold, from the posterior when
    /// present, otherwise from the normal approximation around the estimate.
    pub probs: Vec<ProbStatement>,
    /// Single-arm subgroup: point estimate undefined, no SE.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCovariateReport {
    pub name: String,
    /// Coefficient at the chosen lambda, on the standardized scale.
    pub coefficient: f64,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub chosen_lambda: f64,
    pub covariates: Vec<FilterCovariateReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNodeReport {
    pub id: usize,
    pub kind: String,
    pub depth: usize,
    pub n_rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariate: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub right: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subgroup: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeReport {
    pub source: String,
    pub alpha: f64,
    pub max_depth: usize,
    pub min_node: usize,
    pub k: usize,
    pub nodes: Vec<TreeNodeReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub input_sha256: String,
    pub config_sha256: String,
    pub seed: u64,
    pub tool_version: String,
}

/// Report schema version; bump on breaking layout changes.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub manifest: RunManifest,
    pub config: PipelineConfig,
    pub n: usize,
    pub n0: usize,
    pub n1: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterReport>,
    pub tree: TreeReport,
    pub subgroups: Vec<SubgroupEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<crate::boot::BootstrapReport>,
}

/// All fitted stages of one run, before report assembly. The bootstrap and
/// the study harness rerun this.
pub struct FittedPrism {
    pub view: FilteredView,
    pub enet: Option<ElasticNetFit>,
    pub ple: Option<PleTable>,
    pub tree: SubgroupTree,
    /// 1-based subgroup per training row.
    pub assignment: Vec<usize>,
    /// k = 0 row first, then k = 1..K.
    pub estimates: Vec<SubgroupEstimate>,
}

/// Run filter, PLE, subgroup discovery, and parameter estimation.
pub fn fit_prism(ds: &TrialDataset, cfg: &PipelineConfig) -> Result<FittedPrism> {
    let stages = cfg.stages();
    let n = ds.n();

    let (view, enet) = match stages.filter {
        FilterChoice::None => (FilteredView::all(ds.n_covariates()), None),
        FilterChoice::ElasticNet => {
            let family = match cfg.family {
                OutcomeFamily::Continuous => EnetFamily::Gaussian,
                OutcomeFamily::Binary => EnetFamily::Binomial,
            };
            let mut rng = derive_rng(cfg.seed, &[1]);
            let (view, fit) = filter_covariates(ds, family, cfg.enet_alpha, &mut rng)?;
            (view, Some(fit))
        }
    };

    let need_ple =
        stages.ple == PleChoice::CounterfactualForest || stages.submod == SubmodChoice::CtreeOnPle;
    let ple = if need_ple {
        let mut rng = derive_rng(cfg.seed, &[2]);
        Some(counterfactual_ple(ds, &view, &cfg.forest_config(n), &mut rng)?)
    } else {
        None
    };

    let settings = cfg.tree_settings(n);
    let tree = match stages.submod {
        SubmodChoice::MobObserved => fit_mob(ds, &view, &settings, cfg.family),
        SubmodChoice::CtreeOnPle =>

            fit_ctree_on_ple(ple.as_ref().expect("PLE fitted for CTREE"), ds, &view, &settings),
    };
    let assignment = training_assignment(&tree);
    let estimates = estimate_subgroups(ds, cfg, ple.as_ref(), &tree, &assignment)?;

    Ok(FittedPrism {
        view,
        enet,
        ple,
        tree,
        assignment,
        estimates,
    })
}

/// Training-row subgroup assignment straight from the tree's terminal nodes.
pub fn training_assignment(tree: &SubgroupTree) -> Vec<usize> {
    let mut assignment = vec![0usize; tree.n];
    for node in &tree.nodes {
        if let SubgroupNode::Terminal { subgroup, rows, .. } = node {
            for &r in rows {
                assignment[r] = *subgroup;
            }
        }
    }
    assignment
}

/// Parameter estimation for the overall population (k = 0) and each
/// discovered subgroup, per the configuration's param choice.
pub fn estimate_subgroups(
    ds: &TrialDataset,
    cfg: &PipelineConfig,
    ple: Option<&PleTable>,
    tree: &SubgroupTree,
    assignment: &[usize],
) -> Result<Vec<SubgroupEstimate>> {
    let stages = cfg.stages();
    let n = ds.n();
    let bayes = cfg.bayes_config(n);
    bayes.validate()?;
    let rules = tree.extract_rules();
    let rule_text = |k: usize| -> String {
        if k == 0 {
            "Overall".to_string()
        } else {
            rules[k - 1].to_string()
        }
    };

    let mut out = Vec::with_capacity(tree.k + 1);
    match stages.param {
        ParamChoice::Glm => {
            for k in 0..=tree.k {
                let rows: Vec<usize> = if k == 0 {
                    (0..n).collect()
                } else {
                    (0..n).filter(|&i| assignment[i] == k).collect()
                };
                let glm = glm_estimate_rows(ds, &rows, k, cfg.family, bayes.alpha);
                let probs = match (glm.flagged, glm.se) {
                    (false, Some(se)) if se > 0.0 => prob_statements(
                        &Posterior {
                            mean: glm.estimate,
                            var: se * se,
                        },
                        &bayes.thresholds,
                    ),
                    _ => Vec::new(),
                };
                out.push(SubgroupEstimate {
                    k,
                    rule: rule_text(k),
                    n_k: glm.n_k,
                    n0: glm.n0,
                    n1: glm.n1,
                    mean0: glm.mean0,
                    mean1: glm.mean1,
                    estimate: glm.estimate,
                    se: glm.se,
                    ci_low: glm.ci_low,
                    ci_high: glm.ci_high,
                    theta_tilde: None,
                    se_ple: None,
                    posterior: None,
                    probs,
                    flagged: glm.flagged,
                });
            }
        }
        ParamChoice::PleBayes => {
            let ple = ple.ok_or_else(|| {
                crate::error::Error::InvalidArg(
                    "the PLE/Bayes parameter model needs a fitted PLE stage".into(),
                )
            })?;
            let y_star = pseudo_outcomes(ds, ple)?;
            let theta_0 = ple_average(ple, assignment, 0)?;
            let se_0 = se_ple(&y_star, theta_0, assignment, 0)?;
            let var_0 = se_0 * se_0;
            if var_0 <= 0.0 {
                return Err(crate::error::Error::numeric(
                    "estimate_subgroups",
                    "overall pseudo-outcome variance is zero; the posterior is degenerate",
                ));
            }
            for k in 0..=tree.k {
                let theta_k = ple_average(ple, assignment, k)?;
                let se_k = se_ple(&y_star, theta_k, assignment, k)?;
                let var_k = if se_k > 0.0 { se_k * se_k } else { var_0 * 1e-12 };
                let post = bayes_update(theta_k, var_k, theta_0, var_0, &bayes);
                let (lo, hi) = posterior_ci(&post, bayes.alpha);
                let probs = prob_statements(&post, &bayes.thresholds);
                let rows: Vec<usize> = if k == 0 {
                    (0..n).collect()
                } else {
                    (0..n).filter(|&i| assignment[i] == k).collect()
                };
                let glm = glm_estimate_rows(ds, &rows, k, cfg.family, bayes.alpha);
                out.push(SubgroupEstimate {
                    k,
                    rule: rule_text(k),
                    n_k: rows.len(),
                    n0: glm.n0,
                    n1: glm.n1,
                    mean0: glm.mean0,
                    mean1: glm.mean1,
                    estimate: post.mean,
                    se: Some(post.var.sqrt()),
                    ci_low: Some(lo),
                    ci_high: Some(hi),
                    theta_tilde: Some(theta_k),
                    se_ple: Some(se_k),
                    posterior: Some(post),
                    probs,
                    flagged: false,
                });
            }
        }
    }
    Ok(out)
}

/// Full analysis: fit, optional bootstrap, and report assembly.
pub fn run_pipeline(ds: &TrialDataset, cfg: &PipelineConfig) -> Result<AnalysisReport> {
    run_pipeline_full(ds, cfg).map(|(report, _)| report)
}

/// Like [`run_pipeline`], also returning the fitted stages (for PLE dumps
/// and downstream tooling).
pub fn run_pipeline_full(
    ds: &TrialDataset,
    cfg: &PipelineConfig,
) -> Result<(AnalysisReport, FittedPrism)> {
    let fitted = fit_prism(ds, cfg)?;
    let bootstrap = if cfg.bootstrap_b > 0 {
        Some(crate::boot::bootstrap_prism(
            ds,
            cfg,
            &fitted,
            cfg.bootstrap_b,
            &mut derive_rng(cfg.seed, &[4]),
        )?)
    } else {
        None
    };
    let report = assemble_report(ds, cfg, &fitted, bootstrap);
    Ok((report, fitted))
}

fn assemble_report(
    ds: &TrialDataset,
    cfg: &PipelineConfig,
    fitted: &FittedPrism,
    bootstrap: Option<crate::boot::BootstrapReport>,
) -> AnalysisReport {
    let filter = fitted.enet.as_ref().map(|fit| FilterReport {
        chosen_lambda: fit.chosen_lambda(),
        covariates: ds
            .names()
            .iter()
            .enumerate()
            .map(|(j, name)| FilterCovariateReport {
                name: name.clone(),
                coefficient: fit.chosen_coefficients()[j],
                kept: fitted.view.kept_columns().contains(&j),
            })
            .collect(),
    });

    AnalysisReport {
        schema_version: REPORT_SCHEMA_VERSION,
        manifest: RunManifest {
            input_sha256: dataset_hash(ds),
            config_sha256: cfg.config_hash(),
            seed: cfg.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        config: cfg.clone(),
        n: ds.n(),
        n0: ds.n_in_arm(0),
        n1: ds.n_in_arm(1),
        filter,
        tree: tree_report(&fitted.tree),
        subgroups: fitted.estimates.clone(),
        bootstrap,
    }
}

pub fn tree_report(tree: &SubgroupTree) -> TreeReport {
    let nodes = tree
        .nodes
        .iter()
        .enumerate()
        .map(|(id, node)| match node {
            SubgroupNode::Internal {
                rule,
                p_value,
                statistic,
                depth,
                n_rows,
                left,
                right,
            } => {
                let (relation, threshold) = match rule.kind {
                    SplitKind::LessEq(c) => ("<=".to_string(), Some(c)),
                    SplitKind::BinaryLevel => ("=0/=1".to_string(), None),
                };
                TreeNodeReport {
                    id,
                    kind: "split".into(),
                    depth: *depth,
                    n_rows: *n_rows,
                    covariate: Some(rule.name.clone()),
                    relation: Some(relation),
                    threshold,
                    p_value: Some(*p_value),
                    statistic: Some(*statistic),
                    left: Some(*left),
                    right: Some(*right),
                    subgroup: None,
                }
            }
            SubgroupNode::Terminal {
                subgroup,
                depth,
                rows,
            } => TreeNodeReport {
                id,
                kind: "terminal".into(),
                depth: *depth,
                n_rows: rows.len(),
                covariate: None,
                relation: None,
                threshold: None,
                p_value: None,
                statistic: None,
                left: None,
                right: None,
                subgroup: Some(*subgroup),
            },
        })
        .collect();
    TreeReport {
        source: match tree.source {
            crate::tree::TreeSource::MobObserved => "mob_observed".into(),
            crate::tree::TreeSource::CtreeOnPle => "ctree_on_ple".into(),
        },
        alpha: tree.settings.alpha,
        max_depth: tree.settings.max_depth,
        min_node: tree.settings.min_node,
        k: tree.k,
        nodes,
    }
}

/// Canonical content hash of a dataset (independent of its file encoding).
pub fn dataset_hash(ds: &TrialDataset) -> String {
    let mut hasher = Sha256::new();
    let mut push = |x: f64| hasher.update(x.to_le_bytes());
    for &v in ds.y() {
        push(v);
    }
    let mut hasher2 = Sha256::new();
    hasher2.update(hasher.finalize());
    for &a in ds.arm() {
        hasher2.update([a]);
    }
    for j in 0..ds.n_covariates() {
        hasher2.update(ds.names()[j].as_bytes());
        for &v in ds.covariate(j) {
            hasher2.update(v.to_le_bytes());
        }
    }
    hex_digest_final(hasher2)
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_digest_final(hasher)
}

fn hex_digest_final(hasher: Sha256) -> String {
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
