//! Monte Carlo study harness: operating characteristics of the pipeline
//! configurations against the synthetic-trial generator.
//!
//! Per replicate, a fresh trial is generated and every requested method runs
//! on it; each discovered subgroup's true effect is recomputed from its rule
//! with the Monte Carlo oracle (a 10,000-patient pool shared by all rules in
//! the replicate, never cached across replicates). Metrics follow the
//! size-weighted definitions: Bias(Overall), Bias(Abs), MSE, and Coverage are
//! weighted by subgroup size and averaged over replicates; relative
//! efficiency divides the MSE of the MOB reference by each method's MSE, so
//! values below 1 favor the reference. Treatment assignment compares
//! posterior-probability rules (B when P(benefit) exceeds the cutoff) against
//! the "standard practice" rule (everyone B when the unadjusted overall test
//! has p < 0.05), scored against per-patient truth 1{theta(X) > 0}.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{OutcomeFamily, TrialDataset};
use crate::error::{Error, Result};
use crate::pipeline::{fit_prism, ConfigName, PipelineConfig, SubgroupEstimate};
use crate::rng::{derive_rng, derive_seed};
use crate::simgen::{
    generate_trial, noise_cols, true_effect, true_group_rules, true_partition, EffectSetting,
    OraclePool, SimScenario, PREDICTIVE_COLS, PROGNOSTIC_COLS,
};
use crate::stats::{mean, norm_cdf, sample_variance, t_cdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mob,
    PrismA,
    PrismB,
    Oracle,
    StandardPractice,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Mob => "mob",
            Method::PrismA => "prism_a",
            Method::PrismB => "prism_b",
            Method::Oracle => "oracle",
            Method::StandardPractice => "standard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub family: OutcomeFamily,
    pub setting: EffectSetting,
    pub n_noise: usize,
}

impl ScenarioSpec {
    pub fn label(&self) -> String {
        let family = match self.family {
            OutcomeFamily::Continuous => "continuous",
            OutcomeFamily::Binary => "binary",
        };
        let setting = match self.setting {
            EffectSetting::Null => "null",
            EffectSetting::Subgroup4 => "subgroup4",
        };
        format!("{family}/{setting}/noise{}", self.n_noise)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenarios: Vec<ScenarioSpec>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Posterior-probability cutoffs for treatment assignment.
    #[serde(default = "default_cutoffs")]
    pub cutoffs: Vec<f64>,
    /// Oracle pool size per replicate.
    #[serde(default = "default_oracle_m")]
    pub oracle_m: usize,
    /// Trees per counterfactual forest (reduce for smoke runs).
    #[serde(default = "default_trees")]
    pub forest_trees: usize,
}

fn default_n() -> usize {
    800
}
fn default_cutoffs() -> Vec<f64> {
    vec![0.50, 0.80]
}
fn default_oracle_m() -> usize {
    10_000
}
fn default_trees() -> usize {
    500
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArg("study needs at least 1 replicate".into()));
        }
        if self.cutoffs.iter().any(|c| !(0.0 < *c && *c < 1.0)) {
            return Err(Error::InvalidArg("cutoffs must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// One aggregated metric value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub scenario: String,
    pub method: String,
    pub metric: String,
    pub value: f64,
    /// Monte Carlo standard error over replicates, when defined.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_se: Option<f64>,
    /// Replicates contributing to this value.
    pub n_replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub scenario: String,
    pub method: String,
    pub replicate: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub rows: Vec<MetricRow>,
    pub failures: Vec<FailureRecord>,
}

impl StudyResult {
    pub fn get(&self, scenario: &str, method: &str, metric: &str) -> Option<&MetricRow> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.method == method && r.metric == metric)
    }

    /// Tidy CSV: one row per scenario x method x metric.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,method,metric,value,mc_se,n_replicates\n");
        for r in &self.rows {
            let se = r.mc_se.map_or(String::new(), |s| format!("{s}"));
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.scenario, r.method, r.metric, r.value, se, r.n_replicates
            ));
        }
        out
    }
}

/// Per-replicate raw records for one method.
#[derive(Debug, Clone, Default)]
struct ReplicateRecord {
    /// (n_k, estimate, ci_low, ci_high, truth) per usable subgroup.
    subgroups: Vec<(usize, f64, f64, f64, f64)>,
    /// Subgroups skipped because the estimate or CI was undefined.
    skipped_subgroups: usize,
    k_found: usize,
    pred_selection: Option<f64>,
    prog_selection: Option<f64>,
    noise_selection: Option<f64>,
    /// Per cutoff: (accuracy, ppv, npv, n_assigned_b).
    classification: Vec<(f64, Option<f64>, Option<f64>, usize)>,
    /// B-sets nested across descending cutoffs.
    cutoff_monotone: Option<bool>,
    /// Standard practice: everyone assigned B.
    all_b: Option<bool>,
}

/// Accuracy, PPV, and NPV of a predicted assignment against truth; undefined
/// ratios (empty denominators) are absent.
pub fn classification_metrics(
    predicted_b: &[bool],
    truth_b: &[bool],
) -> (f64, Option<f64>, Option<f64>) {
    let n = predicted_b.len();
    assert_eq!(n, truth_b.len());
    let mut correct = 0usize;
    let (mut tp, mut pp, mut tn, mut pn) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..n {
        if predicted_b[i] == truth_b[i] {
            correct += 1;
        }
        if predicted_b[i] {
            pp += 1;
            if truth_b[i] {
                tp += 1;
            }
        } else {
            pn += 1;
            if !truth_b[i] {
                tn += 1;
            }
        }
    }
    let accuracy = correct as f64 / n as f64;
    let ppv = (pp > 0).then(|| tp as f64 / pp as f64);
    let npv = (pn > 0).then(|| tn as f64 / pn as f64);
    (accuracy, ppv, npv)
}

/// Unadjusted overall treatment test: pooled two-sample t (continuous) or
/// pooled two-proportion z (binary). Returns (treat everyone with B, p).
pub fn standard_practice_assign(ds: &TrialDataset, family: OutcomeFamily) -> (bool, f64) {
    let y1: Vec<f64> = ds.arm_rows(1).iter().map(|&i| ds.y()[i]).collect();
    let y0: Vec<f64> = ds.arm_rows(0).iter().map(|&i| ds.y()[i]).collect();
    let (n1, n0) = (y1.len() as f64, y0.len() as f64);
    let diff = mean(&y1) - mean(&y0);
    let p_value = match family {
        OutcomeFamily::Continuous => {
            let s2 =
                ((n1 - 1.0) * sample_variance(&y1) + (n0 - 1.0) * sample_variance(&y0))
                    / (n1 + n0 - 2.0);
            let se = (s2 * (1.0 / n1 + 1.0 / n0)).sqrt();
            if se == 0.0 {
                1.0
            } else {
                2.0 * (1.0 - t_cdf((diff / se).abs(), n1 + n0 - 2.0))
            }
        }
        OutcomeFamily::Binary => {
            let pooled = (y1.iter().sum::<f64>() + y0.iter().sum::<f64>()) / (n1 + n0);
            let se = (pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n0)).sqrt();
            if se == 0.0 {
                1.0
            } else {
                2.0 * (1.0 - norm_cdf((diff / se).abs()))
            }
        }
    };
    (p_value < 0.05, p_value)
}

/// Per-patient assignment: B when the patient's subgroup posterior
/// probability of benefit (theta > 0) exceeds the cutoff.
pub fn prism_assign(
    estimates: &[SubgroupEstimate],
    assignment: &[usize],
    cutoff: f64,
) -> Vec<bool> {
    let prob_of = |k: usize| -> f64 {
        estimates
            .iter()
            .find(|e| e.k == k)
            .and_then(|e| {
                e.probs
                    .iter()
                    .find(|p| p.threshold == 0.0)
                    .map(|p| p.greater)
            })
            .unwrap_or(0.0)
    };
    assignment.iter().map(|&k| prob_of(k) > cutoff).collect()
}

pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();

    for (s_idx, spec) in cfg.scenarios.iter().enumerate() {
        let scenario_label = spec.label();
        let per_method: Vec<Vec<std::result::Result<ReplicateRecord, String>>> = (0..cfg
            .replicates)
            .into_par_iter()
            .map(|rep| run_replicate(cfg, spec, s_idx, rep))
            .collect();

        // reorganize into per-method vectors, in replicate order
        for (m_idx, method) in cfg.methods.iter().enumerate() {
            let mut records = Vec::with_capacity(cfg.replicates);
            for (rep, rep_records) in per_method.iter().enumerate() {
                match &rep_records[m_idx] {
                    Ok(record) => records.push(record.clone()),
                    Err(message) => failures.push(FailureRecord {
                        scenario: scenario_label.clone(),
                        method: method.label().to_string(),
                        replicate: rep,
                        error: message.clone(),
                    }),
                }
            }
            aggregate_method(cfg, &scenario_label, method, &records, &mut rows);
        }

        // relative efficiency vs the MOB reference, from the aggregated MSEs
        if cfg.methods.contains(&Method::Mob) {
            let mob_mse = rows
                .iter()
                .find(|r| {
                    r.scenario == scenario_label && r.method == "mob" && r.metric == "mse"
                })
                .map(|r| r.value);
            if let Some(mob_mse) = mob_mse {
                let additions: Vec<MetricRow> = rows
                    .iter()
                    .filter(|r| {
                        r.scenario == scenario_label
                            && r.metric == "mse"
                            && r.value > 0.0
                    })
                    .map(|r| MetricRow {
                        scenario: scenario_label.clone(),
                        method: r.method.clone(),
                        metric: "rel_eff_vs_mob".into(),
                        value: mob_mse / r.value,
                        mc_se: None,
                        n_replicates: r.n_replicates,
                    })
                    .collect();
                rows.extend(additions);
            }
        }
    }

    Ok(StudyResult {
        config: cfg.clone(),
        rows,
        failures,
    })
}

/// Generate one trial and run every method on it.
fn run_replicate(
    cfg: &StudyConfig,
    spec: &ScenarioSpec,
    s_idx: usize,
    rep: usize,
) -> Vec<std::result::Result<ReplicateRecord, String>> {
    let tags = [s_idx as u64, rep as u64];
    let scenario = SimScenario {
        family: spec.family,
        setting: spec.setting,
        n_noise: spec.n_noise,
        n: cfg.n,
        seed: derive_seed(cfg.base_seed, &[tags[0], tags[1], 10]),
    };
    let ds = generate_trial(&scenario);
    let mut pool_rng = derive_rng(cfg.base_seed, &[tags[0], tags[1], 11]);
    let pool = OraclePool::draw(&scenario, cfg.oracle_m, &mut pool_rng);

    // per-patient benefit truth: theta(X) > 0 on the generating scale
    let truth_b: Vec<bool> = {
        let mut row = vec![0.0; ds.n_covariates()];
        (0..ds.n())
            .map(|i| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = ds.covariate(j)[i];
                }
                true_effect(&row, &scenario) > 0.0
            })
            .collect()
    };

    cfg.methods
        .iter()
        .enumerate()
        .map(|(m_idx, method)| {
            run_method(cfg, spec, &scenario, &ds, &pool, &truth_b, *method, m_idx, rep)
                .map_err(|e| e.to_string())
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_method(
    cfg: &StudyConfig,
    spec: &ScenarioSpec,
    scenario: &SimScenario,
    ds: &TrialDataset,
    pool: &OraclePool,
    truth_b: &[bool],
    method: Method,
    m_idx: usize,
    rep: usize,
) -> Result<ReplicateRecord> {
    let mut record = ReplicateRecord::default();
    match method {
        Method::StandardPractice => {
            let (all_b, _p) = standard_practice_assign(ds, spec.family);
            record.all_b = Some(all_b);
            let predicted = vec![all_b; ds.n()];
            let (acc, ppv, npv) = classification_metrics(&predicted, truth_b);
            record.classification = cfg
                .cutoffs
                .iter()
                .map(|_| (acc, ppv, npv, if all_b { ds.n() } else { 0 }))
                .collect();
        }
        Method::Oracle => {
            let partition = true_partition(ds, scenario);
            let n_groups = partition.iter().max().copied().unwrap_or(0) + 1;
            let ests =
                crate::infer::oracle_estimate(ds, &partition, n_groups, spec.family, 0.05)?;
            let rules = true_group_rules(scenario.setting);
            for (g, est) in ests.iter().enumerate() {
                let truth = pool.effect(|row| rules[g](row))?;
                match (est.flagged, est.ci_low, est.ci_high) {
                    (false, Some(lo), Some(hi)) => {
                        record.subgroups.push((est.n_k, est.estimate, lo, hi, truth));
                    }
                    _ => record.skipped_subgroups += 1,
                }
            }
            record.k_found = n_groups;
        }
        Method::Mob | Method::PrismA | Method::PrismB => {
            let name = match method {
                Method::Mob => ConfigName::Mob,
                Method::PrismA => ConfigName::PrismA,
                _ => ConfigName::PrismB,
            };
            let mut pcfg = PipelineConfig::named(name, spec.family, 0);
            pcfg.seed = derive_seed(cfg.base_seed, &[rep as u64, 20 + m_idx as u64]);
            pcfg.forest.num_trees = cfg.forest_trees;
            let fitted = fit_prism(ds, &pcfg)?;

            let tree_rules = fitted.tree.extract_rules();
            for est in fitted.estimates.iter().skip(1) {
                let rule = &tree_rules[est.k - 1];
                let truth = pool.effect(|row| rule.matches(row))?;
                match (est.flagged, est.ci_low, est.ci_high) {
                    (false, Some(lo), Some(hi)) => {
                        record.subgroups.push((est.n_k, est.estimate, lo, hi, truth));
                    }
                    _ => record.skipped_subgroups += 1,
                }
            }
            record.k_found = fitted.tree.k;

            // variable selection over the tree's split columns
            let split_cols = fitted.tree.split_columns();
            let frac = |cols: &[usize]| {
                cols.iter().filter(|c| split_cols.contains(c)).count() as f64 / cols.len() as f64
            };
            record.pred_selection = Some(frac(&PREDICTIVE_COLS));
            record.prog_selection = Some(frac(&PROGNOSTIC_COLS));
            let noise = noise_cols(ds.n_covariates());
            record.noise_selection = Some(frac(&noise));

            // treatment assignment at each cutoff
            let mut prev: Option<Vec<bool>> = None;
            let mut monotone = true;
            let mut sorted_cutoffs = cfg.cutoffs.clone();
            sorted_cutoffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut by_cutoff = std::collections::BTreeMap::new();
            for &cutoff in &sorted_cutoffs {
                let predicted = prism_assign(&fitted.estimates, &fitted.assignment, cutoff);
                if let Some(prev) = &prev {
                    // higher cutoff must assign a subset of B patients
                    if predicted
                        .iter()
                        .zip(prev)
                        .any(|(&now, &before)| now && !before)
                    {
                        monotone = false;
                    }
                }
                let (acc, ppv, npv) = classification_metrics(&predicted, truth_b);
                let n_b = predicted.iter().filter(|&&b| b).count();
                by_cutoff.insert(format!("{cutoff}"), (acc, ppv, npv, n_b));
                prev = Some(predicted);
            }
            record.classification = cfg
                .cutoffs
                .iter()
                .map(|c| by_cutoff[&format!("{c}")])
                .collect();
            record.cutoff_monotone = Some(monotone);
        }
    }
    Ok(record)
}

fn push_mean_metric(
    rows: &mut Vec<MetricRow>,
    scenario: &str,
    method: &str,
    metric: &str,
    values: &[f64],
) {
    if values.is_empty() {
        return;
    }
    let m = mean(values);
    let se = if values.len() > 1 {
        Some((sample_variance(values) / values.len() as f64).sqrt())
    } else {
        None
    };
    rows.push(MetricRow {
        scenario: scenario.to_string(),
        method: method.to_string(),
        metric: metric.to_string(),
        value: m,
        mc_se: se,
        n_replicates: values.len(),
    });
}

fn aggregate_method(
    cfg: &StudyConfig,
    scenario: &str,
    method: &Method,
    records: &[ReplicateRecord],
    rows: &mut Vec<MetricRow>,
) {
    let label = method.label();
    if records.is_empty() {
        return;
    }

    // size-weighted estimation metrics per replicate
    let mut bias_overall = Vec::new();
    let mut bias_abs = Vec::new();
    let mut mse = Vec::new();
    let mut coverage = Vec::new();
    for r in records {
        if r.subgroups.is_empty() {
            continue;
        }
        let total: f64 = r.subgroups.iter().map(|s| s.0 as f64).sum();
        let mut b = 0.0;
        let mut ba = 0.0;
        let mut m2 = 0.0;
        let mut cov = 0.0;
        for &(n_k, est, lo, hi, truth) in &r.subgroups {
            let w = n_k as f64 / total;
            let err = est - truth;
            b += w * err;
            ba += w * err.abs();
            m2 += w * err * err;
            cov += w * f64::from(lo <= truth && truth <= hi);
        }
        bias_overall.push(b);
        bias_abs.push(ba);
        mse.push(m2);
        coverage.push(cov);
    }
    push_mean_metric(rows, scenario, label, "bias_overall", &bias_overall);
    push_mean_metric(rows, scenario, label, "bias_abs", &bias_abs);
    push_mean_metric(rows, scenario, label, "mse", &mse);
    push_mean_metric(rows, scenario, label, "coverage", &coverage);

    let collect_opt = |f: fn(&ReplicateRecord) -> Option<f64>| -> Vec<f64> {
        records.iter().filter_map(f).collect()
    };
    push_mean_metric(
        rows,
        scenario,
        label,
        "pred_selection",
        &collect_opt(|r| r.pred_selection),
    );
    push_mean_metric(
        rows,
        scenario,
        label,
        "prog_selection",
        &collect_opt(|r| r.prog_selection),
    );
    push_mean_metric(
        rows,
        scenario,
        label,
        "noise_selection",
        &collect_opt(|r| r.noise_selection),
    );

    let k_values: Vec<f64> = records
        .iter()
        .filter(|_| !matches!(method, Method::StandardPractice))
        .map(|r| r.k_found as f64)
        .collect();
    push_mean_metric(rows, scenario, label, "mean_subgroups", &k_values);
    if !matches!(method, Method::StandardPractice | Method::Oracle) {
        let root_only: Vec<f64> = records
            .iter()
            .map(|r| f64::from(r.k_found <= 1))
            .collect();
        push_mean_metric(rows, scenario, label, "root_only_rate", &root_only);
    }

    for (c_idx, cutoff) in cfg.cutoffs.iter().enumerate() {
        let acc: Vec<f64> = records
            .iter()
            .filter_map(|r| r.classification.get(c_idx).map(|c| c.0))
            .collect();
        let ppv: Vec<f64> = records
            .iter()
            .filter_map(|r| r.classification.get(c_idx).and_then(|c| c.1))
            .collect();
        let npv: Vec<f64> = records
            .iter()
            .filter_map(|r| r.classification.get(c_idx).and_then(|c| c.2))
            .collect();
        push_mean_metric(rows, scenario, label, &format!("accuracy_at_{cutoff}"), &acc);
        push_mean_metric(rows, scenario, label, &format!("ppv_at_{cutoff}"), &ppv);
        push_mean_metric(rows, scenario, label, &format!("npv_at_{cutoff}"), &npv);
    }

    let monotone: Vec<f64> = records
        .iter()
        .filter_map(|r| r.cutoff_monotone.map(f64::from))
        .collect();
    push_mean_metric(rows, scenario, label, "cutoff_monotone_rate", &monotone);

    let all_b: Vec<f64> = records
        .iter()
        .filter_map(|r| r.all_b.map(f64::from))
        .collect();
    push_mean_metric(rows, scenario, label, "all_b_rate", &all_b);

    let skipped: f64 = records.iter().map(|r| r.skipped_subgroups as f64).sum();
    if skipped > 0.0 {
        rows.push(MetricRow {
            scenario: scenario.to_string(),
            method: label.to_string(),
            metric: "skipped_subgroups_total".into(),
            value: skipped,
            mc_se: None,
            n_replicates: records.len(),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn classification_metric_definitions() {
        // all predicted B, 70% truly benefit
        let predicted = vec![true; 10];
        let truth: Vec<bool> = (0..10).map(|i| i < 7).collect();
        let (acc, ppv, npv) = classification_metrics(&predicted, &truth);
        assert_abs_diff_eq!(acc, 0.7);
        assert_abs_diff_eq!(ppv.unwrap(), 0.7);
        assert!(npv.is_none());

        // perfect prediction
        let (acc, ppv, npv) = classification_metrics(&truth, &truth);
        assert_abs_diff_eq!(acc, 1.0);
        assert_abs_diff_eq!(ppv.unwrap(), 1.0);
        assert_abs_diff_eq!(npv.unwrap(), 1.0);

        // all predicted A where everyone should get B
        let predicted = vec![false; 4];
        let truth = vec![true; 4];
        let (acc, ppv, npv) = classification_metrics(&predicted, &truth);
        assert_abs_diff_eq!(acc, 0.0);
        assert!(ppv.is_none());
        assert_abs_diff_eq!(npv.unwrap(), 0.0);
    }

    #[test]
    fn standard_practice_threshold_behavior() {
        // strong effect: p below 0.05 -> everyone B
        let n = 200;
        let y: Vec<f64> = (0..n)
            .map(|i| 3.0 * f64::from(i % 2 == 1) + 0.1 * f64::from(i % 4 < 2))
            .collect();
        let arm: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let ds = TrialDataset::new(y, arm.clone(), vec![vec![0.0; n]], vec!["x".into()]).unwrap();
        let (all_b, p) = standard_practice_assign(&ds, OutcomeFamily::Continuous);
        assert!(all_b && p < 1e-10);

        // no effect: everyone A
        let y: Vec<f64> = (0..n).map(|i| f64::from((i / 2) % 2 == 0)).collect();
        let ds = TrialDataset::new(y, arm, vec![vec![0.0; n]], vec!["x".into()]).unwrap();
        let (all_b, p) = standard_practice_assign(&ds, OutcomeFamily::Binary);
        assert!(!all_b && p > 0.5);
    }

    #[test]
    fn prism_assign_respects_cutoffs() {
        use crate::infer::{Posterior, ProbStatement};
        let est = |k: usize, p_greater: f64| SubgroupEstimate {
            k,
            rule: String::new(),
            n_k: 1,
            n0: 1,
            n1: 1,
            mean0: 0.0,
            mean1: 0.0,
            estimate: 0.0,
            se: None,
            ci_low: None,
            ci_high: None,
            theta_tilde: None,
            se_ple: None,
            posterior: Some(Posterior { mean: 0.0, var: 1.0 }),
            probs: vec![ProbStatement {
                threshold: 0.0,
                greater: p_greater,
                less: 1.0 - p_greater,
            }],
            flagged: false,
        };
        let estimates = vec![est(0, 0.9), est(1, 0.6), est(2, 0.2)];
        let assignment = vec![1, 2, 1];
        let at_05 = prism_assign(&estimates, &assignment, 0.5);
        assert_eq!(at_05, vec![true, false, true]);
        let at_08 = prism_assign(&estimates, &assignment, 0.8);
        assert_eq!(at_08, vec![false, false, false]);
    }

    #[test]
    fn smoke_run_emits_all_metric_columns() {
        let cfg = StudyConfig {
            scenarios: vec![ScenarioSpec {
                family: OutcomeFamily::Continuous,
                setting: EffectSetting::Subgroup4,
                n_noise: 6,
            }],
            methods: vec![
                Method::Mob,
                Method::PrismA,
                Method::Oracle,
                Method::StandardPractice,
            ],
            replicates: 2,
            n: 200,
            base_seed: 42,
            cutoffs: vec![0.5, 0.8],
            oracle_m: 2000,
            forest_trees: 25,
        };
        let result = run_study(&cfg).unwrap();
        assert!(result.failures.is_empty(), "{:?}", result.failures);
        let scenario = "continuous/subgroup4/noise6";
        for metric in ["bias_overall", "bias_abs", "mse", "coverage"] {
            for method in ["mob", "prism_a", "oracle"] {
                assert!(
                    result.get(scenario, method, metric).is_some(),
                    "missing {method}/{metric}"
                );
            }
        }
        assert!(result.get(scenario, "prism_a", "pred_selection").is_some());
        assert!(result.get(scenario, "prism_a", "accuracy_at_0.5").is_some());
        assert!(result.get(scenario, "standard", "all_b_rate").is_some());
        assert!(result.get(scenario, "prism_a", "rel_eff_vs_mob").is_some());
        let csv = result.to_csv();
        assert!(csv.lines().count() > 10);

        // order independence: aggregates are identical on a rerun
        let result2 = run_study(&cfg).unwrap();
        assert_eq!(result, result2);
    }
}
