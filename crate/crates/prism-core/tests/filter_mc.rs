//! Monte Carlo behavior of the elastic-net filter: near-null selection under
//! pure noise, and retention of the true signal covariates in the synthetic
//! subgroup scenario.

use prism_core::enet::{filter_covariates, fit_elastic_net, EnetFamily};
use prism_core::rng::derive_rng;
use prism_core::simgen::{generate_trial, EffectSetting, OutcomeFamily, SimScenario};
use prism_core::{FilteredView, TrialDataset};
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn pure_noise_filter_keeps_almost_nothing() {
    let n = 800;
    let p = 10;
    let reps = 100;
    let mut all_zero = 0usize;
    let mut kept_total = 0usize;
    for seed in 0..reps {
        let mut rng = derive_rng(1000 + seed, &[0]);
        let columns: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut cv_rng = derive_rng(2000 + seed, &[1]);
        let fit = fit_elastic_net(&columns, &y, EnetFamily::Gaussian, 0.5, &mut cv_rng).unwrap();
        let nz = fit.chosen_coefficients().iter().filter(|&&b| b != 0.0).count();
        kept_total += nz;
        if nz == 0 {
            all_zero += 1;
        }
    }
    let all_zero_rate = all_zero as f64 / reps as f64;
    let mean_kept = kept_total as f64 / (reps * p) as f64;
    assert!(
        all_zero_rate >= 0.15,
        "all-zero rate under pure noise: {all_zero_rate}"
    );
    assert!(
        mean_kept <= 0.25,
        "mean kept fraction under pure noise: {mean_kept}"
    );
}

#[test]
fn subgroup_scenario_retains_signal_covariates() {
    // X1, X2, X3 (predictive) and X5, X7, X10 (prognostic), 0-based indices
    let signal = [0usize, 1, 2, 4, 6, 9];
    let reps = 100u64;
    let mut total_frac = 0.0;
    for seed in 0..reps {
        let sc = SimScenario::canonical(
            OutcomeFamily::Continuous,
            EffectSetting::Subgroup4,
            56,
            7000 + seed,
        )
        .unwrap();
        let ds = generate_trial(&sc);
        let mut rng = derive_rng(8000 + seed, &[0]);
        let (view, _) = filter_covariates(&ds, EnetFamily::Gaussian, 0.5, &mut rng).unwrap();
        let hits = signal
            .iter()
            .filter(|j| view.kept_columns().contains(j))
            .count();
        total_frac += hits as f64 / signal.len() as f64;
    }
    let mean_retention = total_frac / reps as f64;
    assert!(
        mean_retention >= 0.90,
        "mean signal retention: {mean_retention}"
    );
}

#[test]
fn all_constant_covariates_give_empty_view_without_error() {
    let n = 40;
    let ds = TrialDataset::new(
        (0..n).map(|i| i as f64 * 0.1).collect(),
        (0..n).map(|i| (i % 2) as u8).collect(),
        vec![vec![1.0; n], vec![0.0; n]],
        vec!["c1".into(), "c2".into()],
    )
    .unwrap();
    let mut rng = derive_rng(1, &[0]);
    let (view, _) = filter_covariates(&ds, EnetFamily::Gaussian, 0.5, &mut rng).unwrap();
    assert_eq!(view, FilteredView::new(vec![], 2).unwrap());
}
