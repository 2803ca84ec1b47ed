//! `prism`: subgroup identification analyses on trial CSVs, synthetic-trial
//! generation, Monte Carlo operating-characteristics studies, and bootstrap
//! inference.
//!
//! Exit codes: 0 success, 1 input error, 2 numeric failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use prism_core::data::{load_csv, write_csv, CovariateKind, OutcomeFamily, TrialDataset};
use prism_core::pipeline::{
    dataset_hash, run_pipeline_full, ConfigName, PipelineConfig,
};
use prism_core::report::{
    render_estimates_text, render_forest_svg, render_posterior_svg, render_study_svg,
    render_tree_text,
};
use prism_core::rng::derive_rng;
use prism_core::simgen::{
    oracle_true_subgroup_effect, EffectSetting, SimScenario,
};
use prism_core::study::{run_study, Method, ScenarioSpec, StudyConfig};

#[derive(Parser)]
#[command(name = "prism", version, about = "Subgroup identification for randomized trials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a subgroup analysis on a trial CSV
    Analyze(AnalyzeArgs),
    /// Generate a synthetic trial CSV with a scenario sidecar
    Simulate(SimulateArgs),
    /// Run a Monte Carlo operating-characteristics study
    Study(StudyArgs),
    /// Analyze with bootstrap resampling of the whole pipeline
    Bootstrap(BootstrapArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Continuous,
    Binary,
}

impl From<FamilyArg> for OutcomeFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Continuous => OutcomeFamily::Continuous,
            FamilyArg::Binary => OutcomeFamily::Binary,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConfigArg {
    Mob,
    PrismA,
    PrismB,
}

impl From<ConfigArg> for ConfigName {
    fn from(c: ConfigArg) -> Self {
        match c {
            ConfigArg::Mob => ConfigName::Mob,
            ConfigArg::PrismA => ConfigName::PrismA,
            ConfigArg::PrismB => ConfigName::PrismB,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum FormatArg {
    Json,
    Text,
    Svg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SettingArg {
    Null,
    Subgroup4,
}

impl From<SettingArg> for EffectSetting {
    fn from(s: SettingArg) -> Self {
        match s {
            SettingArg::Null => EffectSetting::Null,
            SettingArg::Subgroup4 => EffectSetting::Subgroup4,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Mob,
    PrismA,
    PrismB,
    Oracle,
    Standard,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Mob => Method::Mob,
            MethodArg::PrismA => Method::PrismA,
            MethodArg::PrismB => Method::PrismB,
            MethodArg::Oracle => Method::Oracle,
            MethodArg::Standard => Method::StandardPractice,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trial CSV (header row required)
    #[arg(long)]
    input: PathBuf,
    /// Outcome column name
    #[arg(long, default_value = "y")]
    outcome: String,
    /// Treatment column name (0 = control, 1 = test)
    #[arg(long, default_value = "a")]
    treatment: String,
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// TOML pipeline config; flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "prism-a")]
    configuration: ConfigArg,
    #[arg(long)]
    seed: Option<u64>,
    /// Probability-statement thresholds, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    threshold: Vec<f64>,
    /// Covariate kind overrides, e.g. --kind X5=binary (repeatable)
    #[arg(long = "kind")]
    kinds: Vec<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![FormatArg::Json, FormatArg::Text])]
    format: Vec<FormatArg>,
    /// Write the per-patient counterfactual estimates as CSV
    #[arg(long)]
    dump_ple: bool,
    /// Bootstrap resamples (0 = off)
    #[arg(long)]
    bootstrap: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long, value_enum, default_value = "subgroup4")]
    setting: SettingArg,
    #[arg(long, default_value_t = 800)]
    n: usize,
    /// Noise covariates (6 or 56 reproduce the reference scenarios)
    #[arg(long, default_value_t = 6)]
    noise: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Oracle patients for the scenario's overall effect
    #[arg(long, default_value_t = 100_000)]
    oracle_m: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    /// TOML study config; flags below are ignored when present
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![FamilyArg::Continuous])]
    family: Vec<FamilyArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![SettingArg::Subgroup4])]
    setting: Vec<SettingArg>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![6])]
    noise: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![MethodArg::Mob, MethodArg::PrismA, MethodArg::Oracle, MethodArg::Standard])]
    methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    #[arg(long, default_value_t = 800)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.50, 0.80])]
    cutoffs: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    oracle_m: usize,
    /// Trees per counterfactual forest
    #[arg(long, default_value_t = 500)]
    trees: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write bar charts for the headline metrics
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct BootstrapArgs {
    #[command(flatten)]
    analyze: AnalyzeArgs,
    /// Bootstrap resamples
    #[arg(long, default_value_t = 500)]
    b: usize,
    /// Keep per-resample estimate vectors in the report
    #[arg(long)]
    keep_draws: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are successes; everything else is an
            // input error
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Analyze(args) => analyze(args, None, false),
        Command::Simulate(args) => simulate(args),
        Command::Study(args) => study(args),
        Command::Bootstrap(args) => analyze(args.analyze, Some(args.b), args.keep_draws),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let input = e
                .downcast_ref::<prism_core::Error>()
                .map_or(true, |pe| pe.is_input());
            ExitCode::from(if input { 1 } else { 2 })
        }
    }
}

fn parse_kind_overrides(specs: &[String]) -> anyhow::Result<Vec<(String, CovariateKind)>> {
    specs
        .iter()
        .map(|s| {
            let (name, kind) = s.split_once('=').ok_or_else(|| {
                anyhow::anyhow!("bad --kind {s:?}; expected NAME=binary or NAME=continuous")
            })?;
            let kind = match kind {
                "binary" => CovariateKind::Binary,
                "continuous" => CovariateKind::Continuous,
                other => anyhow::bail!("unknown covariate kind {other:?}"),
            };
            Ok((name.to_string(), kind))
        })
        .collect()
}

fn apply_kind_overrides(
    ds: TrialDataset,
    overrides: &[(String, CovariateKind)],
) -> anyhow::Result<TrialDataset> {
    if overrides.is_empty() {
        return Ok(ds);
    }
    let mut kinds = ds.kinds().to_vec();
    for (name, kind) in overrides {
        let j = ds
            .names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| anyhow::anyhow!("--kind references unknown covariate {name:?}"))?;
        kinds[j] = *kind;
    }
    let columns = (0..ds.n_covariates())
        .map(|j| ds.covariate(j).to_vec())
        .collect();
    Ok(TrialDataset::with_kinds(
        ds.y().to_vec(),
        ds.arm().to_vec(),
        columns,
        ds.names().to_vec(),
        kinds,
    )?)
}

fn build_pipeline_config(args: &AnalyzeArgs) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
            toml::from_str::<PipelineConfig>(&text)
                .map_err(|e| anyhow::anyhow!("bad config {}: {e}", path.display()))?
        }
        None => PipelineConfig::named(args.configuration.into(), args.family.into(), 0),
    };
    if args.config.is_none() {
        cfg.configuration = args.configuration.into();
        cfg.family = args.family.into();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if !args.threshold.is_empty() {
        cfg.thresholds = args.threshold.clone();
    }
    Ok(cfg)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn analyze(args: AnalyzeArgs, bootstrap: Option<usize>, keep_draws: bool) -> anyhow::Result<()> {
    let overrides = parse_kind_overrides(&args.kinds)?;
    let ds = load_csv(&args.input, &args.outcome, &args.treatment)?;
    let ds = apply_kind_overrides(ds, &overrides)?;
    let mut cfg = build_pipeline_config(&args)?;
    if let Some(b) = bootstrap.or(args.bootstrap) {
        cfg.bootstrap_b = b;
    }
    if keep_draws {
        cfg.bootstrap_keep_draws = true;
    }

    let (report, fitted) = run_pipeline_full(&ds, &cfg)?;

    if args.format.contains(&FormatArg::Json) {
        let path = write_file(
            &args.out,
            "report.json",
            &serde_json::to_string_pretty(&report)?,
        )?;
        println!("wrote {}", path.display());
    }
    if args.format.contains(&FormatArg::Text) {
        let mut text = render_tree_text(&report);
        text.push('\n');
        text.push_str(&render_estimates_text(&report));
        let path = write_file(&args.out, "report.txt", &text)?;
        println!("wrote {}", path.display());
    }
    if args.format.contains(&FormatArg::Svg) {
        let (forest, _) = render_forest_svg(&report);
        let path = write_file(&args.out, "forest.svg", &forest)?;
        println!("wrote {}", path.display());
        let path = write_file(&args.out, "posterior.svg", &render_posterior_svg(&report))?;
        println!("wrote {}", path.display());
    }
    if args.dump_ple {
        if let Some(ple) = &fitted.ple {
            let mut csv = String::from("patient,mu0_hat,mu1_hat,theta_hat\n");
            for i in 0..ple.n() {
                csv.push_str(&format!(
                    "{i},{},{},{}\n",
                    ple.mu0_hat[i], ple.mu1_hat[i], ple.theta_hat[i]
                ));
            }
            let path = write_file(&args.out, "ple.csv", &csv)?;
            println!("wrote {}", path.display());
        } else {
            eprintln!("note: this configuration fits no patient-level estimates; no ple.csv");
        }
    }

    let overall = &report.subgroups[0];
    println!(
        "overall estimate {:.4} [{:.4}, {:.4}], {} subgroup(s)",
        overall.estimate,
        overall.ci_low.unwrap_or(f64::NAN),
        overall.ci_high.unwrap_or(f64::NAN),
        report.tree.k
    );
    Ok(())
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let scenario = SimScenario::new(
        args.family.into(),
        args.setting.into(),
        args.noise,
        args.n,
        args.seed,
    )?;
    if !scenario.is_canonical_noise() {
        eprintln!(
            "note: {} noise covariates is a non-canonical setting (reference scenarios use 6 or 56)",
            args.noise
        );
    }
    let ds = prism_core::simgen::generate_trial(&scenario);
    fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join("trial.csv");
    write_csv(&ds, &csv_path, "y", "a")?;
    println!("wrote {}", csv_path.display());

    let mut rng = derive_rng(scenario.seed, &[100]);
    let oracle_ate = oracle_true_subgroup_effect(|_| true, &scenario, args.oracle_m, &mut rng)?;
    let sidecar = serde_json::json!({
        "scenario": scenario,
        "oracle_ate": oracle_ate,
        "oracle_m": args.oracle_m,
        "dataset_sha256": dataset_hash(&ds),
    });
    let path = write_file(&args.out, "scenario.json", &serde_json::to_string_pretty(&sidecar)?)?;
    println!("wrote {}", path.display());
    println!("oracle overall effect: {oracle_ate:.4}");
    Ok(())
}

fn study(args: StudyArgs) -> anyhow::Result<()> {
    let cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
            toml::from_str::<StudyConfig>(&text)
                .map_err(|e| anyhow::anyhow!("bad config {}: {e}", path.display()))?
        }
        None => {
            let mut scenarios = Vec::new();
            for &family in &args.family {
                for &setting in &args.setting {
                    for &n_noise in &args.noise {
                        scenarios.push(ScenarioSpec {
                            family: family.into(),
                            setting: setting.into(),
                            n_noise,
                        });
                    }
                }
            }
            StudyConfig {
                scenarios,
                methods: args.methods.iter().map(|&m| m.into()).collect(),
                replicates: args.replicates,
                n: args.n,
                base_seed: args.seed,
                cutoffs: args.cutoffs.clone(),
                oracle_m: args.oracle_m,
                forest_trees: args.trees,
            }
        }
    };

    let result = run_study(&cfg)?;
    let path = write_file(&args.out, "metrics.csv", &result.to_csv())?;
    println!("wrote {}", path.display());
    let path = write_file(
        &args.out,
        "summary.json",
        &serde_json::to_string_pretty(&result)?,
    )?;
    println!("wrote {}", path.display());
    if args.svg {
        for metric in ["bias_abs", "coverage", "rel_eff_vs_mob", "accuracy_at_0.5"] {
            let chart = render_study_svg(&result, metric);
            let name = format!("chart_{}.svg", metric.replace('.', "_"));
            let path = write_file(&args.out, &name, &chart)?;
            println!("wrote {}", path.display());
        }
    }
    if !result.failures.is_empty() {
        eprintln!(
            "note: {} replicate run(s) failed and were excluded; see summary.json",
            result.failures.len()
        );
    }
    Ok(())
}
