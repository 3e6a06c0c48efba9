//! The `simulate`, `fit`, `boot-test` and `replicate` commands.

use std::fmt::Display;
use std::path::PathBuf;

use compolicy_core::datamodel::{contrast_profile, decision, fit_q_models, Action, FeatureMap, ObsDataset, QModelSet, UtilityModel};
use compolicy_core::estimation::{
    fit_fixed_grid, fit_metropolis, Diagnostics, FitReport, MetropolisConfig, MetropolisMode, ProfileProblem,
    ProposalSd, DEFAULT_CHAIN_LENGTH, DEFAULT_GRID_SIZE, DEFAULT_PROPOSAL_SD,
};
use compolicy_core::inference::{
    bootstrap_draws, default_bandwidth, heterogeneity_test, influence_set, KernelFunctional, PerturbationForm,
};
use compolicy_core::numcore::RngStream;
use compolicy_core::simlab::{
    describe_table, replicate_table, value_observational, ReplicationSettings, Scenario, ScenarioId, TableId,
    Y3Reading, DEFAULT_SIZES,
};

use crate::config::{split_list, RunConfig};
use crate::dataset::{csv_text, float, read_dataset, write_file, ActionCoding, ColumnSpec, LoadedData};
use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Smallest bootstrap size accepted; below it the p-value is too coarse.
pub const MIN_BOOTSTRAP: usize = 100;

pub const SIMULATE_KEYS: &[&str] = &["scenario", "n", "omega", "rho", "theta", "y3", "seed", "out"];

const FIT_KEYS: &[&str] = &[
    "input",
    "covariates",
    "action",
    "outcomes",
    "negate",
    "utility",
    "utility_covariates",
    "behavior_covariates",
    "grid_size",
    "chain_length",
    "burn_in",
    "proposal_sd",
    "seed",
    "out",
];

pub fn fit_keys() -> Vec<&'static str> {
    let mut keys = FIT_KEYS.to_vec();
    keys.push("folds");
    keys
}

pub fn boot_test_keys() -> Vec<&'static str> {
    let mut keys = FIT_KEYS.to_vec();
    keys.extend(["n_boot", "alpha", "perturbation", "bandwidth"]);
    keys
}

pub const REPLICATE_KEYS: &[&str] = &[
    "table",
    "reps",
    "seed",
    "test_n",
    "sizes",
    "grid_size",
    "chain_length",
    "proposal_sd",
    "n_boot",
    "alpha",
    "perturbation",
    "y3",
    "out",
];

/// Plain-text `key = value` report with `[section]` headings.
struct Report {
    lines: Vec<String>,
}

impl Report {
    fn new(cfg: &RunConfig) -> Self {
        let mut lines = vec![format!("# compolicy {VERSION} {}", cfg.command()), "[config]".to_string()];
        lines.extend(cfg.echo());
        Report { lines }
    }

    fn section(&mut self, name: &str) {
        self.lines.push(String::new());
        self.lines.push(format!("[{name}]"));
    }

    fn kv(&mut self, key: &str, value: impl Display) {
        self.lines.push(format!("{key} = {value}"));
    }

    fn real(&mut self, key: &str, value: f64) {
        self.kv(key, float(value));
    }

    fn finish(mut self) -> String {
        self.lines.push(String::new());
        self.lines.join("\n")
    }
}

fn output_dir(cfg: &mut RunConfig) -> PathBuf {
    PathBuf::from(cfg.string("out", "."))
}

fn parse_proposal_sd(raw: &str) -> CliResult<ProposalSd> {
    if raw.eq_ignore_ascii_case("auto") {
        return Ok(ProposalSd::Auto);
    }
    match raw.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(ProposalSd::Fixed(v)),
        _ => Err(CliError::Config(format!("proposal_sd must be 'auto' or a positive number, got '{raw}'"))),
    }
}

fn parse_perturbation(raw: &str) -> CliResult<PerturbationForm> {
    match raw.to_ascii_lowercase().as_str() {
        "contrast" | "contrast_weighted" => Ok(PerturbationForm::ContrastWeighted),
        "weight" | "weight_only" => Ok(PerturbationForm::WeightOnly),
        _ => Err(CliError::Config(format!("perturbation must be 'contrast' or 'weight', got '{raw}'"))),
    }
}

fn parse_y3(raw: &str) -> CliResult<Y3Reading> {
    raw.parse().map_err(|e| CliError::Config(format!("y3: {e}")))
}

fn parse_numbers<T: std::str::FromStr>(key: &str, raw: &str) -> CliResult<Vec<T>> {
    split_list(raw)
        .iter()
        .map(|v| v.parse().map_err(|_| CliError::Config(format!("invalid entry '{v}' in '{key}'"))))
        .collect()
}

fn outcome_names(k: usize) -> Vec<String> {
    if k == 2 {
        vec!["y".into(), "z".into()]
    } else {
        (1..=k).map(|j| format!("y{j}")).collect()
    }
}

/// Builds the requested scenario, rejecting parameters it does not use.
fn build_scenario(cfg: &mut RunConfig, id: ScenarioId, n: usize) -> CliResult<Scenario> {
    let applicable: &[&str] = match id {
        ScenarioId::FixedFixed => &["omega", "rho"],
        ScenarioId::FixedVarRho => &["omega"],
        ScenarioId::BootPower => &["theta"],
        ScenarioId::ThreeOutcomes => &["rho", "y3"],
        _ => &[],
    };
    if let Some(key) = ["omega", "rho", "theta", "y3"].into_iter().find(|k| cfg.is_set(k) && !applicable.contains(k)) {
        return Err(CliError::Config(format!("'{key}' does not apply to scenario {id}")));
    }
    let scenario = match id {
        ScenarioId::FixedFixed => Scenario::fixed_fixed(n, cfg.parse("omega", 0.25)?, cfg.parse("rho", 0.8)?)?,
        ScenarioId::FixedVarRho => Scenario::fixed_var_rho(n, cfg.parse("omega", 0.25)?)?,
        ScenarioId::BootPower => {
            let theta: Vec<f64> = parse_numbers("theta", &cfg.string("theta", "1,0,0"))?;
            let theta: [f64; 3] = theta
                .try_into()
                .map_err(|_| CliError::Config("theta needs exactly three entries".into()))?;
            Scenario::boot_power(n, theta)?
        }
        ScenarioId::ThreeOutcomes => {
            let rho = cfg.parse("rho", 0.8)?;
            let y3 = parse_y3(&cfg.string("y3", Y3Reading::default().name()))?;
            Scenario::three_outcomes(n, rho, y3)?
        }
        other => Scenario::default_for(other, n)?,
    };
    Ok(scenario)
}

pub fn simulate(cfg: &mut RunConfig) -> CliResult<Vec<PathBuf>> {
    let id: ScenarioId = cfg.parse_required("scenario")?;
    let n: usize = cfg.parse("n", 500)?;
    let scenario = build_scenario(cfg, id, n)?;
    let seed = cfg.seed()?;
    let out = output_dir(cfg);

    let (data, truth) = scenario.generate(&mut RngStream::new(seed))?;
    let names = outcome_names(scenario.k());
    let mut provenance = vec![format!("compolicy {VERSION} simulate"), format!("scenario_name = {id}")];
    provenance.extend(cfg.echo());

    let mut header: Vec<String> = (1..=data.p()).map(|j| format!("x{j}")).collect();
    header.push("a".into());
    header.extend(names.iter().cloned());
    let rows: Vec<Vec<String>> = (0..data.n())
        .map(|i| {
            let mut row: Vec<String> = data.covariate_row(i).iter().map(|&v| float(v)).collect();
            row.push(data.actions()[i].code().to_string());
            row.extend(data.outcome_row(i).iter().map(|&v| float(v)));
            row
        })
        .collect();
    let data_path = write_file(&out, "data.csv", &csv_text(&provenance, &header, &rows)?)?;

    let mut header = vec!["row".to_string(), "score".into(), "optimal".into(), "prob_optimal".into()];
    header.extend(names.iter().map(|o| format!("omega_{o}")));
    header.push("utility".into());
    header.extend(names.iter().map(|o| format!("error_{o}")));
    let rows: Vec<Vec<String>> = (0..data.n())
        .map(|i| {
            let mut row = vec![
                (i + 1).to_string(),
                float(truth.scores[i]),
                truth.optimal[i].code().to_string(),
                float(truth.prob_optimal[i]),
            ];
            row.extend(truth.weights[i].iter().map(|&w| float(w)));
            row.push(float(truth.utilities[i]));
            row.extend(truth.errors.row(i).iter().map(|&e| float(e)));
            row
        })
        .collect();
    let truth_path = write_file(&out, "truth.csv", &csv_text(&provenance, &header, &rows)?)?;
    Ok(vec![data_path, truth_path])
}

#[derive(Debug, Clone)]
enum UtilityKind {
    Fixed,
    PatientSpecific(FeatureMap),
}

/// Estimator settings shared by `fit`, `boot-test` and cross-fitting.
#[derive(Debug, Clone)]
struct Estimator {
    utility: UtilityKind,
    behavior: FeatureMap,
    grid_size: usize,
    chain: Option<MetropolisConfig>,
}

impl Estimator {
    fn fit(&self, data: &ObsDataset) -> compolicy_core::Result<(QModelSet, FitReport)> {
        let q = fit_q_models(data)?;
        let report = {
            let problem = ProfileProblem::new(data, &q, self.behavior.clone())?;
            let chain = || {
                self.chain
                    .as_ref()
                    .ok_or_else(|| compolicy_core::Error::InvalidInput("no Metropolis settings".into()))
            };
            match (&self.utility, data.k()) {
                (UtilityKind::Fixed, 2) => fit_fixed_grid(&problem, self.grid_size)?,
                (UtilityKind::Fixed, _) => fit_metropolis(&problem, chain()?, &MetropolisMode::FixedSimplex)?,
                (UtilityKind::PatientSpecific(features), _) => fit_metropolis(
                    &problem,
                    chain()?,
                    &MetropolisMode::PatientSpecific { features: features.clone() },
                )?,
            }
        };
        Ok((q, report))
    }
}

fn select_columns(names: &[String], wanted: &[String], key: &str) -> CliResult<Vec<usize>> {
    wanted
        .iter()
        .map(|w| {
            names
                .iter()
                .position(|n| n == w)
                .ok_or_else(|| CliError::Config(format!("'{w}' in '{key}' is not a covariate")))
        })
        .collect()
}

/// `all`, `none` (intercept only) or a comma-separated covariate list.
fn covariate_features(cfg: &mut RunConfig, key: &str, names: &[String]) -> CliResult<FeatureMap> {
    let list = split_list(&cfg.string(key, "all"));
    Ok(match list.as_slice() {
        [one] if one == "all" => FeatureMap::full(names.len()),
        [one] if one == "none" => FeatureMap::intercept_only(),
        _ => FeatureMap::columns(select_columns(names, &list, key)?),
    })
}

fn setup_fit(cfg: &mut RunConfig, default_utility: &str) -> CliResult<(LoadedData, Estimator)> {
    let input = PathBuf::from(cfg.required("input")?);
    let spec = ColumnSpec {
        covariates: cfg.list("covariates"),
        action: cfg.string("action", "a"),
        outcomes: split_list(&cfg.required("outcomes")?),
        negate: cfg.list("negate").unwrap_or_default(),
    };
    let loaded = read_dataset(&input, &spec)?;
    if loaded.coding == ActionCoding::Recoded {
        eprintln!("note: action column '{}' recoded from {{0, 1}} to {{-1, 1}}", spec.action);
    }

    let names = &loaded.covariate_names;
    let behavior = covariate_features(cfg, "behavior_covariates", names)?;
    let utility = match cfg.string("utility", default_utility).as_str() {
        "fixed" => {
            if cfg.is_set("utility_covariates") {
                return Err(CliError::Config("utility_covariates requires utility = patient".into()));
            }
            UtilityKind::Fixed
        }
        "patient" => UtilityKind::PatientSpecific(covariate_features(cfg, "utility_covariates", names)?),
        other => return Err(CliError::Config(format!("utility must be 'fixed' or 'patient', got '{other}'"))),
    };
    let uses_chain = !matches!(utility, UtilityKind::Fixed) || loaded.data.k() > 2;
    let grid_size = if uses_chain { DEFAULT_GRID_SIZE } else { cfg.parse("grid_size", DEFAULT_GRID_SIZE)? };
    let chain = if uses_chain {
        let chain_length = cfg.parse("chain_length", DEFAULT_CHAIN_LENGTH)?;
        let burn_in = cfg.parse("burn_in", chain_length / 10)?;
        let proposal_sd = parse_proposal_sd(&cfg.string("proposal_sd", &DEFAULT_PROPOSAL_SD.to_string()))?;
        let config = MetropolisConfig { chain_length, proposal_sd, burn_in, seed: cfg.seed()? };
        config.validate()?;
        Some(config)
    } else {
        None
    };
    Ok((loaded, Estimator { utility, behavior, grid_size, chain }))
}

fn feature_names(features: &FeatureMap, covariates: &[String]) -> Vec<String> {
    let mut names = vec!["intercept".to_string()];
    names.extend(features.columns.iter().map(|&c| covariates[c].clone()));
    names.extend(features.squares.iter().map(|&c| format!("{}_sq", covariates[c])));
    names
}

/// Names of the utility parameters as the bootstrap sees them.
fn theta_names(utility: &UtilityModel, loaded: &LoadedData) -> Vec<String> {
    let outcomes = &loaded.outcome_names;
    match utility {
        UtilityModel::PatientSpecific { features, .. } => {
            let names = feature_names(features, &loaded.covariate_names);
            outcomes[..outcomes.len() - 1]
                .iter()
                .flat_map(|o| names.iter().map(move |f| format!("theta_{o}_{f}")))
                .collect()
        }
        UtilityModel::Fixed { .. } => vec![format!("theta_{}_intercept", outcomes[0])],
    }
}

fn describe_data(report: &mut Report, loaded: &LoadedData) {
    report.section("data");
    report.kv("records", loaded.data.n());
    report.kv("covariates", if loaded.covariate_names.is_empty() { "none".to_string() } else { loaded.covariate_names.join(",") });
    report.kv("outcomes", loaded.outcome_names.join(","));
    report.kv("negated", if loaded.negated.is_empty() { "none".to_string() } else { loaded.negated.join(",") });
    match loaded.coding {
        ActionCoding::Signed => report.kv("action_coding", "-1/1"),
        ActionCoding::Recoded => {
            report.kv("action_coding", "0/1");
            report.kv("note", "action recoded from {0, 1} to {-1, 1}");
        }
    }
}

fn describe_fit(report: &mut Report, loaded: &LoadedData, fit: &FitReport) {
    report.section("fit");
    report.kv("method", fit.method.name());
    match &fit.utility {
        UtilityModel::Fixed { .. } => {
            report.kv("utility", "fixed");
            for (o, w) in loaded.outcome_names.iter().zip(fit.utility.weights_at(&[])) {
                report.real(&format!("omega_{o}"), w);
            }
        }
        UtilityModel::PatientSpecific { .. } => {
            report.kv("utility", "patient");
            for (name, v) in theta_names(&fit.utility, loaded).iter().zip(fit.utility.parameters()) {
                report.real(name, v);
            }
        }
    }
    for (name, b) in feature_names(&fit.behavior.features, &loaded.covariate_names).iter().zip(&fit.behavior.beta) {
        report.real(&format!("beta_{name}"), *b);
    }
    report.real("pseudo_loglik", fit.pseudo_loglik_at_max);
    report.kv("separation", fit.separation);
    match &fit.diagnostics {
        Diagnostics::Grid { omegas, tied, .. } => {
            report.kv("grid_points", omegas.len());
            report.kv("grid_tied", tied);
        }
        Diagnostics::Chain { accepted, acceptance_rate, proposal_sd, burn_in, best_index, .. } => {
            report.kv("chain_accepted", accepted.iter().filter(|&&a| a).count());
            report.real("chain_acceptance_rate", *acceptance_rate);
            report.real("chain_proposal_sd", *proposal_sd);
            report.kv("chain_burn_in", burn_in);
            report.kv("chain_best_index", best_index);
        }
    }
}

pub fn fit(cfg: &mut RunConfig) -> CliResult<Vec<PathBuf>> {
    let (loaded, estimator) = setup_fit(cfg, "fixed")?;
    let folds: usize = cfg.parse("folds", 0)?;
    let out = output_dir(cfg);
    let (q, fit) = estimator.fit(&loaded.data)?;
    let value = if folds > 0 {
        Some(value_observational(&loaded.data, folds, |train| {
            let (q, fit) = estimator.fit(train)?;
            let utility = fit.utility.clone();
            Ok((move |x: &[f64]| decision(&q, &fit.utility, x), utility))
        })?)
    } else {
        None
    };

    let mut report = Report::new(cfg);
    describe_data(&mut report, &loaded);
    describe_fit(&mut report, &loaded, &fit);
    if let Some(v) = &value {
        report.section("value");
        report.kv("folds", v.folds.len());
        report.real("value", v.value);
        report.real("standard_of_care", v.standard_of_care);
        report.real("percent_improvement", v.percent_improvement);
        report.kv("skipped_folds", v.skipped_folds());
        for (f, fold) in v.folds.iter().enumerate() {
            if fold.value.is_none() {
                report.kv("warning", format!("fold {} has no record agreeing with the policy", f + 1));
            }
        }
    }
    let report_path = write_file(&out, "fit.txt", &report.finish())?;

    let mut header = vec!["row".to_string(), "recommended".into(), "score".into()];
    header.extend(loaded.outcome_names.iter().map(|o| format!("omega_{o}")));
    header.push("p_optimal".into());
    let rows: Vec<Vec<String>> = (0..loaded.data.n())
        .map(|i| {
            let x = loaded.data.covariate_row(i);
            let profile = contrast_profile(&q, &fit.utility, x);
            let mut row =
                vec![(i + 1).to_string(), Action::from_score(profile.score).code().to_string(), float(profile.score)];
            row.extend(profile.weights.iter().map(|&w| float(w)));
            row.push(float(fit.behavior.prob_optimal(x)));
            row
        })
        .collect();
    let mut provenance = vec![format!("compolicy {VERSION} fit")];
    provenance.extend(cfg.echo());
    let decisions_path = write_file(&out, "decisions.csv", &csv_text(&provenance, &header, &rows)?)?;
    Ok(vec![report_path, decisions_path])
}

/// Seed of the bootstrap draws, kept apart from the chain's stream.
fn bootstrap_seed(seed: u64) -> u64 {
    RngStream::with_stream(seed, u64::MAX).next_u64()
}

/// Linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize_draws(report: &mut Report, prefix: &str, names: &[String], draws: &[&[f64]]) {
    for (j, name) in names.iter().enumerate() {
        let mut values: Vec<f64> = draws.iter().map(|d| d[j]).collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        values.sort_by(f64::total_cmp);
        report.real(&format!("{prefix}_{name}_mean"), mean);
        report.real(&format!("{prefix}_{name}_sd"), sd);
        report.real(&format!("{prefix}_{name}_q025"), quantile(&values, 0.025));
        report.real(&format!("{prefix}_{name}_q975"), quantile(&values, 0.975));
    }
}

pub fn boot_test(cfg: &mut RunConfig) -> CliResult<Vec<PathBuf>> {
    let n_boot: usize = cfg.parse("n_boot", 1000)?;
    if n_boot < MIN_BOOTSTRAP {
        return Err(CliError::Config(format!("n_boot must be at least {MIN_BOOTSTRAP}, got {n_boot}")));
    }
    let alpha: f64 = cfg.parse("alpha", 0.05)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let perturbation = parse_perturbation(&cfg.string("perturbation", "contrast"))?;
    let bandwidth = match cfg.optional("bandwidth") {
        Some(raw) => Some(
            raw.parse::<f64>()
                .ok()
                .filter(|h| *h > 0.0 && h.is_finite())
                .ok_or_else(|| CliError::Config(format!("bandwidth must be a positive number, got '{raw}'")))?,
        ),
        None => None,
    };
    let seed = cfg.seed()?;
    let (loaded, estimator) = setup_fit(cfg, "patient")?;
    let out = output_dir(cfg);

    let data = &loaded.data;
    let (q, fit) = estimator.fit(data)?;
    let infl = influence_set(data, &q, &fit)?;
    let h = match bandwidth {
        Some(h) => h,
        None => default_bandwidth(data, &q, &fit.utility)?,
    };
    let kernel = KernelFunctional::new(data, &q, &fit, h, perturbation)?;
    let draws = bootstrap_draws(&infl, &kernel, n_boot, bootstrap_seed(seed))?;
    let test = heterogeneity_test(&kernel, &draws, alpha)?;

    let mut report = Report::new(cfg);
    describe_data(&mut report, &loaded);
    describe_fit(&mut report, &loaded, &fit);
    report.section("test");
    report.real("statistic", test.statistic);
    report.real("p_value", test.p_value);
    report.kv("n_boot", test.n_boot);
    report.real("alpha", test.alpha);
    report.kv("reject", test.reject);
    report.real("bandwidth", h);
    if matches!(fit.utility, UtilityModel::Fixed { .. }) {
        report.kv("note", "fixed weights have no heterogeneity coefficients; the statistic is zero");
    }
    report.section("draws");
    let u: Vec<&[f64]> = draws.iter().map(|d| d.u_tilde.as_slice()).collect();
    summarize_draws(&mut report, "u", &theta_names(&fit.utility, &loaded), &u);
    let b: Vec<&[f64]> = draws.iter().map(|d| d.b_tilde.as_slice()).collect();
    summarize_draws(&mut report, "b", &feature_names(&fit.behavior.features, &loaded.covariate_names), &b);
    Ok(vec![write_file(&out, "test.txt", &report.finish())?])
}

fn table_stem(table: TableId) -> String {
    format!("table{}", table.name().trim_start_matches('T').to_ascii_lowercase())
}

pub fn replicate(cfg: &mut RunConfig) -> CliResult<Vec<PathBuf>> {
    let table: TableId = cfg.parse_required("table")?;
    let reps: usize = cfg.parse("reps", 500)?;
    let seed = cfg.seed()?;
    let defaults = ReplicationSettings::default();
    let sizes_default = DEFAULT_SIZES.map(|n| n.to_string()).join(",");
    let settings = ReplicationSettings {
        test_n: cfg.parse("test_n", defaults.test_n)?,
        grid_size: cfg.parse("grid_size", defaults.grid_size)?,
        chain_length: cfg.parse("chain_length", defaults.chain_length)?,
        proposal_sd: parse_proposal_sd(&cfg.string("proposal_sd", &DEFAULT_PROPOSAL_SD.to_string()))?,
        n_boot: cfg.parse("n_boot", defaults.n_boot)?,
        alpha: cfg.parse("alpha", defaults.alpha)?,
        perturbation: parse_perturbation(&cfg.string("perturbation", "contrast"))?,
        y3: parse_y3(&cfg.string("y3", defaults.y3.name()))?,
        sizes: parse_numbers("sizes", &cfg.string("sizes", &sizes_default))?,
    };
    if table == TableId::Power && settings.n_boot < MIN_BOOTSTRAP {
        return Err(CliError::Config(format!("n_boot must be at least {MIN_BOOTSTRAP}, got {}", settings.n_boot)));
    }
    let out = output_dir(cfg);
    let summary = replicate_table(table, reps, seed, &settings)?;

    let mut provenance = vec![
        format!("compolicy {VERSION} replicate"),
        format!("table {}: {}", table.name(), table.title()),
        format!("seed = {seed}"),
        format!("reps = {reps}"),
        format!("y3_reading = {}", settings.y3.name()),
    ];
    provenance.extend(cfg.echo().into_iter().map(|l| format!("config: {l}")));
    provenance.extend(describe_table(table, &settings)?.into_iter().map(|l| format!("scenario: {l}")));
    let header: String = provenance.iter().map(|l| format!("# {l}\n")).collect();
    let stem = table_stem(table);
    let csv_path = write_file(&out, &format!("{stem}.csv"), &format!("{header}{}", summary.to_csv()))?;
    let txt_path = write_file(&out, &format!("{stem}.txt"), &format!("{header}\n{}", summary.to_text()))?;
    Ok(vec![csv_path, txt_path])
}
