use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;

use super::scenario::{FitPlan, PlanMethod, Scenario, ScenarioId, TestSample, TrueBehavior, Y3Reading};
use crate::datamodel::{decision, fit_q_models, Action, ObsDataset, QModelSet, UtilityModel};
use crate::error::{Error, Result};
use crate::estimation::{
    fit_fixed_grid, fit_metropolis, FitReport, MetropolisConfig, MetropolisMode, ProfileProblem, ProposalSd, DEFAULT_PROPOSAL_SD,
    DEFAULT_CHAIN_LENGTH, DEFAULT_GRID_SIZE,
};
use crate::inference::{
    bootstrap_draws, default_bandwidth, heterogeneity_test, influence_set, HeterogeneityTest, KernelFunctional,
    PerturbationForm,
};
use crate::numcore::{expit, RngStream};

pub const DEFAULT_SIZES: [usize; 4] = [100, 200, 300, 500];

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSettings {
    pub test_n: usize,
    pub grid_size: usize,
    pub chain_length: usize,
    pub proposal_sd: ProposalSd,
    pub n_boot: usize,
    pub alpha: f64,
    pub perturbation: PerturbationForm,
    pub y3: Y3Reading,
    /// Sample sizes for the table rows.
    pub sizes: Vec<usize>,
}

impl Default for ReplicationSettings {
    fn default() -> Self {
        ReplicationSettings {
            test_n: 500,
            grid_size: DEFAULT_GRID_SIZE,
            chain_length: DEFAULT_CHAIN_LENGTH,
            proposal_sd: ProposalSd::Fixed(DEFAULT_PROPOSAL_SD),
            n_boot: 1000,
            alpha: 0.05,
            perturbation: PerturbationForm::default(),
            y3: Y3Reading::default(),
            sizes: DEFAULT_SIZES.to_vec(),
        }
    }
}

/// Fits the plan's estimator to one dataset.
pub fn fit_with_plan(
    data: &ObsDataset,
    q: &QModelSet,
    plan: &FitPlan,
    settings: &ReplicationSettings,
    seed: u64,
) -> Result<FitReport> {
    let problem = ProfileProblem::new(data, q, plan.behavior_features.clone())?;
    match &plan.method {
        PlanMethod::Grid => fit_fixed_grid(&problem, settings.grid_size),
        PlanMethod::Metropolis(mode) => {
            let config = MetropolisConfig { proposal_sd: settings.proposal_sd, ..MetropolisConfig::new(settings.chain_length, seed) };
            fit_metropolis(&problem, &config, mode)
        }
    }
}

/// Everything measured on one Monte Carlo replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RepMetrics {
    /// Estimated fixed weights on the first `K − 1` outcomes; empty for
    /// covariate-dependent utilities.
    pub weights_hat: Vec<f64>,
    /// `expit` of the behavior intercept, for constant-probability scenarios.
    pub rho_hat: Option<f64>,
    /// Euclidean distance between estimated and true behavior coefficients.
    pub beta_rmse: Option<f64>,
    /// Euclidean distance between estimated and true utility coefficients.
    pub theta_rmse: Option<f64>,
    pub error_rate: f64,
    pub value_optimal: f64,
    pub value_estimated: f64,
    /// Policies maximizing one outcome each.
    pub value_single: Vec<f64>,
    pub value_standard_of_care: f64,
    pub value_misspecified: Option<f64>,
    pub separation: bool,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn run_replication(scenario: &Scenario, settings: &ReplicationSettings, rng: &mut RngStream) -> Result<RepMetrics> {
    let (data, truth) = scenario.generate(rng)?;
    let test = TestSample::draw(scenario, settings.test_n, rng)?;
    let q = fit_q_models(&data)?;
    let fit = fit_with_plan(&data, &q, &scenario.plan, settings, rng.next_u64())?;

    let weights_hat = match &fit.utility {
        UtilityModel::Fixed { weights } => weights.clone(),
        UtilityModel::PatientSpecific { .. } => Vec::new(),
    };
    let rho_hat = match scenario.behavior {
        TrueBehavior::Constant(_) if scenario.plan.behavior_features.dim() == 1 => Some(expit(fit.behavior.beta[0])),
        _ => None,
    };
    let beta_rmse = match &scenario.behavior {
        TrueBehavior::Logistic(b) if b.features == fit.behavior.features => Some(distance(&b.beta, &fit.behavior.beta)),
        _ => None,
    };
    let theta_rmse = match (&scenario.utility, &fit.utility) {
        (
            UtilityModel::PatientSpecific { features: tf, .. },
            UtilityModel::PatientSpecific { features: ef, .. },
        ) if tf == ef => Some(distance(&scenario.utility.parameters(), &fit.utility.parameters())),
        _ => None,
    };

    let estimated = |x: &[f64]| decision(&q, &fit.utility, x);
    let value_single = (0..scenario.k())
        .map(|k| test.value(scenario, |x| Action::from_score(q.contrast(k, x))))
        .collect();
    let value_misspecified = match &scenario.plan.misspecified {
        Some(features) => {
            let plan = FitPlan {
                behavior_features: scenario.plan.behavior_features.clone(),
                method: PlanMethod::Metropolis(MetropolisMode::PatientSpecific { features: features.clone() }),
                misspecified: None,
            };
            let mis = fit_with_plan(&data, &q, &plan, settings, rng.next_u64())?;
            Some(test.value(scenario, |x| decision(&q, &mis.utility, x)))
        }
        None => None,
    };

    Ok(RepMetrics {
        weights_hat,
        rho_hat,
        beta_rmse,
        theta_rmse,
        error_rate: test.error_rate(scenario, estimated),
        value_optimal: test.value(scenario, |x| scenario.optimal_action(x)),
        value_estimated: test.value(scenario, estimated),
        value_single,
        value_standard_of_care: truth.standard_of_care_value(),
        value_misspecified,
        separation: fit.separation,
    })
}

fn rep_stream(cell_key: u64, rep: u64) -> u64 {
    (cell_key << 32) | rep
}

/// `reps` independent replications; replication `r` uses the stream
/// `(seed, cell_key·2³² + r)`.
pub fn run_cell(
    scenario: &Scenario,
    reps: usize,
    seed: u64,
    cell_key: u64,
    settings: &ReplicationSettings,
) -> Result<Vec<RepMetrics>> {
    (0..reps as u64)
        .into_par_iter()
        .map(|r| run_replication(scenario, settings, &mut RngStream::with_stream(seed, rep_stream(cell_key, r))))
        .collect()
}

/// Fit, bootstrap and heterogeneity test on one generated dataset.
pub fn run_test_replication(
    scenario: &Scenario,
    settings: &ReplicationSettings,
    rng: &mut RngStream,
) -> Result<HeterogeneityTest> {
    let (data, _) = scenario.generate(rng)?;
    let q = fit_q_models(&data)?;
    let fit = fit_with_plan(&data, &q, &scenario.plan, settings, rng.next_u64())?;
    let infl = influence_set(&data, &q, &fit)?;
    let h = default_bandwidth(&data, &q, &fit.utility)?;
    let kernel = KernelFunctional::new(&data, &q, &fit, h, settings.perturbation)?;
    let draws = bootstrap_draws(&infl, &kernel, settings.n_boot, rng.next_u64())?;
    heterogeneity_test(&kernel, &draws, settings.alpha)
}

pub fn run_test_cell(
    scenario: &Scenario,
    reps: usize,
    seed: u64,
    cell_key: u64,
    settings: &ReplicationSettings,
) -> Result<Vec<HeterogeneityTest>> {
    (0..reps as u64)
        .into_par_iter()
        .map(|r| run_test_replication(scenario, settings, &mut RngStream::with_stream(seed, rep_stream(cell_key, r))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableId {
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
    T8,
    T9,
    T10,
    Power,
}

impl TableId {
    pub const ALL: [TableId; 11] = [
        TableId::T1,
        TableId::T2,
        TableId::T3,
        TableId::T4,
        TableId::T5,
        TableId::T6,
        TableId::T7,
        TableId::T8,
        TableId::T9,
        TableId::T10,
        TableId::Power,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TableId::T1 => "T1",
            TableId::T2 => "T2",
            TableId::T3 => "T3",
            TableId::T4 => "T4",
            TableId::T5 => "T5",
            TableId::T6 => "T6",
            TableId::T7 => "T7",
            TableId::T8 => "T8",
            TableId::T9 => "T9",
            TableId::T10 => "T10",
            TableId::Power => "POWER",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            TableId::T1 => "Estimation: fixed utility, fixed probability of optimal treatment",
            TableId::T2 => "Value: fixed utility, fixed probability of optimal treatment",
            TableId::T3 => "Estimation: fixed utility, variable probability of optimal treatment",
            TableId::T4 => "Value: fixed utility, variable probability of optimal treatment",
            TableId::T5 => "Estimation: patient-specific utility, variable probability",
            TableId::T6 => "Value: patient-specific utility, variable probability",
            TableId::T7 => "Estimation: three outcomes, fixed utility",
            TableId::T8 => "Value: three outcomes, fixed utility",
            TableId::T9 => "Value: misspecified utility model (omitted terms with small coefficients)",
            TableId::T10 => "Value: misspecified utility model (omitted terms with large coefficients)",
            TableId::Power => "Rejection rates of the bootstrap test for utility heterogeneity",
        }
    }

    pub fn scenario(self) -> ScenarioId {
        match self {
            TableId::T1 | TableId::T2 => ScenarioId::FixedFixed,
            TableId::T3 | TableId::T4 => ScenarioId::FixedVarRho,
            TableId::T5 | TableId::T6 => ScenarioId::VarVar,
            TableId::T7 | TableId::T8 => ScenarioId::ThreeOutcomes,
            TableId::T9 => ScenarioId::MisspecA,
            TableId::T10 => ScenarioId::MisspecB,
            TableId::Power => ScenarioId::BootPower,
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.to_ascii_uppercase();
        TableId::ALL
            .into_iter()
            .find(|t| t.name() == upper)
            .ok_or_else(|| Error::InvalidInput(format!("unknown table '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnStyle {
    /// Rendered as `mean (sd)` with two decimals.
    MeanSd,
    /// Rendered as a proportion with three decimals.
    Rate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub sd: f64,
    pub values: Vec<f64>,
}

impl MetricSummary {
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MetricSummary { mean, sd, values }
    }

    pub fn median(&self) -> f64 {
        median(&self.values)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub settings: Vec<String>,
    pub metrics: Vec<MetricSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub table: TableId,
    pub reps: usize,
    pub seed: u64,
    pub setting_columns: Vec<String>,
    pub metric_columns: Vec<String>,
    pub style: ColumnStyle,
    pub rows: Vec<SummaryRow>,
}

impl McSummary {
    pub fn metric(&self, row: usize, column: &str) -> Option<&MetricSummary> {
        let j = self.metric_columns.iter().position(|c| c == column)?;
        self.rows.get(row)?.metrics.get(j)
    }

    /// Header plus one line per row; every metric contributes `_mean` and `_sd` columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<String> = self.setting_columns.clone();
        for m in &self.metric_columns {
            header.push(format!("{m}_mean"));
            header.push(format!("{m}_sd"));
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut cells = row.settings.clone();
            for m in &row.metrics {
                cells.push(format!("{:.16e}", m.mean));
                cells.push(format!("{:.16e}", m.sd));
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut grid: Vec<Vec<String>> = Vec::with_capacity(self.rows.len() + 1);
        grid.push(self.setting_columns.iter().chain(&self.metric_columns).cloned().collect());
        for row in &self.rows {
            let mut cells = row.settings.clone();
            for m in &row.metrics {
                cells.push(match self.style {
                    ColumnStyle::MeanSd => format!("{:.2} ({:.2})", m.mean, m.sd),
                    ColumnStyle::Rate => format!("{:.3}", m.mean),
                });
            }
            grid.push(cells);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|j| grid.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        writeln!(out, "{}", self.table.title()).unwrap();
        for (i, row) in grid.iter().enumerate() {
            let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
            if i == 0 {
                writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))).unwrap();
            }
        }
        out
    }
}

struct RowPlan {
    settings: Vec<String>,
    /// Scenarios and their cell keys; one per column for the power table.
    cells: Vec<(Scenario, u64)>,
}

/// Stream key of the `index`-th cell a table draws from scenario `id`.
pub fn cell_key(id: ScenarioId, index: usize) -> u64 {
    let code = ScenarioId::ALL.iter().position(|s| *s == id).expect("listed scenario") as u64;
    (code << 16) | index as u64
}

pub const POWER_THETAS: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [1.0, 4.0, 3.0], [1.0, 6.0, 6.0]];

fn row_plans(table: TableId, settings: &ReplicationSettings) -> Result<Vec<RowPlan>> {
    let mut rows = Vec::new();
    let sizes = &settings.sizes;
    let fmt2 = |v: f64| format!("{v:.2}");
    match table {
        TableId::T1 | TableId::T2 => {
            let mut index = 0;
            for &n in sizes {
                for omega in [0.25, 0.75] {
                    for rho in [0.6, 0.8] {
                        let key = cell_key(ScenarioId::FixedFixed, index);
                        index += 1;
                        rows.push(RowPlan {
                            settings: vec![n.to_string(), fmt2(omega), fmt2(rho)],
                            cells: vec![(Scenario::fixed_fixed(n, omega, rho)?, key)],
                        });
                    }
                }
            }
        }
        TableId::T3 | TableId::T4 => {
            let mut index = 0;
            for &n in sizes {
                for omega in [0.25, 0.75] {
                    let key = cell_key(ScenarioId::FixedVarRho, index);
                    index += 1;
                    rows.push(RowPlan {
                        settings: vec![n.to_string(), fmt2(omega)],
                        cells: vec![(Scenario::fixed_var_rho(n, omega)?, key)],
                    });
                }
            }
        }
        TableId::T5 | TableId::T6 => {
            for (index, &n) in sizes.iter().enumerate() {
                rows.push(RowPlan {
                    settings: vec![n.to_string()],
                    cells: vec![(Scenario::var_var(n)?, cell_key(ScenarioId::VarVar, index))],
                });
            }
        }
        TableId::T7 | TableId::T8 => {
            let mut index = 0;
            for &n in sizes {
                for rho in [0.6, 0.8] {
                    let key = cell_key(ScenarioId::ThreeOutcomes, index);
                    index += 1;
                    rows.push(RowPlan {
                        settings: vec![n.to_string(), fmt2(rho)],
                        cells: vec![(Scenario::three_outcomes(n, rho, settings.y3)?, key)],
                    });
                }
            }
        }
        TableId::T9 | TableId::T10 => {
            let strong = table == TableId::T10;
            let id = table.scenario();
            for (index, &n) in sizes.iter().enumerate() {
                rows.push(RowPlan {
                    settings: vec![n.to_string()],
                    cells: vec![(Scenario::misspec(n, strong)?, cell_key(id, index))],
                });
            }
        }
        TableId::Power => {
            let mut index = 0;
            for &n in sizes {
                let mut cells = Vec::new();
                for theta in POWER_THETAS {
                    cells.push((Scenario::boot_power(n, theta)?, cell_key(ScenarioId::BootPower, index)));
                    index += 1;
                }
                rows.push(RowPlan { settings: vec![n.to_string()], cells });
            }
        }
    }
    Ok(rows)
}

fn columns(table: TableId) -> (Vec<&'static str>, Vec<&'static str>) {
    match table {
        TableId::T1 => (vec!["n", "omega", "rho"], vec!["omega_hat", "rho_hat", "error_rate"]),
        TableId::T2 => (
            vec!["n", "omega", "rho"],
            vec!["optimal", "estimated", "y_only", "z_only", "standard_of_care"],
        ),
        TableId::T3 => (vec!["n", "omega"], vec!["omega_hat", "beta_rmse", "error_rate"]),
        TableId::T4 => (vec!["n", "omega"], vec!["optimal", "estimated", "y_only", "z_only", "standard_of_care"]),
        TableId::T5 => (vec!["n"], vec!["theta_rmse", "beta_rmse", "error_rate"]),
        TableId::T6 => (vec!["n"], vec!["optimal", "estimated", "y_only", "z_only", "standard_of_care"]),
        TableId::T7 => (vec!["n", "rho"], vec!["omega1_hat", "omega2_hat", "rho_hat", "error_rate"]),
        TableId::T8 => (
            vec!["n", "rho"],
            vec!["optimal", "estimated", "y1_only", "y2_only", "y3_only", "standard_of_care"],
        ),
        TableId::T9 | TableId::T10 => (vec!["n"], vec!["optimal", "correct", "misspecified", "standard_of_care"]),
        TableId::Power => (vec!["n"], vec!["type_one_error", "power_h1", "power_h2"]),
    }
}

fn metric_values(table: TableId, reps: &[RepMetrics]) -> Vec<Vec<f64>> {
    let col = |f: &dyn Fn(&RepMetrics) -> f64| reps.iter().map(f).collect::<Vec<f64>>();
    let nan = f64::NAN;
    let values = |r: &RepMetrics| {
        let mut v = vec![r.value_optimal, r.value_estimated];
        v.extend(&r.value_single);
        v.push(r.value_standard_of_care);
        v
    };
    match table {
        TableId::T1 => vec![
            col(&|r| r.weights_hat[0]),
            col(&|r| r.rho_hat.unwrap_or(nan)),
            col(&|r| r.error_rate),
        ],
        TableId::T3 => vec![
            col(&|r| r.weights_hat[0]),
            col(&|r| r.beta_rmse.unwrap_or(nan)),
            col(&|r| r.error_rate),
        ],
        TableId::T5 => vec![
            col(&|r| r.theta_rmse.unwrap_or(nan)),
            col(&|r| r.beta_rmse.unwrap_or(nan)),
            col(&|r| r.error_rate),
        ],
        TableId::T7 => vec![
            col(&|r| r.weights_hat[0]),
            col(&|r| r.weights_hat[1]),
            col(&|r| r.rho_hat.unwrap_or(nan)),
            col(&|r| r.error_rate),
        ],
        TableId::T2 | TableId::T4 | TableId::T6 | TableId::T8 => {
            let per_rep: Vec<Vec<f64>> = reps.iter().map(values).collect();
            (0..per_rep[0].len()).map(|j| per_rep.iter().map(|v| v[j]).collect()).collect()
        }
        TableId::T9 | TableId::T10 => vec![
            col(&|r| r.value_optimal),
            col(&|r| r.value_estimated),
            col(&|r| r.value_misspecified.unwrap_or(nan)),
            col(&|r| r.value_standard_of_care),
        ],
        TableId::Power => unreachable!("power table is summarized from test results"),
    }
}

/// Runs every cell of a table with `reps` replications each.
pub fn replicate_table(table: TableId, reps: usize, seed: u64, settings: &ReplicationSettings) -> Result<McSummary> {
    if reps == 0 {
        return Err(Error::InvalidInput("at least one replication is required".into()));
    }
    let (setting_columns, metric_columns) = columns(table);
    let mut rows = Vec::new();
    for plan in row_plans(table, settings)? {
        let metrics = if table == TableId::Power {
            plan.cells
                .iter()
                .map(|(scenario, key)| {
                    let tests = run_test_cell(scenario, reps, seed, *key, settings)?;
                    Ok(MetricSummary::from_values(tests.iter().map(|t| f64::from(u8::from(t.reject))).collect()))
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            let (scenario, key) = &plan.cells[0];
            let reps = run_cell(scenario, reps, seed, *key, settings)?;
            metric_values(table, &reps).into_iter().map(MetricSummary::from_values).collect()
        };
        rows.push(SummaryRow { settings: plan.settings, metrics });
    }
    Ok(McSummary {
        table,
        reps,
        seed,
        setting_columns: setting_columns.into_iter().map(String::from).collect(),
        metric_columns: metric_columns.into_iter().map(String::from).collect(),
        style: if table == TableId::Power { ColumnStyle::Rate } else { ColumnStyle::MeanSd },
        rows,
    })
}

/// Scenario parameters behind a table, one line per distinct scenario.
pub fn describe_table(table: TableId, settings: &ReplicationSettings) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    for plan in row_plans(table, settings)? {
        for (s, _) in &plan.cells {
            let behavior = match &s.behavior {
                TrueBehavior::Constant(rho) => format!("rho={rho}"),
                TrueBehavior::Logistic(b) => format!("beta={:?}", b.beta),
            };
            lines.push(format!(
                "{} n={} p={} utility={:?} {}",
                s.id,
                s.n,
                s.p,
                s.utility.parameters(),
                behavior
            ));
        }
    }
    Ok(lines)
}
