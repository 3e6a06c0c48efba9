use std::fmt;
use std::str::FromStr;

use crate::datamodel::{Action, BehaviorModel, FeatureMap, ObsDataset, UtilityModel};
use crate::error::{Error, Result};
use crate::estimation::MetropolisMode;
use crate::numcore::{Matrix, RngStream};

const COVARIATE_SD: f64 = 0.5;
const NOISE_SD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioId {
    /// Fixed weight, constant probability of optimal treatment.
    FixedFixed,
    /// Fixed weight, covariate-dependent probability of optimal treatment.
    FixedVarRho,
    /// Covariate-dependent weight and probability.
    VarVar,
    /// Two covariates, for the heterogeneity test.
    BootPower,
    /// Three outcomes with fixed weights.
    ThreeOutcomes,
    /// Weight model with a squared term, mild omission.
    MisspecA,
    /// Weight model with a squared term, strong omission.
    MisspecB,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 7] = [
        ScenarioId::FixedFixed,
        ScenarioId::FixedVarRho,
        ScenarioId::VarVar,
        ScenarioId::BootPower,
        ScenarioId::ThreeOutcomes,
        ScenarioId::MisspecA,
        ScenarioId::MisspecB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::FixedFixed => "S1_fixed_fixed",
            ScenarioId::FixedVarRho => "S2_fixed_varrho",
            ScenarioId::VarVar => "S3_var_var",
            ScenarioId::BootPower => "S4_boot_power",
            ScenarioId::ThreeOutcomes => "S5_three_outcomes",
            ScenarioId::MisspecA => "S6_misspec_a",
            ScenarioId::MisspecB => "S6_misspec_b",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        ScenarioId::ALL
            .into_iter()
            .find(|id| {
                let name = id.name().to_ascii_lowercase();
                lower == name || lower == name[..2]
            })
            .ok_or_else(|| Error::InvalidInput(format!("unknown scenario '{s}'")))
    }
}

/// How the third outcome's noise enters in the three-outcome scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Y3Reading {
    /// `Y₃ = 1 + A(x₁ + x₂ + 1) + ε₃`.
    #[default]
    Additive,
    /// `Y₃ = 1 + A(x₁ + x₂ + 1)ε₃`, which leaves no treatment effect on the mean.
    Multiplicative,
}

impl Y3Reading {
    pub fn name(self) -> &'static str {
        match self {
            Y3Reading::Additive => "additive",
            Y3Reading::Multiplicative => "multiplicative",
        }
    }
}

impl FromStr for Y3Reading {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "additive" => Ok(Y3Reading::Additive),
            "multiplicative" => Ok(Y3Reading::Multiplicative),
            _ => Err(Error::InvalidInput(format!("unknown Y3 reading '{s}'"))),
        }
    }
}

/// `Y = baseline + A·m(x) + ε`, or `baseline + A·m(x)·ε` for multiplicative
/// noise, with `m(x) = effect · (1, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeModel {
    pub baseline: f64,
    pub effect: Vec<f64>,
    pub multiplicative: bool,
}

impl OutcomeModel {
    fn additive(effect: Vec<f64>) -> Self {
        OutcomeModel { baseline: 0.0, effect, multiplicative: false }
    }

    fn modifier(&self, x: &[f64]) -> f64 {
        self.effect[0] + self.effect[1..].iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// `Q(x, +1) − Q(x, −1)`.
    pub fn contrast(&self, x: &[f64]) -> f64 {
        if self.multiplicative {
            0.0
        } else {
            2.0 * self.modifier(x)
        }
    }

    pub fn draw(&self, x: &[f64], a: Action, noise: f64) -> f64 {
        let m = a.sign() * self.modifier(x);
        if self.multiplicative {
            self.baseline + m * noise
        } else {
            self.baseline + m + noise
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrueBehavior {
    /// Constant probability of choosing the optimal action.
    Constant(f64),
    Logistic(BehaviorModel),
}

impl TrueBehavior {
    pub fn prob_optimal(&self, x: &[f64]) -> f64 {
        match self {
            TrueBehavior::Constant(rho) => *rho,
            TrueBehavior::Logistic(b) => b.prob_optimal(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanMethod {
    Grid,
    Metropolis(MetropolisMode),
}

/// How the estimator is applied to data from a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct FitPlan {
    pub behavior_features: FeatureMap,
    pub method: PlanMethod,
    /// Reduced weight model fitted alongside the correct one.
    pub misspecified: Option<FeatureMap>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: ScenarioId,
    pub n: usize,
    pub p: usize,
    pub outcomes: Vec<OutcomeModel>,
    pub utility: UtilityModel,
    pub behavior: TrueBehavior,
    pub plan: FitPlan,
}

fn padded(head: &[f64], len: usize) -> Vec<f64> {
    let mut v = head.to_vec();
    v.resize(len, 0.0);
    v
}

fn two_outcomes(p: usize) -> Vec<OutcomeModel> {
    vec![
        OutcomeModel::additive(padded(&[2.0, 4.0, -2.0], p + 1)),
        OutcomeModel::additive(padded(&[-2.0, 2.0, -4.0], p + 1)),
    ]
}

fn logistic_behavior(beta: &[f64], p: usize) -> TrueBehavior {
    TrueBehavior::Logistic(BehaviorModel { beta: padded(beta, p + 1), features: FeatureMap::full(p) })
}

fn check_probability(rho: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("probability {rho} outside [0, 1]")))
    }
}

impl Scenario {
    /// Fixed `ω`, constant `ρ`, five covariates.
    pub fn fixed_fixed(n: usize, omega: f64, rho: f64) -> Result<Self> {
        check_probability(rho)?;
        Ok(Scenario {
            id: ScenarioId::FixedFixed,
            n,
            p: 5,
            outcomes: two_outcomes(5),
            utility: UtilityModel::scalar(omega)?,
            behavior: TrueBehavior::Constant(rho),
            plan: FitPlan { behavior_features: FeatureMap::intercept_only(), method: PlanMethod::Grid, misspecified: None },
        })
    }

    /// Fixed `ω`, behavior `expit(0.5 + x₁)`.
    pub fn fixed_var_rho(n: usize, omega: f64) -> Result<Self> {
        Ok(Scenario {
            id: ScenarioId::FixedVarRho,
            n,
            p: 5,
            outcomes: two_outcomes(5),
            utility: UtilityModel::scalar(omega)?,
            behavior: logistic_behavior(&[0.5, 1.0], 5),
            plan: FitPlan { behavior_features: FeatureMap::full(5), method: PlanMethod::Grid, misspecified: None },
        })
    }

    /// Weight `expit(1 − 0.5x₁)`, behavior `expit(0.5 + x₁)`.
    pub fn var_var(n: usize) -> Result<Self> {
        let features = FeatureMap::full(5);
        Ok(Scenario {
            id: ScenarioId::VarVar,
            n,
            p: 5,
            outcomes: two_outcomes(5),
            utility: UtilityModel::patient_specific(vec![padded(&[1.0, -0.5], 6)], features.clone())?,
            behavior: logistic_behavior(&[0.5, 1.0], 5),
            plan: FitPlan {
                behavior_features: features.clone(),
                method: PlanMethod::Metropolis(MetropolisMode::PatientSpecific { features }),
                misspecified: None,
            },
        })
    }

    /// Two covariates, behavior `expit(2.5 + x₁)`, weight `expit(θᵀ(1, x))`.
    pub fn boot_power(n: usize, theta: [f64; 3]) -> Result<Self> {
        let features = FeatureMap::full(2);
        Ok(Scenario {
            id: ScenarioId::BootPower,
            n,
            p: 2,
            outcomes: two_outcomes(2),
            utility: UtilityModel::patient_specific(vec![theta.to_vec()], features.clone())?,
            behavior: logistic_behavior(&[2.5, 1.0, 0.0], 2),
            plan: FitPlan {
                behavior_features: features.clone(),
                method: PlanMethod::Metropolis(MetropolisMode::PatientSpecific { features }),
                misspecified: None,
            },
        })
    }

    /// Three outcomes, weights `(0.2, 0.4, 0.4)`, constant `ρ`.
    pub fn three_outcomes(n: usize, rho: f64, y3: Y3Reading) -> Result<Self> {
        check_probability(rho)?;
        let mut outcomes = two_outcomes(5);
        outcomes.push(OutcomeModel {
            baseline: 1.0,
            effect: padded(&[1.0, 1.0, 1.0], 6),
            multiplicative: y3 == Y3Reading::Multiplicative,
        });
        Ok(Scenario {
            id: ScenarioId::ThreeOutcomes,
            n,
            p: 5,
            outcomes,
            utility: UtilityModel::fixed(vec![0.2, 0.4])?,
            behavior: TrueBehavior::Constant(rho),
            plan: FitPlan {
                behavior_features: FeatureMap::intercept_only(),
                method: PlanMethod::Metropolis(MetropolisMode::FixedSimplex),
                misspecified: None,
            },
        })
    }

    /// Weight `expit(1 + s·x₁² + xᵀθ₀)`: `s = 1, θ₀ = (−0.5, 0, 0, 1, 0.5)` for the
    /// mild variant and `s = 4, θ₀ = (−0.5, 0, 0, 1, 4)` for the strong one.
    /// The misspecified fit keeps only the intercept and `x₁..x₄`.
    pub fn misspec(n: usize, strong: bool) -> Result<Self> {
        let (s, last) = if strong { (4.0, 4.0) } else { (1.0, 0.5) };
        let features = FeatureMap::full(5).with_squares(vec![0]);
        let theta = vec![1.0, -0.5, 0.0, 0.0, 1.0, last, s];
        Ok(Scenario {
            id: if strong { ScenarioId::MisspecB } else { ScenarioId::MisspecA },
            n,
            p: 5,
            outcomes: two_outcomes(5),
            utility: UtilityModel::patient_specific(vec![theta], features.clone())?,
            behavior: logistic_behavior(&[0.5, 1.0], 5),
            plan: FitPlan {
                behavior_features: FeatureMap::full(5),
                method: PlanMethod::Metropolis(MetropolisMode::PatientSpecific { features }),
                misspecified: Some(FeatureMap::columns(vec![0, 1, 2, 3])),
            },
        })
    }

    /// The published default setting of a scenario at sample size `n`.
    pub fn default_for(id: ScenarioId, n: usize) -> Result<Self> {
        match id {
            ScenarioId::FixedFixed => Scenario::fixed_fixed(n, 0.25, 0.8),
            ScenarioId::FixedVarRho => Scenario::fixed_var_rho(n, 0.25),
            ScenarioId::VarVar => Scenario::var_var(n),
            ScenarioId::BootPower => Scenario::boot_power(n, [1.0, 0.0, 0.0]),
            ScenarioId::ThreeOutcomes => Scenario::three_outcomes(n, 0.8, Y3Reading::default()),
            ScenarioId::MisspecA => Scenario::misspec(n, false),
            ScenarioId::MisspecB => Scenario::misspec(n, true),
        }
    }

    pub fn k(&self) -> usize {
        self.outcomes.len()
    }

    pub fn true_contrasts(&self, x: &[f64]) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.contrast(x)).collect()
    }

    /// True decision score `Σ_k ω_k(x) R_k(x)`.
    pub fn true_score(&self, x: &[f64]) -> f64 {
        self.utility.weights_at(x).iter().zip(self.true_contrasts(x)).map(|(w, r)| w * r).sum()
    }

    pub fn optimal_action(&self, x: &[f64]) -> Action {
        Action::from_score(self.true_score(x))
    }

    /// True utility of realized outcomes.
    pub fn utility_of(&self, x: &[f64], y: &[f64]) -> f64 {
        self.utility.weights_at(x).iter().zip(y).map(|(w, v)| w * v).sum()
    }

    fn draw_covariates(&self, rng: &mut RngStream) -> Vec<f64> {
        (0..self.p).map(|_| rng.normal(0.0, COVARIATE_SD)).collect()
    }

    fn draw_noise(&self, rng: &mut RngStream) -> Vec<f64> {
        (0..self.k()).map(|_| rng.normal(0.0, NOISE_SD)).collect()
    }

    fn draw_outcomes(&self, x: &[f64], a: Action, noise: &[f64]) -> Vec<f64> {
        self.outcomes.iter().zip(noise).map(|(o, e)| o.draw(x, a, *e)).collect()
    }

    /// Draws a dataset of size `n` along with the quantities an analyst
    /// would not observe.
    pub fn generate(&self, rng: &mut RngStream) -> Result<(ObsDataset, HiddenTruth)> {
        let (n, k) = (self.n, self.k());
        let mut xs = Vec::with_capacity(n * self.p);
        let mut actions = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n * k);
        let mut errors = Vec::with_capacity(n * k);
        let mut truth = HiddenTruth {
            errors: Matrix::zeros(0, 0),
            weights: Vec::with_capacity(n),
            scores: Vec::with_capacity(n),
            optimal: Vec::with_capacity(n),
            prob_optimal: Vec::with_capacity(n),
            utilities: Vec::with_capacity(n),
        };
        for _ in 0..n {
            let x = self.draw_covariates(rng);
            let score = self.true_score(&x);
            let opt = Action::from_score(score);
            let rho = self.behavior.prob_optimal(&x);
            let a = if rng.uniform() < rho { opt } else { opt.flipped() };
            let noise = self.draw_noise(rng);
            let y = self.draw_outcomes(&x, a, &noise);
            truth.weights.push(self.utility.weights_at(&x));
            truth.scores.push(score);
            truth.optimal.push(opt);
            truth.prob_optimal.push(rho);
            truth.utilities.push(self.utility_of(&x, &y));
            xs.extend_from_slice(&x);
            actions.push(a);
            ys.extend_from_slice(&y);
            errors.extend_from_slice(&noise);
        }
        truth.errors = Matrix::from_row_major(n, k, errors)?;
        let data = ObsDataset::new(
            Matrix::from_row_major(n, self.p, xs)?,
            actions,
            Matrix::from_row_major(n, k, ys)?,
        )?;
        Ok((data, truth))
    }
}

/// Unobserved quantities behind a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenTruth {
    /// `n × K` noise draws. For multiplicative outcomes these are the
    /// multipliers, not the deviations from the mean.
    pub errors: Matrix,
    /// True weights per record, all `K` of them.
    pub weights: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
    pub optimal: Vec<Action>,
    pub prob_optimal: Vec<f64>,
    /// True utility of each record's realized outcomes.
    pub utilities: Vec<f64>,
}

impl HiddenTruth {
    /// Mean true utility under the observed treatment assignments.
    pub fn standard_of_care_value(&self) -> f64 {
        self.utilities.iter().sum::<f64>() / self.utilities.len() as f64
    }
}

/// Fresh covariates and noise for evaluating policies with common random
/// numbers.
#[derive(Debug, Clone)]
pub struct TestSample {
    pub covariates: Matrix,
    noise: Matrix,
}

impl TestSample {
    pub fn draw(scenario: &Scenario, size: usize, rng: &mut RngStream) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidInput("test sample size must be positive".into()));
        }
        let mut xs = Vec::with_capacity(size * scenario.p);
        let mut es = Vec::with_capacity(size * scenario.k());
        for _ in 0..size {
            xs.extend(scenario.draw_covariates(rng));
            es.extend(scenario.draw_noise(rng));
        }
        Ok(TestSample {
            covariates: Matrix::from_row_major(size, scenario.p, xs)?,
            noise: Matrix::from_row_major(size, scenario.k(), es)?,
        })
    }

    pub fn len(&self) -> usize {
        self.covariates.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mean true utility with every action set by `policy`.
    pub fn value(&self, scenario: &Scenario, policy: impl Fn(&[f64]) -> Action) -> f64 {
        let total: f64 = (0..self.len())
            .map(|i| {
                let x = self.covariates.row(i);
                let y = scenario.draw_outcomes(x, policy(x), self.noise.row(i));
                scenario.utility_of(x, &y)
            })
            .sum();
        total / self.len() as f64
    }

    /// Fraction of test covariates where `policy` differs from the optimal action.
    pub fn error_rate(&self, scenario: &Scenario, policy: impl Fn(&[f64]) -> Action) -> f64 {
        let wrong = self.covariates.row_iter().filter(|x| policy(x) != scenario.optimal_action(x)).count();
        wrong as f64 / self.len() as f64
    }
}

/// Monte Carlo value of `policy`: mean true utility over `test_n` fresh
/// records with actions forced to the policy.
pub fn value_mc(scenario: &Scenario, policy: impl Fn(&[f64]) -> Action, test_n: usize, rng: &mut RngStream) -> Result<f64> {
    Ok(TestSample::draw(scenario, test_n, rng)?.value(scenario, policy))
}
