//! Maximum pseudo-likelihood estimation of utility weights.
//!
//! For fixed utility parameters the pseudo-log-likelihood is an ordinary
//! logistic log-likelihood in the behavior coefficients, with labels
//! "observed action agrees with the estimated rule". Profiling those out
//! leaves a piecewise-constant function of the utility parameters, which is
//! maximized by grid search (one free weight) or a random-walk Metropolis
//! search (covariate-dependent weights, or several fixed weights).

use std::cell::RefCell;
use std::collections::HashMap;

use crate::datamodel::{Action, BehaviorModel, FeatureMap, ObsDataset, QModelSet, UtilityModel};
use crate::error::{Error, Result};
use crate::numcore::{expit, fit_logistic, LogisticFit, Matrix, RngStream};

pub const DEFAULT_GRID_SIZE: usize = 100;
pub const DEFAULT_CHAIN_LENGTH: usize = 10_000;
pub const MIN_CHAIN_LENGTH: usize = 100;
pub const DEFAULT_PROPOSAL_SD: f64 = 0.1;

const TUNING_WINDOW: usize = 200;
const AUTO_INITIAL_SD: f64 = 0.5;
const TARGET_ACCEPTANCE: (f64, f64) = (0.25, 0.5);

/// Everything the profile step needs, precomputed once per dataset.
///
/// Profile fits are memoized by their agreement-label vector, since the
/// likelihood depends on the utility parameters only through those labels.
pub struct ProfileProblem<'a> {
    data: &'a ObsDataset,
    q: &'a QModelSet,
    behavior_features: FeatureMap,
    behavior_design: Matrix,
    contrasts: Matrix,
    cache: RefCell<HashMap<Vec<u64>, LogisticFit>>,
}

impl<'a> ProfileProblem<'a> {
    pub fn new(data: &'a ObsDataset, q: &'a QModelSet, behavior_features: FeatureMap) -> Result<Self> {
        if q.k() != data.k() {
            return Err(Error::Dimension(format!(
                "{} outcome models for {} outcomes",
                q.k(),
                data.k()
            )));
        }
        let behavior_design = behavior_features.design(data.covariates())?;
        let contrasts = q.contrast_table(data.covariates());
        Ok(ProfileProblem {
            data,
            q,
            behavior_features,
            behavior_design,
            contrasts,
            cache: RefCell::new(HashMap::new()),
        })
    }

    pub fn data(&self) -> &ObsDataset {
        self.data
    }

    pub fn q(&self) -> &QModelSet {
        self.q
    }

    pub fn behavior_features(&self) -> &FeatureMap {
        &self.behavior_features
    }

    pub fn behavior_design(&self) -> &Matrix {
        &self.behavior_design
    }

    /// `n × K` table of estimated contrasts at the observed covariates.
    pub fn contrasts(&self) -> &Matrix {
        &self.contrasts
    }

    /// Agreement labels for per-record decision scores.
    pub fn labels_from_scores(&self, scores: impl Iterator<Item = f64>) -> Vec<bool> {
        scores
            .zip(self.data.actions())
            .map(|(s, &a)| Action::from_score(s) == a)
            .collect()
    }

    pub fn labels_for_weights(&self, weights: &[f64]) -> Vec<bool> {
        self.labels_from_scores(
            self.contrasts
                .row_iter()
                .map(|r| r.iter().zip(weights).map(|(c, w)| c * w).sum()),
        )
    }

    pub fn labels(&self, model: &UtilityModel) -> Vec<bool> {
        match model {
            UtilityModel::Fixed { .. } => self.labels_for_weights(&model.weights_at(&[])),
            UtilityModel::PatientSpecific { .. } => self.labels_from_scores(
                (0..self.data.n()).map(|i| {
                    let w = model.weights_at(self.data.covariate_row(i));
                    self.contrasts.row(i).iter().zip(&w).map(|(c, w)| c * w).sum()
                }),
            ),
        }
    }

    /// Logistic fit of the labels on the behavior design.
    pub fn fit_labels(&self, labels: &[bool]) -> Result<LogisticFit> {
        let key = pack(labels);
        if let Some(fit) = self.cache.borrow().get(&key) {
            return Ok(fit.clone());
        }
        let fit = fit_logistic(&self.behavior_design, labels, 0.0)?;
        self.cache.borrow_mut().insert(key, fit.clone());
        Ok(fit)
    }

    pub fn profile(&self, model: &UtilityModel) -> Result<LogisticFit> {
        self.fit_labels(&self.labels(model))
    }

    pub fn behavior_model(&self, fit: &LogisticFit) -> BehaviorModel {
        BehaviorModel { beta: fit.coefficients.clone(), features: self.behavior_features.clone() }
    }
}

fn pack(labels: &[bool]) -> Vec<u64> {
    let mut words = vec![0u64; labels.len().div_ceil(64)];
    for (i, &l) in labels.iter().enumerate() {
        if l {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    words
}

/// Profile maximizer of the pseudo-log-likelihood over behavior
/// coefficients for a fixed utility.
pub fn profile_beta(
    data: &ObsDataset,
    q: &QModelSet,
    model: &UtilityModel,
    behavior_features: &FeatureMap,
) -> Result<LogisticFit> {
    ProfileProblem::new(data, q, behavior_features.clone())?.profile(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    Grid,
    Metropolis,
}

impl FitMethod {
    pub fn name(self) -> &'static str {
        match self {
            FitMethod::Grid => "grid",
            FitMethod::Metropolis => "metropolis",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostics {
    Grid {
        omegas: Vec<f64>,
        logliks: Vec<f64>,
        /// Grid points sharing the maximal value; the smallest ω is returned.
        tied: usize,
    },
    Chain {
        /// Profile log-likelihood of each chain state, starting state first.
        logliks: Vec<f64>,
        accepted: Vec<bool>,
        /// Acceptance rate after burn-in.
        acceptance_rate: f64,
        proposal_sd: f64,
        burn_in: usize,
        /// Index into `logliks` of the returned state.
        best_index: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub utility: UtilityModel,
    pub behavior: BehaviorModel,
    pub pseudo_loglik_at_max: f64,
    pub method: FitMethod,
    /// The profile logistic fit at the maximizer needed the ridge fallback.
    pub separation: bool,
    pub n: usize,
    pub diagnostics: Diagnostics,
}

/// Grid search over `ω = m / grid_size`, `m = 0..=grid_size`, for two outcomes.
pub fn fit_fixed_grid(problem: &ProfileProblem, grid_size: usize) -> Result<FitReport> {
    if problem.data().k() != 2 {
        return Err(Error::InvalidInput(format!(
            "grid search handles two outcomes, got {}; use the Metropolis fit in simplex mode",
            problem.data().k()
        )));
    }
    if grid_size < 1 {
        return Err(Error::InvalidInput("grid size must be positive".into()));
    }
    let mut omegas = Vec::with_capacity(grid_size + 1);
    let mut logliks = Vec::with_capacity(grid_size + 1);
    let mut best: Option<(usize, LogisticFit)> = None;
    for m in 0..=grid_size {
        let omega = m as f64 / grid_size as f64;
        let fit = problem.fit_labels(&problem.labels_for_weights(&[omega, 1.0 - omega]))?;
        omegas.push(omega);
        logliks.push(fit.log_likelihood);
        if best.as_ref().is_none_or(|(_, b)| fit.log_likelihood > b.log_likelihood) {
            best = Some((m, fit));
        }
    }
    let (m, fit) = best.expect("grid has at least two points");
    let tied = logliks.iter().filter(|&&l| l == fit.log_likelihood).count();
    Ok(FitReport {
        utility: UtilityModel::scalar(omegas[m])?,
        behavior: problem.behavior_model(&fit),
        pseudo_loglik_at_max: fit.log_likelihood,
        method: FitMethod::Grid,
        separation: fit.separation,
        n: problem.data().n(),
        diagnostics: Diagnostics::Grid { omegas, logliks, tied },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProposalSd {
    /// Tuned during burn-in toward an acceptance rate in `[0.25, 0.5]`.
    ///
    /// The profile likelihood is piecewise constant in the utility
    /// parameters, so acceptance can stay high at every scale and the tuned
    /// value may grow large.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetropolisConfig {
    pub chain_length: usize,
    pub proposal_sd: ProposalSd,
    pub burn_in: usize,
    pub seed: u64,
}

impl MetropolisConfig {
    pub fn new(chain_length: usize, seed: u64) -> Self {
        MetropolisConfig { chain_length, proposal_sd: ProposalSd::Fixed(DEFAULT_PROPOSAL_SD), burn_in: chain_length / 10, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chain_length < MIN_CHAIN_LENGTH {
            return Err(Error::InvalidInput(format!(
                "chain length {} is below the minimum of {MIN_CHAIN_LENGTH}",
                self.chain_length
            )));
        }
        if self.burn_in >= self.chain_length {
            return Err(Error::InvalidInput(format!(
                "burn-in {} must be shorter than the chain ({})",
                self.burn_in, self.chain_length
            )));
        }
        if let ProposalSd::Fixed(sd) = self.proposal_sd {
            if !(sd > 0.0 && sd.is_finite()) {
                return Err(Error::InvalidInput(format!("proposal sd must be positive, got {sd}")));
            }
        }
        Ok(())
    }
}

impl Default for MetropolisConfig {
    fn default() -> Self {
        MetropolisConfig::new(DEFAULT_CHAIN_LENGTH, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetropolisMode {
    /// `ω_k(x) = expit(f(x)ᵀθ_k)` for the first `K − 1` outcomes.
    PatientSpecific { features: FeatureMap },
    /// Constant weights parametrized by logits with the last logit pinned
    /// at zero, so every state maps into the simplex.
    FixedSimplex,
}

/// Simplex weights from `K − 1` free logits (the `K`-th logit is zero).
pub fn simplex_weights(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(0.0, f64::max);
    let mut w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    w.push((-max).exp());
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

struct ChainTarget<'p, 'a> {
    problem: &'p ProfileProblem<'a>,
    mode: &'p MetropolisMode,
    utility_design: Option<Matrix>,
    blocks: usize,
}

impl ChainTarget<'_, '_> {
    fn dim(&self) -> usize {
        match self.mode {
            MetropolisMode::PatientSpecific { features } => self.blocks * features.dim(),
            MetropolisMode::FixedSimplex => self.blocks,
        }
    }

    fn labels(&self, params: &[f64]) -> Vec<bool> {
        let contrasts = self.problem.contrasts();
        match &self.utility_design {
            None => self.problem.labels_for_weights(&simplex_weights(params)),
            Some(f) => {
                let d = f.cols();
                self.problem.labels_from_scores((0..contrasts.rows()).map(|i| {
                    let fi = f.row(i);
                    let r = contrasts.row(i);
                    let mut rest = 1.0;
                    let mut score = 0.0;
                    for k in 0..self.blocks {
                        let theta = &params[k * d..(k + 1) * d];
                        let w = expit(theta.iter().zip(fi).map(|(t, v)| t * v).sum());
                        score += w * r[k];
                        rest -= w;
                    }
                    score + rest * r[self.blocks]
                }))
            }
        }
    }

    fn utility(&self, params: &[f64]) -> Result<UtilityModel> {
        match self.mode {
            MetropolisMode::PatientSpecific { features } => UtilityModel::patient_specific(
                params.chunks(features.dim()).map(<[f64]>::to_vec).collect(),
                features.clone(),
            ),
            MetropolisMode::FixedSimplex => {
                let mut w = simplex_weights(params);
                w.pop();
                Ok(UtilityModel::Fixed { weights: w })
            }
        }
    }
}

/// Random-walk Metropolis search over utility parameters, returning the
/// visited state with the largest profile pseudo-log-likelihood.
pub fn fit_metropolis(problem: &ProfileProblem, config: &MetropolisConfig, mode: &MetropolisMode) -> Result<FitReport> {
    config.validate()?;
    let blocks = problem.data().k() - 1;
    let utility_design = match mode {
        MetropolisMode::PatientSpecific { features } => Some(features.design(problem.data().covariates())?),
        MetropolisMode::FixedSimplex => {
            if blocks < 2 {
                return Err(Error::InvalidInput(
                    "simplex mode needs three or more outcomes; use the grid fit for two".into(),
                ));
            }
            None
        }
    };
    let target = ChainTarget { problem, mode, utility_design, blocks };
    let dim = target.dim();
    let mut rng = RngStream::new(config.seed);

    let mut current = vec![0.0; dim];
    let mut current_ll = problem.fit_labels(&target.labels(&current))?.log_likelihood;
    let mut best = current.clone();
    let mut best_ll = current_ll;
    let mut best_index = 0;

    let mut sd = match config.proposal_sd {
        ProposalSd::Auto => AUTO_INITIAL_SD,
        ProposalSd::Fixed(sd) => sd,
    };
    let mut logliks = Vec::with_capacity(config.chain_length + 1);
    let mut accepted = Vec::with_capacity(config.chain_length);
    logliks.push(current_ll);
    let mut window_accepts = 0;
    let mut proposal = vec![0.0; dim];

    for step in 0..config.chain_length {
        for (p, c) in proposal.iter_mut().zip(&current) {
            *p = c + sd * rng.standard_normal();
        }
        let ll = problem.fit_labels(&target.labels(&proposal))?.log_likelihood;
        let accept = rng.uniform().ln() <= ll - current_ll;
        if accept {
            current.copy_from_slice(&proposal);
            current_ll = ll;
            window_accepts += 1;
        }
        accepted.push(accept);
        logliks.push(current_ll);
        if current_ll > best_ll {
            best_ll = current_ll;
            best.copy_from_slice(&current);
            best_index = step + 1;
        }

        if (step + 1) % TUNING_WINDOW == 0 {
            if config.proposal_sd == ProposalSd::Auto && step < config.burn_in {
                let rate = window_accepts as f64 / TUNING_WINDOW as f64;
                if rate > TARGET_ACCEPTANCE.1 {
                    sd *= 2.0;
                } else if rate < TARGET_ACCEPTANCE.0 {
                    sd *= 0.5;
                }
            }
            window_accepts = 0;
        }
    }

    let after_burn_in = &accepted[config.burn_in..];
    let acceptance_rate = after_burn_in.iter().filter(|&&a| a).count() as f64 / after_burn_in.len() as f64;
    let fit = problem.fit_labels(&target.labels(&best))?;
    Ok(FitReport {
        utility: target.utility(&best)?,
        behavior: problem.behavior_model(&fit),
        pseudo_loglik_at_max: fit.log_likelihood,
        method: FitMethod::Metropolis,
        separation: fit.separation,
        n: problem.data().n(),
        diagnostics: Diagnostics::Chain {
            logliks,
            accepted,
            acceptance_rate,
            proposal_sd: sd,
            burn_in: config.burn_in,
            best_index,
        },
    })
}

/// Fraction of rows of `test_x` where the estimated rule disagrees with the
/// sign of the true decision score.
pub fn error_rate(q: &QModelSet, model: &UtilityModel, true_score: impl Fn(&[f64]) -> f64, test_x: &Matrix) -> f64 {
    if test_x.rows() == 0 {
        return 0.0;
    }
    let wrong = test_x
        .row_iter()
        .filter(|x| crate::datamodel::decision(q, model, x) != Action::from_score(true_score(x)))
        .count();
    wrong as f64 / test_x.rows() as f64
}
