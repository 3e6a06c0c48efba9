//! Observational data, outcome regressions, utility and behavior models,
//! and the pseudo-log-likelihood that ties them together.
//!
//! Actions are binary (`-1`/`+1`). Outcomes are oriented so that higher is
//! better; a dataset carries `K ≥ 2` of them. A utility is a convex
//! combination of the outcomes whose weights are either constant or depend
//! on covariates through a logistic link. The clinician ("behavior") model
//! gives the probability that the observed action is the optimal one.

use crate::error::{Error, Result};
use crate::numcore::{expit, fit_ols, log1p_exp, LinearFit, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Negative,
    Positive,
}

impl Action {
    pub fn sign(self) -> f64 {
        match self {
            Action::Negative => -1.0,
            Action::Positive => 1.0,
        }
    }

    /// Sign of a decision score; an exact zero maps to `Positive`.
    pub fn from_score(score: f64) -> Action {
        if score >= 0.0 {
            Action::Positive
        } else {
            Action::Negative
        }
    }

    pub fn from_code(code: i64) -> Option<Action> {
        match code {
            -1 => Some(Action::Negative),
            1 => Some(Action::Positive),
            _ => None,
        }
    }

    pub fn code(self) -> i64 {
        self.sign() as i64
    }

    pub fn flipped(self) -> Action {
        match self {
            Action::Negative => Action::Positive,
            Action::Positive => Action::Negative,
        }
    }
}

/// `n` records of covariates, a binary action and `K ≥ 2` outcomes.
#[derive(Debug, Clone)]
pub struct ObsDataset {
    covariates: Matrix,
    actions: Vec<Action>,
    outcomes: Matrix,
}

impl ObsDataset {
    pub fn new(covariates: Matrix, actions: Vec<Action>, outcomes: Matrix) -> Result<Self> {
        let n = covariates.rows();
        if actions.len() != n || outcomes.rows() != n {
            return Err(Error::Dimension(format!(
                "{n} covariate rows, {} actions, {} outcome rows",
                actions.len(),
                outcomes.rows()
            )));
        }
        if outcomes.cols() < 2 {
            return Err(Error::InvalidInput(format!(
                "at least two outcomes are required, got {}",
                outcomes.cols()
            )));
        }
        let positives = actions.iter().filter(|&&a| a == Action::Positive).count();
        if positives == 0 || positives == n {
            return Err(Error::InvalidInput("both actions must occur at least once".into()));
        }
        Ok(ObsDataset { covariates, actions, outcomes })
    }

    pub fn n(&self) -> usize {
        self.actions.len()
    }

    /// Number of covariates, without intercept.
    pub fn p(&self) -> usize {
        self.covariates.cols()
    }

    /// Number of outcomes.
    pub fn k(&self) -> usize {
        self.outcomes.cols()
    }

    pub fn covariates(&self) -> &Matrix {
        &self.covariates
    }

    pub fn covariate_row(&self, i: usize) -> &[f64] {
        self.covariates.row(i)
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn outcomes(&self) -> &Matrix {
        &self.outcomes
    }

    pub fn outcome_row(&self, i: usize) -> &[f64] {
        self.outcomes.row(i)
    }

    pub fn subset(&self, rows: &[usize]) -> Result<ObsDataset> {
        ObsDataset::new(
            self.covariates.select_rows(rows),
            rows.iter().map(|&r| self.actions[r]).collect(),
            self.outcomes.select_rows(rows),
        )
    }

    /// Same records with one outcome column negated, for outcomes where
    /// lower values are better.
    pub fn with_negated_outcome(&self, column: usize) -> Result<ObsDataset> {
        if column >= self.k() {
            return Err(Error::Dimension(format!("no outcome column {column}")));
        }
        let mut outcomes = self.outcomes.clone();
        for i in 0..outcomes.rows() {
            outcomes[(i, column)] = -outcomes[(i, column)];
        }
        Ok(ObsDataset { outcomes, ..self.clone() })
    }
}

/// Covariate features with a leading intercept: `(1, x[columns], x[squares]²)`.
///
/// Used for the behavior model and for patient-specific utility weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMap {
    pub columns: Vec<usize>,
    pub squares: Vec<usize>,
}

impl FeatureMap {
    /// Intercept plus every covariate.
    pub fn full(p: usize) -> Self {
        FeatureMap { columns: (0..p).collect(), squares: Vec::new() }
    }

    pub fn intercept_only() -> Self {
        FeatureMap { columns: Vec::new(), squares: Vec::new() }
    }

    pub fn columns(columns: Vec<usize>) -> Self {
        FeatureMap { columns, squares: Vec::new() }
    }

    pub fn with_squares(mut self, squares: Vec<usize>) -> Self {
        self.squares = squares;
        self
    }

    pub fn dim(&self) -> usize {
        1 + self.columns.len() + self.squares.len()
    }

    pub fn max_column(&self) -> Option<usize> {
        self.columns.iter().chain(&self.squares).copied().max()
    }

    pub fn check(&self, p: usize) -> Result<()> {
        match self.max_column() {
            Some(c) if c >= p => Err(Error::Dimension(format!(
                "feature map uses covariate {c} but only {p} are available"
            ))),
            _ => Ok(()),
        }
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        let mut f = Vec::with_capacity(self.dim());
        self.write_features(x, &mut f);
        f
    }

    fn write_features(&self, x: &[f64], out: &mut Vec<f64>) {
        out.push(1.0);
        out.extend(self.columns.iter().map(|&c| x[c]));
        out.extend(self.squares.iter().map(|&c| x[c] * x[c]));
    }

    /// Feature matrix for every row of `covariates`.
    pub fn design(&self, covariates: &Matrix) -> Result<Matrix> {
        self.check(covariates.cols())?;
        let mut data = Vec::with_capacity(covariates.rows() * self.dim());
        for x in covariates.row_iter() {
            self.write_features(x, &mut data);
        }
        Matrix::from_row_major(covariates.rows(), self.dim(), data)
    }
}

/// Columns of the outcome-regression design `d(x, a) = (1, x_main, a, a·x_inter)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QDesign {
    pub main: Vec<usize>,
    pub interactions: Vec<usize>,
}

impl QDesign {
    pub fn full(p: usize) -> Self {
        QDesign { main: (0..p).collect(), interactions: (0..p).collect() }
    }

    pub fn dim(&self) -> usize {
        2 + self.main.len() + self.interactions.len()
    }

    pub fn row(&self, x: &[f64], a: Action) -> Vec<f64> {
        let s = a.sign();
        let mut d = Vec::with_capacity(self.dim());
        d.push(1.0);
        d.extend(self.main.iter().map(|&c| x[c]));
        d.push(s);
        d.extend(self.interactions.iter().map(|&c| s * x[c]));
        d
    }

    /// `c(x) = d(x, +1) − d(x, −1)`.
    pub fn contrast_basis(&self, x: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; 1 + self.main.len()];
        c.push(2.0);
        c.extend(self.interactions.iter().map(|&j| 2.0 * x[j]));
        c
    }

    pub fn design(&self, covariates: &Matrix, actions: &[Action]) -> Result<Matrix> {
        let max = self.main.iter().chain(&self.interactions).copied().max();
        if let Some(c) = max.filter(|&c| c >= covariates.cols()) {
            return Err(Error::Dimension(format!(
                "Q design uses covariate {c} but only {} are available",
                covariates.cols()
            )));
        }
        let rows: Vec<Vec<f64>> = covariates
            .row_iter()
            .zip(actions)
            .map(|(x, &a)| self.row(x, a))
            .collect();
        Matrix::from_rows(&rows)
    }
}

/// One least-squares fit per outcome on a shared [`QDesign`].
#[derive(Debug, Clone)]
pub struct QModelSet {
    pub design: QDesign,
    pub fits: Vec<LinearFit>,
}

impl QModelSet {
    pub fn k(&self) -> usize {
        self.fits.len()
    }

    pub fn q_value(&self, outcome: usize, x: &[f64], a: Action) -> f64 {
        self.fits[outcome].predict(&self.design.row(x, a))
    }

    /// `R̂_k(x) = Q̂_k(x, +1) − Q̂_k(x, −1)`.
    pub fn contrast(&self, outcome: usize, x: &[f64]) -> f64 {
        self.fits[outcome].predict(&self.design.contrast_basis(x))
    }

    pub fn contrasts(&self, x: &[f64]) -> Vec<f64> {
        let c = self.design.contrast_basis(x);
        self.fits.iter().map(|f| f.predict(&c)).collect()
    }

    /// `n × K` matrix of `R̂_k(x_i)`.
    pub fn contrast_table(&self, covariates: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(covariates.rows(), self.k());
        for (i, x) in covariates.row_iter().enumerate() {
            out.row_mut(i).copy_from_slice(&self.contrasts(x));
        }
        out
    }
}

pub fn fit_q_models(data: &ObsDataset) -> Result<QModelSet> {
    fit_q_models_with(data, QDesign::full(data.p()))
}

pub fn fit_q_models_with(data: &ObsDataset, design: QDesign) -> Result<QModelSet> {
    let d = design.design(data.covariates(), data.actions())?;
    let fits = (0..data.k())
        .map(|k| fit_ols(&d, &data.outcomes().column(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(QModelSet { design, fits })
}

/// Composite-outcome utility: weights `ω_1..ω_{K−1}` on the first `K − 1`
/// outcomes, with the remainder `1 − Σω_k` on the last.
#[derive(Debug, Clone, PartialEq)]
pub enum UtilityModel {
    Fixed {
        weights: Vec<f64>,
    },
    /// `ω_k(x) = expit(f(x)ᵀ θ_k)` for each of the first `K − 1` outcomes.
    PatientSpecific {
        coefficients: Vec<Vec<f64>>,
        features: FeatureMap,
    },
}

impl UtilityModel {
    /// Two-outcome utility `ω y + (1 − ω) z`.
    pub fn scalar(omega: f64) -> Result<Self> {
        UtilityModel::fixed(vec![omega])
    }

    pub fn fixed(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("a utility needs at least one free weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || total > 1.0 + 1e-12 {
            return Err(Error::InvalidInput(format!("weights {weights:?} are not in the simplex")));
        }
        Ok(UtilityModel::Fixed { weights })
    }

    pub fn patient_specific(coefficients: Vec<Vec<f64>>, features: FeatureMap) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidInput("a utility needs at least one coefficient block".into()));
        }
        if let Some(b) = coefficients.iter().find(|b| b.len() != features.dim()) {
            return Err(Error::Dimension(format!(
                "coefficient block of length {} for {} features",
                b.len(),
                features.dim()
            )));
        }
        if coefficients.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("utility coefficients must be finite".into()));
        }
        Ok(UtilityModel::PatientSpecific { coefficients, features })
    }

    /// Number of outcomes `K`.
    pub fn n_outcomes(&self) -> usize {
        match self {
            UtilityModel::Fixed { weights } => weights.len() + 1,
            UtilityModel::PatientSpecific { coefficients, .. } => coefficients.len() + 1,
        }
    }

    /// All `K` weights at `x`, the last one implied.
    pub fn weights_at(&self, x: &[f64]) -> Vec<f64> {
        let mut w = match self {
            UtilityModel::Fixed { weights } => weights.clone(),
            UtilityModel::PatientSpecific { coefficients, features } => {
                let f = features.features(x);
                coefficients
                    .iter()
                    .map(|theta| expit(theta.iter().zip(&f).map(|(t, v)| t * v).sum()))
                    .collect()
            }
        };
        let last = 1.0 - w.iter().sum::<f64>();
        w.push(last);
        w
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if y.len() != self.n_outcomes() {
            return Err(Error::Dimension(format!(
                "{} outcomes supplied to a {}-outcome utility",
                y.len(),
                self.n_outcomes()
            )));
        }
        Ok(self.weights_at(x).iter().zip(y).map(|(w, v)| w * v).sum())
    }

    /// Flattened free parameters: the weights, or the stacked `θ_k`.
    pub fn parameters(&self) -> Vec<f64> {
        match self {
            UtilityModel::Fixed { weights } => weights.clone(),
            UtilityModel::PatientSpecific { coefficients, .. } => coefficients.concat(),
        }
    }

    /// Records whose implied last weight `1 − Σω_k(x)` is negative. Only
    /// possible for patient-specific utilities with `K > 2`.
    pub fn negative_last_weight_count(&self, covariates: &Matrix) -> usize {
        match self {
            UtilityModel::Fixed { .. } => 0,
            UtilityModel::PatientSpecific { .. } => covariates
                .row_iter()
                .filter(|x| *self.weights_at(x).last().unwrap() < 0.0)
                .count(),
        }
    }
}

/// `P(A = d_opt(x) | x) = expit(f(x)ᵀβ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorModel {
    pub beta: Vec<f64>,
    pub features: FeatureMap,
}

impl BehaviorModel {
    pub fn new(beta: Vec<f64>, features: FeatureMap) -> Result<Self> {
        if beta.len() != features.dim() {
            return Err(Error::Dimension(format!(
                "beta of length {} for {} behavior features",
                beta.len(),
                features.dim()
            )));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("behavior coefficients must be finite".into()));
        }
        Ok(BehaviorModel { beta, features })
    }

    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.features.features(x).iter().zip(&self.beta).map(|(f, b)| f * b).sum()
    }

    pub fn prob_optimal(&self, x: &[f64]) -> f64 {
        expit(self.linear_predictor(x))
    }
}

/// Contrasts, weights and the decision score `D(x) = Σ_k ω_k(x) R_k(x)`
/// at one covariate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastProfile {
    pub contrasts: Vec<f64>,
    pub weights: Vec<f64>,
    pub score: f64,
}

pub fn contrast_profile(q: &QModelSet, model: &UtilityModel, x: &[f64]) -> ContrastProfile {
    let contrasts = q.contrasts(x);
    let weights = model.weights_at(x);
    let score = weights.iter().zip(&contrasts).map(|(w, r)| w * r).sum();
    ContrastProfile { contrasts, weights, score }
}

/// Recommended action `sign(D̂(x))`, with ties going to `+1`.
pub fn decision(q: &QModelSet, model: &UtilityModel, x: &[f64]) -> Action {
    debug_assert_eq!(q.k(), model.n_outcomes());
    Action::from_score(contrast_profile(q, model, x).score)
}

/// `Σ_i [f_iᵀβ · 1{A_i = d̂(X_i)} − log(1 + exp(f_iᵀβ))]`.
pub fn pseudo_loglik(data: &ObsDataset, q: &QModelSet, model: &UtilityModel, behavior: &BehaviorModel) -> f64 {
    (0..data.n())
        .map(|i| {
            let x = data.covariate_row(i);
            let eta = behavior.linear_predictor(x);
            let agree = data.actions()[i] == decision(q, model, x);
            if agree {
                eta - log1p_exp(eta)
            } else {
                -log1p_exp(eta)
            }
        })
        .sum()
}

/// Agreement labels `1{A_i = d̂(X_i)}` under a utility.
pub fn agreement_labels(data: &ObsDataset, q: &QModelSet, model: &UtilityModel) -> Vec<bool> {
    (0..data.n())
        .map(|i| data.actions()[i] == decision(q, model, data.covariate_row(i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::RngStream;
    use proptest::prelude::*;

    /// Noiseless draw from `Y = A(4x1 − 2x2 + 2)`, `Z = A(2x1 − 4x2 − 2)`.
    fn noiseless(n: usize, seed: u64) -> ObsDataset {
        let mut rng = RngStream::new(seed);
        let mut xs = Vec::new();
        let mut acts = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let x: Vec<f64> = (0..3).map(|_| rng.normal(0.0, 0.5)).collect();
            let a = if i % 2 == 0 { Action::Positive } else { Action::Negative };
            let s = a.sign();
            ys.push(vec![s * (4.0 * x[0] - 2.0 * x[1] + 2.0), s * (2.0 * x[0] - 4.0 * x[1] - 2.0)]);
            xs.push(x);
            acts.push(a);
        }
        ObsDataset::new(Matrix::from_rows(&xs).unwrap(), acts, Matrix::from_rows(&ys).unwrap()).unwrap()
    }

    #[test]
    fn dataset_invariants() {
        let x = Matrix::zeros(2, 1);
        let y = Matrix::zeros(2, 2);
        assert!(ObsDataset::new(x.clone(), vec![Action::Positive; 2], y.clone()).is_err());
        assert!(ObsDataset::new(x.clone(), vec![Action::Positive], y.clone()).is_err());
        assert!(ObsDataset::new(x.clone(), vec![Action::Positive, Action::Negative], Matrix::zeros(2, 1)).is_err());
        let d = ObsDataset::new(x, vec![Action::Positive, Action::Negative], y).unwrap();
        assert_eq!((d.n(), d.p(), d.k()), (2, 1, 2));
    }

    #[test]
    fn q_models_recover_noiseless_coefficients() {
        let data = noiseless(60, 1);
        let q = fit_q_models(&data).unwrap();
        // Design: (1, x1, x2, x3, a, a·x1, a·x2, a·x3).
        let expect_y = [0.0, 0.0, 0.0, 0.0, 2.0, 4.0, -2.0, 0.0];
        let expect_z = [0.0, 0.0, 0.0, 0.0, -2.0, 2.0, -4.0, 0.0];
        for (c, e) in q.fits[0].coefficients.iter().zip(expect_y) {
            assert!((c - e).abs() < 1e-8);
        }
        for (c, e) in q.fits[1].coefficients.iter().zip(expect_z) {
            assert!((c - e).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_outcome_gives_intercept_only() {
        let base = noiseless(30, 2);
        let mut ys = base.outcomes().clone();
        for i in 0..ys.rows() {
            ys[(i, 0)] = 5.0;
        }
        let data = ObsDataset::new(base.covariates().clone(), base.actions().to_vec(), ys).unwrap();
        let q = fit_q_models(&data).unwrap();
        assert!((q.fits[0].coefficients[0] - 5.0).abs() < 1e-10);
        assert!(q.fits[0].coefficients[1..].iter().all(|c| c.abs() < 1e-10));
    }

    #[test]
    fn contrast_is_exact_difference_of_q_values() {
        let data = noiseless(40, 3);
        let q = fit_q_models(&data).unwrap();
        let x = [0.3, -0.2, 0.9];
        for k in 0..2 {
            let diff = q.q_value(k, &x, Action::Positive) - q.q_value(k, &x, Action::Negative);
            assert!((q.contrast(k, &x) - diff).abs() < 1e-12);
        }
    }

    #[test]
    fn utility_values() {
        let one = UtilityModel::scalar(1.0).unwrap();
        assert_eq!(one.value(&[0.0], &[3.5, -2.0]).unwrap(), 3.5);
        let quarter = UtilityModel::scalar(0.25).unwrap();
        assert_eq!(quarter.value(&[0.0], &[4.0, 8.0]).unwrap(), 7.0);
        assert!(quarter.value(&[0.0], &[4.0]).is_err());
        assert!(UtilityModel::scalar(1.2).is_err());
        assert!(UtilityModel::fixed(vec![0.7, 0.5]).is_err());

        let ps = UtilityModel::patient_specific(vec![vec![1.0, -0.5, 0.0, 0.0, 0.0, 0.0]], FeatureMap::full(5)).unwrap();
        let w = ps.weights_at(&[0.0; 5]);
        assert!((w[0] - 0.731_058_578_6).abs() < 1e-9);
        assert!((w[0] + w[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn negative_last_weight_is_counted() {
        let ps = UtilityModel::patient_specific(vec![vec![3.0], vec![3.0]], FeatureMap::intercept_only()).unwrap();
        let x = Matrix::zeros(4, 2);
        assert_eq!(ps.negative_last_weight_count(&x), 4);
        assert_eq!(ps.n_outcomes(), 3);
    }

    #[test]
    fn decision_at_truth() {
        let data = noiseless(60, 4);
        let q = fit_q_models(&data).unwrap();
        let quarter = UtilityModel::scalar(0.25).unwrap();
        // D(0) = 0.25·2·2 + 0.75·2·(−2) = −2.
        let prof = contrast_profile(&q, &quarter, &[0.0, 0.0, 0.0]);
        assert!((prof.score + 2.0).abs() < 1e-8);
        assert_eq!(decision(&q, &quarter, &[0.0, 0.0, 0.0]), Action::Negative);
        let one = UtilityModel::scalar(1.0).unwrap();
        assert_eq!(decision(&q, &one, &[0.1, 0.1, 0.0]), Action::Positive);
    }

    #[test]
    fn tie_breaks_to_positive() {
        assert_eq!(Action::from_score(0.0), Action::Positive);
        assert_eq!(Action::from_score(-0.0), Action::Positive);
    }

    #[test]
    fn pseudo_loglik_at_zero_beta() {
        let data = noiseless(25, 5);
        let q = fit_q_models(&data).unwrap();
        let b = BehaviorModel::new(vec![0.0; 4], FeatureMap::full(3)).unwrap();
        for w in [0.0, 0.3, 1.0] {
            let ll = pseudo_loglik(&data, &q, &UtilityModel::scalar(w).unwrap(), &b);
            assert!((ll + 25.0 * 2f64.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn pseudo_loglik_perfect_agreement_limit() {
        let data = noiseless(20, 6);
        let q = fit_q_models(&data).unwrap();
        let model = UtilityModel::scalar(0.5).unwrap();
        // Relabel actions so every record agrees with the rule.
        let acts: Vec<Action> = (0..data.n()).map(|i| decision(&q, &model, data.covariate_row(i))).collect();
        let agreeing = ObsDataset::new(data.covariates().clone(), acts, data.outcomes().clone()).unwrap();
        let b = BehaviorModel::new(vec![20.0], FeatureMap::intercept_only()).unwrap();
        let ll = pseudo_loglik(&agreeing, &q, &model, &b);
        assert!(ll < 0.0 && ll > -20.0 * 1e-8);
    }

    #[test]
    fn pseudo_loglik_six_records_by_hand() {
        // One covariate; contrasts from exact Q-models R_Y = 2, R_Z = −2x·2.
        let xs = [-1.0, -0.5, 0.2, 0.4, 1.0, 1.5];
        let acts = [1, -1, 1, 1, -1, 1];
        let mut cov = Vec::new();
        let mut outs = Vec::new();
        let mut actions = Vec::new();
        for (&x, &a) in xs.iter().zip(&acts) {
            let s = a as f64;
            cov.push(vec![x]);
            outs.push(vec![s, -2.0 * s * x]);
            actions.push(Action::from_code(a).unwrap());
        }
        let data = ObsDataset::new(Matrix::from_rows(&cov).unwrap(), actions, Matrix::from_rows(&outs).unwrap()).unwrap();
        let q = fit_q_models(&data).unwrap();
        let model = UtilityModel::scalar(0.5).unwrap();
        // D(x) = 0.5·2 + 0.5·(−4x) = 1 − 2x → d = +1 for x ≤ 0.5.
        let beta = [0.3, -0.7];
        let mut by_hand = 0.0;
        for (&x, &a) in xs.iter().zip(&acts) {
            let d = if 1.0 - 2.0 * x >= 0.0 { 1 } else { -1 };
            let eta: f64 = beta[0] + beta[1] * x;
            let c = if a == d { 1.0 } else { 0.0 };
            by_hand += eta * c - (1.0 + eta.exp()).ln();
        }
        let b = BehaviorModel::new(beta.to_vec(), FeatureMap::full(1)).unwrap();
        assert!((pseudo_loglik(&data, &q, &model, &b) - by_hand).abs() < 1e-12);
    }

    #[test]
    fn feature_maps() {
        let f = FeatureMap::columns(vec![0, 2]).with_squares(vec![1]);
        assert_eq!(f.features(&[1.0, 3.0, 5.0]), vec![1.0, 1.0, 5.0, 9.0]);
        assert_eq!(f.dim(), 4);
        assert!(f.check(2).is_err());
        let d = f.design(&Matrix::from_rows(&[vec![1.0, 3.0, 5.0]]).unwrap()).unwrap();
        assert_eq!(d.as_slice(), &[1.0, 1.0, 5.0, 9.0]);
    }

    proptest! {
        #[test]
        fn common_contrast_scaling_keeps_decisions(seed in 0u64..200, scale in 0.1f64..10.0, w in 0.0f64..1.0) {
            let data = noiseless(30, seed);
            let q = fit_q_models(&data).unwrap();
            let mut scaled = q.clone();
            for fit in &mut scaled.fits {
                fit.coefficients.iter_mut().for_each(|c| *c *= scale);
            }
            let model = UtilityModel::scalar(w).unwrap();
            let mut rng = RngStream::new(seed + 1);
            for _ in 0..20 {
                let x: Vec<f64> = (0..3).map(|_| rng.normal(0.0, 1.0)).collect();
                let d0 = contrast_profile(&q, &model, &x).score;
                let d1 = contrast_profile(&scaled, &model, &x).score;
                // Exact zeros aside, the sign is preserved.
                if d0.abs() > 1e-12 {
                    prop_assert_eq!(d0 > 0.0, d1 > 0.0);
                }
            }
        }

        #[test]
        fn swapping_outcomes_mirrors_weight(seed in 0u64..200, w in 0.0f64..1.0) {
            let data = noiseless(30, seed);
            let q = fit_q_models(&data).unwrap();
            let mut swapped = q.clone();
            swapped.fits.swap(0, 1);
            let a = UtilityModel::scalar(w).unwrap();
            let b = UtilityModel::scalar(1.0 - w).unwrap();
            let mut rng = RngStream::new(seed + 7);
            for _ in 0..20 {
                let x: Vec<f64> = (0..3).map(|_| rng.normal(0.0, 1.0)).collect();
                let d0 = contrast_profile(&q, &a, &x).score;
                if d0.abs() > 1e-9 {
                    prop_assert_eq!(decision(&q, &a, &x), decision(&swapped, &b, &x));
                }
            }
        }

        #[test]
        fn pseudo_loglik_is_nonpositive_and_concave(seed in 0u64..200, t in 0.0f64..1.0) {
            let data = noiseless(30, seed);
            let q = fit_q_models(&data).unwrap();
            let model = UtilityModel::scalar(0.4).unwrap();
            let mut rng = RngStream::new(seed + 3);
            let b0: Vec<f64> = (0..4).map(|_| rng.normal(0.0, 2.0)).collect();
            let b1: Vec<f64> = (0..4).map(|_| rng.normal(0.0, 2.0)).collect();
            let mid: Vec<f64> = b0.iter().zip(&b1).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            let f = |b: &Vec<f64>| pseudo_loglik(&data, &q, &model, &BehaviorModel::new(b.clone(), FeatureMap::full(3)).unwrap());
            prop_assert!(f(&b0) <= 0.0 && f(&b1) <= 0.0);
            prop_assert!(f(&mid) >= t * f(&b0) + (1.0 - t) * f(&b1) - 1e-9);
        }
    }
}
