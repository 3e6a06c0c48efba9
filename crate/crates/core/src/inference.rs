//! Influence functions and the parametric bootstrap for the joint
//! utility/behavior estimator, with a test for preference heterogeneity.
//!
//! The estimator is non-regular: its limit is the minimizer of a convex,
//! piecewise-affine random objective. Each bootstrap draw samples Gaussian
//! outcome and behavior perturbations from the estimated influence-function
//! covariance and solves a smoothed version of that objective.

use rayon::prelude::*;

use crate::datamodel::{agreement_labels, BehaviorModel, FeatureMap, ObsDataset, QModelSet, UtilityModel};
use crate::error::{Error, Result};
use crate::estimation::FitReport;
use crate::numcore::{
    invert_spd, logit, minimize_nd, mvn_draw, std_normal_density, Matrix, RngStream,
};

/// Influence vectors of the outcome regressions and the behavior model,
/// with the covariance of their stack.
#[derive(Debug, Clone)]
pub struct InfluenceSet {
    /// One `n × q` block per outcome.
    pub psi_outcomes: Vec<Matrix>,
    /// `n × m`, `m` the behavior feature dimension.
    pub psi_action: Matrix,
    /// Uncentered second moment of the stacked vectors.
    pub sigma_hat: Matrix,
    pub sigma_root: Matrix,
}

impl InfluenceSet {
    pub fn outcome_dim(&self) -> usize {
        self.psi_outcomes[0].cols()
    }

    pub fn action_dim(&self) -> usize {
        self.psi_action.cols()
    }

    pub fn total_dim(&self) -> usize {
        self.psi_outcomes.len() * self.outcome_dim() + self.action_dim()
    }
}

pub fn influence_set(data: &ObsDataset, q: &QModelSet, fit: &FitReport) -> Result<InfluenceSet> {
    let n = data.n();
    let design = q.design.design(data.covariates(), data.actions())?;
    let psi_outcomes = q
        .fits
        .iter()
        .map(|f| f.influence(&design, &f.residuals))
        .collect::<Result<Vec<_>>>()?;

    let behavior = &fit.behavior;
    let labels = agreement_labels(data, q, &fit.utility);
    let features = behavior.features.design(data.covariates())?;
    let mut psi_action = features.clone();
    for (i, &c) in labels.iter().enumerate() {
        let x = data.covariate_row(i);
        let r = f64::from(u8::from(c)) - behavior.prob_optimal(x);
        psi_action.row_mut(i).iter_mut().for_each(|v| *v *= r);
    }

    let r = psi_outcomes.len() * psi_outcomes[0].cols() + psi_action.cols();
    let mut sigma_hat = Matrix::zeros(r, r);
    let mut stacked = Vec::with_capacity(r);
    for i in 0..n {
        stacked.clear();
        for block in &psi_outcomes {
            stacked.extend_from_slice(block.row(i));
        }
        stacked.extend_from_slice(psi_action.row(i));
        for a in 0..r {
            let va = stacked[a] / n as f64;
            for b in 0..=a {
                sigma_hat[(a, b)] += va * stacked[b];
            }
        }
    }
    for a in 0..r {
        for b in 0..a {
            sigma_hat[(b, a)] = sigma_hat[(a, b)];
        }
    }
    let sigma_root = crate::numcore::symmetric_sqrt(&sigma_hat)?;
    Ok(InfluenceSet { psi_outcomes, psi_action, sigma_hat, sigma_root })
}

/// How outcome perturbations enter the smoothed objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PerturbationForm {
    /// Each outcome's perturbation `φ(x)ᵀZ_k` is multiplied by both its
    /// weight and its estimated contrast, `ω_k(x) R̂_k(x) φ(x)ᵀZ_k`.
    #[default]
    ContrastWeighted,
    /// Weight only, `ω_k(x) φ(x)ᵀZ_k`: the first-order change of the
    /// decision score under a perturbation of the contrasts.
    WeightOnly,
}

/// The smoothed functional `k̃(Z, u)` for one fitted model, with every
/// per-record quantity precomputed.
#[derive(Debug, Clone)]
pub struct KernelFunctional {
    n: usize,
    k: usize,
    bandwidth: f64,
    beta: Vec<f64>,
    /// Per record: behavior features times `(2P − 1)`, times the kernel weight.
    weighted_features: Matrix,
    /// Per record: `β̂ᵀ` of the row above, divided by `n`; never negative.
    objective_weights: Vec<f64>,
    basis: Matrix,
    multipliers: Matrix,
    /// Per record: stacked `(R̂_k − R̂_K) ω̇_k(x)`.
    slopes: Matrix,
    information: Matrix,
    theta_hat: Vec<f64>,
    /// Positions in `θ` that are not block intercepts.
    slope_positions: Vec<usize>,
}

/// Utility features and stacked parameters used for the derivative of the
/// weights; fixed two-outcome weights are treated as an intercept-only model.
fn utility_parametrization(model: &UtilityModel) -> Result<(FeatureMap, Vec<Vec<f64>>)> {
    match model {
        UtilityModel::PatientSpecific { coefficients, features } => Ok((features.clone(), coefficients.clone())),
        UtilityModel::Fixed { weights } if weights.len() == 1 => {
            Ok((FeatureMap::intercept_only(), vec![vec![logit(weights[0])]]))
        }
        UtilityModel::Fixed { .. } => Err(Error::Unsupported(
            "bootstrap for fixed weights over three or more outcomes".into(),
        )),
    }
}

/// `v̂ n^{−1/6}` with `v̂` the sample standard deviation of the fitted
/// decision scores.
pub fn default_bandwidth(data: &ObsDataset, q: &QModelSet, model: &UtilityModel) -> Result<f64> {
    let n = data.n();
    if n < 2 {
        return Err(Error::InvalidInput("bandwidth needs at least two records".into()));
    }
    let scores: Vec<f64> = (0..n)
        .map(|i| crate::datamodel::contrast_profile(q, model, data.covariate_row(i)).score)
        .collect();
    let mean = scores.iter().sum::<f64>() / n as f64;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::Singular("fitted decision scores have zero spread".into()));
    }
    Ok(sd * (n as f64).powf(-1.0 / 6.0))
}

impl KernelFunctional {
    pub fn new(
        data: &ObsDataset,
        q: &QModelSet,
        fit: &FitReport,
        bandwidth: f64,
        form: PerturbationForm,
    ) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidInput(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let (ufeatures, theta) = utility_parametrization(&fit.utility)?;
        let n = data.n();
        let k = data.k();
        let du = ufeatures.dim();
        let d = theta.len() * du;
        let behavior: &BehaviorModel = &fit.behavior;
        let m = behavior.features.dim();

        let mut weighted_features = Matrix::zeros(n, m);
        let mut objective_weights = vec![0.0; n];
        let mut basis = Matrix::zeros(n, q.design.dim());
        let mut multipliers = Matrix::zeros(n, k);
        let mut slopes = Matrix::zeros(n, d);
        let mut information = Matrix::zeros(m, m);

        for i in 0..n {
            let x = data.covariate_row(i);
            let prof = crate::datamodel::contrast_profile(q, &fit.utility, x);
            let kernel = std_normal_density(prof.score / bandwidth) / bandwidth;
            let p = behavior.prob_optimal(x);
            let f = behavior.features.features(x);

            let row = weighted_features.row_mut(i);
            for (r, v) in row.iter_mut().zip(&f) {
                *r = v * (2.0 * p - 1.0) * kernel;
            }
            objective_weights[i] = row.iter().zip(&behavior.beta).map(|(r, b)| r * b).sum::<f64>() / n as f64;

            basis.row_mut(i).copy_from_slice(&q.design.contrast_basis(x));
            for j in 0..k {
                multipliers[(i, j)] = match form {
                    PerturbationForm::ContrastWeighted => prof.weights[j] * prof.contrasts[j],
                    PerturbationForm::WeightOnly => prof.weights[j],
                };
            }
            let fu = ufeatures.features(x);
            for (j, _) in theta.iter().enumerate() {
                let w = prof.weights[j];
                let scale = (prof.contrasts[j] - prof.contrasts[k - 1]) * w * (1.0 - w);
                for (l, v) in fu.iter().enumerate() {
                    slopes[(i, j * du + l)] = scale * v;
                }
            }

            let pw = p * (1.0 - p) / n as f64;
            for a in 0..m {
                for b in 0..m {
                    information[(a, b)] += pw * f[a] * f[b];
                }
            }
        }

        let slope_positions = (0..d).filter(|j| j % du != 0).collect();
        Ok(KernelFunctional {
            n,
            k,
            bandwidth,
            beta: behavior.beta.clone(),
            weighted_features,
            objective_weights,
            basis,
            multipliers,
            slopes,
            information,
            theta_hat: theta.concat(),
            slope_positions,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Dimension of the utility parameter `u`.
    pub fn dim(&self) -> usize {
        self.slopes.cols()
    }

    /// `E_n[P(1 − P) f fᵀ]` at the fitted behavior coefficients.
    pub fn information(&self) -> &Matrix {
        &self.information
    }

    /// Perturbed decision-score offsets `T̃(x_i, Z)` for every record.
    fn offsets(&self, z_outcomes: &[&[f64]]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let c = self.basis.row(i);
                (0..self.k)
                    .map(|j| self.multipliers[(i, j)] * c.iter().zip(z_outcomes[j]).map(|(a, b)| a * b).sum::<f64>())
                    .sum()
            })
            .collect()
    }

    fn check(&self, z_outcomes: &[&[f64]], u: &[f64]) -> Result<()> {
        if z_outcomes.len() != self.k
            || z_outcomes.iter().any(|z| z.len() != self.basis.cols())
            || u.len() != self.dim()
        {
            return Err(Error::Dimension(format!(
                "expected {} outcome perturbations of length {} and u of length {}",
                self.k,
                self.basis.cols(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `k̃(Z, u) = E_n[ f(x)(2P(x) − 1) |T̃(x, Z) + Σ_k (R̂_k − R̂_K) ω̇_k(x)ᵀu_k| h⁻¹φ(D̂(x)/h) ]`.
    pub fn k_tilde(&self, z_outcomes: &[&[f64]], u: &[f64]) -> Result<Vec<f64>> {
        self.check(z_outcomes, u)?;
        Ok(self.k_tilde_at(&self.offsets(z_outcomes), u))
    }

    fn k_tilde_at(&self, offsets: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.weighted_features.cols()];
        for (i, a) in offsets.iter().enumerate() {
            let s = self.slopes.row(i);
            let abs = (a + s.iter().zip(u).map(|(x, y)| x * y).sum::<f64>()).abs();
            for (o, g) in out.iter_mut().zip(self.weighted_features.row(i)) {
                *o += g * abs;
            }
        }
        out.iter_mut().for_each(|o| *o /= self.n as f64);
        out
    }

    /// `β̂ᵀk̃(Z, u)`, the objective minimized over `u`.
    pub fn objective(&self, z_outcomes: &[&[f64]], u: &[f64]) -> Result<f64> {
        self.check(z_outcomes, u)?;
        Ok(self.objective_at(&self.offsets(z_outcomes), u))
    }

    fn objective_at(&self, offsets: &[f64], u: &[f64]) -> f64 {
        offsets
            .iter()
            .zip(&self.objective_weights)
            .enumerate()
            .map(|(i, (a, w))| {
                let s = self.slopes.row(i);
                w * (a + s.iter().zip(u).map(|(x, y)| x * y).sum::<f64>()).abs()
            })
            .sum()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraw {
    /// Approximates `√n(θ̂ − θ)`.
    pub u_tilde: Vec<f64>,
    /// Approximates `√n(β̂ − β)`.
    pub b_tilde: Vec<f64>,
}

/// `n_boot` independent draws; draw `b` uses the RNG stream `(seed, b)`, so
/// the result does not depend on how the work is scheduled.
pub fn bootstrap_draws(
    infl: &InfluenceSet,
    kernel: &KernelFunctional,
    n_boot: usize,
    seed: u64,
) -> Result<Vec<BootstrapDraw>> {
    if infl.psi_outcomes.len() != kernel.k || infl.action_dim() != kernel.weighted_features.cols() {
        return Err(Error::Dimension("influence set and kernel functional disagree".into()));
    }
    let info_inv = invert_spd(&kernel.information)
        .map_err(|_| Error::Singular("behavior information matrix is singular".into()))?;
    (0..n_boot as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = RngStream::with_stream(seed, b);
            one_draw(infl, kernel, &info_inv, &mut rng)
        })
        .collect()
}

fn one_draw(
    infl: &InfluenceSet,
    kernel: &KernelFunctional,
    info_inv: &Matrix,
    rng: &mut RngStream,
) -> Result<BootstrapDraw> {
    let z = mvn_draw(rng, infl.total_dim(), &infl.sigma_root)?;
    let q = infl.outcome_dim();
    let z_outcomes: Vec<&[f64]> = z.chunks(q).take(kernel.k).collect();
    let z_action = &z[kernel.k * q..];
    let offsets = kernel.offsets(&z_outcomes);
    let u = minimize_nd(|u| kernel.objective_at(&offsets, u), &vec![0.0; kernel.dim()], 1.0, rng)?;
    let kt = kernel.k_tilde_at(&offsets, &u);
    let rhs: Vec<f64> = z_action.iter().zip(&kt).map(|(a, b)| a - b).collect();
    let b_tilde = info_inv.mul_vec(&rhs)?;
    Ok(BootstrapDraw { u_tilde: u, b_tilde })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneityTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n_boot: usize,
    pub alpha: f64,
    pub reject: bool,
}

/// Tests whether the non-intercept utility coefficients are all zero,
/// comparing `√n‖θ̂₍₁₎‖` with the bootstrap norms `‖ũ₍₁₎‖`.
pub fn heterogeneity_test(kernel: &KernelFunctional, draws: &[BootstrapDraw], alpha: f64) -> Result<HeterogeneityTest> {
    if draws.is_empty() {
        return Err(Error::InvalidInput("no bootstrap draws".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let slope_norm = |v: &[f64]| kernel.slope_positions.iter().map(|&j| v[j] * v[j]).sum::<f64>().sqrt();
    let statistic = (kernel.n as f64).sqrt() * slope_norm(&kernel.theta_hat);
    let exceed = draws.iter().filter(|d| slope_norm(&d.u_tilde) >= statistic).count();
    let p_value = (1 + exceed) as f64 / (draws.len() + 1) as f64;
    Ok(HeterogeneityTest { statistic, p_value, n_boot: draws.len(), alpha, reject: p_value <= alpha })
}
