//! Full enumeration of the 2^p submodels from a (privatized) Gram matrix.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{DpError, Result};
use crate::linmodel::Statistic;

/// Largest p accepted by [`enumerate_posterior`].
pub const MAX_ENUMERATION_P: usize = 25;

const R2_CEILING: f64 = 1.0 - 1e-12;
const BLOCK: usize = 1024;

/// Inclusion mask over the p tested predictors; bit j set means predictor j
/// is in the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelIndex(pub u32);

impl ModelIndex {
    pub fn null() -> Self {
        ModelIndex(0)
    }

    pub fn full(p: usize) -> Self {
        ModelIndex(if p >= 32 { u32::MAX } else { (1u32 << p) - 1 })
    }

    pub fn from_indices(idx: &[usize]) -> Self {
        ModelIndex(idx.iter().fold(0, |m, &j| m | (1 << j)))
    }

    pub fn size(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0 >> j & 1 == 1
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..32).filter(|&j| self.contains(j)).collect()
    }

    /// "0110"-style string with predictor 0 first.
    pub fn bitstring(&self, p: usize) -> String {
        (0..p).map(|j| if self.contains(j) { '1' } else { '0' }).collect()
    }
}

/// Least squares fit of Z on V_γ read off a Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmodelFit {
    pub r2: f64,
    /// R² was outside [0, 1 − 1e-12] and had to be clamped.
    pub clamped: bool,
    /// Coefficients on the predictors of γ, in index order.
    pub beta: Vec<f64>,
}

/// Solves (V'V)_γ β = (V'Z)_γ by Cholesky and returns R²_γ and β̂_γ.
pub fn fit_submodel(g: &DMatrix<f64>, gamma: ModelIndex) -> Result<SubmodelFit> {
    let p = g.nrows() - 1;
    let zz = g[(p, p)];
    if !(zz > 0.0) {
        return Err(DpError::DegenerateResponse);
    }
    let idx = gamma.indices();
    if idx.iter().any(|&j| j >= p) {
        return Err(DpError::invalid(format!("model index {:#b} exceeds p = {p}", gamma.0)));
    }
    if idx.is_empty() {
        return Ok(SubmodelFit { r2: 0.0, clamped: false, beta: vec![] });
    }
    let k = idx.len();
    let a = DMatrix::from_fn(k, k, |i, j| g[(idx[i], idx[j])]);
    let c = DVector::from_fn(k, |i, _| g[(idx[i], p)]);
    let chol = a
        .cholesky()
        .ok_or_else(|| DpError::numeric(format!("V'V block for model {} is not positive definite", gamma.bitstring(p))))?;
    let beta = chol.solve(&c);
    let raw = c.dot(&beta) / zz;
    let r2 = raw.clamp(0.0, R2_CEILING);
    Ok(SubmodelFit { r2, clamped: r2 != raw, beta: beta.as_slice().to_vec() })
}

/// R²_γ = (V'Z)_γ' (V'V)_γ⁻¹ (V'Z)_γ / Z'Z, clamped to [0, 1 − 1e-12].
pub fn r2_gamma(g: &DMatrix<f64>, gamma: ModelIndex) -> Result<f64> {
    Ok(fit_submodel(g, gamma)?.r2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelPriorKind {
    Uniform,
    /// Uniform on the model size, then uniform among models of that size.
    #[default]
    HierarchicalUniform,
}

/// log π(γ).
pub fn model_prior_log(gamma: ModelIndex, p: usize, kind: ModelPriorKind) -> f64 {
    match kind {
        ModelPriorKind::Uniform => -(p as f64) * std::f64::consts::LN_2,
        ModelPriorKind::HierarchicalUniform => -((p + 1) as f64).ln() - ln_binomial(p as u64, gamma.size() as u64),
    }
}

/// Posterior over all 2^p models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPosterior {
    pub p: usize,
    /// log π(γ) + log B_γ0, indexed by the model mask.
    pub log_marginals: Vec<f64>,
    pub posterior: Vec<f64>,
    pub inclusion: Vec<f64>,
    pub beta_avg: Vec<f64>,
    pub prior_kind: ModelPriorKind,
    /// Number of models whose R² hit the clamp.
    pub clamped: usize,
}

impl ModelPosterior {
    pub fn probability(&self, gamma: ModelIndex) -> f64 {
        self.posterior[gamma.0 as usize]
    }

    /// Highest posterior model (lowest index on ties).
    pub fn map_model(&self) -> ModelIndex {
        let mut best = 0;
        for (i, &v) in self.posterior.iter().enumerate() {
            if v > self.posterior[best] {
                best = i;
            }
        }
        ModelIndex(best as u32)
    }
}

/// Settings shared by every enumeration over a Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnumerationSettings {
    pub n: usize,
    pub p0: usize,
    pub statistic: Statistic,
    pub prior_kind: ModelPriorKind,
}

fn log_sum_exp(xs: &[f64]) -> (f64, f64) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return (max, 0.0);
    }
    (max, xs.iter().map(|x| (x - max).exp()).sum())
}

/// Posterior model probabilities, inclusion probabilities and the
/// model-averaged coefficients from a positive definite Gram matrix.
pub fn enumerate_posterior(g_reg: &DMatrix<f64>, settings: &EnumerationSettings) -> Result<ModelPosterior> {
    if g_reg.nrows() != g_reg.ncols() || g_reg.nrows() < 2 {
        return Err(DpError::DimensionMismatch("Gram matrix must be square with p >= 1".into()));
    }
    let p = g_reg.nrows() - 1;
    if p > MAX_ENUMERATION_P {
        return Err(DpError::ModelSpaceTooLarge { p, max: MAX_ENUMERATION_P });
    }
    let EnumerationSettings { n, p0, statistic, prior_kind } = *settings;
    statistic.validate()?;
    if n <= p + p0 {
        return Err(DpError::invalid(format!("need n > p + p0, got n = {n}, p = {p}, p0 = {p0}")));
    }
    let total = 1usize << p;
    let blocks: Vec<(Vec<f64>, usize)> = (0..total.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| -> Result<(Vec<f64>, usize)> {
            let mut out = Vec::with_capacity(BLOCK);
            let mut clamped = 0;
            for i in b * BLOCK..((b + 1) * BLOCK).min(total) {
                let gamma = ModelIndex(i as u32);
                let fit = fit_submodel(g_reg, gamma)?;
                clamped += fit.clamped as usize;
                let log_b = if gamma.size() == 0 { 0.0 } else { statistic.log_value(fit.r2, n, gamma.size(), p0)? };
                out.push(model_prior_log(gamma, p, prior_kind) + log_b);
            }
            Ok((out, clamped))
        })
        .collect::<Result<_>>()?;

    // per-block partial sums merged in index order
    let partial: Vec<(f64, f64)> = blocks.iter().map(|(v, _)| log_sum_exp(v)).collect();
    let max = partial.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(DpError::numeric("all model log marginals are -inf or NaN"));
    }
    let sum: f64 = partial.iter().map(|&(m, s)| s * (m - max).exp()).sum();
    let log_norm = max + sum.ln();

    let clamped = blocks.iter().map(|b| b.1).sum();
    let log_marginals: Vec<f64> = blocks.into_iter().flat_map(|b| b.0).collect();
    // rounding can push sums of normalized weights a few ulps past 1
    let posterior: Vec<f64> = log_marginals.iter().map(|lm| (lm - log_norm).exp().min(1.0)).collect();
    let mut inclusion = vec![0.0; p];
    for (i, &w) in posterior.iter().enumerate() {
        for (j, inc) in inclusion.iter_mut().enumerate() {
            if i >> j & 1 == 1 {
                *inc += w;
            }
        }
    }
    for inc in &mut inclusion {
        *inc = inc.min(1.0);
    }
    let mut post = ModelPosterior { p, log_marginals, posterior, inclusion, beta_avg: vec![], prior_kind, clamped };
    post.beta_avg = model_averaged_beta(&post, g_reg, settings)?;
    Ok(post)
}

/// β̂ = Σ_γ π(γ|D)·shrink(γ)·β̂_γ, with β̂_γ embedded into p coordinates.
pub fn model_averaged_beta(post: &ModelPosterior, g_reg: &DMatrix<f64>, settings: &EnumerationSettings) -> Result<Vec<f64>> {
    let p = post.p;
    if g_reg.nrows() != p + 1 {
        return Err(DpError::DimensionMismatch(format!("posterior has p = {p}, Gram matrix has {} rows", g_reg.nrows())));
    }
    let terms: Vec<Vec<(usize, f64)>> = post
        .posterior
        .par_iter()
        .enumerate()
        .map(|(i, &w)| -> Result<Vec<(usize, f64)>> {
            let gamma = ModelIndex(i as u32);
            if w == 0.0 || gamma.size() == 0 {
                return Ok(vec![]);
            }
            let fit = fit_submodel(g_reg, gamma)?;
            let shrink = settings.statistic.shrinkage(fit.r2, settings.n, gamma.size(), settings.p0)?;
            Ok(gamma.indices().into_iter().zip(fit.beta).map(|(j, b)| (j, w * shrink * b)).collect())
        })
        .collect::<Result<_>>()?;
    let mut beta = vec![0.0; p];
    for t in terms {
        for (j, v) in t {
            beta[j] += v;
        }
    }
    Ok(beta)
}

/// n⁻¹‖Vβ − Vβ̂‖².
pub fn mse_of_fit(v_beta_true: &DVector<f64>, v: &DMatrix<f64>, beta_hat: &DVector<f64>) -> Result<f64> {
    if v.nrows() != v_beta_true.len() || v.ncols() != beta_hat.len() {
        return Err(DpError::DimensionMismatch(format!(
            "V is {}x{}, Vβ has {} rows, β̂ has {} entries",
            v.nrows(),
            v.ncols(),
            v_beta_true.len(),
            beta_hat.len()
        )));
    }
    let diff = v_beta_true - v * beta_hat;
    Ok(diff.norm_squared() / v.nrows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmodel::{GPriorSpec, InfoCriterionSpec};

    fn settings(stat: Statistic, kind: ModelPriorKind, n: usize) -> EnumerationSettings {
        EnumerationSettings { n, p0: 1, statistic: stat, prior_kind: kind }
    }

    #[test]
    fn prior_normalizes() {
        let probs: Vec<f64> =
            (0..4).map(|i| model_prior_log(ModelIndex(i), 2, ModelPriorKind::HierarchicalUniform).exp()).collect();
        let want = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0];
        for (a, b) in probs.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((model_prior_log(ModelIndex(5), 3, ModelPriorKind::Uniform).exp() - 0.125).abs() < 1e-15);
        for p in 1..=12 {
            for kind in [ModelPriorKind::Uniform, ModelPriorKind::HierarchicalUniform] {
                let s: f64 = (0..1u32 << p).map(|i| model_prior_log(ModelIndex(i), p, kind).exp()).sum();
                assert!((s - 1.0).abs() < 1e-12, "p = {p}");
            }
        }
    }

    #[test]
    fn model_index_helpers() {
        let m = ModelIndex::from_indices(&[0, 2]);
        assert_eq!(m.0, 5);
        assert_eq!(m.size(), 2);
        assert_eq!(m.bitstring(4), "1010");
        assert_eq!(ModelIndex::full(3).0, 7);
    }

    #[test]
    fn no_signal_favors_null_under_bic() {
        let mut g = DMatrix::identity(4, 4);
        g[(3, 3)] = 5.0;
        let post = enumerate_posterior(&g, &settings(Statistic::criterion(InfoCriterionSpec::Bic), ModelPriorKind::Uniform, 100)).unwrap();
        assert_eq!(post.map_model(), ModelIndex::null());
        assert!((post.posterior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(post.beta_avg.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn one_predictor_two_model_rule() {
        let g = DMatrix::from_row_slice(2, 2, &[10.0, 3.0, 3.0, 4.0]);
        let n = 30;
        let stat = Statistic::g_prior(GPriorSpec::GEqualsN);
        let post = enumerate_posterior(&g, &settings(stat, ModelPriorKind::Uniform, n)).unwrap();
        let r2 = 9.0 / 40.0;
        let b = stat.log_value(r2, n, 1, 1).unwrap().exp();
        assert!((post.posterior[1] - b / (1.0 + b)).abs() < 1e-12);
        assert!((post.inclusion[0] - post.posterior[1]).abs() == 0.0);
    }

    #[test]
    fn full_mass_single_model_beta() {
        let g = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 2.0, 1.0, 3.0, 1.0, 2.0, 1.0, 5.0]);
        let post = ModelPosterior {
            p: 2,
            log_marginals: vec![0.0; 4],
            posterior: vec![0.0, 0.0, 0.0, 1.0],
            inclusion: vec![1.0, 1.0],
            beta_avg: vec![],
            prior_kind: ModelPriorKind::Uniform,
            clamped: 0,
        };
        let s = settings(Statistic::g_prior(GPriorSpec::FixedG { g: 4.0 }), ModelPriorKind::Uniform, 50);
        let beta = model_averaged_beta(&post, &g, &s).unwrap();
        let a = g.view((0, 0), (2, 2)).into_owned();
        let ols = a.try_inverse().unwrap() * g.view((0, 2), (2, 1));
        for j in 0..2 {
            assert!((beta[j] - 0.8 * ols[j]).abs() < 1e-12);
        }
        let null = ModelPosterior { posterior: vec![1.0, 0.0, 0.0, 0.0], ..post };
        assert_eq!(model_averaged_beta(&null, &g, &s).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn guard_and_mse() {
        let g = DMatrix::<f64>::identity(27, 27);
        let s = settings(Statistic::criterion(InfoCriterionSpec::Bic), ModelPriorKind::Uniform, 100);
        assert!(matches!(enumerate_posterior(&g, &s), Err(DpError::ModelSpaceTooLarge { p: 26, .. })));
        let v = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let b = DVector::from_vec(vec![1.5]);
        let vb = &v * &b;
        assert_eq!(mse_of_fit(&vb, &v, &b).unwrap(), 0.0);
        assert!((mse_of_fit(&vb, &v, &DVector::zeros(1)).unwrap() - vb.norm_squared() / 2.0).abs() < 1e-15);
        assert!(mse_of_fit(&vb, &v, &DVector::zeros(2)).is_err());
    }
}
