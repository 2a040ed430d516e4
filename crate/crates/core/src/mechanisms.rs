//! Noise primitives and privacy calibration.
//!
//! Laplace noise for pure ε-differential privacy, the analytic Gaussian
//! mechanism for (ε, δ), the Laplace and Wishart perturbations of a Gram
//! matrix, and the noise-scale rule for subsample-and-aggregate releases.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{DpError, Result};
use crate::split_aggregate::CensorBounds;

/// Privacy parameters (ε, δ). `delta == 0` selects the pure-ε mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(DpError::invalid(format!("epsilon must be positive and finite, got {epsilon}")));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(DpError::invalid(format!("delta must lie in [0, 1], got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_pure(&self) -> bool {
        self.delta == 0.0
    }
}

/// Global sensitivities of a released statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub l1: f64,
    pub l2: f64,
}

impl Sensitivity {
    pub fn new(l1: f64, l2: f64) -> Result<Self> {
        if !(l1 >= 0.0 && l1.is_finite() && l2 >= 0.0 && l2.is_finite()) {
            return Err(DpError::invalid(format!("sensitivities must be finite and >= 0, got l1={l1}, l2={l2}")));
        }
        Ok(Self { l1, l2 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Laplace,
    Gaussian,
    /// No noise. Only for non-private diagnostics and oracle comparisons.
    Disabled,
}

impl Mechanism {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mechanism::Laplace => "laplace",
            Mechanism::Gaussian => "gaussian",
            Mechanism::Disabled => "none",
        }
    }
}

/// Law of a scalar noise term: Laplace scale or Gaussian standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseScale {
    pub mechanism: Mechanism,
    pub scale: f64,
}

impl NoiseScale {
    pub fn disabled() -> Self {
        Self { mechanism: Mechanism::Disabled, scale: 0.0 }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.mechanism {
            Mechanism::Laplace => sample_laplace(self.scale, rng),
            Mechanism::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                self.scale * z
            }
            Mechanism::Disabled => 0.0,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> NoiseDraw {
        NoiseDraw { value: self.sample(rng), scale: self.scale, mechanism: self.mechanism }
    }
}

/// A realized noise term η together with the law it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseDraw {
    pub value: f64,
    pub scale: f64,
    pub mechanism: Mechanism,
}

fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    // u in (-1/2, 1/2); 1 - 2|u| never reaches 0 because random::<f64>() < 1
    let u: f64 = rng.random::<f64>() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// One draw from Laplace(0, scale).
pub fn laplace_noise<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(DpError::invalid(format!("Laplace scale must be positive and finite, got {scale}")));
    }
    Ok(sample_laplace(scale, rng))
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Privacy loss δ achieved by Gaussian noise with standard deviation `sigma`
/// on a statistic with ℓ2 sensitivity `l2`.
pub fn gaussian_delta(epsilon: f64, l2: f64, sigma: f64) -> f64 {
    let a = l2 / (2.0 * sigma);
    let b = epsilon * sigma / l2;
    std_normal_cdf(a - b) - epsilon.exp() * std_normal_cdf(-a - b)
}

const SIGMA_BRACKET_TOL: f64 = 1e-12;
const SIGMA_MAX_ITER: usize = 4000;

/// Smallest σ for which Gaussian noise is (ε, δ)-differentially private on a
/// statistic with ℓ2 sensitivity `l2`.
///
/// δ(σ) is decreasing in σ, so the tight frontier is found by bracketing and
/// bisection on σ/Δ₂. The result scales exactly linearly in `l2`.
pub fn analytic_gaussian_sigma(budget: &PrivacyBudget, l2: f64) -> Result<f64> {
    let (eps, delta) = (budget.epsilon(), budget.delta());
    if !(delta > 0.0) {
        return Err(DpError::WrongMechanism("the Gaussian mechanism needs delta > 0".into()));
    }
    if delta >= 1.0 {
        return Err(DpError::invalid("delta = 1 imposes no constraint on sigma"));
    }
    if !(l2 > 0.0) || !l2.is_finite() {
        return Err(DpError::invalid(format!("l2 sensitivity must be positive, got {l2}")));
    }
    Ok(unit_gaussian_sigma(eps, delta)? * l2)
}

fn unit_gaussian_sigma(eps: f64, delta: f64) -> Result<f64> {
    let excess = |s: f64| gaussian_delta(eps, 1.0, s) - delta;

    let mut hi = 1.0;
    let mut iter = 0;
    while excess(hi) > 0.0 {
        hi *= 2.0;
        iter += 1;
        if iter > 200 {
            return Err(DpError::numeric(format!(
                "no upper bracket for sigma (eps={eps}, delta={delta}, last sigma={hi})"
            )));
        }
    }
    let mut lo = hi / 2.0;
    iter = 0;
    while excess(lo) <= 0.0 {
        hi = lo;
        lo /= 2.0;
        iter += 1;
        if iter > 200 || lo == 0.0 {
            return Err(DpError::numeric(format!(
                "no lower bracket for sigma (eps={eps}, delta={delta}, last sigma={lo})"
            )));
        }
    }

    // invariant: excess(lo) > 0 >= excess(hi)
    let mut n = 0;
    while hi - lo > SIGMA_BRACKET_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        n += 1;
        if n > SIGMA_MAX_ITER {
            return Err(DpError::numeric(format!(
                "bisection did not converge (eps={eps}, delta={delta}, bracket=[{lo}, {hi}])"
            )));
        }
    }
    Ok(hi)
}

/// Noise law for a subsample-and-aggregate release of a mean of `m` values
/// censored to `bounds`. `None` disables noise.
pub fn subsample_noise_scale(bounds: &CensorBounds, m: usize, budget: Option<&PrivacyBudget>) -> Result<NoiseScale> {
    if m == 0 {
        return Err(DpError::invalid("M must be at least 1"));
    }
    let Some(budget) = budget else {
        return Ok(NoiseScale::disabled());
    };
    let sensitivity = bounds.width() / m as f64;
    if budget.is_pure() {
        Ok(NoiseScale { mechanism: Mechanism::Laplace, scale: sensitivity / budget.epsilon() })
    } else {
        Ok(NoiseScale { mechanism: Mechanism::Gaussian, scale: analytic_gaussian_sigma(budget, sensitivity)? })
    }
}

/// Per-entry Laplace scale for a (p+1)×(p+1) Gram release:
/// `s · (p+1)(p+2) / (2ε)` for per-entry sensitivity `s`.
pub fn laplace_gram_scale(p: usize, budget: &PrivacyBudget, per_entry_sensitivity: f64) -> Result<f64> {
    if !budget.is_pure() {
        return Err(DpError::WrongMechanism("Laplace Gram noise needs delta = 0".into()));
    }
    if !(per_entry_sensitivity > 0.0) || !per_entry_sensitivity.is_finite() {
        return Err(DpError::invalid(format!("per-entry sensitivity must be positive, got {per_entry_sensitivity}")));
    }
    let stats = ((p + 1) * (p + 2)) as f64 / 2.0;
    Ok(per_entry_sensitivity * stats / budget.epsilon())
}

/// Symmetric matrix with iid Laplace upper triangle (diagonal included).
pub fn laplace_gram_error<R: Rng + ?Sized>(
    p: usize,
    budget: &PrivacyBudget,
    per_entry_sensitivity: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let scale = laplace_gram_scale(p, budget, per_entry_sensitivity)?;
    Ok(symmetric_laplace(p + 1, scale, rng))
}

pub(crate) fn symmetric_laplace<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v = sample_laplace(scale, rng);
            e[(i, j)] = v;
            e[(j, i)] = v;
        }
    }
    e
}

/// Wishart degrees of freedom `⌊p+1 + 28·ln(4/δ)/ε²⌋`.
pub fn wishart_dof(p: usize, budget: &PrivacyBudget) -> Result<usize> {
    if budget.is_pure() {
        return Err(DpError::WrongMechanism("the Wishart mechanism needs delta > 0".into()));
    }
    let eps = budget.epsilon();
    let k = (p + 1) as f64 + 28.0 * (4.0 / budget.delta()).ln() / (eps * eps);
    Ok(k.floor() as usize)
}

/// One draw of Wishart(`dof`, `scale_sq`·I_dim) by the Bartlett decomposition.
pub fn wishart_sample<R: Rng + ?Sized>(dim: usize, dof: usize, scale_sq: f64, rng: &mut R) -> DMatrix<f64> {
    debug_assert!(dof >= dim);
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        let chi = ChiSquared::new((dof - i) as f64).expect("dof - i >= 1");
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let mut m = &a * a.transpose();
    m *= scale_sq;
    m
}

/// Centered Wishart error `M − k·Δ₂²·I` with `M ~ Wishart(k, Δ₂²·I_{p+1})`.
pub fn wishart_gram_error<R: Rng + ?Sized>(
    p: usize,
    budget: &PrivacyBudget,
    l2_row_bound: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if !(l2_row_bound > 0.0) || !l2_row_bound.is_finite() {
        return Err(DpError::invalid(format!("row-norm bound must be positive, got {l2_row_bound}")));
    }
    let k = wishart_dof(p, budget)?;
    Ok(centered_wishart(p + 1, k, l2_row_bound * l2_row_bound, rng))
}

pub(crate) fn centered_wishart<R: Rng + ?Sized>(dim: usize, dof: usize, scale_sq: f64, rng: &mut R) -> DMatrix<f64> {
    let mut m = wishart_sample(dim, dof, scale_sq, rng);
    for i in 0..dim {
        m[(i, i)] -= dof as f64 * scale_sq;
    }
    m
}

/// Noise law of a privatized Gram matrix, kept so that downstream steps
/// (thresholding, repair, confidence regions) can resample it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "lowercase")]
pub enum GramNoise {
    Laplace { scale: f64 },
    Wishart { dof: usize, row_bound: f64 },
    /// Noise switched off (oracle runs).
    None,
}

impl GramNoise {
    pub fn laplace(p: usize, budget: &PrivacyBudget, per_entry_sensitivity: f64) -> Result<Self> {
        Ok(GramNoise::Laplace { scale: laplace_gram_scale(p, budget, per_entry_sensitivity)? })
    }

    pub fn wishart(p: usize, budget: &PrivacyBudget, row_bound: f64) -> Result<Self> {
        if !(row_bound > 0.0) || !row_bound.is_finite() {
            return Err(DpError::invalid(format!("row-norm bound must be positive, got {row_bound}")));
        }
        Ok(GramNoise::Wishart { dof: wishart_dof(p, budget)?, row_bound })
    }

    pub fn name(&self) -> &'static str {
        match self {
            GramNoise::Laplace { .. } => "laplace",
            GramNoise::Wishart { .. } => "wishart",
            GramNoise::None => "none",
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, GramNoise::None)
    }

    /// One error matrix E of size `dim`×`dim`.
    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> DMatrix<f64> {
        match *self {
            GramNoise::Laplace { scale } => symmetric_laplace(dim, scale, rng),
            GramNoise::Wishart { dof, row_bound } => centered_wishart(dim, dof, row_bound * row_bound, rng),
            GramNoise::None => DMatrix::zeros(dim, dim),
        }
    }

    /// One off-diagonal entry of E, drawn from its exact marginal law.
    ///
    /// For Wishart(k, s²I) an off-diagonal entry is s²·Σₜ xₜyₜ with iid
    /// standard normals, which equals s²·√χ²ₖ·N(0,1) in law.
    pub fn sample_offdiagonal<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            GramNoise::Laplace { scale } => sample_laplace(scale, rng),
            GramNoise::Wishart { dof, row_bound } => {
                let chi = ChiSquared::new(dof as f64).expect("dof >= 1").sample(rng);
                let z: f64 = rng.sample(StandardNormal);
                row_bound * row_bound * chi.sqrt() * z
            }
            GramNoise::None => 0.0,
        }
    }
}
