//! Monte Carlo confidence regions over the privacy noise of a Gram release,
//! and histogram summaries of functionals over those regions.
//!
//! The region is {G* − E : E ∈ ℰ₁₋α} ∩ {positive definite}, where ℰ₁₋α has
//! probability 1 − α under the noise law. For Laplace noise ℰ₁₋α is a box
//! with per-coordinate level (1 − α)^{1/m} over the m independent entries;
//! for Wishart noise it is a spectral-norm ball calibrated by simulation.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DpError, Result};
use crate::gram::{is_positive_definite, spectral_norm, GramChain};
use crate::mechanisms::GramNoise;
use crate::model_space::{enumerate_posterior, EnumerationSettings, ModelPosterior};
use crate::rng;

pub const DEFAULT_NSAMPLES: usize = 1000;
pub const HISTOGRAM_BINS: usize = 50;
/// Draws used to calibrate the Wishart spectral-norm radius.
pub const WISHART_CALIBRATION_DRAWS: usize = 100_000;

const MAX_REJECTION_TRIES: usize = 10_000;

/// Scalar summary of a model posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Functional {
    InclusionProb(usize),
    PosteriorMeanBeta(usize),
}

impl Functional {
    pub fn apply(&self, post: &ModelPosterior) -> Result<f64> {
        let (v, j) = match *self {
            Functional::InclusionProb(j) => (&post.inclusion, j),
            Functional::PosteriorMeanBeta(j) => (&post.beta_avg, j),
        };
        v.get(j)
            .copied()
            .ok_or_else(|| DpError::invalid(format!("functional index {j} out of range for p = {}", post.p)))
    }

    pub fn label(&self) -> String {
        match self {
            Functional::InclusionProb(j) => format!("inclusion[{j}]"),
            Functional::PosteriorMeanBeta(j) => format!("beta_avg[{j}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionConfig {
    pub alpha: f64,
    pub nsamples: usize,
    pub functional: Functional,
    pub seed: u64,
}

impl RegionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(DpError::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.nsamples < 100 {
            return Err(DpError::invalid(format!("nsamples must be at least 100, got {}", self.nsamples)));
        }
        Ok(())
    }
}

/// Shape of the 1 − α noise set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum AcceptanceSet {
    /// |E_ij| ≤ half_width for every entry.
    Box { half_width: f64 },
    /// ‖E‖₂ ≤ radius.
    SpectralBall { radius: f64 },
    /// E = 0.
    Point,
}

impl AcceptanceSet {
    /// Builds ℰ₁₋α for a noise law on `dim`×`dim` symmetric matrices.
    pub fn for_noise(noise: &GramNoise, dim: usize, alpha: f64, seed: u64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(DpError::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(match *noise {
            GramNoise::Laplace { scale } => {
                let m = (dim * (dim + 1) / 2) as f64;
                // P(|E| ≤ q) = 1 − e^{−q/b} = (1 − α)^{1/m}
                let level = (1.0 - alpha).powf(1.0 / m);
                AcceptanceSet::Box { half_width: -scale * (-level).ln_1p() }
            }
            GramNoise::Wishart { .. } => {
                let chunks = WISHART_CALIBRATION_DRAWS.div_ceil(1000);
                let mut norms: Vec<f64> = (0..chunks)
                    .into_par_iter()
                    .flat_map_iter(|c| {
                        let mut r = rng::stream(seed, c as u64);
                        let len = 1000.min(WISHART_CALIBRATION_DRAWS - c * 1000);
                        (0..len).map(|_| spectral_norm(&noise.sample(dim, &mut r))).collect::<Vec<_>>()
                    })
                    .collect();
                norms.sort_by(f64::total_cmp);
                let n = norms.len();
                let idx = (((1.0 - alpha) * n as f64).ceil() as usize).clamp(1, n) - 1;
                AcceptanceSet::SpectralBall { radius: norms[idx] }
            }
            GramNoise::None => AcceptanceSet::Point,
        })
    }

    pub fn contains(&self, e: &DMatrix<f64>) -> bool {
        match *self {
            AcceptanceSet::Box { half_width } => e.amax() <= half_width,
            AcceptanceSet::SpectralBall { radius } => spectral_norm(e) <= radius,
            AcceptanceSet::Point => e.iter().all(|&v| v == 0.0),
        }
    }

    /// One draw of E from the noise law conditioned on this set.
    fn sample<R: Rng + ?Sized>(&self, noise: &GramNoise, dim: usize, rng: &mut R) -> Result<DMatrix<f64>> {
        match (*self, *noise) {
            (AcceptanceSet::Box { half_width }, GramNoise::Laplace { scale }) => {
                // inverse CDF of |E| truncated to [0, q], random sign
                let mass = -(-half_width / scale).exp_m1();
                let mut e = DMatrix::zeros(dim, dim);
                for i in 0..dim {
                    for j in i..dim {
                        let u: f64 = rng.random();
                        let mag = -scale * (-u * mass).ln_1p();
                        let v = if rng.random::<bool>() { mag } else { -mag };
                        e[(i, j)] = v;
                        e[(j, i)] = v;
                    }
                }
                Ok(e)
            }
            (AcceptanceSet::SpectralBall { .. }, GramNoise::Wishart { .. }) => {
                for _ in 0..MAX_REJECTION_TRIES {
                    let e = noise.sample(dim, rng);
                    if self.contains(&e) {
                        return Ok(e);
                    }
                }
                Err(DpError::numeric("rejection sampling of the Wishart acceptance set did not terminate"))
            }
            (AcceptanceSet::Point, _) => Ok(DMatrix::zeros(dim, dim)),
            _ => Err(DpError::WrongMechanism("acceptance set does not match the noise law".into())),
        }
    }
}

/// Candidate Gram matrices of the region, in draw order.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSample {
    pub candidates: Vec<DMatrix<f64>>,
    pub rejected_non_pd: usize,
    pub set: AcceptanceSet,
}

/// Whether `g` lies in the (unintersected) region around the release.
pub fn region_contains(chain: &GramChain, set: &AcceptanceSet, g: &DMatrix<f64>) -> bool {
    set.contains(&(&chain.g_star - g))
}

/// Draws `cfg.nsamples` candidates G* − E_s with E_s ∈ ℰ₁₋α and keeps the
/// positive definite ones. Each candidate uses its own stream, so the result
/// does not depend on the thread count.
pub fn sample_region(chain: &GramChain, cfg: &RegionConfig) -> Result<RegionSample> {
    cfg.validate()?;
    let dim = chain.dim();
    let set = AcceptanceSet::for_noise(&chain.noise, dim, cfg.alpha, rng::derive_seed(cfg.seed, 1))?;
    if chain.noise.is_none() {
        let g = chain.g_star.clone();
        if !is_positive_definite(&g) {
            return Err(DpError::EmptyRegion { rejected: 1 });
        }
        return Ok(RegionSample { candidates: vec![g], rejected_non_pd: 0, set });
    }
    let draw_seed = rng::derive_seed(cfg.seed, 2);
    let drawn: Vec<Option<DMatrix<f64>>> = (0..cfg.nsamples)
        .into_par_iter()
        .map(|s| -> Result<Option<DMatrix<f64>>> {
            let mut r = rng::stream(draw_seed, s as u64);
            let e = set.sample(&chain.noise, dim, &mut r)?;
            let g = &chain.g_star - e;
            Ok(is_positive_definite(&g).then_some(g))
        })
        .collect::<Result<_>>()?;
    let rejected_non_pd = drawn.iter().filter(|c| c.is_none()).count();
    let candidates: Vec<DMatrix<f64>> = drawn.into_iter().flatten().collect();
    if candidates.is_empty() {
        return Err(DpError::EmptyRegion { rejected: rejected_non_pd });
    }
    Ok(RegionSample { candidates, rejected_non_pd, set })
}

/// Functional values over the region with a 50-bin histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Exact mean of the samples.
    pub mean: f64,
    pub accepted: usize,
    pub rejected_non_pd: usize,
    pub samples: Vec<f64>,
}

impl FunctionalHistogram {
    /// Bins `samples` over `range`, or over the observed range when `None`.
    pub fn from_samples(samples: Vec<f64>, range: Option<(f64, f64)>, rejected_non_pd: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(DpError::invalid("histogram needs at least one sample"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(DpError::numeric("non-finite functional value"));
        }
        let (lo, hi) = range.unwrap_or_else(|| {
            let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        });
        let width = (hi - lo) / HISTOGRAM_BINS as f64;
        let bin_edges: Vec<f64> = (0..=HISTOGRAM_BINS).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0usize; HISTOGRAM_BINS];
        for &v in &samples {
            let b = if width > 0.0 { (((v - lo) / width).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1) } else { 0 };
            counts[b] += 1;
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        Ok(Self { bin_edges, counts, mean, accepted: samples.len(), rejected_non_pd, samples })
    }
}

/// Enumerates the posterior for every candidate and histograms the functional.
pub fn map_functional(region: &RegionSample, functional: Functional, settings: &EnumerationSettings) -> Result<FunctionalHistogram> {
    let range = matches!(functional, Functional::InclusionProb(_)).then_some((0.0, 1.0));
    map_functional_with(region, settings, range, |post| functional.apply(post))
}

/// As [`map_functional`] with an arbitrary functional of the posterior.
pub fn map_functional_with<F>(
    region: &RegionSample,
    settings: &EnumerationSettings,
    range: Option<(f64, f64)>,
    f: F,
) -> Result<FunctionalHistogram>
where
    F: Fn(&ModelPosterior) -> Result<f64> + Sync,
{
    if region.candidates.is_empty() {
        return Err(DpError::EmptyRegion { rejected: region.rejected_non_pd });
    }
    let samples: Vec<f64> = region
        .candidates
        .par_iter()
        .map(|g| enumerate_posterior(g, settings).and_then(|post| f(&post)))
        .collect::<Result<_>>()?;
    FunctionalHistogram::from_samples(samples, range, region.rejected_non_pd)
}

/// hLM / hWM: exact mean of the functional over the accepted candidates.
pub fn histogram_mean_estimate(hist: &FunctionalHistogram) -> Result<f64> {
    if hist.accepted == 0 || hist.samples.is_empty() {
        return Err(DpError::invalid("histogram is empty"));
    }
    Ok(hist.samples.iter().sum::<f64>() / hist.samples.len() as f64)
}

/// Wishart draw helper for tests of the acceptance set.
#[doc(hidden)]
pub fn offdiagonal_wishart_entry<R: Rng + ?Sized>(dof: usize, rng: &mut R) -> f64 {
    let chi = ChiSquared::new(dof as f64).expect("dof >= 1").sample(rng);
    let z: f64 = rng.sample(StandardNormal);
    chi.sqrt() * z
}
