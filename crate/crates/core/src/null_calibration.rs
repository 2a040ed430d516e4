//! Simulated null distributions of private test statistics.
//!
//! The noise and the censoring change the null law of a released statistic,
//! so fixed-level tests need critical values and p-values simulated under
//! H₀. Per-subset statistics are drawn from their known (or asymptotic) null
//! laws and pushed through the same censor–average–noise pipeline as real
//! data.

use rand::Rng;
use rand_distr::{Beta, ChiSquared, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::error::{DpError, Result};
use crate::linmodel::Statistic;
use crate::mechanisms::{subsample_noise_scale, NoiseScale, PrivacyBudget};
use crate::rng::{self, DpRng};
use crate::split_aggregate::{censor, CensorBounds};

/// Default number of null simulations.
pub const DEFAULT_NSIM: usize = 100_000;

/// Quantile levels reported in null summaries.
pub const SUMMARY_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSimConfig {
    pub subset_sizes: Vec<usize>,
    /// Degrees of freedom of the asymptotic χ² law of 2 log Λ.
    pub df: usize,
    pub bounds: CensorBounds,
    /// `None` simulates without noise.
    pub budget: Option<PrivacyBudget>,
    pub nsim: usize,
    pub seed: u64,
    /// Report the release clamped to [L, U] (on the log scale).
    pub censor_release: bool,
}

impl NullSimConfig {
    /// Equal subset sizes `b` for `m` subsets.
    pub fn balanced(m: usize, b: usize, df: usize, bounds: CensorBounds, budget: Option<PrivacyBudget>, nsim: usize, seed: u64) -> Self {
        Self { subset_sizes: vec![b; m], df, bounds, budget, nsim, seed, censor_release: true }
    }

    pub fn m(&self) -> usize {
        self.subset_sizes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.nsim == 0 {
            return Err(DpError::invalid("nsim must be at least 1"));
        }
        if self.df == 0 {
            return Err(DpError::invalid("df must be at least 1"));
        }
        if self.subset_sizes.is_empty() {
            return Err(DpError::invalid("at least one subset is required"));
        }
        Ok(())
    }

    fn noise(&self) -> Result<NoiseScale> {
        subsample_noise_scale(&self.bounds, self.m(), self.budget.as_ref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullStatisticKind {
    /// 2 log Λ*, censored or not.
    Lrt,
    /// log B*₁₀ or log I*₁₀.
    BayesFactor,
    /// Aggregated, transformed p-values.
    PValue,
}

/// Sorted simulated values of a statistic under H₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalNull {
    sorted_samples: Vec<f64>,
    kind: NullStatisticKind,
}

impl EmpiricalNull {
    pub fn from_samples(mut samples: Vec<f64>, kind: NullStatisticKind) -> Result<Self> {
        if samples.is_empty() {
            return Err(DpError::invalid("empirical null needs at least one sample"));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(DpError::numeric("NaN in simulated null samples"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted_samples: samples, kind })
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted_samples
    }

    pub fn kind(&self) -> NullStatisticKind {
        self.kind
    }

    pub fn nsim(&self) -> usize {
        self.sorted_samples.len()
    }

    /// Upper-side empirical quantile: the sample at 0-based index
    /// `n − ⌊(1−q)·n⌋`, clamped to the sample range.
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.nsim();
        let upper_count = ((1.0 - q) * n as f64 + 1e-9).floor() as usize;
        let idx = n.saturating_sub(upper_count).min(n - 1);
        self.sorted_samples[idx]
    }

    /// (level, quantile) pairs at [`SUMMARY_LEVELS`].
    pub fn summary(&self) -> Vec<(f64, f64)> {
        SUMMARY_LEVELS.iter().map(|&q| (q, self.quantile(q))).collect()
    }
}

/// Runs `nsim` replicates in fixed-size chunks, each chunk on its own stream.
fn simulate<F>(nsim: usize, seed: u64, replicate: F) -> Vec<f64>
where
    F: Fn(&mut DpRng) -> f64 + Sync,
{
    let chunks = nsim.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut r = rng::stream(seed, c as u64);
            let len = CHUNK.min(nsim - c * CHUNK);
            (0..len).map(|_| replicate(&mut r)).collect::<Vec<_>>()
        })
        .collect()
}

fn release<R: Rng + ?Sized>(per_subset: impl Iterator<Item = f64>, cfg: &NullSimConfig, noise: &NoiseScale, rng: &mut R) -> f64 {
    let mut sum = 0.0;
    let mut m = 0usize;
    for v in per_subset {
        sum += censor(v, &cfg.bounds);
        m += 1;
    }
    let value = sum / m as f64 + noise.sample(rng);
    if cfg.censor_release {
        censor(value, &cfg.bounds)
    } else {
        value
    }
}

/// Null law of 2 log Λ*: per subset 2 log Λᵢ ~ χ²_df, censored on the
/// log Λ scale, averaged, noised, and doubled.
pub fn simulate_null_lrt(cfg: &NullSimConfig) -> Result<EmpiricalNull> {
    cfg.validate()?;
    let noise = cfg.noise()?;
    let chi = ChiSquared::new(cfg.df as f64).map_err(|e| DpError::invalid(e.to_string()))?;
    let m = cfg.m();
    let samples = simulate(cfg.nsim, cfg.seed, |r| {
        let draws: Vec<f64> = (0..m).map(|_| chi.sample(r) / 2.0).collect();
        2.0 * release(draws.into_iter(), cfg, &noise, r)
    });
    EmpiricalNull::from_samples(samples, NullStatisticKind::Lrt)
}

/// Null law of log B* (or log I*): per subset R²ᵢ ~ Beta(p/2, (bᵢ−p−p0)/2).
pub fn simulate_null_bf(cfg: &NullSimConfig, stat: &Statistic, p: usize, p0: usize) -> Result<EmpiricalNull> {
    cfg.validate()?;
    stat.validate()?;
    if p == 0 {
        return Err(DpError::invalid("p must be at least 1"));
    }
    if let Some(&b) = cfg.subset_sizes.iter().find(|&&b| b <= p + p0) {
        return Err(DpError::invalid(format!("subset size {b} must exceed p + p0 = {}", p + p0)));
    }
    let noise = cfg.noise()?;
    let betas: Vec<Beta<f64>> = cfg
        .subset_sizes
        .iter()
        .map(|&b| Beta::new(p as f64 / 2.0, (b - p - p0) as f64 / 2.0).map_err(|e| DpError::invalid(e.to_string())))
        .collect::<Result<_>>()?;
    // statistics are monotone maps of R²; errors here are domain errors only
    let failure = std::sync::Mutex::new(None);
    let samples = simulate(cfg.nsim, cfg.seed, |r| {
        let vals: Vec<f64> = betas
            .iter()
            .zip(&cfg.subset_sizes)
            .map(|(beta, &b)| {
                let r2 = beta.sample(r).min(1.0 - 1e-15);
                stat.log_value(r2, b, p, p0).unwrap_or_else(|e| {
                    *failure.lock().unwrap() = Some(e);
                    f64::NAN
                })
            })
            .collect();
        release(vals.into_iter(), cfg, &noise, r)
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    EmpiricalNull::from_samples(samples, NullStatisticKind::BayesFactor)
}

/// Scale on which per-subset p-values are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueTransform {
    Identity,
    /// −ln p, so that large values are evidence against H₀.
    NegLog,
}

impl PValueTransform {
    pub fn apply(&self, p: f64) -> f64 {
        match self {
            PValueTransform::Identity => p,
            PValueTransform::NegLog => -p.ln(),
        }
    }
}

/// Null law of aggregated p-values: per subset pᵢ ~ Uniform(0, 1).
pub fn simulate_null_pvalue(cfg: &NullSimConfig, transform: PValueTransform) -> Result<EmpiricalNull> {
    cfg.validate()?;
    let noise = cfg.noise()?;
    let m = cfg.m();
    let samples = simulate(cfg.nsim, cfg.seed, |r| {
        // 1 - U keeps the draw in (0, 1]
        let vals: Vec<f64> = (0..m).map(|_| transform.apply(1.0 - r.random::<f64>())).collect();
        release(vals.into_iter(), cfg, &noise, r)
    });
    EmpiricalNull::from_samples(samples, NullStatisticKind::PValue)
}

/// Critical value for rejecting when the statistic exceeds it at level α.
pub fn critical_value(null: &EmpiricalNull, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(DpError::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let needed = (1.0 / alpha - 1e-9).ceil() as usize;
    if null.nsim() < needed {
        return Err(DpError::InsufficientSimulations { nsim: null.nsim(), alpha, needed });
    }
    Ok(null.quantile(1.0 - alpha))
}

/// Add-one Monte Carlo p-value (1 + #{samples ≥ observed}) / (nsim + 1).
pub fn p_value(null: &EmpiricalNull, observed: f64) -> f64 {
    let s = null.samples();
    let below = s.partition_point(|&v| v < observed);
    (1 + s.len() - below) as f64 / (s.len() + 1) as f64
}

/// Upper bound on P(R² > k) for R² ~ Beta(p/2, (b−p−p0)/2).
pub fn beta_tail_bound(k: f64, b: usize, p: usize, p0: usize) -> Result<f64> {
    if !(k > 0.0 && k < 1.0) {
        return Err(DpError::Domain(format!("k must lie in (0, 1), got {k}")));
    }
    if p == 0 || b <= p0 + p + 2 {
        return Err(DpError::Domain(format!("need p >= 1 and b > p0 + p + 2, got b = {b}, p = {p}, p0 = {p0}")));
    }
    let ln_1mk = (-k).ln_1p();
    if p >= 2 {
        let d = (b - p - p0) as f64;
        let log_bound = std::f64::consts::LN_2 + d / 2.0 * ln_1mk - d.ln() - ln_beta(p as f64 / 2.0, d / 2.0);
        Ok(log_bound.exp())
    } else {
        let d = (b - p0 - 2) as f64;
        let log_inner = d * ln_1mk + (-k.ln()).ln() - d.ln();
        let log_bound = -ln_beta(0.5, (b - 1 - p0) as f64 / 2.0) + 0.5 * log_inner;
        Ok(log_bound.exp())
    }
}
