//! Data generator for simulation studies.

use dpms_core::RegressionData;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimStudyConfig {
    pub p: usize,
    pub n: usize,
    pub snr: f64,
    /// Number of nonzero coefficients.
    pub n_active: usize,
    pub n_datasets: usize,
    #[serde(default = "default_beta_sd")]
    pub beta_sd: f64,
    pub seed: u64,
}

fn default_beta_sd() -> f64 {
    0.13
}

impl SimStudyConfig {
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.p == 0 {
            return bad("simulate.p must be at least 1".into());
        }
        if self.n_active > self.p {
            return bad(format!("simulate.n_active = {} exceeds p = {}", self.n_active, self.p));
        }
        if self.n_datasets == 0 {
            return bad("simulate.n_datasets must be at least 1".into());
        }
        if self.n <= self.p + 2 {
            return bad(format!("simulate.n = {} must exceed p + 2", self.n));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return bad(format!("simulate.snr must be positive, got {}", self.snr));
        }
        if !(self.beta_sd > 0.0) {
            return bad("simulate.beta_sd must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimDataset {
    /// Intercept-only X₀; predictors in (−0.5, 0.5).
    pub data: RegressionData,
    pub beta: DVector<f64>,
    pub sigma: f64,
    /// Indices of the nonzero coefficients, sorted.
    pub support: Vec<usize>,
    /// Responses outside (−0.5, 0.5).
    pub out_of_box: usize,
}

fn var_pop(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, s) = v.clone().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    let mean = s / n as f64;
    v.map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64
}

/// Predictors iid N(0, 1), each column divided by 2·max|x| so it lies in
/// [−0.5, 0.5]; β ~ N(0, beta_sd²) on a random support of size `n_active`;
/// zero intercept; σ² = var(Xβ)/snr so the realized SNR is exact.
pub fn generate_sim_dataset<R: Rng + ?Sized>(cfg: &SimStudyConfig, rng: &mut R) -> CliResult<SimDataset> {
    cfg.validate()?;
    let (n, p) = (cfg.n, cfg.p);
    let mut x = DMatrix::from_fn(n, p, |_, _| Distribution::<f64>::sample(&StandardNormal, rng));
    for mut col in x.column_iter_mut() {
        let m = col.amax();
        col /= 2.0 * m;
    }
    let mut idx: Vec<usize> = (0..p).collect();
    idx.shuffle(rng);
    let mut support = idx[..cfg.n_active].to_vec();
    support.sort_unstable();
    let bdist = Normal::new(0.0, cfg.beta_sd).map_err(|e| CliError::Config(e.to_string()))?;
    let mut beta = DVector::zeros(p);
    for &j in &support {
        beta[j] = bdist.sample(rng);
    }
    let signal = &x * &beta;
    let var_signal = if support.is_empty() {
        // null model: noise level of a typical one-predictor signal
        let mean_var_x = x.column_iter().map(|c| var_pop(c.iter().copied())).sum::<f64>() / p as f64;
        cfg.beta_sd.powi(2) * mean_var_x
    } else {
        var_pop(signal.iter().copied())
    };
    let sigma = (var_signal / cfg.snr).sqrt();
    let y = DVector::from_fn(n, |i, _| signal[i] + sigma * Distribution::<f64>::sample(&StandardNormal, rng));
    let out_of_box = y.iter().filter(|v| v.abs() >= 0.5).count();
    let data = RegressionData::new(y, DMatrix::from_element(n, 1, 1.0), x)?;
    Ok(SimDataset { data, beta, sigma, support, out_of_box })
}

/// Realized SNR var(Xβ)/σ² (population variance).
pub fn realized_snr(ds: &SimDataset) -> f64 {
    let signal = ds.data.x() * &ds.beta;
    var_pop(signal.iter().copied()) / ds.sigma.powi(2)
}
