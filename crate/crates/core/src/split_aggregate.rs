//! Subsample-and-aggregate release of Bayes factors and information criteria.
//!
//! The data are split into M disjoint subsets, the log statistic is computed
//! and censored to [L, U] on each subset, the censored values are averaged,
//! and one draw of noise calibrated to (U − L)/M is added to the average.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DpError, Result};
use crate::linmodel::{r_squared, reparametrize, RegressionData, Statistic};
use crate::mechanisms::{subsample_noise_scale, NoiseDraw, NoiseScale, PrivacyBudget};
use crate::rng;

/// Censoring interval [L, U] for per-subset log statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensorBounds {
    lower: f64,
    upper: f64,
}

impl CensorBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(DpError::InvalidBounds { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    /// L = ln(0.01/0.99), U = ln(0.99/0.01): posterior probabilities of the
    /// hypotheses censored at 0.01 and 0.99 under equal prior odds.
    pub fn posterior_probability_default() -> Self {
        Self { lower: (0.01f64 / 0.99).ln(), upper: (0.99f64 / 0.01).ln() }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Bounds for the swapped test (H₀ vs H₁): (−U, −L).
    pub fn reflected(&self) -> Self {
        Self { lower: -self.upper, upper: -self.lower }
    }
}

/// Clamp to [L, U].
pub fn censor(x: f64, bounds: &CensorBounds) -> f64 {
    x.max(bounds.lower).min(bounds.upper)
}

/// Assignment of rows to M disjoint subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    m: usize,
    assignment: Vec<usize>,
    seed: u64,
}

impl SplitPlan {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Subset index (0-based) of every row.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.m];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }

    /// Row indices of each subset, in increasing row order.
    pub fn subsets(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.m];
        for (row, &a) in self.assignment.iter().enumerate() {
            out[a].push(row);
        }
        out
    }
}

/// Seeded random split of `n` rows into `m` blocks whose sizes differ by at
/// most one, larger blocks first.
pub fn make_split(n: usize, m: usize, min_subset: usize, seed: u64) -> Result<SplitPlan> {
    if m == 0 || m.saturating_mul(min_subset.max(1)) > n {
        return Err(DpError::SplitInfeasible { n, m, min_subset });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, 0));
    let base = n / m;
    let extra = n % m;
    let mut assignment = vec![0; n];
    let mut pos = 0;
    for block in 0..m {
        let size = base + usize::from(block < extra);
        for &row in &perm[pos..pos + size] {
            assignment[row] = block;
        }
        pos += size;
    }
    Ok(SplitPlan { m, assignment, seed })
}

/// Uncensored log statistic on every subset.
///
/// Each subset is reparametrized on its own; the statistic uses the subset
/// size bᵢ in place of n.
pub fn per_subset_log_stats(data: &RegressionData, plan: &SplitPlan, stat: &Statistic) -> Result<Vec<f64>> {
    if plan.assignment.len() != data.n() {
        return Err(DpError::DimensionMismatch(format!(
            "split covers {} rows, data have {}",
            plan.assignment.len(),
            data.n()
        )));
    }
    stat.validate()?;
    let (p, p0) = (data.p(), data.p0());
    plan.subsets()
        .par_iter()
        .enumerate()
        .map(|(i, rows)| {
            let b = rows.len();
            if b <= p + p0 {
                return Err(DpError::invalid(format!("subset has {b} rows, needs more than p + p0 = {}", p + p0))
                    .in_subset(i));
            }
            let sub = data.select_rows(rows).map_err(|e| e.in_subset(i))?;
            let c = reparametrize(&sub).map_err(|e| e.in_subset(i))?;
            let r2 = r_squared(&c).map_err(|e| e.in_subset(i))?;
            stat.log_value(r2, b, p, p0).map_err(|e| e.in_subset(i))
        })
        .collect()
}

/// Privatized aggregate of censored per-subset log statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DPTestResult {
    /// log B*₁₀ (or log I*₁₀): mean of censored values plus noise.
    pub log_bstar: f64,
    /// log B*ᶜ₁₀: `log_bstar` clamped to [L, U].
    pub log_bstar_censored: f64,
    /// Censored per-subset values. Non-private: skipped by serialization.
    #[serde(skip)]
    pub per_subset_logs: Vec<f64>,
    pub noise: NoiseDraw,
    pub budget: Option<PrivacyBudget>,
    pub bounds: CensorBounds,
}

impl DPTestResult {
    pub fn m(&self) -> usize {
        self.per_subset_logs.len()
    }

    pub fn mean_censored(&self) -> f64 {
        mean(&self.per_subset_logs)
    }

    /// Posterior probabilities (P*(H₀|D), P*(H₁|D)) from the uncensored release.
    pub fn posterior(&self, pi0: f64) -> Result<(f64, f64)> {
        posterior_probability(self.log_bstar, pi0)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Censor, average and privatize. `budget = None` adds no noise.
pub fn aggregate_private<R: Rng + ?Sized>(
    per_subset: &[f64],
    bounds: &CensorBounds,
    budget: Option<&PrivacyBudget>,
    rng: &mut R,
) -> Result<DPTestResult> {
    if per_subset.is_empty() {
        return Err(DpError::invalid("no per-subset statistics to aggregate"));
    }
    if per_subset.iter().any(|v| v.is_nan()) {
        return Err(DpError::invalid("per-subset statistic is NaN"));
    }
    let scale = subsample_noise_scale(bounds, per_subset.len(), budget)?;
    let noise = scale.draw(rng);
    Ok(aggregate_with_noise(per_subset, bounds, noise, budget.copied()))
}

/// Aggregation with an externally supplied noise draw.
pub fn aggregate_with_noise(
    per_subset: &[f64],
    bounds: &CensorBounds,
    noise: NoiseDraw,
    budget: Option<PrivacyBudget>,
) -> DPTestResult {
    let censored: Vec<f64> = per_subset.iter().map(|&v| censor(v, bounds)).collect();
    let log_bstar = mean(&censored) + noise.value;
    DPTestResult {
        log_bstar,
        log_bstar_censored: censor(log_bstar, bounds),
        per_subset_logs: censored,
        noise,
        budget,
        bounds: *bounds,
    }
}

/// Repeated noise draws around a fixed censored mean, for studying the
/// distribution of the release with the data held fixed.
pub fn noise_replicates(mean_censored: f64, scale: &NoiseScale, draws: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, 1);
    (0..draws).map(|_| mean_censored + scale.sample(&mut r)).collect()
}

/// (P*(H₀|D), P*(H₁|D)) = π₀/(π₀ + (1−π₀)B*), evaluated in log space.
pub fn posterior_probability(log_bstar: f64, pi0: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&pi0) {
        return Err(DpError::invalid(format!("pi0 must lie in [0, 1], got {pi0}")));
    }
    if pi0 == 1.0 {
        return Ok((1.0, 0.0));
    }
    if pi0 == 0.0 {
        return Ok((0.0, 1.0));
    }
    // log odds of H1 against H0
    let log_odds = log_bstar + (1.0 - pi0).ln() - pi0.ln();
    let p1 = logistic(log_odds);
    let p0 = logistic(-log_odds);
    Ok((p0, p1))
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
