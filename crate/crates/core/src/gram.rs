//! Private release of the Gram matrix of the centered data and the
//! post-processing chain G* → G** → G**ᵣ used for model enumeration.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DpError, Result};
use crate::linmodel::CenteredData;
use crate::mechanisms::{GramNoise, PrivacyBudget, Sensitivity};
use crate::rng;

/// Default thresholding percentile.
pub const DEFAULT_LAMBDA_PCT: f64 = 99.0;

/// Monte Carlo draws for the Wishart off-diagonal percentile.
pub const THRESHOLD_MC_DRAWS: usize = 100_000;

/// Mechanism draws used by the automatic repair policy.
pub const REPAIR_MC_DRAWS: usize = 1000;

const PD_REL_TOL: f64 = 1e-10;

/// G = D'D for D = [V Z], with layout [V'V, V'Z; Z'V, Z'Z].
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    g: DMatrix<f64>,
    n: usize,
    p0: usize,
}

impl GramMatrix {
    /// Wraps a symmetric matrix whose last diagonal entry is Z'Z > 0.
    pub fn new(g: DMatrix<f64>, n: usize, p0: usize) -> Result<Self> {
        if g.nrows() != g.ncols() || g.nrows() < 2 {
            return Err(DpError::DimensionMismatch(format!("Gram matrix must be square with p >= 1, got {}x{}", g.nrows(), g.ncols())));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(DpError::invalid("Gram matrix has non-finite entries"));
        }
        let tol = 1e-12 * g.amax().max(1.0);
        if (&g - g.transpose()).amax() > tol {
            return Err(DpError::invalid("Gram matrix is not symmetric"));
        }
        let d = g.nrows();
        if !(g[(d - 1, d - 1)] > 0.0) {
            return Err(DpError::DegenerateResponse);
        }
        Ok(Self { g, n, p0 })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.g.nrows() - 1
    }

    pub fn p0(&self) -> usize {
        self.p0
    }
}

/// Exact Gram matrix of the centered data.
pub fn build_gram(c: &CenteredData) -> Result<GramMatrix> {
    if c.v.nrows() != c.z.len() {
        return Err(DpError::DimensionMismatch(format!("V has {} rows, Z has {}", c.v.nrows(), c.z.len())));
    }
    let p = c.p();
    let mut d = DMatrix::zeros(c.n(), p + 1);
    d.columns_mut(0, p).copy_from(&c.v);
    d.set_column(p, &c.z);
    gram_of(&d, c.p0)
}

/// D'D for an arbitrary data matrix whose last column is the response.
pub fn gram_of(d: &DMatrix<f64>, p0: usize) -> Result<GramMatrix> {
    let mut g = d.tr_mul(d);
    symmetrize(&mut g);
    GramMatrix::new(g, d.nrows(), p0)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Entry bound 0.5 for data in (−0.5, 0.5): Δ₁ = 0.5 and Δ₂ = 0.5·√(p+1).
pub fn unit_box_sensitivity(p: usize) -> Sensitivity {
    Sensitivity { l1: 0.5, l2: 0.5 * ((p + 1) as f64).sqrt() }
}

/// Noise law for a Gram release. `None` disables noise; δ = 0 selects the
/// Laplace mechanism with per-entry sensitivity 2Δ₁², δ > 0 the Wishart
/// mechanism with row bound Δ₂.
pub fn gram_noise_for(p: usize, budget: Option<&PrivacyBudget>, sens: &Sensitivity) -> Result<GramNoise> {
    let Some(b) = budget else { return Ok(GramNoise::None) };
    if b.is_pure() {
        if !(sens.l1 > 0.0) {
            return Err(DpError::Config("the Laplace Gram mechanism needs a positive entry bound (l1)".into()));
        }
        GramNoise::laplace(p, b, 2.0 * sens.l1 * sens.l1)
    } else {
        if !(sens.l2 > 0.0) {
            return Err(DpError::Config("the Wishart Gram mechanism needs a positive row-norm bound (l2)".into()));
        }
        GramNoise::wishart(p, b, sens.l2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainStage {
    Privatized,
    Thresholded,
    Repaired,
}

/// G* = G + E, G** (thresholded) and G**ᵣ = G** + rI, with the noise law.
#[derive(Debug, Clone, PartialEq)]
pub struct GramChain {
    pub g_star: DMatrix<f64>,
    pub g_thresh: DMatrix<f64>,
    pub g_reg: DMatrix<f64>,
    pub noise: GramNoise,
    pub budget: Option<PrivacyBudget>,
    pub e_lambda: f64,
    pub r: f64,
    /// `None` when thresholding was skipped.
    pub lambda_pct: Option<f64>,
    pub n: usize,
    pub p0: usize,
    pub stage: ChainStage,
}

impl GramChain {
    pub fn p(&self) -> usize {
        self.g_star.nrows() - 1
    }

    pub fn dim(&self) -> usize {
        self.g_star.nrows()
    }

    /// Serializable metadata (no matrices).
    pub fn summary(&self) -> ChainSummary {
        ChainSummary {
            mechanism: self.noise.name().to_string(),
            noise: self.noise,
            epsilon: self.budget.map(|b| b.epsilon()),
            delta: self.budget.map(|b| b.delta()),
            e_lambda: self.e_lambda,
            r: self.r,
            lambda_pct: self.lambda_pct,
            n: self.n,
            p: self.p(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub mechanism: String,
    pub noise: GramNoise,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub e_lambda: f64,
    pub r: f64,
    pub lambda_pct: Option<f64>,
    pub n: usize,
    pub p: usize,
}

/// Releases G* = G + E with E drawn from `noise`.
pub fn privatize_gram<R: Rng + ?Sized>(
    g: &GramMatrix,
    noise: GramNoise,
    budget: Option<PrivacyBudget>,
    rng: &mut R,
) -> Result<GramChain> {
    let e = noise.sample(g.p() + 1, rng);
    let mut g_star = g.matrix() + e;
    symmetrize(&mut g_star);
    Ok(GramChain {
        g_thresh: g_star.clone(),
        g_reg: g_star.clone(),
        g_star,
        noise,
        budget,
        e_lambda: 0.0,
        r: 0.0,
        lambda_pct: None,
        n: g.n(),
        p0: g.p0(),
        stage: ChainStage::Privatized,
    })
}

/// λ-th percentile of |E_ij| for an off-diagonal entry.
pub fn offdiagonal_percentile<R: Rng + ?Sized>(noise: &GramNoise, lambda_pct: f64, rng: &mut R) -> Result<f64> {
    if !(lambda_pct > 0.0 && lambda_pct < 100.0) {
        return Err(DpError::invalid(format!("lambda must lie in (0, 100), got {lambda_pct}")));
    }
    let q = lambda_pct / 100.0;
    Ok(match *noise {
        GramNoise::Laplace { scale } => -scale * (-q).ln_1p(),
        GramNoise::Wishart { .. } => {
            let mut draws: Vec<f64> = (0..THRESHOLD_MC_DRAWS).map(|_| noise.sample_offdiagonal(rng).abs()).collect();
            draws.sort_by(f64::total_cmp);
            let idx = ((q * THRESHOLD_MC_DRAWS as f64).ceil() as usize).clamp(1, THRESHOLD_MC_DRAWS) - 1;
            draws[idx]
        }
        GramNoise::None => 0.0,
    })
}

/// Zeroes off-diagonal entries of G* with |G*_ij| < e_λ. `None` skips
/// thresholding (e_λ = 0).
pub fn threshold_offdiagonal<R: Rng + ?Sized>(mut chain: GramChain, lambda_pct: Option<f64>, rng: &mut R) -> Result<GramChain> {
    let e_lambda = match lambda_pct {
        Some(l) => offdiagonal_percentile(&chain.noise, l, rng)?,
        None => 0.0,
    };
    let mut t = chain.g_star.clone();
    let d = t.nrows();
    for i in 0..d {
        for j in 0..d {
            if i != j && t[(i, j)].abs() < e_lambda {
                t[(i, j)] = 0.0;
            }
        }
    }
    chain.g_reg = t.clone();
    chain.g_thresh = t;
    chain.e_lambda = e_lambda;
    chain.lambda_pct = lambda_pct;
    chain.stage = ChainStage::Thresholded;
    Ok(chain)
}

/// Choice of the ridge r in G**ᵣ = G** + rI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum RepairPolicy {
    /// r = 99th percentile of −λ_min(E) over mechanism draws, escalated to
    /// 3·|λ_min(G**)| if that is not enough.
    Auto,
    FixedR { r: f64 },
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

fn max_abs_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().amax()
}

/// Positive definite with min eigenvalue above 1e-10 relative to the largest.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    let ev: DVector<f64> = m.clone().symmetric_eigenvalues();
    let min = ev.min();
    min > 0.0 && min > PD_REL_TOL * ev.amax()
}

/// 99th percentile of −λ_min(E) over `draws` mechanism draws, floored at 0.
pub fn auto_ridge<R: Rng + ?Sized>(noise: &GramNoise, dim: usize, draws: usize, rng: &mut R) -> f64 {
    if noise.is_none() || draws == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..draws).map(|_| -min_eigenvalue(&noise.sample(dim, rng))).collect();
    v.sort_by(f64::total_cmp);
    let idx = ((0.99 * draws as f64).ceil() as usize).clamp(1, draws) - 1;
    v[idx].max(0.0)
}

/// Adds rI to G** so that the result is positive definite.
pub fn pd_repair<R: Rng + ?Sized>(mut chain: GramChain, policy: RepairPolicy, rng: &mut R) -> Result<GramChain> {
    let dim = chain.dim();
    let shifted = |r: f64| {
        let mut m = chain.g_thresh.clone();
        for i in 0..dim {
            m[(i, i)] += r;
        }
        m
    };
    let (r, g_reg) = match policy {
        RepairPolicy::FixedR { r } => {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(DpError::invalid(format!("r must be a nonnegative number, got {r}")));
            }
            let m = shifted(r);
            if !is_positive_definite(&m) {
                return Err(DpError::RepairFailed { lambda_min: min_eigenvalue(&m), r });
            }
            (r, m)
        }
        RepairPolicy::Auto => {
            let r = auto_ridge(&chain.noise, dim, REPAIR_MC_DRAWS, rng);
            let m = shifted(r);
            if is_positive_definite(&m) {
                (r, m)
            } else {
                let r2 = 3.0 * min_eigenvalue(&chain.g_thresh).abs();
                let m2 = shifted(r2);
                if !is_positive_definite(&m2) {
                    return Err(DpError::RepairFailed { lambda_min: min_eigenvalue(&m2), r: r2 });
                }
                (r2, m2)
            }
        }
    };
    chain.r = r;
    chain.g_reg = g_reg;
    chain.stage = ChainStage::Repaired;
    Ok(chain)
}

/// Runs privatize → threshold → repair with one generator.
pub fn run_chain<R: Rng + ?Sized>(
    g: &GramMatrix,
    noise: GramNoise,
    budget: Option<PrivacyBudget>,
    lambda_pct: Option<f64>,
    policy: RepairPolicy,
    rng: &mut R,
) -> Result<GramChain> {
    let chain = privatize_gram(g, noise, budget, rng)?;
    let chain = threshold_offdiagonal(chain, lambda_pct, rng)?;
    pd_repair(chain, policy, rng)
}

/// A centered n×(p+1) matrix D* with D*'D* = `g_reg`: centered uniform
/// noise, whitened by its own Cholesky factor and colored by the upper
/// Cholesky factor of `g_reg`.
pub fn synthetic_dataset(g_reg: &DMatrix<f64>, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let dim = g_reg.nrows();
    if g_reg.ncols() != dim {
        return Err(DpError::DimensionMismatch("g_reg must be square".into()));
    }
    if n <= dim {
        return Err(DpError::invalid(format!("need n > p + 1 = {dim}, got {n}")));
    }
    let color = g_reg
        .clone()
        .cholesky()
        .ok_or_else(|| DpError::invalid("g_reg is not positive definite"))?
        .l()
        .transpose();
    for attempt in 0..2u64 {
        let mut r = rng::stream(seed, attempt);
        let mut u = DMatrix::from_fn(n, dim, |_, _| r.random::<f64>());
        for mut col in u.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        let mut cov = u.tr_mul(&u);
        symmetrize(&mut cov);
        let Some(ch) = cov.cholesky() else { continue };
        // W = U L^{-T}, so W'W = I
        let lt = ch.l().transpose();
        let Some(w_t) = lt.transpose().solve_lower_triangular(&u.transpose()) else { continue };
        let w = w_t.transpose();
        return Ok(w * &color);
    }
    Err(DpError::numeric("centered uniform matrix was rank deficient twice"))
}

/// Largest absolute eigenvalue (spectral norm of a symmetric matrix).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    max_abs_eigenvalue(m)
}
