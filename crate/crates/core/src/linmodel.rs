//! Non-private linear-model statistics.
//!
//! The common predictors X₀ are projected out of the response and the tested
//! predictors; every test statistic then depends on the data only through R².

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{DpError, Result};
use crate::quadrature::{integrate, QuadOptions};

/// Relative tolerance for rank decisions, against the largest singular value.
pub const RANK_TOL: f64 = 1e-10;

/// Response, common predictors and tested predictors of a normal linear model.
#[derive(Debug, Clone)]
pub struct RegressionData {
    y: DVector<f64>,
    x0: DMatrix<f64>,
    x: DMatrix<f64>,
}

impl RegressionData {
    /// Validates dimensions and that `[X0 X]` has full column rank.
    pub fn new(y: DVector<f64>, x0: DMatrix<f64>, x: DMatrix<f64>) -> Result<Self> {
        let n = y.len();
        if x0.nrows() != n || x.nrows() != n {
            return Err(DpError::DimensionMismatch(format!(
                "y has {n} rows, X0 has {}, X has {}",
                x0.nrows(),
                x.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(DpError::invalid("at least one tested predictor is required"));
        }
        if n <= x.ncols() + x0.ncols() {
            return Err(DpError::invalid(format!(
                "need n > p + p0, got n = {n}, p = {}, p0 = {}",
                x.ncols(),
                x0.ncols()
            )));
        }
        if y.iter().chain(x0.iter()).chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(DpError::invalid("data contain non-finite values"));
        }
        let mut full = DMatrix::zeros(n, x0.ncols() + x.ncols());
        full.columns_mut(0, x0.ncols()).copy_from(&x0);
        full.columns_mut(x0.ncols(), x.ncols()).copy_from(&x);
        if let Some(column) = first_dependent_column(&full) {
            return Err(DpError::RankDeficient { column, context: "columns of [X0 X]".into() });
        }
        Ok(Self { y, x0, x })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn p0(&self) -> usize {
        self.x0.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x0(&self) -> &DMatrix<f64> {
        &self.x0
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Rows `rows` of the data, in the given order. Rank is re-validated.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        let x0 = self.x0.select_rows(rows);
        let x = self.x.select_rows(rows);
        Self::new(y, x0, x)
    }
}

/// Index of the first column that is (numerically) a combination of earlier
/// columns, or `None` for full column rank.
pub fn first_dependent_column(a: &DMatrix<f64>) -> Option<usize> {
    if a.ncols() == 0 {
        return None;
    }
    if a.nrows() < a.ncols() {
        return Some(a.nrows());
    }
    let r = a.clone().qr().r();
    let sigma_max = r.singular_values().max();
    if !(sigma_max > 0.0) {
        return Some(0);
    }
    let tol = RANK_TOL * sigma_max;
    (0..r.ncols()).find(|&j| r[(j, j)].abs() <= tol)
}

/// Orthonormal basis of the column span of a full-rank matrix.
fn orthonormal_basis(a: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    if let Some(column) = first_dependent_column(a) {
        return Err(DpError::RankDeficient { column, context: context.into() });
    }
    Ok(a.clone().qr().q())
}

/// Z = (I − P_{X0}) y and V = (I − P_{X0}) X.
#[derive(Debug, Clone)]
pub struct CenteredData {
    pub z: DVector<f64>,
    pub v: DMatrix<f64>,
    pub p0: usize,
}

impl CenteredData {
    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn p(&self) -> usize {
        self.v.ncols()
    }
}

/// Projects the common predictors out of `y` and `X` using a QR factorization
/// of X₀; the projector itself is never formed.
pub fn reparametrize(data: &RegressionData) -> Result<CenteredData> {
    let (z, v) = if data.p0() == 0 {
        (data.y.clone(), data.x.clone())
    } else {
        let q = orthonormal_basis(&data.x0, "common predictors X0")?;
        let z = &data.y - &q * (q.transpose() * &data.y);
        let v = &data.x - &q * (q.transpose() * &data.x);
        (z, v)
    };
    Ok(CenteredData { z, v, p0: data.p0() })
}

/// R² = Z'P_V Z / Z'Z, computed from a QR factorization of V.
pub fn r_squared(c: &CenteredData) -> Result<f64> {
    let zz = c.z.norm_squared();
    if !(zz > 0.0) {
        return Err(DpError::DegenerateResponse);
    }
    let q = orthonormal_basis(&c.v, "centered tested predictors V")?;
    let proj = q.transpose() * &c.z;
    Ok((proj.norm_squared() / zz).clamp(0.0, 1.0))
}

/// Mixing prior on the g-prior scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GPriorSpec {
    /// Point mass at g.
    FixedG { g: f64 },
    /// Point mass at the sample size (g = n, or g = bᵢ within a subset).
    GEqualsN,
    /// Inverse-gamma(1/2, n/2) mixing density.
    ZellnerSiow,
}

impl GPriorSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GPriorSpec::FixedG { g } if !(g > 0.0 && g.is_finite()) => {
                Err(DpError::invalid(format!("fixed g must be positive, got {g}")))
            }
            _ => Ok(()),
        }
    }
}

/// Penalty ρ of an information criterion `n^{-ρ/2}(1-R²)^{-n/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InfoCriterionSpec {
    Bic,
    Aic,
    Lrt,
    CustomRho { rho: f64 },
}

impl InfoCriterionSpec {
    /// ρ for a model with `p` tested coefficients fitted on `n` rows.
    pub fn rho(&self, n: usize, p: usize) -> f64 {
        match *self {
            InfoCriterionSpec::Bic => p as f64,
            InfoCriterionSpec::Aic => 2.0 * p as f64 / (n as f64).ln(),
            InfoCriterionSpec::Lrt => 0.0,
            InfoCriterionSpec::CustomRho { rho } => rho,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InfoCriterionSpec::CustomRho { rho } if !(rho >= 0.0 && rho.is_finite()) => {
                Err(DpError::invalid(format!("rho must be >= 0, got {rho}")))
            }
            _ => Ok(()),
        }
    }
}

/// The statistic used to compare a model against the null: a Bayes factor
/// under a mixture of g-priors, or an information criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "statistic", rename_all = "snake_case")]
pub enum Statistic {
    BayesFactor { prior: GPriorSpec },
    InfoCriterion { criterion: InfoCriterionSpec },
}

impl Statistic {
    pub fn g_prior(prior: GPriorSpec) -> Self {
        Statistic::BayesFactor { prior }
    }

    pub fn criterion(criterion: InfoCriterionSpec) -> Self {
        Statistic::InfoCriterion { criterion }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Statistic::BayesFactor { prior } => prior.validate(),
            Statistic::InfoCriterion { criterion } => criterion.validate(),
        }
    }

    /// log B₁₀ or log I₁₀ for a model with `p` tested coefficients.
    pub fn log_value(&self, r2: f64, n: usize, p: usize, p0: usize) -> Result<f64> {
        match self {
            Statistic::BayesFactor { prior } => log_bayes_factor(r2, n, p, p0, prior),
            Statistic::InfoCriterion { criterion } => log_info_criterion(r2, n, p, criterion),
        }
    }

    /// Posterior shrinkage factor E[g/(1+g) | data] applied to the least
    /// squares coefficients; 1 for information criteria.
    pub fn shrinkage(&self, r2: f64, n: usize, p: usize, p0: usize) -> Result<f64> {
        match self {
            Statistic::BayesFactor { prior } => match *prior {
                GPriorSpec::FixedG { g } => Ok(g / (1.0 + g)),
                GPriorSpec::GEqualsN => Ok(n as f64 / (1.0 + n as f64)),
                GPriorSpec::ZellnerSiow => zellner_siow_shrinkage(r2, n, p, p0),
            },
            Statistic::InfoCriterion { .. } => Ok(1.0),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Statistic::BayesFactor { prior } => match prior {
                GPriorSpec::FixedG { .. } => "g",
                GPriorSpec::GEqualsN => "g=n",
                GPriorSpec::ZellnerSiow => "zs",
            },
            Statistic::InfoCriterion { criterion } => match criterion {
                InfoCriterionSpec::Bic => "bic",
                InfoCriterionSpec::Aic => "aic",
                InfoCriterionSpec::Lrt => "lrt",
                InfoCriterionSpec::CustomRho { .. } => "rho",
            },
        }
    }
}

fn check_r2(r2: f64) -> Result<()> {
    if !(0.0..1.0).contains(&r2) {
        return Err(DpError::Domain(format!("R^2 must lie in [0, 1), got {r2}")));
    }
    Ok(())
}

fn check_dims(n: usize, p: usize, p0: usize) -> Result<()> {
    if n <= p + p0 {
        return Err(DpError::invalid(format!("need n > p + p0, got n = {n}, p = {p}, p0 = {p0}")));
    }
    Ok(())
}

/// log of (g+1)^{(n-p-p0)/2} [1 + g(1-R²)]^{-(n-p0)/2}.
fn log_fixed_g(r2: f64, n: usize, p: usize, p0: usize, g: f64) -> f64 {
    let a = (n - p - p0) as f64 / 2.0;
    let b = (n - p0) as f64 / 2.0;
    a * g.ln_1p() - b * (g * (1.0 - r2)).ln_1p()
}

/// Log Bayes factor of the model with `p` tested predictors against the null.
pub fn log_bayes_factor(r2: f64, n: usize, p: usize, p0: usize, prior: &GPriorSpec) -> Result<f64> {
    check_r2(r2)?;
    check_dims(n, p, p0)?;
    match *prior {
        GPriorSpec::FixedG { g } => {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(DpError::invalid(format!("fixed g must be >= 0, got {g}")));
            }
            Ok(log_fixed_g(r2, n, p, p0, g))
        }
        GPriorSpec::GEqualsN => Ok(log_fixed_g(r2, n, p, p0, n as f64)),
        GPriorSpec::ZellnerSiow => ZellnerSiow::new(r2, n, p, p0).log_integral(0.0, 1),
    }
}

/// Log information criterion −(ρ/2)·ln n − (n/2)·ln(1−R²).
pub fn log_info_criterion(r2: f64, n: usize, p: usize, spec: &InfoCriterionSpec) -> Result<f64> {
    check_r2(r2)?;
    if n < 2 {
        return Err(DpError::invalid(format!("need n >= 2, got {n}")));
    }
    let rho = spec.rho(n, p);
    Ok(-0.5 * rho * (n as f64).ln() - 0.5 * n as f64 * (-r2).ln_1p())
}

/// E[g/(1+g) | R²] under the Zellner–Siow prior.
pub fn zellner_siow_shrinkage(r2: f64, n: usize, p: usize, p0: usize) -> Result<f64> {
    check_r2(r2)?;
    check_dims(n, p, p0)?;
    let zs = ZellnerSiow::new(r2, n, p, p0);
    let num = zs.log_integral(1.0, 1)?;
    let den = zs.log_integral(0.0, 1)?;
    Ok((num - den).exp().min(1.0))
}

pub(crate) const ZS_REL_TOL: f64 = 1e-8;

/// Zellner–Siow Bayes factor integral written in u = g/(1+g) ∈ (0, 1).
pub(crate) struct ZellnerSiow {
    r2: f64,
    n: f64,
    p: f64,
    p0: f64,
    log_const: f64,
}

impl ZellnerSiow {
    pub(crate) fn new(r2: f64, n: usize, p: usize, p0: usize) -> Self {
        let nf = n as f64;
        // π(g) = (n/2)^{1/2} Γ(1/2)^{-1} g^{-3/2} e^{-n/(2g)}
        let log_const = 0.5 * (nf / 2.0).ln() - ln_gamma(0.5);
        Self { r2, n: nf, p: p as f64, p0: p0 as f64, log_const }
    }

    /// Log of the integrand in u, times u^{u_power}, including the Jacobian.
    fn log_integrand(&self, u: f64, u_power: f64) -> f64 {
        if u <= 0.0 || u >= 1.0 {
            return f64::NEG_INFINITY;
        }
        let ln_u = u.ln();
        let ln_1mu = (-u).ln_1p();
        // (p-1)/2·ln(1-u): likelihood (p/2) minus prior g^{-3/2} in u (+3/2) and Jacobian (-2)
        (self.p - 1.0) / 2.0 * ln_1mu - (self.n - self.p0) / 2.0 * (-u * self.r2).ln_1p() - 1.5 * ln_u
            - self.n * (1.0 - u) / (2.0 * u)
            + self.log_const
            + u_power * ln_u
    }

    fn logit_inv(t: f64) -> f64 {
        1.0 / (1.0 + (-t).exp())
    }

    /// Mode of the integrand on the logit scale, and a width estimate there.
    fn locate_peak(&self, u_power: f64) -> (f64, f64, f64) {
        let h = |t: f64| {
            let u = Self::logit_inv(t);
            self.log_integrand(u, u_power) + u.ln() + (-u).ln_1p()
        };
        let (t_lo, t_hi) = (-40.0, 36.0);
        let steps = 152;
        let dt = (t_hi - t_lo) / steps as f64;
        let mut best_t = t_lo;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=steps {
            let t = t_lo + dt * i as f64;
            let v = h(t);
            if v > best {
                best = v;
                best_t = t;
            }
        }
        // golden-section refinement inside the neighbouring cells
        let (mut a, mut b) = (best_t - dt, best_t + dt);
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - gr * (b - a);
        let mut d = a + gr * (b - a);
        let (mut fc, mut fd) = (h(c), h(d));
        for _ in 0..60 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = h(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = h(d);
            }
        }
        let t_mode = 0.5 * (a + b);
        let peak = h(t_mode).max(best);
        let eps = 1e-3;
        let curv = (h(t_mode + eps) - 2.0 * h(t_mode) + h(t_mode - eps)) / (eps * eps);
        let width = if curv < 0.0 && curv.is_finite() { (1.0 / -curv).sqrt().clamp(1e-6, 10.0) } else { 1.0 };
        let log_peak_u = self.log_integrand(Self::logit_inv(t_mode), u_power);
        (t_mode, width, peak.max(log_peak_u))
    }

    /// log ∫₀¹ u^{u_power} × integrand du. `refine` splits every initial
    /// segment into that many pieces.
    pub(crate) fn log_integral(&self, u_power: f64, refine: usize) -> Result<f64> {
        let (t_mode, width, _) = self.locate_peak(u_power);
        let mut breaks = vec![0.0];
        for k in [-40.0, -12.0, -4.0, -1.5, 0.0, 1.5, 4.0, 12.0, 40.0] {
            let u = Self::logit_inv(t_mode + k * width);
            if u > *breaks.last().unwrap() && u < 1.0 {
                breaks.push(u);
            }
        }
        breaks.push(1.0);
        if refine > 1 {
            let mut fine = Vec::with_capacity((breaks.len() - 1) * refine + 1);
            for w in breaks.windows(2) {
                for j in 0..refine {
                    fine.push(w[0] + (w[1] - w[0]) * j as f64 / refine as f64);
                }
            }
            fine.push(1.0);
            breaks = fine;
        }
        // shift by the largest log-integrand value seen at the breakpoints and mode
        let shift = breaks
            .iter()
            .map(|&u| self.log_integrand(u.clamp(1e-300, 1.0 - 1e-16), u_power))
            .chain(std::iter::once(self.log_integrand(Self::logit_inv(t_mode), u_power)))
            .fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return Err(DpError::numeric("Zellner-Siow integrand vanished on the search grid"));
        }
        let value = integrate(
            |u| (self.log_integrand(u, u_power) - shift).exp(),
            &breaks,
            QuadOptions { rel_tol: ZS_REL_TOL * 0.1, abs_tol: 0.0, max_segments: 4000 },
        )?;
        if !(value > 0.0) {
            return Err(DpError::numeric(format!("Zellner-Siow integral is not positive ({value})")));
        }
        Ok(shift + value.ln())
    }
}
