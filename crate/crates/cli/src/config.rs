//! Run configuration: a TOML file plus command-line overrides (flags win).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dpms_core::gram::{unit_box_sensitivity, RepairPolicy, DEFAULT_LAMBDA_PCT};
use dpms_core::mechanisms::{GramNoise, Sensitivity};
use dpms_core::model_space::ModelPriorKind;
use dpms_core::null_calibration::DEFAULT_NSIM;
use dpms_core::regions::{Functional, DEFAULT_NSAMPLES};
use dpms_core::{gram_noise_for, CensorBounds, GPriorSpec, InfoCriterionSpec, PrivacyBudget, Statistic};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::sim::SimStudyConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Test,
    Select,
    Calibrate,
    Region,
    Simulate,
}

/// Statistic selector: g-prior (fixed g, or g = n when `g` is unset),
/// Zellner–Siow, or an information criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PriorChoice {
    G,
    Zs,
    Bic,
    Aic,
    Lrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MechanismChoice {
    Laplace,
    Gaussian,
    Wishart,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionalKind {
    Inclusion,
    Beta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub input: Option<PathBuf>,
    pub response: Option<String>,
    /// Common predictors kept under both hypotheses (besides the intercept).
    pub common: Vec<String>,
    /// Predictors under test (or the candidate predictors for `select`).
    pub tested: Vec<String>,
    pub intercept: bool,
    /// Declared per-column bounds mapped affinely onto (−0.5, 0.5).
    pub rescale: BTreeMap<String, [f64; 2]>,
    /// Unset (or `inf`) disables noise (non-private diagnostics).
    pub epsilon: Option<f64>,
    pub delta: f64,
    pub mechanism: Option<MechanismChoice>,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub lower: Option<f64>,
    #[serde(rename = "U")]
    pub upper: Option<f64>,
    pub prior: PriorChoice,
    /// Fixed g for `prior = "g"`; unset means g = n (g = bᵢ per subset).
    pub g: Option<f64>,
    pub pi0: f64,
    /// Thresholding percentile; 0 disables thresholding.
    pub lambda: f64,
    /// Fixed ridge r; unset selects the automatic policy.
    pub repair_r: Option<f64>,
    pub model_prior: ModelPriorKind,
    /// Entry bound Δ₁ of the (rescaled) data.
    pub entry_bound: f64,
    /// Row-norm bound Δ₂; unset means Δ₁·√(p+1).
    pub row_bound: Option<f64>,
    pub alpha: f64,
    pub nsim: usize,
    /// Degrees of freedom for `calibrate` with the LRT; unset means the
    /// number of tested predictors.
    pub df: Option<usize>,
    pub nsamples: usize,
    pub functional: FunctionalKind,
    pub functional_index: usize,
    /// Independent mechanism reruns for `region`.
    pub runs: usize,
    /// Rows of the synthetic dataset exported by `select` (0: none).
    pub synthetic_n: usize,
    /// ε grid for the noise-quartile series of `test`.
    pub epsilon_grid: Vec<f64>,
    /// Noise draws per grid point.
    pub noise_draws: usize,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub simulate: Option<SimStudyConfig>,
    /// ε values for `simulate`.
    pub sim_epsilons: Vec<f64>,
    /// δ used by the Wishart arm of `simulate`.
    pub sim_delta: f64,
    /// Region candidates per histogram method in `simulate` (0: skip them).
    pub sim_region_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            input: None,
            response: None,
            common: vec![],
            tested: vec![],
            intercept: true,
            rescale: BTreeMap::new(),
            epsilon: None,
            delta: 0.0,
            mechanism: None,
            m: 1,
            lower: None,
            upper: None,
            prior: PriorChoice::G,
            g: None,
            pi0: 0.5,
            lambda: DEFAULT_LAMBDA_PCT,
            repair_r: None,
            model_prior: ModelPriorKind::HierarchicalUniform,
            entry_bound: 0.5,
            row_bound: None,
            alpha: 0.05,
            nsim: DEFAULT_NSIM,
            df: None,
            nsamples: DEFAULT_NSAMPLES,
            functional: FunctionalKind::Inclusion,
            functional_index: 0,
            runs: 1,
            synthetic_n: 0,
            epsilon_grid: vec![],
            noise_draws: 0,
            seed: None,
            out: PathBuf::from("dpms-out"),
            simulate: None,
            sim_epsilons: vec![0.1, 1.0],
            sim_delta: (-10f64).exp(),
            sim_region_samples: 0,
        }
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub m: Option<usize>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub prior: Option<PriorChoice>,
    pub mechanism: Option<MechanismChoice>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub nsim: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    /// Reads a config file; relative `input` paths resolve against the file's
    /// directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(input), Some(dir)) = (&cfg.input, path.parent()) {
            if input.is_relative() {
                cfg.input = Some(dir.join(input));
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = o.$field.clone() { self.$field = v.into(); } )* };
        }
        set!(delta, m, prior, lambda, alpha, nsim, out);
        if o.epsilon.is_some() {
            self.epsilon = o.epsilon;
        }
        if o.lower.is_some() {
            self.lower = o.lower;
        }
        if o.upper.is_some() {
            self.upper = o.upper;
        }
        if o.mechanism.is_some() {
            self.mechanism = o.mechanism;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.seed.ok_or_else(|| CliError::Config("a seed is required (--seed or `seed` in the config)".into()))
    }

    pub fn validate(&self) -> CliResult<()> {
        let cmd = self.command.ok_or_else(|| CliError::Config("no command given".into()))?;
        self.seed()?;
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return bad(format!("epsilon must be positive, got {e}"));
            }
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return bad(format!("delta must lie in [0, 1], got {}", self.delta));
        }
        if self.m == 0 {
            return bad("M must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.pi0) {
            return bad(format!("pi0 must lie in [0, 1], got {}", self.pi0));
        }
        if !(0.0..100.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 100), got {}", self.lambda));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.nsim == 0 {
            return bad("nsim must be at least 1".into());
        }
        if !(self.entry_bound > 0.0) {
            return bad("entry_bound must be positive".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if let Some(g) = self.g {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("g must be positive, got {g}"));
            }
        }
        self.bounds()?;
        match cmd {
            Command::Simulate => {
                let sim = self.simulate.as_ref().ok_or_else(|| CliError::Config("`simulate` needs a [simulate] table".into()))?;
                sim.validate()?;
                if self.sim_epsilons.iter().any(|e| !(*e > 0.0)) {
                    return bad("sim_epsilons must be positive".into());
                }
            }
            _ => {
                if self.input.is_none() {
                    return bad("an input CSV is required".into());
                }
                if self.response.is_none() {
                    return bad("a response column is required".into());
                }
                if self.tested.is_empty() {
                    return bad("at least one tested predictor is required".into());
                }
            }
        }
        Ok(())
    }

    /// Censoring bounds; defaults censor posterior probabilities at 0.01/0.99.
    pub fn bounds(&self) -> CliResult<CensorBounds> {
        let d = CensorBounds::posterior_probability_default();
        Ok(CensorBounds::new(self.lower.unwrap_or(d.lower()), self.upper.unwrap_or(d.upper()))?)
    }

    pub fn statistic(&self) -> Statistic {
        match self.prior {
            PriorChoice::G => Statistic::g_prior(match self.g {
                Some(g) => GPriorSpec::FixedG { g },
                None => GPriorSpec::GEqualsN,
            }),
            PriorChoice::Zs => Statistic::g_prior(GPriorSpec::ZellnerSiow),
            PriorChoice::Bic => Statistic::criterion(InfoCriterionSpec::Bic),
            PriorChoice::Aic => Statistic::criterion(InfoCriterionSpec::Aic),
            PriorChoice::Lrt => Statistic::criterion(InfoCriterionSpec::Lrt),
        }
    }

    /// Budget for the subsample-and-aggregate release; `None` when noise is off.
    pub fn aggregate_budget(&self) -> CliResult<Option<PrivacyBudget>> {
        let mech = self.mechanism;
        if mech == Some(MechanismChoice::None) || self.noise_off_limit() {
            return Ok(None);
        }
        let Some(eps) = self.epsilon else {
            if mech.is_some() {
                return Err(CliError::Config("a mechanism was selected but epsilon is unset".into()));
            }
            return Ok(None);
        };
        match mech {
            Some(MechanismChoice::Laplace) if self.delta != 0.0 => {
                Err(CliError::Config("the Laplace mechanism needs delta = 0".into()))
            }
            Some(MechanismChoice::Gaussian) if self.delta == 0.0 => {
                Err(CliError::Config("the Gaussian mechanism needs delta > 0".into()))
            }
            Some(MechanismChoice::Wishart) => {
                Err(CliError::Config("the Wishart mechanism applies to `select` and `region` only".into()))
            }
            _ => Ok(Some(PrivacyBudget::new(eps, self.delta)?)),
        }
    }

    /// Budget and noise law for the Gram release.
    pub fn gram_noise(&self, p: usize) -> CliResult<(Option<PrivacyBudget>, GramNoise)> {
        if self.mechanism == Some(MechanismChoice::None) || self.noise_off_limit() {
            return Ok((None, GramNoise::None));
        }
        let Some(eps) = self.epsilon else {
            if self.mechanism.is_some() {
                return Err(CliError::Config("a mechanism was selected but epsilon is unset".into()));
            }
            return Ok((None, GramNoise::None));
        };
        match self.mechanism {
            Some(MechanismChoice::Gaussian) => {
                return Err(CliError::Config("the Gram release supports laplace or wishart, not gaussian".into()))
            }
            Some(MechanismChoice::Laplace) if self.delta != 0.0 => {
                return Err(CliError::Config("the Laplace mechanism needs delta = 0".into()))
            }
            Some(MechanismChoice::Wishart) if self.delta == 0.0 => {
                return Err(CliError::Config("the Wishart mechanism needs delta > 0".into()))
            }
            _ => {}
        }
        let budget = PrivacyBudget::new(eps, self.delta)?;
        let noise = gram_noise_for(p, Some(&budget), &self.sensitivity(p))?;
        Ok((Some(budget), noise))
    }

    /// ε = ∞ is the zero-noise limit.
    fn noise_off_limit(&self) -> bool {
        self.epsilon == Some(f64::INFINITY)
    }

    pub fn sensitivity(&self, p: usize) -> Sensitivity {
        let base = unit_box_sensitivity(p);
        let scale = self.entry_bound / base.l1;
        Sensitivity { l1: self.entry_bound, l2: self.row_bound.unwrap_or(base.l2 * scale) }
    }

    pub fn lambda_pct(&self) -> Option<f64> {
        (self.lambda > 0.0).then_some(self.lambda)
    }

    pub fn repair_policy(&self) -> RepairPolicy {
        match self.repair_r {
            Some(r) => RepairPolicy::FixedR { r },
            None => RepairPolicy::Auto,
        }
    }

    pub fn functional(&self) -> Functional {
        match self.functional {
            FunctionalKind::Inclusion => Functional::InclusionProb(self.functional_index),
            FunctionalKind::Beta => Functional::PosteriorMeanBeta(self.functional_index),
        }
    }

    pub fn mechanism_label(&self, budget: Option<&PrivacyBudget>) -> &'static str {
        match budget {
            None => "none",
            Some(b) if b.is_pure() => "laplace",
            Some(_) => "gaussian",
        }
    }
}
