//! Command implementations. Every artifact embeds the resolved config.

use std::path::{Path, PathBuf};

use dpms_core::gram::ChainSummary;
use dpms_core::mechanisms::{subsample_noise_scale, GramNoise};
use dpms_core::null_calibration::NullStatisticKind;
use dpms_core::regions::AcceptanceSet;
use dpms_core::split_aggregate::noise_replicates;
use dpms_core::{
    aggregate_private, build_gram, critical_value, enumerate_posterior, make_split, map_functional, mse_of_fit,
    p_value, per_subset_log_stats, posterior_probability, reparametrize, rng, run_chain, sample_region,
    simulate_null_bf, simulate_null_lrt, synthetic_dataset, EmpiricalNull, EnumerationSettings,
    FunctionalHistogram, GramChain, GramMatrix, InfoCriterionSpec, ModelIndex, ModelPosterior, NullSimConfig,
    PrivacyBudget, RegionConfig, RegionSample, Statistic,
};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::data::{ingest_csv, ColumnSpec, Ingested, RescaleRecord};
use crate::error::{CliError, CliResult};
use crate::sim::generate_sim_dataset;

/// Files written by a command.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
}

/// Output directory writer. CSVs start with a `# dpms config {json}` line.
pub struct Output {
    dir: PathBuf,
    config: Value,
    files: Vec<PathBuf>,
}

impl Output {
    pub fn new(cfg: &RunConfig) -> CliResult<Self> {
        let dir = cfg.out.clone();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let config = serde_json::to_value(cfg).map_err(|e| CliError::Config(e.to_string()))?;
        let mut out = Self { dir, config, files: vec![] };
        let text = toml::to_string(cfg).map_err(|e| CliError::Config(e.to_string()))?;
        out.write_text("config.toml", &text)?;
        Ok(out)
    }

    fn write_text(&mut self, name: &str, text: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io_err = |e: csv::Error| CliError::Numeric(format!("csv encoding failed: {e}"));
        w.write_record(header).map_err(io_err)?;
        for r in rows {
            w.write_record(r).map_err(io_err)?;
        }
        let body = w.into_inner().map_err(|e| CliError::Numeric(e.to_string()))?;
        let mut text = format!("# dpms config {}\n", self.config);
        text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        self.write_text(name, &text)
    }

    pub fn write_json(&mut self, name: &str, mut value: Value) -> CliResult<()> {
        if let Value::Object(map) = &mut value {
            map.insert("config".into(), self.config.clone());
        }
        let text = serde_json::to_string_pretty(&value).expect("json values serialize") + "\n";
        self.write_text(name, &text)
    }

    pub fn finish(self) -> RunReport {
        RunReport { files: self.files }
    }
}

fn f(v: f64) -> String {
    format!("{v}")
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

pub fn run_command(cfg: &RunConfig) -> CliResult<RunReport> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    if let Some(input) = &cfg.input {
        // absolute, so the embedded config reruns from any directory
        cfg.input = Some(std::fs::canonicalize(input).map_err(|e| CliError::io(input, e))?);
    }
    match cfg.command.expect("validated") {
        Command::Test => run_test(&cfg),
        Command::Calibrate => run_calibrate(&cfg),
        Command::Select => run_select(&cfg),
        Command::Region => run_region(&cfg),
        Command::Simulate => run_simulate(&cfg),
    }
}

fn column_spec(cfg: &RunConfig) -> ColumnSpec {
    ColumnSpec {
        response: cfg.response.clone().unwrap_or_default(),
        common: cfg.common.clone(),
        tested: cfg.tested.clone(),
        intercept: cfg.intercept,
    }
}

fn load(cfg: &RunConfig) -> CliResult<Ingested> {
    let path = cfg.input.as_deref().expect("validated");
    let ing = ingest_csv(path, &column_spec(cfg), &RescaleRecord::from_bounds(&cfg.rescale)?)?;
    if ing.dropped > 0 {
        eprintln!("dropped {} rows with missing values", ing.dropped);
    }
    Ok(ing)
}

// ---- test ----

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn run_test(cfg: &RunConfig) -> CliResult<RunReport> {
    let seed = cfg.seed()?;
    let ing = load(cfg)?;
    let data = &ing.data;
    let stat = cfg.statistic();
    let bounds = cfg.bounds()?;
    let budget = cfg.aggregate_budget()?;
    let plan = make_split(data.n(), cfg.m, data.p() + data.p0() + 1, rng::derive_seed(seed, 1))?;
    let per = per_subset_log_stats(data, &plan, &stat)?;
    let mut r = rng::root(rng::derive_seed(seed, 2));
    let res = aggregate_private(&per, &bounds, budget.as_ref(), &mut r)?;
    let (p_h0, p_h1) = res.posterior(cfg.pi0)?;

    let mut out = Output::new(cfg)?;
    let mut record = json!({
        "log_bstar": res.log_bstar,
        "log_bstar_censored": res.log_bstar_censored,
        "p_h0": p_h0,
        "p_h1": p_h1,
        "epsilon": budget.map(|b| b.epsilon()),
        "delta": budget.map(|b| b.delta()),
        "M": cfg.m,
        "L": bounds.lower(),
        "U": bounds.upper(),
        "mechanism": res.noise.mechanism.as_str(),
        "statistic": stat.label(),
        "seed": seed,
    });
    if budget.is_none() {
        record["n"] = json!(data.n());
        record["per_subset_censored"] = json!(res.per_subset_logs);
        record["per_subset_raw"] = json!(per);
    }
    out.write_json("test.json", record)?;

    if !cfg.epsilon_grid.is_empty() && cfg.noise_draws > 0 {
        let mean = res.mean_censored();
        let mut rows = vec![];
        for (k, &eps) in cfg.epsilon_grid.iter().enumerate() {
            let b = PrivacyBudget::new(eps, cfg.delta)?;
            let scale = subsample_noise_scale(&bounds, cfg.m, Some(&b))?;
            let draws = noise_replicates(mean, &scale, cfg.noise_draws, rng::derive_seed(seed, 1000 + k as u64));
            let mut p1: Vec<f64> = draws
                .iter()
                .map(|&l| posterior_probability(l, cfg.pi0).map(|(_, p)| p))
                .collect::<Result<_, _>>()?;
            p1.sort_by(f64::total_cmp);
            rows.push(vec![
                f(eps),
                f(quantile_sorted(&p1, 0.25)),
                f(quantile_sorted(&p1, 0.5)),
                f(quantile_sorted(&p1, 0.75)),
            ]);
        }
        out.write_csv("figure.csv", &["epsilon", "p_h1_q25", "p_h1_median", "p_h1_q75"], &rows)?;
    }
    Ok(out.finish())
}

// ---- calibrate ----

fn run_calibrate(cfg: &RunConfig) -> CliResult<RunReport> {
    let seed = cfg.seed()?;
    let ing = load(cfg)?;
    let data = &ing.data;
    let (p, p0) = (data.p(), data.p0());
    let stat = cfg.statistic();
    let bounds = cfg.bounds()?;
    let budget = cfg.aggregate_budget()?;
    let plan = make_split(data.n(), cfg.m, p + p0 + 1, rng::derive_seed(seed, 1))?;
    let per = per_subset_log_stats(data, &plan, &stat)?;
    let mut r = rng::root(rng::derive_seed(seed, 2));
    let res = aggregate_private(&per, &bounds, budget.as_ref(), &mut r)?;

    let sim = NullSimConfig {
        subset_sizes: plan.sizes(),
        df: cfg.df.unwrap_or(p),
        bounds,
        budget,
        nsim: cfg.nsim,
        seed: rng::derive_seed(seed, 3),
        censor_release: true,
    };
    let is_lrt = matches!(stat, Statistic::InfoCriterion { criterion: InfoCriterionSpec::Lrt });
    let (null_dist, observed): (EmpiricalNull, f64) = if is_lrt {
        (simulate_null_lrt(&sim)?, 2.0 * res.log_bstar_censored)
    } else {
        (simulate_null_bf(&sim, &stat, p, p0)?, res.log_bstar_censored)
    };
    let crit = critical_value(&null_dist, cfg.alpha)?;
    let pv = p_value(&null_dist, observed);

    let mut out = Output::new(cfg)?;
    let rows: Vec<Vec<String>> = null_dist.summary().into_iter().map(|(q, v)| vec![f(q), f(v)]).collect();
    out.write_csv("null_quantiles.csv", &["level", "quantile"], &rows)?;
    out.write_json(
        "calibration.json",
        json!({
            "statistic": stat.label(),
            "scale": if null_dist.kind() == NullStatisticKind::Lrt { "2 log lambda" } else { "log B" },
            "observed": observed,
            "critical_value": crit,
            "reject": observed > crit,
            "p_value": pv,
            "alpha": cfg.alpha,
            "nsim": null_dist.nsim(),
            "M": cfg.m,
            "L": bounds.lower(),
            "U": bounds.upper(),
            "epsilon": budget.map(|b| b.epsilon()),
            "delta": budget.map(|b| b.delta()),
            "seed": seed,
        }),
    )?;
    Ok(out.finish())
}

// ---- select / region ----

struct GramInput {
    gram: GramMatrix,
    names: Vec<String>,
    response: String,
    out_of_box: usize,
}

fn load_gram(cfg: &RunConfig) -> CliResult<GramInput> {
    let ing = load(cfg)?;
    let centered = reparametrize(&ing.data)?;
    let gram = build_gram(&centered)?;
    Ok(GramInput {
        gram,
        names: cfg.tested.clone(),
        response: cfg.response.clone().unwrap_or_default(),
        out_of_box: ing.out_of_box,
    })
}

fn box_warning(noise: &GramNoise, out_of_box: usize) {
    if !noise.is_none() && out_of_box > 0 {
        eprintln!(
            "warning: {out_of_box} values lie outside (-0.5, 0.5); the Gram noise is calibrated for data in that box"
        );
    }
}

fn settings(cfg: &RunConfig, n: usize, p0: usize) -> EnumerationSettings {
    EnumerationSettings { n, p0, statistic: cfg.statistic(), prior_kind: cfg.model_prior }
}

fn private_chain(cfg: &RunConfig, gram: &GramMatrix, seed: u64) -> CliResult<GramChain> {
    let (budget, noise) = cfg.gram_noise(gram.p())?;
    let mut r = rng::root(seed);
    Ok(run_chain(gram, noise, budget, cfg.lambda_pct(), cfg.repair_policy(), &mut r)?)
}

fn posterior_rows(post: &ModelPosterior) -> Vec<Vec<String>> {
    (0..post.posterior.len())
        .map(|i| {
            let m = ModelIndex(i as u32);
            vec![m.bitstring(post.p), i.to_string(), m.size().to_string(), f(post.log_marginals[i]), f(post.posterior[i])]
        })
        .collect()
}

fn run_select(cfg: &RunConfig) -> CliResult<RunReport> {
    let seed = cfg.seed()?;
    let input = load_gram(cfg)?;
    let chain = private_chain(cfg, &input.gram, rng::derive_seed(seed, 5))?;
    box_warning(&chain.noise, input.out_of_box);
    let st = settings(cfg, input.gram.n(), input.gram.p0());
    let post = enumerate_posterior(&chain.g_reg, &st)?;

    let mut out = Output::new(cfg)?;
    out.write_csv("posterior.csv", &["model", "bitmask", "size", "log_marginal", "posterior"], &posterior_rows(&post))?;
    let map = post.map_model();
    out.write_json(
        "summary.json",
        json!({
            "predictors": input.names,
            "inclusion": post.inclusion,
            "beta_avg": post.beta_avg,
            "map_model": map.bitstring(post.p),
            "map_posterior": post.probability(map),
            "clamped_models": post.clamped,
            "statistic": st.statistic.label(),
            "chain": to_json(&chain.summary()),
            "seed": seed,
        }),
    )?;
    if cfg.synthetic_n > 0 {
        let d = synthetic_dataset(&chain.g_reg, cfg.synthetic_n, rng::derive_seed(seed, 6))?;
        let mut header: Vec<&str> = input.names.iter().map(String::as_str).collect();
        header.push(&input.response);
        let rows: Vec<Vec<String>> = d.row_iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect();
        out.write_csv("synthetic.csv", &header, &rows)?;
    }
    Ok(out.finish())
}

struct RegionRun {
    chain: ChainSummary,
    set: AcceptanceSet,
    hist: FunctionalHistogram,
}

fn run_region(cfg: &RunConfig) -> CliResult<RunReport> {
    let seed = cfg.seed()?;
    let input = load_gram(cfg)?;
    let st = settings(cfg, input.gram.n(), input.gram.p0());
    let functional = cfg.functional();
    if cfg.functional_index >= input.gram.p() {
        return Err(CliError::Config(format!(
            "functional_index {} out of range for {} predictors",
            cfg.functional_index,
            input.gram.p()
        )));
    }
    let runs: Vec<RegionRun> = (0..cfg.runs as u64)
        .map(|k| {
            let chain = private_chain(cfg, &input.gram, rng::derive_seed(seed, 100 + k))?;
            if k == 0 {
                box_warning(&chain.noise, input.out_of_box);
            }
            let rc = RegionConfig { alpha: cfg.alpha, nsamples: cfg.nsamples, functional, seed: rng::derive_seed(seed, 200 + k) };
            let region = sample_region(&chain, &rc)?;
            let hist = map_functional(&region, functional, &st)?;
            Ok(RegionRun { chain: chain.summary(), set: region.set, hist })
        })
        .collect::<CliResult<_>>()?;

    let pooled: Vec<f64> = runs.iter().flat_map(|r| r.hist.samples.iter().copied()).collect();
    let rejected: usize = runs.iter().map(|r| r.hist.rejected_non_pd).sum();
    let range = matches!(functional, dpms_core::Functional::InclusionProb(_)).then_some((0.0, 1.0));
    let hist = FunctionalHistogram::from_samples(pooled, range, rejected)?;
    let mean_of_means = runs.iter().map(|r| r.hist.mean).sum::<f64>() / runs.len() as f64;

    let mut out = Output::new(cfg)?;
    let rows: Vec<Vec<String>> = hist
        .counts
        .iter()
        .enumerate()
        .map(|(i, c)| vec![f(hist.bin_edges[i]), f(hist.bin_edges[i + 1]), c.to_string()])
        .collect();
    out.write_csv("histogram.csv", &["bin_edge_lo", "bin_edge_hi", "count"], &rows)?;
    let run_rows: Vec<Vec<String>> = runs
        .iter()
        .enumerate()
        .map(|(k, r)| vec![k.to_string(), f(r.hist.mean), r.hist.accepted.to_string(), r.hist.rejected_non_pd.to_string()])
        .collect();
    out.write_csv("runs.csv", &["run", "mean", "accepted", "rejected_non_pd"], &run_rows)?;
    out.write_json(
        "region.json",
        json!({
            "functional": functional.label(),
            "alpha": cfg.alpha,
            "mean": mean_of_means,
            "accepted": hist.accepted,
            "rejected_non_pd": hist.rejected_non_pd,
            "runs": runs.len(),
            "acceptance_set": to_json(&runs[0].set),
            "chain": to_json(&runs[0].chain),
            "seed": seed,
        }),
    )?;
    Ok(out.finish())
}

// ---- simulate ----

/// Estimates from one posterior (or an average over a region).
#[derive(Debug, Clone)]
pub struct Estimate {
    pub beta: DVector<f64>,
    pub inclusion: Vec<f64>,
    /// Least-squares fit of the full model from the same Gram matrix.
    pub beta_full: DVector<f64>,
}

fn full_model_beta(g: &DMatrix<f64>) -> CliResult<DVector<f64>> {
    let p = g.nrows() - 1;
    let gvv = g.view((0, 0), (p, p)).into_owned();
    let gvz = g.view((0, p), (p, 1)).column(0).into_owned();
    gvv.cholesky()
        .map(|c| c.solve(&gvz))
        .ok_or_else(|| CliError::Numeric("predictor block of the Gram matrix is not positive definite".into()))
}

pub fn point_estimate(g: &DMatrix<f64>, st: &EnumerationSettings) -> CliResult<Estimate> {
    let post = enumerate_posterior(g, st)?;
    Ok(Estimate { beta: DVector::from_vec(post.beta_avg), inclusion: post.inclusion, beta_full: full_model_beta(g)? })
}

/// Average of the model-averaged coefficients and inclusion probabilities
/// over the candidates of a region.
pub fn region_estimate(region: &RegionSample, st: &EnumerationSettings) -> CliResult<Estimate> {
    let parts: Vec<Estimate> = region
        .candidates
        .par_iter()
        .map(|g| point_estimate(g, st))
        .collect::<CliResult<_>>()?;
    let k = parts.len() as f64;
    let p = parts[0].inclusion.len();
    let mut est = Estimate { beta: DVector::zeros(p), inclusion: vec![0.0; p], beta_full: DVector::zeros(p) };
    for e in &parts {
        est.beta += &e.beta / k;
        est.beta_full += &e.beta_full / k;
        for (a, b) in est.inclusion.iter_mut().zip(&e.inclusion) {
            *a += b / k;
        }
    }
    Ok(est)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicationRow {
    pub dataset: usize,
    pub epsilon: Option<f64>,
    pub method: String,
    pub mse: f64,
    pub rel_mse: f64,
    pub inclusion_distance: f64,
}

fn inclusion_distance(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    s.sqrt() / (a.len() as f64).sqrt()
}

fn score(ds: usize, eps: Option<f64>, method: &str, est: &Estimate, oracle_incl: &[f64], vb: &DVector<f64>, v: &DMatrix<f64>) -> CliResult<ReplicationRow> {
    let mse = mse_of_fit(vb, v, &est.beta)?;
    let mse_full = mse_of_fit(vb, v, &est.beta_full)?;
    Ok(ReplicationRow {
        dataset: ds,
        epsilon: eps,
        method: method.to_string(),
        mse,
        rel_mse: (mse_full - mse) / mse_full,
        inclusion_distance: inclusion_distance(&est.inclusion, oracle_incl),
    })
}

/// All method rows for one simulated dataset.
pub fn simulate_dataset(cfg: &RunConfig, d: usize) -> CliResult<(Vec<ReplicationRow>, usize)> {
    let sim = cfg.simulate.as_ref().expect("validated");
    let seed = cfg.seed()?;
    let ds = generate_sim_dataset(sim, &mut rng::stream(sim.seed, d as u64))?;
    let c = reparametrize(&ds.data)?;
    let gram = build_gram(&c)?;
    let vb = &c.v * &ds.beta;
    let st = settings(cfg, gram.n(), gram.p0());
    let oracle = point_estimate(gram.matrix(), &st)?;
    let mut rows = vec![score(d, None, "oracle", &oracle, &oracle.inclusion, &vb, &c.v)?];

    let sens = cfg.sensitivity(sim.p);
    let ds_seed = rng::derive_seed(seed, 10_000 + d as u64);
    for (k, &eps) in cfg.sim_epsilons.iter().enumerate() {
        let arms = [("LM", PrivacyBudget::new(eps, 0.0)?), ("WM", PrivacyBudget::new(eps, cfg.sim_delta)?)];
        for (a, (name, budget)) in arms.iter().enumerate() {
            let noise = dpms_core::gram_noise_for(sim.p, Some(budget), &sens)?;
            let stream = (k * 2 + a) as u64;
            let mut r = rng::stream(ds_seed, stream);
            let chain = run_chain(&gram, noise, Some(*budget), cfg.lambda_pct(), cfg.repair_policy(), &mut r)?;
            let est = point_estimate(&chain.g_reg, &st)?;
            rows.push(score(d, Some(eps), name, &est, &oracle.inclusion, &vb, &c.v)?);
            if cfg.sim_region_samples > 0 {
                let rc = RegionConfig {
                    alpha: cfg.alpha,
                    nsamples: cfg.sim_region_samples,
                    functional: dpms_core::Functional::InclusionProb(0),
                    seed: rng::derive_seed(ds_seed, 100 + stream),
                };
                let region = sample_region(&chain, &rc)?;
                let est = region_estimate(&region, &st)?;
                rows.push(score(d, Some(eps), &format!("h{name}"), &est, &oracle.inclusion, &vb, &c.v)?);
            }
        }
    }
    Ok((rows, ds.out_of_box))
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub epsilon: Option<f64>,
    pub method: String,
    pub mean_mse: f64,
    pub mean_rel_mse: f64,
    pub mean_inclusion_distance: f64,
    pub replications: usize,
}

pub fn summarize(rows: &[ReplicationRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Option<f64>, String)> = vec![];
    for r in rows {
        let key = (r.epsilon, r.method.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(eps, method)| {
            let sel: Vec<&ReplicationRow> = rows.iter().filter(|r| r.epsilon == eps && r.method == method).collect();
            let k = sel.len() as f64;
            SummaryRow {
                epsilon: eps,
                mean_mse: sel.iter().map(|r| r.mse).sum::<f64>() / k,
                mean_rel_mse: sel.iter().map(|r| r.rel_mse).sum::<f64>() / k,
                mean_inclusion_distance: sel.iter().map(|r| r.inclusion_distance).sum::<f64>() / k,
                replications: sel.len(),
                method,
            }
        })
        .collect()
}

fn eps_cell(e: Option<f64>) -> String {
    e.map(f).unwrap_or_else(|| "none".into())
}

fn run_simulate(cfg: &RunConfig) -> CliResult<RunReport> {
    let sim = cfg.simulate.as_ref().expect("validated");
    let per: Vec<(Vec<ReplicationRow>, usize)> =
        (0..sim.n_datasets).into_par_iter().map(|d| simulate_dataset(cfg, d)).collect::<CliResult<_>>()?;
    let out_of_box: usize = per.iter().map(|(_, o)| o).sum();
    let rows: Vec<ReplicationRow> = per.into_iter().flat_map(|(r, _)| r).collect();
    let summary = summarize(&rows);
    let oracle_mse = summary.iter().find(|s| s.method == "oracle").map(|s| s.mean_mse).unwrap_or(f64::NAN);
    let checks: Vec<Value> = summary
        .iter()
        .filter(|s| s.method != "oracle")
        .map(|s| {
            let holds = oracle_mse <= s.mean_mse;
            if !holds {
                eprintln!("note: oracle MSE exceeds {} at epsilon {}", s.method, eps_cell(s.epsilon));
            }
            json!({ "epsilon": s.epsilon, "method": s.method, "oracle_mse_le_method": holds })
        })
        .collect();
    if out_of_box > 0 {
        eprintln!("note: {out_of_box} simulated responses fell outside (-0.5, 0.5)");
    }

    let mut out = Output::new(cfg)?;
    let rep_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![r.dataset.to_string(), eps_cell(r.epsilon), r.method.clone(), f(r.mse), f(r.rel_mse), f(r.inclusion_distance)]
        })
        .collect();
    out.write_csv("replications.csv", &["dataset", "epsilon", "method", "mse", "rel_mse", "inclusion_distance"], &rep_rows)?;
    let sum_rows: Vec<Vec<String>> = summary
        .iter()
        .map(|s| {
            vec![
                eps_cell(s.epsilon),
                s.method.clone(),
                f(s.mean_mse),
                f(s.mean_rel_mse),
                f(s.mean_inclusion_distance),
                s.replications.to_string(),
            ]
        })
        .collect();
    out.write_csv(
        "summary.csv",
        &["epsilon", "method", "mean_mse", "mean_rel_mse", "mean_inclusion_distance", "replications"],
        &sum_rows,
    )?;
    out.write_json(
        "simulate.json",
        json!({ "checks": checks, "responses_out_of_box": out_of_box, "summary": to_json(&summary) }),
    )?;
    Ok(out.finish())
}

/// Writes `error.json` into the output directory, best effort.
pub fn write_error_record(out: &Path, err: &CliError) {
    if std::fs::create_dir_all(out).is_ok() {
        let text = serde_json::to_string_pretty(&err.record()).expect("record serializes") + "\n";
        let _ = std::fs::write(out.join("error.json"), text);
    }
}
