#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};
use dpms_cli::{run_command, write_error_record, CliError, Command, MechanismChoice, Overrides, PriorChoice, RunConfig};

/// Differentially private tests and model selection for linear models.
#[derive(Parser, Debug)]
#[command(name = "dpms", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args, Debug)]
struct Flags {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Number of subsets.
    #[arg(long = "M")]
    m: Option<usize>,
    /// Lower censoring bound.
    #[arg(long = "L", allow_hyphen_values = true)]
    lower: Option<f64>,
    /// Upper censoring bound.
    #[arg(long = "U", allow_hyphen_values = true)]
    upper: Option<f64>,
    #[arg(long, value_enum)]
    prior: Option<PriorChoice>,
    #[arg(long, value_enum)]
    mechanism: Option<MechanismChoice>,
    /// Thresholding percentile (0 disables).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    nsim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            epsilon: self.epsilon,
            delta: self.delta,
            m: self.m,
            lower: self.lower,
            upper: self.upper,
            prior: self.prior,
            mechanism: self.mechanism,
            lambda: self.lambda,
            alpha: self.alpha,
            nsim: self.nsim,
            seed: self.seed,
            out: self.out.clone(),
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.command = Some(cli.command);
    cfg.apply(&cli.flags.overrides());
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cfg = resolve(&cli);
    let out = cfg.as_ref().map(|c| c.out.clone()).unwrap_or_else(|_| cli.flags.out.clone().unwrap_or_else(|| "dpms-out".into()));
    match cfg.and_then(|c| run_command(&c)) {
        Ok(report) => {
            for f in report.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            write_error_record(&out, &e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
