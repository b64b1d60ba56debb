use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tci_cli::commands;
use tci_cli::config::Settings;
use tci_cli::error::{CliError, CliResult};

/// Trade-credit claim risk: network features, GLMM fitting, posterior scoring.
#[derive(Parser)]
#[command(name = "tci", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Dataset directory.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Flat key = value settings file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Fitted model file (repeat for `evaluate`).
    #[arg(long, global = true)]
    model: Vec<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// unit, inverse-buyer-count or insured-amount.
    #[arg(long, global = true)]
    weight_scheme: Option<String>,
    #[arg(long, global = true)]
    iterations: Option<usize>,
    #[arg(long, global = true)]
    mh_steps: Option<usize>,
    /// Retained sub-iterations, e.g. 15,20.
    #[arg(long, global = true)]
    retain: Option<String>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Posterior draws used for scoring.
    #[arg(long, global = true)]
    pred_draws: Option<usize>,
    /// Evaluation date (YYYY-MM-DD).
    #[arg(long, global = true)]
    tau: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a portfolio with known parameters.
    Generate,
    /// Write the covariates and centrality features of every connection.
    Featurize,
    /// Estimate the model by stochastic EM.
    Fit,
    /// Score connections with posterior claim probabilities.
    Predict {
        /// Only connections whose policy starts after the training evaluation date.
        #[arg(long)]
        held_out: bool,
    },
    /// Print the expected number of unreported claims.
    Reserve {
        /// Only connections whose policy starts after the training evaluation date.
        #[arg(long)]
        held_out: bool,
    },
    /// Absolute deviances and reserves against the ground truth.
    Evaluate {
        /// Ground-truth file; defaults to truth.csv in the dataset directory.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Only connections whose policy starts after the training evaluation date.
        #[arg(long)]
        held_out: bool,
    },
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a PathBuf> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("--{flag} is required")))
}

fn one_model(models: &[PathBuf]) -> CliResult<&PathBuf> {
    match models {
        [m] => Ok(m),
        [] => Err(CliError::Config("--model is required".into())),
        _ => Err(CliError::Config("this command takes a single --model".into())),
    }
}

fn run(cli: Cli) -> CliResult<String> {
    let c = cli.common;
    let mut s = Settings::load(c.config.as_deref())?;
    s.set("seed", c.seed.map(|v| v.to_string()));
    s.set("threads", c.threads.map(|v| v.to_string()));
    s.set("weight_scheme", c.weight_scheme);
    s.set("iterations", c.iterations.map(|v| v.to_string()));
    s.set("mh_steps", c.mh_steps.map(|v| v.to_string()));
    s.set("retain", c.retain);
    s.set("lambda", c.lambda.map(|v| v.to_string()));
    s.set("pred_draws", c.pred_draws.map(|v| v.to_string()));
    s.set("tau", c.tau);
    if let Some(n) = s.threads()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Generate => commands::generate(&s, required(&c.out, "out")?),
        Command::Featurize => {
            commands::featurize(&s, required(&c.data, "data")?, required(&c.out, "out")?)?;
            Ok(String::new())
        }
        Command::Fit => commands::fit_model(&s, required(&c.data, "data")?, required(&c.out, "out")?),
        Command::Predict { held_out } => commands::predict(
            &s,
            one_model(&c.model)?,
            required(&c.data, "data")?,
            required(&c.out, "out")?,
            held_out,
        ),
        Command::Reserve { held_out } => {
            commands::reserve_summary(&s, one_model(&c.model)?, required(&c.data, "data")?, held_out)
        }
        Command::Evaluate { truth, held_out } => {
            let text = commands::evaluate(&s, &c.model, required(&c.data, "data")?, truth.as_deref(), held_out)?;
            if let Some(out) = &c.out {
                std::fs::write(out, &text).map_err(|e| CliError::io(out, e))?;
            }
            Ok(text)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
