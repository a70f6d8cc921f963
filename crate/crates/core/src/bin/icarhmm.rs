use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use icarhmm::io::config::RunConfig;
use icarhmm::{pipeline, Result};

#[derive(Parser)]
#[command(name = "icarhmm", version, about = "Spatial hidden Markov models for binary site-by-time panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (`key = value` lines).
    #[arg(short, long)]
    config: PathBuf,
    /// Override a configuration key, e.g. `--set n_draws=2000`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the posterior; write draws and diagnostics.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Validate inputs and time one log-density evaluation instead of sampling.
        #[arg(long)]
        dry_run: bool,
    },
    /// Simulate a panel and edge list from the configured truth.
    Simulate(Common),
    /// Modal, Viterbi and sampled state trajectories from a finished fit.
    Decode(Common),
    /// Predictive series, state maps, missingness curves and summary tables.
    Predict(Common),
    /// Locate the regime change in the sampled trajectories.
    Changepoint(Common),
    /// Held-out predictive comparison of model variants.
    Elpd(Common),
    /// Markdown summary of the output directory.
    Report(Common),
}

fn run(cli: Cli) -> Result<()> {
    let load = |c: &Common| RunConfig::load(&c.config, &c.overrides);
    let written = match cli.command {
        Command::Fit { common, dry_run: true } => {
            let d = pipeline::dry_run(&load(&common)?)?;
            println!(
                "sites={} times={} dim={} missing={:.4} missing_after_first={:.4} log_density={:.6e} grad_norm={:.6e} eval_seconds={:.6}",
                d.n_sites,
                d.n_times,
                d.dim,
                d.missingness_rate,
                d.missingness_after_first_obs,
                d.log_density,
                d.grad_norm,
                d.eval_time.as_secs_f64()
            );
            return Ok(());
        }
        Command::Fit { common, dry_run: false } => pipeline::fit(&load(&common)?)?,
        Command::Simulate(c) => pipeline::simulate(&load(&c)?)?,
        Command::Decode(c) => pipeline::decode(&load(&c)?)?,
        Command::Predict(c) => pipeline::predict(&load(&c)?)?,
        Command::Changepoint(c) => pipeline::changepoint(&load(&c)?)?,
        Command::Elpd(c) => pipeline::elpd(&load(&c)?)?,
        Command::Report(c) => pipeline::report(&load(&c)?)?,
    };
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error: code={} message={message}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
