//! Drive every subcommand from a configuration, as the command-line tool
//! does: simulate, fit, decode, predict, changepoint and report.
//!
//! Artifacts land in a directory under the system temp dir.
//!
//! ```bash
//! cargo run --release --example run_pipeline
//! ```

use icarhmm::io::config::RawConfig;
use icarhmm::pipeline;

const CONFIG: &str = "
panel = data/panel.csv
edges = data/edges.csv
out_dir = out
n_states = 3
sim_grid = 3x4
sim_n_times = 120
n_chains = 2
n_warmup = 300
n_draws = 300
pilot_iters = 300
post_draws = 200
changepoint_iter = 300
changepoint_burnin = 100
";

fn main() -> icarhmm::Result<()> {
    let root = std::env::temp_dir().join("icarhmm-pipeline-example");
    let mut raw = RawConfig::parse(CONFIG, &root)?;
    raw.set("seed=3")?;
    let cfg = raw.into_run_config()?;

    let steps: [(&str, fn(&icarhmm::io::config::RunConfig) -> icarhmm::Result<Vec<std::path::PathBuf>>); 6] = [
        ("simulate", pipeline::simulate),
        ("fit", pipeline::fit),
        ("decode", pipeline::decode),
        ("predict", pipeline::predict),
        ("changepoint", pipeline::changepoint),
        ("report", pipeline::report),
    ];
    for (name, step) in steps {
        let written = step(&cfg)?;
        println!("{name}: {} files", written.len());
    }
    let dry = pipeline::dry_run(&cfg)?;
    println!("one log-density evaluation takes {:?} for {} parameters", dry.eval_time, dry.dim);
    let report = std::fs::read_to_string(cfg.out_dir.join("report.md")).map_err(|e| icarhmm::Error::Io { path: cfg.out_dir.clone(), source: e })?;
    println!("{}", report.lines().take(8).collect::<Vec<_>>().join("\n"));
    println!("artifacts in {}", cfg.out_dir.display());
    Ok(())
}
