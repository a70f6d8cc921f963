//! Fit the model to a simulated panel and compute the posterior summaries:
//! parameter recovery, modal states, the predictive proportion series, the
//! seasonal term and the per-state table.
//!
//! Uses short chains so it finishes in well under a minute in release mode.
//!
//! ```bash
//! cargo run --release --example fit_and_predict
//! ```

use icarhmm::decode::map_state_sequence;
use icarhmm::graph::NeighborhoodGraph;
use icarhmm::io::config::InitStrategy;
use icarhmm::params::ModelSpec;
use icarhmm::pipeline::{fit_model, sample_trajectories, FitSettings};
use icarhmm::predict::{predictive_proportion, seasonal_summary, state_summary_table};
use icarhmm::sampler::SamplerConfig;
use icarhmm::simulate::{draw_truth, simulate_panel, MissingnessRegime, SimulationScenario, TruthSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> icarhmm::Result<()> {
    let graph = NeighborhoodGraph::grid(3, 4)?;
    let truth = TruthSpec {
        means: vec![-4.5, -1.5],
        self_transition: 0.9,
        sigma_lambda: 0.5,
        sigma_phi: vec![0.5, 0.5],
        seasonal_amplitude: 0.6,
        peak_month: 5,
        xi: vec![-0.5, -1.5],
        beta: vec![-1.0, 1.0],
    };
    let params = draw_truth(&truth, &graph, &mut ChaCha8Rng::seed_from_u64(5))?;
    let scenario = SimulationScenario {
        params: params.clone(),
        graph: graph.clone(),
        n_times: 150,
        start_month: 1,
        missingness: MissingnessRegime::StateDependent,
        blackout: Vec::new(),
        seed: 6,
    };
    let (panel, states) = simulate_panel(&scenario)?;

    let settings = FitSettings {
        sampler: SamplerConfig { n_chains: 2, n_warmup: 400, n_draws: 400, seed: 1, ..Default::default() },
        init: InitStrategy::Pilot,
        pilot_iters: 300,
        pilot_starts: 4,
    };
    let fit = fit_model(panel.clone(), graph, ModelSpec::new(2, panel.n_sites()), &settings)?;
    println!("divergences: {}", fit.draws.total_divergences());

    let truth_values = params.named_values();
    println!("param          truth      mean    q2.5   q97.5   R-hat");
    for row in fit.summary().iter().filter(|r| r.param.starts_with(['m', 'x', 'b']) || r.param.starts_with("A[")) {
        let t = truth_values.iter().find(|(k, _)| *k == row.param).map_or(f64::NAN, |(_, v)| *v);
        println!(
            "{:<12} {:>7.3} {:>9.3} {:>7.3} {:>7.3} {:>7.3}",
            row.param,
            t,
            row.mean,
            row.q025,
            row.q975,
            row.rhat.unwrap_or(f64::NAN)
        );
    }

    let draws = fit.thinned(200);
    let modal = map_state_sequence(&draws, &panel)?;
    let hits = modal.states.iter().zip(&states.states).filter(|(a, b)| a == b).count();
    println!("modal state matches truth at {hits} of {} times", panel.n_times());

    let sampled = sample_trajectories(&draws, &panel, 9)?;
    let series = predictive_proportion(&draws, &panel, &sampled, 1, 9)?;
    for t in [0, 50, 100, 149] {
        let p = &series.predicted[t];
        let obs = series.observed[t].map_or("NA".into(), |v| format!("{v:.3}"));
        println!("time {:>3}: observed {obs}, predictive {:.3} [{:.3}, {:.3}]", t + 1, p.mean, p.lower, p.upper);
    }

    let seasonal = seasonal_summary(&draws);
    let peak = seasonal.iter().max_by(|a, b| a.mean.total_cmp(&b.mean)).map(|r| r.month);
    println!("seasonal peak month: {peak:?} (truth 5)");

    for row in state_summary_table(&draws, &modal.trajectory(), &panel)? {
        println!(
            "state {}: {} times, observed outcome {:?}, model {:?}",
            row.state + 1,
            row.n_times,
            row.observed_outcome.map(|v| (v * 1000.0).round() / 1000.0),
            row.model_outcome.map(|i| (i.mean * 1000.0).round() / 1000.0)
        );
    }
    Ok(())
}
