//! Simulate a panel from known parameters, then decode the hidden states
//! three ways: per-time smoothed marginals, the Viterbi path and sampled
//! (forward-filter backward-sample) trajectories.
//!
//! ```bash
//! cargo run --release --example decode_states
//! ```

use icarhmm::decode::{path_log_prob, sample_trajectory, smoothed_marginals, viterbi};
use icarhmm::graph::NeighborhoodGraph;
use icarhmm::simulate::{draw_truth, simulate_panel, MissingnessRegime, SimulationScenario, TruthSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn agreement(a: &[usize], b: &[usize]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

fn main() -> icarhmm::Result<()> {
    let graph = NeighborhoodGraph::grid(4, 5)?;
    let truth = TruthSpec {
        means: vec![-3.5, -2.0, -0.8],
        self_transition: 0.92,
        sigma_lambda: 0.4,
        sigma_phi: vec![0.5],
        seasonal_amplitude: 0.4,
        peak_month: 5,
        xi: vec![-0.5, -1.0, -1.5],
        beta: vec![-1.0, 0.0, 1.0],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params = draw_truth(&truth, &graph, &mut rng)?;
    let scenario = SimulationScenario {
        params: params.clone(),
        graph,
        n_times: 200,
        start_month: 1,
        missingness: MissingnessRegime::StateDependent,
        blackout: Vec::new(),
        seed: 12,
    };
    let (panel, states) = simulate_panel(&scenario)?;
    println!(
        "{} sites x {} times, {:.1}% missing",
        panel.n_sites(),
        panel.n_times(),
        100.0 * panel.missingness_rate()
    );

    let marginals = smoothed_marginals(&panel, &params)?;
    let modal: Vec<usize> = (0..panel.n_times()).map(|t| marginals.modal(t).0).collect();
    let vit = viterbi(&panel, &params)?;
    println!("per-time modal state matches truth at {:.1}% of times", 100.0 * agreement(&modal, &states.states));
    println!("Viterbi path matches truth at {:.1}% of times", 100.0 * agreement(&vit.states, &states.states));
    println!(
        "log p(path, data): Viterbi {:.2}, truth {:.2}",
        path_log_prob(&panel, &params, &vit)?,
        path_log_prob(&panel, &params, &states)?
    );

    let sampled: Vec<_> = (0..200).map(|_| sample_trajectory(&panel, &params, &mut rng)).collect::<Result<_, _>>()?;
    let t = 100;
    let freq = (0..3).map(|s| sampled.iter().filter(|tr| tr.states[t] == s).count() as f64 / 200.0);
    println!("time {}: smoothed {:.3?}, sampled frequencies {:.3?}", t + 1, marginals.at(t), freq.collect::<Vec<_>>());
    Ok(())
}
