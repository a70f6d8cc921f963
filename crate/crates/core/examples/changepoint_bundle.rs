//! Locate a regime change in a bundle of categorical trajectories.
//!
//! Trajectories switch from one categorical regime to another at a common
//! time; the two-state left-to-right model recovers the time and both
//! emission rows.
//!
//! ```bash
//! cargo run --release --example changepoint_bundle
//! ```

use icarhmm::changepoint::{fit_changepoint, ChangepointConfig, TrajectoryBundle};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

fn main() -> icarhmm::Result<()> {
    let before = [0.7, 0.1, 0.05, 0.1, 0.05];
    let after = [0.05, 0.4, 0.35, 0.1, 0.1];
    let (n_traj, n_times, switch) = (100, 120, 60);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pre = WeightedIndex::new(before).expect("valid weights");
    let post = WeightedIndex::new(after).expect("valid weights");
    let rows = (0..n_traj)
        .map(|_| (0..n_times).map(|t| if t < switch { pre.sample(&mut rng) } else { post.sample(&mut rng) }).collect())
        .collect();
    let bundle = TrajectoryBundle::new(5, rows)?;

    let fit = fit_changepoint(&bundle, &ChangepointConfig { n_iter: 600, n_burnin: 200, seed: 1, ..Default::default() })?;
    println!("true switch at time {}, estimated {} (95% interval {}..{})", switch + 1, fit.map_changepoint, fit.interval.0, fit.interval.1);
    println!("P(never switched) = {:.4}", fit.distribution[n_times]);
    println!("emission before: {:.3?}", fit.emission[0]);
    println!("emission after:  {:.3?}", fit.emission[1]);
    println!("left-to-right violations: {}", fit.left_to_right_violations);
    Ok(())
}
