//! Draw ICAR fields on a small grid and compare their empirical covariance
//! with `sigma^2` times the pseudo-inverse of the graph Laplacian.
//!
//! ```bash
//! cargo run --release --example icar_field
//! ```

use icarhmm::graph::NeighborhoodGraph;
use icarhmm::simulate::IcarSampler;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> icarhmm::Result<()> {
    let graph = NeighborhoodGraph::grid(3, 3)?;
    let sigma = 0.7;
    let sampler = IcarSampler::new(&graph);
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    let n = graph.n_sites();
    let draws = 20_000;
    let mut cov = vec![vec![0.0; n]; n];
    let mut max_sum = 0.0f64;
    for _ in 0..draws {
        let phi = sampler.sample(sigma, &mut rng);
        max_sum = max_sum.max(phi.iter().sum::<f64>().abs());
        for i in 0..n {
            for j in 0..n {
                cov[i][j] += phi[i] * phi[j] / draws as f64;
            }
        }
    }
    let pinv = sampler.pseudo_inverse();

    println!("3x3 grid, {} edges, sigma = {sigma}", graph.edges().len());
    println!("largest |sum(phi)| over draws: {max_sum:.2e}");
    println!("site  var(empirical)  var(theory)");
    for i in 0..n {
        println!("{:>4}  {:>14.4}  {:>11.4}", i + 1, cov[i][i], sigma * sigma * pinv[i][i]);
    }
    println!("corner-to-neighbour covariance: {:.4} (theory {:.4})", cov[0][1], sigma * sigma * pinv[0][1]);
    println!("corner-to-far-corner covariance: {:.4} (theory {:.4})", cov[0][8], sigma * sigma * pinv[0][8]);
    Ok(())
}
