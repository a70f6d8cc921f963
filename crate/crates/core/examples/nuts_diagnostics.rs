//! Run the NUTS sampler on a hand-written target and read its diagnostics.
//!
//! Any type implementing `LogDensity` can be sampled; here a correlated
//! two-dimensional Gaussian.
//!
//! ```bash
//! cargo run --release --example nuts_diagnostics
//! ```

use icarhmm::sampler::diagnostics::{ess, rhat, summarize, EssKind};
use icarhmm::sampler::{run_chains, LogDensity, SamplerConfig};

struct Correlated {
    rho: f64,
}

impl LogDensity for Correlated {
    fn dim(&self) -> usize {
        2
    }

    fn logp_and_grad(&self, x: &[f64], grad: &mut [f64]) -> icarhmm::Result<f64> {
        let c = 1.0 / (1.0 - self.rho * self.rho);
        grad[0] = -c * (x[0] - self.rho * x[1]);
        grad[1] = -c * (x[1] - self.rho * x[0]);
        Ok(-0.5 * c * (x[0] * x[0] - 2.0 * self.rho * x[0] * x[1] + x[1] * x[1]))
    }
}

fn main() -> icarhmm::Result<()> {
    let target = Correlated { rho: 0.9 };
    let cfg = SamplerConfig { n_chains: 4, n_warmup: 1000, n_draws: 2000, seed: 7, ..Default::default() };
    let draws = run_chains(&target, &cfg)?;

    for c in 0..draws.n_chains() {
        let a = draws.adaptation(c);
        println!("chain {}: step size {:.3}, inverse metric {:.3?}, divergences {}", c + 1, a.step_size, a.inv_mass, draws.divergences(c));
    }
    for j in 0..2 {
        let chains = draws.coordinate(j);
        let row = summarize(&format!("x[{}]", j + 1), &chains);
        println!(
            "{}: mean {:+.3} sd {:.3}  R-hat {:.4}  ESS bulk {:.0} tail {:.0}",
            row.param,
            row.mean,
            row.sd,
            rhat(&chains)?,
            ess(&chains, EssKind::Bulk)?,
            ess(&chains, EssKind::Tail)?
        );
    }
    let pairs: Vec<(f64, f64)> = draws.iter().map(|(_, _, x)| (x[0], x[1])).collect();
    let n = pairs.len() as f64;
    let m = |f: &dyn Fn(&(f64, f64)) -> f64| pairs.iter().map(f).sum::<f64>() / n;
    let (ma, mb) = (m(&|p| p.0), m(&|p| p.1));
    let cov = m(&|p| (p.0 - ma) * (p.1 - mb));
    let corr = cov / (m(&|p| (p.0 - ma).powi(2)) * m(&|p| (p.1 - mb).powi(2))).sqrt();
    println!("sample correlation {corr:.3} (target 0.9)");
    Ok(())
}
