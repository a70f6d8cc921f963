//! Single change-point detection over a bundle of categorical state
//! trajectories, via a two-state left-to-right HMM fitted by Gibbs sampling.
//!
//! Every trajectory has its own hidden regime path; the emission matrix and
//! the switch probability are shared. Regime 0 can only stay or move to
//! regime 1, which is absorbing, and every path starts in regime 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};

use crate::error::{Error, Result};
use crate::hmm;

/// `M` trajectories of equal length over categories `0..n_categories`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryBundle {
    n_categories: usize,
    rows: Vec<Vec<usize>>,
}

impl TrajectoryBundle {
    pub fn new(n_categories: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidBundle("bundle has no trajectories".into()));
        };
        if n_categories == 0 || first.is_empty() {
            return Err(Error::InvalidBundle("empty categories or trajectories".into()));
        }
        for (k, row) in rows.iter().enumerate() {
            if row.len() != first.len() {
                return Err(Error::InvalidBundle(format!(
                    "trajectory {k} has length {}, expected {}",
                    row.len(),
                    first.len()
                )));
            }
            if let Some(&bad) = row.iter().find(|&&v| v >= n_categories) {
                return Err(Error::InvalidBundle(format!("trajectory {k} has category {bad} out of range")));
            }
        }
        Ok(Self { n_categories, rows })
    }

    pub fn n_categories(&self) -> usize {
        self.n_categories
    }

    pub fn n_trajectories(&self) -> usize {
        self.rows.len()
    }

    pub fn n_times(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    /// True when every entry of every trajectory is the same category.
    pub fn is_degenerate(&self) -> bool {
        let v = self.rows[0][0];
        self.rows.iter().all(|r| r.iter().all(|&x| x == v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangepointConfig {
    pub n_iter: usize,
    pub n_burnin: usize,
    pub seed: u64,
    /// Symmetric Dirichlet concentration for each emission row.
    pub emission_prior: f64,
    /// Beta prior on the switch probability.
    pub switch_prior: (f64, f64),
}

impl Default for ChangepointConfig {
    fn default() -> Self {
        Self { n_iter: 1000, n_burnin: 500, seed: 1, emission_prior: 1.0, switch_prior: (1.0, 1.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangepointFit {
    /// Posterior mean emission matrix: row 0 before the switch, row 1 after.
    pub emission: [Vec<f64>; 2],
    /// Posterior mean switch probability.
    pub switch_prob: f64,
    /// `distribution[k]` is the probability that the switch happens at time
    /// `k + 1` (one-based); the last entry (time `T + 1`) means "never".
    pub distribution: Vec<f64>,
    /// One-based mode of `distribution`.
    pub map_changepoint: usize,
    /// One-based central 95% interval of `distribution`.
    pub interval: (usize, usize),
    /// Set when the bundle is constant in a single category; the fit is then uninformative.
    pub degenerate: bool,
    /// Sampled regime paths that moved back from regime 1 to regime 0.
    pub left_to_right_violations: usize,
}

fn sample_dirichlet<R: Rng>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let mut x: Vec<f64> = alpha.iter().map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng)).collect();
    let total: f64 = x.iter().sum();
    if total > 0.0 {
        x.iter_mut().for_each(|v| *v /= total);
    } else {
        let k = x.len() as f64;
        x.iter_mut().for_each(|v| *v = 1.0 / k);
    }
    x
}

/// Empirical category frequencies over the first or second half of the times.
fn half_frequencies(bundle: &TrajectoryBundle, second: bool, prior: f64) -> Vec<f64> {
    let t_count = bundle.n_times();
    let range = if second { t_count / 2..t_count } else { 0..t_count.div_ceil(2) };
    let mut counts = vec![prior; bundle.n_categories];
    for row in bundle.rows() {
        for &v in &row[range.clone()] {
            counts[v] += 1.0;
        }
    }
    let total: f64 = counts.iter().sum();
    counts.into_iter().map(|c| c / total).collect()
}

pub fn fit_changepoint(bundle: &TrajectoryBundle, cfg: &ChangepointConfig) -> Result<ChangepointFit> {
    if cfg.n_iter <= cfg.n_burnin {
        return Err(Error::Config("changepoint n_iter must exceed n_burnin".into()));
    }
    if !(cfg.emission_prior > 0.0 && cfg.switch_prior.0 > 0.0 && cfg.switch_prior.1 > 0.0) {
        return Err(Error::Config("changepoint priors must be positive".into()));
    }
    let k_count = bundle.n_categories();
    let t_count = bundle.n_times();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut emission = [half_frequencies(bundle, false, cfg.emission_prior), half_frequencies(bundle, true, cfg.emission_prior)];
    let mut q = 1.0 / t_count as f64;
    let rho = [1.0, 0.0];

    let mut dist = vec![0.0; t_count + 1];
    let mut emission_sum = [vec![0.0; k_count], vec![0.0; k_count]];
    let mut q_sum = 0.0;
    let mut violations = 0usize;
    let mut log_omega = vec![0.0; 2 * t_count];
    for iter in 0..cfg.n_iter {
        let a = vec![vec![1.0 - q, q], vec![0.0, 1.0]];
        let log_e: Vec<Vec<f64>> = emission.iter().map(|row| row.iter().map(|v| v.ln()).collect()).collect();
        let mut counts = [vec![cfg.emission_prior; k_count], vec![cfg.emission_prior; k_count]];
        let (mut stay, mut switch) = (0.0, 0.0);
        let keep = iter >= cfg.n_burnin;
        for row in bundle.rows() {
            for (t, &v) in row.iter().enumerate() {
                log_omega[2 * t] = log_e[0][v];
                log_omega[2 * t + 1] = log_e[1][v];
            }
            let z = hmm::ffbs(&rho, &a, &log_omega, &mut rng);
            let first = z.iter().position(|&s| s == 1);
            if z.windows(2).any(|w| w[0] > w[1]) {
                violations += 1;
            }
            for (t, &v) in row.iter().enumerate() {
                counts[z[t]][v] += 1.0;
            }
            // transitions out of regime 0
            let zero_steps = first.unwrap_or(t_count);
            stay += zero_steps.saturating_sub(1) as f64;
            if let Some(f) = first {
                if f > 0 {
                    switch += 1.0;
                }
            }
            if keep {
                dist[first.unwrap_or(t_count)] += 1.0;
            }
        }
        emission = [sample_dirichlet(&counts[0], &mut rng), sample_dirichlet(&counts[1], &mut rng)];
        q = Beta::new(cfg.switch_prior.0 + switch, cfg.switch_prior.1 + stay).expect("positive").sample(&mut rng);
        // keep the log-emissions finite
        q = q.clamp(1e-300, 1.0 - 1e-16);
        for row in emission.iter_mut() {
            row.iter_mut().for_each(|v| *v = v.max(1e-300));
        }
        if keep {
            for s in 0..2 {
                for (acc, v) in emission_sum[s].iter_mut().zip(&emission[s]) {
                    *acc += v;
                }
            }
            q_sum += q;
        }
    }
    let kept = (cfg.n_iter - cfg.n_burnin) as f64;
    let total: f64 = dist.iter().sum();
    dist.iter_mut().for_each(|v| *v /= total);
    let map = dist.iter().enumerate().fold(0, |b, (k, &v)| if v > dist[b] { k } else { b });
    let interval = (discrete_quantile(&dist, 0.025) + 1, discrete_quantile(&dist, 0.975) + 1);
    Ok(ChangepointFit {
        emission: emission_sum.map(|row| row.into_iter().map(|v| v / kept).collect()),
        switch_prob: q_sum / kept,
        distribution: dist,
        map_changepoint: map + 1,
        interval,
        degenerate: bundle.is_degenerate(),
        left_to_right_violations: violations,
    })
}

/// Smallest index whose cumulative probability reaches `p`.
fn discrete_quantile(dist: &[f64], p: f64) -> usize {
    let mut acc = 0.0;
    for (k, &v) in dist.iter().enumerate() {
        acc += v;
        if acc >= p - 1e-12 {
            return k;
        }
    }
    dist.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::sample_categorical;

    fn quick() -> ChangepointConfig {
        ChangepointConfig { n_iter: 600, n_burnin: 200, seed: 3, ..Default::default() }
    }

    #[test]
    fn bundle_validation() {
        assert!(TrajectoryBundle::new(2, vec![]).is_err());
        assert!(TrajectoryBundle::new(2, vec![vec![0, 1], vec![0]]).is_err());
        assert!(TrajectoryBundle::new(2, vec![vec![0, 2]]).is_err());
        assert!(TrajectoryBundle::new(2, vec![vec![0, 1]]).is_ok());
    }

    #[test]
    fn perfect_separation_single_trajectory() {
        let bundle = TrajectoryBundle::new(2, vec![vec![0, 0, 0, 1, 1, 1]]).unwrap();
        let fit = fit_changepoint(&bundle, &quick()).unwrap();
        assert_eq!(fit.map_changepoint, 4);
        assert!(fit.emission[0][0] > fit.emission[0][1]);
        assert!(fit.emission[1][1] > fit.emission[1][0]);
        assert!((fit.distribution.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(fit.distribution[0], 0.0);
        assert_eq!(fit.left_to_right_violations, 0);
        for row in &fit.emission {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn never_switched_mass_shrinks_with_more_post_switch_data() {
        let mut never = Vec::new();
        for extra in [1usize, 3, 6] {
            let mut row = vec![0; 6];
            row.extend(std::iter::repeat_n(1, extra));
            let bundle = TrajectoryBundle::new(2, vec![row]).unwrap();
            let fit = fit_changepoint(&bundle, &ChangepointConfig { n_iter: 4000, n_burnin: 500, ..quick() }).unwrap();
            never.push(*fit.distribution.last().unwrap());
        }
        assert!(never[0] > never[1] && never[1] > never[2], "{never:?}");
    }

    #[test]
    fn symbol_relabeling_permutes_emission_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<usize>> = (0..20)
            .map(|_| (0..30).map(|t| if t < 15 { rng.random_range(0..2) } else { rng.random_range(1..3) }).collect())
            .collect();
        let perm = [2usize, 0, 1];
        let permuted: Vec<Vec<usize>> = rows.iter().map(|r| r.iter().map(|&v| perm[v]).collect()).collect();
        let a = fit_changepoint(&TrajectoryBundle::new(3, rows).unwrap(), &quick()).unwrap();
        let b = fit_changepoint(&TrajectoryBundle::new(3, permuted).unwrap(), &quick()).unwrap();
        for s in 0..2 {
            for k in 0..3 {
                assert!((a.emission[s][k] - b.emission[s][perm[k]]).abs() < 0.05);
            }
        }
        assert!((a.map_changepoint as i64 - b.map_changepoint as i64).abs() <= 1);
    }

    #[test]
    fn degenerate_bundle_is_flagged() {
        let bundle = TrajectoryBundle::new(3, vec![vec![1; 10]; 4]).unwrap();
        let fit = fit_changepoint(&bundle, &quick()).unwrap();
        assert!(fit.degenerate);
        assert!((fit.distribution.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_synthetic_switch() {
        let pre = [0.7, 0.1, 0.05, 0.1, 0.05];
        let post = [0.05, 0.4, 0.35, 0.1, 0.1];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<usize>> = (0..200)
            .map(|_| (0..200).map(|t| sample_categorical(if t < 99 { &pre } else { &post }, &mut rng)).collect())
            .collect();
        let fit = fit_changepoint(&TrajectoryBundle::new(5, rows).unwrap(), &quick()).unwrap();
        assert!((fit.map_changepoint as i64 - 100).abs() <= 3, "map {}", fit.map_changepoint);
        for k in 0..5 {
            assert!((fit.emission[0][k] - pre[k]).abs() < 0.05);
            assert!((fit.emission[1][k] - post[k]).abs() < 0.05);
        }
    }
}
