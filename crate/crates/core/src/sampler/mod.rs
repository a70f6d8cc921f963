//! Multi-chain NUTS with warmup adaptation, plus convergence diagnostics.

mod adapt;
pub mod diagnostics;
mod nuts;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use adapt::{DualAveraging, RunningVariance, WindowSchedule};
pub use nuts::TransitionStats;
use nuts::{find_reasonable_step, transition, Point};

/// A differentiable log density over an unconstrained vector.
///
/// Implementations must be callable from several threads at once.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    /// Returns the log density and writes its gradient into `grad`.
    fn logp_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// Uniform jitter of half-width `scale` around `center` (the origin when `None`).
    RandomJitter { center: Option<Vec<f64>>, scale: f64 },
    /// One starting point per chain, or a single point shared by all chains.
    UserSupplied(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_draws: usize,
    pub seed: u64,
    pub target_acceptance: f64,
    pub max_tree_depth: usize,
    pub init: InitMode,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_warmup: 5000,
            n_draws: 10000,
            seed: 1,
            target_acceptance: 0.8,
            max_tree_depth: 10,
            init: InitMode::RandomJitter { center: None, scale: 2.0 },
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSamplerConfig(m.to_string()));
        if self.n_chains == 0 {
            return bad("n_chains must be at least 1");
        }
        if self.n_warmup < 100 {
            return bad("n_warmup must be at least 100");
        }
        if self.n_draws == 0 {
            return bad("n_draws must be at least 1");
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return bad("target_acceptance must lie in (0, 1)");
        }
        if self.max_tree_depth == 0 {
            return bad("max_tree_depth must be positive");
        }
        match &self.init {
            InitMode::RandomJitter { scale, .. } if !(scale.is_finite() && *scale >= 0.0) => {
                bad("jitter scale must be finite and non-negative")
            }
            InitMode::UserSupplied(points)
                if points.is_empty() || (points.len() != 1 && points.len() != self.n_chains) =>
            {
                bad("user-supplied init needs one point or one per chain")
            }
            _ => Ok(()),
        }
    }
}

/// Step size and inverse metric in force after warmup.
#[derive(Debug, Clone, PartialEq)]
pub struct Adaptation {
    pub step_size: f64,
    pub inv_mass: Vec<f64>,
}

/// Post-warmup draws in unconstrained space.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    dim: usize,
    n_draws: usize,
    /// Per chain, `n_draws * dim` values in draw-major order.
    draws: Vec<Vec<f64>>,
    lp: Vec<Vec<f64>>,
    stats: Vec<Vec<TransitionStats>>,
    adaptation: Vec<Adaptation>,
}

impl PosteriorDraws {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_chains(&self) -> usize {
        self.draws.len()
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn draw(&self, chain: usize, k: usize) -> &[f64] {
        &self.draws[chain][k * self.dim..(k + 1) * self.dim]
    }

    /// All draws, chain by chain.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &[f64])> + '_ {
        (0..self.n_chains()).flat_map(move |c| (0..self.n_draws).map(move |k| (c, k, self.draw(c, k))))
    }

    pub fn lp(&self, chain: usize) -> &[f64] {
        &self.lp[chain]
    }

    pub fn stats(&self, chain: usize) -> &[TransitionStats] {
        &self.stats[chain]
    }

    pub fn adaptation(&self, chain: usize) -> &Adaptation {
        &self.adaptation[chain]
    }

    pub fn divergences(&self, chain: usize) -> usize {
        self.stats[chain].iter().filter(|s| s.divergent).count()
    }

    pub fn total_divergences(&self) -> usize {
        (0..self.n_chains()).map(|c| self.divergences(c)).sum()
    }

    /// Values of coordinate `j`, one vector per chain.
    pub fn coordinate(&self, j: usize) -> Vec<Vec<f64>> {
        (0..self.n_chains()).map(|c| (0..self.n_draws).map(|k| self.draw(c, k)[j]).collect()).collect()
    }

    /// Maps each draw through `f`, preserving the chain layout.
    pub fn map_chains<U, F>(&self, mut f: F) -> Vec<Vec<U>>
    where
        F: FnMut(&[f64]) -> U,
    {
        (0..self.n_chains()).map(|c| (0..self.n_draws).map(|k| f(self.draw(c, k))).collect()).collect()
    }

    /// The draw with the highest log density and its (chain, index).
    pub fn max_lp(&self) -> (usize, usize, &[f64]) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (c, lps) in self.lp.iter().enumerate() {
            for (k, &v) in lps.iter().enumerate() {
                if v > best.2 {
                    best = (c, k, v);
                }
            }
        }
        (best.0, best.1, self.draw(best.0, best.1))
    }
}

const INIT_ATTEMPTS: usize = 100;

fn evaluate<T: LogDensity + ?Sized>(target: &T, q: Vec<f64>) -> Option<Point> {
    let mut grad = vec![0.0; q.len()];
    match target.logp_and_grad(&q, &mut grad) {
        Ok(lp) if lp.is_finite() && grad.iter().all(|g| g.is_finite()) => {
            Some(Point { p: vec![0.0; q.len()], q, grad, logp: lp })
        }
        _ => None,
    }
}

fn initial_point<T: LogDensity + ?Sized, R: Rng>(
    target: &T,
    init: &InitMode,
    chain: usize,
    rng: &mut R,
) -> Result<Point> {
    let dim = target.dim();
    match init {
        InitMode::UserSupplied(points) => {
            let q = points[if points.len() == 1 { 0 } else { chain }].clone();
            if q.len() != dim {
                return Err(Error::LengthMismatch { expected: dim, got: q.len() });
            }
            evaluate(target, q).ok_or(Error::InitializationFailure(1))
        }
        InitMode::RandomJitter { center, scale } => {
            let origin = center.clone().unwrap_or_else(|| vec![0.0; dim]);
            if origin.len() != dim {
                return Err(Error::LengthMismatch { expected: dim, got: origin.len() });
            }
            for _ in 0..INIT_ATTEMPTS {
                let q = origin.iter().map(|c| c + scale * rng.random_range(-1.0..=1.0)).collect();
                if let Some(point) = evaluate(target, q) {
                    return Ok(point);
                }
            }
            Err(Error::InitializationFailure(INIT_ATTEMPTS))
        }
    }
}

struct ChainOutput {
    draws: Vec<f64>,
    lp: Vec<f64>,
    stats: Vec<TransitionStats>,
    adaptation: Adaptation,
}

fn run_chain<T: LogDensity + ?Sized>(target: &T, cfg: &SamplerConfig, chain: usize) -> Result<ChainOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain as u64 + 1);
    let dim = target.dim();
    let mut current = initial_point(target, &cfg.init, chain, &mut rng)?;
    let mut inv_mass = vec![1.0; dim];
    let mut step = find_reasonable_step(target, &current, &inv_mass, 1.0, &mut rng);
    let mut dual = DualAveraging::new(cfg.target_acceptance, step);
    let mut schedule = WindowSchedule::new(cfg.n_warmup);
    let mut variance = RunningVariance::new(dim);

    for i in 0..cfg.n_warmup {
        let (next, stats) = transition(target, &current, &inv_mass, step, cfg.max_tree_depth, &mut rng);
        current = next;
        step = dual.update(stats.accept_stat);
        if schedule.in_slow_window(i) {
            variance.add(&current.q);
        }
        if schedule.window_closes(i) {
            inv_mass = variance.regularized();
            variance.reset();
            step = find_reasonable_step(target, &current, &inv_mass, step, &mut rng);
            dual = DualAveraging::new(cfg.target_acceptance, step);
        }
    }
    step = dual.final_step();

    let mut draws = Vec::with_capacity(cfg.n_draws * dim);
    let mut lp = Vec::with_capacity(cfg.n_draws);
    let mut all_stats = Vec::with_capacity(cfg.n_draws);
    for _ in 0..cfg.n_draws {
        let (next, stats) = transition(target, &current, &inv_mass, step, cfg.max_tree_depth, &mut rng);
        current = next;
        draws.extend_from_slice(&current.q);
        lp.push(current.logp);
        all_stats.push(stats);
    }
    Ok(ChainOutput { draws, lp, stats: all_stats, adaptation: Adaptation { step_size: step, inv_mass } })
}

/// Runs `cfg.n_chains` independent chains (in parallel when threads allow).
///
/// Each chain uses its own stream of a ChaCha8 generator seeded by
/// `cfg.seed`, so results do not depend on the thread count.
pub fn run_chains<T: LogDensity + ?Sized>(target: &T, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let outputs: Vec<ChainOutput> =
        (0..cfg.n_chains).into_par_iter().map(|c| run_chain(target, cfg, c)).collect::<Result<_>>()?;
    let mut out = PosteriorDraws {
        dim: target.dim(),
        n_draws: cfg.n_draws,
        draws: Vec::with_capacity(cfg.n_chains),
        lp: Vec::with_capacity(cfg.n_chains),
        stats: Vec::with_capacity(cfg.n_chains),
        adaptation: Vec::with_capacity(cfg.n_chains),
    };
    for o in outputs {
        out.draws.push(o.draws);
        out.lp.push(o.lp);
        out.stats.push(o.stats);
        out.adaptation.push(o.adaptation);
    }
    Ok(out)
}

/// Short gradient ascent (Adam) from `start`; returns the best point seen.
///
/// Used as a pilot run to centre the initial jitter.
pub fn pilot_optimize<T: LogDensity + ?Sized>(
    target: &T,
    start: &[f64],
    n_iter: usize,
    learning_rate: f64,
) -> Result<Vec<f64>> {
    let dim = target.dim();
    if start.len() != dim {
        return Err(Error::LengthMismatch { expected: dim, got: start.len() });
    }
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut x = start.to_vec();
    let mut grad = vec![0.0; dim];
    let mut best_lp = target.logp_and_grad(&x, &mut grad)?;
    if !best_lp.is_finite() {
        return Err(Error::InitializationFailure(1));
    }
    let mut best = x.clone();
    let (mut m, mut v) = (vec![0.0; dim], vec![0.0; dim]);
    for it in 1..=n_iter {
        for j in 0..dim {
            m[j] = b1 * m[j] + (1.0 - b1) * grad[j];
            v[j] = b2 * v[j] + (1.0 - b2) * grad[j] * grad[j];
            let mhat = m[j] / (1.0 - b1.powi(it as i32));
            let vhat = v[j] / (1.0 - b2.powi(it as i32));
            x[j] += learning_rate * mhat / (vhat.sqrt() + eps);
        }
        match target.logp_and_grad(&x, &mut grad) {
            Ok(lp) if lp.is_finite() => {
                if lp > best_lp {
                    best_lp = lp;
                    best.copy_from_slice(&x);
                }
            }
            _ => {
                // step landed somewhere invalid: restart the moments from the best point
                x.copy_from_slice(&best);
                target.logp_and_grad(&x, &mut grad)?;
                m.iter_mut().for_each(|v| *v = 0.0);
                v.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }
    Ok(best)
}
