//! One No-U-Turn transition with multinomial trajectory sampling and a
//! diagonal Euclidean metric.

use rand::Rng;
use rand_distr::StandardNormal;

use super::LogDensity;
use crate::math::logaddexp;

const MAX_ENERGY_ERROR: f64 = 1000.0;

#[derive(Debug, Clone)]
pub(crate) struct Point {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    pub logp: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct TransitionStats {
    pub accept_stat: f64,
    pub tree_depth: usize,
    pub n_leapfrog: usize,
    pub divergent: bool,
    pub energy: f64,
}

struct Tree {
    left: Point,
    right: Point,
    sample: Point,
    log_weight: f64,
    rho: Vec<f64>,
}

struct Walk<'a, T: ?Sized> {
    target: &'a T,
    inv_mass: &'a [f64],
    step: f64,
    h0: f64,
    sum_accept: f64,
    n_leapfrog: usize,
    divergent: bool,
}

impl<T: LogDensity + ?Sized> Walk<'_, T> {
    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(self.inv_mass).map(|(pi, m)| pi * pi * m).sum::<f64>()
    }

    fn sharp(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(self.inv_mass).map(|(pi, m)| pi * m).collect()
    }

    fn leapfrog(&mut self, from: &Point, direction: f64) -> Option<Point> {
        let eps = direction * self.step;
        let mut p: Vec<f64> = from.p.iter().zip(&from.grad).map(|(p, g)| p + 0.5 * eps * g).collect();
        let q: Vec<f64> =
            from.q.iter().zip(&p).zip(self.inv_mass).map(|((q, p), m)| q + eps * m * p).collect();
        let mut grad = vec![0.0; q.len()];
        self.n_leapfrog += 1;
        let logp = match self.target.logp_and_grad(&q, &mut grad) {
            Ok(v) if v.is_finite() => v,
            _ => return None,
        };
        for (pi, g) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * eps * g;
        }
        Some(Point { q, p, grad, logp })
    }

    fn no_u_turn(&self, p_left: &[f64], p_right: &[f64], rho: &[f64]) -> bool {
        let a: f64 = self.sharp(p_left).iter().zip(rho).map(|(x, r)| x * r).sum();
        let b: f64 = self.sharp(p_right).iter().zip(rho).map(|(x, r)| x * r).sum();
        a > 0.0 && b > 0.0
    }

    /// Builds a subtree of `2^depth` leapfrog steps from `from` in `direction`.
    /// Returns `None` when the subtree diverged or turned back on itself.
    fn build<R: Rng + ?Sized>(&mut self, from: &Point, direction: f64, depth: usize, rng: &mut R) -> Option<Tree> {
        if depth == 0 {
            let Some(next) = self.leapfrog(from, direction) else {
                self.divergent = true;
                return None;
            };
            let h = -next.logp + self.kinetic(&next.p);
            let delta = self.h0 - h;
            if !h.is_finite() || -delta > MAX_ENERGY_ERROR {
                self.divergent = true;
                return None;
            }
            self.sum_accept += delta.exp().min(1.0);
            return Some(Tree {
                left: next.clone(),
                right: next.clone(),
                rho: next.p.clone(),
                sample: next,
                log_weight: delta,
            });
        }
        let first = self.build(from, direction, depth - 1, rng)?;
        let frontier = if direction > 0.0 { &first.right } else { &first.left };
        let second = self.build(&frontier.clone(), direction, depth - 1, rng)?;
        let (lhs, rhs, lhs_is_first) = if direction > 0.0 { (first, second, true) } else { (second, first, false) };
        self.merge(lhs, rhs, lhs_is_first, rng)
    }

    /// Merges physically adjacent trees, sampling uniformly in proportion to weight.
    fn merge<R: Rng + ?Sized>(&self, lhs: Tree, rhs: Tree, lhs_is_first: bool, rng: &mut R) -> Option<Tree> {
        let log_weight = logaddexp(lhs.log_weight, rhs.log_weight);
        let rho: Vec<f64> = lhs.rho.iter().zip(&rhs.rho).map(|(a, b)| a + b).collect();
        let mut ok = self.no_u_turn(&lhs.left.p, &rhs.right.p, &rho);
        let ext: Vec<f64> = lhs.rho.iter().zip(&rhs.left.p).map(|(a, b)| a + b).collect();
        ok &= self.no_u_turn(&lhs.left.p, &rhs.left.p, &ext);
        let ext: Vec<f64> = rhs.rho.iter().zip(&lhs.right.p).map(|(a, b)| a + b).collect();
        ok &= self.no_u_turn(&lhs.right.p, &rhs.right.p, &ext);
        if !ok {
            return None;
        }
        let (first, second) = if lhs_is_first { (&lhs, &rhs) } else { (&rhs, &lhs) };
        let take_second = rng.random::<f64>().ln() < second.log_weight - log_weight;
        let sample = if take_second { second.sample.clone() } else { first.sample.clone() };
        Some(Tree { left: lhs.left, right: rhs.right, sample, log_weight, rho })
    }
}

/// One NUTS transition from `current` (whose `logp`/`grad` are valid).
pub(crate) fn transition<T: LogDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    current: &Point,
    inv_mass: &[f64],
    step: f64,
    max_depth: usize,
    rng: &mut R,
) -> (Point, TransitionStats) {
    let p: Vec<f64> =
        inv_mass.iter().map(|m| rng.sample::<f64, _>(StandardNormal) / m.sqrt()).collect();
    let start = Point { p, ..current.clone() };
    let mut walk =
        Walk { target, inv_mass, step, h0: 0.0, sum_accept: 0.0, n_leapfrog: 0, divergent: false };
    walk.h0 = -start.logp + walk.kinetic(&start.p);

    let mut tree = Tree {
        left: start.clone(),
        right: start.clone(),
        rho: start.p.clone(),
        sample: start.clone(),
        log_weight: 0.0,
    };
    let mut depth = 0;
    while depth < max_depth {
        let forward = rng.random::<bool>();
        let direction = if forward { 1.0 } else { -1.0 };
        let frontier = if forward { tree.right.clone() } else { tree.left.clone() };
        let Some(sub) = walk.build(&frontier, direction, depth, rng) else {
            depth += 1;
            break;
        };
        depth += 1;
        // biased progressive sampling toward the new subtree
        if rng.random::<f64>().ln() < sub.log_weight - tree.log_weight {
            tree.sample = sub.sample.clone();
        }
        let sample = tree.sample.clone();
        let (lhs, rhs) = if forward { (tree, sub) } else { (sub, tree) };
        let log_weight = logaddexp(lhs.log_weight, rhs.log_weight);
        let rho: Vec<f64> = lhs.rho.iter().zip(&rhs.rho).map(|(a, b)| a + b).collect();
        let mut ok = walk.no_u_turn(&lhs.left.p, &rhs.right.p, &rho);
        let ext: Vec<f64> = lhs.rho.iter().zip(&rhs.left.p).map(|(a, b)| a + b).collect();
        ok &= walk.no_u_turn(&lhs.left.p, &rhs.left.p, &ext);
        let ext: Vec<f64> = rhs.rho.iter().zip(&lhs.right.p).map(|(a, b)| a + b).collect();
        ok &= walk.no_u_turn(&lhs.right.p, &rhs.right.p, &ext);
        tree = Tree { left: lhs.left, right: rhs.right, sample, log_weight, rho };
        if !ok {
            break;
        }
    }
    let accept_stat = if walk.n_leapfrog > 0 { walk.sum_accept / walk.n_leapfrog as f64 } else { 0.0 };
    let energy = -tree.sample.logp + walk.kinetic(&tree.sample.p);
    let stats = TransitionStats {
        accept_stat,
        tree_depth: depth,
        n_leapfrog: walk.n_leapfrog,
        divergent: walk.divergent,
        energy,
    };
    (tree.sample, stats)
}

/// Stan-style heuristic: double or halve the step until a single leapfrog
/// step's acceptance probability crosses 0.8.
pub(crate) fn find_reasonable_step<T: LogDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    current: &Point,
    inv_mass: &[f64],
    initial: f64,
    rng: &mut R,
) -> f64 {
    let mut step = initial;
    let p: Vec<f64> =
        inv_mass.iter().map(|m| rng.sample::<f64, _>(StandardNormal) / m.sqrt()).collect();
    let start = Point { p, ..current.clone() };
    let mut walk =
        Walk { target, inv_mass, step, h0: 0.0, sum_accept: 0.0, n_leapfrog: 0, divergent: false };
    walk.h0 = -start.logp + walk.kinetic(&start.p);
    let delta_h = |walk: &mut Walk<'_, T>| match walk.leapfrog(&start, 1.0) {
        Some(next) => {
            let d = walk.h0 - (-next.logp + walk.kinetic(&next.p));
            if d.is_finite() {
                d
            } else {
                f64::NEG_INFINITY
            }
        }
        None => f64::NEG_INFINITY,
    };
    let log_target = 0.8f64.ln();
    let first = delta_h(&mut walk);
    let direction = if first > log_target { 1.0 } else { -1.0 };
    for _ in 0..100 {
        step *= 2f64.powf(direction);
        walk.step = step;
        let d = delta_h(&mut walk);
        if (direction > 0.0 && d <= log_target) || (direction < 0.0 && d > log_target) {
            break;
        }
        if !(1e-12..=1e6).contains(&step) {
            break;
        }
    }
    step.clamp(1e-12, 1e6)
}
