//! Discrete-state HMM recursions over a precomputed log-emission matrix.
//!
//! `log_omega` is row-major `T x S`: entry `t * S + s` is the log-probability
//! of everything observed at time `t` given state `s`.

use rand::Rng;

use crate::math::logsumexp;

/// Log-space forward recursion, returning the marginal log-likelihood.
pub fn forward_log(rho: &[f64], a: &[Vec<f64>], log_omega: &[f64]) -> f64 {
    let s_count = rho.len();
    let n_times = log_omega.len() / s_count;
    let log_a: Vec<Vec<f64>> = a.iter().map(|row| row.iter().map(|v| v.ln()).collect()).collect();
    let mut alpha: Vec<f64> = (0..s_count).map(|s| rho[s].ln() + log_omega[s]).collect();
    let mut next = vec![0.0; s_count];
    let mut terms = vec![0.0; s_count];
    for t in 1..n_times {
        for (s2, nx) in next.iter_mut().enumerate() {
            for s in 0..s_count {
                terms[s] = alpha[s] + log_a[s][s2];
            }
            *nx = logsumexp(&terms) + log_omega[t * s_count + s2];
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    logsumexp(&alpha)
}

/// Scaled forward pass: filtered probabilities `P(x_t | data_{1:t})` and the
/// per-time log normalizers, whose sum is the log-likelihood.
#[derive(Debug, Clone)]
pub struct Filtered {
    pub n_states: usize,
    pub alpha: Vec<f64>,
    /// `log c_t`, including the per-time emission shift.
    pub log_scale: Vec<f64>,
    /// Emission probabilities divided by their per-time maximum.
    scaled_emission: Vec<f64>,
}

impl Filtered {
    pub fn n_times(&self) -> usize {
        self.log_scale.len()
    }

    pub fn loglik(&self) -> f64 {
        self.log_scale.iter().sum()
    }

    pub fn alpha_at(&self, t: usize) -> &[f64] {
        &self.alpha[t * self.n_states..(t + 1) * self.n_states]
    }
}

pub fn forward_scaled(rho: &[f64], a: &[Vec<f64>], log_omega: &[f64]) -> Filtered {
    let s_count = rho.len();
    let n_times = log_omega.len() / s_count;
    let mut alpha = vec![0.0; n_times * s_count];
    let mut log_scale = vec![0.0; n_times];
    let mut scaled_emission = vec![0.0; n_times * s_count];
    for t in 0..n_times {
        let row = &log_omega[t * s_count..(t + 1) * s_count];
        let shift = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for s in 0..s_count {
            scaled_emission[t * s_count + s] = (row[s] - shift).exp();
        }
        let mut total = 0.0;
        for s2 in 0..s_count {
            let prior = if t == 0 {
                rho[s2]
            } else {
                let prev = &alpha[(t - 1) * s_count..t * s_count];
                (0..s_count).map(|s| prev[s] * a[s][s2]).sum()
            };
            let v = prior * scaled_emission[t * s_count + s2];
            alpha[t * s_count + s2] = v;
            total += v;
        }
        for s in 0..s_count {
            alpha[t * s_count + s] /= total;
        }
        log_scale[t] = total.ln() + shift;
    }
    Filtered { n_states: s_count, alpha, log_scale, scaled_emission }
}

/// Forward-backward results: smoothed marginals and expected transition counts.
#[derive(Debug, Clone)]
pub struct Smoothed {
    pub n_states: usize,
    pub loglik: f64,
    /// `P(x_t = s | all data)`, row-major `T x S`.
    pub gamma: Vec<f64>,
    /// `sum_t P(x_{t-1} = s, x_t = s' | all data)`, `S x S`.
    pub transitions: Vec<Vec<f64>>,
}

impl Smoothed {
    pub fn at(&self, t: usize) -> &[f64] {
        &self.gamma[t * self.n_states..(t + 1) * self.n_states]
    }
}

pub fn forward_backward(rho: &[f64], a: &[Vec<f64>], log_omega: &[f64]) -> Smoothed {
    let f = forward_scaled(rho, a, log_omega);
    let s_count = rho.len();
    let n_times = f.n_times();
    let mut beta = vec![1.0; s_count];
    let mut gamma = vec![0.0; n_times * s_count];
    let mut transitions = vec![vec![0.0; s_count]; s_count];
    let last = f.alpha_at(n_times - 1);
    gamma[(n_times - 1) * s_count..].copy_from_slice(last);
    let mut weighted = vec![0.0; s_count];
    for t in (1..n_times).rev() {
        let e = &f.scaled_emission[t * s_count..(t + 1) * s_count];
        let c_t = (f.log_scale[t] - log_max(&log_omega[t * s_count..(t + 1) * s_count])).exp();
        for s2 in 0..s_count {
            weighted[s2] = e[s2] * beta[s2];
        }
        let prev = f.alpha_at(t - 1);
        let mut new_beta = vec![0.0; s_count];
        for s in 0..s_count {
            let mut acc = 0.0;
            for s2 in 0..s_count {
                let w = a[s][s2] * weighted[s2];
                acc += w;
                transitions[s][s2] += prev[s] * w / c_t;
            }
            new_beta[s] = acc / c_t;
        }
        beta = new_beta;
        let mut norm = 0.0;
        for s in 0..s_count {
            let g = prev[s] * beta[s];
            gamma[(t - 1) * s_count + s] = g;
            norm += g;
        }
        for s in 0..s_count {
            gamma[(t - 1) * s_count + s] /= norm;
        }
    }
    Smoothed { n_states: s_count, loglik: f.loglik(), gamma, transitions }
}

fn log_max(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Most probable state path. Ties resolve toward the lower state index.
pub fn viterbi(rho: &[f64], a: &[Vec<f64>], log_omega: &[f64]) -> Vec<usize> {
    let s_count = rho.len();
    let n_times = log_omega.len() / s_count;
    let log_a: Vec<Vec<f64>> = a.iter().map(|row| row.iter().map(|v| v.ln()).collect()).collect();
    let mut delta: Vec<f64> = (0..s_count).map(|s| rho[s].ln() + log_omega[s]).collect();
    let mut back = vec![0usize; n_times * s_count];
    for t in 1..n_times {
        let mut next = vec![0.0; s_count];
        for s2 in 0..s_count {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for s in 0..s_count {
                let v = delta[s] + log_a[s][s2];
                if v > best {
                    best = v;
                    arg = s;
                }
            }
            next[s2] = best + log_omega[t * s_count + s2];
            back[t * s_count + s2] = arg;
        }
        delta = next;
    }
    let mut path = vec![0usize; n_times];
    let mut best = f64::NEG_INFINITY;
    for (s, &d) in delta.iter().enumerate() {
        if d > best {
            best = d;
            path[n_times - 1] = s;
        }
    }
    for t in (1..n_times).rev() {
        path[t - 1] = back[t * s_count + path[t]];
    }
    path
}

/// Joint log-probability of a given state path and the data.
pub fn path_log_prob(rho: &[f64], a: &[Vec<f64>], log_omega: &[f64], path: &[usize]) -> f64 {
    let s_count = rho.len();
    let mut lp = rho[path[0]].ln() + log_omega[path[0]];
    for t in 1..path.len() {
        lp += a[path[t - 1]][path[t]].ln() + log_omega[t * s_count + path[t]];
    }
    lp
}

/// Forward-filter backward-sample: an exact draw from `P(x_{1:T} | data)`.
pub fn ffbs<R: Rng + ?Sized>(rho: &[f64], a: &[Vec<f64>], log_omega: &[f64], rng: &mut R) -> Vec<usize> {
    let f = forward_scaled(rho, a, log_omega);
    sample_backward(&f, a, rng)
}

pub fn sample_backward<R: Rng + ?Sized>(f: &Filtered, a: &[Vec<f64>], rng: &mut R) -> Vec<usize> {
    let s_count = f.n_states;
    let n_times = f.n_times();
    let mut path = vec![0usize; n_times];
    path[n_times - 1] = sample_categorical(f.alpha_at(n_times - 1), rng);
    let mut weights = vec![0.0; s_count];
    for t in (0..n_times - 1).rev() {
        let next = path[t + 1];
        let alpha = f.alpha_at(t);
        for s in 0..s_count {
            weights[s] = alpha[s] * a[s][next];
        }
        path[t] = sample_categorical(&weights, rng);
    }
    path
}

/// Draws an index with probability proportional to `weights`.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}


#[cfg(test)]
mod tests {
    use super::oracle::*;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, s: usize, t: usize) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
        let norm = |v: Vec<f64>| {
            let z: f64 = v.iter().sum();
            v.into_iter().map(|x| x / z).collect::<Vec<_>>()
        };
        let rho = norm((0..s).map(|_| rng.random_range(0.05..1.0)).collect());
        let a = (0..s).map(|_| norm((0..s).map(|_| rng.random_range(0.05..1.0)).collect())).collect();
        let omega = (0..s * t).map(|_| rng.random_range(-30.0..-1.0)).collect();
        (rho, a, omega)
    }

    #[test]
    fn forward_routes_agree_with_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (rho, a, omega) = random_instance(&mut rng, 3, 5);
            let exact = log_marginal(&rho, &a, &omega);
            assert!((forward_log(&rho, &a, &omega) - exact).abs() < 1e-10);
            assert!((forward_scaled(&rho, &a, &omega).loglik() - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn smoothing_and_viterbi_against_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let (rho, a, omega) = random_instance(&mut rng, 3, 6);
            let paths = all_paths(3, 6);
            let lps: Vec<f64> = paths.iter().map(|p| joint(&rho, &a, &omega, p)).collect();
            let z = crate::math::logsumexp(&lps);
            let mut marg = vec![0.0; 6 * 3];
            let mut trans = vec![vec![0.0; 3]; 3];
            for (p, lp) in paths.iter().zip(&lps) {
                let w = (lp - z).exp();
                for t in 0..6 {
                    marg[t * 3 + p[t]] += w;
                    if t > 0 {
                        trans[p[t - 1]][p[t]] += w;
                    }
                }
            }
            let sm = forward_backward(&rho, &a, &omega);
            for (x, y) in sm.gamma.iter().zip(&marg) {
                assert!((x - y).abs() < 1e-10);
            }
            for s in 0..3 {
                for k in 0..3 {
                    assert!((sm.transitions[s][k] - trans[s][k]).abs() < 1e-10);
                }
            }
            let best = lps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let vit = viterbi(&rho, &a, &omega);
            assert!((path_log_prob(&rho, &a, &omega, &vit) - best).abs() < 1e-10);
        }
    }

    #[test]
    fn viterbi_breaks_ties_low() {
        let rho = [0.5, 0.5];
        let a = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let omega = [0.0; 8];
        assert_eq!(viterbi(&rho, &a, &omega), vec![0, 0, 0, 0]);
    }

    #[test]
    fn handles_structural_zeros() {
        // left-to-right chain: cannot return to state 0
        let rho = [1.0, 0.0];
        let a = vec![vec![0.8, 0.2], vec![0.0, 1.0]];
        let omega = [-1.0, -3.0, -2.0, -0.5, -3.0, -0.2];
        let exact = log_marginal(&rho, &a, &omega);
        assert!((forward_log(&rho, &a, &omega) - exact).abs() < 1e-12);
        assert!((forward_scaled(&rho, &a, &omega).loglik() - exact).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = ffbs(&rho, &a, &omega, &mut rng);
            assert_eq!(p[0], 0);
            assert!(p.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
