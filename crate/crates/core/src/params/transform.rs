//! Bijection between the flat unconstrained sampler space and [`ModelParams`].
//!
//! Layout, in order: `mu1`, log-gap `log(mu_S - mu1)`, stick-breaking
//! coordinates of the increments `m[1..S]`, free coordinates of `lambda`,
//! of each `phi[s]`, `log sigma_lambda`, `log sigma_phi`, free coordinates of
//! `gamma`, stick-breaking coordinates of `rho` and of each row of `A`, then
//! `xi` and `beta`. Mean-zero blocks of length k use k-1 free coordinates
//! and close with the negated sum.
//!
//! `lambda` and `phi[s]` are non-centered: the free coordinates describe the
//! field divided by its scale, so the sampler does not see the funnel
//! between a field and its scale. The target density is unchanged; the
//! Jacobian picks up `(N-1) log sigma` per field.

use std::ops::Range;

use super::{state_means, ModelParams, ModelSpec, N_MONTHS};
use crate::error::{Error, Result};
use crate::math::{invlogit, logit};

/// Segment map of the unconstrained vector for one [`ModelSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    spec: ModelSpec,
    mu1: usize,
    gap: Option<usize>,
    m: Range<usize>,
    lambda: Range<usize>,
    phi: Vec<Range<usize>>,
    sigma_lambda: usize,
    sigma_phi: Range<usize>,
    gamma: Range<usize>,
    rho: Range<usize>,
    a: Vec<Range<usize>>,
    xi: Range<usize>,
    beta: Range<usize>,
    dim: usize,
}

impl ParamLayout {
    pub fn new(spec: ModelSpec) -> Self {
        let s_count = spec.n_states;
        let n = spec.n_sites;
        let mut next = 0usize;
        let mut take = |len: usize| {
            let r = next..next + len;
            next += len;
            r
        };
        let mu1 = take(1).start;
        let gap = (s_count > 1).then(|| take(1).start);
        let m = take(s_count.saturating_sub(2));
        let lambda = take(n - 1);
        let phi = if spec.spatial { (0..s_count).map(|_| take(n - 1)).collect() } else { Vec::new() };
        let sigma_lambda = take(1).start;
        let sigma_phi = take(spec.n_sigma_phi());
        let gamma = take(N_MONTHS - 1);
        let rho = take(s_count - 1);
        let a = (0..s_count).map(|_| take(s_count - 1)).collect();
        let xi = take(spec.n_missingness());
        let beta = take(spec.n_missingness());
        let dim = next;
        Self { spec, mu1, gap, m, lambda, phi, sigma_lambda, sigma_phi, gamma, rho, a, xi, beta, dim }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Which `sigma_phi` entry scales state `s`.
    fn sigma_index(&self, s: usize) -> usize {
        if self.sigma_phi.len() == 1 {
            0
        } else {
            s
        }
    }

    /// Range of the free coordinates of `phi[s]` (empty without spatial fields).
    pub fn phi_range(&self, s: usize) -> Range<usize> {
        self.phi.get(s).cloned().unwrap_or(0..0)
    }

    /// Human-readable name for each unconstrained coordinate.
    pub fn coordinate_names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.dim];
        names[self.mu1] = "mu1".into();
        if let Some(g) = self.gap {
            names[g] = "log_gap".into();
        }
        let mut label = |r: &Range<usize>, prefix: &str| {
            for (k, idx) in r.clone().enumerate() {
                names[idx] = format!("{prefix}[{}]", k + 1);
            }
        };
        label(&self.m, "m_free");
        label(&self.lambda, "lambda_std");
        for (s, r) in self.phi.iter().enumerate() {
            label(r, &format!("phi_std[{}]", s + 1));
        }
        label(&self.sigma_phi, "log_sigma_phi");
        label(&self.gamma, "gamma_free");
        label(&self.rho, "rho_free");
        for (s, r) in self.a.iter().enumerate() {
            label(r, &format!("A_free[{}]", s + 1));
        }
        label(&self.xi, "xi");
        label(&self.beta, "beta");
        names[self.sigma_lambda] = "log_sigma_lambda".into();
        names
    }
}

/// Stick-breaking map from `K-1` reals to a `K`-simplex, with the
/// log-absolute-Jacobian determinant. All-zero input maps to the uniform simplex.
pub fn stick_breaking(y: &[f64]) -> (Vec<f64>, f64) {
    let k = y.len() + 1;
    let mut x = Vec::with_capacity(k);
    let mut stick = 1.0;
    let mut log_jac = 0.0;
    for (j, &yj) in y.iter().enumerate() {
        let offset = ((k - 1 - j) as f64).ln();
        let z = invlogit(yj - offset);
        let xj = stick * z;
        log_jac += stick.ln() + z.ln() + (1.0 - z).ln();
        x.push(xj);
        stick -= xj;
    }
    x.push(stick.max(0.0));
    (x, log_jac)
}

/// Adds to `gy` the gradient with respect to `y` of `f(stick_breaking(y)) + log_jac(y)`,
/// given `gx = df/dx`.
pub fn stick_breaking_backward(y: &[f64], gx: &[f64], gy: &mut [f64]) {
    let k = y.len() + 1;
    let mut sticks = Vec::with_capacity(k);
    let mut zs = Vec::with_capacity(k - 1);
    let mut stick = 1.0;
    for (j, &yj) in y.iter().enumerate() {
        let offset = ((k - 1 - j) as f64).ln();
        let z = invlogit(yj - offset);
        sticks.push(stick);
        zs.push(z);
        stick -= stick * z;
    }
    // adjoint of the remaining stick length
    let mut adj = gx[k - 1];
    for j in (0..k - 1).rev() {
        let (s, z) = (sticks[j], zs[j]);
        let d_z = (gx[j] - adj) * s + 1.0 / z - 1.0 / (1.0 - z);
        adj = gx[j] * z + adj * (1.0 - z) + 1.0 / s;
        gy[j] += d_z * z * (1.0 - z);
    }
}

pub fn stick_breaking_inverse(x: &[f64]) -> Vec<f64> {
    let k = x.len();
    let mut y = Vec::with_capacity(k.saturating_sub(1));
    let mut stick = 1.0;
    for (j, &xj) in x.iter().take(k.saturating_sub(1)).enumerate() {
        let offset = ((k - 1 - j) as f64).ln();
        let z = (xj / stick).clamp(1e-300, 1.0 - 1e-16);
        y.push(logit(z) + offset);
        stick -= xj;
    }
    y
}

/// Closes `k-1` free coordinates into a length-k vector summing to zero.
pub fn mean_zero_from_free(free: &[f64]) -> Vec<f64> {
    let mut v = free.to_vec();
    v.push(-free.iter().sum::<f64>());
    v
}

/// Maps an unconstrained vector to model parameters plus the log-Jacobian
/// of the transform.
pub fn constrain(layout: &ParamLayout, u: &[f64]) -> Result<(ModelParams, f64)> {
    if u.len() != layout.dim {
        return Err(Error::LengthMismatch { expected: layout.dim, got: u.len() });
    }
    if let Some(idx) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("unconstrained coordinate {idx}")));
    }
    let spec = &layout.spec;
    let s_count = spec.n_states;
    let n = spec.n_sites;
    let mut log_jac = 0.0;

    let mu1 = u[layout.mu1];
    let (mu_last, m) = match layout.gap {
        Some(g) => {
            log_jac += u[g];
            let (inc, lj) = stick_breaking(&u[layout.m.clone()]);
            log_jac += lj;
            let mut m = Vec::with_capacity(s_count);
            m.push(0.0);
            m.extend(inc);
            (mu1 + u[g].exp(), m)
        }
        None => (mu1, vec![0.0]),
    };
    let mu = state_means(mu1, mu_last, &m)?;

    let free = (n - 1) as f64;
    let sigma_lambda = u[layout.sigma_lambda].exp();
    log_jac += u[layout.sigma_lambda] * (1.0 + free);
    let lambda = scaled(mean_zero_from_free(&u[layout.lambda.clone()]), sigma_lambda);
    let sigma_phi: Vec<f64> = u[layout.sigma_phi.clone()].iter().map(|v| v.exp()).collect();
    log_jac += u[layout.sigma_phi.clone()].iter().sum::<f64>();
    let phi = if spec.spatial {
        layout
            .phi
            .iter()
            .enumerate()
            .map(|(s, r)| {
                let k = layout.sigma_index(s);
                log_jac += free * u[layout.sigma_phi.start + k];
                scaled(mean_zero_from_free(&u[r.clone()]), sigma_phi[k])
            })
            .collect()
    } else {
        vec![vec![0.0; n]; s_count]
    };
    let gamma = mean_zero_from_free(&u[layout.gamma.clone()]);

    let (rho, lj) = stick_breaking(&u[layout.rho.clone()]);
    log_jac += lj;
    let mut a = Vec::with_capacity(s_count);
    for r in &layout.a {
        let (row, lj) = stick_breaking(&u[r.clone()]);
        log_jac += lj;
        a.push(row);
    }
    let xi = u[layout.xi.clone()].to_vec();
    let beta = u[layout.beta.clone()].to_vec();

    Ok((ModelParams { mu1, mu_last, m, mu, lambda, sigma_lambda, phi, sigma_phi, gamma, rho, a, xi, beta }, log_jac))
}

/// Inverse of [`constrain`].
pub fn unconstrain(layout: &ParamLayout, p: &ModelParams) -> Result<Vec<f64>> {
    p.validate(&layout.spec)?;
    let mut u = vec![0.0; layout.dim];
    u[layout.mu1] = p.mu1;
    if let Some(g) = layout.gap {
        let gap = p.mu_last - p.mu1;
        if gap <= 0.0 {
            return Err(Error::InvariantViolation("mu_S must exceed mu1 strictly".into()));
        }
        u[g] = gap.ln();
        u[layout.m.clone()].copy_from_slice(&stick_breaking_inverse(&p.m[1..]));
    }
    for (dst, v) in u[layout.lambda.clone()].iter_mut().zip(&p.lambda) {
        *dst = v / p.sigma_lambda;
    }
    for (s, r) in layout.phi.iter().enumerate() {
        let sigma = p.sigma_phi[layout.sigma_index(s)];
        for (dst, v) in u[r.clone()].iter_mut().zip(&p.phi[s]) {
            *dst = v / sigma;
        }
    }
    u[layout.sigma_lambda] = p.sigma_lambda.ln();
    for (k, idx) in layout.sigma_phi.clone().enumerate() {
        u[idx] = p.sigma_phi[k].ln();
    }
    u[layout.gamma.clone()].copy_from_slice(&p.gamma[..N_MONTHS - 1]);
    u[layout.rho.clone()].copy_from_slice(&stick_breaking_inverse(&p.rho));
    for (s, r) in layout.a.iter().enumerate() {
        u[r.clone()].copy_from_slice(&stick_breaking_inverse(&p.a[s]));
    }
    u[layout.xi.clone()].copy_from_slice(&p.xi);
    u[layout.beta.clone()].copy_from_slice(&p.beta);
    Ok(u)
}

/// Gradient of a scalar function with respect to the constrained parameters.
///
/// `mu` holds derivatives with respect to the derived state means; `mu1`,
/// `mu_last` and `m` hold direct derivatives (from the prior). Mean-zero
/// blocks carry derivatives with respect to every full-length entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad {
    pub mu: Vec<f64>,
    pub mu1: f64,
    pub mu_last: f64,
    pub m: Vec<f64>,
    pub lambda: Vec<f64>,
    pub sigma_lambda: f64,
    pub phi: Vec<Vec<f64>>,
    pub sigma_phi: Vec<f64>,
    pub gamma: Vec<f64>,
    pub rho: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub xi: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ParamGrad {
    pub fn zeros(spec: &ModelSpec) -> Self {
        let s_count = spec.n_states;
        let n = spec.n_sites;
        Self {
            mu: vec![0.0; s_count],
            mu1: 0.0,
            mu_last: 0.0,
            m: vec![0.0; s_count],
            lambda: vec![0.0; n],
            sigma_lambda: 0.0,
            phi: vec![vec![0.0; n]; s_count],
            sigma_phi: vec![0.0; spec.n_sigma_phi()],
            gamma: vec![0.0; N_MONTHS],
            rho: vec![0.0; s_count],
            a: vec![vec![0.0; s_count]; s_count],
            xi: vec![0.0; spec.n_missingness()],
            beta: vec![0.0; spec.n_missingness()],
        }
    }

    /// Chains this constrained-space gradient back to the unconstrained
    /// coordinates `u`, adding the gradient of the log-Jacobian.
    pub fn to_unconstrained(&self, layout: &ParamLayout, u: &[f64], p: &ModelParams) -> Vec<f64> {
        let spec = &layout.spec;
        let s_count = spec.n_states;
        let mut g = vec![0.0; layout.dim];

        let mut g_mu1 = self.mu1;
        let mut g_mu_last = self.mu_last;
        let mut g_m = self.m.clone();
        let range = p.mu_last - p.mu1;
        let mut cumulative = 0.0;
        for s in 0..s_count {
            cumulative += p.m[s];
            let c = if s + 1 == s_count && s > 0 { 1.0 } else { cumulative };
            g_mu1 += self.mu[s] * (1.0 - c);
            g_mu_last += self.mu[s] * c;
        }
        // d mu_s / d m_k = range for k <= s
        let mut tail = 0.0;
        for k in (1..s_count).rev() {
            tail += self.mu[k];
            g_m[k] += range * tail;
        }
        match layout.gap {
            Some(gi) => {
                g[layout.mu1] = g_mu1 + g_mu_last;
                g[gi] = g_mu_last * u[gi].exp() + 1.0;
                stick_breaking_backward(&u[layout.m.clone()], &g_m[1..], &mut g[layout.m.clone()]);
            }
            None => g[layout.mu1] = g_mu1 + g_mu_last,
        }

        let free = (spec.n_sites - 1) as f64;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        mean_zero_backward(&self.lambda, &mut g[layout.lambda.clone()]);
        g[layout.lambda.clone()].iter_mut().for_each(|v| *v *= p.sigma_lambda);
        g[layout.sigma_lambda] = self.sigma_lambda * p.sigma_lambda + 1.0 + free + dot(&self.lambda, &p.lambda);
        for (k, idx) in layout.sigma_phi.clone().enumerate() {
            g[idx] = self.sigma_phi[k] * p.sigma_phi[k] + 1.0;
        }
        for (s, r) in layout.phi.iter().enumerate() {
            let k = layout.sigma_index(s);
            mean_zero_backward(&self.phi[s], &mut g[r.clone()]);
            g[r.clone()].iter_mut().for_each(|v| *v *= p.sigma_phi[k]);
            g[layout.sigma_phi.start + k] += free + dot(&self.phi[s], &p.phi[s]);
        }
        mean_zero_backward(&self.gamma, &mut g[layout.gamma.clone()]);
        stick_breaking_backward(&u[layout.rho.clone()], &self.rho, &mut g[layout.rho.clone()]);
        for (s, r) in layout.a.iter().enumerate() {
            stick_breaking_backward(&u[r.clone()], &self.a[s], &mut g[r.clone()]);
        }
        g[layout.xi.clone()].copy_from_slice(&self.xi);
        g[layout.beta.clone()].copy_from_slice(&self.beta);
        g
    }
}

fn scaled(mut v: Vec<f64>, by: f64) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x *= by);
    v
}

fn mean_zero_backward(g_full: &[f64], g_free: &mut [f64]) {
    let last = g_full[g_full.len() - 1];
    for (gf, &gv) in g_free.iter_mut().zip(g_full) {
        *gf = gv - last;
    }
}
