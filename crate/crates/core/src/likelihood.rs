//! Emission terms, the marginal likelihood, ICAR density and log-posterior.
//!
//! The log-posterior is differentiated analytically: the forward-backward
//! pass yields smoothed state marginals and expected transition counts,
//! which are exactly the derivatives of the log-likelihood with respect to
//! the per-time log-emissions and the log transition probabilities.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::NeighborhoodGraph;
use crate::hmm;
use crate::math::{bernoulli_logit_lpmf, log1pexp};
use crate::panel::ObservationPanel;
use crate::params::{
    constrain, log_prior_with_grad, ModelParams, ModelSpec, ParamGrad, ParamLayout, Priors,
};
use crate::sampler::LogDensity;

impl ModelSpec {
    /// Recovers the structural flags implied by a parameter value.
    pub fn infer(p: &ModelParams) -> Self {
        let n_states = p.n_states();
        Self {
            n_states,
            n_sites: p.n_sites(),
            shared_sigma_phi: p.sigma_phi.len() == 1 && n_states > 1,
            model_missingness: !p.xi.is_empty(),
            spatial: !p.sigma_phi.is_empty(),
        }
    }
}

fn check_dims(panel: &ObservationPanel, p: &ModelParams) -> Result<()> {
    if panel.n_sites() != p.n_sites() {
        return Err(Error::LengthMismatch { expected: panel.n_sites(), got: p.n_sites() });
    }
    Ok(())
}

/// Log-probability of all data at time `t` given state `s`.
///
/// Sums the outcome term over observed sites and, when the missingness
/// submodel is present, the missingness term over sites at or after their
/// first observation. Earlier cells contribute nothing.
pub fn emission_logprob(panel: &ObservationPanel, p: &ModelParams, t: usize, s: usize) -> Result<f64> {
    check_dims(panel, p)?;
    if t >= panel.n_times() {
        return Err(Error::IndexOutOfRange { index: t, size: panel.n_times() });
    }
    if s >= p.n_states() {
        return Err(Error::IndexOutOfRange { index: s, size: p.n_states() });
    }
    Ok(emission_at(panel, p, t, s))
}

fn emission_at(panel: &ObservationPanel, p: &ModelParams, t: usize, s: usize) -> f64 {
    let month = panel.month_index(t);
    let base = p.mu[s] + p.gamma[month];
    let phi = &p.phi[s];
    let mut total: f64 = panel
        .observed_at(t)
        .map(|(i, y)| bernoulli_logit_lpmf(y, base + p.lambda[i] + phi[i]))
        .sum();
    if let Some(zeta) = p.missingness_logit(s, panel.scaled_time(t)) {
        let (active, missing) = panel.missingness_counts(t);
        total -= missing as f64 * log1pexp(-zeta) + (active - missing) as f64 * log1pexp(zeta);
    }
    total
}

/// Row-major `T x S` matrix of [`emission_logprob`] values.
pub fn emission_matrix(panel: &ObservationPanel, p: &ModelParams) -> Result<Vec<f64>> {
    check_dims(panel, p)?;
    let s_count = p.n_states();
    let mut out = vec![0.0; panel.n_times() * s_count];
    out.par_chunks_mut(s_count).enumerate().for_each(|(t, row)| {
        for (s, v) in row.iter_mut().enumerate() {
            *v = emission_at(panel, p, t, s);
        }
    });
    Ok(out)
}

/// Marginal log-likelihood `log p(y, r | params)` by the log-space forward recursion.
pub fn forward_loglik(panel: &ObservationPanel, p: &ModelParams) -> Result<f64> {
    let omega = emission_matrix(panel, p)?;
    Ok(hmm::forward_log(&p.rho, &p.a, &omega))
}

/// Same quantity via the scaled-probability forward recursion.
pub fn forward_loglik_scaled(panel: &ObservationPanel, p: &ModelParams) -> Result<f64> {
    let omega = emission_matrix(panel, p)?;
    Ok(hmm::forward_scaled(&p.rho, &p.a, &omega).loglik())
}

/// Rank-(N-1) ICAR log-density on the sum-to-zero subspace, up to a
/// constant that depends only on the graph.
pub fn icar_logpdf(phi_row: &[f64], sigma: f64, graph: &NeighborhoodGraph) -> Result<f64> {
    let sum: f64 = phi_row.iter().sum();
    let scale = phi_row.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    if sum.abs() > 1e-10 * scale {
        return Err(Error::ConstraintViolation(sum));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvariantViolation(format!("ICAR scale must be positive, got {sigma}")));
    }
    let q = graph.quadratic_form(phi_row)?;
    Ok(-((graph.n_sites() - 1) as f64) * sigma.ln() - q / (2.0 * sigma * sigma))
}

fn icar_total(p: &ModelParams, graph: &NeighborhoodGraph) -> Result<f64> {
    let mut total = 0.0;
    for s in 0..p.n_states() {
        if let Some(sigma) = p.sigma_phi_of(s) {
            total += icar_logpdf(&p.phi[s], sigma, graph)?;
        }
    }
    Ok(total)
}

/// `forward_loglik + sum_s icar_logpdf(phi_s) + log_prior`.
pub fn log_posterior(
    panel: &ObservationPanel,
    p: &ModelParams,
    graph: &NeighborhoodGraph,
    priors: &Priors,
) -> Result<f64> {
    let spec = ModelSpec::infer(p);
    p.validate(&spec)?;
    if graph.n_sites() != p.n_sites() {
        return Err(Error::LengthMismatch { expected: graph.n_sites(), got: p.n_sites() });
    }
    Ok(forward_loglik(panel, p)? + icar_total(p, graph)? + log_prior_with_grad(p, &spec, priors, None))
}

/// Emission matrix plus cached outcome probabilities, laid out per time as
/// `S` consecutive runs over that time's observed sites.
struct EmissionCache {
    log_omega: Vec<f64>,
    prob: Vec<f64>,
}

fn emissions_with_cache(panel: &ObservationPanel, p: &ModelParams) -> EmissionCache {
    let s_count = p.n_states();
    let n_times = panel.n_times();
    let mut log_omega = vec![0.0; n_times * s_count];
    let mut prob = vec![0.0; panel.n_observed() * s_count];
    // split the probability buffer into per-time blocks
    let mut blocks: Vec<&mut [f64]> = Vec::with_capacity(n_times);
    let mut rest = prob.as_mut_slice();
    for t in 0..n_times {
        let len = panel.observed_slices(t).0.len() * s_count;
        let (head, tail) = rest.split_at_mut(len);
        blocks.push(head);
        rest = tail;
    }
    log_omega.par_chunks_mut(s_count).zip(blocks.into_par_iter()).enumerate().for_each(
        |(t, (row, block))| {
            let (sites, ys) = panel.observed_slices(t);
            let n_t = sites.len();
            let month = panel.month_index(t);
            let tp = panel.scaled_time(t);
            let (active, missing) = panel.missingness_counts(t);
            for s in 0..s_count {
                let base = p.mu[s] + p.gamma[month];
                let phi = &p.phi[s];
                let probs = &mut block[s * n_t..(s + 1) * n_t];
                let mut total = 0.0;
                for ((&i, &y), pr) in sites.iter().zip(ys).zip(probs.iter_mut()) {
                    let i = i as usize;
                    let eta = base + p.lambda[i] + phi[i];
                    let e = (-eta.abs()).exp();
                    let l = e.ln_1p();
                    let (log_p, log_q, prob_one) =
                        if eta >= 0.0 { (-l, -eta - l, 1.0 / (1.0 + e)) } else { (eta - l, -l, e / (1.0 + e)) };
                    total += if y { log_p } else { log_q };
                    *pr = prob_one;
                }
                if let Some(zeta) = p.missingness_logit(s, tp) {
                    total -= missing as f64 * log1pexp(-zeta) + (active - missing) as f64 * log1pexp(zeta);
                }
                row[s] = total;
            }
        },
    );
    EmissionCache { log_omega, prob }
}

/// The posterior as a differentiable density over the unconstrained space.
#[derive(Debug, Clone)]
pub struct Posterior {
    panel: ObservationPanel,
    graph: NeighborhoodGraph,
    priors: Priors,
    layout: ParamLayout,
}

impl Posterior {
    pub fn new(panel: ObservationPanel, graph: NeighborhoodGraph, spec: ModelSpec, priors: Priors) -> Result<Self> {
        spec.validate()?;
        if panel.n_sites() != spec.n_sites || graph.n_sites() != spec.n_sites {
            return Err(Error::LengthMismatch { expected: spec.n_sites, got: panel.n_sites().min(graph.n_sites()) });
        }
        Ok(Self { panel, graph, priors, layout: ParamLayout::new(spec) })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn spec(&self) -> &ModelSpec {
        self.layout.spec()
    }

    pub fn panel(&self) -> &ObservationPanel {
        &self.panel
    }

    pub fn graph(&self) -> &NeighborhoodGraph {
        &self.graph
    }

    pub fn priors(&self) -> &Priors {
        &self.priors
    }

    pub fn constrain(&self, u: &[f64]) -> Result<ModelParams> {
        Ok(constrain(&self.layout, u)?.0)
    }

    /// Log-posterior of the constrained parameters (no Jacobian).
    pub fn log_posterior(&self, p: &ModelParams) -> Result<f64> {
        p.validate(self.spec())?;
        let omega = emission_matrix(&self.panel, p)?;
        Ok(hmm::forward_log(&p.rho, &p.a, &omega)
            + icar_total(p, &self.graph)?
            + log_prior_with_grad(p, self.spec(), &self.priors, None))
    }

    /// Target density on the unconstrained space: log-posterior plus log-Jacobian.
    pub fn log_density(&self, u: &[f64]) -> Result<f64> {
        let (p, log_jac) = constrain(&self.layout, u)?;
        let omega = emission_matrix(&self.panel, &p)?;
        let ll = hmm::forward_scaled(&p.rho, &p.a, &omega).loglik();
        Ok(ll + icar_total(&p, &self.graph)? + log_prior_with_grad(&p, self.spec(), &self.priors, None) + log_jac)
    }

    /// Target density and its gradient with respect to `u`.
    pub fn log_density_and_grad(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (p, log_jac) = constrain(&self.layout, u)?;
        let spec = *self.spec();
        let s_count = spec.n_states;
        let panel = &self.panel;
        let cache = emissions_with_cache(panel, &p);
        let sm = hmm::forward_backward(&p.rho, &p.a, &cache.log_omega);
        let mut grad = ParamGrad::zeros(&spec);

        // outcome and missingness terms, weighted by smoothed marginals
        let mut offset = 0usize;
        for t in 0..panel.n_times() {
            let (sites, ys) = panel.observed_slices(t);
            let n_t = sites.len();
            let month = panel.month_index(t);
            let tp = panel.scaled_time(t);
            let (active, missing) = panel.missingness_counts(t);
            let weights = sm.at(t);
            for s in 0..s_count {
                let w = weights[s];
                if w == 0.0 {
                    continue;
                }
                let probs = &cache.prob[offset + s * n_t..offset + (s + 1) * n_t];
                let phi_grad = &mut grad.phi[s];
                let mut acc = 0.0;
                for ((&i, &y), &pr) in sites.iter().zip(ys).zip(probs) {
                    let resid = w * (if y { 1.0 } else { 0.0 } - pr);
                    grad.lambda[i as usize] += resid;
                    phi_grad[i as usize] += resid;
                    acc += resid;
                }
                grad.mu[s] += acc;
                grad.gamma[month] += acc;
                if let Some(zeta) = p.missingness_logit(s, tp) {
                    let d = w * (missing as f64 - active as f64 * crate::math::invlogit(zeta));
                    grad.xi[s] += d;
                    grad.beta[s] += d * tp;
                }
            }
            offset += n_t * s_count;
        }
        if !spec.spatial {
            for row in grad.phi.iter_mut() {
                row.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let first = sm.at(0);
        for s in 0..s_count {
            grad.rho[s] += first[s] / p.rho[s];
            for k in 0..s_count {
                if sm.transitions[s][k] > 0.0 {
                    grad.a[s][k] += sm.transitions[s][k] / p.a[s][k];
                }
            }
        }

        // ICAR fields
        let mut icar = 0.0;
        if spec.spatial {
            for s in 0..s_count {
                let sigma = p.sigma_phi_of(s).expect("spatial model has scales");
                let q = self.graph.quadratic_form(&p.phi[s])?;
                let n = spec.n_sites as f64;
                icar += -(n - 1.0) * sigma.ln() - q / (2.0 * sigma * sigma);
                let lap = self.graph.laplacian_mul(&p.phi[s])?;
                for (g, l) in grad.phi[s].iter_mut().zip(lap) {
                    *g -= l / (sigma * sigma);
                }
                let k = if spec.shared_sigma_phi { 0 } else { s };
                grad.sigma_phi[k] += -(n - 1.0) / sigma + q / (sigma * sigma * sigma);
            }
        }

        let lp = log_prior_with_grad(&p, &spec, &self.priors, Some(&mut grad));
        let value = sm.loglik + icar + lp + log_jac;
        if !value.is_finite() {
            return Err(Error::NonFinite("log density".into()));
        }
        let g = grad.to_unconstrained(&self.layout, u, &p);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        Ok((value, g))
    }
}

impl LogDensity for Posterior {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn logp_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        let (v, g) = self.log_density_and_grad(x)?;
        grad.copy_from_slice(&g);
        Ok(v)
    }
}

/// Gradient of the unconstrained target density at `u`.
pub fn grad_log_posterior(posterior: &Posterior, u: &[f64]) -> Result<Vec<f64>> {
    Ok(posterior.log_density_and_grad(u)?.1)
}
