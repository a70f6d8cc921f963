use super::{ModelParams, ModelSpec, ParamGrad};
use crate::error::Result;
use crate::math::{d_log_normal_ccdf, dirichlet_lpdf, log_normal_ccdf, normal_lpdf, LN_SQRT_2PI};

/// Prior hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    pub mu1_mean: f64,
    pub mu1_sd: f64,
    /// `mu_S` is normal with these moments, truncated below at `mu1`.
    pub mu_last_mean: f64,
    pub mu_last_sd: f64,
    pub increment_concentration: f64,
    /// Scale of the half-normal priors on `sigma_lambda` and `sigma_phi`.
    pub scale_sd: f64,
    pub gamma_sd: f64,
    pub rho_concentration: f64,
    /// Diagonal Dirichlet weight of each transition row; `None` means `2S`.
    pub transition_diagonal: Option<f64>,
    pub transition_off_diagonal: f64,
    /// Normal scale for the missingness coefficients `xi` and `beta`.
    pub missingness_sd: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            mu1_mean: -4.5,
            mu1_sd: 0.25,
            mu_last_mean: -1.75,
            mu_last_sd: 0.5,
            increment_concentration: 5.0,
            scale_sd: 1.0,
            gamma_sd: 1.0,
            rho_concentration: 1.0,
            transition_diagonal: None,
            transition_off_diagonal: 0.5,
            missingness_sd: 5.0,
        }
    }
}

impl Priors {
    pub fn transition_concentration(&self, n_states: usize, from: usize, to: usize) -> f64 {
        if from == to {
            self.transition_diagonal.unwrap_or(2.0 * n_states as f64)
        } else {
            self.transition_off_diagonal
        }
    }
}

fn half_normal_lpdf(x: f64, sd: f64) -> f64 {
    std::f64::consts::LN_2 + normal_lpdf(x, 0.0, sd)
}

/// Density of a length-k mean-zero vector built from iid `N(0, sd^2)`
/// entries conditioned on their sum being zero (rank k-1).
fn mean_zero_normal_lpdf(v: &[f64], sd: f64) -> f64 {
    let k = v.len() as f64;
    let ss: f64 = v.iter().map(|x| x * x).sum();
    -(k - 1.0) * (sd.ln() + LN_SQRT_2PI) - ss / (2.0 * sd * sd)
}

/// Log prior density of everything except the ICAR fields, whose density
/// is added once by the posterior.
pub fn log_prior(p: &ModelParams, spec: &ModelSpec, priors: &Priors) -> Result<f64> {
    p.validate(spec)?;
    Ok(log_prior_with_grad(p, spec, priors, None))
}

/// [`log_prior`] without validation, optionally accumulating its gradient
/// with respect to the constrained parameters.
pub fn log_prior_with_grad(
    p: &ModelParams,
    spec: &ModelSpec,
    priors: &Priors,
    mut grad: Option<&mut ParamGrad>,
) -> f64 {
    let s_count = spec.n_states;
    let mut lp = normal_lpdf(p.mu1, priors.mu1_mean, priors.mu1_sd);
    if let Some(g) = grad.as_deref_mut() {
        g.mu1 -= (p.mu1 - priors.mu1_mean) / (priors.mu1_sd * priors.mu1_sd);
    }

    if s_count > 1 {
        let z_trunc = (p.mu1 - priors.mu_last_mean) / priors.mu_last_sd;
        lp += normal_lpdf(p.mu_last, priors.mu_last_mean, priors.mu_last_sd) - log_normal_ccdf(z_trunc);
        let alpha = vec![priors.increment_concentration; s_count - 1];
        lp += dirichlet_lpdf(&p.m[1..], &alpha);
        if let Some(g) = grad.as_deref_mut() {
            g.mu_last -= (p.mu_last - priors.mu_last_mean) / (priors.mu_last_sd * priors.mu_last_sd);
            g.mu1 -= d_log_normal_ccdf(z_trunc) / priors.mu_last_sd;
            for k in 1..s_count {
                g.m[k] += (priors.increment_concentration - 1.0) / p.m[k];
            }
        }
    }

    lp += half_normal_lpdf(p.sigma_lambda, priors.scale_sd);
    let sl = p.sigma_lambda;
    lp += mean_zero_normal_lpdf(&p.lambda, sl);
    if let Some(g) = grad.as_deref_mut() {
        let ss: f64 = p.lambda.iter().map(|x| x * x).sum();
        let k = p.lambda.len() as f64;
        g.sigma_lambda += -sl / (priors.scale_sd * priors.scale_sd) - (k - 1.0) / sl + ss / (sl * sl * sl);
        for (gi, &li) in g.lambda.iter_mut().zip(&p.lambda) {
            *gi -= li / (sl * sl);
        }
    }

    for (k, &sp) in p.sigma_phi.iter().enumerate() {
        lp += half_normal_lpdf(sp, priors.scale_sd);
        if let Some(g) = grad.as_deref_mut() {
            g.sigma_phi[k] -= sp / (priors.scale_sd * priors.scale_sd);
        }
    }

    lp += mean_zero_normal_lpdf(&p.gamma, priors.gamma_sd);
    if let Some(g) = grad.as_deref_mut() {
        for (gm, &v) in g.gamma.iter_mut().zip(&p.gamma) {
            *gm -= v / (priors.gamma_sd * priors.gamma_sd);
        }
    }

    let rho_alpha = vec![priors.rho_concentration; s_count];
    lp += dirichlet_lpdf(&p.rho, &rho_alpha);
    for (s, row) in p.a.iter().enumerate() {
        let alpha: Vec<f64> = (0..s_count).map(|k| priors.transition_concentration(s_count, s, k)).collect();
        lp += dirichlet_lpdf(row, &alpha);
        if let Some(g) = grad.as_deref_mut() {
            for k in 0..s_count {
                g.a[s][k] += (alpha[k] - 1.0) / row[k];
            }
        }
    }
    if let Some(g) = grad.as_deref_mut() {
        for k in 0..s_count {
            g.rho[k] += (priors.rho_concentration - 1.0) / p.rho[k];
        }
    }

    let msd = priors.missingness_sd;
    for s in 0..p.xi.len() {
        lp += normal_lpdf(p.xi[s], 0.0, msd) + normal_lpdf(p.beta[s], 0.0, msd);
        if let Some(g) = grad.as_deref_mut() {
            g.xi[s] -= p.xi[s] / (msd * msd);
            g.beta[s] -= p.beta[s] / (msd * msd);
        }
    }
    lp
}
