//! Model parameters, their unconstrained parameterization and prior.
//!
//! State indices are zero-based throughout the library; output files use
//! one-based labels.

mod prior;
mod transform;

pub use prior::{log_prior, log_prior_with_grad, Priors};
pub use transform::{
    constrain, mean_zero_from_free, stick_breaking, stick_breaking_backward, stick_breaking_inverse,
    unconstrain, ParamGrad, ParamLayout,
};

use crate::error::{Error, Result};
use crate::math::invlogit;

pub const N_MONTHS: usize = 12;

/// Structural choices that change which parameters exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub n_states: usize,
    pub n_sites: usize,
    /// One ICAR scale shared by all states instead of one per state.
    pub shared_sigma_phi: bool,
    /// Whether the state-dependent missingness submodel is part of the likelihood.
    pub model_missingness: bool,
    /// Whether the state-specific ICAR fields are part of the model.
    pub spatial: bool,
}

impl ModelSpec {
    /// The full model: per-state ICAR scales, missingness submodel, spatial fields.
    pub fn new(n_states: usize, n_sites: usize) -> Self {
        Self { n_states, n_sites, shared_sigma_phi: false, model_missingness: true, spatial: true }
    }

    /// State-independent ICAR scale and no missingness submodel.
    pub fn simpler(n_states: usize, n_sites: usize) -> Self {
        Self { shared_sigma_phi: true, model_missingness: false, ..Self::new(n_states, n_sites) }
    }

    pub fn without_spatial(self) -> Self {
        Self { spatial: false, ..self }
    }

    pub fn n_sigma_phi(&self) -> usize {
        match (self.spatial, self.shared_sigma_phi) {
            (false, _) => 0,
            (true, true) => 1,
            (true, false) => self.n_states,
        }
    }

    pub fn n_missingness(&self) -> usize {
        if self.model_missingness {
            self.n_states
        } else {
            0
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_sites == 0 {
            return Err(Error::Config("model needs at least one state and one site".into()));
        }
        Ok(())
    }
}

/// Constrained model parameters.
///
/// Blocks that a [`ModelSpec`] switches off are stored empty (`xi`, `beta`,
/// `sigma_phi`) or as zeros (`phi`), so the linear predictor can always be
/// evaluated the same way.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub mu1: f64,
    /// Baseline of the last state. Equals `mu1` when there is a single state.
    pub mu_last: f64,
    /// Increment simplex, length S with `m[0] = 0`.
    pub m: Vec<f64>,
    /// Ordered state means derived from `mu1`, `mu_last` and `m`.
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub sigma_lambda: f64,
    /// `phi[s][i]`, each row sums to zero.
    pub phi: Vec<Vec<f64>>,
    pub sigma_phi: Vec<f64>,
    /// Monthly effects, January first, summing to zero.
    pub gamma: Vec<f64>,
    pub rho: Vec<f64>,
    /// `a[s][s']` = P(next = s' | current = s).
    pub a: Vec<Vec<f64>>,
    pub xi: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Ordered state means `mu_s = mu_1 + (mu_S - mu_1) * sum_{k<=s} m_k`.
pub fn state_means(mu1: f64, mu_last: f64, m: &[f64]) -> Result<Vec<f64>> {
    if mu_last < mu1 {
        return Err(Error::OrderViolation { mu1, mu_last });
    }
    if m.is_empty() {
        return Err(Error::LengthMismatch { expected: 1, got: 0 });
    }
    if m[0] != 0.0 {
        return Err(Error::InvariantViolation("m[0] must be fixed to 0".into()));
    }
    if m.len() > 1 {
        let total: f64 = m.iter().sum();
        if (total - 1.0).abs() > 1e-10 || m.iter().any(|&v| v < 0.0) {
            return Err(Error::InvariantViolation(format!("increments do not form a simplex (sum {total})")));
        }
    }
    let s_count = m.len();
    let mut cumulative = 0.0;
    let mut mu = Vec::with_capacity(s_count);
    for (s, &inc) in m.iter().enumerate() {
        cumulative += inc;
        mu.push(if s + 1 == s_count && s > 0 { mu_last } else { mu1 + (mu_last - mu1) * cumulative });
    }
    Ok(mu)
}

/// Recovers the increment simplex from an ordered vector of state means.
pub fn increments_from_means(mu: &[f64]) -> Result<Vec<f64>> {
    let s_count = mu.len();
    if s_count == 0 {
        return Err(Error::LengthMismatch { expected: 1, got: 0 });
    }
    if mu.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::OrderViolation { mu1: mu[0], mu_last: mu[s_count - 1] });
    }
    let mut m = vec![0.0; s_count];
    if s_count == 1 {
        return Ok(m);
    }
    let range = mu[s_count - 1] - mu[0];
    for s in 1..s_count {
        m[s] = if range > 0.0 { (mu[s] - mu[s - 1]) / range } else { 1.0 / (s_count - 1) as f64 };
    }
    Ok(m)
}

impl ModelParams {
    /// A neutral starting point: prior-centred baselines, zero effects,
    /// uniform simplexes and persistent transitions.
    pub fn baseline(spec: &ModelSpec, priors: &Priors) -> Self {
        let s_count = spec.n_states;
        let n = spec.n_sites;
        let mu1 = priors.mu1_mean;
        let mu_last = if s_count > 1 { priors.mu_last_mean.max(mu1 + 0.1) } else { mu1 };
        let m = increments_from_means(&evenly_spaced(mu1, mu_last, s_count)).expect("ordered");
        let mu = state_means(mu1, mu_last, &m).expect("valid increments");
        let a = (0..s_count)
            .map(|s| {
                (0..s_count)
                    .map(|k| {
                        if s_count == 1 {
                            1.0
                        } else if k == s {
                            0.9
                        } else {
                            0.1 / (s_count - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            mu1,
            mu_last,
            m,
            mu,
            lambda: vec![0.0; n],
            sigma_lambda: 0.5,
            phi: vec![vec![0.0; n]; s_count],
            sigma_phi: vec![0.5; spec.n_sigma_phi()],
            gamma: vec![0.0; N_MONTHS],
            rho: vec![1.0 / s_count as f64; s_count],
            a,
            xi: vec![0.0; spec.n_missingness()],
            beta: vec![0.0; spec.n_missingness()],
        }
    }

    /// Builds parameters from explicit state means (ordered), filling the
    /// derived fields `mu1`, `mu_last` and `m`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_means(
        mu: Vec<f64>,
        lambda: Vec<f64>,
        sigma_lambda: f64,
        phi: Vec<Vec<f64>>,
        sigma_phi: Vec<f64>,
        gamma: Vec<f64>,
        rho: Vec<f64>,
        a: Vec<Vec<f64>>,
        xi: Vec<f64>,
        beta: Vec<f64>,
    ) -> Result<Self> {
        let m = increments_from_means(&mu)?;
        Ok(Self {
            mu1: mu[0],
            mu_last: mu[mu.len() - 1],
            m,
            mu,
            lambda,
            sigma_lambda,
            phi,
            sigma_phi,
            gamma,
            rho,
            a,
            xi,
            beta,
        })
    }

    pub fn n_states(&self) -> usize {
        self.mu.len()
    }

    pub fn n_sites(&self) -> usize {
        self.lambda.len()
    }

    /// ICAR scale used by state `s`, if the model has spatial fields.
    pub fn sigma_phi_of(&self, s: usize) -> Option<f64> {
        match self.sigma_phi.len() {
            0 => None,
            1 => Some(self.sigma_phi[0]),
            _ => Some(self.sigma_phi[s]),
        }
    }

    /// Outcome linear predictor `mu_s + lambda_i + phi_{s,i} + gamma_month`.
    #[inline]
    pub fn eta(&self, s: usize, site: usize, month: usize) -> f64 {
        self.mu[s] + self.lambda[site] + self.phi[s][site] + self.gamma[month]
    }

    pub fn outcome_prob(&self, s: usize, site: usize, month: usize) -> f64 {
        invlogit(self.eta(s, site, month))
    }

    /// Missingness linear predictor `xi_s + beta_s * t'`, or `None` without the submodel.
    #[inline]
    pub fn missingness_logit(&self, s: usize, scaled_time: f64) -> Option<f64> {
        if self.xi.is_empty() {
            None
        } else {
            Some(self.xi[s] + self.beta[s] * scaled_time)
        }
    }

    /// Flat `(name, value)` list with one-based indices: scalar and
    /// per-state blocks first, then the per-site blocks `lambda` and `phi`.
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        let s_count = self.n_states();
        for (s, v) in self.mu.iter().enumerate() {
            out.push((format!("mu[{}]", s + 1), *v));
        }
        out.push(("sigma_lambda".to_string(), self.sigma_lambda));
        for (s, v) in self.sigma_phi.iter().enumerate() {
            out.push((format!("sigma_phi[{}]", s + 1), *v));
        }
        for (m, v) in self.gamma.iter().enumerate() {
            out.push((format!("gamma[{}]", m + 1), *v));
        }
        for (s, v) in self.rho.iter().enumerate() {
            out.push((format!("rho[{}]", s + 1), *v));
        }
        for s in 0..s_count {
            for k in 0..s_count {
                out.push((format!("A[{},{}]", s + 1, k + 1), self.a[s][k]));
            }
        }
        for (s, v) in self.xi.iter().enumerate() {
            out.push((format!("xi[{}]", s + 1), *v));
        }
        for (s, v) in self.beta.iter().enumerate() {
            out.push((format!("beta[{}]", s + 1), *v));
        }
        for (i, v) in self.lambda.iter().enumerate() {
            out.push((format!("lambda[{}]", i + 1), *v));
        }
        if !self.sigma_phi.is_empty() {
            for s in 0..s_count {
                for (i, v) in self.phi[s].iter().enumerate() {
                    out.push((format!("phi[{},{}]", s + 1, i + 1), *v));
                }
            }
        }
        out
    }

    /// Inverse of [`Self::named_values`] for the structure given by `spec`.
    pub fn from_named_values(spec: &ModelSpec, values: &[(String, f64)]) -> Result<Self> {
        let lookup: std::collections::HashMap<&str, f64> = values.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let get = |name: String| -> Result<f64> {
            lookup.get(name.as_str()).copied().ok_or_else(|| Error::Config(format!("parameter {name} not found")))
        };
        let s_count = spec.n_states;
        let n = spec.n_sites;
        let vec_of = |prefix: &str, k: usize| -> Result<Vec<f64>> {
            (0..k).map(|j| get(format!("{prefix}[{}]", j + 1))).collect()
        };
        let mu = vec_of("mu", s_count)?;
        let a = (0..s_count)
            .map(|s| (0..s_count).map(|k| get(format!("A[{},{}]", s + 1, k + 1))).collect())
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let phi = if spec.spatial {
            (0..s_count)
                .map(|s| (0..n).map(|i| get(format!("phi[{},{}]", s + 1, i + 1))).collect())
                .collect::<Result<Vec<Vec<f64>>>>()?
        } else {
            vec![vec![0.0; n]; s_count]
        };
        let p = Self::from_means(
            mu,
            vec_of("lambda", n)?,
            get("sigma_lambda".into())?,
            phi,
            vec_of("sigma_phi", spec.n_sigma_phi())?,
            vec_of("gamma", N_MONTHS)?,
            vec_of("rho", s_count)?,
            a,
            vec_of("xi", spec.n_missingness())?,
            vec_of("beta", spec.n_missingness())?,
        )?;
        p.validate(spec)?;
        Ok(p)
    }

    /// Checks every structural invariant against `spec`.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let s_count = spec.n_states;
        let n = spec.n_sites;
        let check_len = |what: &str, got: usize, expected: usize| -> Result<()> {
            if got != expected {
                Err(Error::InvariantViolation(format!("{what} has length {got}, expected {expected}")))
            } else {
                Ok(())
            }
        };
        check_len("mu", self.mu.len(), s_count)?;
        check_len("m", self.m.len(), s_count)?;
        check_len("lambda", self.lambda.len(), n)?;
        check_len("phi", self.phi.len(), s_count)?;
        check_len("sigma_phi", self.sigma_phi.len(), spec.n_sigma_phi())?;
        check_len("gamma", self.gamma.len(), N_MONTHS)?;
        check_len("rho", self.rho.len(), s_count)?;
        check_len("A", self.a.len(), s_count)?;
        check_len("xi", self.xi.len(), spec.n_missingness())?;
        check_len("beta", self.beta.len(), spec.n_missingness())?;

        let all_finite = [self.mu1, self.mu_last, self.sigma_lambda]
            .iter()
            .chain(&self.mu)
            .chain(&self.lambda)
            .chain(self.phi.iter().flatten())
            .chain(&self.sigma_phi)
            .chain(&self.gamma)
            .chain(&self.xi)
            .chain(&self.beta)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::NonFinite("model parameters".into()));
        }

        if self.mu.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvariantViolation("state means are not nondecreasing".into()));
        }
        if self.mu[0] != self.mu1 || (s_count > 1 && self.mu[s_count - 1] != self.mu_last) {
            return Err(Error::InvariantViolation("state mean endpoints differ from mu1/mu_S".into()));
        }
        check_zero_sum("lambda", &self.lambda)?;
        for (s, row) in self.phi.iter().enumerate() {
            check_len("phi row", row.len(), n)?;
            check_zero_sum(&format!("phi[{}]", s + 1), row)?;
            if !spec.spatial && row.iter().any(|&v| v != 0.0) {
                return Err(Error::InvariantViolation("phi must be zero without spatial fields".into()));
            }
        }
        check_zero_sum("gamma", &self.gamma)?;
        check_simplex("rho", &self.rho)?;
        for (s, row) in self.a.iter().enumerate() {
            check_len("A row", row.len(), s_count)?;
            check_simplex(&format!("A[{}]", s + 1), row)?;
        }
        if self.sigma_lambda <= 0.0 || self.sigma_phi.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvariantViolation("scale parameters must be positive".into()));
        }
        Ok(())
    }
}

fn evenly_spaced(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    (0..k).map(|s| lo + (hi - lo) * s as f64 / (k - 1) as f64).collect()
}

fn check_zero_sum(what: &str, v: &[f64]) -> Result<()> {
    let sum: f64 = v.iter().sum();
    let scale = v.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    if sum.abs() > 1e-10 * scale {
        return Err(Error::InvariantViolation(format!("{what} sums to {sum}, expected 0")));
    }
    Ok(())
}

fn check_simplex(what: &str, v: &[f64]) -> Result<()> {
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > 1e-10 || v.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvariantViolation(format!("{what} is not a simplex (sum {sum})")));
    }
    Ok(())
}
