//! Synthetic panels from the full generative model.

use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};

use crate::decode::{StateTrajectory, TrajectoryKind};
use crate::error::{Error, Result};
use crate::graph::NeighborhoodGraph;
use crate::hmm::sample_categorical;
use crate::math::invlogit;
use crate::panel::{Cell, ObservationPanel};
use crate::params::{state_means, ModelParams, ModelSpec, Priors, N_MONTHS};

/// Draws from the rank-(N-1) Gaussian with covariance `sigma^2 (D - W)^+`.
///
/// The eigendecomposition of the graph Laplacian is computed once, in
/// `O(N^3)`, so this is meant for up to roughly a thousand sites.
#[derive(Debug, Clone)]
pub struct IcarSampler {
    /// Eigenvectors scaled by `1 / sqrt(eigenvalue)`, null direction dropped.
    factors: Vec<DVector<f64>>,
    n_sites: usize,
}

impl IcarSampler {
    pub fn new(graph: &NeighborhoodGraph) -> Self {
        let eig = SymmetricEigen::new(graph.dense_laplacian());
        let mut pairs: Vec<(f64, DVector<f64>)> =
            eig.eigenvalues.iter().zip(eig.eigenvectors.column_iter()).map(|(&l, v)| (l, v.into_owned())).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // connected graph: exactly one zero eigenvalue, the constant vector
        let factors = pairs.into_iter().skip(1).map(|(l, v)| v / l.sqrt()).collect();
        Self { factors, n_sites: graph.n_sites() }
    }

    pub fn sample<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Vec<f64> {
        let mut phi = DVector::zeros(self.n_sites);
        if sigma != 0.0 {
            for f in &self.factors {
                let z: f64 = rng.sample(StandardNormal);
                phi.axpy(sigma * z, f, 1.0);
            }
        }
        let mean = phi.mean();
        phi.iter().map(|v| v - mean).collect()
    }

    /// `(D - W)^+`, the covariance of a unit-scale draw.
    pub fn pseudo_inverse(&self) -> Vec<Vec<f64>> {
        let n = self.n_sites;
        let mut out = vec![vec![0.0; n]; n];
        for f in &self.factors {
            for i in 0..n {
                for j in 0..n {
                    out[i][j] += f[i] * f[j];
                }
            }
        }
        out
    }
}

/// One mean-zero ICAR field over `graph` with scale `sigma`.
pub fn sample_icar_field<R: Rng + ?Sized>(graph: &NeighborhoodGraph, sigma: f64, rng: &mut R) -> Vec<f64> {
    IcarSampler::new(graph).sample(sigma, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingnessRegime {
    /// Every cell from a site's start onward is observed.
    None,
    /// Cells go missing with probability `invlogit(xi_s + beta_s t')`.
    StateDependent,
}

#[derive(Debug, Clone)]
pub struct SimulationScenario {
    pub params: ModelParams,
    pub graph: NeighborhoodGraph,
    pub n_times: usize,
    /// Calendar month (1..=12) of the first time point.
    pub start_month: u8,
    pub missingness: MissingnessRegime,
    /// Per-site number of leading time points forced missing; empty for none.
    pub blackout: Vec<usize>,
    pub seed: u64,
}

impl SimulationScenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.n_times == 0 {
            return bad("n_times must be positive".into());
        }
        if self.graph.n_sites() != self.params.n_sites() {
            return bad(format!("graph has {} sites, params have {}", self.graph.n_sites(), self.params.n_sites()));
        }
        if !(1..=12).contains(&self.start_month) {
            return bad(format!("start month {} outside 1..=12", self.start_month));
        }
        if self.missingness == MissingnessRegime::StateDependent && self.params.xi.is_empty() {
            return bad("state-dependent missingness needs xi and beta".into());
        }
        if !self.blackout.is_empty() && self.blackout.len() != self.params.n_sites() {
            return bad(format!("blackout has {} entries for {} sites", self.blackout.len(), self.params.n_sites()));
        }
        self.params
            .validate(&ModelSpec::infer(&self.params))
            .map_err(|e| Error::InvalidScenario(format!("invalid parameters: {e}")))
    }
}

/// Samples a hidden path and a panel. The returned trajectory is the truth.
pub fn simulate_panel(scn: &SimulationScenario) -> Result<(ObservationPanel, StateTrajectory)> {
    scn.validate()?;
    let p = &scn.params;
    let mut rng = ChaCha8Rng::seed_from_u64(scn.seed);
    let t_count = scn.n_times;
    let n = p.n_sites();
    let mut states = Vec::with_capacity(t_count);
    states.push(sample_categorical(&p.rho, &mut rng));
    for t in 1..t_count {
        states.push(sample_categorical(&p.a[states[t - 1]], &mut rng));
    }
    let mut cells = vec![Cell::Missing; n * t_count];
    for (t, &s) in states.iter().enumerate() {
        let month = (scn.start_month as usize - 1 + t) % N_MONTHS;
        let tp = if t_count > 1 { t as f64 / (t_count - 1) as f64 } else { 0.0 };
        let q_missing = match scn.missingness {
            MissingnessRegime::None => 0.0,
            MissingnessRegime::StateDependent => invlogit(p.xi[s] + p.beta[s] * tp),
        };
        for i in 0..n {
            if scn.blackout.get(i).is_some_and(|&b| t < b) {
                continue;
            }
            if rng.random::<f64>() < q_missing {
                continue;
            }
            cells[i * t_count + t] =
                if rng.random::<f64>() < p.outcome_prob(s, i, month) { Cell::One } else { Cell::Zero };
        }
    }
    let panel = ObservationPanel::new(n, t_count, cells, scn.start_month)?;
    Ok((panel, StateTrajectory { states, kind: TrajectoryKind::Sampled }))
}

fn centered(mut v: Vec<f64>) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
    v
}

fn dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let x: Vec<f64> = alpha.iter().map(|&a| Gamma::new(a, 1.0).expect("positive").sample(rng)).collect();
    let total: f64 = x.iter().sum();
    x.into_iter().map(|v| v / total).collect()
}

/// Draws a full parameter set from the prior.
pub fn sample_prior_params<R: Rng + ?Sized>(
    spec: &ModelSpec,
    priors: &Priors,
    graph: &NeighborhoodGraph,
    rng: &mut R,
) -> Result<ModelParams> {
    spec.validate()?;
    let s_count = spec.n_states;
    let n = spec.n_sites;
    let normal = |m: f64, s: f64, rng: &mut R| Normal::new(m, s).expect("positive sd").sample(rng);
    let half_normal = |s: f64, rng: &mut R| normal(0.0, s, rng).abs();
    let mu1 = normal(priors.mu1_mean, priors.mu1_sd, rng);
    let mu_last = if s_count > 1 {
        // truncated below at mu1, by rejection
        loop {
            let v = normal(priors.mu_last_mean, priors.mu_last_sd, rng);
            if v > mu1 {
                break v;
            }
        }
    } else {
        mu1
    };
    let mut m = vec![0.0; s_count];
    if s_count > 1 {
        let inc = dirichlet(&vec![priors.increment_concentration; s_count - 1], rng);
        m[1..].copy_from_slice(&inc);
    }
    let mu = state_means(mu1, mu_last, &m)?;
    let sigma_lambda = half_normal(priors.scale_sd, rng);
    let lambda = centered((0..n).map(|_| normal(0.0, sigma_lambda.max(1e-300), rng)).collect());
    let sigma_phi: Vec<f64> = (0..spec.n_sigma_phi()).map(|_| half_normal(priors.scale_sd, rng)).collect();
    let phi = if spec.spatial {
        let sampler = IcarSampler::new(graph);
        (0..s_count).map(|s| sampler.sample(sigma_phi[if sigma_phi.len() == 1 { 0 } else { s }], rng)).collect()
    } else {
        vec![vec![0.0; n]; s_count]
    };
    let gamma = centered((0..N_MONTHS).map(|_| normal(0.0, priors.gamma_sd, rng)).collect());
    let rho = dirichlet(&vec![priors.rho_concentration; s_count], rng);
    let a = (0..s_count)
        .map(|s| {
            let alpha: Vec<f64> = (0..s_count).map(|k| priors.transition_concentration(s_count, s, k)).collect();
            dirichlet(&alpha, rng)
        })
        .collect();
    let k = spec.n_missingness();
    let xi = (0..k).map(|_| normal(0.0, priors.missingness_sd, rng)).collect();
    let beta = (0..k).map(|_| normal(0.0, priors.missingness_sd, rng)).collect();
    Ok(ModelParams { mu1, mu_last, m, mu, lambda, sigma_lambda, phi, sigma_phi, gamma, rho, a, xi, beta })
}

/// Hand-set truth for recovery experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSpec {
    /// Ordered state means.
    pub means: Vec<f64>,
    pub self_transition: f64,
    pub sigma_lambda: f64,
    /// One scale (shared) or one per state; empty for no spatial field.
    pub sigma_phi: Vec<f64>,
    /// Amplitude of a cosine seasonal term peaking in `peak_month` (1..=12).
    pub seasonal_amplitude: f64,
    pub peak_month: usize,
    /// Empty for no missingness submodel.
    pub xi: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Builds parameters from `truth`, drawing the site effects at random.
pub fn draw_truth<R: Rng + ?Sized>(truth: &TruthSpec, graph: &NeighborhoodGraph, rng: &mut R) -> Result<ModelParams> {
    let s_count = truth.means.len();
    let n = graph.n_sites();
    if s_count == 0 {
        return Err(Error::InvalidScenario("need at least one state".into()));
    }
    let lambda = centered((0..n).map(|_| truth.sigma_lambda * rng.sample::<f64, _>(StandardNormal)).collect());
    let phi = if truth.sigma_phi.is_empty() {
        vec![vec![0.0; n]; s_count]
    } else {
        let sampler = IcarSampler::new(graph);
        (0..s_count)
            .map(|s| sampler.sample(truth.sigma_phi[if truth.sigma_phi.len() == 1 { 0 } else { s }], rng))
            .collect()
    };
    let gamma = centered(
        (0..N_MONTHS)
            .map(|m| {
                let angle = 2.0 * std::f64::consts::PI * (m as f64 - (truth.peak_month as f64 - 1.0)) / N_MONTHS as f64;
                truth.seasonal_amplitude * angle.cos()
            })
            .collect(),
    );
    let a = (0..s_count)
        .map(|s| {
            (0..s_count)
                .map(|k| {
                    if s_count == 1 {
                        1.0
                    } else if k == s {
                        truth.self_transition
                    } else {
                        (1.0 - truth.self_transition) / (s_count - 1) as f64
                    }
                })
                .collect()
        })
        .collect();
    let p = ModelParams::from_means(
        truth.means.clone(),
        lambda,
        truth.sigma_lambda,
        phi,
        truth.sigma_phi.clone(),
        gamma,
        vec![1.0 / s_count as f64; s_count],
        a,
        truth.xi.clone(),
        truth.beta.clone(),
    )?;
    p.validate(&ModelSpec::infer(&p)).map_err(|e| Error::InvalidScenario(e.to_string()))?;
    Ok(p)
}
