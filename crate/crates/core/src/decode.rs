//! Hidden-state inference: smoothed marginals, Viterbi paths and FFBS draws.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hmm;
use crate::likelihood::emission_matrix;
use crate::panel::ObservationPanel;
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    Viterbi,
    Sampled,
    Modal,
}

/// A hidden-state path. States are zero-based; [`Self::one_based`] gives the
/// labels used in output files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateTrajectory {
    pub states: Vec<usize>,
    pub kind: TrajectoryKind,
}

impl StateTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.states.iter().map(|s| s + 1).collect()
    }
}

/// Row-major `T x S` matrix of state probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct StateProbabilities {
    pub n_states: usize,
    pub probs: Vec<f64>,
}

impl StateProbabilities {
    pub fn n_times(&self) -> usize {
        self.probs.len() / self.n_states
    }

    pub fn at(&self, t: usize) -> &[f64] {
        &self.probs[t * self.n_states..(t + 1) * self.n_states]
    }

    /// Most probable state at `t` (lowest index on ties) and its probability.
    pub fn modal(&self, t: usize) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (s, &v) in self.at(t).iter().enumerate() {
            if v > best.1 {
                best = (s, v);
            }
        }
        best
    }
}

/// `P(x_t = s | data, p)` for every time and state.
pub fn smoothed_marginals(panel: &ObservationPanel, p: &ModelParams) -> Result<StateProbabilities> {
    let omega = emission_matrix(panel, p)?;
    let sm = hmm::forward_backward(&p.rho, &p.a, &omega);
    Ok(StateProbabilities { n_states: p.n_states(), probs: sm.gamma })
}

pub fn viterbi(panel: &ObservationPanel, p: &ModelParams) -> Result<StateTrajectory> {
    let omega = emission_matrix(panel, p)?;
    Ok(StateTrajectory { states: hmm::viterbi(&p.rho, &p.a, &omega), kind: TrajectoryKind::Viterbi })
}

/// Joint log-probability of `path` and the data under `p`.
pub fn path_log_prob(panel: &ObservationPanel, p: &ModelParams, path: &StateTrajectory) -> Result<f64> {
    if path.len() != panel.n_times() {
        return Err(Error::LengthMismatch { expected: panel.n_times(), got: path.len() });
    }
    let omega = emission_matrix(panel, p)?;
    Ok(hmm::path_log_prob(&p.rho, &p.a, &omega, &path.states))
}

/// An exact draw from `P(x_{1:T} | data, p)` by forward filtering, backward sampling.
pub fn sample_trajectory<R: Rng + ?Sized>(
    panel: &ObservationPanel,
    p: &ModelParams,
    rng: &mut R,
) -> Result<StateTrajectory> {
    let omega = emission_matrix(panel, p)?;
    Ok(StateTrajectory { states: hmm::ffbs(&p.rho, &p.a, &omega, rng), kind: TrajectoryKind::Sampled })
}

/// Per-time modal state of the draw-averaged smoothed marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalSequence {
    pub marginals: StateProbabilities,
    pub states: Vec<usize>,
    pub probs: Vec<f64>,
}

impl ModalSequence {
    pub fn trajectory(&self) -> StateTrajectory {
        StateTrajectory { states: self.states.clone(), kind: TrajectoryKind::Modal }
    }
}

/// Averages smoothed marginals over posterior draws and reports the per-time
/// argmax with its averaged probability.
pub fn map_state_sequence(draws: &[ModelParams], panel: &ObservationPanel) -> Result<ModalSequence> {
    let first = draws.first().ok_or_else(|| Error::DegenerateInput("no posterior draws".into()))?;
    let s_count = first.n_states();
    let sum = draws
        .par_iter()
        .map(|p| smoothed_marginals(panel, p).map(|m| m.probs))
        .try_reduce(
            || vec![0.0; panel.n_times() * s_count],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let k = draws.len() as f64;
    let marginals = StateProbabilities { n_states: s_count, probs: sum.into_iter().map(|v| v / k).collect() };
    let (states, probs) = (0..panel.n_times()).map(|t| marginals.modal(t)).unzip();
    Ok(ModalSequence { marginals, states, probs })
}
