//! Posterior-predictive and posterior-summary computations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decode::StateTrajectory;
use crate::error::{Error, Result};
use crate::math::{invlogit, mean, quantile};
use crate::panel::ObservationPanel;
use crate::params::{ModelParams, N_MONTHS};

/// Posterior mean and central 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn from_values(values: &[f64]) -> Self {
        Self { mean: mean(values), lower: quantile(values, 0.025), upper: quantile(values, 0.975) }
    }
}

/// Nationwide posterior-predictive proportion of sites with `y = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSeries {
    pub predicted: Vec<Interval>,
    /// Observed proportion over non-missing sites; `None` when nothing was observed.
    pub observed: Vec<Option<f64>>,
}

fn check_trajectories(draws: &[ModelParams], trajectories: &[StateTrajectory], n_times: usize) -> Result<()> {
    for d in 0..draws.len() {
        match trajectories.get(d) {
            Some(tr) if tr.len() == n_times => {}
            _ => return Err(Error::MissingTrajectory(d)),
        }
    }
    Ok(())
}

/// Observed proportion of ones among the observed sites at each time.
pub fn observed_proportion(panel: &ObservationPanel) -> Vec<Option<f64>> {
    (0..panel.n_times())
        .map(|t| {
            let obs = panel.observed_at(t);
            let n = obs.len();
            let ones = obs.filter(|(_, y)| *y).count();
            (n > 0).then(|| ones as f64 / n as f64)
        })
        .collect()
}

/// For each draw, samples `replications` Bernoulli panels over all sites
/// under that draw's paired state trajectory and averages the site
/// proportion; then summarizes across draws.
pub fn predictive_proportion(
    draws: &[ModelParams],
    panel: &ObservationPanel,
    trajectories: &[StateTrajectory],
    replications: usize,
    seed: u64,
) -> Result<PredictiveSeries> {
    let n_times = panel.n_times();
    check_trajectories(draws, trajectories, n_times)?;
    if draws.is_empty() || replications == 0 {
        return Err(Error::DegenerateInput("need at least one draw and one replication".into()));
    }
    let n_sites = panel.n_sites();
    let per_draw: Vec<Vec<f64>> = draws
        .par_iter()
        .zip(trajectories)
        .enumerate()
        .map(|(d, (p, tr))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(d as u64);
            (0..n_times)
                .map(|t| {
                    let s = tr.states[t];
                    let month = panel.month_index(t);
                    let mut ones = 0usize;
                    for _ in 0..replications {
                        for i in 0..n_sites {
                            if rng.random::<f64>() < p.outcome_prob(s, i, month) {
                                ones += 1;
                            }
                        }
                    }
                    ones as f64 / (n_sites * replications) as f64
                })
                .collect()
        })
        .collect();
    let predicted = (0..n_times)
        .map(|t| {
            let column: Vec<f64> = per_draw.iter().map(|row| row[t]).collect();
            Interval::from_values(&column)
        })
        .collect();
    Ok(PredictiveSeries { predicted, observed: observed_proportion(panel) })
}

/// Per-site average outcome probability in one state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMap {
    pub state: usize,
    pub values: Vec<f64>,
    /// Sites with no observation at any of the assigned times.
    pub unobserved: Vec<bool>,
    pub n_assigned: usize,
}

/// Averages `invlogit(mu_s + lambda_i + phi_{s,i} + gamma_month)` over the
/// (draw, time) pairs whose trajectory is in state `state`.
pub fn state_probability_map(
    draws: &[ModelParams],
    trajectories: &[StateTrajectory],
    panel: &ObservationPanel,
    state: usize,
) -> Result<StateMap> {
    let n_times = panel.n_times();
    check_trajectories(draws, trajectories, n_times)?;
    let n_sites = panel.n_sites();
    let mut sums = vec![0.0; n_sites];
    let mut count = 0usize;
    let mut assigned_times = vec![false; n_times];
    for (p, tr) in draws.iter().zip(trajectories) {
        for (t, &s) in tr.states.iter().enumerate() {
            if s != state {
                continue;
            }
            assigned_times[t] = true;
            count += 1;
            let month = panel.month_index(t);
            for (i, v) in sums.iter_mut().enumerate() {
                *v += p.outcome_prob(state, i, month);
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyState(state));
    }
    let mut unobserved = vec![true; n_sites];
    for (t, _) in assigned_times.iter().enumerate().filter(|(_, a)| **a) {
        for (i, _) in panel.observed_at(t) {
            unobserved[i] = false;
        }
    }
    Ok(StateMap {
        state,
        values: sums.into_iter().map(|v| v / count as f64).collect(),
        unobserved,
        n_assigned: count,
    })
}

/// Probability of a cell being missing in state `s` over time.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingnessCurve {
    pub state: usize,
    pub points: Vec<Interval>,
}

/// Per-state `invlogit(xi_s + beta_s t')` curves with 95% bands across draws.
/// Empty when the model has no missingness submodel.
pub fn missingness_curve(draws: &[ModelParams], n_times: usize) -> Vec<MissingnessCurve> {
    let Some(first) = draws.first() else { return Vec::new() };
    if first.xi.is_empty() {
        return Vec::new();
    }
    let scaled = |t: usize| if n_times > 1 { t as f64 / (n_times - 1) as f64 } else { 0.0 };
    (0..first.n_states())
        .map(|s| {
            let points = (0..n_times)
                .map(|t| {
                    let tp = scaled(t);
                    let values: Vec<f64> = draws.iter().map(|p| invlogit(p.xi[s] + p.beta[s] * tp)).collect();
                    Interval::from_values(&values)
                })
                .collect();
            MissingnessCurve { state: s, points }
        })
        .collect()
}

/// Observed and model-implied outcome and missingness rates for the times
/// assigned to one state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSummaryRow {
    pub state: usize,
    pub n_times: usize,
    pub observed_outcome: Option<f64>,
    /// Mean and 2.5%/97.5% quantiles across cells of each cell's posterior-mean probability.
    pub model_outcome: Option<Interval>,
    pub observed_missing: Option<f64>,
    pub model_missing: Option<Interval>,
}

/// Summary table conditioned on a per-time state assignment (normally the
/// modal sequence). States never assigned get a row with `None` entries.
pub fn state_summary_table(
    draws: &[ModelParams],
    assignment: &StateTrajectory,
    panel: &ObservationPanel,
) -> Result<Vec<StateSummaryRow>> {
    let first = draws.first().ok_or_else(|| Error::DegenerateInput("no posterior draws".into()))?;
    if assignment.len() != panel.n_times() {
        return Err(Error::LengthMismatch { expected: panel.n_times(), got: assignment.len() });
    }
    let k = draws.len() as f64;
    let rows = (0..first.n_states())
        .map(|s| {
            let times: Vec<usize> = (0..panel.n_times()).filter(|&t| assignment.states[t] == s).collect();
            let mut ones = 0usize;
            let mut observed = 0usize;
            let mut cell_probs = Vec::new();
            let mut active = 0usize;
            let mut missing = 0usize;
            let mut cell_missing = Vec::new();
            for &t in &times {
                let month = panel.month_index(t);
                let tp = panel.scaled_time(t);
                for (i, y) in panel.observed_at(t) {
                    observed += 1;
                    ones += usize::from(y);
                    cell_probs.push(draws.iter().map(|p| p.outcome_prob(s, i, month)).sum::<f64>() / k);
                }
                let (a, m) = panel.missingness_counts(t);
                active += a as usize;
                missing += m as usize;
                if !first.xi.is_empty() && a > 0 {
                    let q = draws.iter().map(|p| invlogit(p.xi[s] + p.beta[s] * tp)).sum::<f64>() / k;
                    cell_missing.extend(std::iter::repeat_n(q, a as usize));
                }
            }
            let summarize = |v: &[f64]| (!v.is_empty()).then(|| Interval::from_values(v));
            StateSummaryRow {
                state: s,
                n_times: times.len(),
                observed_outcome: (observed > 0).then(|| ones as f64 / observed as f64),
                model_outcome: summarize(&cell_probs),
                observed_missing: (active > 0).then(|| missing as f64 / active as f64),
                model_missing: summarize(&cell_missing),
            }
        })
        .collect();
    Ok(rows)
}

/// Posterior summary of one monthly seasonal effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeasonalRow {
    /// Calendar month, 1 = January.
    pub month: usize,
    pub mean: f64,
    pub q025: f64,
    pub q25: f64,
    pub q75: f64,
    pub q975: f64,
}

pub fn seasonal_summary(draws: &[ModelParams]) -> Vec<SeasonalRow> {
    if draws.is_empty() {
        return Vec::new();
    }
    (0..N_MONTHS)
        .map(|m| {
            let v: Vec<f64> = draws.iter().map(|p| p.gamma[m]).collect();
            SeasonalRow {
                month: m + 1,
                mean: mean(&v),
                q025: quantile(&v, 0.025),
                q25: quantile(&v, 0.25),
                q75: quantile(&v, 0.75),
                q975: quantile(&v, 0.975),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::TrajectoryKind;
    use crate::likelihood::tests::{random_panel, random_params};
    use crate::params::{ModelSpec, Priors};

    fn zero_params(s: usize, n: usize) -> ModelParams {
        let spec = ModelSpec::simpler(s, n);
        let mut p = ModelParams::baseline(&spec, &Priors::default());
        p.mu = vec![0.0; s];
        p.mu1 = 0.0;
        p.mu_last = 0.0;
        p
    }

    fn constant(state: usize, t: usize) -> StateTrajectory {
        StateTrajectory { states: vec![state; t], kind: TrajectoryKind::Sampled }
    }

    #[test]
    fn half_probability_gives_half_proportion() {
        let n = 400;
        let rows: Vec<Vec<Option<bool>>> = (0..n).map(|_| vec![Some(true); 5]).collect();
        let panel = ObservationPanel::from_rows(&rows, 1).unwrap();
        let draws = vec![zero_params(1, n); 20];
        let trs = vec![constant(0, 5); 20];
        let series = predictive_proportion(&draws, &panel, &trs, 1, 3).unwrap();
        let se = (0.25 / n as f64).sqrt();
        for iv in &series.predicted {
            assert!((iv.mean - 0.5).abs() < 4.0 * se / (20f64).sqrt() + 1e-12);
            assert!(iv.lower <= iv.mean && iv.mean <= iv.upper);
        }
        assert_eq!(series.observed, vec![Some(1.0); 5]);
    }

    #[test]
    fn certain_zero_probability() {
        let mut p = zero_params(1, 3);
        p.mu = vec![-800.0];
        let panel = ObservationPanel::from_rows(&[vec![None], vec![None], vec![None]], 1).unwrap();
        let s = predictive_proportion(&[p], &panel, &[constant(0, 1)], 4, 1).unwrap();
        assert_eq!(s.predicted[0].mean, 0.0);
        assert_eq!(s.observed, vec![None]);
    }

    #[test]
    fn missing_trajectory_is_reported() {
        let panel = ObservationPanel::from_rows(&[vec![None, None]], 1).unwrap();
        let draws = vec![zero_params(1, 1); 2];
        let err = predictive_proportion(&draws, &panel, &[constant(0, 2)], 1, 1).unwrap_err();
        assert!(matches!(err, Error::MissingTrajectory(1)));
    }

    #[test]
    fn replication_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let panel = random_panel(&mut rng, 6, 4, 0.2);
        let spec = ModelSpec::new(2, 6);
        let draws: Vec<ModelParams> = (0..30).map(|_| random_params(&mut rng, spec)).collect();
        let trs: Vec<StateTrajectory> = (0..30)
            .map(|_| StateTrajectory {
                states: (0..4).map(|_| rng.random_range(0..2)).collect(),
                kind: TrajectoryKind::Sampled,
            })
            .collect();
        let series = predictive_proportion(&draws, &panel, &trs, 10, 8).unwrap();
        for t in 0..4 {
            // the exact per-draw expectation, averaged over draws
            let exact: f64 = draws
                .iter()
                .zip(&trs)
                .map(|(p, tr)| (0..6).map(|i| p.outcome_prob(tr.states[t], i, panel.month_index(t))).sum::<f64>() / 6.0)
                .sum::<f64>()
                / 30.0;
            let se = (0.25 / (6.0 * 10.0 * 30.0) as f64).sqrt();
            assert!((series.predicted[t].mean - exact).abs() < 4.0 * se, "t={t}");
        }
    }

    #[test]
    fn state_map_single_time_without_season() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = ModelSpec::new(2, 4);
        let mut p = random_params(&mut rng, spec);
        p.gamma = vec![0.0; 12];
        let panel = ObservationPanel::from_rows(&[vec![Some(true)], vec![None], vec![Some(false)], vec![None]], 1).unwrap();
        let map = state_probability_map(&[p.clone()], &[constant(1, 1)], &panel, 1).unwrap();
        for i in 0..4 {
            assert!((map.values[i] - invlogit(p.mu[1] + p.lambda[i] + p.phi[1][i])).abs() < 1e-15);
        }
        assert_eq!(map.unobserved, vec![false, true, false, true]);
        let err = state_probability_map(&[p], &[constant(1, 1)], &panel, 0).unwrap_err();
        assert!(matches!(err, Error::EmptyState(0)));
    }

    #[test]
    fn state_map_recomputes_from_raw_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let panel = random_panel(&mut rng, 5, 8, 0.2);
        let spec = ModelSpec::new(3, 5);
        let draws: Vec<ModelParams> = (0..5).map(|_| random_params(&mut rng, spec)).collect();
        let trs: Vec<StateTrajectory> = (0..5)
            .map(|_| StateTrajectory {
                states: (0..8).map(|_| rng.random_range(0..3)).collect(),
                kind: TrajectoryKind::Sampled,
            })
            .collect();
        let map = state_probability_map(&draws, &trs, &panel, 2).unwrap();
        for i in 0..5 {
            let mut vals = Vec::new();
            for (p, tr) in draws.iter().zip(&trs) {
                for t in 0..8 {
                    if tr.states[t] == 2 {
                        let eta = p.mu[2] + p.lambda[i] + p.phi[2][i] + p.gamma[panel.month_index(t)];
                        vals.push(1.0 / (1.0 + (-eta).exp()));
                    }
                }
            }
            assert!((map.values[i] - mean(&vals)).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_missingness_curve() {
        let spec = ModelSpec::new(2, 2);
        let p = ModelParams::baseline(&spec, &Priors::default());
        let curves = missingness_curve(&[p], 5);
        assert_eq!(curves.len(), 2);
        for c in &curves {
            assert!(c.points.iter().all(|iv| (iv.mean - 0.5).abs() < 1e-15));
        }
    }

    #[test]
    fn missingness_curve_reference_values() {
        let spec = ModelSpec::new(1, 2);
        let mut p = ModelParams::baseline(&spec, &Priors::default());
        p.xi = vec![-0.75];
        p.beta = vec![-1.23];
        let c = &missingness_curve(&[p], 11)[0];
        assert!((c.points[0].mean - 0.321).abs() < 5e-4);
        assert!((c.points[10].mean - 0.121).abs() < 5e-4);
        assert!(c.points.windows(2).all(|w| w[1].mean < w[0].mean));
    }

    #[test]
    fn single_state_table_uses_sample_mean() {
        let rows = vec![vec![Some(true), Some(false), Some(false)], vec![Some(false), Some(true), Some(true)]];
        let panel = ObservationPanel::from_rows(&rows, 1).unwrap();
        let p = zero_params(1, 2);
        let table = state_summary_table(&[p], &constant(0, 3), &panel).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table[0].observed_outcome, Some(0.5));
        assert_eq!(table[0].observed_missing, Some(0.0));
        assert!((table[0].model_outcome.unwrap().mean - 0.5).abs() < 1e-15);
        assert!(table[0].model_missing.is_none());
    }

    #[test]
    fn seasonal_means_sum_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = ModelSpec::new(2, 3);
        let draws: Vec<ModelParams> = (0..50).map(|_| random_params(&mut rng, spec)).collect();
        let rows = seasonal_summary(&draws);
        assert!(rows.iter().map(|r| r.mean).sum::<f64>().abs() < 1e-10);
        for r in &rows {
            assert!(r.q025 <= r.q25 && r.q25 <= r.q75 && r.q75 <= r.q975);
        }
        let zero = seasonal_summary(&[zero_params(1, 1)]);
        assert!(zero.iter().all(|r| r.mean == 0.0));
    }
}
