//! One function per command-line subcommand.
//!
//! Each reads its inputs from the paths in a [`RunConfig`] and writes its
//! artifacts into `out_dir`, returning the paths it wrote.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::changepoint::{fit_changepoint, ChangepointConfig, TrajectoryBundle};
use crate::decode::{map_state_sequence, sample_trajectory, viterbi, StateTrajectory, TrajectoryKind};
use crate::error::{Error, Result};
use crate::evaluate::{make_holdout, pairwise_elpd_diff, pointwise_elpd, ElpdResult};
use crate::graph::NeighborhoodGraph;
use crate::io::config::{Assignment, InitStrategy, ModelVariant, RunConfig};
use crate::io::svg::{line_chart, Series};
use crate::io::{self, create_dir, fmt_f64, fmt_opt, DrawRow};
use crate::likelihood::Posterior;
use crate::panel::ObservationPanel;
use crate::params::{ModelParams, ModelSpec, Priors};
use crate::predict::{
    missingness_curve, predictive_proportion, seasonal_summary, state_probability_map,
    state_summary_table,
};
use crate::sampler::diagnostics::{summarize, SummaryRow};
use crate::sampler::{pilot_optimize, run_chains, InitMode, LogDensity, PosteriorDraws, SamplerConfig};
use crate::simulate::{draw_truth, simulate_panel, MissingnessRegime, SimulationScenario, TruthSpec};

/// Half-width of the jitter around a pilot optimum.
const PILOT_JITTER: f64 = 0.1;
const PILOT_LEARNING_RATE: f64 = 0.05;
/// Random streams for pilot starts sit above the per-chain streams.
const PILOT_STREAM: u64 = 1 << 32;

/// How chains are started.
#[derive(Debug, Clone)]
pub struct FitSettings {
    pub sampler: SamplerConfig,
    pub init: InitStrategy,
    pub pilot_iters: usize,
    /// Pilot optimizations to run (the origin plus random starts); the best one centres the chains.
    pub pilot_starts: usize,
}

impl RunConfig {
    pub fn fit_settings(&self) -> FitSettings {
        FitSettings {
            sampler: self.sampler.clone(),
            init: self.init,
            pilot_iters: self.pilot_iters,
            pilot_starts: self.pilot_starts,
        }
    }
}

/// A finished fit: raw unconstrained draws plus their constrained values.
pub struct Fit {
    pub posterior: Posterior,
    pub draws: PosteriorDraws,
    /// Constrained parameters, indexed `[chain][draw]`.
    pub params: Vec<Vec<ModelParams>>,
}

impl Fit {
    /// All constrained draws, chain-major.
    pub fn flat(&self) -> Vec<ModelParams> {
        self.params.iter().flatten().cloned().collect()
    }

    /// At most `max` draws, evenly spaced over the chain-major sequence.
    pub fn thinned(&self, max: usize) -> Vec<ModelParams> {
        thin(&self.flat(), max)
    }

    /// Posterior summary of every named constrained parameter.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let named: Vec<Vec<Vec<(String, f64)>>> =
            self.params.iter().map(|c| c.iter().map(ModelParams::named_values).collect()).collect();
        let Some(first) = named.first().and_then(|c| c.first()) else { return Vec::new() };
        (0..first.len())
            .into_par_iter()
            .map(|j| {
                let chains: Vec<Vec<f64>> = named.iter().map(|c| c.iter().map(|d| d[j].1).collect()).collect();
                summarize(&first[j].0, &chains)
            })
            .collect()
    }

    /// The draw with the highest log density.
    pub fn max_lp_params(&self) -> &ModelParams {
        let (c, k, _) = self.draws.max_lp();
        &self.params[c][k]
    }
}

/// Evenly spaced subset of at most `max` items, keeping the first.
pub fn thin<T: Clone>(items: &[T], max: usize) -> Vec<T> {
    if items.len() <= max {
        return items.to_vec();
    }
    (0..max).map(|k| items[k * items.len() / max].clone()).collect()
}

/// Runs the sampler on one panel and model.
pub fn fit_model(panel: ObservationPanel, graph: NeighborhoodGraph, spec: ModelSpec, settings: &FitSettings) -> Result<Fit> {
    let posterior = Posterior::new(panel, graph, spec, Priors::default())?;
    let mut sampler = settings.sampler.clone();
    if settings.init == InitStrategy::Pilot {
        let center = pilot_center(&posterior, settings)?;
        sampler.init = InitMode::RandomJitter { center: Some(center), scale: PILOT_JITTER };
    }
    let draws = run_chains(&posterior, &sampler)?;
    let params = (0..draws.n_chains())
        .map(|c| (0..draws.n_draws()).map(|k| posterior.constrain(draws.draw(c, k))).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(Fit { posterior, draws, params })
}

/// Multi-start pilot optimization. A single ascent from the origin can stop
/// in a local mode where two states split the data badly; the best of
/// several starts avoids that in practice.
fn pilot_center(posterior: &Posterior, settings: &FitSettings) -> Result<Vec<f64>> {
    let dim = posterior.dim();
    let starts: Vec<Vec<f64>> = (0..settings.pilot_starts.max(1))
        .map(|k| {
            if k == 0 {
                return vec![0.0; dim];
            }
            let mut rng = ChaCha8Rng::seed_from_u64(settings.sampler.seed);
            rng.set_stream(PILOT_STREAM + k as u64);
            (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
        })
        .collect();
    let results: Vec<Result<(f64, Vec<f64>)>> = starts
        .par_iter()
        .map(|start| {
            let x = pilot_optimize(posterior, start, settings.pilot_iters, PILOT_LEARNING_RATE)?;
            Ok((posterior.log_density(&x)?, x))
        })
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut first_err = None;
    for r in results {
        match r {
            Ok((lp, x)) if lp.is_finite() && best.as_ref().is_none_or(|b| lp > b.0) => best = Some((lp, x)),
            Ok(_) => {}
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some((_, x)), _) => Ok(x),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::InitializationFailure(settings.pilot_starts)),
    }
}

fn load_inputs(cfg: &RunConfig) -> Result<(ObservationPanel, NeighborhoodGraph)> {
    let panel = io::load_panel(&cfg.panel, cfg.n_sites, cfg.n_times, cfg.start_month)?;
    let graph = io::load_edges(&cfg.edges, panel.n_sites())?;
    Ok((panel, graph))
}

fn require(dir: &Path, files: &[&str]) -> Result<()> {
    let missing: Vec<&str> = files.iter().copied().filter(|f| !dir.join(f).is_file()).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingArtifacts { dir: dir.to_path_buf(), missing: missing.join(", ") })
    }
}

/// Result of a single timed evaluation.
#[derive(Debug, Clone)]
pub struct DryRun {
    pub n_sites: usize,
    pub n_times: usize,
    pub dim: usize,
    pub missingness_rate: f64,
    pub missingness_after_first_obs: f64,
    pub log_density: f64,
    pub grad_norm: f64,
    /// Mean wall time of one log-density-and-gradient evaluation.
    pub eval_time: Duration,
}

/// Evaluates the log density and gradient `reps` times at `u`.
pub fn time_evaluation(posterior: &Posterior, u: &[f64], reps: usize) -> Result<(f64, f64, Duration)> {
    let mut grad = vec![0.0; posterior.dim()];
    let reps = reps.max(1);
    let start = Instant::now();
    let mut lp = 0.0;
    for _ in 0..reps {
        lp = posterior.logp_and_grad(u, &mut grad)?;
    }
    let elapsed = start.elapsed() / reps as u32;
    if !lp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("log density or gradient at the origin".into()));
    }
    Ok((lp, grad.iter().map(|g| g * g).sum::<f64>().sqrt(), elapsed))
}

/// Validates configuration and data, then times one evaluation at the origin.
pub fn dry_run(cfg: &RunConfig) -> Result<DryRun> {
    let (panel, graph) = load_inputs(cfg)?;
    let (n_sites, n_times) = (panel.n_sites(), panel.n_times());
    let (rate, after) = (panel.missingness_rate(), panel.missingness_rate_after_first_obs());
    let posterior = Posterior::new(panel, graph, cfg.model_spec(n_sites), Priors::default())?;
    let u = vec![0.0; posterior.dim()];
    let (log_density, grad_norm, eval_time) = time_evaluation(&posterior, &u, 3)?;
    Ok(DryRun {
        n_sites,
        n_times,
        dim: posterior.dim(),
        missingness_rate: rate,
        missingness_after_first_obs: after,
        log_density,
        grad_norm,
        eval_time,
    })
}

/// Writes draws, diagnostics and sampler statistics for a fit.
pub fn write_fit(dir: &Path, fit: &Fit) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let names: Vec<String> = fit.params[0][0].named_values().into_iter().map(|(k, _)| k).collect();
    let mut constrained = Vec::new();
    let mut unconstrained = Vec::new();
    for (c, chain) in fit.params.iter().enumerate() {
        for (k, p) in chain.iter().enumerate() {
            let lp = fit.draws.lp(c)[k];
            constrained.push(DrawRow { chain: c, draw: k, lp, values: p.named_values().into_iter().map(|(_, v)| v).collect() });
            unconstrained.push(DrawRow { chain: c, draw: k, lp, values: fit.draws.draw(c, k).to_vec() });
        }
    }
    let draws_path = dir.join("draws.csv");
    io::write_draws(&draws_path, &names, &constrained)?;
    let raw_path = dir.join("draws_unconstrained.csv");
    io::write_draws(&raw_path, &fit.posterior.layout().coordinate_names(), &unconstrained)?;

    let diag_path = dir.join("diagnostics.csv");
    io::write_table(
        &diag_path,
        &["param", "mean", "sd", "q2.5", "q97.5", "ess_bulk", "ess_tail", "rhat"],
        fit.summary().into_iter().map(|r| {
            vec![
                r.param,
                fmt_f64(r.mean),
                fmt_f64(r.sd),
                fmt_f64(r.q025),
                fmt_f64(r.q975),
                fmt_opt(r.ess_bulk),
                fmt_opt(r.ess_tail),
                fmt_opt(r.rhat),
            ]
        }),
    )?;

    let stats_path = dir.join("sampler_stats.csv");
    let rows = (0..fit.draws.n_chains()).map(|c| {
        let stats = fit.draws.stats(c);
        let n = stats.len().max(1) as f64;
        let accept = stats.iter().map(|s| s.accept_stat).sum::<f64>() / n;
        let depth = stats.iter().map(|s| s.tree_depth as f64).sum::<f64>() / n;
        let leapfrog = stats.iter().map(|s| s.n_leapfrog as f64).sum::<f64>() / n;
        vec![
            (c + 1).to_string(),
            fmt_f64(fit.draws.adaptation(c).step_size),
            fmt_f64(accept),
            fmt_f64(depth),
            fmt_f64(leapfrog),
            fit.draws.divergences(c).to_string(),
        ]
    });
    io::write_table(
        &stats_path,
        &["chain", "step_size", "mean_accept", "mean_tree_depth", "mean_leapfrog", "divergences"],
        rows,
    )?;
    Ok(vec![draws_path, raw_path, diag_path, stats_path])
}

/// `fit`: sample the posterior and write draws and diagnostics.
pub fn fit(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (panel, graph) = load_inputs(cfg)?;
    let spec = cfg.model_spec(panel.n_sites());
    let fit = fit_model(panel, graph, spec, &cfg.fit_settings())?;
    write_fit(&cfg.out_dir, &fit)
}

/// Constrained draws and their log densities from `out_dir/draws.csv`.
pub fn read_fit_draws(cfg: &RunConfig, n_sites: usize) -> Result<(Vec<ModelParams>, Vec<f64>)> {
    require(&cfg.out_dir, &["draws.csv"])?;
    let (names, rows) = io::read_draws(&cfg.out_dir.join("draws.csv"))?;
    let spec = cfg.model_spec(n_sites);
    let mut draws = Vec::with_capacity(rows.len());
    let mut lp = Vec::with_capacity(rows.len());
    for row in rows {
        let named: Vec<(String, f64)> = names.iter().cloned().zip(row.values).collect();
        draws.push(ModelParams::from_named_values(&spec, &named)?);
        lp.push(row.lp);
    }
    if draws.is_empty() {
        return Err(Error::DegenerateInput("draws.csv has no rows".into()));
    }
    Ok((draws, lp))
}

fn write_svg(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

/// `simulate`: draw a truth and a panel on a grid graph.
///
/// The panel and edge list go to the configured input paths so a later
/// `fit` picks them up; the truth goes to `out_dir`.
pub fn simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let sim = &cfg.simulation;
    let graph = NeighborhoodGraph::grid(sim.grid.0, sim.grid.1)?;
    let truth = TruthSpec {
        means: sim.means.clone(),
        self_transition: sim.self_transition,
        sigma_lambda: sim.sigma_lambda,
        sigma_phi: sim.sigma_phi.clone(),
        seasonal_amplitude: sim.seasonal_amplitude,
        peak_month: sim.peak_month,
        xi: if sim.state_missingness { sim.xi.clone() } else { Vec::new() },
        beta: if sim.state_missingness { sim.beta.clone() } else { Vec::new() },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    rng.set_stream(1);
    let params = draw_truth(&truth, &graph, &mut rng)?;
    let scenario = SimulationScenario {
        params,
        graph,
        n_times: sim.n_times,
        start_month: cfg.start_month,
        missingness: if sim.state_missingness { MissingnessRegime::StateDependent } else { MissingnessRegime::None },
        blackout: Vec::new(),
        seed: sim.seed,
    };
    let (panel, states) = simulate_panel(&scenario)?;

    for p in [&cfg.panel, &cfg.edges] {
        if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
    }
    create_dir(&cfg.out_dir)?;
    io::write_panel(&cfg.panel, &panel)?;
    io::write_edges(&cfg.edges, &scenario.graph)?;
    let params_path = cfg.out_dir.join("true_params.csv");
    io::write_named(&params_path, &scenario.params.named_values())?;
    let traj_path = cfg.out_dir.join("true_trajectory.csv");
    io::write_table(
        &traj_path,
        &["time", "state"],
        states.states.iter().enumerate().map(|(t, s)| vec![(t + 1).to_string(), (s + 1).to_string()]),
    )?;
    Ok(vec![cfg.panel.clone(), cfg.edges.clone(), params_path, traj_path])
}

/// One FFBS trajectory per draw; draw `d` uses its own random stream.
pub fn sample_trajectories(draws: &[ModelParams], panel: &ObservationPanel, seed: u64) -> Result<Vec<StateTrajectory>> {
    draws
        .par_iter()
        .enumerate()
        .map(|(d, p)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(d as u64 + 1);
            sample_trajectory(panel, p, &mut rng)
        })
        .collect()
}

/// `decode`: modal marginals, the Viterbi path at the highest-density draw,
/// and one sampled trajectory per retained draw.
pub fn decode(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (panel, _) = load_inputs(cfg)?;
    let (all, lp) = read_fit_draws(cfg, panel.n_sites())?;
    let best = lp.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(k, _)| k);
    let draws = thin(&all, cfg.post_draws);
    let modal = map_state_sequence(&draws, &panel)?;
    let s_count = cfg.n_states;

    let modal_path = cfg.out_dir.join("trajectory.csv");
    let mut header = vec!["time".to_string(), "modal_state".into(), "modal_prob".into()];
    header.extend((1..=s_count).map(|s| format!("p_state_{s}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_table(
        &modal_path,
        &header,
        (0..panel.n_times()).map(|t| {
            let mut row = vec![(t + 1).to_string(), (modal.states[t] + 1).to_string(), fmt_f64(modal.probs[t])];
            row.extend(modal.marginals.at(t).iter().map(|v| fmt_f64(*v)));
            row
        }),
    )?;

    let vit = viterbi(&panel, &all[best])?;
    let vit_path = cfg.out_dir.join("viterbi.csv");
    io::write_table(
        &vit_path,
        &["time", "state"],
        vit.states.iter().enumerate().map(|(t, s)| vec![(t + 1).to_string(), (s + 1).to_string()]),
    )?;

    let sampled = sample_trajectories(&draws, &panel, cfg.sampler.seed)?;
    let bundle_path = cfg.out_dir.join("trajectories.csv");
    let rows: Vec<Vec<usize>> = sampled.into_iter().map(|t| t.states).collect();
    io::write_trajectories(&bundle_path, panel.n_times(), &rows)?;
    Ok(vec![modal_path, vit_path, bundle_path])
}

fn read_modal(cfg: &RunConfig, n_times: usize) -> Result<StateTrajectory> {
    let (_, rows) = io::read_table(&cfg.out_dir.join("trajectory.csv"))?;
    let states = rows
        .iter()
        .map(|r| r.get(1).and_then(|s| s.parse::<usize>().ok()).filter(|s| *s >= 1).map(|s| s - 1))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::DegenerateInput("trajectory.csv has an unreadable modal_state column".into()))?;
    if states.len() != n_times {
        return Err(Error::LengthMismatch { expected: n_times, got: states.len() });
    }
    Ok(StateTrajectory { states, kind: TrajectoryKind::Modal })
}

/// `predict`: predictive series, state maps, missingness curves, seasonal
/// term and the per-state summary table.
pub fn predict(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    require(&cfg.out_dir, &["draws.csv", "trajectory.csv"])?;
    let (panel, _) = load_inputs(cfg)?;
    let (all, _) = read_fit_draws(cfg, panel.n_sites())?;
    let draws = thin(&all, cfg.post_draws);
    let n_times = panel.n_times();
    let modal = read_modal(cfg, n_times)?;
    let per_draw_modal = vec![modal.clone(); draws.len()];
    let assigned = match cfg.assignment {
        Assignment::Modal => per_draw_modal.clone(),
        Assignment::Sampled => {
            require(&cfg.out_dir, &["trajectories.csv"])?;
            io::read_trajectories(&cfg.out_dir.join("trajectories.csv"))?
                .into_iter()
                .map(|states| StateTrajectory { states, kind: TrajectoryKind::Sampled })
                .collect()
        }
    };
    let mut written = Vec::new();
    let times: Vec<f64> = (1..=n_times).map(|t| t as f64).collect();

    let series = predictive_proportion(&draws, &panel, &assigned, cfg.predict_replications, cfg.sampler.seed)?;
    let path = cfg.out_dir.join("proportion_series.csv");
    io::write_table(
        &path,
        &["time", "observed", "mean", "q2.5", "q97.5"],
        series.predicted.iter().zip(&series.observed).enumerate().map(|(t, (p, o))| {
            vec![(t + 1).to_string(), fmt_opt(*o), fmt_f64(p.mean), fmt_f64(p.lower), fmt_f64(p.upper)]
        }),
    )?;
    written.push(path);
    let svg = line_chart(
        "Proportion of sites with a positive outcome",
        "time",
        &times,
        &[
            Series::line("observed", series.observed.clone()),
            Series::line("predictive mean", series.predicted.iter().map(|p| Some(p.mean)).collect()).with_band(
                series.predicted.iter().map(|p| p.lower).collect(),
                series.predicted.iter().map(|p| p.upper).collect(),
            ),
        ],
    );
    let path = cfg.out_dir.join("proportion_series.svg");
    write_svg(&path, &svg)?;
    written.push(path);

    for s in 0..cfg.n_states {
        let path = cfg.out_dir.join(format!("state_map_s{}.csv", s + 1));
        let rows: Vec<Vec<String>> = match state_probability_map(&draws, &per_draw_modal, &panel, s) {
            Ok(map) => map
                .values
                .iter()
                .zip(&map.unobserved)
                .enumerate()
                .map(|(i, (v, u))| vec![(i + 1).to_string(), fmt_f64(*v), if *u { "unobserved" } else { "observed" }.into()])
                .collect(),
            Err(Error::EmptyState(_)) => {
                (1..=panel.n_sites()).map(|i| vec![i.to_string(), "NA".into(), "empty".into()]).collect()
            }
            Err(e) => return Err(e),
        };
        io::write_table(&path, &["site", "value", "flag"], rows)?;
        written.push(path);
    }

    let curves = missingness_curve(&draws, n_times);
    if !curves.is_empty() {
        let path = cfg.out_dir.join("missingness_curves.csv");
        io::write_table(
            &path,
            &["state", "time", "mean", "q2.5", "q97.5"],
            curves.iter().flat_map(|c| {
                c.points.iter().enumerate().map(move |(t, p)| {
                    vec![(c.state + 1).to_string(), (t + 1).to_string(), fmt_f64(p.mean), fmt_f64(p.lower), fmt_f64(p.upper)]
                })
            }),
        )?;
        written.push(path);
        let lines: Vec<Series> = curves
            .iter()
            .map(|c| {
                Series::line(format!("state {}", c.state + 1), c.points.iter().map(|p| Some(p.mean)).collect())
                    .with_band(c.points.iter().map(|p| p.lower).collect(), c.points.iter().map(|p| p.upper).collect())
            })
            .collect();
        let path = cfg.out_dir.join("missingness_curves.svg");
        write_svg(&path, &line_chart("Probability of a missing observation", "time", &times, &lines))?;
        written.push(path);
    }

    let seasonal = seasonal_summary(&draws);
    let path = cfg.out_dir.join("seasonal.csv");
    io::write_table(
        &path,
        &["month", "mean", "q2.5", "q25", "q75", "q97.5"],
        seasonal.iter().map(|r| {
            vec![r.month.to_string(), fmt_f64(r.mean), fmt_f64(r.q025), fmt_f64(r.q25), fmt_f64(r.q75), fmt_f64(r.q975)]
        }),
    )?;
    written.push(path);
    let months: Vec<f64> = (1..=seasonal.len()).map(|m| m as f64).collect();
    let seasonal_series = Series::line("posterior mean", seasonal.iter().map(|r| Some(r.mean)).collect())
        .with_band(seasonal.iter().map(|r| r.q025).collect(), seasonal.iter().map(|r| r.q975).collect());
    let path = cfg.out_dir.join("seasonal.svg");
    write_svg(&path, &line_chart("Monthly seasonal effect", "month", &months, &[seasonal_series]))?;
    written.push(path);

    let table = state_summary_table(&draws, &modal, &panel)?;
    let path = cfg.out_dir.join("state_table.csv");
    let interval = |i: &Option<crate::predict::Interval>| match i {
        Some(i) => vec![fmt_f64(i.mean), fmt_f64(i.lower), fmt_f64(i.upper)],
        None => vec!["NA".into(); 3],
    };
    io::write_table(
        &path,
        &[
            "state",
            "n_times",
            "observed_outcome",
            "model_outcome",
            "model_outcome_q2.5",
            "model_outcome_q97.5",
            "observed_missing",
            "model_missing",
            "model_missing_q2.5",
            "model_missing_q97.5",
        ],
        table.iter().map(|r| {
            let mut row = vec![(r.state + 1).to_string(), r.n_times.to_string(), fmt_opt(r.observed_outcome)];
            row.extend(interval(&r.model_outcome));
            row.push(fmt_opt(r.observed_missing));
            row.extend(interval(&r.model_missing));
            row
        }),
    )?;
    written.push(path);
    Ok(written)
}

/// `changepoint`: two-state left-to-right model over the sampled trajectories.
pub fn changepoint(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    require(&cfg.out_dir, &["trajectories.csv"])?;
    let rows = io::read_trajectories(&cfg.out_dir.join("trajectories.csv"))?;
    let bundle = TrajectoryBundle::new(cfg.n_states, rows)?;
    let fit = fit_changepoint(
        &bundle,
        &ChangepointConfig {
            n_iter: cfg.changepoint_iter,
            n_burnin: cfg.changepoint_burnin,
            seed: cfg.sampler.seed,
            ..ChangepointConfig::default()
        },
    )?;
    let t_count = bundle.n_times();
    let dist_path = cfg.out_dir.join("changepoint.csv");
    io::write_table(
        &dist_path,
        &["time", "probability"],
        fit.distribution.iter().enumerate().map(|(k, p)| {
            let label = if k < t_count { (k + 1).to_string() } else { "never".to_string() };
            vec![label, fmt_f64(*p)]
        }),
    )?;
    let em_path = cfg.out_dir.join("changepoint_emission.csv");
    io::write_table(
        &em_path,
        &["regime", "state", "probability"],
        fit.emission.iter().enumerate().flat_map(|(r, row)| {
            let regime = if r == 0 { "before" } else { "after" };
            row.iter().enumerate().map(move |(s, p)| vec![regime.to_string(), (s + 1).to_string(), fmt_f64(*p)])
        }),
    )?;
    let summary_path = cfg.out_dir.join("changepoint_summary.csv");
    io::write_table(
        &summary_path,
        &["map_time", "lower", "upper", "switch_prob", "never_prob", "degenerate", "violations"],
        [vec![
            fit.map_changepoint.to_string(),
            fit.interval.0.to_string(),
            fit.interval.1.to_string(),
            fmt_f64(fit.switch_prob),
            fmt_f64(fit.distribution[t_count]),
            fit.degenerate.to_string(),
            fit.left_to_right_violations.to_string(),
        ]],
    )?;
    let times: Vec<f64> = (1..=t_count).map(|t| t as f64).collect();
    let svg_path = cfg.out_dir.join("changepoint.svg");
    let series = Series::line("P(first time in the later regime)", fit.distribution[..t_count].iter().map(|p| Some(*p)).collect());
    write_svg(&svg_path, &line_chart("Change-point distribution", "time", &times, &[series]))?;
    Ok(vec![dist_path, em_path, summary_path, svg_path])
}

/// Held-out ELPD of one variant on every replication's masked panel.
pub fn elpd_for_variant(
    masked: &[(ObservationPanel, crate::evaluate::HoldoutPlan)],
    graph: &NeighborhoodGraph,
    variant: &ModelVariant,
    settings: &FitSettings,
    post_draws: usize,
) -> Result<Vec<ElpdResult>> {
    masked
        .iter()
        .enumerate()
        .map(|(r, (panel, plan))| {
            let mut s = settings.clone();
            s.sampler.seed = settings.sampler.seed.wrapping_add(r as u64);
            let spec = variant.model_spec(panel.n_sites());
            let fit = fit_model(panel.clone(), graph.clone(), spec, &s)?;
            pointwise_elpd(&fit.thinned(post_draws), panel, plan)
        })
        .collect()
}

/// `elpd`: held-out comparison of the configured model variants.
pub fn elpd(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (panel, graph) = load_inputs(cfg)?;
    create_dir(&cfg.out_dir)?;
    let masked = (0..cfg.elpd_replications)
        .map(|r| make_holdout(&panel, cfg.holdout_fraction, cfg.sampler.seed, r))
        .collect::<Result<Vec<_>>>()?;
    let plan_path = cfg.out_dir.join("holdout_plan.csv");
    io::write_table(
        &plan_path,
        &["replication", "site", "time", "y", "fingerprint"],
        masked.iter().flat_map(|(_, plan)| {
            let fp = format!("{:016x}", plan.fingerprint());
            plan.cells.iter().map(move |c| {
                vec![(plan.replication + 1).to_string(), (c.site + 1).to_string(), (c.time + 1).to_string(), u8::from(c.y).to_string(), fp.clone()]
            })
        }),
    )?;

    let settings = cfg.fit_settings();
    let results = cfg
        .elpd_variants
        .iter()
        .map(|v| elpd_for_variant(&masked, &graph, v, &settings, cfg.post_draws))
        .collect::<Result<Vec<_>>>()?;

    let pw_path = cfg.out_dir.join("elpd_pointwise.csv");
    let mut rows = Vec::new();
    for (v, per_rep) in cfg.elpd_variants.iter().zip(&results) {
        for ((_, plan), res) in masked.iter().zip(per_rep) {
            for (c, e) in plan.cells.iter().zip(&res.pointwise) {
                rows.push(vec![
                    v.name.clone(),
                    (plan.replication + 1).to_string(),
                    (c.site + 1).to_string(),
                    (c.time + 1).to_string(),
                    u8::from(c.y).to_string(),
                    fmt_f64(*e),
                ]);
            }
        }
    }
    io::write_table(&pw_path, &["model", "replication", "site", "time", "y", "elpd"], rows)?;

    let totals_path = cfg.out_dir.join("elpd_totals.csv");
    io::write_table(
        &totals_path,
        &["model", "replication", "total", "mc_se"],
        cfg.elpd_variants.iter().zip(&results).flat_map(|(v, per_rep)| {
            per_rep.iter().enumerate().map(move |(r, res)| vec![v.name.clone(), (r + 1).to_string(), fmt_f64(res.total), fmt_f64(res.mc_se)])
        }),
    )?;

    let cmp_path = cfg.out_dir.join("elpd_compare.csv");
    let mut rows = Vec::new();
    for a in 0..results.len() {
        for b in a + 1..results.len() {
            let (mean, se) = pairwise_elpd_diff(&results[a], &results[b])?;
            rows.push(vec![cfg.elpd_variants[a].name.clone(), cfg.elpd_variants[b].name.clone(), fmt_f64(mean), fmt_f64(se)]);
        }
    }
    io::write_table(&cmp_path, &["model_a", "model_b", "mean_diff", "se"], rows)?;
    Ok(vec![plan_path, pw_path, totals_path, cmp_path])
}

/// `report`: markdown summary of whatever artifacts `out_dir` holds.
pub fn report(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    io::report::write_report(&cfg.out_dir)?;
    Ok(vec![cfg.out_dir.join("report.md")])
}
