//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//! `ACCEPTANCE_ONLY=1,5,9` runs a subset; the default runs everything,
//! including the recovery study (roughly an hour on one core).

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use icarhmm::changepoint::{fit_changepoint, ChangepointConfig, TrajectoryBundle};
use icarhmm::decode::{map_state_sequence, sample_trajectory, smoothed_marginals, viterbi};
use icarhmm::evaluate::{make_holdout, pairwise_elpd_diff};
use icarhmm::graph::NeighborhoodGraph;
use icarhmm::io::config::{InitStrategy, ModelVariant};
use icarhmm::likelihood::{forward_loglik, Posterior};
use icarhmm::panel::{Cell, ObservationPanel};
use icarhmm::params::{ModelParams, ModelSpec, Priors};
use icarhmm::pipeline::{elpd_for_variant, fit_model, thin, time_evaluation, FitSettings};
use icarhmm::sampler::diagnostics::{ess, rhat, EssKind};
use icarhmm::sampler::{run_chains, LogDensity, SamplerConfig};
use icarhmm::simulate::{
    draw_truth, sample_prior_params, simulate_panel, IcarSampler, MissingnessRegime, SimulationScenario, TruthSpec,
};
use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------------------
// Independent oracles

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Per-time, per-state log emission computed directly from the model
/// definition, without any library likelihood code.
fn oracle_emissions(panel: &ObservationPanel, p: &ModelParams) -> Vec<Vec<f64>> {
    let (n, t_count, s_count) = (panel.n_sites(), panel.n_times(), p.mu.len());
    let first: Vec<Option<usize>> =
        (0..n).map(|i| (0..t_count).find(|&t| matches!(panel.cell(i, t), Cell::Zero | Cell::One | Cell::HeldOut))).collect();
    (0..t_count)
        .map(|t| {
            let month = (panel.start_month() as usize - 1 + t) % 12;
            let tp = if t_count > 1 { t as f64 / (t_count - 1) as f64 } else { 0.0 };
            (0..s_count)
                .map(|s| {
                    let mut lp = 0.0;
                    for i in 0..n {
                        let cell = panel.cell(i, t);
                        let r_term = !p.xi.is_empty() && first[i].is_some_and(|f| t >= f) && cell != Cell::HeldOut;
                        let q = if p.xi.is_empty() { 0.0 } else { sigmoid(p.xi[s] + p.beta[s] * tp) };
                        let prob = sigmoid(p.mu[s] + p.lambda[i] + p.phi[s][i] + p.gamma[month]);
                        match cell {
                            Cell::One | Cell::Zero => {
                                lp += if cell == Cell::One { prob.ln() } else { (1.0 - prob).ln() };
                                if r_term {
                                    lp += (1.0 - q).ln();
                                }
                            }
                            Cell::Missing if r_term => lp += q.ln(),
                            _ => {}
                        }
                    }
                    lp
                })
                .collect()
        })
        .collect()
}

/// Every state path with its joint log probability.
fn enumerate_paths(p: &ModelParams, omega: &[Vec<f64>]) -> Vec<(Vec<usize>, f64)> {
    let s_count = p.mu.len();
    let t_count = omega.len();
    let total = s_count.pow(t_count as u32);
    (0..total)
        .map(|mut code| {
            let path: Vec<usize> = (0..t_count)
                .map(|_| {
                    let s = code % s_count;
                    code /= s_count;
                    s
                })
                .collect();
            let mut lp = p.rho[path[0]].ln() + omega[0][path[0]];
            for t in 1..t_count {
                lp += p.a[path[t - 1]][path[t]].ln() + omega[t][path[t]];
            }
            (path, lp)
        })
        .collect()
}

fn random_cells(rng: &mut ChaCha8Rng, n: usize, t_count: usize, p_missing: f64, p_held: f64) -> Vec<Cell> {
    (0..n * t_count)
        .map(|_| {
            let u: f64 = rng.random();
            if u < p_missing {
                Cell::Missing
            } else if u < p_missing + p_held {
                Cell::HeldOut
            } else if rng.random::<bool>() {
                Cell::One
            } else {
                Cell::Zero
            }
        })
        .collect()
}

fn random_instance(rng: &mut ChaCha8Rng, s_max: usize, t_max: usize, n_max: usize) -> (ObservationPanel, ModelParams) {
    let s_count = rng.random_range(1..=s_max);
    let t_count = rng.random_range(1..=t_max);
    let n = rng.random_range(2..=n_max);
    let graph = NeighborhoodGraph::path(n).unwrap();
    let mut spec = ModelSpec::new(s_count, n);
    spec.shared_sigma_phi = rng.random_bool(0.3);
    spec.model_missingness = rng.random_bool(0.7);
    let p = sample_prior_params(&spec, &Priors::default(), &graph, rng).unwrap();
    let cells = random_cells(rng, n, t_count, 0.3, 0.1);
    let panel = ObservationPanel::new(n, t_count, cells, rng.random_range(1..=12)).unwrap();
    (panel, p)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

// ---------------------------------------------------------------------------
// Criteria

fn c1_forward_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (panel, p) = random_instance(&mut rng, 3, 6, 4);
        let omega = oracle_emissions(&panel, &p);
        let lps: Vec<f64> = enumerate_paths(&p, &omega).into_iter().map(|(_, lp)| lp).collect();
        let got = forward_loglik(&panel, &p).unwrap();
        worst = worst.max((got - logsumexp(&lps)).abs());
    }
    outcome(worst < 1e-10, format!("50 instances, max |forward - enumeration| = {worst:.2e}"))
}

fn c2_missing_marginalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (panel, mut p) = random_instance(&mut rng, 3, 6, 4);
        // The identity concerns the outcome model: with the missingness
        // submodel on, a missing cell deliberately contributes P(missing).
        p.xi.clear();
        p.beta.clear();
        let i = rng.random_range(0..panel.n_sites());
        let t = rng.random_range(0..panel.n_times());
        let missing = panel.with_cell(i, t, Cell::Missing);
        let zero = panel.with_cell(i, t, Cell::Zero);
        let one = panel.with_cell(i, t, Cell::One);
        let lhs = forward_loglik(&missing, &p).unwrap();
        let rhs = logsumexp(&[forward_loglik(&zero, &p).unwrap(), forward_loglik(&one, &p).unwrap()]);
        worst = worst.max((lhs - rhs).abs());
    }
    outcome(worst < 1e-10, format!("20 instances, max deviation {worst:.2e}"))
}

fn c3_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for k in 0..4 {
        let n = 6;
        let graph = NeighborhoodGraph::grid(2, 3).unwrap();
        let mut spec = ModelSpec::new(3, n);
        spec.shared_sigma_phi = k == 3;
        let cells = random_cells(&mut rng, n, 10, 0.3, 0.05);
        let panel = ObservationPanel::new(n, 10, cells, 3).unwrap();
        let post = Posterior::new(panel, graph, spec, Priors::default()).unwrap();
        let u: Vec<f64> = (0..post.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut grad = vec![0.0; post.dim()];
        post.logp_and_grad(&u, &mut grad).unwrap();
        let h = 1e-5;
        for j in 0..post.dim() {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (post.log_density(&up).unwrap() - post.log_density(&dn).unwrap()) / (2.0 * h);
            let rel = (grad[j] - fd).abs() / grad[j].abs().max(fd.abs()).max(1.0);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    outcome(worst < 1e-5, format!("{checked} coordinates over 4 instances, max relative error {worst:.2e}"))
}

fn dense_laplacian(n: usize, edges: &[(usize, usize)]) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, n);
    for &(a, b) in edges {
        q[(a, a)] += 1.0;
        q[(b, b)] += 1.0;
        q[(a, b)] -= 1.0;
        q[(b, a)] -= 1.0;
    }
    q
}

fn c4_icar() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_q = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(2..=10);
        let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
        for a in 0..n {
            for b in a + 1..n {
                if !edges.contains(&(a, b)) && rng.random_bool(0.2) {
                    edges.push((a, b));
                }
            }
        }
        let graph = NeighborhoodGraph::new(n, &edges).unwrap();
        let phi: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let v = nalgebra::DVector::from_vec(phi.clone());
        let dense = (v.transpose() * dense_laplacian(n, &edges) * &v)[(0, 0)];
        worst_q = worst_q.max((graph.quadratic_form(&phi).unwrap() - dense).abs());
    }

    let n = 5;
    let sigma = 1.3;
    let graph = NeighborhoodGraph::path(n).unwrap();
    let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    let pinv = dense_laplacian(n, &edges).pseudo_inverse(1e-12).unwrap() * (sigma * sigma);
    let sampler = IcarSampler::new(&graph);
    let draws = 50_000;
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for _ in 0..draws {
        let x = nalgebra::DVector::from_vec(sampler.sample(sigma, &mut rng));
        cov += &x * x.transpose();
    }
    cov /= draws as f64;
    // Entrywise error on the correlation scale: the theoretical covariance
    // has exact zeros, where a relative tolerance is meaningless.
    let mut worst_c = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let scale = (pinv[(i, i)] * pinv[(j, j)]).sqrt();
            worst_c = worst_c.max((cov[(i, j)] - pinv[(i, j)]).abs() / scale);
        }
    }
    outcome(
        worst_q < 1e-12 && worst_c < 0.05,
        format!("quadratic form max error {worst_q:.1e}; covariance max scaled error {worst_c:.4} over {draws} draws"),
    )
}

fn c5_decoding() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst_m = 0.0f64;
    let mut viterbi_ok = true;
    for k in 0..20 {
        let n = 3;
        let t_count = 2 + k % 7;
        let graph = NeighborhoodGraph::path(n).unwrap();
        let p = sample_prior_params(&ModelSpec::new(3, n), &Priors::default(), &graph, &mut rng).unwrap();
        let panel = ObservationPanel::new(n, t_count, random_cells(&mut rng, n, t_count, 0.3, 0.0), 1).unwrap();
        let omega = oracle_emissions(&panel, &p);
        let paths = enumerate_paths(&p, &omega);
        let z = logsumexp(&paths.iter().map(|x| x.1).collect::<Vec<_>>());
        let marg = smoothed_marginals(&panel, &p).unwrap();
        for t in 0..t_count {
            for s in 0..3 {
                let want: f64 = paths.iter().filter(|(pth, _)| pth[t] == s).map(|(_, lp)| (lp - z).exp()).sum();
                worst_m = worst_m.max((marg.at(t)[s] - want).abs());
            }
        }
        let best = paths.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        let vit = viterbi(&panel, &p).unwrap();
        let vit_lp = paths.iter().find(|(pth, _)| *pth == vit.states).unwrap().1;
        viterbi_ok &= (vit_lp - best.1).abs() < 1e-10;
    }

    // FFBS frequencies against the enumerated posterior over all 8 paths.
    let n = 3;
    let graph = NeighborhoodGraph::path(n).unwrap();
    let p = sample_prior_params(&ModelSpec::new(2, n), &Priors::default(), &graph, &mut rng).unwrap();
    let panel = ObservationPanel::new(n, 3, random_cells(&mut rng, n, 3, 0.2, 0.0), 1).unwrap();
    let paths = enumerate_paths(&p, &oracle_emissions(&panel, &p));
    let z = logsumexp(&paths.iter().map(|x| x.1).collect::<Vec<_>>());
    let samples = 100_000;
    let mut counts = vec![0usize; paths.len()];
    for _ in 0..samples {
        let tr = sample_trajectory(&panel, &p, &mut rng).unwrap();
        counts[paths.iter().position(|(pth, _)| *pth == tr.states).unwrap()] += 1;
    }
    // Pool paths with small expected counts into one cell.
    let (mut stat, mut cells, mut pooled_obs, mut pooled_exp) = (0.0, 0usize, 0.0, 0.0);
    for ((_, lp), &c) in paths.iter().zip(&counts) {
        let expected = samples as f64 * (lp - z).exp();
        if expected < 5.0 {
            pooled_obs += c as f64;
            pooled_exp += expected;
        } else {
            stat += (c as f64 - expected).powi(2) / expected;
            cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    }
    let p_value = 1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat);
    outcome(
        worst_m < 1e-10 && viterbi_ok && p_value > 0.001,
        format!("marginals max error {worst_m:.1e}; Viterbi optimal: {viterbi_ok}; FFBS chi-square p = {p_value:.3}"),
    )
}

struct RecoveryRun {
    truth: ModelParams,
    states: Vec<usize>,
    panel: ObservationPanel,
    draws: Vec<ModelParams>,
    max_rhat: f64,
    divergences: usize,
}

fn recovery_runs() -> Vec<RecoveryRun> {
    let graph = NeighborhoodGraph::grid(5, 6).unwrap();
    let truth_spec = TruthSpec {
        means: vec![-4.0, -2.5, -1.0],
        self_transition: 0.9,
        sigma_lambda: 0.5,
        sigma_phi: vec![0.5, 0.5, 0.5],
        seasonal_amplitude: 0.3,
        peak_month: 5,
        xi: vec![-0.5, -1.0, -1.5],
        beta: vec![-1.0, 0.0, 1.0],
    };
    (0..10)
        .map(|r| {
            let truth = draw_truth(&truth_spec, &graph, &mut ChaCha8Rng::seed_from_u64(600 + r)).unwrap();
            let scenario = SimulationScenario {
                params: truth.clone(),
                graph: graph.clone(),
                n_times: 300,
                start_month: 1,
                missingness: MissingnessRegime::StateDependent,
                blackout: Vec::new(),
                seed: 700 + r,
            };
            let (panel, states) = simulate_panel(&scenario).unwrap();
            let settings = FitSettings {
                sampler: SamplerConfig { n_chains: 4, n_warmup: 1000, n_draws: 1000, seed: 800 + r, ..Default::default() },
                init: InitStrategy::Pilot,
                pilot_iters: 1000,
                pilot_starts: 8,
            };
            let fit = fit_model(panel.clone(), graph.clone(), ModelSpec::new(3, panel.n_sites()), &settings).unwrap();
            let max_rhat = fit.summary().iter().filter_map(|row| row.rhat).fold(0.0, f64::max);
            RecoveryRun {
                truth,
                states: states.states,
                panel,
                draws: fit.flat(),
                max_rhat,
                divergences: fit.draws.total_divergences(),
            }
        })
        .collect()
}

fn c6_recovery(runs: &[RecoveryRun]) -> Outcome {
    let tracked = |name: &str| {
        name.starts_with("mu[")
            || name.starts_with("sigma_phi[")
            || name.starts_with("xi[")
            || name.starts_with("beta[")
            || name.strip_prefix("A[").and_then(|r| r.strip_suffix(']')).is_some_and(|ij| {
                let (i, j) = ij.split_once(',').unwrap();
                i == j
            })
    };
    let (mut covered, mut total) = (0usize, 0usize);
    let mut misses: Vec<String> = Vec::new();
    let mut worst_rhat = 0.0f64;
    let mut min_agree = 1.0f64;
    let mut divergences = 0;
    let mut per_rep = Vec::new();
    for (r, run) in runs.iter().enumerate() {
        worst_rhat = worst_rhat.max(run.max_rhat);
        divergences += run.divergences;
        let named: Vec<Vec<(String, f64)>> = run.draws.iter().map(ModelParams::named_values).collect();
        for (j, (name, truth)) in run.truth.named_values().into_iter().enumerate() {
            if !tracked(&name) {
                continue;
            }
            let mut v: Vec<f64> = named.iter().map(|d| d[j].1).collect();
            v.sort_by(f64::total_cmp);
            let inside = quantile(&v, 0.05) <= truth && truth <= quantile(&v, 0.95);
            covered += usize::from(inside);
            total += 1;
            if !inside {
                misses.push(format!("{name}@{}", r + 1));
            }
        }
        let modal = map_state_sequence(&thin(&run.draws, 1000), &run.panel).unwrap();
        let agree = modal.states.iter().zip(&run.states).filter(|(a, b)| a == b).count() as f64 / run.states.len() as f64;
        min_agree = min_agree.min(agree);
        per_rep.push(format!("{:.3}/{agree:.2}", run.max_rhat));
    }
    let coverage = covered as f64 / total as f64;
    outcome(
        worst_rhat < 1.05 && coverage >= 0.8 && min_agree >= 0.85,
        format!(
            "max R-hat {worst_rhat:.4}; 90% coverage {covered}/{total} = {coverage:.3}; min modal agreement {min_agree:.3}; divergences {divergences}; per replication R-hat/agreement [{}]; misses [{}]",
            per_rep.join(" "),
            misses.join(" ")
        ),
    )
}

fn c7_invariants(runs: &[RecoveryRun]) -> Outcome {
    let mut ordered = true;
    let mut worst = 0.0f64;
    let mut n = 0usize;
    for d in runs.iter().flat_map(|r| &r.draws) {
        ordered &= d.mu.windows(2).all(|w| w[0] <= w[1]);
        let sums = std::iter::once(&d.lambda).chain(&d.phi).chain(std::iter::once(&d.gamma)).map(|b| b.iter().sum::<f64>().abs());
        worst = sums.fold(worst, f64::max);
        n += 1;
    }
    outcome(ordered && worst < 1e-10, format!("{n} draws; mu ordered: {ordered}; max |block sum| {worst:.1e}"))
}

fn c8_changepoint() -> Outcome {
    let before = [0.7, 0.1, 0.05, 0.1, 0.05];
    let after = [0.05, 0.4, 0.35, 0.1, 0.1];
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let pre = WeightedIndex::new(before).unwrap();
    let post = WeightedIndex::new(after).unwrap();
    // One-based switch at t = 100: times 1..=99 pre, 100..=200 post.
    let rows = (0..200)
        .map(|_| (0..200).map(|t| if t < 99 { pre.sample(&mut rng) } else { post.sample(&mut rng) }).collect())
        .collect();
    let bundle = TrajectoryBundle::new(5, rows).unwrap();
    let fit = fit_changepoint(&bundle, &ChangepointConfig { seed: 8, ..Default::default() }).unwrap();
    let err = |est: &[f64], truth: &[f64]| est.iter().zip(truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let (e0, e1) = (err(&fit.emission[0], &before), err(&fit.emission[1], &after));
    outcome(
        fit.map_changepoint.abs_diff(100) <= 3 && e0 < 0.05 && e1 < 0.05 && fit.left_to_right_violations == 0,
        format!(
            "mode {} (interval {}..{}); emission errors {e0:.3}, {e1:.3}; violations {}",
            fit.map_changepoint, fit.interval.0, fit.interval.1, fit.left_to_right_violations
        ),
    )
}

struct StdNormal(usize);

impl LogDensity for StdNormal {
    fn dim(&self) -> usize {
        self.0
    }
    fn logp_and_grad(&self, x: &[f64], grad: &mut [f64]) -> icarhmm::Result<f64> {
        for (g, v) in grad.iter_mut().zip(x) {
            *g = -v;
        }
        Ok(-0.5 * x.iter().map(|v| v * v).sum::<f64>())
    }
}

fn c9_sampler() -> Outcome {
    let cfg = SamplerConfig { n_chains: 4, n_warmup: 1000, n_draws: 2000, seed: 909, ..Default::default() };
    let draws = run_chains(&StdNormal(10), &cfg).unwrap();
    let (mut worst_mean, mut worst_var) = (0.0f64, 0.0f64);
    for j in 0..10 {
        let v: Vec<f64> = draws.coordinate(j).concat();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        worst_mean = worst_mean.max(m.abs());
        worst_var = worst_var.max((var - 1.0).abs());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(910);
    let iid: Vec<Vec<f64>> = (0..4).map(|_| (0..2000).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let r = rhat(&iid).unwrap();

    let phi: f64 = 0.9;
    let len = 10_000;
    let ar: Vec<Vec<f64>> = (0..4)
        .map(|_| {
            let mut x = rng.sample::<f64, _>(StandardNormal) / (1.0 - phi * phi).sqrt();
            (0..len)
                .map(|_| {
                    x = phi * x + rng.sample::<f64, _>(StandardNormal);
                    x
                })
                .collect()
        })
        .collect();
    let analytic = (4 * len) as f64 * (1.0 - phi) / (1.0 + phi);
    let est = ess(&ar, EssKind::Bulk).unwrap();
    let rel = (est - analytic).abs() / analytic;
    outcome(
        worst_mean < 0.05 && worst_var < 0.1 && (0.99..=1.01).contains(&r) && rel < 0.3,
        format!(
            "max |mean| {worst_mean:.3}, max |var-1| {worst_var:.3}; iid R-hat {r:.4}; AR(1) ESS {est:.0} vs {analytic:.0} ({:.1}% off)",
            100.0 * rel
        ),
    )
}

fn c10_elpd() -> Outcome {
    let graph = NeighborhoodGraph::grid(4, 5).unwrap();
    let truth = TruthSpec {
        means: vec![-2.0, -0.5],
        self_transition: 0.9,
        sigma_lambda: 0.2,
        sigma_phi: vec![2.0, 2.0],
        seasonal_amplitude: 0.0,
        peak_month: 1,
        xi: vec![],
        beta: vec![],
    };
    let params = draw_truth(&truth, &graph, &mut ChaCha8Rng::seed_from_u64(1001)).unwrap();
    let scenario = SimulationScenario {
        params,
        graph: graph.clone(),
        n_times: 150,
        start_month: 1,
        missingness: MissingnessRegime::None,
        blackout: Vec::new(),
        seed: 1002,
    };
    let (panel, _) = simulate_panel(&scenario).unwrap();
    let masked: Vec<_> = (0..10).map(|r| make_holdout(&panel, 0.1, 1003, r).unwrap()).collect();
    let settings = FitSettings {
        sampler: SamplerConfig { n_chains: 4, n_warmup: 500, n_draws: 500, seed: 1004, ..Default::default() },
        init: InitStrategy::Pilot,
        pilot_iters: 500,
        pilot_starts: 8,
    };
    let variant = |name: &str, spatial: bool| ModelVariant {
        name: name.into(),
        n_states: 2,
        shared_sigma_phi: false,
        model_missingness: false,
        spatial,
    };
    let a = elpd_for_variant(&masked, &graph, &variant("true", true), &settings, 1000).unwrap();
    let b = elpd_for_variant(&masked, &graph, &variant("no_spatial", false), &settings, 1000).unwrap();
    let wins = a.iter().zip(&b).filter(|(x, y)| x.total > y.total).count();
    let (mean, se) = pairwise_elpd_diff(&a, &b).unwrap();
    outcome(wins >= 9, format!("true model ahead in {wins}/10 replications; mean difference {mean:.2} (se {se:.2})"))
}

fn c11_full_scale() -> Outcome {
    let (rows, cols, t_count) = (9, 43, 1212);
    let graph = NeighborhoodGraph::grid(rows, cols).unwrap();
    let truth = TruthSpec {
        means: vec![-4.6, -3.9, -2.7, -2.4, -1.7],
        self_transition: 0.95,
        sigma_lambda: 0.5,
        sigma_phi: vec![0.5; 5],
        seasonal_amplitude: 0.3,
        peak_month: 5,
        xi: vec![-0.75, -0.5, -1.0, -1.5, -2.0],
        beta: vec![-1.2, 0.0, 0.5, 0.8, 1.0],
    };
    let params = draw_truth(&truth, &graph, &mut ChaCha8Rng::seed_from_u64(1101)).unwrap();
    let scenario = SimulationScenario {
        params,
        graph: graph.clone(),
        n_times: t_count,
        start_month: 1,
        missingness: MissingnessRegime::StateDependent,
        blackout: Vec::new(),
        seed: 1102,
    };
    let (panel, _) = simulate_panel(&scenario).unwrap();

    let dir = tempfile::tempdir().unwrap();
    icarhmm::io::write_panel(&dir.path().join("panel.csv"), &panel).unwrap();
    icarhmm::io::write_edges(&dir.path().join("edges.csv"), &graph).unwrap();
    std::fs::write(dir.path().join("run.cfg"), "panel = panel.csv\nedges = edges.csv\nout_dir = out\nn_states = 5\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_icarhmm"))
        .args(["fit", "--dry-run", "--config"])
        .arg(dir.path().join("run.cfg"))
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let cli_secs = stdout
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("eval_seconds="))
        .and_then(|v| v.parse::<f64>().ok())
        .unwrap_or(f64::INFINITY);

    let post = Posterior::new(panel, graph, ModelSpec::new(5, rows * cols), Priors::default()).unwrap();
    let u: Vec<f64> = vec![0.0; post.dim()];
    let (_, _, per_eval) = time_evaluation(&post, &u, 5).unwrap();
    outcome(
        out.status.success() && cli_secs < 1.0 && per_eval < Duration::from_secs(1),
        format!(
            "387 x 1212, S = 5, {} parameters: dry run exit {}, {cli_secs:.3} s per evaluation; in-process {:.3} s",
            post.dim(),
            out.status.code().unwrap_or(-1),
            per_eval.as_secs_f64()
        ),
    )
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |k: usize| only.as_ref().is_none_or(|o| o.contains(&k));
    let names = [
        "forward oracle equivalence",
        "missing-data marginalization",
        "gradient check",
        "ICAR correctness",
        "decoding oracles",
        "parameter recovery",
        "ordered means and sum-to-zero blocks",
        "change-point recovery",
        "sampler calibration",
        "ELPD sign test",
        "full-scale readiness",
    ];
    let mut failed = 0;
    let mut report = |k: usize, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {k:>2} [{tag}] {}: {} ({:.1} s)", names[k - 1], o.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    };
    let simple: [(usize, fn() -> Outcome); 5] =
        [(1, c1_forward_oracle), (2, c2_missing_marginalization), (3, c3_gradient), (4, c4_icar), (5, c5_decoding)];
    for (k, f) in simple {
        if wanted(k) {
            report(k, &mut || f());
        }
    }
    if wanted(6) || wanted(7) {
        let start = Instant::now();
        let runs = recovery_runs();
        println!("(recovery study: 10 fits in {:.0} s)", start.elapsed().as_secs_f64());
        if wanted(6) {
            report(6, &mut || c6_recovery(&runs));
        }
        if wanted(7) {
            report(7, &mut || c7_invariants(&runs));
        }
    }
    let rest: [(usize, fn() -> Outcome); 4] = [(8, c8_changepoint), (9, c9_sampler), (10, c10_elpd), (11, c11_full_scale)];
    for (k, f) in rest {
        if wanted(k) {
            report(k, &mut || f());
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
