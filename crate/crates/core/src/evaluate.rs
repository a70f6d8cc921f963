//! Held-out expected log predictive density and pairwise model comparison.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decode::smoothed_marginals;
use crate::error::{Error, Result};
use crate::panel::{Cell, ObservationPanel};
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HeldOutCell {
    pub site: usize,
    pub time: usize,
    pub y: bool,
}

/// Which observed cells were hidden for one replication, with their values.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutPlan {
    pub cells: Vec<HeldOutCell>,
    pub fraction: f64,
    pub replication: usize,
    pub seed: u64,
}

impl HoldoutPlan {
    /// FNV-1a hash of the held-out cell set, used to match fits from the
    /// same plan. Stable across builds so it can be stored in output files.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for c in &self.cells {
            for b in (c.site as u64).to_le_bytes().into_iter().chain((c.time as u64).to_le_bytes()).chain([c.y as u8]) {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// Hides `round(fraction * n_observed)` observed cells chosen uniformly.
pub fn make_holdout(
    panel: &ObservationPanel,
    fraction: f64,
    seed: u64,
    replication: usize,
) -> Result<(ObservationPanel, HoldoutPlan)> {
    if !(fraction > 0.0 && fraction < 0.5) {
        return Err(Error::Config(format!("holdout fraction {fraction} outside (0, 0.5)")));
    }
    let observed: Vec<(usize, usize, bool)> = (0..panel.n_sites())
        .flat_map(|i| (0..panel.n_times()).filter_map(move |t| panel.y(i, t).map(|y| (i, t, y))))
        .collect();
    let k = (fraction * observed.len() as f64).round() as usize;
    if k == 0 || k >= observed.len() {
        return Err(Error::InsufficientObserved { needed: k.max(1) + 1, available: observed.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    let mut picks = index::sample(&mut rng, observed.len(), k).into_vec();
    picks.sort_unstable();
    let cells: Vec<HeldOutCell> = picks
        .into_iter()
        .map(|j| {
            let (site, time, y) = observed[j];
            HeldOutCell { site, time, y }
        })
        .collect();
    let coords: Vec<(usize, usize)> = cells.iter().map(|c| (c.site, c.time)).collect();
    let masked = panel.mask_cells(&coords)?;
    Ok((masked, HoldoutPlan { cells, fraction, replication, seed }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElpdResult {
    /// `log mean_k p_k(y_cell)` for each held-out cell, in plan order.
    pub pointwise: Vec<f64>,
    pub total: f64,
    /// Monte-Carlo standard error of `total` from the finite number of draws.
    pub mc_se: f64,
    pub plan_fingerprint: u64,
}

/// Per-cell predictive density of the held-out values, mixing each draw's
/// outcome probability over the smoothed state marginals at that time.
pub fn pointwise_elpd(draws: &[ModelParams], masked: &ObservationPanel, plan: &HoldoutPlan) -> Result<ElpdResult> {
    if draws.is_empty() {
        return Err(Error::DegenerateInput("no posterior draws".into()));
    }
    for c in &plan.cells {
        if c.site >= masked.n_sites() || c.time >= masked.n_times() || masked.cell(c.site, c.time) != Cell::HeldOut {
            return Err(Error::CellNotHeldOut { site: c.site, time: c.time });
        }
    }
    let n_cells = plan.cells.len();
    let (sum, sum_sq) = draws
        .par_iter()
        .map(|p| -> Result<(Vec<f64>, Vec<f64>)> {
            let marg = smoothed_marginals(masked, p)?;
            let probs: Vec<f64> = plan
                .cells
                .iter()
                .map(|c| {
                    let month = masked.month_index(c.time);
                    marg.at(c.time)
                        .iter()
                        .enumerate()
                        .map(|(s, w)| {
                            let q = p.outcome_prob(s, c.site, month);
                            w * if c.y { q } else { 1.0 - q }
                        })
                        .sum()
                })
                .collect();
            let sq = probs.iter().map(|v| v * v).collect();
            Ok((probs, sq))
        })
        .try_reduce(
            || (vec![0.0; n_cells], vec![0.0; n_cells]),
            |mut a, b| {
                a.0.iter_mut().zip(&b.0).for_each(|(x, y)| *x += y);
                a.1.iter_mut().zip(&b.1).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let k = draws.len() as f64;
    let mut var_total = 0.0;
    let pointwise: Vec<f64> = sum
        .iter()
        .zip(&sum_sq)
        .map(|(s, sq)| {
            let m = s / k;
            if k > 1.0 {
                let var = (sq / k - m * m).max(0.0) * k / (k - 1.0);
                // delta method for log of a mean
                var_total += var / (k * m * m);
            }
            m.ln()
        })
        .collect();
    Ok(ElpdResult {
        total: pointwise.iter().sum(),
        pointwise,
        mc_se: var_total.sqrt(),
        plan_fingerprint: plan.fingerprint(),
    })
}

/// Mean and standard error (`sd / sqrt(R)`) of per-replication differences
/// `a - b`. Replications must come from the same holdout plans, in order.
pub fn pairwise_elpd_diff(a: &[ElpdResult], b: &[ElpdResult]) -> Result<(f64, f64)> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::PlanMismatch(format!("{} vs {} replications", a.len(), b.len())));
    }
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        if x.plan_fingerprint != y.plan_fingerprint {
            return Err(Error::PlanMismatch(format!("replication {k} used different holdout plans")));
        }
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.total - y.total).collect();
    let mean = crate::math::mean(&d);
    let se = if d.len() > 1 { (crate::math::variance(&d) / d.len() as f64).sqrt() } else { f64::NAN };
    Ok((mean, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::oracle;
    use crate::likelihood::emission_matrix;
    use crate::likelihood::tests::{random_panel, random_params};
    use crate::math::{invlogit, logsumexp};
    use crate::params::{ModelSpec, Priors};

    #[test]
    fn one_cell_of_ten() {
        let rows = vec![vec![Some(true); 5], vec![Some(false); 5]];
        let panel = ObservationPanel::from_rows(&rows, 1).unwrap();
        let (masked, plan) = make_holdout(&panel, 0.1, 1, 0).unwrap();
        assert_eq!(plan.cells.len(), 1);
        assert_eq!(masked.n_observed(), 9);
        let c = plan.cells[0];
        assert_eq!(panel.y(c.site, c.time), Some(c.y));
        assert_eq!(masked.cell(c.site, c.time), Cell::HeldOut);
    }

    #[test]
    fn one_percent_of_a_large_panel() {
        // 283 800 observed cells at 1% gives 2838 held out
        assert_eq!((0.01f64 * 283_800.0).round() as usize, 2838);
        let rows: Vec<Vec<Option<bool>>> = (0..50).map(|_| vec![Some(false); 40]).collect();
        let panel = ObservationPanel::from_rows(&rows, 1).unwrap();
        let (_, plan) = make_holdout(&panel, 0.01, 2, 0).unwrap();
        assert_eq!(plan.cells.len(), 20);
    }

    #[test]
    fn insufficient_and_bad_fraction() {
        let panel = ObservationPanel::from_rows(&[vec![Some(true), None, None]], 1).unwrap();
        assert!(matches!(make_holdout(&panel, 0.1, 1, 0), Err(Error::InsufficientObserved { .. })));
        assert!(make_holdout(&panel, 0.7, 1, 0).is_err());
    }

    #[test]
    fn overlap_between_seeds_is_near_fraction_squared() {
        let rows: Vec<Vec<Option<bool>>> = (0..100).map(|_| vec![Some(true); 100]).collect();
        let panel = ObservationPanel::from_rows(&rows, 1).unwrap();
        let (_, a) = make_holdout(&panel, 0.1, 1, 0).unwrap();
        let (_, b) = make_holdout(&panel, 0.1, 2, 0).unwrap();
        let set: std::collections::HashSet<_> = a.cells.iter().map(|c| (c.site, c.time)).collect();
        let overlap = b.cells.iter().filter(|c| set.contains(&(c.site, c.time))).count() as f64;
        // hypergeometric mean 100 and sd about 9
        assert!((overlap - 100.0).abs() < 40.0, "overlap {overlap}");
    }

    #[test]
    fn single_state_half_probability() {
        let spec = ModelSpec::simpler(1, 1);
        let mut p = ModelParams::baseline(&spec, &Priors::default());
        p.mu = vec![0.0];
        p.mu1 = 0.0;
        p.mu_last = 0.0;
        let panel = ObservationPanel::from_rows(&[vec![Some(true), Some(false), Some(true), Some(true)]], 1).unwrap();
        let (masked, plan) = make_holdout(&panel, 0.25, 3, 0).unwrap();
        let r = pointwise_elpd(&[p], &masked, &plan).unwrap();
        assert!((r.total - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn single_draw_single_state_is_bernoulli_lpmf() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let panel = random_panel(&mut rng, 4, 6, 0.1);
        let p = random_params(&mut rng, ModelSpec::new(1, 4));
        let (masked, plan) = make_holdout(&panel, 0.2, 5, 0).unwrap();
        let r = pointwise_elpd(&[p.clone()], &masked, &plan).unwrap();
        for (c, v) in plan.cells.iter().zip(&r.pointwise) {
            let q = invlogit(p.eta(0, c.site, masked.month_index(c.time)));
            let expected = if c.y { q.ln() } else { (1.0 - q).ln() };
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_enumeration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let panel = random_panel(&mut rng, 3, 5, 0.2);
        let spec = ModelSpec::new(3, 3);
        let draws: Vec<ModelParams> = (0..3).map(|_| random_params(&mut rng, spec)).collect();
        let (masked, plan) = make_holdout(&panel, 0.2, 7, 1).unwrap();
        let r = pointwise_elpd(&draws, &masked, &plan).unwrap();
        for (c, v) in plan.cells.iter().zip(&r.pointwise) {
            let mut per_draw = Vec::new();
            for p in &draws {
                let omega = emission_matrix(&masked, p).unwrap();
                let paths = oracle::all_paths(3, 5);
                let lps: Vec<f64> = paths.iter().map(|x| oracle::joint(&p.rho, &p.a, &omega, x)).collect();
                let z = logsumexp(&lps);
                let mut pk = 0.0;
                for (x, lp) in paths.iter().zip(&lps) {
                    let q = invlogit(p.eta(x[c.time], c.site, masked.month_index(c.time)));
                    pk += (lp - z).exp() * if c.y { q } else { 1.0 - q };
                }
                per_draw.push(pk);
            }
            let expected = (per_draw.iter().sum::<f64>() / 3.0).ln();
            assert!((v - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn unmasked_cell_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let panel = random_panel(&mut rng, 3, 5, 0.0);
        let p = random_params(&mut rng, ModelSpec::new(2, 3));
        let (_, plan) = make_holdout(&panel, 0.2, 1, 0).unwrap();
        let c = plan.cells[0];
        let err = pointwise_elpd(&[p], &panel, &plan).unwrap_err();
        assert!(matches!(err, Error::CellNotHeldOut { site, time } if site == c.site && time == c.time));
    }

    #[test]
    fn pairwise_differences() {
        let mk = |total: f64, fp: u64| ElpdResult { pointwise: vec![], total, mc_se: 0.0, plan_fingerprint: fp };
        let a = vec![mk(-10.0, 1), mk(-12.0, 2), mk(-11.0, 3)];
        assert_eq!(pairwise_elpd_diff(&a, &a).unwrap(), (0.0, 0.0));
        let b = vec![mk(-11.0, 1), mk(-12.0, 2), mk(-13.0, 3)];
        let (m, se) = pairwise_elpd_diff(&a, &b).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let c = vec![mk(-11.0, 1), mk(-12.0, 9), mk(-13.0, 3)];
        assert!(matches!(pairwise_elpd_diff(&a, &c), Err(Error::PlanMismatch(_))));
        assert!(matches!(pairwise_elpd_diff(&a, &b[..2]), Err(Error::PlanMismatch(_))));
    }
}
