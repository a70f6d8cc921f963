//! Rank-normalized split-R-hat and bulk/tail effective sample sizes.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::math::{mean, quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EssKind {
    Bulk,
    Tail,
}

fn split_chains(chains: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if chains.is_empty() {
        return Err(Error::DegenerateInput("no chains".into()));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::DegenerateInput("chains differ in length".into()));
    }
    if n < 4 {
        return Err(Error::DegenerateInput(format!("need at least 4 draws per chain, got {n}")));
    }
    let half = n / 2;
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        out.push(c[..half].to_vec());
        out.push(c[n - half..].to_vec());
    }
    Ok(out)
}

/// Normal scores of fractional ranks over all draws (ties share the average rank).
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = chains.iter().map(Vec::len).sum();
    let mut flat: Vec<(f64, usize)> =
        chains.iter().flatten().copied().enumerate().map(|(k, v)| (v, k)).collect();
    flat.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ranks = vec![0.0; total];
    let mut k = 0;
    while k < total {
        let mut j = k;
        while j + 1 < total && flat[j + 1].0 == flat[k].0 {
            j += 1;
        }
        let avg = (k + j) as f64 / 2.0 + 1.0;
        for item in &flat[k..=j] {
            ranks[item.1] = avg;
        }
        k = j + 1;
    }
    let normal = Normal::standard();
    let s = total as f64;
    let mut out = Vec::with_capacity(chains.len());
    let mut offset = 0;
    for c in chains {
        out.push(
            (0..c.len())
                .map(|i| normal.inverse_cdf((ranks[offset + i] - 0.375) / (s + 0.25)))
                .collect(),
        );
        offset += c.len();
    }
    out
}

/// Classic potential scale reduction on (already split) chains.
fn basic_rhat(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let grand = mean(&means);
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if w <= 0.0 {
        return if b > 0.0 { f64::INFINITY } else { f64::NAN };
    }
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

fn within_variance_is_zero(chains: &[Vec<f64>]) -> bool {
    chains.iter().all(|c| c.iter().all(|&v| v == c[0]))
}

/// Rank-normalized split-R-hat: the larger of the bulk and folded versions.
///
/// Chains with zero within-chain variance but different values give
/// `Ok(inf)`; fully constant input is [`Error::DegenerateInput`].
pub fn rhat(chains: &[Vec<f64>]) -> Result<f64> {
    let split = split_chains(chains)?;
    if within_variance_is_zero(&split) {
        let first = split[0][0];
        if split.iter().all(|c| c[0] == first) {
            return Err(Error::DegenerateInput("constant chains".into()));
        }
        return Ok(f64::INFINITY);
    }
    let bulk = basic_rhat(&rank_normalize(&split));
    let all: Vec<f64> = chains.iter().flatten().copied().collect();
    let med = quantile(&all, 0.5);
    let folded: Vec<Vec<f64>> = split.iter().map(|c| c.iter().map(|v| (v - med).abs()).collect()).collect();
    let tail = basic_rhat(&rank_normalize(&folded));
    Ok(bulk.max(tail))
}

/// Effective sample size of the mean over (already split) chains, using
/// Geyer's initial monotone sequence.
fn ess_raw(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let centered: Vec<Vec<f64>> =
        chains.iter().zip(&means).map(|(c, mu)| c.iter().map(|v| v - mu).collect()).collect();
    let acov = |lag: usize| -> f64 {
        centered
            .iter()
            .map(|c| c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
            .sum::<f64>()
            / m as f64
    };
    let mean_var = acov(0) * n as f64 / (n as f64 - 1.0);
    let mut var_plus = mean_var * (n as f64 - 1.0) / n as f64;
    if m > 1 {
        let g = mean(&means);
        var_plus += means.iter().map(|x| (x - g).powi(2)).sum::<f64>() / (m as f64 - 1.0);
    }
    let mut rho = vec![0.0; n];
    rho[0] = 1.0;
    let mut even = 1.0;
    let mut odd = 1.0 - (mean_var - acov(1)) / var_plus;
    rho[1] = odd;
    let mut t = 1;
    while t + 3 < n && even + odd > 0.0 {
        even = 1.0 - (mean_var - acov(t + 1)) / var_plus;
        odd = 1.0 - (mean_var - acov(t + 2)) / var_plus;
        if even + odd >= 0.0 {
            rho[t + 1] = even;
            rho[t + 2] = odd;
        }
        t += 2;
    }
    let max_t = t.saturating_sub(2).max(1);
    if rho[max_t + 1] > 0.0 {
        rho[max_t + 1] = rho[max_t + 1].max(0.0);
    }
    // initial monotone sequence
    let mut k = 1;
    while k + 2 <= max_t {
        if rho[k + 1] + rho[k + 2] > rho[k - 1] + rho[k] {
            let avg = (rho[k - 1] + rho[k]) / 2.0;
            rho[k + 1] = avg;
            rho[k + 2] = avg;
        }
        k += 2;
    }
    let total = (m * n) as f64;
    let mut tau = -1.0 + 2.0 * rho[..=max_t].iter().sum::<f64>() + rho[max_t + 1].max(0.0);
    tau = tau.max(1.0 / total.log10());
    total / tau
}

/// Bulk (rank-normalized) or tail (5%/95% quantile indicator) ESS.
pub fn ess(chains: &[Vec<f64>], kind: EssKind) -> Result<f64> {
    let split = split_chains(chains)?;
    if within_variance_is_zero(&split) {
        return Err(Error::DegenerateInput("constant chains".into()));
    }
    match kind {
        EssKind::Bulk => Ok(ess_raw(&rank_normalize(&split))),
        EssKind::Tail => {
            let all: Vec<f64> = chains.iter().flatten().copied().collect();
            let mut values = Vec::with_capacity(2);
            for q in [0.05, 0.95] {
                let cut = quantile(&all, q);
                let ind: Vec<Vec<f64>> = split
                    .iter()
                    .map(|c| c.iter().map(|&v| if v <= cut { 1.0 } else { 0.0 }).collect())
                    .collect();
                if within_variance_is_zero(&ind) {
                    continue;
                }
                values.push(ess_raw(&ind));
            }
            values
                .into_iter()
                .reduce(f64::min)
                .ok_or_else(|| Error::DegenerateInput("tail indicators are constant".into()))
        }
    }
}

/// One row of the posterior summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub param: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    /// `None` when the diagnostic is degenerate (constant draws).
    pub ess_bulk: Option<f64>,
    pub ess_tail: Option<f64>,
    pub rhat: Option<f64>,
}

pub fn summarize(param: &str, chains: &[Vec<f64>]) -> SummaryRow {
    let all: Vec<f64> = chains.iter().flatten().copied().collect();
    let mu = mean(&all);
    let sd = if all.len() > 1 { crate::math::variance(&all).sqrt() } else { 0.0 };
    SummaryRow {
        param: param.to_string(),
        mean: mu,
        sd,
        q025: quantile(&all, 0.025),
        q975: quantile(&all, 0.975),
        ess_bulk: ess(chains, EssKind::Bulk).ok(),
        ess_tail: ess(chains, EssKind::Tail).ok(),
        rhat: rhat(chains).ok(),
    }
}
