//! Small numerical helpers shared across modules.

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Logistic function `1 / (1 + exp(-x))`, evaluated without overflow.
#[inline]
pub fn invlogit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `log(1 + exp(x))`.
#[inline]
pub fn log1pexp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Bernoulli log-pmf of `y` at success probability `invlogit(eta)`.
#[inline]
pub fn bernoulli_logit_lpmf(y: bool, eta: f64) -> f64 {
    if y {
        -log1pexp(-eta)
    } else {
        -log1pexp(eta)
    }
}

pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

#[inline]
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn normal_lpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// `log(1 - Phi(z))` for the standard normal CDF `Phi`.
pub fn log_normal_ccdf(z: f64) -> f64 {
    if z < 0.0 {
        (-0.5 * erfc(-z / std::f64::consts::SQRT_2)).ln_1p()
    } else if z < 25.0 {
        (0.5 * erfc(z / std::f64::consts::SQRT_2)).ln()
    } else {
        // Mills-ratio asymptotic expansion
        let z2 = z * z;
        -0.5 * z2 - z.ln() - LN_SQRT_2PI + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

/// Derivative of [`log_normal_ccdf`] with respect to `z`, i.e. the negated
/// inverse Mills ratio.
pub fn d_log_normal_ccdf(z: f64) -> f64 {
    let log_pdf = -0.5 * z * z - LN_SQRT_2PI;
    -(log_pdf - log_normal_ccdf(z)).exp()
}

/// Dirichlet log-density with the full normalizing constant.
pub fn dirichlet_lpdf(x: &[f64], alpha: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), alpha.len());
    let a0: f64 = alpha.iter().sum();
    let mut lp = ln_gamma(a0);
    for (&xi, &ai) in x.iter().zip(alpha) {
        lp -= ln_gamma(ai);
        if ai != 1.0 {
            lp += (ai - 1.0) * xi.ln();
        }
    }
    lp
}

/// Empirical quantile with linear interpolation between order statistics
/// (the "type 7" definition). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&v, q)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}
