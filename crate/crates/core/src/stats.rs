//! Goodness-of-fit statistics used by the diagnostic and limit-law modules:
//! one- and two-sample Kolmogorov-Smirnov, chi-square atom-frequency tests,
//! weighted multinomial resampling, and moment summaries.

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// One-sample KS statistic of `data` against the CDF `cdf`. Data need not be
/// sorted.
pub fn ks_one_sample<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> f64 {
    let mut xs = data.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Two-sample KS statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// Survival function of the Kolmogorov distribution,
/// P(K > x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2).
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut s = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * x * x).exp();
        s += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// c(level) with P(K > c) = level (e.g. c(0.01) ~ 1.6276).
pub fn kolmogorov_quantile(level: f64) -> f64 {
    let (mut lo, mut hi) = (1e-6, 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One-sample KS critical value at `level` for sample size n
/// (Stephens' small-sample denominator).
pub fn ks_one_sample_critical(n: usize, level: f64) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_quantile(level) / (sn + 0.12 + 0.11 / sn)
}

/// Two-sample KS critical value at `level` for sizes n and m.
pub fn ks_two_sample_critical(n: usize, m: usize, level: f64) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    kolmogorov_quantile(level) * ((nf + mf) / (nf * mf)).sqrt()
}

/// Dvoretzky-Kiefer-Wolfowitz band half-width at confidence 1 - level.
pub fn dkw_band(n: usize, level: f64) -> f64 {
    ((2.0 / level).ln() / (2.0 * n as f64)).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).unwrap().cdf(x)
}

/// Chi-square upper critical value at `level` with `df` degrees of freedom.
pub fn chi2_critical(df: usize, level: f64) -> f64 {
    ChiSquared::new(df as f64).unwrap().inverse_cdf(1.0 - level)
}

/// Pearson chi-square statistic of observed counts against expected
/// probabilities (expected counts scaled to the observed total).
pub fn chi2_statistic(observed: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = observed.iter().sum();
    observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = total as f64 * p;
            if e > 0.0 {
                (o as f64 - e).powi(2) / e
            } else {
                0.0
            }
        })
        .sum()
}

/// Multinomial resample of `n` indices proportional to `weights`.
pub fn weighted_resample_indices<R: Rng>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    assert!(!weights.is_empty());
    let mut cum = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        debug_assert!(w >= 0.0);
        acc += w;
        cum.push(acc);
    }
    assert!(acc > 0.0, "all resampling weights are zero");
    (0..n)
        .map(|_| {
            let u = rng.gen::<f64>() * acc;
            match cum.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
                Ok(i) => i,
                Err(i) => i.min(cum.len() - 1),
            }
        })
        .collect()
}

/// Sample mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
