//! Small statistics helpers shared by the experiments.

use num_complex::Complex64;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Least-squares fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "need at least two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    LinearFit { slope, intercept: my - slope * mx, r_squared }
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).slope
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rx = ranks(x);
    let ry = ranks(y);
    let fit = linear_fit(&rx, &ry);
    let sign = fit.slope.signum();
    sign * fit.r_squared.sqrt()
}

/// p-value of Pearson's chi-square test against equal expected counts.
pub fn chi_square_uniform_pvalue(counts: &[f64]) -> f64 {
    let k = counts.len();
    assert!(k >= 2);
    let total: f64 = counts.iter().sum();
    let expected = total / k as f64;
    let stat: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((k - 1) as f64).expect("valid degrees of freedom");
    1.0 - dist.cdf(stat)
}

/// Kolmogorov-Smirnov statistic of samples against Uniform(0, 1).
pub fn ks_uniform_statistic(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let lo = v - i as f64 / n;
            let hi = (i + 1) as f64 / n - v;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at significance `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Jackknife over equal-size blocks: returns `(mean, standard error)` of the
/// complex mean given per-block sums and counts.
pub fn jackknife_complex(block_sums: &[Complex64], block_counts: &[usize]) -> (Complex64, f64) {
    let b = block_sums.len();
    assert!(b >= 2 && b == block_counts.len());
    let total: Complex64 = block_sums.iter().copied().sum();
    let count: usize = block_counts.iter().sum();
    let mean = total / count as f64;
    let loo: Vec<Complex64> = block_sums
        .iter()
        .zip(block_counts)
        .map(|(s, c)| (total - s) / (count - c) as f64)
        .collect();
    let loo_mean: Complex64 = loo.iter().copied().sum::<Complex64>() / b as f64;
    let var = (b as f64 - 1.0) / b as f64 * loo.iter().map(|v| (v - loo_mean).norm_sqr()).sum::<f64>();
    (mean, var.sqrt())
}
