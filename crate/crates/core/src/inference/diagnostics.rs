use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::mcmc::Chain;
use crate::error::{EitError, Result};
use crate::statmodel::InformationMatrix;

pub fn posterior_mean(samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = samples.first().ok_or_else(|| EitError::InvalidInput("empty chain".into()))?;
    let mut mean = vec![0.0; first.len()];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    let n = samples.len() as f64;
    Ok(mean.into_iter().map(|m| m / n).collect())
}

/// Sample covariance with divisor `n` (zero for a point mass).
pub fn posterior_covariance(samples: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let mean = DVector::from_vec(posterior_mean(samples)?);
    let d = mean.len();
    let mut cov = DMatrix::zeros(d, d);
    for s in samples {
        let r = DVector::from_column_slice(s) - &mean;
        cov += &r * r.transpose();
    }
    Ok(cov / samples.len() as f64)
}

/// Empirical `(1 - alpha)` quantile of `|theta_s - center|`, so that the ball
/// of this radius holds a fraction `1 - alpha` of the samples.
pub fn credible_radius(samples: &[Vec<f64>], center: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EitError::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if samples.is_empty() {
        return Err(EitError::InvalidInput("empty chain".into()));
    }
    let mut dist: Vec<f64> = samples
        .iter()
        .map(|s| s.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .collect();
    dist.sort_by(f64::total_cmp);
    let n = dist.len();
    let rank = ((1.0 - alpha) * n as f64).ceil() as usize;
    Ok(dist[rank.clamp(1, n) - 1])
}

/// Kolmogorov-Smirnov distance of a sample to the standard normal.
pub fn ks_statistic(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let std = Normal::standard();
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = std.cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BvmThresholds {
    pub mean: f64,
    pub cov_gap: f64,
    pub ks: f64,
}

impl BvmThresholds {
    pub const DESK: BvmThresholds = BvmThresholds { mean: 0.1, cov_gap: 0.15, ks: 0.05 };

    pub fn scaled(self, factor: f64) -> Self {
        Self { mean: self.mean * factor, cov_gap: self.cov_gap * factor, ks: self.ks * factor }
    }
}

/// Whitened posterior draws `w_s = sqrt(N) L^T (theta_s - center)` compared
/// with `N_D(0, I)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BvmReport {
    pub center: Vec<f64>,
    pub whitened_mean: Vec<f64>,
    pub whitened_cov: Vec<Vec<f64>>,
    pub whitened_cov_spectral_gap: f64,
    pub ks_stats: Vec<f64>,
    pub tv_proxy: f64,
    /// Gridded-histogram total variation estimate (D <= 2 only).
    pub histogram_tv: Option<f64>,
    pub n_used: f64,
}

impl BvmReport {
    pub fn passes(&self, t: BvmThresholds) -> bool {
        self.whitened_mean.iter().all(|m| m.abs() <= t.mean)
            && self.whitened_cov_spectral_gap <= t.cov_gap
            && self.tv_proxy <= t.ks
    }
}

fn whiten(samples: &[Vec<f64>], center: &[f64], info: &InformationMatrix, n: usize) -> Result<Vec<Vec<f64>>> {
    let lt = info.cholesky_factor()?.transpose();
    let root_n = (n as f64).sqrt();
    Ok(samples
        .iter()
        .map(|s| {
            let r = DVector::from_iterator(s.len(), s.iter().zip(center).map(|(a, b)| a - b));
            (&lt * r * root_n).iter().copied().collect()
        })
        .collect())
}

/// Diagnostics for raw samples; `n_used` is the sample count.
pub fn bvm_from_samples(samples: &[Vec<f64>], center: &[f64], info: &InformationMatrix, n: usize) -> Result<BvmReport> {
    if samples.is_empty() {
        return Err(EitError::InvalidInput("empty chain".into()));
    }
    if center.len() != info.n_mat.nrows() {
        return Err(EitError::Dimension { expected: info.n_mat.nrows(), found: center.len() });
    }
    let w = whiten(samples, center, info, n)?;
    let d = center.len();
    let whitened_mean = posterior_mean(&w)?;
    let cov = posterior_covariance(&w)?;
    let gap = SymmetricEigen::new(&cov - DMatrix::identity(d, d)).eigenvalues.amax();
    let ks_stats: Vec<f64> = (0..d).map(|k| ks_statistic(&w.iter().map(|s| s[k]).collect::<Vec<_>>())).collect();
    let tv_proxy = ks_stats.iter().copied().fold(0.0, f64::max);
    Ok(BvmReport {
        center: center.to_vec(),
        whitened_mean,
        whitened_cov: (0..d).map(|i| cov.row(i).iter().copied().collect()).collect(),
        whitened_cov_spectral_gap: gap,
        ks_stats,
        tv_proxy,
        histogram_tv: histogram_tv(&w, 12),
        n_used: samples.len() as f64,
    })
}

/// Diagnostics for a chain; `n_used` is the smallest per-coordinate ESS.
pub fn bvm_diagnostics(chain: &Chain, center: &[f64], info: &InformationMatrix, n: usize) -> Result<BvmReport> {
    let mut report = bvm_from_samples(&chain.samples, center, info, n)?;
    report.n_used = chain.min_ess().min(chain.samples.len() as f64);
    Ok(report)
}

/// Total variation between the histogram of whitened draws and `N_D(0, I)`
/// on a `bins^D` grid over `[-4, 4]^D` plus one outer cell. Only for `D <= 2`.
pub fn histogram_tv(whitened: &[Vec<f64>], bins: usize) -> Option<f64> {
    let d = whitened.first()?.len();
    if d == 0 || d > 2 || bins == 0 {
        return None;
    }
    let (lo, hi) = (-4.0, 4.0);
    let width = (hi - lo) / bins as f64;
    let cells = bins.pow(d as u32);
    let mut counts = vec![0usize; cells + 1];
    for w in whitened {
        let mut idx = 0;
        let mut outside = false;
        for &x in w {
            if !(lo..hi).contains(&x) {
                outside = true;
                break;
            }
            idx = idx * bins + (((x - lo) / width) as usize).min(bins - 1);
        }
        counts[if outside { cells } else { idx }] += 1;
    }
    let std = Normal::standard();
    let interval: Vec<f64> = (0..bins)
        .map(|b| std.cdf(lo + (b + 1) as f64 * width) - std.cdf(lo + b as f64 * width))
        .collect();
    let n = whitened.len() as f64;
    let mut tv = 0.0;
    let mut inner_mass = 0.0;
    for (cell, &c) in counts[..cells].iter().enumerate() {
        let p = if d == 1 { interval[cell] } else { interval[cell / bins] * interval[cell % bins] };
        inner_mass += p;
        tv += (c as f64 / n - p).abs();
    }
    tv += (counts[cells] as f64 / n - (1.0 - inner_mass)).abs();
    Some(0.5 * tv)
}
