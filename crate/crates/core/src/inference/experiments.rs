use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diagnostics::{credible_radius, posterior_covariance, posterior_mean};
use super::mcmc::{rwm_sample, Chain, McmcSettings, Proposal};
use super::prior::PriorSpec;
use super::Posterior;
use crate::error::{EitError, Result};
use crate::forward::ForwardModel;
use crate::rng::child_seed;
use crate::statmodel::{fisher_scoring, information_matrix, simulate, Dataset, InformationMatrix};

/// How the random-walk proposal is chosen for each dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    Fixed(Proposal),
    /// `factor * 2.38^2 / D * (N N_thetahat)^{-1}` at the maximum likelihood
    /// estimate `thetahat`.
    Laplace { factor: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerPlan {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub step: StepRule,
    pub adapt: bool,
}

impl SamplerPlan {
    pub fn settings(&self, proposal: Proposal, seed: u64) -> McmcSettings {
        McmcSettings { iters: self.iters, burnin: self.burnin, thin: self.thin, proposal, adapt: self.adapt, seed }
    }
}

pub struct PosteriorRun {
    /// Maximum likelihood estimate used as the starting point.
    pub init: Vec<f64>,
    pub info_at_init: InformationMatrix,
    pub chain: Chain,
    pub mean: Vec<f64>,
}

/// Samples the posterior of one dataset, started at the maximum likelihood
/// estimate (Fisher scoring from the centre of the box).
pub fn run_posterior(
    model: &dyn ForwardModel,
    data: &Dataset,
    prior: &PriorSpec,
    plan: &SamplerPlan,
    seed: u64,
) -> Result<PosteriorRun> {
    if data.is_empty() {
        return Err(EitError::InvalidInput("posterior sampling needs at least one observation".into()));
    }
    let posterior = Posterior::new(model, data, prior.clone())?;
    let space = model.space();
    let init = fisher_scoring(model, &posterior.stats, &space.center(), 50, 1e-10)?;
    let info_at_init = information_matrix(model, &init)?;
    let proposal = match &plan.step {
        StepRule::Fixed(p) => p.clone(),
        StepRule::Laplace { factor } => {
            let d = space.dim as f64;
            let cov = info_at_init.inverse()? * (factor * 2.38 * 2.38 / (d * data.len() as f64));
            Proposal::Covariance(cov)
        }
    };
    let chain = rwm_sample(|t| posterior.log_density(t), Some(space), &init, &plan.settings(proposal, seed))?;
    let mean = posterior_mean(&chain.samples)?;
    Ok(PosteriorRun { init, info_at_init, chain, mean })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub n: usize,
    pub seed: u64,
    pub mle: Vec<f64>,
    pub posterior_mean: Vec<f64>,
    pub posterior_cov: Vec<Vec<f64>>,
    pub radius: f64,
    /// `|theta0 - posterior mean|`
    pub error: f64,
    pub covered: bool,
    pub acceptance_rate: f64,
    pub min_ess: f64,
    pub warnings: Vec<String>,
}

fn record(theta0: &[f64], n: usize, replicate: usize, seed: u64, run: &PosteriorRun, alpha: f64) -> Result<ReplicateRecord> {
    let radius = credible_radius(&run.chain.samples, &run.mean, alpha)?;
    let error = theta0.iter().zip(&run.mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let cov = posterior_covariance(&run.chain.samples)?;
    Ok(ReplicateRecord {
        replicate,
        n,
        seed,
        mle: run.init.clone(),
        posterior_mean: run.mean.clone(),
        posterior_cov: (0..cov.nrows()).map(|i| cov.row(i).iter().copied().collect()).collect(),
        radius,
        error,
        covered: error < radius,
        acceptance_rate: run.chain.acceptance_rate,
        min_ess: run.chain.min_ess(),
        warnings: run.chain.warnings.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageReport {
    pub n: usize,
    pub alpha: f64,
    pub coverage_rate: f64,
    pub records: Vec<ReplicateRecord>,
}

/// Frequentist coverage of the `1 - alpha` credible ball around the
/// posterior mean. Replicate `r` uses the child seed `(seed, "replicate", r)`,
/// so results do not depend on the number of worker threads.
pub fn coverage_experiment(
    model: &dyn ForwardModel,
    theta0: &[f64],
    n: usize,
    replicates: usize,
    alpha: f64,
    prior: &PriorSpec,
    plan: &SamplerPlan,
    seed: u64,
) -> Result<CoverageReport> {
    model.space().check_interior(theta0)?;
    if replicates == 0 || n == 0 {
        return Err(EitError::InvalidInput("coverage needs N >= 1 and at least one replicate".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EitError::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let records = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let rseed = child_seed(seed, "replicate", r as u64);
            let data = simulate(model, theta0, n, child_seed(rseed, "data", 0))?;
            let run = run_posterior(model, &data, prior, plan, child_seed(rseed, "chain", 0))?;
            record(theta0, n, r, rseed, &run, alpha)
        })
        .collect::<Result<Vec<_>>>()?;
    let coverage_rate = records.iter().filter(|r| r.covered).count() as f64 / replicates as f64;
    Ok(CoverageReport { n, alpha, coverage_rate, records })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub n_grid: Vec<usize>,
    pub rmse: Vec<f64>,
    /// Delta-method standard error of each RMSE.
    pub rmse_se: Vec<f64>,
    pub loglog_slope: f64,
    /// `|mean(N Cov_post) - N_theta0^{-1}|_2 / |N_theta0^{-1}|_2` per N.
    pub cov_relative_gap: Vec<f64>,
    pub records: Vec<Vec<ReplicateRecord>>,
}

/// Posterior-mean error across sample sizes. Each replicate draws one dataset
/// of the largest size and uses its prefixes, so the designs are nested.
pub fn rate_experiment(
    model: &dyn ForwardModel,
    theta0: &[f64],
    n_grid: &[usize],
    replicates: usize,
    prior: &PriorSpec,
    plan: &SamplerPlan,
    seed: u64,
) -> Result<RateReport> {
    model.space().check_interior(theta0)?;
    if n_grid.len() < 3 || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(EitError::InvalidInput("N_grid must be strictly increasing with at least 3 positive entries".into()));
    }
    if replicates == 0 {
        return Err(EitError::InvalidInput("rate needs at least one replicate".into()));
    }
    let n_max = *n_grid.last().unwrap();
    let per_replicate = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let rseed = child_seed(seed, "replicate", r as u64);
            let data = simulate(model, theta0, n_max, child_seed(rseed, "data", 0))?;
            n_grid
                .iter()
                .enumerate()
                .map(|(g, &n)| {
                    let run = run_posterior(model, &data.prefix(n), prior, plan, child_seed(rseed, "chain", g as u64))?;
                    record(theta0, n, r, rseed, &run, 0.1)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let info = information_matrix(model, theta0)?;
    let target = info.inverse()?;
    let target_norm = SymmetricEigen::new(target.clone()).eigenvalues.amax();
    let d = theta0.len();
    let mut records = vec![Vec::with_capacity(replicates); n_grid.len()];
    for reps in per_replicate {
        for (g, rec) in reps.into_iter().enumerate() {
            records[g].push(rec);
        }
    }
    let mut rmse = Vec::new();
    let mut rmse_se = Vec::new();
    let mut cov_relative_gap = Vec::new();
    for (g, recs) in records.iter().enumerate() {
        let sq: Vec<f64> = recs.iter().map(|r| r.error * r.error).collect();
        let mse = sq.iter().sum::<f64>() / sq.len() as f64;
        let var = sq.iter().map(|s| (s - mse).powi(2)).sum::<f64>() / (sq.len() as f64 - 1.0).max(1.0);
        let r = mse.sqrt();
        rmse.push(r);
        rmse_se.push((var / sq.len() as f64).sqrt() / (2.0 * r));
        let mut mean_cov = DMatrix::zeros(d, d);
        for rec in recs {
            mean_cov += DMatrix::from_fn(d, d, |i, j| rec.posterior_cov[i][j]);
        }
        mean_cov *= n_grid[g] as f64 / recs.len() as f64;
        cov_relative_gap.push(SymmetricEigen::new(mean_cov - &target).eigenvalues.amax() / target_norm);
    }
    let ns: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    let loglog_slope = loglog_slope(&ns, &rmse);
    Ok(RateReport { n_grid: n_grid.to_vec(), rmse, rmse_se, loglog_slope, cov_relative_gap, records })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_inverse_square_root_sequence() {
        let ns = [250.0, 1000.0, 4000.0];
        let ys: Vec<f64> = ns.iter().map(|n: &f64| 3.7 / n.sqrt()).collect();
        assert!((loglog_slope(&ns, &ys) + 0.5).abs() < 1e-12);
    }
}
