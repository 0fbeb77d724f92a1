//! Posterior sampling, posterior summaries and the frequentist experiments.

mod diagnostics;
mod experiments;
mod mcmc;
mod prior;

pub use diagnostics::{
    bvm_diagnostics, bvm_from_samples, credible_radius, histogram_tv, ks_statistic, posterior_covariance,
    posterior_mean, BvmReport, BvmThresholds,
};
pub use experiments::{
    coverage_experiment, loglog_slope, rate_experiment, run_posterior, CoverageReport, PosteriorRun,
    RateReport, ReplicateRecord, SamplerPlan, StepRule,
};
pub use mcmc::{effective_sample_size, rwm_sample, Chain, McmcSettings, Proposal};
pub use prior::PriorSpec;

use crate::forward::ForwardModel;
use crate::statmodel::SufficientStats;

/// Unnormalised log posterior `l_N(theta) + log pi(theta)` for a fixed dataset.
pub struct Posterior<'a> {
    pub model: &'a dyn ForwardModel,
    pub stats: SufficientStats,
    pub prior: PriorSpec,
}

impl<'a> Posterior<'a> {
    pub fn new(model: &'a dyn ForwardModel, data: &crate::statmodel::Dataset, prior: PriorSpec) -> crate::Result<Self> {
        prior.validate(model.space())?;
        Ok(Self { model, stats: SufficientStats::new(data), prior })
    }

    /// `-inf` outside `Theta`; forward-solver failures are propagated.
    pub fn log_density(&self, theta: &[f64]) -> crate::Result<f64> {
        let space = self.model.space();
        let lp = self.prior.log_density(space, theta);
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        let g = self.model.forward_matrix(theta)?;
        Ok(self.stats.log_likelihood(&g.g) + lp)
    }
}

/// `log_posterior(theta, Z, prior)` in one call.
pub fn log_posterior(
    model: &dyn ForwardModel,
    theta: &[f64],
    data: &crate::statmodel::Dataset,
    prior: &PriorSpec,
) -> crate::Result<f64> {
    let lp = prior.log_density(model.space(), theta);
    if lp == f64::NEG_INFINITY {
        return Ok(lp);
    }
    Ok(crate::statmodel::log_likelihood(model, theta, data)? + lp)
}
