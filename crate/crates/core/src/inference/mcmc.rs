use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{EitError, Result};
use crate::param::ParameterBox;
use crate::rng::substream;

/// Target acceptance rate of the burn-in step-size adaptation.
const TARGET_ACCEPTANCE: f64 = 0.234;

/// Gaussian random-walk increment: `scale * L z` with `L L^T` the shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Proposal {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Covariance(DMatrix<f64>),
}

impl Proposal {
    fn factor(&self, dim: usize) -> Result<DMatrix<f64>> {
        match self {
            Proposal::Scalar(s) if *s >= 0.0 && s.is_finite() => Ok(DMatrix::identity(dim, dim) * *s),
            Proposal::Diagonal(d) if d.len() == dim && d.iter().all(|s| *s >= 0.0 && s.is_finite()) => {
                Ok(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
            }
            Proposal::Covariance(c) if c.nrows() == dim && c.ncols() == dim => c
                .clone()
                .cholesky()
                .map(|ch| ch.l())
                .ok_or_else(|| EitError::InvalidInput("proposal covariance is not positive definite".into())),
            other => Err(EitError::InvalidInput(format!("invalid proposal {other:?} for dimension {dim}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcSettings {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub proposal: Proposal,
    pub adapt: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Chain {
    /// Iteration number (1-based) of each retained sample.
    pub iterations: Vec<usize>,
    pub samples: Vec<Vec<f64>>,
    pub log_posts: Vec<f64>,
    /// Acceptance rate after burn-in.
    pub acceptance_rate: f64,
    pub ess: Vec<f64>,
    pub seed: u64,
    /// Random-walk scale multiplier in force after burn-in.
    pub final_scale: f64,
    pub warnings: Vec<String>,
}

impl Chain {
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn min_ess(&self) -> f64 {
        self.ess.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn sample_covariance(xs: &[Vec<f64>]) -> DMatrix<f64> {
    let d = xs[0].len();
    let n = xs.len() as f64;
    let mut mean = DVector::zeros(d);
    for x in xs {
        mean += DVector::from_column_slice(x);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for x in xs {
        let r = DVector::from_column_slice(x) - &mean;
        cov += &r * r.transpose();
    }
    cov / (n - 1.0).max(1.0)
}

/// Random-walk Metropolis.
///
/// With `adapt`, burn-in tunes the proposal: the scale follows a
/// Robbins-Monro recursion toward 23.4% acceptance, and at 40% and 70% of
/// burn-in the proposal shape is replaced by `2.38^2 / D` times the sample
/// covariance of the preceding burn-in window. Everything is frozen
/// afterwards, so retained samples come from a fixed Metropolis kernel.
pub fn rwm_sample<F>(mut logdensity: F, support: Option<&ParameterBox>, init: &[f64], settings: &McmcSettings) -> Result<Chain>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let d = init.len();
    if d == 0 {
        return Err(EitError::InvalidInput("initial point is empty".into()));
    }
    if settings.iters <= settings.burnin {
        return Err(EitError::InvalidInput(format!(
            "iters ({}) must exceed burnin ({})",
            settings.iters, settings.burnin
        )));
    }
    if settings.thin == 0 {
        return Err(EitError::InvalidInput("thin must be >= 1".into()));
    }
    if let Some(space) = support {
        space.check(init)?;
    }
    let mut current = init.to_vec();
    let mut current_lp = logdensity(&current)?;
    if !current_lp.is_finite() {
        return Err(EitError::InvalidInput(format!("log density is not finite at the initial point {init:?}")));
    }

    let mut factor = settings.proposal.factor(d)?;
    let mut log_scale = 0.0f64;
    let mut rm_step = 0usize;
    let shape_updates = [settings.burnin * 2 / 5, settings.burnin * 7 / 10];
    let mut window_start = 0usize;
    let mut history: Vec<Vec<f64>> = Vec::new();

    let mut rng = substream(settings.seed, "mcmc", 0);
    let mut chain = Chain {
        iterations: Vec::new(),
        samples: Vec::new(),
        log_posts: Vec::new(),
        acceptance_rate: 0.0,
        ess: Vec::new(),
        seed: settings.seed,
        final_scale: 1.0,
        warnings: Vec::new(),
    };
    let mut accepted = 0usize;
    let mut proposal = vec![0.0; d];

    for t in 1..=settings.iters {
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let step = &factor * z * log_scale.exp();
        for (p, (c, s)) in proposal.iter_mut().zip(current.iter().zip(step.iter())) {
            *p = c + s;
        }
        let inside = support.is_none_or(|s| s.contains(&proposal));
        let proposal_lp = if inside { logdensity(&proposal)? } else { f64::NEG_INFINITY };
        let log_ratio = proposal_lp - current_lp;
        let accept_prob = if log_ratio >= 0.0 { 1.0 } else { log_ratio.exp() };
        let u: f64 = rng.random();
        if u < accept_prob {
            current.copy_from_slice(&proposal);
            current_lp = proposal_lp;
            if t > settings.burnin {
                accepted += 1;
            }
        }

        if t <= settings.burnin {
            if settings.adapt {
                rm_step += 1;
                log_scale += (accept_prob - TARGET_ACCEPTANCE) / (rm_step as f64).powf(0.6);
                log_scale = log_scale.clamp(-30.0, 10.0);
                history.push(current.clone());
                if shape_updates.contains(&t) && t - window_start >= 20 * d.max(5) {
                    let cov = sample_covariance(&history[window_start..t]) * (2.38 * 2.38 / d as f64);
                    if let Some(ch) = cov.cholesky() {
                        factor = ch.l();
                        log_scale = 0.0;
                        rm_step = 0;
                    }
                    window_start = t;
                }
            }
        } else if (t - settings.burnin) % settings.thin == 0 {
            chain.iterations.push(t);
            chain.samples.push(current.clone());
            chain.log_posts.push(current_lp);
        }
    }

    chain.acceptance_rate = accepted as f64 / (settings.iters - settings.burnin) as f64;
    chain.final_scale = log_scale.exp();
    chain.ess = if chain.samples.is_empty() {
        vec![0.0; d]
    } else {
        (0..d)
            .map(|k| effective_sample_size(&chain.samples.iter().map(|s| s[k]).collect::<Vec<_>>()))
            .collect()
    };
    if !(0.1..=0.5).contains(&chain.acceptance_rate) {
        chain.warnings.push(format!("acceptance rate {:.3} outside [0.1, 0.5]", chain.acceptance_rate));
    }
    Ok(chain)
}

/// Geyer's initial positive sequence estimator, capped at the sample count.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let autocov = |lag: usize| centred[..n - lag].iter().zip(&centred[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let c0 = autocov(0);
    if c0 <= 0.0 {
        return n as f64;
    }
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = (autocov(2 * m) + autocov(2 * m + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    (n as f64 / tau).min(n as f64)
}
