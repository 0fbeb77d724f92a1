use rand::Rng;
use serde::Serialize;

use super::ForwardModel;
use crate::error::Result;
use crate::rng::substream;

/// Pairs further apart than this in sup-norm must have distinguishable data.
pub const INJECTIVITY_THETA_GAP: f64 = 1e-2;
/// Frobenius distance below which two measurement matrices count as equal.
pub const INJECTIVITY_G_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairRecord {
    pub theta: Vec<f64>,
    pub theta_prime: Vec<f64>,
    /// `|theta - theta'|_inf`
    pub theta_gap: f64,
    /// `|G_theta - G_theta'|_F`
    pub g_gap: f64,
    pub ratio: f64,
}

impl PairRecord {
    pub fn is_flagged(&self) -> bool {
        self.theta_gap > INJECTIVITY_THETA_GAP && self.g_gap < INJECTIVITY_G_FLOOR
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Largest observed `|theta - theta'|_inf / |G_theta - G_theta'|_F`.
    pub max_ratio: f64,
    pub min_g_gap: f64,
    pub pairs: Vec<PairRecord>,
    /// Indices into `pairs` of injectivity violations.
    pub flags: Vec<usize>,
}

/// `None` when the two parameters coincide.
pub fn probe_pair(model: &dyn ForwardModel, theta: &[f64], theta_prime: &[f64]) -> Result<Option<PairRecord>> {
    let theta_gap = theta.iter().zip(theta_prime).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if theta_gap == 0.0 {
        return Ok(None);
    }
    let g = model.forward_matrix(theta)?;
    let gp = model.forward_matrix(theta_prime)?;
    let g_gap = (&g.g - &gp.g).norm();
    Ok(Some(PairRecord {
        theta: theta.to_vec(),
        theta_prime: theta_prime.to_vec(),
        theta_gap,
        g_gap,
        ratio: theta_gap / g_gap,
    }))
}

/// Samples `n_pairs` independent uniform pairs in the parameter box.
pub fn stability_probe(model: &dyn ForwardModel, n_pairs: usize, seed: u64) -> Result<StabilityReport> {
    let space = model.space();
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut index = 0u64;
    while pairs.len() < n_pairs {
        let mut rng = substream(seed, "stability", index);
        index += 1;
        let mut draw = || (0..space.dim).map(|_| rng.random_range(space.lower..=space.upper)).collect::<Vec<_>>();
        let theta = draw();
        let theta_prime = draw();
        if let Some(record) = probe_pair(model, &theta, &theta_prime)? {
            pairs.push(record);
        }
    }
    let max_ratio = pairs.iter().map(|p| p.ratio).fold(0.0, f64::max);
    let min_g_gap = pairs.iter().map(|p| p.g_gap).fold(f64::INFINITY, f64::min);
    let flags = pairs.iter().enumerate().filter(|(_, p)| p.is_flagged()).map(|(i, _)| i).collect();
    Ok(StabilityReport { max_ratio, min_g_gap, pairs, flags })
}
