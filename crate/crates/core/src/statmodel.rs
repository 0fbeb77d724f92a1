//! Random-design Gaussian regression `Y = G_theta(X) + eps`, `X` uniform on
//! the electrodes and `eps ~ N(0, I_M)`.
//!
//! Electrode indices are 0-based in memory; files use 1-based indices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{EitError, Result};
use crate::forward::{ForwardModel, SensitivityTensor};
use crate::rng::substream;

/// Smallest admissible eigenvalue of the information matrix.
pub const CONDITIONING_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub x: usize,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub observations: Vec<Observation>,
    pub electrodes: usize,
    /// Generating parameter, kept for bookkeeping only.
    pub theta_true: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(electrodes: usize, observations: Vec<Observation>) -> Result<Self> {
        for (i, o) in observations.iter().enumerate() {
            if o.x >= electrodes {
                return Err(EitError::InvalidInput(format!(
                    "observation {i}: electrode index {} outside 1..={electrodes}",
                    o.x + 1
                )));
            }
            if o.y.len() != electrodes {
                return Err(EitError::Dimension { expected: electrodes, found: o.y.len() });
            }
        }
        Ok(Self { observations, electrodes, theta_true: None, seed: None })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// The first `n` observations.
    pub fn prefix(&self, n: usize) -> Dataset {
        Dataset { observations: self.observations[..n.min(self.len())].to_vec(), ..self.clone() }
    }

    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.electrodes != other.electrodes {
            return Err(EitError::Dimension { expected: self.electrodes, found: other.electrodes });
        }
        let mut observations = self.observations.clone();
        observations.extend(other.observations.iter().cloned());
        Ok(Dataset { observations, electrodes: self.electrodes, theta_true: None, seed: None })
    }
}

/// Observation `i` only uses substream `i`, so datasets are prefix-stable.
pub fn simulate(model: &dyn ForwardModel, theta: &[f64], n: usize, seed: u64) -> Result<Dataset> {
    let g = model.forward_matrix(theta)?.g;
    let m = g.nrows();
    let observations = (0..n)
        .map(|i| {
            let mut rng = substream(seed, "simulate", i as u64);
            let x = rng.random_range(0..m);
            let y = (0..m).map(|j| g[(x, j)] + rng.sample::<f64, _>(StandardNormal)).collect();
            Observation { x, y }
        })
        .collect();
    Ok(Dataset { observations, electrodes: m, theta_true: Some(theta.to_vec()), seed: Some(seed) })
}

/// `-1/2 sum_i |G(X_i) - Y_i|^2` for a given measurement matrix.
pub fn log_likelihood_from(g: &DMatrix<f64>, data: &Dataset) -> f64 {
    let mut acc = 0.0;
    for o in &data.observations {
        for (j, y) in o.y.iter().enumerate() {
            let r = g[(o.x, j)] - y;
            acc += r * r;
        }
    }
    -0.5 * acc
}

pub fn log_likelihood(model: &dyn ForwardModel, theta: &[f64], data: &Dataset) -> Result<f64> {
    Ok(log_likelihood_from(&model.forward_matrix(theta)?.g, data))
}

/// Per-electrode counts and response sums; the likelihood depends on the data
/// only through these and `sum |Y_i|^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SufficientStats {
    pub n: usize,
    pub counts: Vec<usize>,
    /// Row `x` is `sum_{i: X_i = x} Y_i`.
    pub sums: DMatrix<f64>,
    pub sum_sq: f64,
}

impl SufficientStats {
    pub fn new(data: &Dataset) -> Self {
        let m = data.electrodes;
        let mut counts = vec![0; m];
        let mut sums = DMatrix::zeros(m, m);
        let mut sum_sq = 0.0;
        for o in &data.observations {
            counts[o.x] += 1;
            for (j, y) in o.y.iter().enumerate() {
                sums[(o.x, j)] += y;
                sum_sq += y * y;
            }
        }
        Self { n: data.len(), counts, sums, sum_sq }
    }

    pub fn log_likelihood(&self, g: &DMatrix<f64>) -> f64 {
        let mut acc = self.sum_sq;
        for (x, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let (row, sum) = (g.row(x), self.sums.row(x));
            acc += c as f64 * row.norm_squared() - 2.0 * row.dot(&sum);
        }
        -0.5 * acc
    }

    /// `sum_i score(theta, Y_i, X_i)`.
    pub fn total_score(&self, g: &DMatrix<f64>, s: &SensitivityTensor) -> Vec<f64> {
        // residual sum per electrode: S_x - n_x G(x)
        let mut resid = self.sums.clone();
        for (x, &c) in self.counts.iter().enumerate() {
            let row = g.row(x) * c as f64;
            let mut r = resid.row_mut(x);
            r -= row;
        }
        s.slices.iter().map(|sk| resid.component_mul(sk).sum()).collect()
    }
}

/// `<y - G(x), S[x][.][a]>` for each region `a`.
pub fn score_from(g: &DMatrix<f64>, s: &SensitivityTensor, y: &[f64], x: usize) -> Vec<f64> {
    s.slices
        .iter()
        .map(|sk| y.iter().enumerate().map(|(j, yj)| (yj - g[(x, j)]) * sk[(x, j)]).sum())
        .collect()
}

pub fn score_vector(model: &dyn ForwardModel, theta: &[f64], y: &[f64], x: usize) -> Result<Vec<f64>> {
    model.space().check_interior(theta)?;
    let m = model.electrode_count();
    if x >= m {
        return Err(EitError::InvalidInput(format!("electrode index {} outside 1..={m}", x + 1)));
    }
    if y.len() != m {
        return Err(EitError::Dimension { expected: m, found: y.len() });
    }
    let (g, s) = model.forward_with_sensitivity(theta)?;
    Ok(score_from(&g.g, &s, y, x))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InformationMatrix {
    pub n_mat: DMatrix<f64>,
    pub theta: Vec<f64>,
    pub min_eigenvalue: f64,
}

impl InformationMatrix {
    /// `N[a][b] = (1/M) sum_{i,j} S[i][j][a] S[i][j][b]`.
    pub fn from_tensor(s: &SensitivityTensor) -> Self {
        let d = s.regions();
        let m = s.electrodes() as f64;
        let n_mat = DMatrix::from_fn(d, d, |a, b| s.slices[a].dot(&s.slices[b]) / m);
        let min_eigenvalue = SymmetricEigen::new(n_mat.clone()).eigenvalues.min();
        Self { n_mat, theta: s.theta.clone(), min_eigenvalue }
    }

    pub fn check_conditioning(&self) -> Result<()> {
        if !(self.min_eigenvalue > CONDITIONING_FLOOR) {
            return Err(EitError::Conditioning { min_eigenvalue: self.min_eigenvalue });
        }
        Ok(())
    }

    /// Lower Cholesky factor `L` with `N = L L^T`.
    pub fn cholesky_factor(&self) -> Result<DMatrix<f64>> {
        self.check_conditioning()?;
        self.n_mat
            .clone()
            .cholesky()
            .map(|c| c.l())
            .ok_or(EitError::Conditioning { min_eigenvalue: self.min_eigenvalue })
    }

    /// `N^{-1} v` without forming the inverse.
    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_conditioning()?;
        let chol = self
            .n_mat
            .clone()
            .cholesky()
            .ok_or(EitError::Conditioning { min_eigenvalue: self.min_eigenvalue })?;
        Ok(chol.solve(&DVector::from_column_slice(v)).iter().copied().collect())
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        self.check_conditioning()?;
        self.n_mat
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or(EitError::Conditioning { min_eigenvalue: self.min_eigenvalue })
    }
}

pub fn information_matrix(model: &dyn ForwardModel, theta: &[f64]) -> Result<InformationMatrix> {
    model.space().check_interior(theta)?;
    Ok(InformationMatrix::from_tensor(&model.sensitivity_tensor(theta)?))
}

/// `Psi = theta0 + N_theta0^{-1} (1/N) sum_i score(theta0, Y_i, X_i)`.
pub fn recentering(model: &dyn ForwardModel, theta0: &[f64], data: &Dataset) -> Result<Vec<f64>> {
    recentering_with(model, theta0, &SufficientStats::new(data))
}

pub fn recentering_with(model: &dyn ForwardModel, theta0: &[f64], stats: &SufficientStats) -> Result<Vec<f64>> {
    model.space().check_interior(theta0)?;
    if stats.n == 0 {
        return Err(EitError::InvalidInput("recentering needs at least one observation".into()));
    }
    let (g, s) = model.forward_with_sensitivity(theta0)?;
    let info = InformationMatrix::from_tensor(&s);
    let mean_score: Vec<f64> = stats.total_score(&g.g, &s).iter().map(|v| v / stats.n as f64).collect();
    let step = info.solve(&mean_score)?;
    Ok(theta0.iter().zip(step).map(|(t, d)| t + d).collect())
}

/// Fisher scoring for the maximum likelihood estimate: iterates the
/// recentering map, keeping iterates a relative `margin` inside the box.
pub fn fisher_scoring(
    model: &dyn ForwardModel,
    stats: &SufficientStats,
    init: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    let space = model.space();
    let mut theta = init.to_vec();
    space.clamp_inside(&mut theta, 1e-3);
    for _ in 0..max_iter {
        let mut next = recentering_with(model, &theta, stats)?;
        space.clamp_inside(&mut next, 1e-3);
        let change = next.iter().zip(&theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        theta = next;
        if change < tol {
            break;
        }
    }
    Ok(theta)
}
