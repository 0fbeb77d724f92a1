//! The electrode measurement matrix `G_theta`, its derivative, and the
//! independent oracles used to validate both.

mod condensed;
mod fem_map;
mod oracle;
mod stability;

use nalgebra::DMatrix;

pub use condensed::CondensedForward;
pub use fem_map::FemForward;
pub use oracle::{
    fd_sensitivity, spectral_oracle_entry, spectral_oracle_matrix, spectral_oracle_sensitivity_entry,
    spectral_oracle_sensitivity_matrix, transmission_eigenvalue, OracleEntry,
};
pub use stability::{probe_pair, stability_probe, PairRecord, StabilityReport, INJECTIVITY_G_FLOOR, INJECTIVITY_THETA_GAP};

use crate::error::Result;
use crate::param::ParameterBox;

/// `G[i][j] = (|J_i| |J_j|)^(-1/2) <(Lambda_gamma - Lambda_1) 1_{J_i}, 1_{J_j}>`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementMatrix {
    pub g: DMatrix<f64>,
    pub theta: Vec<f64>,
    pub mesh_id: String,
}

impl MeasurementMatrix {
    pub fn electrodes(&self) -> usize {
        self.g.nrows()
    }

    /// `G_theta(x)`: the mean current vector when electrode `x` is driven.
    pub fn row(&self, x: usize) -> Vec<f64> {
        self.g.row(x).iter().copied().collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.g.amax()
    }

    pub fn max_asymmetry(&self) -> f64 {
        (&self.g - self.g.transpose()).amax()
    }

    /// `(spectral norm, Frobenius norm)`; the first never exceeds the second.
    pub fn norms(&self) -> (f64, f64) {
        matrix_norms(&self.g)
    }
}

pub fn matrix_norms(g: &DMatrix<f64>) -> (f64, f64) {
    let spectral = g.clone().svd(false, false).singular_values.max();
    (spectral, g.norm())
}

/// `S[i][j][k] = (|J_i| |J_j|)^(-1/2) int_{Omega_k} grad u_i . grad u_j`,
/// stored as one `M x M` slice per region.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityTensor {
    pub slices: Vec<DMatrix<f64>>,
    pub theta: Vec<f64>,
}

impl SensitivityTensor {
    pub fn regions(&self) -> usize {
        self.slices.len()
    }

    pub fn electrodes(&self) -> usize {
        self.slices[0].nrows()
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.slices[k][(i, j)]
    }

    /// `dG/dtheta` applied to a direction `h`.
    pub fn apply(&self, h: &[f64]) -> DMatrix<f64> {
        let m = self.electrodes();
        self.slices.iter().zip(h).fold(DMatrix::zeros(m, m), |acc, (s, &hk)| acc + s * hk)
    }
}

/// A forward map `theta -> G_theta` on a fixed geometry.
pub trait ForwardModel: Send + Sync {
    fn space(&self) -> &ParameterBox;

    fn electrode_count(&self) -> usize;

    fn mesh_id(&self) -> &str;

    fn forward_matrix(&self, theta: &[f64]) -> Result<MeasurementMatrix>;

    fn forward_with_sensitivity(&self, theta: &[f64]) -> Result<(MeasurementMatrix, SensitivityTensor)>;

    fn sensitivity_tensor(&self, theta: &[f64]) -> Result<SensitivityTensor> {
        Ok(self.forward_with_sensitivity(theta)?.1)
    }
}

/// `(|J_i| |J_j|)^(-1/2)`.
pub(crate) fn normalisation(measures: &[f64]) -> DMatrix<f64> {
    let m = measures.len();
    DMatrix::from_fn(m, m, |i, j| 1.0 / (measures[i] * measures[j]).sqrt())
}
