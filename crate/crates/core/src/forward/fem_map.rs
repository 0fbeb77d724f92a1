use std::sync::OnceLock;

use nalgebra::DMatrix;

use super::{normalisation, ForwardModel, MeasurementMatrix, SensitivityTensor};
use crate::error::Result;
use crate::fem::{assemble, boundary_lift, energy_pairing, DirichletSolver, RegionStiffness};
use crate::geometry::{ElectrodeSet, Mesh};
use crate::param::ParameterBox;

/// Reference forward map: full-mesh Dirichlet solves for every electrode and
/// Dirichlet-energy pairings `u_i^T K_theta u_j`.
pub struct FemForward {
    mesh: Mesh,
    stiffness: RegionStiffness,
    space: ParameterBox,
    lifts: Vec<Vec<f64>>,
    norm: DMatrix<f64>,
    mesh_id: String,
    baseline: OnceLock<Result<DMatrix<f64>>>,
}

impl FemForward {
    pub fn new(mesh: Mesh, electrodes: &ElectrodeSet, stiffness: RegionStiffness, space: ParameterBox) -> Result<Self> {
        if space.dim != stiffness.regions() {
            return Err(crate::EitError::Dimension { expected: stiffness.regions(), found: space.dim });
        }
        let lifts = electrodes.arcs.iter().map(|a| boundary_lift(&mesh, a)).collect::<Result<Vec<_>>>()?;
        let norm = normalisation(&electrodes.measures());
        let mesh_id = mesh.id();
        Ok(Self { mesh, stiffness, space, lifts, norm, mesh_id, baseline: OnceLock::new() })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn stiffness(&self) -> &RegionStiffness {
        &self.stiffness
    }

    /// Discrete harmonic extensions of every electrode lift for `gamma_theta`.
    pub fn solutions(&self, theta: &[f64]) -> Result<(DirichletSolver, Vec<Vec<f64>>)> {
        let k = assemble(theta, &self.stiffness)?;
        let solver = DirichletSolver::new(&self.mesh, &k)?;
        let us = self.lifts.iter().map(|g| solver.solve(g).map(|s| s.u)).collect::<Result<Vec<_>>>()?;
        Ok((solver, us))
    }

    fn energies(&self, k: &crate::sparse::CsrMatrix, us: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let m = us.len();
        let mut e = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = energy_pairing(&us[i], &us[j], k)?;
                e[(i, j)] = v;
                e[(j, i)] = v;
            }
        }
        Ok(e)
    }

    /// Unnormalised `<Lambda_1 1_{J_i}, 1_{J_j}>`, computed once.
    fn baseline(&self) -> Result<&DMatrix<f64>> {
        self.baseline
            .get_or_init(|| {
                let ones = vec![1.0; self.space.dim];
                let (solver, us) = self.solutions(&ones)?;
                self.energies(solver.matrix(), &us)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    fn matrix_from(&self, theta: &[f64], solver: &DirichletSolver, us: &[Vec<f64>]) -> Result<MeasurementMatrix> {
        let e = self.energies(solver.matrix(), us)?;
        let g = (e - self.baseline()?).component_mul(&self.norm);
        Ok(MeasurementMatrix { g, theta: theta.to_vec(), mesh_id: self.mesh_id.clone() })
    }
}

impl ForwardModel for FemForward {
    fn space(&self) -> &ParameterBox {
        &self.space
    }

    fn electrode_count(&self) -> usize {
        self.lifts.len()
    }

    fn mesh_id(&self) -> &str {
        &self.mesh_id
    }

    fn forward_matrix(&self, theta: &[f64]) -> Result<MeasurementMatrix> {
        self.space.check(theta)?;
        let (solver, us) = self.solutions(theta)?;
        self.matrix_from(theta, &solver, &us)
    }

    fn forward_with_sensitivity(&self, theta: &[f64]) -> Result<(MeasurementMatrix, SensitivityTensor)> {
        self.space.check(theta)?;
        let (solver, us) = self.solutions(theta)?;
        let g = self.matrix_from(theta, &solver, &us)?;
        let slices = self.stiffness.blocks[1..]
            .iter()
            .map(|a| Ok(self.energies(a, &us)?.component_mul(&self.norm)))
            .collect::<Result<Vec<_>>>()?;
        Ok((g, SensitivityTensor { slices, theta: theta.to_vec() }))
    }
}
