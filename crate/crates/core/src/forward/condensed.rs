//! Exact static condensation of the forward map onto the region interfaces.
//!
//! Nodes strictly inside region `k` only see `theta_k A_k`, so eliminating
//! them scales their Schur complement by `theta_k` and can be done once.
//! With `Gamma` the nodes touching two or more regions, the energy pairing of
//! the discrete solutions reduces to
//!
//! ```text
//! u_i^T K_theta u_j = c_ij - f_i^T H(theta)^{-1} f_j,
//! H(theta) = H_0 + sum_k theta_k H_k   (dense, |Gamma| x |Gamma|),
//! ```
//!
//! where `H_k` is the Schur complement of `A_k` onto `Gamma`, `f_i` is the
//! region-0 coupling of the lift `g_i` into `Gamma`, and `c_ij` does not
//! depend on `theta` (it cancels in the normalised matrix). The derivative is
//! `d/dtheta_k (u_i^T K_theta u_j) = w_i^T H_k w_j` with `w = H^{-1} f`.
//! Every `theta` evaluation costs one dense Cholesky of size `|Gamma|`.

use nalgebra::{Cholesky, DMatrix, Dyn};

use super::{normalisation, ForwardModel, MeasurementMatrix, SensitivityTensor};
use crate::error::{EitError, Result};
use crate::fem::{boundary_lift, RegionStiffness};
use crate::geometry::{ElectrodeSet, Mesh};
use crate::param::ParameterBox;
use crate::sparse::{CsrMatrix, SkylineCholesky};

pub struct CondensedForward {
    space: ParameterBox,
    blocks: Vec<DMatrix<f64>>,
    coupling: DMatrix<f64>,
    baseline: DMatrix<f64>,
    norm: DMatrix<f64>,
    mesh_id: String,
}

fn dense(a: &CsrMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for r in 0..a.nrows() {
        for (c, v) in a.row(r) {
            d[(r, c)] = v;
        }
    }
    d
}

/// `A[Q,Q] - A[Q,E] A[E,E]^{-1} A[E,Q]` as a dense matrix.
fn schur_onto(a: &CsrMatrix, keep: &[usize], eliminate: &[usize]) -> Result<(DMatrix<f64>, Option<SkylineCholesky>)> {
    let mut s = dense(&a.submatrix(keep, keep));
    if eliminate.is_empty() {
        return Ok((s, None));
    }
    let factor = SkylineCholesky::factor(&a.submatrix(eliminate, eliminate))?;
    let coupling = a.submatrix(keep, eliminate);
    let mut solved: Vec<Option<Vec<f64>>> = Vec::with_capacity(keep.len());
    for c in 0..keep.len() {
        let mut rhs = vec![0.0; eliminate.len()];
        let mut any = false;
        for (e, v) in coupling.row(c) {
            rhs[e] = v;
            any = true;
        }
        solved.push(any.then(|| factor.solve(&rhs)));
    }
    for c in 0..keep.len() {
        let Some(x) = &solved[c] else { continue };
        for r in 0..keep.len() {
            let dot: f64 = coupling.row(r).map(|(e, v)| v * x[e]).sum();
            s[(r, c)] -= dot;
        }
    }
    Ok((s, Some(factor)))
}

impl CondensedForward {
    pub fn new(mesh: &Mesh, electrodes: &ElectrodeSet, stiffness: &RegionStiffness, space: ParameterBox) -> Result<Self> {
        let regions = stiffness.regions();
        if space.dim != regions {
            return Err(EitError::Dimension { expected: regions, found: space.dim });
        }
        let n = mesh.vertex_count();
        let on_boundary = mesh.boundary_mask();
        // Label set of each vertex: the single label, or usize::MAX when mixed.
        let mut label = vec![None::<usize>; n];
        for (t, &l) in mesh.triangles.iter().zip(&mesh.labels) {
            for &v in t {
                label[v] = match label[v] {
                    None => Some(l),
                    Some(old) if old == l => Some(l),
                    Some(_) => Some(usize::MAX),
                };
            }
        }
        let mut interface = Vec::new();
        let mut inner: Vec<Vec<usize>> = vec![Vec::new(); regions + 1];
        for v in 0..n {
            if on_boundary[v] {
                continue;
            }
            match label[v] {
                Some(usize::MAX) => interface.push(v),
                Some(l) => inner[l].push(v),
                None => return Err(EitError::Mesh(format!("vertex {v} belongs to no triangle"))),
            }
        }
        if interface.is_empty() {
            return Err(EitError::Mesh("mesh has no interface vertices".into()));
        }

        let mut blocks = Vec::with_capacity(regions + 1);
        let (h0, collar_factor) = schur_onto(&stiffness.blocks[0], &interface, &inner[0])?;
        blocks.push(h0);
        for k in 1..=regions {
            blocks.push(schur_onto(&stiffness.blocks[k], &interface, &inner[k])?.0);
        }

        // f_i = A0[Gamma,B] g - A0[Gamma,E0] A0[E0,E0]^{-1} A0[E0,B] g.
        let a0 = &stiffness.blocks[0];
        let m = electrodes.len();
        let mut coupling = DMatrix::zeros(interface.len(), m);
        for (i, arc) in electrodes.arcs.iter().enumerate() {
            let g = boundary_lift(mesh, arc)?;
            let ag = a0.mul_vec(&g);
            let mut f: Vec<f64> = interface.iter().map(|&v| ag[v]).collect();
            if let Some(factor) = &collar_factor {
                let rhs: Vec<f64> = inner[0].iter().map(|&v| ag[v]).collect();
                let y = factor.solve(&rhs);
                let mut y_full = vec![0.0; n];
                for (&v, yv) in inner[0].iter().zip(y) {
                    y_full[v] = yv;
                }
                let ay = a0.mul_vec(&y_full);
                for (fv, &v) in f.iter_mut().zip(&interface) {
                    *fv -= ay[v];
                }
            }
            coupling.set_column(i, &nalgebra::DVector::from_vec(f));
        }

        let mut model = Self {
            space,
            blocks,
            coupling,
            baseline: DMatrix::zeros(m, m),
            norm: normalisation(&electrodes.measures()),
            mesh_id: format!("{}-condensed{}", mesh.id(), interface.len()),
        };
        model.baseline = model.pairing(&vec![1.0; regions])?.2;
        Ok(model)
    }

    /// Number of interface unknowns left after condensation.
    pub fn interface_size(&self) -> usize {
        self.coupling.nrows()
    }

    /// Cholesky factor of `H(theta)` and `X = L^{-1} F`, so that
    /// `F^T H^{-1} F = X^T X` and `H^{-1} F = L^{-T} X`.
    fn half_solve(&self, theta: &[f64]) -> Result<(Cholesky<f64, Dyn>, DMatrix<f64>)> {
        let mut h = self.blocks[0].clone();
        for (block, &t) in self.blocks[1..].iter().zip(theta) {
            h.iter_mut().zip(block.iter()).for_each(|(a, b)| *a += t * b);
        }
        let chol = Cholesky::new(h)
            .ok_or_else(|| EitError::Factorization(format!("condensed system not positive definite at theta = {theta:?}")))?;
        let mut x = self.coupling.clone();
        chol.l_dirty().solve_lower_triangular_mut(&mut x);
        Ok((chol, x))
    }

    fn pairing(&self, theta: &[f64]) -> Result<(Cholesky<f64, Dyn>, DMatrix<f64>, DMatrix<f64>)> {
        let (chol, x) = self.half_solve(theta)?;
        let e = x.tr_mul(&x);
        Ok((chol, x, e))
    }

    fn matrix_from(&self, theta: &[f64], e: &DMatrix<f64>) -> MeasurementMatrix {
        let g = (&self.baseline - e).component_mul(&self.norm);
        let g = (&g + g.transpose()) * 0.5;
        MeasurementMatrix { g, theta: theta.to_vec(), mesh_id: self.mesh_id.clone() }
    }
}

impl ForwardModel for CondensedForward {
    fn space(&self) -> &ParameterBox {
        &self.space
    }

    fn electrode_count(&self) -> usize {
        self.coupling.ncols()
    }

    fn mesh_id(&self) -> &str {
        &self.mesh_id
    }

    fn forward_matrix(&self, theta: &[f64]) -> Result<MeasurementMatrix> {
        self.space.check(theta)?;
        let (_, _, e) = self.pairing(theta)?;
        Ok(self.matrix_from(theta, &e))
    }

    fn forward_with_sensitivity(&self, theta: &[f64]) -> Result<(MeasurementMatrix, SensitivityTensor)> {
        self.space.check(theta)?;
        let (chol, mut w, e) = self.pairing(theta)?;
        chol.l_dirty().tr_solve_lower_triangular_mut(&mut w);
        let g = self.matrix_from(theta, &e);
        let slices = self.blocks[1..]
            .iter()
            .map(|hk| {
                let s = w.tr_mul(&(hk * &w)).component_mul(&self.norm);
                (&s + s.transpose()) * 0.5
            })
            .collect();
        Ok((g, SensitivityTensor { slices, theta: theta.to_vec() }))
    }
}
