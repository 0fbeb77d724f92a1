//! P1 finite elements for `div(gamma_theta grad u) = 0` with Dirichlet data.

use crate::error::{EitError, Result};
use crate::geometry::{Arc, Mesh};
use crate::sparse::{CsrMatrix, SkylineCholesky};

/// Relative interior residual accepted from a Dirichlet solve.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

/// Per-region stiffness matrices `A_k[p, q] = int_{Omega_k} grad phi_p . grad phi_q`,
/// `k = 0..=D`, all sharing the sparsity pattern of the full mesh graph.
#[derive(Clone, Debug)]
pub struct RegionStiffness {
    pub blocks: Vec<CsrMatrix>,
}

impl RegionStiffness {
    pub fn regions(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].nrows()
    }
}

/// Element stiffness of a P1 triangle: `(b_i b_j + c_i c_j) / (4 |T|)`.
fn element_stiffness(p: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
    let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
    let area = 0.5 * (b[0] * c[1] - b[1] * c[0]);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
        }
    }
    k
}

pub fn region_stiffness(mesh: &Mesh) -> RegionStiffness {
    let regions = mesh.regions();
    let mut triplets: Vec<Vec<(usize, usize, f64)>> = vec![Vec::with_capacity(9 * mesh.triangles.len()); regions + 1];
    for (tri, &label) in mesh.triangles.iter().zip(&mesh.labels) {
        let ke = element_stiffness(tri.map(|v| mesh.vertices[v]));
        for (k, list) in triplets.iter_mut().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    list.push((tri[i], tri[j], if k == label { ke[i][j] } else { 0.0 }));
                }
            }
        }
    }
    let n = mesh.vertex_count();
    RegionStiffness { blocks: triplets.iter().map(|t| CsrMatrix::from_triplets(n, n, t)).collect() }
}

/// `K_theta = A_0 + sum_k theta_k A_k`, summed in region order.
pub fn assemble(theta: &[f64], rs: &RegionStiffness) -> Result<CsrMatrix> {
    if theta.len() != rs.regions() {
        return Err(EitError::Dimension { expected: rs.regions(), found: theta.len() });
    }
    if let Some(t) = theta.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(EitError::InvalidInput(format!("conductivity values must be positive and finite, got {t}")));
    }
    let mut k = rs.blocks[0].clone();
    for (block, &t) in rs.blocks[1..].iter().zip(theta) {
        for (acc, v) in k.values_mut().iter_mut().zip(block.values()) {
            *acc += t * v;
        }
    }
    Ok(k)
}

/// Nodal interpolant of the arc indicator: one on the arc's boundary vertices
/// (start vertex included, end vertex excluded), zero elsewhere.
pub fn boundary_lift(mesh: &Mesh, arc: &Arc) -> Result<Vec<f64>> {
    if arc.count == 0 {
        return Err(EitError::InvalidInput(format!(
            "arc [{}, {}) contains no boundary vertex; it is too small for the mesh",
            arc.start, arc.end
        )));
    }
    let n = mesh.boundary.len();
    let spacing = mesh.boundary_spacing();
    if arc.first >= n || arc.count > n || (arc.start - arc.first as f64 * spacing).abs() > 1e-9 {
        return Err(EitError::InvalidInput("arc endpoints are not snapped to boundary vertices".into()));
    }
    let mut g = vec![0.0; mesh.vertex_count()];
    for b in arc.boundary_indices(n) {
        g[mesh.boundary[b].vertex] = 1.0;
    }
    Ok(g)
}

#[derive(Clone, Debug)]
pub struct DirichletSolve {
    pub u: Vec<f64>,
    /// `||(K u)_interior||_inf / (||K||_inf ||g||_inf)`.
    pub residual_norm: f64,
}

/// Cholesky factorization of the interior block of `K_theta`, reusable for
/// every right-hand side at a fixed `theta`.
#[derive(Clone, Debug)]
pub struct DirichletSolver {
    k: CsrMatrix,
    boundary: Vec<bool>,
    interior: Vec<usize>,
    factor: SkylineCholesky,
    norm: f64,
}

impl DirichletSolver {
    pub fn new(mesh: &Mesh, k: &CsrMatrix) -> Result<Self> {
        if k.nrows() != mesh.vertex_count() {
            return Err(EitError::Dimension { expected: mesh.vertex_count(), found: k.nrows() });
        }
        let boundary = mesh.boundary_mask();
        let interior: Vec<usize> = (0..mesh.vertex_count()).filter(|&v| !boundary[v]).collect();
        let factor = SkylineCholesky::factor(&k.submatrix(&interior, &interior))?;
        Ok(Self { k: k.clone(), boundary, interior, factor, norm: k.norm_inf() })
    }

    /// Discrete `K`-harmonic extension of the boundary values of `g`.
    pub fn solve(&self, g: &[f64]) -> Result<DirichletSolve> {
        if g.len() != self.boundary.len() {
            return Err(EitError::Dimension { expected: self.boundary.len(), found: g.len() });
        }
        let mut u: Vec<f64> = g.iter().zip(&self.boundary).map(|(&v, &b)| if b { v } else { 0.0 }).collect();
        let kg = self.k.mul_vec(&u);
        let rhs: Vec<f64> = self.interior.iter().map(|&p| -kg[p]).collect();
        let ui = self.factor.solve(&rhs);
        for (&p, v) in self.interior.iter().zip(ui) {
            u[p] = v;
        }
        let ku = self.k.mul_vec(&u);
        let res = self.interior.iter().map(|&p| ku[p].abs()).fold(0.0, f64::max);
        let scale = self.norm * u.iter().zip(&self.boundary).filter(|(_, &b)| b).map(|(v, _)| v.abs()).fold(0.0, f64::max);
        let residual_norm = if scale > 0.0 { res / scale } else { res };
        if !(residual_norm <= SOLVER_TOLERANCE) {
            return Err(EitError::Factorization(format!(
                "interior residual {residual_norm:e} exceeds tolerance {SOLVER_TOLERANCE:e}"
            )));
        }
        Ok(DirichletSolve { u, residual_norm })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.k
    }
}

pub fn solve_dirichlet(mesh: &Mesh, k: &CsrMatrix, g: &[f64]) -> Result<DirichletSolve> {
    DirichletSolver::new(mesh, k)?.solve(g)
}

/// `u^T W v`, accumulated edge by edge so that swapping `u` and `v` gives a
/// bitwise identical result.
pub fn energy_pairing(u: &[f64], v: &[f64], w: &CsrMatrix) -> Result<f64> {
    if u.len() != w.nrows() || v.len() != w.nrows() || w.nrows() != w.ncols() {
        return Err(EitError::Dimension { expected: w.nrows(), found: if u.len() != w.nrows() { u.len() } else { v.len() } });
    }
    let mut total = 0.0;
    for p in 0..w.nrows() {
        for (q, wpq) in w.row(p) {
            if q == p {
                total += wpq * (u[p] * v[p]);
            } else if q > p {
                total += wpq * (u[p] * v[q] + u[q] * v[p]);
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use nalgebra::{DMatrix, SymmetricEigen};

    use super::*;
    use crate::geometry::{build_partition, mesh_disk, mesh_disk_with, place_electrodes, ElectrodeSet, Layout, MeshParams, PartitionSpec};

    fn mesh(regions: usize, h: f64) -> Mesh {
        let p = build_partition(&PartitionSpec { regions, r0: 0.75, layout: Layout::EqualSectors }).unwrap();
        mesh_disk(&p, h).unwrap()
    }

    fn nodal<F: Fn(f64, f64) -> f64>(mesh: &Mesh, f: F) -> Vec<f64> {
        mesh.vertices.iter().map(|p| f(p[0], p[1])).collect()
    }

    #[test]
    fn constants_in_kernel_of_every_block() {
        let m = mesh(2, 0.1);
        let rs = region_stiffness(&m);
        let ones = vec![1.0; m.vertex_count()];
        for a in &rs.blocks {
            assert!(a.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
            assert!(a.max_asymmetry() < 1e-15);
        }
    }

    #[test]
    fn block_sum_is_unit_conductivity_stiffness() {
        let m = mesh(2, 0.1);
        let rs = region_stiffness(&m);
        let k1 = assemble(&[1.0, 1.0], &rs).unwrap();
        let mut sum = rs.blocks[0].clone();
        for b in &rs.blocks[1..] {
            for (s, v) in sum.values_mut().iter_mut().zip(b.values()) {
                *s += v;
            }
        }
        assert_eq!(k1, sum);
    }

    #[test]
    fn blocks_are_local_to_their_region() {
        let m = mesh(2, 0.1);
        let rs = region_stiffness(&m);
        let mut touches = vec![vec![false; 3]; m.vertex_count()];
        for (t, &l) in m.triangles.iter().zip(&m.labels) {
            for &v in t {
                touches[v][l] = true;
            }
        }
        for (k, a) in rs.blocks.iter().enumerate() {
            for p in 0..m.vertex_count() {
                for (q, v) in a.row(p) {
                    if v != 0.0 {
                        assert!(touches[p][k] && touches[q][k]);
                    }
                }
            }
        }
    }

    #[test]
    fn dirichlet_energy_of_x_tends_to_pi() {
        let mut errors = Vec::new();
        for h in [0.1, 0.05] {
            let m = mesh(2, h);
            let rs = region_stiffness(&m);
            let k1 = assemble(&[1.0, 1.0], &rs).unwrap();
            let x = nodal(&m, |x, _| x);
            let e = energy_pairing(&x, &x, &k1).unwrap();
            errors.push((e - PI).abs());
            if h == 0.05 {
                assert!((e - PI).abs() / PI < 0.02, "energy {e}");
            }
        }
        assert!(errors[1] < errors[0]);
    }

    #[test]
    fn scaling_one_region_changes_only_its_block() {
        let m = mesh(2, 0.1);
        let rs = region_stiffness(&m);
        let a = assemble(&[2.0, 1.5], &rs).unwrap();
        let b = assemble(&[1.0, 1.5], &rs).unwrap();
        for ((x, y), z) in a.values().iter().zip(b.values()).zip(rs.blocks[1].values()) {
            assert!((x - y - z).abs() < 1e-12);
        }
    }

    #[test]
    fn assemble_rejects_nonpositive_theta() {
        let m = mesh(2, 0.2);
        let rs = region_stiffness(&m);
        assert!(assemble(&[0.0, 1.0], &rs).is_err());
        assert!(assemble(&[-1.0, 1.0], &rs).is_err());
        assert!(assemble(&[1.0], &rs).is_err());
    }

    #[test]
    fn interior_block_positive_definite() {
        let m = mesh(2, 0.1);
        let rs = region_stiffness(&m);
        let k = assemble(&[2.0, 1.5], &rs).unwrap();
        let mask = m.boundary_mask();
        let interior: Vec<usize> = (0..m.vertex_count()).filter(|&v| !mask[v]).collect();
        let sub = k.submatrix(&interior, &interior);
        let dense = DMatrix::from_fn(sub.nrows(), sub.ncols(), |i, j| sub.get(i, j));
        let eig = SymmetricEigen::new(dense);
        assert!(eig.eigenvalues.min() > 0.0);
    }

    #[test]
    fn solves_constant_and_zero_data() {
        let m = mesh(2, 0.1);
        let rs = region_stiffness(&m);
        let k = assemble(&[2.0, 1.5], &rs).unwrap();
        let solver = DirichletSolver::new(&m, &k).unwrap();
        let mask = m.boundary_mask();
        let ones: Vec<f64> = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let s = solver.solve(&ones).unwrap();
        assert!(s.u.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let zero = solver.solve(&vec![0.0; m.vertex_count()]).unwrap();
        assert!(zero.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn harmonic_data_converges_quadratically() {
        let mut errs = Vec::new();
        for h in [0.05, 0.025, 0.0125] {
            let m = mesh(1, h);
            let rs = region_stiffness(&m);
            let k = assemble(&[1.0], &rs).unwrap();
            let mask = m.boundary_mask();
            let trace = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
                m.vertices.iter().zip(&mask).map(|(p, &b)| if b { f(p[0], p[1]) } else { 0.0 }).collect()
            };
            // P1 reproduces the linear harmonic x exactly.
            let s = solve_dirichlet(&m, &k, &trace(&|x, _| x)).unwrap();
            assert!(s.residual_norm <= SOLVER_TOLERANCE);
            let err = s.u.iter().zip(&m.vertices).map(|(u, p)| (u - p[0]).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12, "h={h}: {err}");
            // x^2 - y^2 is harmonic but not in the discrete space.
            let exact = |x: f64, y: f64| x * x - y * y;
            let s = solve_dirichlet(&m, &k, &trace(&exact)).unwrap();
            let err = s.u.iter().zip(&m.vertices).map(|(u, p)| (u - exact(p[0], p[1])).abs()).fold(0.0, f64::max);
            errs.push(err);
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.0, "refinement ratio {ratio}, errors {errs:?}");
        }
    }

    #[test]
    fn factorization_reuse_is_bitwise() {
        let p = build_partition(&PartitionSpec { regions: 2, r0: 0.75, layout: Layout::EqualSectors }).unwrap();
        let m = mesh_disk_with(&p, &MeshParams { target_h: 0.1, boundary_multiple: 8 }).unwrap();
        let rs = region_stiffness(&m);
        let k = assemble(&[2.0, 1.5], &rs).unwrap();
        let j = place_electrodes(&m, 8, 1.0).unwrap();
        let solver = DirichletSolver::new(&m, &k).unwrap();
        for arc in &j.arcs {
            let g = boundary_lift(&m, arc).unwrap();
            assert_eq!(solver.solve(&g).unwrap().u, solve_dirichlet(&m, &k, &g).unwrap().u);
        }
    }

    #[test]
    fn lifts() {
        let m = mesh(2, 0.1);
        let n = m.boundary.len();
        let full = ElectrodeSet::from_vertex_ranges(&m, &[(0, n)]).unwrap();
        let g = boundary_lift(&m, &full.arcs[0]).unwrap();
        let mask = m.boundary_mask();
        for (v, b) in g.iter().zip(&mask) {
            assert_eq!(*v, if *b { 1.0 } else { 0.0 });
        }
        let j = place_electrodes(&m, 8, 0.8).unwrap();
        let lifts: Vec<Vec<f64>> = j.arcs.iter().map(|a| boundary_lift(&m, a).unwrap()).collect();
        for i in 0..8 {
            for k in (i + 1)..8 {
                assert!(lifts[i].iter().zip(&lifts[k]).all(|(a, b)| a * b == 0.0));
            }
        }
        let empty = Arc { start: 0.0, end: 0.0, first: 0, count: 0 };
        assert!(boundary_lift(&m, &empty).is_err());
        let unsnapped = Arc { start: 0.01, end: 0.5, first: 0, count: 3 };
        assert!(boundary_lift(&m, &unsnapped).is_err());
    }

    #[test]
    fn energy_pairing_properties() {
        let m = mesh(2, 0.1);
        let rs = region_stiffness(&m);
        let k = assemble(&[2.0, 1.5], &rs).unwrap();
        let u = nodal(&m, |x, y| (3.0 * x).sin() + y * y);
        let v = nodal(&m, |x, y| x * y - 0.3 * x);
        assert_eq!(energy_pairing(&u, &v, &k).unwrap(), energy_pairing(&v, &u, &k).unwrap());
        assert!(energy_pairing(&u, &u, &k).unwrap() >= 0.0);
        assert!(energy_pairing(&u[1..], &v, &k).is_err());
    }
}
