use std::f64::consts::PI;

use super::mesh::Mesh;
use crate::error::{EitError, Result};

/// Boundary arc `[start, end)` (radians) whose endpoints are boundary vertices.
///
/// `first` indexes `Mesh::boundary`; the arc owns the `count` consecutive
/// boundary vertices `first, first + 1, ...` (cyclically), i.e. its start
/// vertex but not its end vertex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub start: f64,
    pub end: f64,
    pub first: usize,
    pub count: usize,
}

impl Arc {
    /// Arc length `|J|` on the unit circle.
    pub fn measure(&self) -> f64 {
        self.end - self.start
    }

    /// Chord diameter `sup |x - y|` over points of the arc.
    pub fn diameter(&self) -> f64 {
        let w = self.measure();
        if w >= PI {
            2.0
        } else {
            2.0 * (0.5 * w).sin()
        }
    }

    /// Indices into `Mesh::boundary` covered by the arc.
    pub fn boundary_indices(&self, boundary_count: usize) -> impl Iterator<Item = usize> {
        let first = self.first;
        (0..self.count).map(move |i| (first + i) % boundary_count)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElectrodeSet {
    pub arcs: Vec<Arc>,
    boundary_count: usize,
    /// Largest distance (radians) between a nominal and a snapped endpoint.
    pub max_snap_error: f64,
}

/// `M` equal, equally spaced arcs covering the fraction `coverage` of the
/// circle, the first one starting at angle 0. Endpoints are snapped to the
/// nearest boundary vertex.
pub fn place_electrodes(mesh: &Mesh, count: usize, coverage: f64) -> Result<ElectrodeSet> {
    let n = mesh.boundary.len();
    if count == 0 {
        return Err(EitError::InvalidInput("electrode count M must be >= 1".into()));
    }
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(EitError::InvalidInput(format!("coverage must lie in (0, 1], got {coverage}")));
    }
    if 2 * count > n {
        return Err(EitError::InvalidInput(format!(
            "M = {count} electrodes need at least {} boundary vertices, mesh has {n}",
            2 * count
        )));
    }
    let spacing = 2.0 * PI / n as f64;
    let per = n as f64 / count as f64;
    let mut arcs = Vec::with_capacity(count);
    let mut max_snap_error: f64 = 0.0;
    for k in 0..count {
        let a = k as f64 * per;
        let b = (k as f64 + coverage) * per;
        let (p, q) = (a.round() as usize, b.round() as usize);
        if q <= p {
            return Err(EitError::InvalidInput(format!(
                "electrode {} collapses to zero width on a boundary with {n} vertices",
                k + 1
            )));
        }
        max_snap_error = max_snap_error.max((p as f64 - a).abs() * spacing).max((q as f64 - b).abs() * spacing);
        arcs.push(Arc { start: p as f64 * spacing, end: q as f64 * spacing, first: p % n, count: q - p });
    }
    Ok(ElectrodeSet { arcs, boundary_count: n, max_snap_error })
}

impl ElectrodeSet {
    /// Arcs given as `(first boundary vertex, vertex count)`.
    pub fn from_vertex_ranges(mesh: &Mesh, ranges: &[(usize, usize)]) -> Result<Self> {
        let n = mesh.boundary.len();
        if ranges.is_empty() {
            return Err(EitError::InvalidInput("at least one electrode is required".into()));
        }
        let mut owner = vec![false; n];
        let spacing = 2.0 * PI / n as f64;
        let mut arcs = Vec::with_capacity(ranges.len());
        for &(first, count) in ranges {
            if first >= n || count == 0 || count > n {
                return Err(EitError::InvalidInput(format!("invalid electrode range ({first}, {count})")));
            }
            for i in 0..count {
                let v = (first + i) % n;
                if owner[v] {
                    return Err(EitError::InvalidInput("electrode arcs overlap".into()));
                }
                owner[v] = true;
            }
            arcs.push(Arc { start: first as f64 * spacing, end: (first + count) as f64 * spacing, first, count });
        }
        Ok(Self { arcs, boundary_count: n, max_snap_error: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary_count
    }

    pub fn measures(&self) -> Vec<f64> {
        self.arcs.iter().map(Arc::measure).collect()
    }

    pub fn diameters(&self) -> Vec<f64> {
        self.arcs.iter().map(Arc::diameter).collect()
    }

    /// Measure of the boundary not covered by any electrode.
    pub fn uncovered_measure(&self) -> f64 {
        let covered: usize = self.arcs.iter().map(|a| a.count).sum();
        (self.boundary_count - covered) as f64 * 2.0 * PI / self.boundary_count as f64
    }
}

/// `|boundary \ union J_k|^(1/2) + max_k diam(J_k)`.
pub fn electrode_gap_stat(electrodes: &ElectrodeSet) -> f64 {
    let diam = electrodes.diameters().into_iter().fold(0.0, f64::max);
    electrodes.uncovered_measure().sqrt() + diam
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_partition, mesh_disk_with, Layout, MeshParams, PartitionSpec};

    fn mesh(h: f64, multiple: usize) -> Mesh {
        let p = build_partition(&PartitionSpec { regions: 2, r0: 0.75, layout: Layout::EqualSectors }).unwrap();
        mesh_disk_with(&p, &MeshParams { target_h: h, boundary_multiple: multiple }).unwrap()
    }

    /// Diameter by brute-force maximisation over sampled arc points.
    fn sampled_diameter(arc: &Arc) -> f64 {
        let pts: Vec<(f64, f64)> = (0..=400)
            .map(|i| {
                let t = arc.start + arc.measure() * i as f64 / 400.0;
                (t.cos(), t.sin())
            })
            .collect();
        let mut best: f64 = 0.0;
        for p in &pts {
            for q in &pts {
                best = best.max((p.0 - q.0).hypot(p.1 - q.1));
            }
        }
        best
    }

    #[test]
    fn sixteen_full_coverage() {
        let mesh = mesh(0.05, 16);
        let j = place_electrodes(&mesh, 16, 1.0).unwrap();
        assert_eq!(j.max_snap_error, 0.0);
        for arc in &j.arcs {
            assert!((arc.measure() - 2.0 * PI / 16.0).abs() < 1e-14);
            assert!((sampled_diameter(arc) - arc.diameter()).abs() < 1e-9);
        }
        let delta = electrode_gap_stat(&j);
        assert!((delta - 0.390181).abs() < 1e-6, "{delta}");
        assert_eq!(j.uncovered_measure(), 0.0);
    }

    #[test]
    fn eight_half_coverage() {
        let mesh = mesh(0.05, 16);
        let j = place_electrodes(&mesh, 8, 0.5).unwrap();
        for (k, arc) in j.arcs.iter().enumerate() {
            assert!((arc.measure() - PI / 8.0).abs() < 1e-14);
            let next = &j.arcs[(k + 1) % 8];
            let gap = (next.start - arc.end).rem_euclid(2.0 * PI);
            assert!((gap - PI / 8.0).abs() < 1e-12);
        }
        let delta = electrode_gap_stat(&j);
        // sqrt(pi) + 2 sin(pi / 16) = 2.1626345...
        assert!((delta - 2.162629).abs() < 1e-5, "{delta}");
        let oracle = PI.sqrt() + sampled_diameter(&j.arcs[0]);
        assert!((delta - oracle).abs() < 1e-9);
    }

    #[test]
    fn full_circle_arc_has_diameter_two() {
        let mesh = mesh(0.1, 1);
        let n = mesh.boundary.len();
        let j = ElectrodeSet::from_vertex_ranges(&mesh, &[(0, n)]).unwrap();
        assert_eq!(electrode_gap_stat(&j), 2.0);
    }

    #[test]
    fn snapping_error_bounded_by_spacing() {
        let mesh = mesh(0.05, 1);
        let j = place_electrodes(&mesh, 16, 0.7).unwrap();
        assert!(j.max_snap_error <= 0.5 * mesh.boundary_spacing() + 1e-15);
        let finer = super::tests::mesh(0.025, 1);
        let jf = place_electrodes(&finer, 16, 0.7).unwrap();
        assert!(jf.max_snap_error <= 0.5 * finer.boundary_spacing() + 1e-15);
    }

    #[test]
    fn gap_stat_monotone_in_coverage() {
        let mesh = mesh(0.01, 1);
        let mut last = f64::INFINITY;
        for i in 1..=20 {
            let c = i as f64 / 20.0;
            let d = electrode_gap_stat(&place_electrodes(&mesh, 16, c).unwrap());
            assert!(d <= last + 1e-12, "coverage {c}: {d} > {last}");
            last = d;
        }
    }

    #[test]
    fn rejects_invalid_requests() {
        let mesh = mesh(0.1, 1);
        let n = mesh.boundary.len();
        assert!(place_electrodes(&mesh, 0, 1.0).is_err());
        assert!(place_electrodes(&mesh, 4, 1.5).is_err());
        assert!(place_electrodes(&mesh, 4, 0.0).is_err());
        assert!(place_electrodes(&mesh, n / 2 + 1, 1.0).is_err());
        assert!(place_electrodes(&mesh, n / 2, 0.01).is_err());
        assert!(ElectrodeSet::from_vertex_ranges(&mesh, &[(0, 3), (2, 3)]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn arcs_are_disjoint(m in 1usize..30, coverage in 0.3f64..=1.0) {
                let mesh = mesh(0.05, 1);
                if let Ok(j) = place_electrodes(&mesh, m, coverage) {
                    let n = mesh.boundary.len();
                    let mut owner = vec![false; n];
                    for arc in &j.arcs {
                        prop_assert!(arc.measure() > 0.0);
                        for v in arc.boundary_indices(n) {
                            prop_assert!(!owner[v]);
                            owner[v] = true;
                        }
                    }
                }
            }
        }
    }
}
