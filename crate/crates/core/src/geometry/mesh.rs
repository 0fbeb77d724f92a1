use std::f64::consts::PI;
use std::io::{self, Write};

use super::partition::Partition;
use crate::error::{EitError, Result};

/// Hard cap on the generated vertex count (roughly `target_h >= 1.3e-3`).
const MAX_VERTICES: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshParams {
    pub target_h: f64,
    /// The number of boundary vertices is rounded up to a multiple of this,
    /// e.g. the electrode count, so equally spaced arcs need no snapping.
    pub boundary_multiple: usize,
}

impl MeshParams {
    pub fn new(target_h: f64) -> Self {
        Self { target_h, boundary_multiple: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryVertex {
    pub vertex: usize,
    /// Angular coordinate in `[0, 2 pi)`.
    pub angle: f64,
}

/// Conforming P1 triangulation of the unit disk.
///
/// Triangles are counter-clockwise and never straddle a region interface.
/// `boundary` lists the vertices on the unit circle in increasing angle; they
/// are equally spaced, the first one at angle 0.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub labels: Vec<usize>,
    pub boundary: Vec<BoundaryVertex>,
    regions: usize,
    target_h: f64,
}

pub fn mesh_disk(partition: &Partition, target_h: f64) -> Result<Mesh> {
    mesh_disk_with(partition, &MeshParams::new(target_h))
}

/// Structured polar mesh: concentric rings of vertices, with rings placed at
/// every region radius and vertices at every sector ray, joined band by band
/// and sector by sector.
pub fn mesh_disk_with(partition: &Partition, params: &MeshParams) -> Result<Mesh> {
    let h = params.target_h;
    if !(h > 0.0) || !h.is_finite() {
        return Err(EitError::InvalidInput(format!("target_h must be positive, got {h}")));
    }
    if params.boundary_multiple == 0 {
        return Err(EitError::InvalidInput("boundary_multiple must be >= 1".into()));
    }
    let estimate = PI / (h * h);
    if estimate > MAX_VERTICES as f64 {
        return Err(EitError::Mesh(format!("target_h = {h} would need about {estimate:.0} vertices")));
    }

    // Radii of the vertex rings, and for every band between consecutive rings
    // the inner band index (None for the collar).
    let mut breakpoints = partition.band_radii().to_vec();
    breakpoints.push(1.0);
    let inner_bands = partition.band_radii().len() - 1;
    let mut radii = vec![0.0];
    let mut band_of_layer: Vec<Option<usize>> = Vec::new();
    for (b, w) in breakpoints.windows(2).enumerate() {
        let (a, c) = (w[0], w[1]);
        let steps = (((c - a) / h) - 1e-9).ceil().max(1.0) as usize;
        for i in 1..=steps {
            radii.push(if i == steps { c } else { a + (c - a) * i as f64 / steps as f64 });
            band_of_layer.push((b < inner_bands).then_some(b));
        }
    }
    let sectors_of = |band: Option<usize>| band.map_or(1, |_| partition.sectors());

    // Vertex counts per ring.
    let rings = radii.len();
    let mut counts = vec![1usize; rings];
    for m in 1..rings {
        let below = sectors_of(band_of_layer[m - 1]);
        let above = if m + 1 < rings { sectors_of(band_of_layer[m]) } else { 1 };
        let mut divisor = lcm(below, above);
        if m + 1 == rings {
            divisor = lcm(divisor, params.boundary_multiple);
        }
        let wanted = (2.0 * PI * radii[m] / h - 1e-9).ceil().max(3.0) as usize;
        counts[m] = divisor * wanted.div_ceil(divisor);
    }

    let mut offsets = vec![0usize; rings];
    for m in 1..rings {
        offsets[m] = offsets[m - 1] + counts[m - 1];
    }
    let total: usize = counts.iter().sum();
    if total > MAX_VERTICES {
        return Err(EitError::Mesh(format!("{total} vertices exceed the limit {MAX_VERTICES}")));
    }

    let mut vertices = Vec::with_capacity(total);
    vertices.push([0.0, 0.0]);
    for m in 1..rings {
        let n = counts[m];
        for j in 0..n {
            let a = 2.0 * PI * j as f64 / n as f64;
            vertices.push([radii[m] * a.cos(), radii[m] * a.sin()]);
        }
    }

    let vid = |m: usize, j: usize| offsets[m] + (j % counts[m]);
    let mut triangles = Vec::new();
    let mut labels = Vec::new();
    let mut push = |tri: [usize; 3], label: usize, verts: &Vec<[f64; 2]>| {
        let t = if signed_area(verts, tri) < 0.0 { [tri[0], tri[2], tri[1]] } else { tri };
        triangles.push(t);
        labels.push(label);
    };

    for layer in 0..rings - 1 {
        let band = band_of_layer[layer];
        let sectors = sectors_of(band);
        let label_of = |s: usize| band.map_or(0, |b| partition.region_of(b, s));
        let outer = layer + 1;
        let n_out = counts[outer];
        if layer == 0 {
            let per = n_out / sectors;
            for s in 0..sectors {
                for j in s * per..(s + 1) * per {
                    push([0, vid(outer, j), vid(outer, j + 1)], label_of(s), &vertices);
                }
            }
            continue;
        }
        let n_in = counts[layer];
        let (a, b) = (n_in / sectors, n_out / sectors);
        for s in 0..sectors {
            let (i0, j0) = (s * a, s * b);
            let (mut i, mut j) = (0usize, 0usize);
            while i < a || j < b {
                let advance_inner = j == b || (i < a && (i + 1) * b <= (j + 1) * a);
                let tri = if advance_inner {
                    let t = [vid(layer, i0 + i), vid(layer, i0 + i + 1), vid(outer, j0 + j)];
                    i += 1;
                    t
                } else {
                    let t = [vid(layer, i0 + i), vid(outer, j0 + j), vid(outer, j0 + j + 1)];
                    j += 1;
                    t
                };
                push(tri, label_of(s), &vertices);
            }
        }
    }

    let last = rings - 1;
    let boundary = (0..counts[last])
        .map(|j| BoundaryVertex { vertex: vid(last, j), angle: 2.0 * PI * j as f64 / counts[last] as f64 })
        .collect();

    let mesh = Mesh { vertices, triangles, labels, boundary, regions: partition.regions(), target_h: h };
    let per_label = mesh.triangle_count_by_label();
    if let Some(k) = per_label.iter().position(|&c| c == 0) {
        return Err(EitError::Mesh(format!("region {k} contains no triangle at target_h = {h}")));
    }
    Ok(mesh)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

fn signed_area(vertices: &[[f64; 2]], t: [usize; 3]) -> f64 {
    let [p, q, r] = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

impl Mesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn regions(&self) -> usize {
        self.regions
    }

    pub fn target_h(&self) -> f64 {
        self.target_h
    }

    /// Short provenance tag identifying the mesh.
    pub fn id(&self) -> String {
        format!(
            "disk-h{}-D{}-v{}-t{}-b{}",
            self.target_h,
            self.regions,
            self.vertices.len(),
            self.triangles.len(),
            self.boundary.len()
        )
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, self.triangles[t])
    }

    pub fn barycenter(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn area_by_label(&self) -> Vec<f64> {
        let mut areas = vec![0.0; self.regions + 1];
        for t in 0..self.triangles.len() {
            areas[self.labels[t]] += self.triangle_area(t);
        }
        areas
    }

    fn triangle_count_by_label(&self) -> Vec<usize> {
        let mut counts = vec![0; self.regions + 1];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for b in &self.boundary {
            mask[b.vertex] = true;
        }
        mask
    }

    /// Angular spacing of the (equally spaced) boundary vertices.
    pub fn boundary_spacing(&self) -> f64 {
        2.0 * PI / self.boundary.len() as f64
    }

    pub fn max_edge_length(&self) -> f64 {
        let len = |a: usize, b: usize| {
            let (p, q) = (self.vertices[a], self.vertices[b]);
            (p[0] - q[0]).hypot(p[1] - q[1])
        };
        self.triangles
            .iter()
            .map(|&[a, b, c]| len(a, b).max(len(b, c)).max(len(c, a)))
            .fold(0.0, f64::max)
    }

    /// `id,x,y` with 17 significant digits.
    pub fn write_vertices_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "id,x,y")?;
        for (i, p) in self.vertices.iter().enumerate() {
            writeln!(out, "{i},{:.16e},{:.16e}", p[0], p[1])?;
        }
        Ok(())
    }

    /// `id,v1,v2,v3,label`.
    pub fn write_triangles_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "id,v1,v2,v3,label")?;
        for (i, (t, l)) in self.triangles.iter().zip(&self.labels).enumerate() {
            writeln!(out, "{i},{},{},{},{l}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}
