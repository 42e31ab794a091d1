//! Marching-tetrahedra extraction of the solid boundary.
//!
//! Samples live at voxel centers plus one ring of padding outside the grid. Each
//! cube between eight samples is split into six tetrahedra sharing the main
//! diagonal, so neighbouring cubes agree on every face and the output is a
//! closed 2-manifold whenever no sample is exactly zero.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tpms_field::TpmsField;

use super::voxel::{sample_unit_cell, LatticeSpec, VoxelGrid};

/// Triangle mesh in µm.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SurfaceMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

impl SurfaceMesh {
    pub fn triangle_points(&self, t: usize) -> [[f64; 3]; 3] {
        self.triangles[t].map(|v| self.vertices[v as usize])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        norm(cross(sub(b, a), sub(c, a))) * 0.5
    }

    /// Volume enclosed by the mesh via the divergence theorem (positive for outward normals).
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle_points(t);
                dot(a, cross(b, c)) / 6.0
            })
            .sum()
    }

    pub fn bounding_box(&self) -> Option<([f64; 3], [f64; 3])> {
        let first = *self.vertices.first()?;
        let mut lo = first;
        let mut hi = first;
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        Some((lo, hi))
    }

    /// Every undirected edge is used by exactly two triangles, once in each direction.
    pub fn is_closed_manifold(&self) -> bool {
        let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(self.triangles.len() * 3);
        for tri in &self.triangles {
            for e in 0..3 {
                let key = (tri[e], tri[(e + 1) % 3]);
                *directed.entry(key).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
    }

    pub fn has_degenerate_triangles(&self) -> bool {
        (0..self.triangles.len()).any(|t| {
            let [a, b, c] = self.triangles[t];
            a == b || b == c || a == c || self.triangle_area(t) <= 0.0
        })
    }

    pub fn unreferenced_vertices(&self) -> usize {
        let mut used = vec![false; self.vertices.len()];
        for tri in &self.triangles {
            for &v in tri {
                used[v as usize] = true;
            }
        }
        used.iter().filter(|&&u| !u).count()
    }

    /// `V − E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::with_capacity(self.triangles.len() * 2);
        for tri in &self.triangles {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }
}

/// Extracts the boundary of the solid in `grid` at physical scale.
///
/// With a `field`, vertices are placed by interpolating its membership margin
/// between voxel centers; otherwise they sit halfway between centers. Occupancy
/// always comes from `grid`, so filtered-out fragments stay out of the mesh.
pub fn extract_surface<T: Scalar>(
    grid: &VoxelGrid,
    field: Option<&TpmsField<T>>,
    spec: &LatticeSpec,
) -> Result<SurfaceMesh> {
    if grid.solid_count() == 0 {
        return Err(Error::EmptyStructure);
    }
    let [nx, ny, nz] = grid.dims();
    let cell = field.map(|f| sample_unit_cell(f, spec.resolution));
    let floor = 1e-6;

    // Padded sample lattice: index (i, j, k) maps to voxel (i-1, j-1, k-1).
    let (px, py, pz) = (nx + 2, ny + 2, nz + 2);
    let inner = |i: usize, j: usize, k: usize| -> f64 {
        let raw = match &cell {
            Some(c) => c.margin(i, j, k).to_f64_lossy(),
            None => 1.0,
        };
        if grid.get(i, j, k) {
            if cell.is_some() {
                raw.min(-floor)
            } else {
                -1.0
            }
        } else {
            raw.abs().max(floor)
        }
    };
    let mut values = vec![0.0f64; px * py * pz];
    for k in 0..pz {
        let vk = k.clamp(1, nz) - 1;
        for j in 0..py {
            let vj = j.clamp(1, ny) - 1;
            for i in 0..px {
                let vi = i.clamp(1, nx) - 1;
                let v = inner(vi, vj, vk);
                let padded = i == 0 || j == 0 || k == 0 || i == px - 1 || j == py - 1 || k == pz - 1;
                values[i + px * (j + py * k)] = if padded { v.abs().max(floor) } else { v };
            }
        }
    }

    let h = grid.cell_size() * spec.um_per_unit();
    let position = |idx: usize| -> [f64; 3] {
        let i = idx % px;
        let j = (idx / px) % py;
        let k = idx / (px * py);
        [(i as f64 - 0.5) * h, (j as f64 - 0.5) * h, (k as f64 - 0.5) * h]
    };

    let mut mesh = SurfaceMesh::default();
    let mut edge_vertex: HashMap<(u32, u32), u32> = HashMap::new();
    let mut vertex_on = |a: usize, b: usize, mesh: &mut SurfaceMesh| -> u32 {
        let key = (a.min(b) as u32, a.max(b) as u32);
        *edge_vertex.entry(key).or_insert_with(|| {
            let (va, vb) = (values[a], values[b]);
            let s = va / (va - vb);
            let (pa, pb) = (position(a), position(b));
            mesh.vertices.push([
                pa[0] + s * (pb[0] - pa[0]),
                pa[1] + s * (pb[1] - pa[1]),
                pa[2] + s * (pb[2] - pa[2]),
            ]);
            (mesh.vertices.len() - 1) as u32
        })
    };

    const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let stride = [1, px, px * py];

    for k in 0..pz - 1 {
        for j in 0..py - 1 {
            for i in 0..px - 1 {
                let base = i + px * (j + py * k);
                let corners = [
                    base,
                    base + 1,
                    base + px,
                    base + 1 + px,
                    base + px * py,
                    base + 1 + px * py,
                    base + px + px * py,
                    base + 1 + px + px * py,
                ];
                let inside = corners.iter().filter(|&&c| values[c] < 0.0).count();
                if inside == 0 || inside == 8 {
                    continue;
                }
                for perm in PERMUTATIONS {
                    let v1 = base + stride[perm[0]];
                    let v2 = v1 + stride[perm[1]];
                    let tet = [base, v1, v2, base + 1 + px + px * py];
                    polygonize_tet(tet, &values, &position, &mut mesh, &mut vertex_on);
                }
            }
        }
    }
    Ok(mesh)
}

fn polygonize_tet(
    tet: [usize; 4],
    values: &[f64],
    position: &impl Fn(usize) -> [f64; 3],
    mesh: &mut SurfaceMesh,
    vertex_on: &mut impl FnMut(usize, usize, &mut SurfaceMesh) -> u32,
) {
    let (ins, outs): (Vec<usize>, Vec<usize>) = tet.iter().partition(|&&v| values[v] < 0.0);
    if ins.is_empty() || outs.is_empty() {
        return;
    }
    // Direction from solid to void, used to orient triangles outward.
    let centroid = |vs: &[usize]| {
        let mut c = [0.0; 3];
        for &v in vs {
            let p = position(v);
            for k in 0..3 {
                c[k] += p[k] / vs.len() as f64;
            }
        }
        c
    };
    let outward = sub(centroid(&outs), centroid(&ins));

    let emit = |a: u32, b: u32, c: u32, mesh: &mut SurfaceMesh| {
        let (pa, pb, pc) = (
            mesh.vertices[a as usize],
            mesh.vertices[b as usize],
            mesh.vertices[c as usize],
        );
        if dot(cross(sub(pb, pa), sub(pc, pa)), outward) >= 0.0 {
            mesh.triangles.push([a, b, c]);
        } else {
            mesh.triangles.push([a, c, b]);
        }
    };

    match (ins.len(), outs.len()) {
        (1, 3) => {
            let v: Vec<u32> = outs.iter().map(|&o| vertex_on(ins[0], o, mesh)).collect();
            emit(v[0], v[1], v[2], mesh);
        }
        (3, 1) => {
            let v: Vec<u32> = ins.iter().map(|&i| vertex_on(i, outs[0], mesh)).collect();
            emit(v[0], v[1], v[2], mesh);
        }
        (2, 2) => {
            let (a, b) = (ins[0], ins[1]);
            let (c, d) = (outs[0], outs[1]);
            let ac = vertex_on(a, c, mesh);
            let ad = vertex_on(a, d, mesh);
            let bd = vertex_on(b, d, mesh);
            let bc = vertex_on(b, c, mesh);
            emit(ac, ad, bd, mesh);
            emit(ac, bd, bc, mesh);
        }
        _ => unreachable!("tetrahedron has four corners"),
    }
}

#[inline]
fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_geometry::{filter_components, voxelize};
    use crate::tpms_field::{Primitive, WeightVector};

    fn check_mesh(mesh: &SurfaceMesh) {
        assert!(!mesh.triangles.is_empty());
        assert!(mesh.is_closed_manifold());
        assert!(!mesh.has_degenerate_triangles());
        assert_eq!(mesh.unreferenced_vertices(), 0);
    }

    #[test]
    fn full_grid_gives_box() {
        let spec = LatticeSpec::default().with_resolution(8).with_tiling([1, 1, 1]);
        let grid = VoxelGrid::from_fn([8, 8, 8], spec.cell_size(), |_, _, _| true).unwrap();
        let mesh = extract_surface::<f64>(&grid, None, &spec).unwrap();
        check_mesh(&mesh);
        assert!(mesh.triangles.len() >= 12);
        assert_eq!(mesh.euler_characteristic(), 2);
        let (lo, hi) = mesh.bounding_box().unwrap();
        for k in 0..3 {
            assert!(lo[k].abs() < 1e-9);
            assert!((hi[k] - 50.0).abs() < 1e-9);
        }
        // Edges of the box are chamfered by half a voxel.
        let h = spec.voxel_um();
        let chamfer = 12.0 * 50.0 * h * h / 8.0;
        let v = mesh.signed_volume();
        assert!(v <= 50.0f64.powi(3) + 1e-6 && v >= 50.0f64.powi(3) - chamfer, "{v}");
    }

    #[test]
    fn single_voxel_is_closed_octahedron_like() {
        let spec = LatticeSpec::default().with_resolution(8).with_tiling([1, 1, 1]);
        let grid = VoxelGrid::from_fn([8, 8, 8], spec.cell_size(), |i, j, k| (i, j, k) == (3, 4, 5)).unwrap();
        let mesh = extract_surface::<f64>(&grid, None, &spec).unwrap();
        check_mesh(&mesh);
        assert_eq!(mesh.euler_characteristic(), 2);
        assert!(mesh.signed_volume() > 0.0);
    }

    #[test]
    fn diagonal_voxels_stay_manifold() {
        let spec = LatticeSpec::default().with_resolution(8).with_tiling([1, 1, 1]);
        let grid = VoxelGrid::from_fn([8, 8, 8], spec.cell_size(), |i, j, k| {
            matches!((i, j, k), (2, 2, 2) | (3, 3, 2) | (4, 4, 3) | (2, 3, 3))
        })
        .unwrap();
        check_mesh(&extract_surface::<f64>(&grid, None, &spec).unwrap());
    }

    #[test]
    fn empty_grid_is_an_error() {
        let spec = LatticeSpec::default().with_resolution(8).with_tiling([1, 1, 1]);
        let grid = VoxelGrid::from_fn([8, 8, 8], spec.cell_size(), |_, _, _| false).unwrap();
        assert!(matches!(
            extract_surface::<f64>(&grid, None, &spec),
            Err(Error::EmptyStructure)
        ));
    }

    #[test]
    fn schwarz_p_cell_is_closed_with_voxel_volume() {
        let spec = LatticeSpec::default().with_resolution(32).with_tiling([1, 1, 1]);
        let field = TpmsField::from_weights(WeightVector::<f64>::unit(Primitive::SchwarzP));
        let (grid, _) = filter_components(&voxelize(&field, &spec).unwrap()).unwrap();
        let mesh = extract_surface(&grid, Some(&field), &spec).unwrap();
        check_mesh(&mesh);
        let voxel_volume = grid.solid_count() as f64 * spec.voxel_um().powi(3);
        let rel = (mesh.signed_volume() - voxel_volume).abs() / voxel_volume;
        assert!(rel < 0.10, "mesh {} vs voxels {voxel_volume}", mesh.signed_volume());
    }

    #[test]
    fn gyroid_lattice_bbox_matches_physical_extent() {
        let spec = LatticeSpec::default().with_resolution(12);
        let field = TpmsField::from_weights(WeightVector::<f64>::unit(Primitive::Gyroid));
        let (grid, _) = filter_components(&voxelize(&field, &spec).unwrap()).unwrap();
        let mesh = extract_surface(&grid, Some(&field), &spec).unwrap();
        check_mesh(&mesh);
        let (lo, hi) = mesh.bounding_box().unwrap();
        let extent = spec.extent_um();
        for k in 0..3 {
            assert!(
                (hi[k] - lo[k] - extent[k]).abs() <= spec.voxel_um(),
                "axis {k}: {lo:?} {hi:?}"
            );
        }
    }

    #[test]
    fn gyroid_mesh_volume_matches_voxels() {
        let spec = LatticeSpec::default().with_resolution(32).with_tiling([1, 1, 1]);
        let field = TpmsField::from_weights(WeightVector::<f64>::unit(Primitive::Gyroid));
        let (grid, _) = filter_components(&voxelize(&field, &spec).unwrap()).unwrap();
        let mesh = extract_surface(&grid, Some(&field), &spec).unwrap();
        check_mesh(&mesh);
        let voxel_volume = grid.solid_count() as f64 * spec.voxel_um().powi(3);
        let rel = (mesh.signed_volume() - voxel_volume).abs() / voxel_volume;
        assert!(rel < 0.10, "{} {voxel_volume}", mesh.signed_volume());
    }
}
