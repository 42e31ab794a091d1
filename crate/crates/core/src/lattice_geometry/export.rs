use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::mesh::SurfaceMesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    /// Binary STL, little-endian.
    Stl,
    /// ASCII Wavefront OBJ.
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "stl" => Some(MeshFormat::Stl),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }
}

/// Writes `mesh` in the format implied by the file extension (`.stl` or `.obj`).
pub fn export_mesh(mesh: &SurfaceMesh, path: &Path) -> Result<()> {
    match MeshFormat::from_path(path) {
        Some(MeshFormat::Stl) => write_stl(mesh, path),
        Some(MeshFormat::Obj) => write_obj(mesh, path),
        None => Err(Error::Config(format!(
            "cannot infer mesh format from {}",
            path.display()
        ))),
    }
}

/// One facet of a binary STL file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StlTriangle {
    pub normal: [f32; 3],
    pub vertices: [[f32; 3]; 3],
}

const STL_HEADER: &[u8] = b"tpms-core binary STL, units: micrometre";

/// Binary STL: 80-byte header, `u32` facet count, then 50 bytes per facet.
pub fn write_stl(mesh: &SurfaceMesh, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);

    let mut header = [0u8; 80];
    header[..STL_HEADER.len()].copy_from_slice(STL_HEADER);
    out.write_all(&header).map_err(io)?;
    let count = u32::try_from(mesh.triangles.len()).map_err(|_| Error::Config("too many triangles for STL".into()))?;
    out.write_all(&count.to_le_bytes()).map_err(io)?;

    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangle_points(t);
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let n = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        let n = if len > 0.0 { n.map(|x| x / len) } else { [0.0; 3] };
        for x in n.iter().chain(a.iter()).chain(b.iter()).chain(c.iter()) {
            out.write_all(&(*x as f32).to_le_bytes()).map_err(io)?;
        }
        out.write_all(&0u16.to_le_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_stl(path: &Path) -> Result<Vec<StlTriangle>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 84 {
        return Err(Error::malformed(path, "shorter than an STL header"));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    if bytes.len() != 84 + 50 * count {
        return Err(Error::malformed(
            path,
            format!("{} bytes for {count} facets", bytes.len()),
        ));
    }
    let f = |off: usize| f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    Ok((0..count)
        .map(|t| {
            let base = 84 + 50 * t;
            let v = |slot: usize| -> [f32; 3] {
                let o = base + 12 * slot;
                [f(o), f(o + 4), f(o + 8)]
            };
            StlTriangle {
                normal: v(0),
                vertices: [v(1), v(2), v(3)],
            }
        })
        .collect())
}

pub fn write_obj(mesh: &SurfaceMesh, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "# tpms-core surface mesh, units: micrometre").map_err(io)?;
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v[0], v[1], v[2]).map_err(io)?;
    }
    for t in &mesh.triangles {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_triangle() -> SurfaceMesh {
        SurfaceMesh {
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            triangles: vec![[0, 1, 2]],
        }
    }

    #[test]
    fn single_facet_stl_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tri.stl");
        export_mesh(&one_triangle(), &path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 80 + 4 + 50);
        let tris = read_stl(&path).unwrap();
        assert_eq!(tris.len(), 1);
        assert_eq!(tris[0].normal, [0.0, 0.0, 1.0]);
        assert_eq!(tris[0].vertices[1], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn obj_lists_vertices_and_faces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tri.obj");
        export_mesh(&one_triangle(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 3);
        assert!(text.lines().any(|l| l == "f 1 2 3"));
    }

    #[test]
    fn unknown_extension_and_bad_path() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            export_mesh(&one_triangle(), &dir.path().join("x.ply")),
            Err(Error::Config(_))
        ));
        let err = export_mesh(&one_triangle(), &dir.path().join("missing/x.stl")).unwrap_err();
        assert!(err.to_string().contains("missing"));
    }
}
