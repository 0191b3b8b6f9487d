//! Star-shaped particles: a positive radial function on the sphere turned
//! into a closed triangle mesh around the origin.

use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::SphericalField;

/// Radii clamped below at a positive floor, so every ray from the origin
/// leaves the particle at positive distance.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    field: SphericalField,
    clamp: f64,
}

impl RadialField {
    pub fn field(&self) -> &SphericalField {
        &self.field
    }

    pub fn clamp(&self) -> f64 {
        self.clamp
    }
}

/// `max(c, r)` pointwise.
pub fn clamp_radial(field: SphericalField, c: f64) -> Result<RadialField> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(format!("clamp must be positive, got {c}")));
    }
    let grid = field.grid().clone();
    let values = field.into_values().into_iter().map(|v| v.max(c)).collect();
    Ok(RadialField {
        field: SphericalField::new(grid, values)?,
        clamp: c,
    })
}

/// One thousandth of the mean radius.
pub fn default_clamp(field: &SphericalField) -> Result<f64> {
    let m = field.mean();
    if m > 0.0 {
        Ok(1e-3 * m)
    } else {
        Err(Error::invalid(format!(
            "mean radius {m} is not positive; pass an explicit clamp"
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

impl ParticleMesh {
    /// Whether every undirected edge belongs to exactly two triangles, in
    /// opposite orientations.
    pub fn is_closed(&self) -> bool {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .collect();
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            return false;
        }
        edges
            .iter()
            .all(|&(a, b)| edges.binary_search(&(b, a)).is_ok())
    }

    /// `(V, E, F)` with `E` counting undirected edges.
    pub fn counts(&self) -> (usize, usize, usize) {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        (self.vertices.len(), edges.len(), self.triangles.len())
    }

    /// Signed enclosed volume; positive when faces point outward.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i]);
                let cross = [
                    b[1] * c[2] - b[2] * c[1],
                    b[2] * c[0] - b[0] * c[2],
                    b[0] * c[1] - b[1] * c[0],
                ];
                (a[0] * cross[0] + a[1] * cross[1] + a[2] * cross[2]) / 6.0
            })
            .sum()
    }
}

/// Surface vertices `r(x) x` for every grid point plus one cap vertex per
/// pole at the mean radius of the adjacent row. Vertices are row-major,
/// followed by the north and then the south cap. Faces are wound
/// counter-clockwise seen from outside.
pub fn build_mesh(radial: &RadialField) -> Result<ParticleMesh> {
    let field = radial.field();
    let grid = field.grid();
    let (rows, cols) = (grid.n_polar(), grid.n_azimuth());
    if rows < 2 || cols < 3 {
        return Err(Error::invalid(format!(
            "mesh needs at least 2 x 3 grid points, got {rows} x {cols}"
        )));
    }
    let mut vertices: Vec<[f64; 3]> = grid
        .points()
        .iter()
        .zip(field.values())
        .map(|(p, &r)| p.unit_vector().map(|u| u * r))
        .collect();
    let row_mean = |i: usize| field.row(i).iter().sum::<f64>() / cols as f64;
    let north = vertices.len();
    vertices.push([0.0, 0.0, row_mean(0)]);
    let south = vertices.len();
    vertices.push([0.0, 0.0, -row_mean(rows - 1)]);

    let v = |i: usize, j: usize| i * cols + j % cols;
    let mut triangles = Vec::with_capacity(2 * rows * cols);
    for j in 0..cols {
        triangles.push([north, v(0, j), v(0, j + 1)]);
    }
    for i in 0..rows - 1 {
        for j in 0..cols {
            triangles.push([v(i, j), v(i + 1, j), v(i, j + 1)]);
            triangles.push([v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)]);
        }
    }
    for j in 0..cols {
        triangles.push([south, v(rows - 1, j + 1), v(rows - 1, j)]);
    }
    Ok(ParticleMesh {
        vertices,
        triangles,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    /// ASCII PLY with vertex and face elements.
    Ply,
    /// `x,y,z` rows, vertices only.
    Csv,
}

impl MeshFormat {
    pub fn from_extension(path: &std::path::Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "ply" => Some(MeshFormat::Ply),
            "csv" | "txt" => Some(MeshFormat::Csv),
            _ => None,
        }
    }
}

impl FromStr for MeshFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ply" => Ok(MeshFormat::Ply),
            "csv" => Ok(MeshFormat::Csv),
            other => Err(Error::invalid(format!("unknown mesh format {other:?}, expected ply or csv"))),
        }
    }
}

pub fn export_mesh<W: Write>(mesh: &ParticleMesh, format: MeshFormat, mut w: W) -> Result<()> {
    match format {
        MeshFormat::Ply => {
            writeln!(w, "ply")?;
            writeln!(w, "format ascii 1.0")?;
            writeln!(w, "element vertex {}", mesh.vertices.len())?;
            for axis in ["x", "y", "z"] {
                writeln!(w, "property double {axis}")?;
            }
            writeln!(w, "element face {}", mesh.triangles.len())?;
            writeln!(w, "property list uchar int vertex_indices")?;
            writeln!(w, "end_header")?;
            for [x, y, z] in &mesh.vertices {
                writeln!(w, "{x} {y} {z}")?;
            }
            for [a, b, c] in &mesh.triangles {
                writeln!(w, "3 {a} {b} {c}")?;
            }
        }
        MeshFormat::Csv => {
            writeln!(w, "x,y,z")?;
            for [x, y, z] in &mesh.vertices {
                writeln!(w, "{x},{y},{z}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the ASCII PLY written by [`export_mesh`] (vertex `x y z`, triangle
/// faces).
pub fn parse_ply<R: BufRead>(r: R, source_name: &str) -> Result<ParticleMesh> {
    let err = |line: usize, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut n_vertices = None;
    let mut n_faces = None;
    let mut saw_magic = false;
    loop {
        let (no, line) = lines
            .next()
            .ok_or_else(|| err(0, "missing end_header".into()))?;
        let line = line?;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["ply"] => saw_magic = true,
            ["format", "ascii", _] => {}
            ["format", ..] => return Err(err(no, "only ascii PLY is supported".into())),
            ["element", "vertex", n] => {
                n_vertices = Some(n.parse::<usize>().map_err(|e| err(no, e.to_string()))?)
            }
            ["element", "face", n] => {
                n_faces = Some(n.parse::<usize>().map_err(|e| err(no, e.to_string()))?)
            }
            ["end_header"] => break,
            _ => {}
        }
        if !saw_magic {
            return Err(err(no, "not a PLY file".into()));
        }
    }
    let n_vertices = n_vertices.ok_or_else(|| err(0, "no vertex element".into()))?;
    let n_faces = n_faces.unwrap_or(0);
    let mut vertices = Vec::with_capacity(n_vertices);
    let mut triangles = Vec::with_capacity(n_faces);
    for (no, line) in lines.by_ref().take(n_vertices) {
        let line = line?;
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|e| err(no, e.to_string())))
            .collect::<Result<_>>()?;
        if v.len() < 3 {
            return Err(err(no, "vertex needs 3 coordinates".into()));
        }
        vertices.push([v[0], v[1], v[2]]);
    }
    for (no, line) in lines.take(n_faces) {
        let line = line?;
        let f: Vec<usize> = line
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|e| err(no, e.to_string())))
            .collect::<Result<_>>()?;
        if f.len() != 4 || f[0] != 3 {
            return Err(err(no, "only triangle faces are supported".into()));
        }
        if f[1..].iter().any(|&i| i >= n_vertices) {
            return Err(err(no, "face index out of range".into()));
        }
        triangles.push([f[1], f[2], f[3]]);
    }
    if vertices.len() != n_vertices || triangles.len() != n_faces {
        return Err(err(0, "file ends before the declared elements".into()));
    }
    Ok(ParticleMesh {
        vertices,
        triangles,
    })
}

/// Reads `x,y,z` vertex rows.
pub fn parse_vertex_csv<R: std::io::Read>(r: R, source_name: &str) -> Result<Vec<[f64; 3]>> {
    let mut reader = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize::<(f64, f64, f64)>().enumerate() {
        let (x, y, z) = rec.map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: i + 2,
            message: e.to_string(),
        })?;
        out.push([x, y, z]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::make_grid;
    use proptest::prelude::*;

    fn norm(v: &[f64; 3]) -> f64 {
        (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
    }

    fn constant(rows: usize, cols: usize, r: f64) -> RadialField {
        let grid = make_grid(rows, cols).unwrap();
        let n = grid.len();
        clamp_radial(SphericalField::new(grid, vec![r; n]).unwrap(), 1e-3).unwrap()
    }

    #[test]
    fn clamp_examples() {
        let grid = make_grid(2, 3).unwrap();
        let f = SphericalField::new(grid, vec![100.0, -5.0, 1.0, 2.0, 0.5, 3.0]).unwrap();
        let r = clamp_radial(f.clone(), 1.0).unwrap();
        assert_eq!(r.field().values(), &[100.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        assert!(clamp_radial(f.clone(), 0.0).is_err());
        assert!(clamp_radial(f.clone(), -1.0).is_err());
        assert!((default_clamp(&f).unwrap() - 1e-3 * f.mean()).abs() < 1e-15);
    }

    #[test]
    fn constant_radius_sphere() {
        let mesh = build_mesh(&constant(4, 8, 2.5)).unwrap();
        assert_eq!(mesh.vertices.len(), 4 * 8 + 2);
        assert!(mesh.vertices.iter().all(|v| (norm(v) - 2.5).abs() < 1e-12));
        assert!(mesh.is_closed());
        let vol = mesh.signed_volume();
        assert!(vol > 0.0 && vol < 4.0 / 3.0 * std::f64::consts::PI * 2.5f64.powi(3));
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(build_mesh(&constant(2, 2, 1.0)).is_err());
        assert!(build_mesh(&constant(2, 3, 1.0)).is_ok());
    }

    #[test]
    fn single_triangle_ply() {
        let mesh = ParticleMesh {
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.5]],
            triangles: vec![[0, 1, 2]],
        };
        let mut buf = Vec::new();
        export_mesh(&mesh, MeshFormat::Ply, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let body: Vec<&str> = text.split("end_header\n").nth(1).unwrap().lines().collect();
        assert_eq!(body, ["0 0 0", "1 0 0", "0 1 0.5", "3 0 1 2"]);
        assert_eq!(parse_ply(&buf[..], "mem").unwrap(), mesh);
    }

    #[test]
    fn round_trips_within_tolerance() {
        let grid = make_grid(6, 9).unwrap();
        let values = (0..grid.len()).map(|i| 1.0 + 0.1 * (i as f64).sin()).collect();
        let radial = clamp_radial(SphericalField::new(grid, values).unwrap(), 0.01).unwrap();
        let mesh = build_mesh(&radial).unwrap();
        let mut ply = Vec::new();
        export_mesh(&mesh, MeshFormat::Ply, &mut ply).unwrap();
        let back = parse_ply(&ply[..], "mem").unwrap();
        assert_eq!(back.triangles, mesh.triangles);
        for (a, b) in back.vertices.iter().zip(&mesh.vertices) {
            assert!((0..3).all(|k| (a[k] - b[k]).abs() < 1e-9));
        }
        let mut csv_bytes = Vec::new();
        export_mesh(&mesh, MeshFormat::Csv, &mut csv_bytes).unwrap();
        let verts = parse_vertex_csv(&csv_bytes[..], "mem").unwrap();
        assert_eq!(verts.len(), mesh.vertices.len());
        for (a, b) in verts.iter().zip(&mesh.vertices) {
            assert!((0..3).all(|k| (a[k] - b[k]).abs() < 1e-9));
        }

        let sphere = build_mesh(&constant(5, 7, 3.0)).unwrap();
        let mut ply = Vec::new();
        export_mesh(&sphere, MeshFormat::Ply, &mut ply).unwrap();
        let back = parse_ply(&ply[..], "mem").unwrap();
        assert!(back.vertices.iter().all(|v| (norm(v) - 3.0).abs() < 1e-9));
    }

    #[test]
    fn malformed_ply_is_rejected() {
        assert!(parse_ply("solid x\n".as_bytes(), "mem").is_err());
        let short = "ply\nformat ascii 1.0\nelement vertex 2\nend_header\n0 0 0\n";
        assert!(parse_ply(short.as_bytes(), "mem").is_err());
        let bad = "ply\nformat ascii 1.0\nelement vertex 1\nelement face 1\nend_header\n0 0 0\n3 0 1 2\n";
        assert!(parse_ply(bad.as_bytes(), "mem").is_err());
    }

    proptest! {
        #[test]
        fn mesh_is_closed_star_shaped_with_euler_two(
            rows in 2usize..9,
            cols in 3usize..12,
            seed in 0u64..1000,
            c in 0.05f64..0.5,
        ) {
            let grid = make_grid(rows, cols).unwrap();
            let values: Vec<f64> = (0..grid.len())
                .map(|i| ((i as f64 + seed as f64) * 0.7).sin())
                .collect();
            let radial = clamp_radial(SphericalField::new(grid.clone(), values).unwrap(), c).unwrap();
            let mesh = build_mesh(&radial).unwrap();
            let (v, e, f) = mesh.counts();
            prop_assert_eq!(v as i64 - e as i64 + f as i64, 2);
            prop_assert!(mesh.is_closed());
            prop_assert!(mesh.signed_volume() > 0.0);
            prop_assert!(mesh.vertices.iter().all(|v| norm(v) >= c - 1e-15));
            for (p, vert) in grid.points().iter().zip(&mesh.vertices) {
                let n = norm(vert);
                let u = p.unit_vector();
                prop_assert!((0..3).all(|k| (vert[k] / n - u[k]).abs() < 1e-12));
            }
        }
    }
}
