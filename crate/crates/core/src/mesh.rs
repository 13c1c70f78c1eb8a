//! Triangle-mesh data model, OBJ/OFF I/O, topological validation, and
//! geometric primitives (areas, rings, barycentric interpolation).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::geom::{self, Vec3};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("cannot open {path}: {source}")]
    Open {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    WriteFailed {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("cannot infer mesh format from path {path}")]
    UnknownFormat { path: String },
    #[error("face {face} references vertex {index} but the mesh has {n} vertices")]
    InvalidFaceIndex { face: usize, index: usize, n: usize },
    #[error("face {face} references a vertex more than once")]
    RepeatedVertex { face: usize },
    #[error("non-manifold edge ({a}, {b}) shared by {count} faces")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("boundary edge ({a}, {b}): mesh is not closed")]
    BoundaryEdge { a: usize, b: usize },
    #[error("edge ({a}, {b}) has inconsistently oriented incident faces")]
    InconsistentOrientation { a: usize, b: usize },
    #[error("Euler characteristic is {chi}, expected 2 (genus zero)")]
    EulerCharacteristic { chi: i64 },
    #[error("mesh has {components} connected components, expected 1")]
    NotConnected { components: usize },
    #[error("face {face} has zero area")]
    DegenerateFace { face: usize },
    #[error("total surface area is zero or not finite")]
    DegenerateArea,
    #[error("point is off the plane of face {face}")]
    PointOffPlane { face: usize },
    #[error("point lies outside face {face}")]
    PointOutsideFace { face: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Off,
}

/// Closed, consistently oriented, genus-zero triangle mesh. Immutable after
/// construction; all connectivity is derived and validated in `new`.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    /// Undirected edges (i, j) with i < j, sorted lexicographically.
    edges: Vec<(usize, usize)>,
    /// Per edge (i, j): [face containing directed (i, j), face containing (j, i)].
    edge_faces: Vec<[usize; 2]>,
    /// Sorted vertex adjacency.
    neighbors: Vec<Vec<usize>>,
    /// Sorted incident faces per vertex.
    vertex_faces: Vec<Vec<usize>>,
    warnings: Vec<String>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let n = vertices.len();
        let m = faces.len();
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= n {
                    return Err(MeshError::InvalidFaceIndex {
                        face: fi,
                        index: v,
                        n,
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::RepeatedVertex { face: fi });
            }
        }

        // Undirected edge -> (forward face, backward face) where "forward"
        // means the face holds the directed edge (min, max).
        let mut edge_map: BTreeMap<(usize, usize), (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for e in 0..3 {
                let a = f[e];
                let b = f[(e + 1) % 3];
                let key = (a.min(b), a.max(b));
                let entry = edge_map.entry(key).or_default();
                if a < b {
                    entry.0.push(fi);
                } else {
                    entry.1.push(fi);
                }
            }
        }
        let mut edges = Vec::with_capacity(edge_map.len());
        let mut edge_faces = Vec::with_capacity(edge_map.len());
        for (&(a, b), (fwd, bwd)) in &edge_map {
            let count = fwd.len() + bwd.len();
            if count > 2 {
                return Err(MeshError::NonManifoldEdge { a, b, count });
            }
            if count == 1 {
                return Err(MeshError::BoundaryEdge { a, b });
            }
            if fwd.len() != 1 {
                return Err(MeshError::InconsistentOrientation { a, b });
            }
            edges.push((a, b));
            edge_faces.push([fwd[0], bwd[0]]);
        }

        let chi = n as i64 - edges.len() as i64 + m as i64;
        if chi != 2 {
            return Err(MeshError::EulerCharacteristic { chi });
        }

        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        let mut vertex_faces = vec![Vec::new(); n];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                vertex_faces[v].push(fi);
            }
        }

        // Connectivity: the Euler count alone cannot rule out e.g. a sphere
        // plus a torus component.
        let components = count_components(n, &neighbors);
        if components != 1 {
            return Err(MeshError::NotConnected { components });
        }

        let mesh = TriMesh {
            vertices,
            faces,
            edges,
            edge_faces,
            neighbors,
            vertex_faces,
            warnings: Vec::new(),
        };
        for fi in 0..m {
            if !(mesh.face_area(fi) > 0.0) {
                return Err(MeshError::DegenerateFace { face: fi });
            }
        }

        let mut warnings = Vec::new();
        for (fi, f) in mesh.faces.iter().enumerate() {
            if let Some(w) = common_external_neighbor(&mesh.neighbors, f) {
                warnings.push(format!(
                    "face {fi} has all three vertices adjacent to external vertex {w}; \
                     it encloses no interior vertex"
                ));
            }
        }
        Ok(TriMesh { warnings, ..mesh })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_faces(&self) -> &[[usize; 2]] {
        &self.edge_faces
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [i, j, k] = self.faces[face];
        geom::triangle_area(self.vertices[i], self.vertices[j], self.vertices[k])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Uniformly rescales the vertices so the total surface area is 4π.
    pub fn normalize_area(&self) -> Result<TriMesh, MeshError> {
        let a = self.total_area();
        if !(a > 0.0) || !a.is_finite() {
            return Err(MeshError::DegenerateArea);
        }
        let s = (4.0 * std::f64::consts::PI / a).sqrt();
        let vertices = self.vertices.iter().map(|&v| geom::scale(v, s)).collect();
        TriMesh::new(vertices, self.faces.clone())
    }

    /// Cyclically ordered 1-ring of `v`: neighbor vertices and incident
    /// faces, each traversed once around the closed fan. `faces[t]` is the
    /// face between `neighbors[t]` and `neighbors[(t + 1) % len]`.
    pub fn one_ring(&self, v: usize) -> (Vec<usize>, Vec<usize>) {
        let incident = &self.vertex_faces[v];
        let deg = incident.len();
        // Rotate each incident face so v comes first; successor map a -> (b, face)
        // along directed ring edges.
        let mut succ: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        let mut first = usize::MAX;
        for &fi in incident {
            let f = self.faces[fi];
            let (a, b) = if f[0] == v {
                (f[1], f[2])
            } else if f[1] == v {
                (f[2], f[0])
            } else {
                (f[0], f[1])
            };
            if fi == incident[0] {
                first = a;
            }
            succ.insert(a, (b, fi));
        }
        let mut ring = Vec::with_capacity(deg);
        let mut faces = Vec::with_capacity(deg);
        let mut cur = first;
        for _ in 0..deg {
            let &(next, fi) = succ
                .get(&cur)
                .expect("closed manifold vertex ring must be a single cycle");
            ring.push(cur);
            faces.push(fi);
            cur = next;
        }
        assert_eq!(cur, first, "vertex ring did not close");
        (ring, faces)
    }

    /// Maps a point on the plane of a domain face to the image surface via
    /// barycentric interpolation of the per-vertex images.
    pub fn barycentric_map(
        &self,
        images: &[Vec3],
        face: usize,
        point: Vec3,
    ) -> Result<Vec3, MeshError> {
        let [i, j, k] = self.faces[face];
        let (vi, vj, vk) = (self.vertices[i], self.vertices[j], self.vertices[k]);
        let normal = geom::cross(geom::sub(vj, vi), geom::sub(vk, vi));
        let nn = geom::norm(normal);
        let diameter = geom::dist(vi, vj)
            .max(geom::dist(vj, vk))
            .max(geom::dist(vi, vk));
        let off_plane = geom::dot(geom::sub(point, vi), normal) / nn;
        if off_plane.abs() > 1e-9 * diameter {
            return Err(MeshError::PointOffPlane { face });
        }
        let area = 0.5 * nn;
        // Signed sub-areas; inside the face they equal the unsigned ones.
        let sub = |a: Vec3, b: Vec3| geom::dot(geom::cross(geom::sub(a, point), geom::sub(b, point)), normal) / (2.0 * nn);
        let si = sub(vj, vk);
        let sj = sub(vk, vi);
        let sk = sub(vi, vj);
        let tol = 1e-9 * area;
        if si < -tol || sj < -tol || sk < -tol {
            return Err(MeshError::PointOutsideFace { face });
        }
        let (li, lj, lk) = (si / area, sj / area, sk / area);
        Ok(geom::add(
            geom::add(geom::scale(images[i], li), geom::scale(images[j], lj)),
            geom::scale(images[k], lk),
        ))
    }
}

fn count_components(n: usize, neighbors: &[Vec<usize>]) -> usize {
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &w in &neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    components
}

/// Finds a vertex outside the face adjacent to all three of its vertices,
/// i.e. the face encloses no interior vertex on one side.
fn common_external_neighbor(neighbors: &[Vec<usize>], face: &[usize; 3]) -> Option<usize> {
    let [i, j, k] = *face;
    neighbors[i]
        .iter()
        .copied()
        .find(|&w| {
            w != j && w != k && neighbors[j].binary_search(&w).is_ok() && neighbors[k].binary_search(&w).is_ok()
        })
}

fn detect_format(path: &Path) -> Option<MeshFormat> {
    match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
        "obj" => Some(MeshFormat::Obj),
        "off" => Some(MeshFormat::Off),
        _ => None,
    }
}

pub fn load_mesh(path: &Path, format: Option<MeshFormat>) -> Result<TriMesh, MeshError> {
    let fmt = match format {
        Some(f) => f,
        None => detect_format(path).ok_or_else(|| MeshError::UnknownFormat {
            path: path.display().to_string(),
        })?,
    };
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| MeshError::Open {
        path: label.clone(),
        source,
    })?;
    let (vertices, faces) = match fmt {
        MeshFormat::Obj => parse_obj(&text, &label)?,
        MeshFormat::Off => parse_off(&text, &label)?,
    };
    TriMesh::new(vertices, faces)
}

/// Parses Wavefront OBJ text. Only `v` and `f` records contribute; texture,
/// normal, material, and grouping records are ignored. Faces must be
/// triangles with positive 1-based indices.
pub fn parse_obj(text: &str, label: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>), MeshError> {
    let err = |line: usize, msg: String| MeshError::Parse {
        path: label.to_string(),
        line,
        msg,
    };
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut coords = [0.0; 3];
                for c in &mut coords {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| err(line_no, "vertex record needs 3 coordinates".into()))?;
                    *c = tok
                        .parse::<f64>()
                        .map_err(|e| err(line_no, format!("bad coordinate {tok:?}: {e}")))?;
                }
                vertices.push(coords);
            }
            Some("f") => {
                let refs: Vec<&str> = tokens.collect();
                if refs.len() != 3 {
                    return Err(err(
                        line_no,
                        format!(
                            "face with {} vertices; only triangles are supported",
                            refs.len()
                        ),
                    ));
                }
                let mut f = [0usize; 3];
                for (slot, r) in f.iter_mut().zip(&refs) {
                    let first = r.split('/').next().unwrap_or("");
                    let idx = first
                        .parse::<i64>()
                        .map_err(|e| err(line_no, format!("bad vertex index {first:?}: {e}")))?;
                    if idx < 1 {
                        return Err(err(
                            line_no,
                            format!("vertex index {idx} is not positive 1-based"),
                        ));
                    }
                    *slot = (idx - 1) as usize;
                }
                faces.push(f);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

/// Parses ASCII OFF text (optionally with counts on the header line).
pub fn parse_off(text: &str, label: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>), MeshError> {
    let err = |line: usize, msg: String| MeshError::Parse {
        path: label.to_string(),
        line,
        msg,
    };
    // Token stream with line tracking, comments stripped.
    let mut tokens: Vec<(usize, &str)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        for tok in line.split_whitespace() {
            tokens.push((ln + 1, tok));
        }
    }
    let mut pos = 0;
    let mut next = |what: &str| -> Result<(usize, &str), MeshError> {
        let t = tokens
            .get(pos)
            .copied()
            .ok_or_else(|| err(tokens.last().map_or(1, |t| t.0), format!("missing {what}")))?;
        pos += 1;
        Ok(t)
    };
    let (ln, magic) = next("OFF header")?;
    if magic != "OFF" {
        return Err(err(ln, format!("expected OFF header, found {magic:?}")));
    }
    let mut counts = [0usize; 3];
    for (what, c) in ["vertex count", "face count", "edge count"].iter().zip(&mut counts) {
        let (ln, tok) = next(what)?;
        *c = tok
            .parse()
            .map_err(|e| err(ln, format!("bad {what} {tok:?}: {e}")))?;
    }
    let mut vertices = Vec::with_capacity(counts[0]);
    for _ in 0..counts[0] {
        let mut v = [0.0; 3];
        for c in &mut v {
            let (ln, tok) = next("vertex coordinate")?;
            *c = tok
                .parse()
                .map_err(|e| err(ln, format!("bad coordinate {tok:?}: {e}")))?;
        }
        vertices.push(v);
    }
    let mut faces = Vec::with_capacity(counts[1]);
    for _ in 0..counts[1] {
        let (ln, tok) = next("face vertex count")?;
        let k: usize = tok
            .parse()
            .map_err(|e| err(ln, format!("bad face vertex count {tok:?}: {e}")))?;
        if k != 3 {
            return Err(err(
                ln,
                format!("face with {k} vertices; only triangles are supported"),
            ));
        }
        let mut f = [0usize; 3];
        for slot in &mut f {
            let (ln, tok) = next("face index")?;
            *slot = tok
                .parse()
                .map_err(|e| err(ln, format!("bad face index {tok:?}: {e}")))?;
        }
        faces.push(f);
    }
    Ok((vertices, faces))
}

fn format_coord(x: f64) -> String {
    // 17 significant digits: round-trips f64 exactly.
    format!("{x:.16e}")
}

/// Writes vertices and faces as Wavefront OBJ. `comments` become leading
/// `#`-prefixed header lines.
pub fn write_obj(
    path: &Path,
    vertices: &[Vec3],
    faces: &[[usize; 3]],
    comments: &[&str],
) -> Result<(), MeshError> {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    for v in vertices {
        let _ = writeln!(
            out,
            "v {} {} {}",
            format_coord(v[0]),
            format_coord(v[1]),
            format_coord(v[2])
        );
    }
    for f in faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    std::fs::write(path, out).map_err(|source| MeshError::WriteFailed {
        path: path.display().to_string(),
        source,
    })
}

/// Writes vertices and faces as ASCII OFF.
pub fn write_off(path: &Path, vertices: &[Vec3], faces: &[[usize; 3]]) -> Result<(), MeshError> {
    let mut out = String::from("OFF\n");
    let _ = writeln!(out, "{} {} 0", vertices.len(), faces.len());
    for v in vertices {
        let _ = writeln!(
            out,
            "{} {} {}",
            format_coord(v[0]),
            format_coord(v[1]),
            format_coord(v[2])
        );
    }
    for f in faces {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    std::fs::write(path, out).map_err(|source| MeshError::WriteFailed {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn octahedron_topology() {
        let m = shapes::octahedron();
        assert_eq!(m.n_vertices(), 6);
        assert_eq!(m.n_faces(), 8);
        assert_eq!(m.edges().len(), 12);
        assert!(m.warnings().is_empty());
    }

    #[test]
    fn icosahedron_topology() {
        let m = shapes::icosahedron();
        assert_eq!(m.n_vertices(), 12);
        assert_eq!(m.n_faces(), 20);
        assert_eq!(m.edges().len(), 30);
        for v in 0..12 {
            assert_eq!(m.neighbors(v).len(), 5);
        }
        assert!(m.warnings().is_empty());
    }

    #[test]
    fn octahedron_face_areas() {
        // Inscribed in the unit sphere: equilateral faces of side sqrt(2).
        let m = shapes::octahedron();
        let expected = 3f64.sqrt() / 2.0;
        for f in 0..m.n_faces() {
            assert!((m.face_area(f) - expected).abs() < 1e-14);
        }
        assert!((m.total_area() - 4.0 * 3f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn right_triangle_area() {
        let verts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.4, 0.3, 1.0],
        ];
        let faces = vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [2, 0, 3]];
        let m = TriMesh::new(verts, faces).unwrap();
        assert!((m.face_area(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tetrahedron_warns_about_faces_without_interior_vertices() {
        let verts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let faces = vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [2, 0, 3]];
        let m = TriMesh::new(verts, faces).unwrap();
        assert_eq!(m.warnings().len(), 4);
    }

    #[test]
    fn normalize_area_reaches_4pi() {
        let m = shapes::octahedron().normalize_area().unwrap();
        let target = 4.0 * std::f64::consts::PI;
        assert!((m.total_area() - target).abs() <= 1e-12 * target);
        // Known closed form for the scale factor.
        let k = (target / (4.0 * 3f64.sqrt())).sqrt();
        assert!((m.vertices()[0][0] - k).abs() < 1e-14);
        // Already-normalized mesh: identity scaling.
        let m2 = m.normalize_area().unwrap();
        assert!((m2.vertices()[0][0] - m.vertices()[0][0]).abs() < 1e-15);
    }

    #[test]
    fn one_ring_octahedron_apex() {
        let m = shapes::octahedron();
        // Vertex 4 = +e3 has the four equatorial neighbors.
        let (ring, faces) = m.one_ring(4);
        assert_eq!(ring.len(), 4);
        assert_eq!(faces.len(), 4);
        let mut sorted = ring.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
        // Consecutive ring vertices share a face with v.
        for t in 0..4 {
            let f = m.faces()[faces[t]];
            assert!(f.contains(&4));
            assert!(f.contains(&ring[t]));
            assert!(f.contains(&ring[(t + 1) % 4]));
        }
    }

    #[test]
    fn one_ring_matches_exhaustive_scan() {
        let m = shapes::icosphere(2).unwrap();
        for v in 0..m.n_vertices() {
            let (ring, faces) = m.one_ring(v);
            let mut expected_faces: Vec<usize> = (0..m.n_faces())
                .filter(|&f| m.faces()[f].contains(&v))
                .collect();
            let mut got_faces = faces.clone();
            got_faces.sort_unstable();
            expected_faces.sort_unstable();
            assert_eq!(got_faces, expected_faces);
            let mut got_ring = ring.clone();
            got_ring.sort_unstable();
            assert_eq!(got_ring, m.neighbors(v));
        }
    }

    #[test]
    fn barycentric_map_vertices_and_centroid() {
        let m = shapes::octahedron();
        let images: Vec<Vec3> = m.vertices().iter().map(|&v| geom::scale(v, 2.0)).collect();
        let [i, j, k] = m.faces()[0];
        let at_vertex = m.barycentric_map(&images, 0, m.vertices()[i]).unwrap();
        for s in 0..3 {
            assert!((at_vertex[s] - images[i][s]).abs() < 1e-12);
        }
        let centroid = geom::scale(
            geom::add(geom::add(m.vertices()[i], m.vertices()[j]), m.vertices()[k]),
            1.0 / 3.0,
        );
        let at_centroid = m.barycentric_map(&images, 0, centroid).unwrap();
        let expected = geom::scale(geom::add(geom::add(images[i], images[j]), images[k]), 1.0 / 3.0);
        for s in 0..3 {
            assert!((at_centroid[s] - expected[s]).abs() < 1e-12);
        }
    }

    #[test]
    fn barycentric_map_matches_linear_solve() {
        // Oracle: solve the 2x2 barycentric system in the face plane directly.
        let m = shapes::icosahedron();
        let images: Vec<Vec3> = m
            .vertices()
            .iter()
            .map(|&v| [v[0] + 0.3, 2.0 * v[1], v[2] - 0.1])
            .collect();
        let [i, j, k] = m.faces()[7];
        let (vi, vj, vk) = (m.vertices()[i], m.vertices()[j], m.vertices()[k]);
        let (a, b) = (0.23, 0.51);
        let p = geom::add(
            vi,
            geom::add(
                geom::scale(geom::sub(vj, vi), a),
                geom::scale(geom::sub(vk, vi), b),
            ),
        );
        let e1 = geom::sub(vj, vi);
        let e2 = geom::sub(vk, vi);
        let d = geom::sub(p, vi);
        let g11 = geom::dot(e1, e1);
        let g12 = geom::dot(e1, e2);
        let g22 = geom::dot(e2, e2);
        let r1 = geom::dot(d, e1);
        let r2 = geom::dot(d, e2);
        let det = g11 * g22 - g12 * g12;
        let la = (r1 * g22 - r2 * g12) / det;
        let lb = (g11 * r2 - g12 * r1) / det;
        let expected = geom::add(
            geom::scale(images[i], 1.0 - la - lb),
            geom::add(geom::scale(images[j], la), geom::scale(images[k], lb)),
        );
        let got = m.barycentric_map(&images, 7, p).unwrap();
        for s in 0..3 {
            assert!((got[s] - expected[s]).abs() < 1e-12);
        }
    }

    #[test]
    fn barycentric_map_is_affine_on_midpoints() {
        let m = shapes::octahedron();
        let images: Vec<Vec3> = m.vertices().iter().map(|&v| geom::scale(v, 1.7)).collect();
        let [i, j, _] = m.faces()[3];
        let mid = geom::scale(geom::add(m.vertices()[i], m.vertices()[j]), 0.5);
        let got = m.barycentric_map(&images, 3, mid).unwrap();
        let expected = geom::scale(geom::add(images[i], images[j]), 0.5);
        for s in 0..3 {
            assert!((got[s] - expected[s]).abs() < 1e-12);
        }
    }

    #[test]
    fn barycentric_map_rejects_bad_points() {
        let m = shapes::octahedron();
        let images = m.vertices().to_vec();
        let [i, j, k] = m.faces()[0];
        let centroid = geom::scale(
            geom::add(geom::add(m.vertices()[i], m.vertices()[j]), m.vertices()[k]),
            1.0 / 3.0,
        );
        let off = geom::add(centroid, geom::scale(centroid, 0.5));
        assert!(matches!(
            m.barycentric_map(&images, 0, off),
            Err(MeshError::PointOffPlane { .. })
        ));
        // In-plane but outside the triangle.
        let outside = geom::add(
            m.vertices()[i],
            geom::scale(geom::sub(m.vertices()[i], m.vertices()[j]), 0.5),
        );
        assert!(matches!(
            m.barycentric_map(&images, 0, outside),
            Err(MeshError::PointOutsideFace { .. })
        ));
    }

    #[test]
    fn rejects_nonmanifold_edge() {
        // Edge (0,1) used by three faces.
        let verts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, -1.0, 0.0],
        ];
        let faces = vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]];
        match TriMesh::new(verts, faces) {
            Err(MeshError::NonManifoldEdge { count: 3, .. }) => {}
            other => panic!("expected non-manifold edge error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_open_mesh() {
        let verts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
        ];
        let faces = vec![[0, 1, 2]];
        assert!(matches!(
            TriMesh::new(verts, faces),
            Err(MeshError::BoundaryEdge { .. })
        ));
    }

    #[test]
    fn rejects_inconsistent_orientation() {
        let mut faces: Vec<[usize; 3]> = shapes::octahedron().faces().to_vec();
        faces[0].swap(1, 2);
        let verts = shapes::octahedron().vertices().to_vec();
        assert!(matches!(
            TriMesh::new(verts, faces),
            Err(MeshError::InconsistentOrientation { .. })
        ));
    }

    #[test]
    fn rejects_repeated_vertex_in_face() {
        let verts = vec![[0.0; 3]; 4];
        let faces = vec![[0, 1, 1]];
        assert!(matches!(
            TriMesh::new(verts, faces),
            Err(MeshError::RepeatedVertex { face: 0 })
        ));
    }

    #[test]
    fn rejects_degenerate_face() {
        // Planar "pillow": two coincident triangles is rejected earlier, so
        // build a tetrahedron with one collinear corner instead.
        let verts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [2.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let faces = vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [2, 0, 3]];
        assert!(matches!(
            TriMesh::new(verts, faces),
            Err(MeshError::DegenerateFace { face: 0 })
        ));
    }

    #[test]
    fn obj_roundtrip_preserves_coordinates() {
        let m = shapes::icosahedron();
        let dir = std::env::temp_dir().join("saem-mesh-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("icosa.obj");
        write_obj(&path, m.vertices(), m.faces(), &["test fixture"]).unwrap();
        let m2 = load_mesh(&path, None).unwrap();
        assert_eq!(m2.n_vertices(), 12);
        assert_eq!(m2.n_faces(), 20);
        for (a, b) in m.vertices().iter().zip(m2.vertices()) {
            for s in 0..3 {
                assert_eq!(a[s], b[s], "17 significant digits must round-trip");
            }
        }
        assert_eq!(m.faces(), m2.faces());
    }

    #[test]
    fn off_roundtrip_preserves_coordinates() {
        let m = shapes::octahedron();
        let dir = std::env::temp_dir().join("saem-mesh-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("octa.off");
        write_off(&path, m.vertices(), m.faces()).unwrap();
        let m2 = load_mesh(&path, None).unwrap();
        assert_eq!(m2.n_vertices(), 6);
        assert_eq!(m2.n_faces(), 8);
        for (a, b) in m.vertices().iter().zip(m2.vertices()) {
            for s in 0..3 {
                assert_eq!(a[s], b[s]);
            }
        }
    }

    #[test]
    fn obj_parser_ignores_texture_and_normal_records() {
        let text = "# comment\nmtllib x.mtl\nv 0 0 1\nv 1 0 0\nv 0 1 0\nv 0 0 -1\nv -1 0 0\nv 0 -1 0\nvt 0.5 0.5\nvn 0 0 1\ns off\nf 3/1/1 2/1/1 1/1/1\nf 3 1 5\nf 1 2 6\nf 5 1 6\nf 2 3 4\nf 3 5 4\nf 6 2 4\nf 5 6 4\n";
        let (v, f) = parse_obj(text, "inline").unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(f.len(), 8);
        let m = TriMesh::new(v, f).unwrap();
        assert_eq!(m.edges().len(), 12);
    }

    #[test]
    fn obj_parser_rejects_polygons() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        match parse_obj(text, "inline") {
            Err(MeshError::Parse { line: 5, msg, .. }) => {
                assert!(msg.contains("only triangles"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn off_parser_reads_header_and_faces() {
        let text = "# made by hand\nOFF\n4 4 6\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 1 2 3\n3 2 0 3\n";
        let (v, f) = parse_off(text, "inline").unwrap();
        let m = TriMesh::new(v, f).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_faces(), 4);
    }

    #[test]
    fn torus_fails_euler_check() {
        let (v, f) = crate::shapes::torus_grid(8, 6);
        match TriMesh::new(v, f) {
            Err(MeshError::EulerCharacteristic { chi: 0 }) => {}
            other => panic!("expected Euler characteristic error, got {other:?}"),
        }
    }
}
