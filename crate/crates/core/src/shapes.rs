//! Procedural test shapes: subdivided icospheres, ellipsoids, bumpy spheres,
//! and small closed polyhedra used as fixtures.

use std::collections::HashMap;

use thiserror::Error;

use crate::geom::{self, Vec3};
use crate::mesh::{MeshError, TriMesh};

pub const MAX_SUBDIVISION_LEVEL: u32 = 7;

#[derive(Debug, Error)]
pub enum ShapeError {
    #[error("subdivision level {level} exceeds maximum {MAX_SUBDIVISION_LEVEL}")]
    LevelTooLarge { level: u32 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Regular octahedron inscribed in the unit sphere, outward orientation.
pub fn octahedron() -> TriMesh {
    let vertices = vec![
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    let faces = vec![
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    TriMesh::new(vertices, faces).expect("octahedron fixture is valid")
}

/// Regular icosahedron inscribed in the unit sphere, outward orientation.
pub fn icosahedron() -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let vertices: Vec<Vec3> = raw
        .iter()
        .map(|&v| geom::normalize(v).expect("nonzero"))
        .collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    TriMesh::new(vertices, faces).expect("icosahedron fixture is valid")
}

/// Icosahedron subdivided `level` times with every vertex projected back to
/// the unit sphere: 10·4^level + 2 vertices, 20·4^level faces.
pub fn icosphere(level: u32) -> Result<TriMesh, ShapeError> {
    if level > MAX_SUBDIVISION_LEVEL {
        return Err(ShapeError::LevelTooLarge { level });
    }
    let base = icosahedron();
    let mut vertices = base.vertices().to_vec();
    let mut faces = base.faces().to_vec();
    for _ in 0..level {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next_faces = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mids = [0usize; 3];
            for e in 0..3 {
                let a = f[e];
                let b = f[(e + 1) % 3];
                let key = (a.min(b), a.max(b));
                mids[e] = *midpoint.entry(key).or_insert_with(|| {
                    let p = geom::scale(geom::add(vertices[a], vertices[b]), 0.5);
                    vertices.push(geom::normalize(p).expect("midpoint off origin"));
                    vertices.len() - 1
                });
            }
            next_faces.push([f[0], mids[0], mids[2]]);
            next_faces.push([f[1], mids[1], mids[0]]);
            next_faces.push([f[2], mids[2], mids[1]]);
            next_faces.push([mids[0], mids[1], mids[2]]);
        }
        faces = next_faces;
    }
    Ok(TriMesh::new(vertices, faces)?)
}

/// Icosphere stretched by per-axis semi-axes.
pub fn ellipsoid(level: u32, axes: [f64; 3]) -> Result<TriMesh, ShapeError> {
    let sphere = icosphere(level)?;
    let vertices = sphere
        .vertices()
        .iter()
        .map(|v| [v[0] * axes[0], v[1] * axes[1], v[2] * axes[2]])
        .collect();
    Ok(TriMesh::new(vertices, sphere.faces().to_vec())?)
}

/// Icosphere with a smooth radial perturbation r = 1 + amplitude·g(p),
/// g(p) = sin(3x)·sin(3y)·sin(3z) + sin(2z): eight diagonal bumps plus a
/// north/south asymmetry. Amplitudes below ~0.45 keep the surface embedded.
pub fn bumpy(level: u32, amplitude: f64) -> Result<TriMesh, ShapeError> {
    let sphere = icosphere(level)?;
    let vertices = sphere
        .vertices()
        .iter()
        .map(|&v| {
            let g = (3.0 * v[0]).sin() * (3.0 * v[1]).sin() * (3.0 * v[2]).sin()
                + (2.0 * v[2]).sin();
            geom::scale(v, 1.0 + amplitude * 0.5 * g)
        })
        .collect();
    Ok(TriMesh::new(vertices, sphere.faces().to_vec())?)
}

/// Genus-one grid torus returned as raw arrays: `TriMesh::new` rejects it
/// (Euler characteristic 0), which is exactly what validation tests need.
pub fn torus_grid(nu: usize, nv: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let (big_r, small_r) = (2.0, 0.7);
    let mut vertices = Vec::with_capacity(nu * nv);
    for iu in 0..nu {
        let u = 2.0 * std::f64::consts::PI * iu as f64 / nu as f64;
        for iv in 0..nv {
            let v = 2.0 * std::f64::consts::PI * iv as f64 / nv as f64;
            let w = big_r + small_r * v.cos();
            vertices.push([w * u.cos(), w * u.sin(), small_r * v.sin()]);
        }
    }
    let mut faces = Vec::with_capacity(2 * nu * nv);
    let idx = |iu: usize, iv: usize| (iu % nu) * nv + (iv % nv);
    for iu in 0..nu {
        for iv in 0..nv {
            let (a, b, c, d) = (
                idx(iu, iv),
                idx(iu + 1, iv),
                idx(iu + 1, iv + 1),
                idx(iu, iv + 1),
            );
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    (vertices, faces)
}
