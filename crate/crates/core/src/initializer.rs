//! Bijective initial maps: Tutte embedding of the punctured mesh pushed onto
//! the sphere, plus an optional alternating fixed-point warmup.

use crate::energy::{self, EnergyError};
use crate::geom::{self, Vec3};
use crate::mesh::TriMesh;
use crate::operators::{self, OperatorError};
use crate::sphere::{self, SphereError, SphericalMap};
use thiserror::Error;

/// Knobs for the initial-map pipeline.
#[derive(Debug, Clone)]
pub struct InitOptions {
    /// Cap on alternating-projection warmup iterations.
    pub warmup_max_iters: usize,
    /// Seed for the deterministic pole-clearing rotation.
    pub seed: u64,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self {
            warmup_max_iters: 15,
            seed: 0,
        }
    }
}

/// Outcome of the warmup loop.
#[derive(Debug, Clone)]
pub struct WarmupStats {
    /// Number of accepted full iterations.
    pub iterations: usize,
    /// Energy E_𝔸 of the input followed by each measured iterate.
    pub energy_trace: Vec<f64>,
    /// Folded faces in the returned map.
    pub fold_count: usize,
}

/// Failures while constructing or improving the initial map.
#[derive(Debug, Error)]
pub enum InitError {
    #[error("no planar scale produced a fold-free spherical map ({folds} folds at best)")]
    NotBijective { folds: usize },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Sphere(#[from] SphereError),
}

/// Vertex closest to the vertex centroid, ties to the lower index.
fn centroid_vertex(mesh: &TriMesh) -> usize {
    let n = mesh.n_vertices() as f64;
    let mut c = [0.0; 3];
    for v in mesh.vertices() {
        c = geom::add(c, *v);
    }
    c = geom::scale(c, 1.0 / n);
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, v) in mesh.vertices().iter().enumerate() {
        let d = geom::dist(*v, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Breadth-first hop counts from `start`.
fn bfs_depths(mesh: &TriMesh, start: usize) -> Vec<usize> {
    let n = mesh.n_vertices();
    let mut depth = vec![usize::MAX; n];
    depth[start] = 0;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in mesh.neighbors(v) {
            if depth[w] == usize::MAX {
                depth[w] = depth[v] + 1;
                queue.push_back(w);
            }
        }
    }
    depth
}

/// Face whose vertices are deepest from the centroid vertex; it gets removed
/// and ends up covering the south pole. Ties break to the lower face id.
fn south_face(mesh: &TriMesh) -> usize {
    let depth = bfs_depths(mesh, centroid_vertex(mesh));
    let mut best = 0;
    let mut best_sum = 0usize;
    for (f, [i, j, k]) in mesh.faces().iter().enumerate() {
        let s = depth[*i] + depth[*j] + depth[*k];
        if f == 0 || s > best_sum {
            best_sum = s;
            best = f;
        }
    }
    best
}

/// Tutte embedding of the mesh minus `removed`: interior vertices solve the
/// mean-value Laplace equation, the removed face's corners pin to an
/// equilateral triangle on the unit circle. Returns planar positions.
fn tutte_disk(mesh: &TriMesh, removed: usize) -> Result<Vec<[f64; 2]>, InitError> {
    let n = mesh.n_vertices();
    let [i, j, k] = mesh.faces()[removed];
    // The disk's boundary cycle is the removed face reversed: i → k → j.
    // Pinning that cycle counterclockwise keeps interior faces oriented.
    let mut values = vec![[0.0, 0.0]; n];
    let mut interior = vec![true; n];
    for (t, v) in [i, k, j].into_iter().enumerate() {
        let ang = std::f64::consts::FRAC_PI_2 + t as f64 * 2.0 * std::f64::consts::PI / 3.0;
        values[v] = [ang.cos(), ang.sin()];
        interior[v] = false;
    }
    let lap = operators::mean_value_laplacian_at(mesh, mesh.vertices())?;
    let solved = operators::solve_dirichlet(&lap, &interior, &values)?;
    Ok(solved)
}

/// Inverse stereographic projection from the south pole: the plane's origin
/// maps to the north pole, large radii approach the south pole. Planar
/// counterclockwise triangles become outward-oriented on the sphere.
fn plane_to_sphere(uv: [f64; 2]) -> Vec3 {
    let r2 = uv[0] * uv[0] + uv[1] * uv[1];
    let d = 1.0 + r2;
    [2.0 * uv[0] / d, 2.0 * uv[1] / d, (1.0 - r2) / d]
}

fn fold_count_of(points: &[Vec3], faces: &[[usize; 3]]) -> usize {
    sphere::folded_faces(faces, points).len()
}

/// Median planar radius of the interior vertices; drives the default scale so
/// roughly half the mesh lands on each hemisphere.
fn median_radius(planar: &[[f64; 2]], interior: &[bool]) -> f64 {
    let mut radii: Vec<f64> = planar
        .iter()
        .zip(interior)
        .filter(|(_, keep)| **keep)
        .map(|(p, _)| (p[0] * p[0] + p[1] * p[1]).sqrt())
        .collect();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii[radii.len() / 2]
}

/// Bijective spherical seed map via a punctured Tutte embedding.
///
/// The face farthest from the mesh center is removed, the remainder embeds in
/// the plane with mean-value weights, and an inverse stereographic projection
/// wraps the plane around the sphere so the removed face caps the south pole.
/// A ladder of planar scales (and a mirrored fallback) is tried until the
/// result is fold-free.
pub fn initial_spherical_map(mesh: &TriMesh, _opts: &InitOptions) -> Result<SphericalMap, InitError> {
    let removed = south_face(mesh);
    let planar = tutte_disk(mesh, removed)?;
    let [i, j, k] = mesh.faces()[removed];
    let mut interior = vec![true; mesh.n_vertices()];
    for v in [i, j, k] {
        interior[v] = false;
    }
    let base = (1.0 / median_radius(&planar, &interior)).max(1.05);
    let ladder = [base, 2.0, 1.5, 1.1, 3.0, 5.0];
    let mut best_folds = usize::MAX;
    for mirror in [false, true] {
        for scale in ladder {
            let points: Vec<Vec3> = planar
                .iter()
                .map(|&[u, v]| {
                    let v = if mirror { -v } else { v };
                    plane_to_sphere([u * scale, v * scale])
                })
                .collect();
            let folds = fold_count_of(&points, mesh.faces());
            if folds == 0 {
                return Ok(SphericalMap::new(points)?);
            }
            best_folds = best_folds.min(folds);
        }
    }
    Err(InitError::NotBijective { folds: best_folds })
}

/// One Dirichlet smoothing pass over a hemisphere.
///
/// Projects the map through `pole` (+1 projects from the north pole and
/// smooths the southern half, −1 the reverse), solves the stretch-Laplacian
/// Dirichlet problem for vertices inside the unit disk, and lifts the
/// solution back. Skips silently when the system is singular or no vertex is
/// interior.
fn half_step(mesh: &TriMesh, points: &mut [Vec3], pole: f64) {
    let n = points.len();
    let mut planar = vec![[0.0, 0.0]; n];
    let mut interior = vec![false; n];
    let mut any_interior = false;
    let mut any_boundary = false;
    for (v, p) in points.iter().enumerate() {
        let denom = (1.0 - pole * p[2]).max(1e-12);
        let uv = [p[0] / denom, p[1] / denom];
        planar[v] = uv;
        if uv[0] * uv[0] + uv[1] * uv[1] <= 1.0 {
            interior[v] = true;
            any_interior = true;
        } else {
            any_boundary = true;
        }
    }
    if !any_interior || !any_boundary {
        return;
    }
    let map = match SphericalMap::new(points.to_vec()) {
        Ok(m) => m,
        Err(_) => return,
    };
    let lap = match operators::build_stretch_laplacian(mesh, &map) {
        Ok(l) => l,
        Err(_) => return,
    };
    let solved = match operators::solve_dirichlet(&lap, &interior, &planar) {
        Ok(s) => s,
        Err(_) => return,
    };
    for v in 0..n {
        if interior[v] {
            let [u, w] = solved[v];
            let r2 = u * u + w * w;
            let d = 1.0 + r2;
            points[v] = [2.0 * u / d, 2.0 * w / d, pole * (r2 - 1.0) / d];
        }
    }
}

/// Alternating south/north Dirichlet warmup.
///
/// Runs up to `opts.warmup_max_iters` full iterations (one southern and one
/// northern half-step each), tracking E_𝔸 after every full iteration, and
/// stops early the first time the energy increases, returning the last
/// non-increasing iterate. With a zero iteration cap the input map is
/// returned unchanged.
pub fn fixed_point_warmup(
    mesh: &TriMesh,
    map: &SphericalMap,
    opts: &InitOptions,
) -> Result<(SphericalMap, WarmupStats), InitError> {
    map.check_compatible(mesh)?;
    let e0 = energy::spherical_authalic_energy(mesh, map)?;
    let mut trace = vec![e0];
    if opts.warmup_max_iters == 0 {
        let fold_count = fold_count_of(map.points(), mesh.faces());
        return Ok((
            map.clone(),
            WarmupStats {
                iterations: 0,
                energy_trace: trace,
                fold_count,
            },
        ));
    }
    // Rotate poles away from vertices so the stereographic charts are stable.
    let mut best = match sphere::pole_clearing_rotation(map.points(), opts.seed, 1e-3) {
        Some(rot) => sphere::rotate_map(map, &rot),
        None => map.clone(),
    };
    let mut e_best = energy::spherical_authalic_energy(mesh, &best)?;
    let mut accepted = 0;
    for _ in 0..opts.warmup_max_iters {
        let mut pts = best.points().to_vec();
        half_step(mesh, &mut pts, 1.0);
        half_step(mesh, &mut pts, -1.0);
        let candidate = SphericalMap::new(pts)?;
        let e_new = match energy::spherical_authalic_energy(mesh, &candidate) {
            Ok(e) if e.is_finite() => e,
            _ => break,
        };
        trace.push(e_new);
        if e_new > e_best {
            break;
        }
        best = candidate;
        e_best = e_new;
        accepted += 1;
    }
    let fold_count = fold_count_of(best.points(), mesh.faces());
    Ok((
        best,
        WarmupStats {
            iterations: accepted,
            energy_trace: trace,
            fold_count,
        },
    ))
}
