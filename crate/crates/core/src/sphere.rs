//! Spherical map representation, spherical/Cartesian conversion,
//! tangent-plane projection, folding detection, and pole-avoiding rotations.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geom::{self, Vec3};
use crate::mesh::TriMesh;

pub const UNIT_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SphereError {
    #[error("map vertex {index} has norm {norm}, not on the unit sphere")]
    NonUnitVertex { index: usize, norm: f64 },
    #[error("map has {map} vertices but the mesh has {mesh}")]
    CountMismatch { map: usize, mesh: usize },
    #[error("face center norm {norm} below 1e-8: face is nearly antipodal")]
    DegenerateFaceCenter { norm: f64 },
}

/// Per-vertex image of the mesh on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalMap {
    points: Vec<Vec3>,
}

impl SphericalMap {
    pub fn new(points: Vec<Vec3>) -> Result<Self, SphereError> {
        for (index, p) in points.iter().enumerate() {
            let norm = geom::norm(*p);
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(SphereError::NonUnitVertex { index, norm });
            }
        }
        Ok(SphericalMap { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }

    pub fn check_compatible(&self, mesh: &TriMesh) -> Result<(), SphereError> {
        if self.points.len() != mesh.n_vertices() {
            return Err(SphereError::CountMismatch {
                map: self.points.len(),
                mesh: mesh.n_vertices(),
            });
        }
        Ok(())
    }
}

/// Colatitude/longitude representation: theta in [0, π], phi in (−π, π],
/// plus the two pinned vertices excluded from the optimization vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalCoords {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub fixed: [usize; 2],
}

impl SphericalCoords {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Vertex ids not pinned, ascending.
    pub fn free_vertices(&self) -> Vec<usize> {
        (0..self.theta.len())
            .filter(|v| *v != self.fixed[0] && *v != self.fixed[1])
            .collect()
    }
}

/// Converts Cartesian unit vectors to (θ, φ). The `fixed` pair defaults to
/// vertices 0 and 1 until the solver selects its own.
pub fn to_spherical(map: &SphericalMap) -> SphericalCoords {
    let mut theta = Vec::with_capacity(map.len());
    let mut phi = Vec::with_capacity(map.len());
    for p in map.points() {
        theta.push(p[2].clamp(-1.0, 1.0).acos());
        let mut f = p[1].atan2(p[0]);
        if f == -std::f64::consts::PI {
            f = std::f64::consts::PI;
        }
        phi.push(f);
    }
    SphericalCoords {
        theta,
        phi,
        fixed: [0, 1],
    }
}

/// Converts (θ, φ) back to Cartesian unit vectors; angles outside the
/// canonical ranges are wrapped by the trigonometry itself.
pub fn from_spherical(coords: &SphericalCoords) -> SphericalMap {
    let points = coords
        .theta
        .iter()
        .zip(&coords.phi)
        .map(|(&t, &f)| [t.sin() * f.cos(), t.sin() * f.sin(), t.cos()])
        .collect();
    SphericalMap { points }
}

/// Faces whose spherical image has nonpositive signed origin-tetrahedron
/// volume: orientation reversed (or degenerate) relative to the outward
/// sphere normal.
pub fn detect_foldings(mesh: &TriMesh, map: &SphericalMap) -> Vec<usize> {
    folded_faces(mesh.faces(), map.points())
}

pub(crate) fn folded_faces(faces: &[[usize; 3]], points: &[Vec3]) -> Vec<usize> {
    faces
        .iter()
        .enumerate()
        .filter(|(_, f)| geom::signed_volume(points[f[0]], points[f[1]], points[f[2]]) <= 0.0)
        .map(|(fi, _)| fi)
        .collect()
}

/// Orthogonally projects every map point onto the tangent plane through `n`
/// (the plane with unit normal n containing the point n itself).
pub fn tangent_project(map: &SphericalMap, n: Vec3) -> Result<Vec<Vec3>, SphereError> {
    let norm = geom::norm(n);
    if norm < 1e-8 {
        return Err(SphereError::DegenerateFaceCenter { norm });
    }
    let n = geom::scale(n, 1.0 / norm);
    Ok(map
        .points()
        .iter()
        .map(|&p| {
            let h = geom::sub(p, n);
            geom::add(geom::sub(h, geom::scale(n, geom::dot(h, n))), n)
        })
        .collect())
}

/// Minimum angular distance from any point to the nearer pole.
pub fn min_pole_distance(points: &[Vec3]) -> f64 {
    points
        .iter()
        .map(|p| {
            let t = p[2].clamp(-1.0, 1.0).acos();
            t.min(std::f64::consts::PI - t)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Deterministic seeded rotation that moves every point at least `margin`
/// away from both poles, if one is needed. Returns `None` when the map is
/// already clear. Tries a fixed budget of candidate rotations and keeps the
/// one with the largest pole clearance.
pub fn pole_clearing_rotation(points: &[Vec3], seed: u64, margin: f64) -> Option<[[f64; 3]; 3]> {
    if min_pole_distance(points) >= margin {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<([[f64; 3]; 3], f64)> = None;
    for _ in 0..128 {
        let r = random_rotation(&mut rng);
        let d = points
            .iter()
            .map(|&p| {
                let q = geom::rotate(&r, p);
                let t = q[2].clamp(-1.0, 1.0).acos();
                t.min(std::f64::consts::PI - t)
            })
            .fold(f64::INFINITY, f64::min);
        if best.map_or(true, |(_, bd)| d > bd) {
            best = Some((r, d));
        }
        if d >= 10.0 * margin {
            break;
        }
    }
    best.map(|(r, _)| r)
}

/// Applies a rotation matrix to every map point.
pub fn rotate_map(map: &SphericalMap, r: &[[f64; 3]; 3]) -> SphericalMap {
    SphericalMap {
        points: map.points().iter().map(|&p| geom::rotate(r, p)).collect(),
    }
}

/// Uniform random rotation from a uniform unit quaternion.
fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let u3: f64 = rng.random();
    let tau = 2.0 * std::f64::consts::PI;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = [
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
        b * (tau * u3).cos(),
    ];
    let (x, y, z, w) = (q[0], q[1], q[2], q[3]);
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
        ],
        [
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
        ],
        [
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Identity map of a sphere-inscribed mesh (vertices must already be unit).
pub fn identity_map(mesh: &TriMesh) -> Result<SphericalMap, SphereError> {
    SphericalMap::new(mesh.vertices().to_vec())
}
