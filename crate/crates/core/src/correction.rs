//! Post-hoc bijectivity correction: folded faces are re-solved from local
//! mean-value systems in the tangent plane at the face center.

use crate::geom::{self, Vec3};
use crate::mesh::TriMesh;
use crate::operators::{self, LaplacianKind, LaplacianMatrix, OperatorError};
use crate::sphere::{self, SphereError, SphericalMap};
use thiserror::Error;

/// Pivot threshold for the local 3×3 solves.
const PIVOT_TOL: f64 = 1e-14;

/// Controls for the correction loop.
#[derive(Debug, Clone)]
pub struct CorrectionOptions {
    /// Cap on full passes over the fold list.
    pub max_rounds: usize,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        Self { max_rounds: 100 }
    }
}

/// Outcome of [`correct_foldings`].
#[derive(Debug, Clone)]
pub struct CorrectionStats {
    /// Rounds executed.
    pub rounds: usize,
    /// Folded faces remaining in the returned map.
    pub remaining: usize,
    /// Folded faces in the input map.
    pub initial_folds: usize,
    /// Fold count at the start of each executed round.
    pub fold_trace: Vec<usize>,
    /// Folds skipped because their local system was singular or degenerate.
    pub skipped: usize,
    /// Processed folds whose projected one-rings were not all convex
    /// (diagnostic only; the solve proceeds regardless).
    pub nonconvex_rings: usize,
    /// Faces actually re-solved at least once, ascending and deduplicated;
    /// every moved vertex belongs to one of these.
    pub processed: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum CorrectionError {
    #[error("face {face} has a near-zero center (norm {norm:e}), no tangent plane")]
    DegenerateFaceCenter { face: usize, norm: f64 },
    #[error("local mean-value system for face {face} is singular")]
    SingularSystem { face: usize },
    #[error("correction requires a mean-value Laplacian")]
    WrongKind,
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Sphere(#[from] SphereError),
}

/// Projects `p` onto the tangent plane of the unit sphere at `n` (‖n‖ = 1).
fn project_point(p: Vec3, n: Vec3) -> Vec3 {
    let shift = geom::dot(p, n) - 1.0;
    geom::sub(p, geom::scale(n, shift))
}

fn unfold_points(
    mesh: &TriMesh,
    points: &[Vec3],
    lap: &LaplacianMatrix,
    face: usize,
) -> Result<[Vec3; 3], CorrectionError> {
    if lap.kind() != LaplacianKind::MeanValue {
        return Err(CorrectionError::WrongKind);
    }
    let f = mesh.faces()[face];
    let center = geom::scale(
        geom::add(geom::add(points[f[0]], points[f[1]]), points[f[2]]),
        1.0 / 3.0,
    );
    let norm = geom::norm(center);
    if norm < 1e-8 {
        return Err(CorrectionError::DegenerateFaceCenter { face, norm });
    }
    let n = geom::scale(center, 1.0 / norm);

    // [L]_FF x = −[L]_F,Fᶜ 𝕗̃ with every off-face neighbor projected onto the
    // tangent plane at n; one 3×3 system per coordinate.
    let mut a = [[0.0; 3]; 3];
    let mut rhs = [[0.0; 3]; 3];
    for (r, &v) in f.iter().enumerate() {
        let (cols, vals) = lap.row(v);
        for (&j, &val) in cols.iter().zip(vals) {
            if let Some(c) = f.iter().position(|&w| w == j) {
                a[r][c] += val;
            } else {
                let q = project_point(points[j], n);
                for s in 0..3 {
                    rhs[s][r] -= val * q[s];
                }
            }
        }
    }
    let mut solved = [[0.0; 3]; 3];
    for s in 0..3 {
        let x = geom::solve3(&a, rhs[s], PIVOT_TOL)
            .ok_or(CorrectionError::SingularSystem { face })?;
        for r in 0..3 {
            solved[r][s] = x[r];
        }
    }
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        out[r] = geom::normalize(solved[r]).ok_or(CorrectionError::SingularSystem { face })?;
    }
    Ok(out)
}

/// Re-solves the three vertices of one folded face against their projected
/// neighbors and returns the replacement unit points in face order.
pub fn unfold_one(
    mesh: &TriMesh,
    map: &SphericalMap,
    lap: &LaplacianMatrix,
    face: usize,
) -> Result<[Vec3; 3], CorrectionError> {
    map.check_compatible(mesh)?;
    unfold_points(mesh, map.points(), lap, face)
}

/// True when the one-ring of `v`, projected onto the tangent plane at `n`,
/// forms a convex polygon.
fn ring_is_convex(mesh: &TriMesh, points: &[Vec3], v: usize, n: Vec3) -> bool {
    let (ring, _) = mesh.one_ring(v);
    let planar: Vec<Vec3> = ring.iter().map(|&w| project_point(points[w], n)).collect();
    let k = planar.len();
    let mut sign = 0.0f64;
    for t in 0..k {
        let a = planar[t];
        let b = planar[(t + 1) % k];
        let c = planar[(t + 2) % k];
        let turn = geom::dot(geom::cross(geom::sub(b, a), geom::sub(c, b)), n);
        if turn != 0.0 {
            if sign != 0.0 && turn.signum() != sign {
                return false;
            }
            sign = turn.signum();
        }
    }
    true
}

/// Removes folded faces by repeated local re-solves.
///
/// Each round rebuilds the mean-value Laplacian once, walks the round-start
/// fold list in ascending face order, and rewrites each fold's three vertices
/// in place from its tangent-plane system (singular systems are skipped and
/// counted). Rounds repeat until no folds remain or `opts.max_rounds` passes
/// have run. Vertices never touched by a processed fold keep their exact
/// input bits; a fold-free input returns unchanged after zero rounds.
pub fn correct_foldings(
    mesh: &TriMesh,
    map: &SphericalMap,
    opts: &CorrectionOptions,
) -> Result<(SphericalMap, CorrectionStats), CorrectionError> {
    map.check_compatible(mesh)?;
    let mut points = map.points().to_vec();
    let mut folds = sphere::folded_faces(mesh.faces(), &points);
    let mut stats = CorrectionStats {
        rounds: 0,
        remaining: 0,
        initial_folds: folds.len(),
        fold_trace: Vec::new(),
        skipped: 0,
        nonconvex_rings: 0,
        processed: Vec::new(),
    };
    while !folds.is_empty() && stats.rounds < opts.max_rounds {
        stats.fold_trace.push(folds.len());
        stats.rounds += 1;
        let lap = operators::mean_value_laplacian_at(mesh, &points)?;
        for &face in &folds {
            match unfold_points(mesh, &points, &lap, face) {
                Ok(replacement) => {
                    let f = mesh.faces()[face];
                    let center = geom::scale(
                        geom::add(geom::add(points[f[0]], points[f[1]]), points[f[2]]),
                        1.0 / 3.0,
                    );
                    if let Some(n) = geom::normalize(center) {
                        if f.iter().any(|&v| !ring_is_convex(mesh, &points, v, n)) {
                            stats.nonconvex_rings += 1;
                        }
                    }
                    for (r, &v) in f.iter().enumerate() {
                        points[v] = replacement[r];
                    }
                    stats.processed.push(face);
                }
                Err(CorrectionError::SingularSystem { .. })
                | Err(CorrectionError::DegenerateFaceCenter { .. }) => {
                    stats.skipped += 1;
                }
                Err(e) => return Err(e),
            }
        }
        folds = sphere::folded_faces(mesh.faces(), &points);
    }
    stats.remaining = folds.len();
    stats.processed.sort_unstable();
    stats.processed.dedup();
    Ok((SphericalMap::new(points)?, stats))
}
