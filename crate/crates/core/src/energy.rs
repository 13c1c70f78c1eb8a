//! Energy functionals (stretch, authalic, spherical authalic), the signed
//! volume measurement, their spherical-coordinate gradients, and the
//! coarse-mesh approximation bound.

use thiserror::Error;

use crate::geom::{self, Vec3};
use crate::mesh::TriMesh;
use crate::operators::{build_stretch_laplacian, OperatorError};
use crate::sphere::{from_spherical, SphericalCoords, SphericalMap};

pub const VOLUME_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("image area is zero")]
    ZeroImageArea,
    #[error("volume measurement {volume:e} is below {VOLUME_TOL:e}: collapsed image")]
    CollapsedImage { volume: f64 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// All energy quantities of one (mesh, map) pair, computed in a single pass.
#[derive(Debug, Clone, Copy)]
pub struct EnergyBreakdown {
    /// E_S = Σ_τ |f(τ)|²/|τ|.
    pub e_stretch: f64,
    /// E_A = (|M|/|f(M)|)·E_S − |f(M)|.
    pub e_authalic: f64,
    /// E_𝔸 = (|M|/(3𝒱))·E_S − 3𝒱.
    pub e_spherical: f64,
    /// 𝒱 = Σ_τ 𝕗_i·(𝕗_j×𝕗_k)/6 (signed).
    pub volume: f64,
    /// |f(M)| = Σ_τ |f(τ)| (unsigned).
    pub image_area: f64,
    /// |M|.
    pub domain_area: f64,
    /// ε_f: longest image edge.
    pub max_image_edge: f64,
}

pub fn breakdown(mesh: &TriMesh, map: &SphericalMap) -> Result<EnergyBreakdown, EnergyError> {
    let p = map.points();
    let mut e_stretch = 0.0;
    let mut volume = 0.0;
    let mut image_area = 0.0;
    let mut domain_area = 0.0;
    let mut max_image_edge = 0.0f64;
    for (fi, f) in mesh.faces().iter().enumerate() {
        let [i, j, k] = *f;
        let img = geom::triangle_area(p[i], p[j], p[k]);
        let dom = mesh.face_area(fi);
        e_stretch += img * img / dom;
        volume += geom::signed_volume(p[i], p[j], p[k]);
        image_area += img;
        domain_area += dom;
        max_image_edge = max_image_edge
            .max(geom::dist(p[i], p[j]))
            .max(geom::dist(p[j], p[k]))
            .max(geom::dist(p[i], p[k]));
    }
    if !(image_area > 0.0) {
        return Err(EnergyError::ZeroImageArea);
    }
    if volume.abs() < VOLUME_TOL {
        return Err(EnergyError::CollapsedImage { volume });
    }
    let e_authalic = domain_area / image_area * e_stretch - image_area;
    let e_spherical = domain_area / (3.0 * volume) * e_stretch - 3.0 * volume;
    Ok(EnergyBreakdown {
        e_stretch,
        e_authalic,
        e_spherical,
        volume,
        image_area,
        domain_area,
        max_image_edge,
    })
}

/// E_S = Σ_τ |f(τ)|²/|τ|.
pub fn stretch_energy(mesh: &TriMesh, map: &SphericalMap) -> f64 {
    let p = map.points();
    mesh.faces()
        .iter()
        .enumerate()
        .map(|(fi, &[i, j, k])| {
            let img = geom::triangle_area(p[i], p[j], p[k]);
            img * img / mesh.face_area(fi)
        })
        .sum()
}

/// Signed volume 𝒱 = Σ_τ 𝕗_i·(𝕗_j×𝕗_k)/6; folded faces contribute
/// negatively.
pub fn volume_measure(mesh: &TriMesh, map: &SphericalMap) -> f64 {
    let p = map.points();
    mesh.faces()
        .iter()
        .map(|&[i, j, k]| geom::signed_volume(p[i], p[j], p[k]))
        .sum()
}

/// E_A = (|M|/|f(M)|)·E_S − |f(M)| with unsigned image areas.
pub fn authalic_energy(mesh: &TriMesh, map: &SphericalMap) -> Result<f64, EnergyError> {
    let p = map.points();
    let mut e_stretch = 0.0;
    let mut image_area = 0.0;
    let mut domain_area = 0.0;
    for (fi, &[i, j, k]) in mesh.faces().iter().enumerate() {
        let img = geom::triangle_area(p[i], p[j], p[k]);
        let dom = mesh.face_area(fi);
        e_stretch += img * img / dom;
        image_area += img;
        domain_area += dom;
    }
    if !(image_area > 0.0) {
        return Err(EnergyError::ZeroImageArea);
    }
    Ok(domain_area / image_area * e_stretch - image_area)
}

/// E_𝔸 = (|M|/(3𝒱))·E_S − 3𝒱.
pub fn spherical_authalic_energy(mesh: &TriMesh, map: &SphericalMap) -> Result<f64, EnergyError> {
    let e_stretch = stretch_energy(mesh, map);
    let volume = volume_measure(mesh, map);
    if volume.abs() < VOLUME_TOL {
        return Err(EnergyError::CollapsedImage { volume });
    }
    Ok(mesh.total_area() / (3.0 * volume) * e_stretch - 3.0 * volume)
}

/// Diagnostic: (|E_𝔸 − E_A|, coarseness bound). The bound is
/// (1 + E_S|M|/(3𝒱|f(M)|))·|f(M)|·(1 − √(1 − ε_f²)) and becomes vacuous
/// (+∞) once the longest image edge reaches 1.
pub fn approximation_bound(
    mesh: &TriMesh,
    map: &SphericalMap,
) -> Result<(f64, f64), EnergyError> {
    let b = breakdown(mesh, map)?;
    let gap = (b.e_spherical - b.e_authalic).abs();
    let eps = b.max_image_edge;
    if eps >= 1.0 {
        return Ok((gap, f64::INFINITY));
    }
    let bound = (1.0 + b.e_stretch * b.domain_area / (3.0 * b.volume * b.image_area))
        * b.image_area
        * (1.0 - (1.0 - eps * eps).sqrt());
    Ok((gap, bound))
}

/// ∂𝕗/∂θ at one vertex.
fn theta_tangent(theta: f64, phi: f64) -> Vec3 {
    [
        theta.cos() * phi.cos(),
        theta.cos() * phi.sin(),
        -theta.sin(),
    ]
}

/// ∂𝕗/∂φ at one vertex.
fn phi_tangent(theta: f64, phi: f64) -> Vec3 {
    [-theta.sin() * phi.sin(), theta.sin() * phi.cos(), 0.0]
}

pub(crate) fn accumulate_volume_gradient(
    faces: &[[usize; 3]],
    coords: &SphericalCoords,
    points: &[Vec3],
    g_theta: &mut [f64],
    g_phi: &mut [f64],
) {
    for &[i, j, k] in faces {
        // ∂V/∂𝕗_i = (𝕗_j × 𝕗_k)/6, cyclically.
        for (v, a, b) in [(i, j, k), (j, k, i), (k, i, j)] {
            let d = geom::scale(geom::cross(points[a], points[b]), 1.0 / 6.0);
            g_theta[v] += geom::dot(d, theta_tangent(coords.theta[v], coords.phi[v]));
            g_phi[v] += geom::dot(d, phi_tangent(coords.theta[v], coords.phi[v]));
        }
    }
}

/// Gradient of the signed volume with respect to (θ, φ), as two length-n
/// vectors. Entries for pinned vertices are present; the solver masks them.
pub fn grad_volume_spherical(mesh: &TriMesh, coords: &SphericalCoords) -> (Vec<f64>, Vec<f64>) {
    let n = coords.len();
    let map = from_spherical(coords);
    let mut g_theta = vec![0.0; n];
    let mut g_phi = vec![0.0; n];
    accumulate_volume_gradient(mesh.faces(), coords, map.points(), &mut g_theta, &mut g_phi);
    (g_theta, g_phi)
}

/// Full per-vertex gradient of E_𝔸 with respect to (θ, φ): two length-n
/// vectors, no pinning applied.
pub fn grad_spherical_authalic_full(
    mesh: &TriMesh,
    coords: &SphericalCoords,
) -> Result<(Vec<f64>, Vec<f64>), EnergyError> {
    let n = coords.len();
    let map = from_spherical(coords);
    let b = breakdown(mesh, &map)?;
    let lap = build_stretch_laplacian(mesh, &map)?;
    let p = map.points();

    // ∇E_S = 2 L_S(𝕗) 𝕗 per Cartesian component, chained through the
    // spherical tangents.
    let mut g_theta = vec![0.0; n];
    let mut g_phi = vec![0.0; n];
    let c_stretch = b.domain_area / (3.0 * b.volume);
    for i in 0..n {
        let (cols, vals) = lap.row(i);
        let mut row = [0.0; 3];
        for (&j, &v) in cols.iter().zip(vals) {
            row = geom::add(row, geom::scale(p[j], v));
        }
        let g_cart = geom::scale(row, 2.0 * c_stretch);
        g_theta[i] = geom::dot(g_cart, theta_tangent(coords.theta[i], coords.phi[i]));
        g_phi[i] = geom::dot(g_cart, phi_tangent(coords.theta[i], coords.phi[i]));
    }

    // −(3 + |M|·E_S/(3𝒱²))·∇𝒱.
    let c_vol = 3.0 + b.domain_area * b.e_stretch / (3.0 * b.volume * b.volume);
    let mut v_theta = vec![0.0; n];
    let mut v_phi = vec![0.0; n];
    accumulate_volume_gradient(mesh.faces(), coords, p, &mut v_theta, &mut v_phi);
    for i in 0..n {
        g_theta[i] -= c_vol * v_theta[i];
        g_phi[i] -= c_vol * v_phi[i];
    }
    Ok((g_theta, g_phi))
}

/// Gradient of E_𝔸 with respect to the free optimization vector
/// 𝐟 ∈ ℝ^{2(n−2)}: [θ entries of free vertices; φ entries], ascending ids.
pub fn grad_spherical_authalic(
    mesh: &TriMesh,
    coords: &SphericalCoords,
) -> Result<Vec<f64>, EnergyError> {
    let (g_theta, g_phi) = grad_spherical_authalic_full(mesh, coords)?;
    let free = coords.free_vertices();
    let mut g = Vec::with_capacity(2 * free.len());
    g.extend(free.iter().map(|&v| g_theta[v]));
    g.extend(free.iter().map(|&v| g_phi[v]));
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use crate::sphere::{detect_foldings, identity_map, to_spherical};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn perturbed_coords(mesh: &TriMesh, seed: u64, eps: f64) -> SphericalCoords {
        let map = identity_map(mesh).unwrap();
        let mut c = to_spherical(&map);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..c.len() {
            c.theta[i] = (c.theta[i] + rng.random_range(-eps..eps)).clamp(0.05, PI - 0.05);
            c.phi[i] += rng.random_range(-eps..eps);
        }
        let map = from_spherical(&c);
        assert!(
            detect_foldings(mesh, &map).is_empty(),
            "perturbation {seed} folded the map; lower eps"
        );
        c
    }

    #[test]
    fn stretch_energy_identity_equals_area() {
        // Constant ratio c = 1: E_S = |M|.
        let mesh = shapes::icosphere(2).unwrap();
        let map = identity_map(&mesh).unwrap();
        let area = mesh.total_area();
        assert!((stretch_energy(&mesh, &map) - area).abs() < 1e-10 * area);
    }

    #[test]
    fn stretch_energy_constant_ratio_scaling() {
        // Domain scaled by 2: |f(τ)| = |τ|/4 for every face, E_S = c²|M|.
        let base = shapes::octahedron();
        let scaled: Vec<[f64; 3]> = base.vertices().iter().map(|&v| geom::scale(v, 2.0)).collect();
        let mesh = TriMesh::new(scaled, base.faces().to_vec()).unwrap();
        let map = identity_map(&base).unwrap();
        let c2 = 1.0 / 16.0;
        let expected = c2 * mesh.total_area();
        assert!((stretch_energy(&mesh, &map) - expected).abs() < 1e-12 * expected.max(1.0));
    }

    #[test]
    fn volume_octahedron_closed_form() {
        let mesh = shapes::octahedron();
        let map = identity_map(&mesh).unwrap();
        assert!((volume_measure(&mesh, &map) - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn volume_matches_divergence_theorem_oracle() {
        let mesh = shapes::icosphere(4).unwrap();
        let map = identity_map(&mesh).unwrap();
        let v = volume_measure(&mesh, &map);
        // Oracle: flux of x/3 through the closed polyhedron.
        let p = map.points();
        let oracle: f64 = mesh
            .faces()
            .iter()
            .map(|&[i, j, k]| {
                let c = geom::scale(geom::add(geom::add(p[i], p[j]), p[k]), 1.0 / 3.0);
                let n = geom::cross(geom::sub(p[j], p[i]), geom::sub(p[k], p[i]));
                geom::dot(c, n) / 6.0
            })
            .sum();
        assert!((v - oracle).abs() < 1e-12 * oracle);
        let ball = 4.0 * PI / 3.0;
        assert!((v - ball).abs() < 0.01 * ball);
    }

    #[test]
    fn authalic_energy_zero_at_constant_ratio() {
        for mesh in [shapes::octahedron(), shapes::icosphere(2).unwrap()] {
            let map = identity_map(&mesh).unwrap();
            let ea = authalic_energy(&mesh, &map).unwrap();
            assert!(ea.abs() <= 1e-10 * mesh.total_area());
        }
    }

    #[test]
    fn authalic_energy_positive_and_matches_resummation() {
        let mesh = shapes::icosphere(2).unwrap();
        let c = perturbed_coords(&mesh, 17, 0.02);
        let map = from_spherical(&c);
        let ea = authalic_energy(&mesh, &map).unwrap();
        assert!(ea > 0.0);
        // Independent resummation with separate accumulators.
        let p = map.points();
        let (mut es, mut fa, mut da) = (0.0f64, 0.0f64, 0.0f64);
        for (fi, &[i, j, k]) in mesh.faces().iter().enumerate() {
            let img = geom::triangle_area(p[i], p[j], p[k]);
            es += img * img / mesh.face_area(fi);
            fa += img;
            da += mesh.face_area(fi);
        }
        let oracle = da / fa * es - fa;
        assert!((ea - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
    }

    #[test]
    fn spherical_energy_octahedron_closed_form() {
        // E_S = 4√3, 3𝒱 = 4, |M| = 4√3 → E_𝔸 = 12 − 4 = 8, E_A = 0.
        let mesh = shapes::octahedron();
        let map = identity_map(&mesh).unwrap();
        let ea = spherical_authalic_energy(&mesh, &map).unwrap();
        assert!((ea - 8.0).abs() < 1e-12);
        let b = breakdown(&mesh, &map).unwrap();
        assert!((b.e_stretch - 4.0 * 3f64.sqrt()).abs() < 1e-12);
        assert!((3.0 * b.volume - 4.0).abs() < 1e-12);
        assert!(b.e_authalic.abs() < 1e-12);
    }

    #[test]
    fn spherical_dominates_authalic_when_fold_free() {
        let mesh = shapes::icosphere(2).unwrap();
        for seed in [1u64, 2, 3, 4, 5] {
            let map = from_spherical(&perturbed_coords(&mesh, seed, 0.02));
            let b = breakdown(&mesh, &map).unwrap();
            assert!(3.0 * b.volume <= b.image_area + 1e-10);
            assert!(b.e_spherical >= b.e_authalic - 1e-10);
            assert!(b.e_authalic >= -1e-10);
        }
    }

    #[test]
    fn bound_holds_on_refined_icospheres() {
        for level in [3u32, 4, 5] {
            let mesh = shapes::icosphere(level).unwrap();
            let map = identity_map(&mesh).unwrap();
            let (gap, bound) = approximation_bound(&mesh, &map).unwrap();
            assert!(bound.is_finite(), "level {level} should have ε_f < 1");
            assert!(gap <= bound, "level {level}: gap {gap} > bound {bound}");
        }
    }

    #[test]
    fn bound_vacuous_on_coarse_octahedron() {
        let mesh = shapes::octahedron();
        let map = identity_map(&mesh).unwrap();
        let (_, bound) = approximation_bound(&mesh, &map).unwrap();
        assert!(bound.is_infinite());
    }

    #[test]
    fn single_face_volume_gradient_is_stationary() {
        // V = det/6 of (e1, e2, e3) is stationary in (θ, φ) at that corner
        // configuration.
        let coords = SphericalCoords {
            theta: vec![PI / 2.0, PI / 2.0, 0.0],
            phi: vec![0.0, PI / 2.0, 0.0],
            fixed: [0, 1],
        };
        let points = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let mut gt = vec![0.0; 3];
        let mut gp = vec![0.0; 3];
        accumulate_volume_gradient(&[[0, 1, 2]], &coords, &points, &mut gt, &mut gp);
        for v in 0..3 {
            assert!(gt[v].abs() < 1e-15, "theta gradient {v} = {}", gt[v]);
            assert!(gp[v].abs() < 1e-15, "phi gradient {v} = {}", gp[v]);
        }
    }

    #[test]
    fn volume_gradient_matches_finite_differences() {
        let mesh = shapes::icosphere(1).unwrap();
        let coords = perturbed_coords(&mesh, 23, 0.05);
        let (gt, gp) = grad_volume_spherical(&mesh, &coords);
        let h = 1e-6;
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for v in 0..coords.len() {
            for (g, angles) in [(&gt, true), (&gp, false)] {
                let mut plus = coords.clone();
                let mut minus = coords.clone();
                if angles {
                    plus.theta[v] += h;
                    minus.theta[v] -= h;
                } else {
                    plus.phi[v] += h;
                    minus.phi[v] -= h;
                }
                let fd = (volume_measure(&mesh, &from_spherical(&plus))
                    - volume_measure(&mesh, &from_spherical(&minus)))
                    / (2.0 * h);
                worst = worst.max((g[v] - fd).abs());
                scale = scale.max(fd.abs());
            }
        }
        assert!(worst < 1e-6 * scale.max(1.0), "worst {worst}, scale {scale}");
    }

    #[test]
    fn phi_gradient_vanishes_at_pole() {
        let mesh = shapes::octahedron();
        let map = identity_map(&mesh).unwrap();
        let coords = to_spherical(&map);
        // Vertex 4 is +e3: θ = 0 exactly.
        assert_eq!(coords.theta[4], 0.0);
        let (_, gp) = grad_volume_spherical(&mesh, &coords);
        assert_eq!(gp[4], 0.0);
    }

    #[test]
    fn authalic_gradient_matches_finite_differences() {
        let mesh = shapes::icosphere(1).unwrap();
        for seed in [31u64, 32, 33] {
            let coords = perturbed_coords(&mesh, seed, 0.04);
            let g = grad_spherical_authalic(&mesh, &coords).unwrap();
            let free = coords.free_vertices();
            let nf = free.len();
            let h = 1e-6;
            let energy = |c: &SphericalCoords| {
                spherical_authalic_energy(&mesh, &from_spherical(c)).unwrap()
            };
            let mut worst = 0.0f64;
            let mut scale = 0.0f64;
            for (slot, &v) in free.iter().enumerate() {
                for (idx, is_theta) in [(slot, true), (nf + slot, false)] {
                    let mut plus = coords.clone();
                    let mut minus = coords.clone();
                    if is_theta {
                        plus.theta[v] += h;
                        minus.theta[v] -= h;
                    } else {
                        plus.phi[v] += h;
                        minus.phi[v] -= h;
                    }
                    let fd = (energy(&plus) - energy(&minus)) / (2.0 * h);
                    worst = worst.max((g[idx] - fd).abs());
                    scale = scale.max(fd.abs());
                }
            }
            assert!(
                worst < 1e-6 * scale.max(1.0),
                "seed {seed}: worst {worst}, scale {scale}"
            );
        }
    }

    #[test]
    fn gradient_orthogonal_to_global_rotation() {
        // Shifting all φ equally is a rotation about z, so the full φ
        // gradient sums to ~0.
        let mesh = shapes::icosphere(2).unwrap();
        let coords = perturbed_coords(&mesh, 41, 0.02);
        let (_, gp) = grad_spherical_authalic_full(&mesh, &coords).unwrap();
        let total: f64 = gp.iter().sum();
        let mass: f64 = gp.iter().map(|v| v.abs()).sum();
        assert!(total.abs() <= 1e-10 * mass.max(1.0));
    }

    #[test]
    fn gradient_vanishes_at_symmetric_critical_point() {
        // The identity map of the area-normalized octahedron is a critical
        // point of E_𝔸 by symmetry.
        let mesh = shapes::octahedron().normalize_area().unwrap();
        let map = identity_map(&shapes::octahedron()).unwrap();
        let coords = to_spherical(&map);
        let (gt, gp) = grad_spherical_authalic_full(&mesh, &coords).unwrap();
        for v in 0..coords.len() {
            assert!(gt[v].abs() < 1e-10, "θ gradient at {v}: {}", gt[v]);
            assert!(gp[v].abs() < 1e-10, "φ gradient at {v}: {}", gp[v]);
        }
    }

    #[test]
    fn collapsed_image_is_rejected() {
        // All vertices at the same point: every image face degenerate.
        let mesh = shapes::octahedron();
        let map = SphericalMap::new(vec![[0.0, 0.0, 1.0]; 6]).unwrap();
        assert!(matches!(
            spherical_authalic_energy(&mesh, &map),
            Err(EnergyError::CollapsedImage { .. })
        ));
        assert!(matches!(
            authalic_energy(&mesh, &map),
            Err(EnergyError::ZeroImageArea)
        ));
    }
}
