//! Preconditioned nonlinear conjugate-gradient minimization of the spherical
//! authalic energy in the (θ, φ) chart.

use crate::energy::{self, EnergyError, VOLUME_TOL};
use crate::geom;
use crate::mesh::TriMesh;
use crate::operators::{self, OperatorError, PreconditionerFactor};
use crate::sphere::{self, SphereError, SphericalCoords, SphericalMap};
use thiserror::Error;

/// Free polar angles must stay inside [POLE_MARGIN, π − POLE_MARGIN]; a
/// breach triggers a deterministic global rotation.
pub const POLE_MARGIN: f64 = 1e-6;

/// Target clearance for pole-clearing rotations.
const ROTATION_MARGIN: f64 = 1e-3;

/// Smallest step the backtracking phase will try.
const MIN_STEP: f64 = 1e-16;

/// Nonlinear CG controls.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Iteration cap.
    pub max_iters: usize,
    /// Stop once an iteration's energy deficit drops below this (absolute).
    pub energy_tol: f64,
    /// First line-search sample of the first iteration.
    pub initial_alpha: f64,
    /// Armijo sufficient-decrease constant c₁.
    pub armijo_c1: f64,
    /// Curvature constant c₂ for the diagnostic Wolfe check.
    pub wolfe_c2: f64,
    /// Quadratic-interpolation attempts before backtracking by halving.
    pub max_interp_retries: usize,
    /// Record Wolfe-condition diagnostics each iteration.
    pub check_wolfe: bool,
    /// Seed for deterministic pole-clearing rotations.
    pub seed: u64,
    /// Pin these two vertices instead of the area-ratio heuristic.
    pub fixed_override: Option<[usize; 2]>,
    /// Rebuild the preconditioner after a pole rotation (kept by default).
    pub refactor_after_rotation: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            energy_tol: 1e-5,
            initial_alpha: 0.01,
            armijo_c1: 1e-4,
            wolfe_c2: 0.4,
            max_interp_retries: 10,
            check_wolfe: false,
            seed: 0,
            fixed_override: None,
            refactor_after_rotation: false,
        }
    }
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iteration: usize,
    /// E_𝔸 after the step.
    pub e_spherical_authalic: f64,
    /// E_A after the step.
    pub e_authalic: f64,
    pub alpha: f64,
    pub beta: f64,
    pub grad_norm_inf: f64,
    pub fold_count: usize,
}

/// Final solver state returned alongside the map.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Coordinates of the final iterate (θ, φ, pinned pair).
    pub coords: SphericalCoords,
    /// Last gradient, packed [θ-block; φ-block] over free vertices.
    pub gradient: Vec<f64>,
    /// Last search direction.
    pub direction: Vec<f64>,
    /// Last preconditioned gradient 𝐡 = M⁻¹𝐠.
    pub preconditioned: Vec<f64>,
    /// Last accepted step length.
    pub alpha: f64,
    /// Last conjugacy coefficient.
    pub beta: f64,
    /// E_𝔸 of the start map followed by each accepted iterate.
    pub energy_history: Vec<f64>,
    /// Accepted iterations.
    pub iterations: usize,
    /// Energy deficit fell below the tolerance.
    pub converged: bool,
    /// Line search gave up; the best iterate so far was returned.
    pub line_search_failed: bool,
    /// Preconditioner was indefinite, identity used instead.
    pub identity_preconditioner: bool,
    /// Pole-clearing rotations applied (including at start).
    pub pole_rotations: usize,
    /// The pinned vertex pair.
    pub fixed: [usize; 2],
    /// Per-iteration trace.
    pub trace: Vec<TraceRow>,
    /// Iterations whose diagnostic Wolfe curvature check failed.
    pub wolfe_curvature_failures: usize,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solver options must satisfy 0 < c1 < c2 < 1/2 and positive steps")]
    InvalidOptions,
    #[error("line search received a non-descent direction (slope {0:e})")]
    NotDescentDirection(f64),
    #[error("line search found no step satisfying the Armijo condition")]
    LineSearchFailed,
    #[error("energy became non-finite during the solve")]
    NonFiniteEnergy,
    #[error("a pole-clearing rotation changed the energy by {0:e}")]
    RotationDrift(f64),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Sphere(#[from] SphereError),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Picks the two vertices whose one-ring area ratio Σ|f(τ)|/Σ|τ| lies closest
/// to the mean ratio, ties broken toward lower vertex indices.
pub fn select_fixed_vertices(mesh: &TriMesh, map: &SphericalMap) -> [usize; 2] {
    let n = mesh.n_vertices();
    assert!(n >= 3);
    let p = map.points();
    let mut img = vec![0.0; n];
    let mut dom = vec![0.0; n];
    for (fi, &[i, j, k]) in mesh.faces().iter().enumerate() {
        let a_img = geom::triangle_area(p[i], p[j], p[k]);
        let a_dom = mesh.face_area(fi);
        for v in [i, j, k] {
            img[v] += a_img;
            dom[v] += a_dom;
        }
    }
    let ratios: Vec<f64> = img.iter().zip(&dom).map(|(a, b)| a / b).collect();
    let mean = ratios.iter().sum::<f64>() / n as f64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let da = (ratios[a] - mean).abs();
        let db = (ratios[b] - mean).abs();
        da.partial_cmp(&db).unwrap().then(a.cmp(&b))
    });
    [order[0], order[1]]
}

/// Armijo line search driven by one-point quadratic interpolation.
///
/// Samples `phi` at `alpha_init`, fits the quadratic through φ(0), φ′(0) and
/// the sample, and evaluates its minimizer as the step candidate; a candidate
/// with insufficient decrease becomes the next sample, up to
/// `opts.max_interp_retries` fits, after which the last point is halved until
/// Armijo holds. The sample itself is accepted only when the fit degenerates
/// (a sample below the tangent line satisfies Armijo outright). Returns the
/// accepted `(α, φ(α))`.
pub fn line_search(
    mut phi: impl FnMut(f64) -> f64,
    phi0: f64,
    dphi0: f64,
    alpha_init: f64,
    opts: &SolverOptions,
) -> Result<(f64, f64), SolverError> {
    if !(dphi0 < 0.0) {
        return Err(SolverError::NotDescentDirection(dphi0));
    }
    let armijo = |a: f64, e: f64| e <= phi0 + opts.armijo_c1 * a * dphi0;
    let mut s = if alpha_init.is_finite() && alpha_init > 0.0 {
        alpha_init
    } else {
        0.01
    };
    let mut e_s = phi(s);
    for _ in 0..opts.max_interp_retries {
        // φ(α) ≈ phi0 + dphi0·α + a·α²; a ≤ 0 means the sample sits below
        // the tangent line, so the minimizer is unbounded and the sample
        // already satisfies Armijo.
        let a = (e_s - phi0 - s * dphi0) / (s * s);
        if !(a.is_finite() && a > 0.0) {
            break;
        }
        let cand = -dphi0 / (2.0 * a);
        if !(cand.is_finite() && cand > MIN_STEP) {
            break;
        }
        let e_cand = phi(cand);
        if armijo(cand, e_cand) {
            return Ok((cand, e_cand));
        }
        s = cand;
        e_s = e_cand;
    }
    if armijo(s, e_s) {
        return Ok((s, e_s));
    }
    let mut alpha = s * 0.5;
    while alpha >= MIN_STEP {
        let e = phi(alpha);
        if armijo(alpha, e) {
            return Ok((alpha, e));
        }
        alpha *= 0.5;
    }
    Err(SolverError::LineSearchFailed)
}

/// Diagnostic check of the strong Wolfe conditions at a step `alpha`:
/// returns (sufficient decrease, curvature).
pub fn check_wolfe(
    phi0: f64,
    dphi0: f64,
    alpha: f64,
    mut energy_at: impl FnMut(f64) -> f64,
    mut slope_at: impl FnMut(f64) -> f64,
    opts: &SolverOptions,
) -> (bool, bool) {
    let armijo = energy_at(alpha) <= phi0 + opts.armijo_c1 * alpha * dphi0;
    let curvature = slope_at(alpha).abs() <= opts.wolfe_c2 * dphi0.abs();
    (armijo, curvature)
}

/// Adds `a·p` to the free coordinates of `base` ([θ-block; φ-block] packing).
fn step_coords(base: &SphericalCoords, free: &[usize], p: &[f64], a: f64) -> SphericalCoords {
    let mut out = base.clone();
    let nf = free.len();
    for (t, &v) in free.iter().enumerate() {
        out.theta[v] += a * p[t];
        out.phi[v] += a * p[nf + t];
    }
    out
}

/// E_𝔸 with a positivity barrier on the volume measure: iterates whose
/// signed volume is not strictly positive are rejected as +∞ so the line
/// search cannot cross the collapsed region.
fn barrier_energy(mesh: &TriMesh, coords: &SphericalCoords) -> f64 {
    let map = sphere::from_spherical(coords);
    let e_stretch = energy::stretch_energy(mesh, &map);
    let volume = energy::volume_measure(mesh, &map);
    if volume <= VOLUME_TOL {
        return f64::INFINITY;
    }
    let e = mesh.total_area() / (3.0 * volume) * e_stretch - 3.0 * volume;
    if e.is_finite() {
        e
    } else {
        f64::INFINITY
    }
}

fn any_theta_out_of_bounds(coords: &SphericalCoords, free: &[usize]) -> bool {
    free.iter().any(|&v| {
        let t = coords.theta[v];
        !(POLE_MARGIN..=std::f64::consts::PI - POLE_MARGIN).contains(&t)
    })
}

struct Preconditioner {
    factor: Option<PreconditionerFactor>,
}

impl Preconditioner {
    fn build(mesh: &TriMesh, map: &SphericalMap, fixed: [usize; 2]) -> Result<Self, SolverError> {
        let lap = operators::build_stretch_laplacian(mesh, map)?;
        match operators::build_preconditioner(&lap, fixed) {
            Ok(f) => Ok(Self { factor: Some(f) }),
            Err(OperatorError::IndefinitePreconditioner) => Ok(Self { factor: None }),
            Err(e) => Err(e.into()),
        }
    }

    fn is_identity(&self) -> bool {
        self.factor.is_none()
    }

    fn solve(&self, g: &[f64]) -> Vec<f64> {
        match &self.factor {
            Some(f) => f.solve_stacked(g),
            None => g.to_vec(),
        }
    }
}

/// Minimizes E_𝔸 over the free spherical coordinates with preconditioned
/// Fletcher–Reeves CG.
///
/// The preconditioner M = I₂ ⊗ [L_S] is factored once from the start map
/// (indefinite factorizations fall back to the identity). Each iteration runs
/// an Armijo line search seeded with the previous accepted step, refreshes
/// the gradient, and sets β = 𝐡ᵀ𝐠 / 𝐡_prevᵀ𝐠_prev; directions that lose
/// descent restart at −𝐡. Free vertices drifting within [POLE_MARGIN] of a
/// pole trigger a deterministic rotation of the whole map (energy invariant
/// to 1e−10) and a direction restart. Iteration stops when an accepted step
/// lowers the energy by less than `energy_tol`, the cap is reached, or the
/// line search fails (best iterate returned, `line_search_failed` set).
pub fn minimize(
    mesh: &TriMesh,
    map: &SphericalMap,
    opts: &SolverOptions,
) -> Result<(SphericalMap, SolverState), SolverError> {
    if !(opts.armijo_c1 > 0.0
        && opts.armijo_c1 < opts.wolfe_c2
        && opts.wolfe_c2 < 0.5
        && opts.initial_alpha > 0.0
        && opts.energy_tol > 0.0)
    {
        return Err(SolverError::InvalidOptions);
    }
    map.check_compatible(mesh)?;

    let mut pole_rotations = 0;
    let start = match sphere::pole_clearing_rotation(map.points(), opts.seed, ROTATION_MARGIN) {
        Some(rot) => {
            let e_before = energy::spherical_authalic_energy(mesh, map)?;
            let rotated = sphere::rotate_map(map, &rot);
            let e_after = energy::spherical_authalic_energy(mesh, &rotated)?;
            let drift = (e_after - e_before).abs();
            if drift > 1e-10 * e_before.abs().max(1.0) {
                return Err(SolverError::RotationDrift(drift));
            }
            pole_rotations += 1;
            rotated
        }
        None => map.clone(),
    };

    let fixed = opts
        .fixed_override
        .unwrap_or_else(|| select_fixed_vertices(mesh, &start));
    let mut coords = sphere::to_spherical(&start);
    coords.fixed = fixed;
    let free = coords.free_vertices();
    let nf = free.len();

    let mut map_cur = sphere::from_spherical(&coords);
    let mut e_cur = energy::spherical_authalic_energy(mesh, &map_cur)?;
    if !e_cur.is_finite() {
        return Err(SolverError::NonFiniteEnergy);
    }

    let mut precond = Preconditioner::build(mesh, &map_cur, fixed)?;
    let mut identity_preconditioner = precond.is_identity();

    let mut g = energy::grad_spherical_authalic(mesh, &coords)?;
    if g.iter().any(|x| !x.is_finite()) {
        return Err(SolverError::NonFiniteEnergy);
    }
    let mut h = precond.solve(&g);
    let mut gamma = dot(&h, &g);
    let mut p: Vec<f64>;
    if gamma > 0.0 {
        p = h.iter().map(|x| -x).collect();
    } else {
        h = g.clone();
        gamma = dot(&g, &g);
        p = g.iter().map(|x| -x).collect();
    }

    let mut energy_history = vec![e_cur];
    let mut trace = Vec::new();
    let mut alpha_prev = opts.initial_alpha;
    let mut alpha_last = 0.0;
    let mut beta_last = 0.0;
    let mut converged = false;
    let mut line_search_failed = false;
    let mut iterations = 0;
    let mut wolfe_curvature_failures = 0;

    for iter in 1..=opts.max_iters {
        let mut dphi0 = dot(&g, &p);
        if !(dphi0 < 0.0) {
            p = h.iter().map(|x| -x).collect();
            dphi0 = -gamma;
            if !(dphi0 < 0.0) {
                if inf_norm(&g) <= 1e-14 {
                    converged = true;
                    break;
                }
                return Err(SolverError::NotDescentDirection(dphi0));
            }
        }

        let phi = |a: f64| barrier_energy(mesh, &step_coords(&coords, &free, &p, a));
        let (alpha, e_new) = match line_search(phi, e_cur, dphi0, alpha_prev, opts) {
            Ok(pair) => pair,
            Err(SolverError::LineSearchFailed) => {
                line_search_failed = true;
                break;
            }
            Err(e) => return Err(e),
        };

        let e_prev = e_cur;
        coords = step_coords(&coords, &free, &p, alpha);
        map_cur = sphere::from_spherical(&coords);
        e_cur = e_new;
        energy_history.push(e_cur);
        alpha_prev = alpha;
        alpha_last = alpha;
        iterations = iter;

        let p_old = if opts.check_wolfe { Some(p.clone()) } else { None };

        if any_theta_out_of_bounds(&coords, &free) {
            let rot_seed = opts.seed.wrapping_add(pole_rotations as u64 + 1);
            if let Some(rot) =
                sphere::pole_clearing_rotation(map_cur.points(), rot_seed, ROTATION_MARGIN)
            {
                let rotated = sphere::rotate_map(&map_cur, &rot);
                let e_rot = energy::spherical_authalic_energy(mesh, &rotated)?;
                let drift = (e_rot - e_cur).abs();
                if drift > 1e-10 * e_cur.abs().max(1.0) {
                    return Err(SolverError::RotationDrift(drift));
                }
                map_cur = rotated;
                coords = sphere::to_spherical(&map_cur);
                coords.fixed = fixed;
                e_cur = e_rot;
                pole_rotations += 1;
                if opts.refactor_after_rotation {
                    precond = Preconditioner::build(mesh, &map_cur, fixed)?;
                    identity_preconditioner |= precond.is_identity();
                }
            }
            // Restart the direction in the new chart.
            g = energy::grad_spherical_authalic(mesh, &coords)?;
            if g.iter().any(|x| !x.is_finite()) {
                return Err(SolverError::NonFiniteEnergy);
            }
            h = precond.solve(&g);
            gamma = dot(&h, &g);
            p = h.iter().map(|x| -x).collect();
            beta_last = 0.0;
        } else {
            let gamma_old = gamma;
            g = energy::grad_spherical_authalic(mesh, &coords)?;
            if g.iter().any(|x| !x.is_finite()) {
                return Err(SolverError::NonFiniteEnergy);
            }
            h = precond.solve(&g);
            gamma = dot(&h, &g);
            let beta = gamma / gamma_old;
            for t in 0..2 * nf {
                p[t] = -h[t] + beta * p[t];
            }
            if dot(&p, &g) >= 0.0 {
                p = h.iter().map(|x| -x).collect();
            }
            beta_last = beta;
        }

        if let Some(p_old) = p_old {
            let slope = dot(&g, &p_old);
            let (_, curvature) =
                check_wolfe(e_prev, dphi0, alpha, |_| e_new, |_| slope, opts);
            if !curvature {
                wolfe_curvature_failures += 1;
            }
        }

        trace.push(TraceRow {
            iteration: iter,
            e_spherical_authalic: e_cur,
            e_authalic: energy::authalic_energy(mesh, &map_cur)?,
            alpha,
            beta: beta_last,
            grad_norm_inf: inf_norm(&g),
            fold_count: sphere::detect_foldings(mesh, &map_cur).len(),
        });

        if e_prev - e_cur < opts.energy_tol {
            converged = true;
            break;
        }
    }

    let final_map = sphere::from_spherical(&coords);
    Ok((
        final_map,
        SolverState {
            coords,
            gradient: g,
            direction: p,
            preconditioned: h,
            alpha: alpha_last,
            beta: beta_last,
            energy_history,
            iterations,
            converged,
            line_search_failed,
            identity_preconditioner,
            pole_rotations,
            fixed,
            trace,
            wolfe_curvature_failures,
        },
    ))
}
