//! Sparse weighted Laplacians (stretch-weighted and mean-value), stretch
//! factors, the CG preconditioner factorization, and Dirichlet sub-solves.

use std::fmt::Write as _;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use thiserror::Error;

use crate::geom::{self, Vec3};
use crate::mesh::TriMesh;
use crate::sphere::SphericalMap;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("face {face} has a degenerate spherical image")]
    DegenerateImageFace { face: usize },
    #[error("image edge ({a}, {b}) has zero length")]
    ZeroLengthImageEdge { a: usize, b: usize },
    #[error("preconditioner requires the stretch-weighted Laplacian")]
    WrongKind,
    #[error("pinned Laplacian submatrix is not positive definite")]
    IndefinitePreconditioner,
    #[error("sparse system is singular")]
    SingularSystem,
    #[error("sparse matrix assembly failed: {0}")]
    Assembly(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianKind {
    Stretch,
    MeanValue,
}

/// Sparse n×n weighted Laplacian in CSR form with zero row sums. The
/// sparsity pattern is the mesh adjacency plus the diagonal, with columns
/// sorted within each row.
#[derive(Debug, Clone)]
pub struct LaplacianMatrix {
    kind: LaplacianKind,
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl LaplacianMatrix {
    fn with_mesh_pattern(mesh: &TriMesh, kind: LaplacianKind) -> Self {
        let n = mesh.n_vertices();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for v in 0..n {
            let nbrs = mesh.neighbors(v);
            let mut inserted = false;
            for &w in nbrs {
                if !inserted && w > v {
                    col_idx.push(v);
                    inserted = true;
                }
                col_idx.push(w);
            }
            if !inserted {
                col_idx.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        LaplacianMatrix {
            kind,
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Builds a Laplacian from symmetric edge weights: off-diagonal (i, j)
    /// and (j, i) get `w`, diagonals get the negated row sums.
    pub fn from_edge_weights(
        n: usize,
        edges: &[(usize, usize, f64)],
        kind: LaplacianKind,
    ) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(i, j, _) in edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut row_ptr = vec![0usize];
        let mut col_idx = Vec::new();
        for (v, nbrs) in adj.iter_mut().enumerate() {
            nbrs.push(v);
            nbrs.sort_unstable();
            nbrs.dedup();
            col_idx.extend_from_slice(nbrs);
            row_ptr.push(col_idx.len());
        }
        let mut lap = LaplacianMatrix {
            kind,
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; 0],
        };
        lap.values = vec![0.0; lap.col_idx.len()];
        for &(i, j, w) in edges {
            lap.add(i, j, w);
            lap.add(j, i, w);
            lap.add(i, i, -w);
            lap.add(j, j, -w);
        }
        lap
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        let cols = &self.col_idx[range.clone()];
        let at = cols.binary_search(&j).expect("entry inside pattern");
        self.values[range.start + at] += v;
    }

    pub fn kind(&self) -> LaplacianKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(at) => self.values[range.start + at],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            y[i] = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
        y
    }

    /// xᵀ L x.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(y, x)| y * x).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn max_row_sum_abs(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).1.iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.entry(j, i)).abs());
            }
        }
        worst
    }

    /// Matrix Market coordinate-format dump for offline inspection.
    pub fn to_matrix_market(&self) -> String {
        let nnz = self.values.len();
        let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(out, "{} {} {}", self.n, self.n, nnz);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let _ = writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v);
            }
        }
        out
    }
}

/// Ratio of domain to image area of one face, σ = |τ| / |f(τ)|.
pub fn stretch_factor(
    mesh: &TriMesh,
    map: &SphericalMap,
    face: usize,
) -> Result<f64, OperatorError> {
    let [i, j, k] = mesh.faces()[face];
    let p = map.points();
    let img = geom::triangle_area(p[i], p[j], p[k]);
    if !(img > 0.0) || !img.is_finite() {
        return Err(OperatorError::DegenerateImageFace { face });
    }
    Ok(mesh.face_area(face) / img)
}

/// Stretch-weighted Laplacian L_S: off-diagonal (i, j) is
/// −½ Σ over the two incident faces of cot(angle opposite the edge on the
/// image) / σ(face); diagonals make row sums zero. Symmetric.
pub fn build_stretch_laplacian(
    mesh: &TriMesh,
    map: &SphericalMap,
) -> Result<LaplacianMatrix, OperatorError> {
    let mut lap = LaplacianMatrix::with_mesh_pattern(mesh, LaplacianKind::Stretch);
    let p = map.points();
    for (fi, f) in mesh.faces().iter().enumerate() {
        let [i, j, k] = *f;
        let img_area = geom::triangle_area(p[i], p[j], p[k]);
        if !(img_area > 0.0) || !img_area.is_finite() {
            return Err(OperatorError::DegenerateImageFace { face: fi });
        }
        let inv_sigma = img_area / mesh.face_area(fi);
        // Apex c against opposite edge (a, b).
        for (c, a, b) in [(i, j, k), (j, k, i), (k, i, j)] {
            let w = -0.5 * geom::cotangent(p[c], p[a], p[b]) * inv_sigma;
            if !w.is_finite() {
                return Err(OperatorError::DegenerateImageFace { face: fi });
            }
            lap.add(a, b, w);
            lap.add(b, a, w);
            lap.add(a, a, -w);
            lap.add(b, b, -w);
        }
    }
    Ok(lap)
}

/// Mean-value Laplacian L_M: off-diagonal (i, j) is
/// −Σ over incident faces of tan(γ/2) / ‖𝕗_i − 𝕗_j‖ with γ the image angle
/// at vertex i; diagonals make row sums zero. Not symmetric.
pub fn build_mean_value_laplacian(
    mesh: &TriMesh,
    map: &SphericalMap,
) -> Result<LaplacianMatrix, OperatorError> {
    mean_value_laplacian_at(mesh, map.points())
}

/// Mean-value weights evaluated at arbitrary vertex positions (the Tutte
/// embedding uses the domain mesh itself).
pub(crate) fn mean_value_laplacian_at(
    mesh: &TriMesh,
    p: &[Vec3],
) -> Result<LaplacianMatrix, OperatorError> {
    let mut lap = LaplacianMatrix::with_mesh_pattern(mesh, LaplacianKind::MeanValue);
    for f in mesh.faces() {
        let [i, j, k] = *f;
        // Ordered pairs (a, b): angle at a, divided by the image edge length.
        for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
            let t = geom::tan_half_angle(p[a], p[b], p[c]);
            for other in [b, c] {
                let len = geom::dist(p[a], p[other]);
                if len == 0.0 {
                    return Err(OperatorError::ZeroLengthImageEdge { a, b: other });
                }
                let w = t / len;
                if !w.is_finite() {
                    return Err(OperatorError::ZeroLengthImageEdge { a, b: other });
                }
                lap.add(a, other, -w);
                lap.add(a, a, w);
            }
        }
    }
    Ok(lap)
}

/// Cholesky factorization of the stretch Laplacian with two pinned vertices
/// removed. One factor serves both the θ- and φ-blocks (M = I₂ ⊗ [L_S]).
pub struct PreconditionerFactor {
    llt: Llt<usize, f64>,
    free: Vec<usize>,
    sub_triplets: Vec<(usize, usize, f64)>,
}

impl PreconditionerFactor {
    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Solves the pinned submatrix against a single block.
    pub fn solve_block(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.free.len());
        let mut rhs = faer::Mat::<f64>::zeros(b.len(), 1);
        for (i, &v) in b.iter().enumerate() {
            rhs[(i, 0)] = v;
        }
        let x = self.llt.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Solves the block-diagonal system M h = g for a stacked vector
    /// g = [θ-block; φ-block] of length 2·n_free.
    pub fn solve_stacked(&self, g: &[f64]) -> Vec<f64> {
        let nf = self.free.len();
        assert_eq!(g.len(), 2 * nf);
        let mut rhs = faer::Mat::<f64>::zeros(nf, 2);
        for i in 0..nf {
            rhs[(i, 0)] = g[i];
            rhs[(i, 1)] = g[nf + i];
        }
        let x = self.llt.solve(&rhs);
        let mut out = vec![0.0; 2 * nf];
        for i in 0..nf {
            out[i] = x[(i, 0)];
            out[nf + i] = x[(i, 1)];
        }
        out
    }

    /// Multiplies the pinned submatrix against a single block (for residual
    /// checks).
    pub fn apply_block(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.free.len()];
        for &(i, j, v) in &self.sub_triplets {
            y[i] += v * x[j];
        }
        y
    }
}

/// Factorizes the (n−2)×(n−2) principal submatrix of the stretch Laplacian
/// with `fixed` rows/columns deleted, using a fill-reducing reordering.
pub fn build_preconditioner(
    lap: &LaplacianMatrix,
    fixed: [usize; 2],
) -> Result<PreconditionerFactor, OperatorError> {
    if lap.kind() != LaplacianKind::Stretch {
        return Err(OperatorError::WrongKind);
    }
    let n = lap.n();
    let mut pos = vec![usize::MAX; n];
    let mut free = Vec::with_capacity(n - 2);
    for v in 0..n {
        if v != fixed[0] && v != fixed[1] {
            pos[v] = free.len();
            free.push(v);
        }
    }
    let mut sub_triplets = Vec::new();
    let mut faer_triplets = Vec::new();
    for &v in &free {
        let (cols, vals) = lap.row(v);
        for (&j, &val) in cols.iter().zip(vals) {
            if pos[j] != usize::MAX {
                sub_triplets.push((pos[v], pos[j], val));
                faer_triplets.push(Triplet::new(pos[v], pos[j], val));
            }
        }
    }
    let nf = free.len();
    let sub = SparseColMat::<usize, f64>::try_new_from_triplets(nf, nf, &faer_triplets)
        .map_err(|e| OperatorError::Assembly(format!("{e:?}")))?;
    let llt = sub
        .sp_cholesky(faer::Side::Lower)
        .map_err(|_| OperatorError::IndefinitePreconditioner)?;
    Ok(PreconditionerFactor {
        llt,
        free,
        sub_triplets,
    })
}

/// Solves the Dirichlet problem L x = 0 on interior vertices with boundary
/// values prescribed: rows marked `interior` are replaced by the solution of
/// [L]_II x_I = −[L]_IB x_B for both value columns; other rows pass through.
pub(crate) fn solve_dirichlet(
    lap: &LaplacianMatrix,
    interior: &[bool],
    values: &[[f64; 2]],
) -> Result<Vec<[f64; 2]>, OperatorError> {
    let n = lap.n();
    assert_eq!(interior.len(), n);
    assert_eq!(values.len(), n);
    let mut pos = vec![usize::MAX; n];
    let mut ids = Vec::new();
    for v in 0..n {
        if interior[v] {
            pos[v] = ids.len();
            ids.push(v);
        }
    }
    if ids.is_empty() {
        return Ok(values.to_vec());
    }
    let ni = ids.len();
    let mut triplets = Vec::new();
    let mut rhs = faer::Mat::<f64>::zeros(ni, 2);
    for &v in &ids {
        let (cols, vals) = lap.row(v);
        for (&j, &val) in cols.iter().zip(vals) {
            if pos[j] != usize::MAX {
                triplets.push(Triplet::new(pos[v], pos[j], val));
            } else {
                rhs[(pos[v], 0)] -= val * values[j][0];
                rhs[(pos[v], 1)] -= val * values[j][1];
            }
        }
    }
    let sub = SparseColMat::<usize, f64>::try_new_from_triplets(ni, ni, &triplets)
        .map_err(|e| OperatorError::Assembly(format!("{e:?}")))?;
    let lu: Lu<usize, f64> = sub.sp_lu().map_err(|_| OperatorError::SingularSystem)?;
    let x = lu.solve(&rhs);
    let mut out = values.to_vec();
    for (slot, &v) in ids.iter().enumerate() {
        let (a, b) = (x[(slot, 0)], x[(slot, 1)]);
        if !a.is_finite() || !b.is_finite() {
            return Err(OperatorError::SingularSystem);
        }
        out[v] = [a, b];
    }
    Ok(out)
}
