//! Area-distortion metrics, histograms, and serializable run reports.

use crate::energy;
use crate::geom;
use crate::mesh::TriMesh;
use crate::solver::{SolverState, TraceRow};
use crate::sphere::{self, SphericalMap};
use serde::{Deserialize, Serialize};

/// Number of histogram bins.
pub const HISTOGRAM_BINS: usize = 50;

/// Uniform histogram over [0, max(2, observed max)].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Bin edges, `HISTOGRAM_BINS + 1` ascending values starting at 0.
    pub edges: Vec<f64>,
    /// Per-bin face counts; sums to the face count.
    pub counts: Vec<usize>,
}

/// Summary of one parameterization run. Serializes as versioned JSON; wall
/// time stays in memory only so identical runs produce identical bytes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Report format version.
    pub schema: u32,
    pub vertices: usize,
    pub faces: usize,
    /// E_𝔸 of the final map.
    pub e_spherical_authalic: f64,
    /// E_A of the final map.
    pub e_authalic: f64,
    /// E_S of the final map.
    pub e_stretch: f64,
    /// Signed volume measure 𝒱.
    pub volume: f64,
    pub area_ratio_mean: f64,
    pub area_ratio_sd: f64,
    pub area_ratio_min: f64,
    pub area_ratio_max: f64,
    pub fold_count: usize,
    /// Solver iterations (0 when no solve ran).
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub folds_before: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub folds_after: Option<usize>,
    pub histogram: Histogram,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

/// Per-face area-distortion ratio |(|f(τ)|/|f(M)|) / (|τ|/|M|)|.
pub fn area_ratio(mesh: &TriMesh, map: &SphericalMap, face: usize) -> f64 {
    area_ratios(mesh, map)[face]
}

/// All per-face area-distortion ratios.
pub fn area_ratios(mesh: &TriMesh, map: &SphericalMap) -> Vec<f64> {
    let p = map.points();
    let img: Vec<f64> = mesh
        .faces()
        .iter()
        .map(|&[i, j, k]| geom::triangle_area(p[i], p[j], p[k]))
        .collect();
    let img_total: f64 = img.iter().sum();
    let dom_total = mesh.total_area();
    img.iter()
        .enumerate()
        .map(|(fi, a)| ((a / img_total) / (mesh.face_area(fi) / dom_total)).abs())
        .collect()
}

/// Population statistics of a nonempty sample.
fn stats(values: &[f64]) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (mean, var.sqrt(), min, max)
}

/// Bins `values` uniformly over [0, max(2, observed max)].
pub fn build_histogram(values: &[f64]) -> Histogram {
    let hi = values
        .iter()
        .cloned()
        .fold(2.0f64, f64::max);
    let width = hi / HISTOGRAM_BINS as f64;
    let edges: Vec<f64> = (0..=HISTOGRAM_BINS).map(|i| i as f64 * width).collect();
    let mut counts = vec![0usize; HISTOGRAM_BINS];
    for &v in values {
        let bin = ((v / width) as usize).min(HISTOGRAM_BINS - 1);
        counts[bin] += 1;
    }
    Histogram { edges, counts }
}

/// Assembles the report for a finished run. `state` carries solver outcome
/// fields when a solve ran; timing goes to `wall_time_secs` (not serialized).
pub fn build_report(
    mesh: &TriMesh,
    map: &SphericalMap,
    state: Option<&SolverState>,
    wall_time_secs: f64,
) -> MetricsReport {
    let ratios = area_ratios(mesh, map);
    let (mean, sd, min, max) = stats(&ratios);
    let histogram = build_histogram(&ratios);
    let e_stretch = energy::stretch_energy(mesh, map);
    let volume = energy::volume_measure(mesh, map);
    let e_authalic = energy::authalic_energy(mesh, map).unwrap_or(f64::NAN);
    let e_spherical_authalic = energy::spherical_authalic_energy(mesh, map).unwrap_or(f64::NAN);
    let mut warnings = Vec::new();
    if let Some(s) = state {
        if s.line_search_failed {
            warnings.push("line search stalled; best iterate returned".to_string());
        }
        if s.identity_preconditioner {
            warnings.push("indefinite preconditioner; identity used".to_string());
        }
    }
    MetricsReport {
        schema: 1,
        vertices: mesh.n_vertices(),
        faces: mesh.n_faces(),
        e_spherical_authalic,
        e_authalic,
        e_stretch,
        volume,
        area_ratio_mean: mean,
        area_ratio_sd: sd,
        area_ratio_min: min,
        area_ratio_max: max,
        fold_count: sphere::detect_foldings(mesh, map).len(),
        iterations: state.map_or(0, |s| s.iterations),
        converged: state.is_some_and(|s| s.converged),
        warning: if warnings.is_empty() {
            None
        } else {
            Some(warnings.join("; "))
        },
        folds_before: None,
        folds_after: None,
        histogram,
        wall_time_secs,
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json(report: &MetricsReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Histogram as `bin_lo,bin_hi,count` CSV.
pub fn histogram_csv(hist: &Histogram) -> String {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for (i, &c) in hist.counts.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", hist.edges[i], hist.edges[i + 1], c));
    }
    out
}

/// Solver trace as CSV.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out =
        String::from("iteration,e_spherical_authalic,e_authalic,alpha,beta,grad_norm_inf,fold_count\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.iteration,
            r.e_spherical_authalic,
            r.e_authalic,
            r.alpha,
            r.beta,
            r.grad_norm_inf,
            r.fold_count
        ));
    }
    out
}
