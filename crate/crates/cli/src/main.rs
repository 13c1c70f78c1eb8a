//! `saem`: area-preserving spherical parameterization from the command line.

use clap::{Parser, Subcommand};
use saem_core::correction::{self, CorrectionError, CorrectionOptions};
use saem_core::energy::EnergyError;
use saem_core::geom;
use saem_core::initializer::{self, InitError, InitOptions};
use saem_core::mesh::{self, MeshError, MeshFormat, TriMesh};
use saem_core::report;
use saem_core::shapes::{self, ShapeError};
use saem_core::solver::{self, SolverError, SolverOptions};
use saem_core::sphere::{SphereError, SphericalMap};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_IO: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_SOLVER: u8 = 3;

/// Largest tolerated deviation of loaded map vertices from the unit sphere.
const MAP_NORM_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "saem", version, about = "Authalic spherical parameterization of genus-zero meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sample mesh.
    Gen {
        /// Shape: icosphere, ellipsoid, or bumpy.
        shape: String,
        /// Subdivision level (0..=7).
        #[arg(long, default_value_t = 3)]
        level: u32,
        /// Ellipsoid semi-axes a,b,c.
        #[arg(long, default_value = "1,1,1.5")]
        axes: String,
        /// Bump amplitude for the bumpy shape.
        #[arg(long, default_value_t = 0.3)]
        amplitude: f64,
        /// Output mesh path.
        #[arg(long)]
        output: PathBuf,
        /// Mesh format: auto, obj, or off.
        #[arg(long, default_value = "auto")]
        format: String,
    },
    /// Parameterize a mesh onto the unit sphere.
    Param {
        /// Input mesh path.
        #[arg(long)]
        input: PathBuf,
        /// Mesh format: auto, obj, or off.
        #[arg(long, default_value = "auto")]
        format: String,
        /// Output map path.
        #[arg(long)]
        output: Option<PathBuf>,
        /// JSON report path.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Area-ratio histogram CSV path.
        #[arg(long)]
        hist: Option<PathBuf>,
        /// Solver trace CSV path.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Solver iteration cap; 0 skips the solver.
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
        /// Solver energy tolerance.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        /// Fixed-point warmup iteration cap.
        #[arg(long, default_value_t = 15)]
        fp_iters: usize,
        /// Skip the bijectivity correction pass.
        #[arg(long)]
        no_correct: bool,
        /// Seed for deterministic rotations.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pin vertices i,j instead of the automatic selection.
        #[arg(long)]
        fix: Option<String>,
    },
    /// Compute metrics for an existing map.
    Metrics {
        /// Input mesh path.
        #[arg(long)]
        input: PathBuf,
        /// Mesh format: auto, obj, or off.
        #[arg(long, default_value = "auto")]
        format: String,
        /// Spherical map path.
        #[arg(long)]
        map: PathBuf,
        /// JSON report path (stdout when omitted).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Remove folded faces from an existing map.
    Correct {
        /// Input mesh path.
        #[arg(long)]
        input: PathBuf,
        /// Mesh format: auto, obj, or off.
        #[arg(long, default_value = "auto")]
        format: String,
        /// Spherical map path.
        #[arg(long)]
        map: PathBuf,
        /// Corrected map output path.
        #[arg(long)]
        output: Option<PathBuf>,
        /// JSON report path.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Correction round cap.
        #[arg(long, default_value_t = 100)]
        max_rounds: usize,
    },
}

struct Failure {
    code: u8,
    message: String,
}

type AppResult<T> = Result<T, Failure>;

impl Failure {
    fn io(message: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_IO,
            message: message.to_string(),
        }
    }

    fn invalid(message: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.to_string(),
        }
    }

    fn solver(message: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_SOLVER,
            message: message.to_string(),
        }
    }
}

impl From<MeshError> for Failure {
    fn from(e: MeshError) -> Self {
        match e {
            MeshError::Open { .. } | MeshError::WriteFailed { .. } | MeshError::UnknownFormat { .. } => {
                Failure::io(e)
            }
            _ => Failure::invalid(e),
        }
    }
}

impl From<ShapeError> for Failure {
    fn from(e: ShapeError) -> Self {
        Failure::invalid(e)
    }
}

impl From<SphereError> for Failure {
    fn from(e: SphereError) -> Self {
        Failure::invalid(e)
    }
}

impl From<InitError> for Failure {
    fn from(e: InitError) -> Self {
        Failure::solver(e)
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        Failure::solver(e)
    }
}

impl From<CorrectionError> for Failure {
    fn from(e: CorrectionError) -> Self {
        Failure::solver(e)
    }
}

impl From<EnergyError> for Failure {
    fn from(e: EnergyError) -> Self {
        Failure::solver(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    if let Err(f) = configure_threads() {
        eprintln!("error: {}", f.message);
        return ExitCode::from(f.code);
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// SAEM_THREADS caps the linear algebra thread pool; 1 (the default) keeps
/// every reduction sequential for bitwise reproducibility.
fn configure_threads() -> AppResult<()> {
    let threads = match std::env::var("SAEM_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .map_err(|_| Failure::invalid(format!("SAEM_THREADS must be a positive integer, got {v:?}")))?,
        Err(_) => 1,
    };
    let par = match threads {
        0 | 1 => faer::Par::Seq,
        n => faer::Par::rayon(n),
    };
    faer::set_global_parallelism(par);
    Ok(())
}

fn dispatch(command: Command) -> AppResult<()> {
    match command {
        Command::Gen {
            shape,
            level,
            axes,
            amplitude,
            output,
            format,
        } => cmd_gen(&shape, level, &axes, amplitude, &output, &format),
        Command::Param {
            input,
            format,
            output,
            report,
            hist,
            trace,
            max_iters,
            tol,
            fp_iters,
            no_correct,
            seed,
            fix,
        } => cmd_param(ParamConfig {
            input,
            format,
            output,
            report,
            hist,
            trace,
            max_iters,
            tol,
            fp_iters,
            no_correct,
            seed,
            fix,
        }),
        Command::Metrics {
            input,
            format,
            map,
            report,
        } => cmd_metrics(&input, &format, &map, report.as_deref()),
        Command::Correct {
            input,
            format,
            map,
            output,
            report,
            max_rounds,
        } => cmd_correct(&input, &format, &map, output.as_deref(), report.as_deref(), max_rounds),
    }
}

fn parse_format(s: &str) -> AppResult<Option<MeshFormat>> {
    match s {
        "auto" => Ok(None),
        "obj" => Ok(Some(MeshFormat::Obj)),
        "off" => Ok(Some(MeshFormat::Off)),
        _ => Err(Failure::invalid(format!(
            "unknown format {s:?}, expected auto, obj, or off"
        ))),
    }
}

fn parse_axes(s: &str) -> AppResult<[f64; 3]> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(Failure::invalid(format!("--axes expects a,b,c, got {s:?}")));
    }
    let mut axes = [0.0; 3];
    for (slot, part) in axes.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|_| Failure::invalid(format!("--axes component {part:?} is not a number")))?;
        if !(*slot > 0.0) || !slot.is_finite() {
            return Err(Failure::invalid(format!("--axes component {part:?} must be positive")));
        }
    }
    Ok(axes)
}

fn parse_fix(s: Option<&str>, n: usize) -> AppResult<Option<[usize; 2]>> {
    let Some(s) = s else { return Ok(None) };
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Failure::invalid(format!("--fix expects i,j, got {s:?}")));
    }
    let mut fix = [0usize; 2];
    for (slot, part) in fix.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<usize>()
            .map_err(|_| Failure::invalid(format!("--fix index {part:?} is not an integer")))?;
        if *slot >= n {
            return Err(Failure::invalid(format!(
                "--fix index {} out of range for {} vertices",
                slot, n
            )));
        }
    }
    if fix[0] == fix[1] {
        return Err(Failure::invalid("--fix indices must differ"));
    }
    Ok(Some(fix))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn write_text(path: &Path, text: &str) -> AppResult<()> {
    std::fs::write(path, text).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

/// Writes a map with the version and configuration hash in its header.
fn write_map(path: &Path, map: &SphericalMap, mesh: &TriMesh, config: &str) -> AppResult<()> {
    let version = format!("saem {}", env!("CARGO_PKG_VERSION"));
    let hash = format!("config {:016x}", fnv1a(config.as_bytes()));
    let off = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("off"))
        .unwrap_or(false);
    if off {
        mesh::write_off(path, map.points(), mesh.faces())?;
    } else {
        mesh::write_obj(path, map.points(), mesh.faces(), &[&version, &hash])?;
    }
    Ok(())
}

fn load_mesh_normalized(path: &Path, format: &str) -> AppResult<TriMesh> {
    let fmt = parse_format(format)?;
    let m = mesh::load_mesh(path, fmt)?;
    Ok(m.normalize_area()?)
}

/// Loads a spherical map stored as a mesh file: the vertex count must match,
/// and every vertex must lie within `MAP_NORM_TOL` of the unit sphere
/// (vertices are snapped exactly onto it).
fn load_map(path: &Path, mesh: &TriMesh) -> AppResult<SphericalMap> {
    let loaded = mesh::load_mesh(path, None)?;
    if loaded.n_vertices() != mesh.n_vertices() {
        return Err(Failure::invalid(format!(
            "map has {} vertices but the mesh has {}",
            loaded.n_vertices(),
            mesh.n_vertices()
        )));
    }
    let mut points = Vec::with_capacity(loaded.n_vertices());
    for (i, &p) in loaded.vertices().iter().enumerate() {
        let norm = geom::norm(p);
        if (norm - 1.0).abs() > MAP_NORM_TOL {
            return Err(Failure::invalid(format!(
                "map vertex {i} has norm {norm}, more than {MAP_NORM_TOL:e} from the unit sphere"
            )));
        }
        points.push(geom::normalize(p).expect("checked nonzero norm"));
    }
    SphericalMap::new(points).map_err(Failure::from)
}

fn cmd_gen(
    shape: &str,
    level: u32,
    axes: &str,
    amplitude: f64,
    output: &Path,
    format: &str,
) -> AppResult<()> {
    let mesh_out = match shape {
        "icosphere" => shapes::icosphere(level)?,
        "ellipsoid" => shapes::ellipsoid(level, parse_axes(axes)?)?,
        "bumpy" => shapes::bumpy(level, amplitude)?,
        _ => {
            return Err(Failure::invalid(format!(
                "unknown shape {shape:?}, expected icosphere, ellipsoid, or bumpy"
            )))
        }
    };
    let fmt = parse_format(format)?;
    let off = match fmt {
        Some(MeshFormat::Off) => true,
        Some(MeshFormat::Obj) => false,
        None => output
            .extension()
            .map(|e| e.eq_ignore_ascii_case("off"))
            .unwrap_or(false),
    };
    if off {
        mesh::write_off(output, mesh_out.vertices(), mesh_out.faces())?;
    } else {
        let header = format!("saem {}", env!("CARGO_PKG_VERSION"));
        let config = format!("gen;shape={shape};level={level};axes={axes};amplitude={amplitude:e}");
        let hash = format!("config {:016x}", fnv1a(config.as_bytes()));
        mesh::write_obj(output, mesh_out.vertices(), mesh_out.faces(), &[&header, &hash])?;
    }
    println!(
        "generated {shape} level {level}: {} vertices, {} faces",
        mesh_out.n_vertices(),
        mesh_out.n_faces()
    );
    Ok(())
}

struct ParamConfig {
    input: PathBuf,
    format: String,
    output: Option<PathBuf>,
    report: Option<PathBuf>,
    hist: Option<PathBuf>,
    trace: Option<PathBuf>,
    max_iters: usize,
    tol: f64,
    fp_iters: usize,
    no_correct: bool,
    seed: u64,
    fix: Option<String>,
}

impl ParamConfig {
    fn canonical(&self) -> String {
        format!(
            "param;input={};format={};max_iters={};tol={:e};fp_iters={};no_correct={};seed={};fix={}",
            self.input.display(),
            self.format,
            self.max_iters,
            self.tol,
            self.fp_iters,
            self.no_correct,
            self.seed,
            self.fix.as_deref().unwrap_or("")
        )
    }
}

fn cmd_param(cfg: ParamConfig) -> AppResult<()> {
    let t0 = Instant::now();
    let m = load_mesh_normalized(&cfg.input, &cfg.format)?;
    let fixed_override = parse_fix(cfg.fix.as_deref(), m.n_vertices())?;
    let init_opts = InitOptions {
        warmup_max_iters: cfg.fp_iters,
        seed: cfg.seed,
    };
    let seed_map = initializer::initial_spherical_map(&m, &init_opts)?;
    let (warm, _) = initializer::fixed_point_warmup(&m, &seed_map, &init_opts)?;
    let (map, state) = if cfg.max_iters > 0 {
        let sopts = SolverOptions {
            max_iters: cfg.max_iters,
            energy_tol: cfg.tol,
            seed: cfg.seed,
            fixed_override,
            ..SolverOptions::default()
        };
        let (map, state) = solver::minimize(&m, &warm, &sopts)?;
        (map, Some(state))
    } else {
        (warm, None)
    };
    let (map, folds) = if cfg.no_correct {
        (map, None)
    } else {
        let (corrected, stats) = correction::correct_foldings(&m, &map, &CorrectionOptions::default())?;
        (corrected, Some((stats.initial_folds, stats.remaining)))
    };
    let mut rep = report::build_report(&m, &map, state.as_ref(), t0.elapsed().as_secs_f64());
    if let Some((before, after)) = folds {
        rep.folds_before = Some(before);
        rep.folds_after = Some(after);
    }
    if let Some(path) = &cfg.output {
        write_map(path, &map, &m, &cfg.canonical())?;
    }
    if let Some(path) = &cfg.report {
        write_text(path, &report::to_json(&rep))?;
    }
    if let Some(path) = &cfg.hist {
        write_text(path, &report::histogram_csv(&rep.histogram))?;
    }
    if let Some(path) = &cfg.trace {
        let rows = state.as_ref().map(|s| s.trace.as_slice()).unwrap_or(&[]);
        write_text(path, &report::trace_csv(rows))?;
    }
    println!(
        "E_A={:.6e} sd={:.6e} folds={} iterations={} converged={} wall={:.3}s",
        rep.e_authalic,
        rep.area_ratio_sd,
        rep.fold_count,
        rep.iterations,
        rep.converged,
        rep.wall_time_secs
    );
    if let Some(w) = &rep.warning {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn cmd_metrics(input: &Path, format: &str, map_path: &Path, report_path: Option<&Path>) -> AppResult<()> {
    let t0 = Instant::now();
    let m = load_mesh_normalized(input, format)?;
    let map = load_map(map_path, &m)?;
    let rep = report::build_report(&m, &map, None, t0.elapsed().as_secs_f64());
    let text = report::to_json(&rep);
    match report_path {
        Some(path) => write_text(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_correct(
    input: &Path,
    format: &str,
    map_path: &Path,
    output: Option<&Path>,
    report_path: Option<&Path>,
    max_rounds: usize,
) -> AppResult<()> {
    let t0 = Instant::now();
    let m = load_mesh_normalized(input, format)?;
    let map = load_map(map_path, &m)?;
    let opts = CorrectionOptions { max_rounds };
    let (corrected, stats) = correction::correct_foldings(&m, &map, &opts)?;
    if let Some(path) = output {
        if stats.initial_folds == 0 {
            // Nothing changed: pass the input file through byte for byte.
            std::fs::copy(map_path, path)
                .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
        } else {
            let config = format!(
                "correct;input={};map={};max_rounds={max_rounds}",
                input.display(),
                map_path.display()
            );
            write_map(path, &corrected, &m, &config)?;
        }
    }
    let mut rep = report::build_report(&m, &corrected, None, t0.elapsed().as_secs_f64());
    rep.folds_before = Some(stats.initial_folds);
    rep.folds_after = Some(stats.remaining);
    if let Some(path) = report_path {
        write_text(path, &report::to_json(&rep))?;
    }
    println!(
        "folds {} -> {} in {} rounds",
        stats.initial_folds, stats.remaining, stats.rounds
    );
    Ok(())
}
