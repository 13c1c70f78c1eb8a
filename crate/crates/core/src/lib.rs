//! Area-preserving (authalic) spherical parameterization of genus-zero
//! triangle meshes.
//!
//! The pipeline maps a closed, oriented triangle mesh onto the unit sphere by
//! minimizing the spherical authalic energy with a preconditioned nonlinear
//! conjugate gradient method, then removes any residual folded faces with a
//! local Riemannian correction sweep.
//!
//! Typical use:
//!
//! ```no_run
//! use saem_core::{initializer, mesh, report, solver, correction};
//!
//! let mut m = mesh::load_mesh("model.obj".as_ref(), None).unwrap();
//! m = m.normalize_area().unwrap();
//! let init = initializer::InitOptions::default();
//! let seed = initializer::initial_spherical_map(&m, &init).unwrap();
//! let (warm, _) = initializer::fixed_point_warmup(&m, &seed, &init).unwrap();
//! let opts = solver::SolverOptions::default();
//! let (map, state) = solver::minimize(&m, &warm, &opts).unwrap();
//! let (fixed, _) = correction::correct_foldings(
//!     &m, &map, &correction::CorrectionOptions::default()).unwrap();
//! let rep = report::build_report(&m, &fixed, Some(&state), 0.0);
//! println!("{}", rep.area_ratio_sd);
//! ```

pub mod correction;
pub mod energy;
pub mod geom;
pub mod initializer;
pub mod mesh;
pub mod operators;
pub mod report;
pub mod shapes;
pub mod solver;
pub mod sphere;
