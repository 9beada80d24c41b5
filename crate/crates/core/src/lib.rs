//! Far-field refractor design with supporting semi-ellipsoids.
//!
//! A point source at the origin emits into a cone of directions; the lens is
//! the lower envelope of N confocal semi-ellipsoids, each sending all of its
//! rays into one target direction. [`solver::solve`] finds coefficients whose
//! refracted intensities match the prescribed ones by monotone coordinate
//! descent, [`newton::quasi_newton_solve`] polishes them, and [`pipeline`]
//! renders solved lenses and exports them as meshes.

pub mod error;
pub mod image;
pub mod lattice;
pub mod manifest;
pub mod newton;
pub mod pipeline;
pub mod refractor;
pub mod solver;
pub mod sphere;
pub mod verify;

pub use error::{Error, Result};
pub use image::{image_to_targets, ImageTargets, IntensityImage, TargetOptions};
pub use lattice::{build_lattices, SourceLattice, TargetLattice};
pub use manifest::RunManifest;
pub use newton::{interpolate_coefficients, multires_schedule, quasi_newton_solve, RefineConfig};
pub use pipeline::{export_mesh, forward_render, scaling_study, solve_refining_grid, MeshFormat};
pub use refractor::{
    degenerate_region_membership, measure, refractor_radius, trace_all, update_component,
    Assignment, CoefficientVector, MeasureVector, SourceGrid, TargetSpec,
};
pub use solver::{solve, SolveReport, SolverConfig};
pub use sphere::{RefractionConstant, UnitDirection};
pub use verify::{run_suite, Suite, SuiteConfig, SuiteOutcome};
