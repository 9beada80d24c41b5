use std::path::PathBuf;

use crate::solver::SolveReport;

/// Errors produced by the refractor library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("DomainViolation: m·x = {dot} is below kappa = {kappa}")]
    DomainViolation { dot: f64, kappa: f64 },

    #[error(
        "TotalInternalReflection: x·nu = {cos_incidence} is below the critical value {critical}"
    )]
    TotalInternalReflection { cos_incidence: f64, critical: f64 },

    #[error("DegenerateAxes: ellipsoid axes are {separation} apart")]
    DegenerateAxes { separation: f64 },

    #[error("StaleCache: assignment snapshot does not match the coefficient vector")]
    StaleCache,

    #[error("NoFeasibleStep: G_{index} jumps over the window [{lower}, {upper}]; refine the source grid to K >= {recommended_k}")]
    NoFeasibleStep {
        index: usize,
        lower: f64,
        upper: f64,
        recommended_k: usize,
    },

    #[error("SweepCapExceeded: no fixed point after {sweeps} sweeps")]
    SweepCapExceeded { sweeps: usize },

    #[error("DegenerateStart: coefficient {index} lies in a flat region of the measure map")]
    DegenerateStart { index: usize },

    #[error("NotConverged: max residual {} after {} evaluations", .report.err, .report.evaluations)]
    NotConverged { report: Box<SolveReport> },

    #[error("DimensionMismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("TotalReflectionRisk: min m·x over the lattices is {min_dot}, below kappa = {kappa}")]
    TotalReflectionRisk { min_dot: f64, kappa: f64 },

    #[error("AllDark: every image sample is zero")]
    AllDark,

    #[error("UnsupportedFormat: {0}")]
    UnsupportedFormat(String),

    #[error("InvalidInput: {0}")]
    InvalidInput(String),

    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),

    #[error("ImageFormat: {0}")]
    ImageFormat(String),

    #[error("Stage {stage} (n = {n}): {source}")]
    Stage {
        stage: usize,
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("Io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short variant name, used by the CLI when reporting failures.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DomainViolation { .. } => "DomainViolation",
            Error::TotalInternalReflection { .. } => "TotalInternalReflection",
            Error::DegenerateAxes { .. } => "DegenerateAxes",
            Error::StaleCache => "StaleCache",
            Error::NoFeasibleStep { .. } => "NoFeasibleStep",
            Error::SweepCapExceeded { .. } => "SweepCapExceeded",
            Error::DegenerateStart { .. } => "DegenerateStart",
            Error::NotConverged { .. } => "NotConverged",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::TotalReflectionRisk { .. } => "TotalReflectionRisk",
            Error::AllDark => "AllDark",
            Error::UnsupportedFormat(_) => "UnsupportedFormat",
            Error::InvalidInput(_) => "InvalidInput",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::ImageFormat(_) => "ImageFormat",
            Error::Stage { source, .. } => source.name(),
            Error::Io { .. } => "Io",
        }
    }

    /// True for failures of the numerical method itself (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NoFeasibleStep { .. }
            | Error::NotConverged { .. }
            | Error::SweepCapExceeded { .. }
            | Error::DegenerateStart { .. } => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
