//! C ABI over `refractor-core`.
//!
//! Objects are opaque heap handles released with their `_free` function.
//! Every fallible call returns an [`RfStatus`]; on failure the message is
//! available from [`rf_last_error_message`] on the same thread. Panics never
//! cross the boundary: they are reported as [`RfStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use refractor_core::newton::{quasi_newton_solve, RefineConfig};
use refractor_core::pipeline::{export_mesh, solve_refining_grid, MeshFormat};
use refractor_core::sphere::check_no_total_reflection;
use refractor_core::{
    measure, CoefficientVector, Error, RefractionConstant, SolveReport, SolverConfig,
    SourceLattice, TargetLattice, TargetSpec, UnitDirection,
};

/// Outcome of a call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvalidConfig = 3,
    /// A coordinate window was skipped on the finest allowed grid.
    NoFeasibleStep = 4,
    /// Refinement stopped above tolerance; the report is still returned.
    NotConverged = 5,
    SweepCapExceeded = 6,
    DegenerateStart = 7,
    /// Directions, κ and grid violate the refraction geometry.
    Geometry = 8,
    Io = 9,
    Internal = 10,
    Panic = 11,
}

fn status_of(e: &Error) -> RfStatus {
    match e {
        Error::NoFeasibleStep { .. } => RfStatus::NoFeasibleStep,
        Error::NotConverged { .. } => RfStatus::NotConverged,
        Error::SweepCapExceeded { .. } => RfStatus::SweepCapExceeded,
        Error::DegenerateStart { .. } => RfStatus::DegenerateStart,
        Error::DomainViolation { .. }
        | Error::TotalInternalReflection { .. }
        | Error::DegenerateAxes { .. }
        | Error::TotalReflectionRisk { .. } => RfStatus::Geometry,
        Error::InvalidConfig(_) => RfStatus::InvalidConfig,
        Error::InvalidInput(_)
        | Error::DimensionMismatch { .. }
        | Error::UnsupportedFormat(_)
        | Error::AllDark
        | Error::ImageFormat(_) => RfStatus::InvalidInput,
        Error::Io { .. } => RfStatus::Io,
        Error::Stage { source, .. } => status_of(source),
        Error::StaleCache => RfStatus::Internal,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `body`, recording any error or panic for [`rf_last_error_message`].
fn guard(body: impl FnOnce() -> Result<(), (RfStatus, String)>) -> RfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            RfStatus::Panic
        }
    }
}

fn core(e: Error) -> (RfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RfStatus, String) {
    (RfStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or point to `len` readable doubles.
unsafe fn slice<'a>(
    p: *const f64,
    len: usize,
    what: &str,
) -> Result<&'a [f64], (RfStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or a nul-terminated string.
unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, (RfStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (RfStatus::InvalidInput, format!("{what} is not UTF-8")))
}

/// Target directions, intensities, κ and the source grid.
pub struct RfProblem {
    targets: TargetSpec,
    kappa: RefractionConstant,
    grid: SourceLattice,
}

/// Result of a solve or refinement.
pub struct RfReport {
    report: SolveReport,
    source_m: usize,
}

fn problem(targets: TargetSpec, kappa: f64, m: usize) -> Result<RfProblem, (RfStatus, String)> {
    let kappa = RefractionConstant::new(kappa).map_err(core)?;
    let grid = SourceLattice::new(m).map_err(core)?;
    let check = check_no_total_reflection(grid.grid().points(), targets.directions(), kappa);
    if !check.ok {
        return Err(core(Error::TotalReflectionRisk {
            min_dot: check.min_dot,
            kappa: kappa.value(),
        }));
    }
    Ok(RfProblem {
        targets,
        kappa,
        grid,
    })
}

/// Builds a problem from `n` directions (`3n` doubles, any nonzero length) and
/// optional intensities (`n` doubles, normalized to sum 1; null means equal).
/// The source grid is the `(2m+1)²` lattice.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_problem_new(
    directions: *const f64,
    intensities: *const f64,
    n: usize,
    kappa: f64,
    m: usize,
    out: *mut *mut RfProblem,
) -> RfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let raw = slice(directions, 3 * n, "directions")?;
        let dirs = raw
            .chunks_exact(3)
            .map(|c| UnitDirection::new(c[0], c[1], c[2]))
            .collect::<refractor_core::Result<Vec<_>>>()
            .map_err(core)?;
        let targets = if intensities.is_null() {
            TargetSpec::uniform(dirs)
        } else {
            TargetSpec::new(dirs, slice(intensities, n, "intensities")?.to_vec())
        }
        .map_err(core)?;
        *out = Box::into_raw(Box::new(problem(targets, kappa, m)?));
        Ok(())
    })
}

/// Equal intensities on the `(n+1)²` target lattice.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_problem_uniform_lattice(
    n: usize,
    kappa: f64,
    m: usize,
    out: *mut *mut RfProblem,
) -> RfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let targets = TargetLattice::new(n)
            .and_then(|l| l.uniform_targets())
            .map_err(core)?;
        *out = Box::into_raw(Box::new(problem(targets, kappa, m)?));
        Ok(())
    })
}

/// Number of target directions; 0 for null.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_problem_len(p: *const RfProblem) -> usize {
    p.as_ref().map_or(0, |p| p.targets.len())
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rf_problem_free(p: *mut RfProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Discrete measure of `b` (length `n`) into `out_g` (length `n`).
///
/// # Safety
/// Pointers must be valid for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn rf_measure(
    p: *const RfProblem,
    b: *const f64,
    n: usize,
    out_g: *mut f64,
) -> RfStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        if out_g.is_null() {
            return Err(null("out_g"));
        }
        let b = CoefficientVector::new(slice(b, n, "b")?.to_vec()).map_err(core)?;
        let g = measure(&b, &p.targets, p.grid.grid(), p.kappa).map_err(core)?;
        std::slice::from_raw_parts_mut(out_g, n).copy_from_slice(&g.values);
        Ok(())
    })
}

/// Coordinate descent to `max_i |G_i - f_i| <= epsilon` (over `i >= 2` when
/// `skip_first` is nonzero). `delta <= 0` picks the default window. The
/// source grid is doubled up to `max_m` when a window is skipped.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_solve(
    p: *const RfProblem,
    epsilon: f64,
    delta: f64,
    skip_first: c_int,
    max_m: usize,
    out: *mut *mut RfReport,
) -> RfStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let mut config = if skip_first != 0 {
            SolverConfig::skip_first(epsilon)
        } else {
            SolverConfig::full(epsilon, p.targets.len())
        };
        if delta > 0.0 {
            config.delta = delta;
        }
        let m = p.grid.m();
        let (report, grid) =
            solve_refining_grid(&p.targets, m, max_m.max(m), p.kappa, &config).map_err(core)?;
        *out = Box::into_raw(Box::new(RfReport {
            report,
            source_m: grid.m(),
        }));
        Ok(())
    })
}

/// Quasi-Newton refinement of `start` (length `n`) to `max_i |G_i - f_i| <=
/// tolerance` on the problem's grid. On [`RfStatus::NotConverged`] `*out`
/// still receives the best iterate.
///
/// # Safety
/// `p` must be a live handle, `start` valid for `n` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rf_refine(
    p: *const RfProblem,
    start: *const f64,
    n: usize,
    tolerance: f64,
    out: *mut *mut RfReport,
) -> RfStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let start = CoefficientVector::new(slice(start, n, "start")?.to_vec()).map_err(core)?;
        let source_m = p.grid.m();
        match quasi_newton_solve(
            &start,
            &p.targets,
            p.grid.grid(),
            p.kappa,
            &RefineConfig::new(tolerance),
        ) {
            Ok(report) => {
                *out = Box::into_raw(Box::new(RfReport { report, source_m }));
                Ok(())
            }
            Err(Error::NotConverged { report }) => {
                let msg = format!("NotConverged: max residual {}", report.err);
                *out = Box::into_raw(Box::new(RfReport {
                    report: *report,
                    source_m,
                }));
                Err((RfStatus::NotConverged, msg))
            }
            Err(e) => Err(core(e)),
        }
    })
}

/// Copies the coefficients into `out` (length `len`, which must equal N).
///
/// # Safety
/// `r` must be a live handle; `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rf_report_coefficients(
    r: *const RfReport,
    out: *mut f64,
    len: usize,
) -> RfStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("report"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let b = r.report.final_b.as_slice();
        if len != b.len() {
            return Err(core(Error::DimensionMismatch {
                expected: b.len(),
                got: len,
            }));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(b);
        Ok(())
    })
}

/// Certified deviation; NaN for null.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_report_err(r: *const RfReport) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.report.err)
}

/// 1 when the tolerance was certified, else 0.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_report_converged(r: *const RfReport) -> c_int {
    r.as_ref().map_or(0, |r| r.report.converged as c_int)
}

/// Component adjustments (descent) or iterations (refinement).
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_report_adjustments(r: *const RfReport) -> usize {
    r.as_ref().map_or(0, |r| r.report.component_adjustments)
}

/// Source lattice parameter the report was certified on.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_report_source_m(r: *const RfReport) -> usize {
    r.as_ref().map_or(0, |r| r.source_m)
}

/// # Safety
/// `r` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rf_report_free(r: *mut RfReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Writes the lens surface for `b` (length `n`) as `"obj"` or `"stl"`.
///
/// # Safety
/// `p` must be a live handle, `b` valid for `n` doubles, strings nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn rf_export_mesh(
    p: *const RfProblem,
    b: *const f64,
    n: usize,
    format: *const c_char,
    path: *const c_char,
) -> RfStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        let b = CoefficientVector::new(slice(b, n, "b")?.to_vec()).map_err(core)?;
        let format: MeshFormat = string(format, "format")?.parse().map_err(core)?;
        let path = Path::new(string(path, "path")?);
        export_mesh(&b, &p.targets, &p.grid, p.kappa, format, path).map_err(core)?;
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn rf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code; `"Unknown"` outside the enum. Takes the raw
/// integer so that out-of-range values from C are harmless.
#[no_mangle]
pub extern "C" fn rf_status_name(code: c_int) -> *const c_char {
    let name: &'static CStr = match code {
        0 => c"Ok",
        1 => c"NullPointer",
        2 => c"InvalidInput",
        3 => c"InvalidConfig",
        4 => c"NoFeasibleStep",
        5 => c"NotConverged",
        6 => c"SweepCapExceeded",
        7 => c"DegenerateStart",
        8 => c"Geometry",
        9 => c"Io",
        10 => c"Internal",
        11 => c"Panic",
        _ => c"Unknown",
    };
    name.as_ptr()
}

/// Library version, static.
#[no_mangle]
pub extern "C" fn rf_version() -> *const c_char {
    const V: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    V.as_ptr().cast()
}
