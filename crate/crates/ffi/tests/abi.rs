use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use refractor_ffi::*;

fn last_error() -> String {
    let p = rf_last_error_message();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const TRIAD: [f64; 9] = [0.0, 0.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0, 5.0];

fn triad_problem(m: usize) -> *mut RfProblem {
    let mut p = ptr::null_mut();
    let s = unsafe { rf_problem_new(TRIAD.as_ptr(), ptr::null(), 3, 0.5, m, &mut p) };
    assert_eq!(s, RfStatus::Ok);
    p
}

#[test]
fn solve_then_measure_round_trip() {
    let p = triad_problem(40);
    let mut r = ptr::null_mut();
    let s = unsafe { rf_solve(p, 1.0 / 30.0, 0.0, 0, 320, &mut r) };
    assert_eq!(s, RfStatus::Ok);
    unsafe {
        assert_eq!(rf_report_converged(r), 1);
        assert!(rf_report_err(r) <= 1.0 / 30.0);
        assert!(rf_report_source_m(r) >= 40);
        let mut b = [0.0; 3];
        assert_eq!(rf_report_coefficients(r, b.as_mut_ptr(), 3), RfStatus::Ok);
        assert_eq!(b[0], 1.0);
        if rf_report_source_m(r) == 40 {
            let mut g = [0.0; 3];
            assert_eq!(rf_measure(p, b.as_ptr(), 3, g.as_mut_ptr()), RfStatus::Ok);
            let err = g.iter().map(|g| (g - 1.0 / 3.0).abs()).fold(0.0, f64::max);
            assert_eq!(err, rf_report_err(r));
        }
        rf_report_free(r);
        rf_problem_free(p);
    }
}

#[test]
fn refine_reaches_a_tighter_tolerance() {
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { rf_problem_uniform_lattice(1, 0.5, 60, &mut p) },
        RfStatus::Ok
    );
    assert_eq!(unsafe { rf_problem_len(p) }, 4);
    let start = [1.0, 1.0, 1.0, 1.0];
    let mut r = ptr::null_mut();
    let s = unsafe { rf_refine(p, start.as_ptr(), 4, 0.01, &mut r) };
    assert_eq!(s, RfStatus::Ok, "{}", last_error());
    unsafe {
        assert!(rf_report_err(r) <= 0.01);
        rf_report_free(r);
        rf_problem_free(p);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let mut p = ptr::null_mut();
    // κ = 0.9 sends grid rays past the critical angle for these targets
    let s = unsafe { rf_problem_new(TRIAD.as_ptr(), ptr::null(), 3, 0.9, 10, &mut p) };
    assert_eq!(s, RfStatus::Geometry);
    assert!(p.is_null());
    assert!(last_error().starts_with("TotalReflectionRisk"));

    let s = unsafe { rf_problem_new(TRIAD.as_ptr(), ptr::null(), 3, 1.5, 10, &mut p) };
    assert_ne!(s, RfStatus::Ok);
    assert!(p.is_null());

    let s = unsafe { rf_problem_new(ptr::null(), ptr::null(), 3, 0.5, 10, &mut p) };
    assert_eq!(s, RfStatus::NullPointer);
    assert_eq!(last_error(), "directions is null");

    let p = triad_problem(10);
    let mut r = ptr::null_mut();
    // δ above min f / N
    let s = unsafe { rf_solve(p, 0.5, 0.2, 0, 10, &mut r) };
    assert_eq!(s, RfStatus::InvalidConfig);
    assert!(r.is_null());

    let b = [1.0, 2.0, 2.0];
    let s = unsafe { rf_refine(p, b.as_ptr(), 3, 0.01, &mut r) };
    assert_eq!(s, RfStatus::DegenerateStart);

    let fmt = CString::new("ply").unwrap();
    let path = CString::new("/tmp/never-written.ply").unwrap();
    let s = unsafe { rf_export_mesh(p, b.as_ptr(), 3, fmt.as_ptr(), path.as_ptr()) };
    assert_eq!(s, RfStatus::InvalidInput);
    assert!(last_error().contains("ply"));
    unsafe { rf_problem_free(p) };
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        rf_problem_free(ptr::null_mut());
        rf_report_free(ptr::null_mut());
        assert_eq!(rf_problem_len(ptr::null()), 0);
        assert!(rf_report_err(ptr::null()).is_nan());
        assert_eq!(rf_report_converged(ptr::null()), 0);
        let mut g = [0.0; 3];
        assert_eq!(
            rf_measure(ptr::null(), TRIAD.as_ptr(), 3, g.as_mut_ptr()),
            RfStatus::NullPointer
        );
    }
}

#[test]
fn status_names_and_version() {
    let name = |c| {
        unsafe { CStr::from_ptr(rf_status_name(c)) }
            .to_str()
            .unwrap()
    };
    assert_eq!(name(RfStatus::Ok as i32), "Ok");
    assert_eq!(name(RfStatus::Panic as i32), "Panic");
    assert_eq!(name(-1), "Unknown");
    let v = unsafe { CStr::from_ptr(rf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn mesh_written_through_the_abi() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lens.obj");
    let p = triad_problem(5);
    let b = [1.0, 1.1, 1.1];
    let fmt = CString::new("obj").unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { rf_export_mesh(p, b.as_ptr(), 3, fmt.as_ptr(), cpath.as_ptr()) },
        RfStatus::Ok
    );
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(
        text.lines().filter(|l| l.starts_with("v ")).count(),
        11 * 11
    );
    unsafe { rf_problem_free(p) };
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_is_generated_and_current() {
    let header =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/refractor.h"))
            .unwrap();
    for f in [
        "rf_problem_new",
        "rf_problem_uniform_lattice",
        "rf_solve",
        "rf_refine",
        "rf_measure",
        "rf_export_mesh",
        "rf_last_error_message",
        "typedef struct RfProblem RfProblem",
        "RF_STATUS_NO_FEASIBLE_STEP = 4",
    ] {
        assert!(header.contains(f), "header lacks {f}");
    }
}

#[test]
fn c_program_links_against_the_static_library() {
    let lib = target_dir().join("librefractor_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success(), "C compilation failed");
    let mesh = dir.path().join("triad.obj");
    let out = Command::new(&exe).arg(&mesh).output().unwrap();
    assert!(
        out.status.success(),
        "smoke exited with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
    assert!(std::fs::read_to_string(mesh).unwrap().starts_with("v "));
}
