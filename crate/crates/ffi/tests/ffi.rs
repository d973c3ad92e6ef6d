use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use surfwave::dtn::Depth;
use surfwave::scenario::{RunManifest, SimConfig};
use surfwave_ffi::*;

fn last_error() -> String {
    let mut needed = 0usize;
    unsafe { sw_last_error(ptr::null_mut(), 0, &mut needed) };
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(unsafe { sw_last_error(buf.as_mut_ptr(), buf.len(), &mut needed) }, SwStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned()
}

fn fetch(f: impl Fn(*mut c_char, usize, *mut usize) -> SwStatus) -> String {
    let mut needed = 0usize;
    assert_eq!(f(ptr::null_mut(), 0, &mut needed), SwStatus::BufferTooSmall);
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(f(buf.as_mut_ptr(), buf.len(), &mut needed), SwStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned()
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(sw_version()) }.to_str().unwrap();
    assert_eq!(v, surfwave::scenario::CODE_VERSION);
}

#[test]
fn dtn_apply_on_flat_surface() {
    let mut solver = ptr::null_mut();
    assert_eq!(unsafe { sw_dtn_solver_new(32, 32, 1.0, 0, &mut solver) }, SwStatus::Ok);
    let n = 32;
    let x: Vec<f64> = (0..n).map(|j| 2.0 * std::f64::consts::PI * j as f64 / n as f64).collect();
    let eta = vec![0.0; n];
    let psi: Vec<f64> = x.iter().map(|x| (3.0 * x).cos()).collect();
    let mut out = vec![0.0; n];
    assert_eq!(unsafe { sw_dtn_apply(solver, eta.as_ptr(), psi.as_ptr(), n, out.as_mut_ptr()) }, SwStatus::Ok);
    let sym = 3.0 * 3f64.tanh();
    for (o, p) in out.iter().zip(&psi) {
        assert!((o - sym * p).abs() < 1e-9);
    }
    assert_eq!(unsafe { sw_dtn_apply(solver, eta.as_ptr(), psi.as_ptr(), 16, out.as_mut_ptr()) }, SwStatus::InvalidArgument);
    assert!(last_error().contains("16"));
    assert_eq!(unsafe { sw_dtn_apply(solver, ptr::null(), psi.as_ptr(), n, out.as_mut_ptr()) }, SwStatus::NullPointer);
    unsafe { sw_dtn_solver_free(solver) };
}

#[test]
fn solver_rejects_bad_grid() {
    let mut solver = ptr::null_mut();
    assert_eq!(unsafe { sw_dtn_solver_new(7, 16, 1.0, 0, &mut solver) }, SwStatus::InvalidArgument);
    assert!(solver.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { sw_dtn_solver_new(16, 16, -1.0, 0, &mut solver) }, SwStatus::InvalidArgument);
    assert_eq!(unsafe { sw_dtn_solver_new(16, 16, f64::NAN, 1, &mut solver) }, SwStatus::Ok);
    unsafe { sw_dtn_solver_free(solver) };
    unsafe { sw_dtn_solver_free(ptr::null_mut()) };
}

#[test]
fn run_round_trip_through_json() {
    let mut c = SimConfig::linear_standing_benchmark(Depth::finite(1.0));
    c.t_end = 12.0 * c.output_stride;
    let json = CString::new(c.to_json()).unwrap();
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { sw_run_from_json(json.as_ptr(), &mut run) }, SwStatus::Ok, "{}", last_error());
    let mut passed = -1;
    assert_eq!(unsafe { sw_run_passed(run, &mut passed) }, SwStatus::Ok);
    assert_eq!(passed, 1);
    let mut len = 0;
    assert_eq!(unsafe { sw_run_len(run, &mut len) }, SwStatus::Ok);
    assert_eq!(len, 13);
    let manifest = fetch(|b, c, n| unsafe { sw_run_manifest_json(run, b, c, n) });
    let m = RunManifest::from_json(&manifest).unwrap();
    assert_eq!(m.config.unwrap(), c);
    let csv = fetch(|b, c, n| unsafe { sw_run_csv(run, b, c, n) });
    assert_eq!(csv.lines().count(), 14);
    unsafe { sw_run_free(run) };
}

#[test]
fn run_rejects_invalid_config_with_key() {
    let mut c = SimConfig::rayleigh_taylor(-1.0);
    c.filter = surfwave::scenario::FilterConfig::Off;
    let json = CString::new(c.to_json()).unwrap();
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { sw_run_from_json(json.as_ptr(), &mut run) }, SwStatus::InvalidConfig);
    assert!(run.is_null());
    assert!(last_error().contains("`filter`"), "{}", last_error());
    let bad = CString::new("{not json").unwrap();
    assert_eq!(unsafe { sw_run_from_json(bad.as_ptr(), &mut run) }, SwStatus::InvalidConfig);
    assert_eq!(unsafe { sw_run_from_json(ptr::null(), &mut run) }, SwStatus::NullPointer);
}

#[test]
fn success_clears_the_error() {
    let mut solver = ptr::null_mut();
    assert_ne!(unsafe { sw_dtn_solver_new(7, 16, 1.0, 0, &mut solver) }, SwStatus::Ok);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { sw_dtn_solver_new(16, 16, 1.0, 0, &mut solver) }, SwStatus::Ok);
    assert!(last_error().is_empty());
    unsafe { sw_dtn_solver_free(solver) };
}

#[test]
fn standing_wave_integrals() {
    let eps = [0.0, 0.1];
    let (mut k, mut p) = ([0.0; 2], [0.0; 2]);
    assert_eq!(unsafe { sw_standing_wave_integrals(eps.as_ptr(), 2, ptr::null(), k.as_mut_ptr(), p.as_mut_ptr()) }, SwStatus::Ok);
    let half = std::f64::consts::PI.powi(2) / 2.0;
    assert!((k[0] - half).abs() < 1e-12 && (p[0] - half).abs() < 1e-12);
    let exact = half + 3.0 * std::f64::consts::PI.powi(2) / 16.0 * 0.01;
    assert!((k[1] - exact).abs() < 20.0 * 1e-3);
    let bad = [0.5];
    assert_eq!(unsafe { sw_standing_wave_integrals(bad.as_ptr(), 1, ptr::null(), k.as_mut_ptr(), p.as_mut_ptr()) }, SwStatus::InvalidConfig);
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/surfwave.h")).unwrap();
    for f in [
        "sw_version",
        "sw_last_error",
        "sw_dtn_solver_new",
        "sw_dtn_solver_free",
        "sw_dtn_apply",
        "sw_run_from_json",
        "sw_run_free",
        "sw_run_passed",
        "sw_run_len",
        "sw_run_manifest_json",
        "sw_run_csv",
        "sw_standing_wave_integrals",
        "SW_STATUS_INVALID_CONFIG",
    ] {
        assert!(header.contains(f), "{f} missing from header");
    }
}

/// Compiles a C program against the generated header and static library.
#[test]
fn c_program_links_and_runs() {
    let manifest_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // `cargo test` only builds the rlib, so build the static library into a side target
    // directory; the outer build holds the lock on the main one.
    let exe = std::env::current_exe().unwrap();
    let target_dir = exe.ancestors().nth(3).unwrap().join("c-smoke");
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let built = std::process::Command::new(cargo)
        .args(["build", "--quiet", "-p", "surfwave-ffi", "--lib", "--target-dir"])
        .arg(&target_dir)
        .current_dir(&manifest_dir)
        .status()
        .expect("cargo available");
    assert!(built.success());
    let lib = target_dir.join("debug/libsurfwave_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <math.h>
#include <stdio.h>
#include "surfwave.h"

int main(void) {
    SwDtnSolver *s = NULL;
    if (sw_dtn_solver_new(16, 24, 0, 1, &s) != SW_STATUS_OK) return 1;
    double eta[16] = {0}, psi[16], out[16];
    for (int j = 0; j < 16; j++) psi[j] = cos(2.0 * 3.141592653589793 * j / 16.0);
    if (sw_dtn_apply(s, eta, psi, 16, out) != SW_STATUS_OK) return 2;
    for (int j = 0; j < 16; j++) if (fabs(out[j] - psi[j]) > 1e-6) return 3;
    sw_dtn_solver_free(s);
    SwRun *r = NULL;
    if (sw_run_from_json("{}", &r) != SW_STATUS_INVALID_CONFIG) return 4;
    char msg[512];
    size_t needed = 0;
    if (sw_last_error(msg, sizeof msg, &needed) != SW_STATUS_OK) return 5;
    printf("%s\n", msg);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = tmp.path().join("smoke");
    let status = std::process::Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest_dir.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).contains("missing field"));
}
