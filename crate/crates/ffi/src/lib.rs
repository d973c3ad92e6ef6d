//! C interface to the surfwave solver and scenario runner.
//!
//! Every function returns an [`SwStatus`]; on failure the message is available from
//! [`sw_last_error`] on the same thread. Handles are opaque and must be released with
//! their matching `_free` function. Strings are copied into caller buffers: pass a
//! buffer of `capacity` bytes and read the required size (including the terminating
//! NUL) from `needed`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use surfwave::dtn::{Depth, DtnSolver};
use surfwave::scenario::{self, RunOutcome, ScenarioError, SimConfig};
use surfwave::spectral::{PeriodicGrid, SurfaceField};
use surfwave::standing_waves::Quadrature;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Numerical = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Operator `ψ ↦ G(η)ψ` on a fixed grid and depth.
pub struct SwDtnSolver {
    solver: DtnSolver,
}

/// A completed simulation with its manifest and time series.
pub struct SwRun {
    outcome: RunOutcome,
    manifest_json: String,
    csv: String,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: SwStatus, msg: impl Into<String>) -> SwStatus {
    set_error(msg);
    status
}

fn scenario_status(e: &ScenarioError) -> SwStatus {
    match e {
        ScenarioError::Config { .. } => SwStatus::InvalidConfig,
        ScenarioError::Io { .. } => SwStatus::Io,
        _ => SwStatus::Numerical,
    }
}

fn guarded(f: impl FnOnce() -> SwStatus) -> SwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == SwStatus::Ok {
                set_error("");
            }
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SwStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

/// Copies `s` plus a NUL into `buf` when it fits; always reports the size needed.
unsafe fn copy_out(s: &str, buf: *mut c_char, capacity: usize, needed: *mut usize) -> SwStatus {
    let n = s.len() + 1;
    if !needed.is_null() {
        *needed = n;
    }
    if buf.is_null() || capacity < n {
        return fail(SwStatus::BufferTooSmall, format!("need {n} bytes, have {capacity}"));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf as *mut u8, s.len());
    *buf.add(s.len()) = 0;
    SwStatus::Ok
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, SwStatus> {
    if p.is_null() {
        return Err(fail(SwStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(SwStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the last error message of this thread into `buf`.
///
/// # Safety
/// `buf` must point to `capacity` writable bytes or be null; `needed` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn sw_last_error(buf: *mut c_char, capacity: usize, needed: *mut usize) -> SwStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    let n = msg.len() + 1;
    if !needed.is_null() {
        *needed = n;
    }
    if buf.is_null() || capacity < n {
        return SwStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, msg.len());
    *buf.add(msg.len()) = 0;
    SwStatus::Ok
}

/// Builds a solver on `n_x` points with `n_z` vertical intervals. `infinite != 0`
/// selects infinite depth and ignores `depth`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn sw_dtn_solver_new(n_x: usize, n_z: usize, depth: f64, infinite: i32, out: *mut *mut SwDtnSolver) -> SwStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SwStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let grid = match PeriodicGrid::new(n_x) {
            Ok(g) => g,
            Err(e) => return fail(SwStatus::InvalidArgument, e.to_string()),
        };
        let d = if infinite != 0 { Depth::infinite() } else { Depth::finite(depth) };
        match DtnSolver::new(&grid, d, n_z) {
            Ok(solver) => {
                *out = Box::into_raw(Box::new(SwDtnSolver { solver }));
                SwStatus::Ok
            }
            Err(e) => fail(SwStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Releases a solver; null is ignored.
///
/// # Safety
/// `solver` must come from [`sw_dtn_solver_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sw_dtn_solver_free(solver: *mut SwDtnSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Evaluates `G(η)ψ` at the grid nodes `x_j = 2πj/n`.
///
/// # Safety
/// `eta`, `psi` and `out` must each point to `n` doubles, `n` equal to the solver's `n_x`.
#[no_mangle]
pub unsafe extern "C" fn sw_dtn_apply(solver: *const SwDtnSolver, eta: *const f64, psi: *const f64, n: usize, out: *mut f64) -> SwStatus {
    guarded(|| {
        if solver.is_null() || eta.is_null() || psi.is_null() || out.is_null() {
            return fail(SwStatus::NullPointer, "null argument to sw_dtn_apply");
        }
        let s = &(*solver).solver;
        let grid = s.grid();
        if n != grid.len() {
            return fail(SwStatus::InvalidArgument, format!("length {n} does not match grid size {}", grid.len()));
        }
        let field = |p: *const f64| SurfaceField::from_values(grid, std::slice::from_raw_parts(p, n).to_vec());
        let (e, p) = match (field(eta), field(psi)) {
            (Ok(e), Ok(p)) => (e, p),
            (Err(err), _) | (_, Err(err)) => return fail(SwStatus::InvalidArgument, err.to_string()),
        };
        match s.dtn_apply(&e, &p) {
            Ok(g) => {
                std::slice::from_raw_parts_mut(out, n).copy_from_slice(g.values());
                SwStatus::Ok
            }
            Err(err) => fail(SwStatus::Numerical, err.to_string()),
        }
    })
}

/// Validates and runs a JSON configuration.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn sw_run_from_json(config_json: *const c_char, out: *mut *mut SwRun) -> SwStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SwStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let text = match read_str(config_json, "config_json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let result = SimConfig::from_json(text).and_then(|c| scenario::run(&c));
        match result {
            Ok(outcome) => {
                let manifest_json = outcome.manifest.to_json();
                let csv = outcome.csv();
                *out = Box::into_raw(Box::new(SwRun { outcome, manifest_json, csv }));
                SwStatus::Ok
            }
            Err(e) => fail(scenario_status(&e), e.to_string()),
        }
    })
}

/// Releases a run; null is ignored.
///
/// # Safety
/// `run` must come from [`sw_run_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sw_run_free(run: *mut SwRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Writes 1 to `passed` when every asserted invariant held, else 0.
///
/// # Safety
/// `run` and `passed` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_run_passed(run: *const SwRun, passed: *mut i32) -> SwStatus {
    if run.is_null() || passed.is_null() {
        return fail(SwStatus::NullPointer, "null argument to sw_run_passed");
    }
    *passed = i32::from((*run).outcome.manifest.passed());
    SwStatus::Ok
}

/// Number of recorded states.
///
/// # Safety
/// `run` and `len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_run_len(run: *const SwRun, len: *mut usize) -> SwStatus {
    if run.is_null() || len.is_null() {
        return fail(SwStatus::NullPointer, "null argument to sw_run_len");
    }
    *len = (*run).outcome.trajectory.len();
    SwStatus::Ok
}

/// Copies the JSON manifest.
///
/// # Safety
/// See [`sw_last_error`] for the buffer contract; `run` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_run_manifest_json(run: *const SwRun, buf: *mut c_char, capacity: usize, needed: *mut usize) -> SwStatus {
    if run.is_null() {
        return fail(SwStatus::NullPointer, "run is null");
    }
    copy_out(&(*run).manifest_json, buf, capacity, needed)
}

/// Copies the time-series CSV.
///
/// # Safety
/// See [`sw_last_error`] for the buffer contract; `run` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_run_csv(run: *const SwRun, buf: *mut c_char, capacity: usize, needed: *mut usize) -> SwStatus {
    if run.is_null() {
        return fail(SwStatus::NullPointer, "run is null");
    }
    copy_out(&(*run).csv, buf, capacity, needed)
}

/// Writes the standing-wave period integrals for `eps[0..n]` into `kinetic` and
/// `potential`; `coefficients` holds a13, a33, b13, b33 or is null for zeros.
///
/// # Safety
/// `eps`, `kinetic` and `potential` must point to `n` doubles; `coefficients` to 4 or null.
#[no_mangle]
pub unsafe extern "C" fn sw_standing_wave_integrals(
    eps: *const f64,
    n: usize,
    coefficients: *const f64,
    kinetic: *mut f64,
    potential: *mut f64,
) -> SwStatus {
    guarded(|| {
        if eps.is_null() || kinetic.is_null() || potential.is_null() {
            return fail(SwStatus::NullPointer, "null argument to sw_standing_wave_integrals");
        }
        if n == 0 {
            return fail(SwStatus::InvalidArgument, "need at least one amplitude");
        }
        let c = if coefficients.is_null() {
            [0.0; 4]
        } else {
            let s = std::slice::from_raw_parts(coefficients, 4);
            [s[0], s[1], s[2], s[3]]
        };
        let list = std::slice::from_raw_parts(eps, n);
        match scenario::report_standing_wave(list, c, &Quadrature::default()) {
            Ok(m) => {
                let rows = &m.standing_wave.as_ref().expect("report carries its table").rows;
                let (k, p) = (std::slice::from_raw_parts_mut(kinetic, n), std::slice::from_raw_parts_mut(potential, n));
                for (i, r) in rows.iter().enumerate() {
                    k[i] = r.kinetic;
                    p[i] = r.potential;
                }
                SwStatus::Ok
            }
            Err(e) => fail(scenario_status(&e), e.to_string()),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn copy_out_reports_size_and_terminates() {
        let mut needed = 0;
        let mut small = [1 as c_char; 3];
        let s = unsafe { copy_out("abc", small.as_mut_ptr(), small.len(), &mut needed) };
        assert_eq!((s, needed), (SwStatus::BufferTooSmall, 4));
        let mut buf = [1 as c_char; 8];
        let s = unsafe { copy_out("abc", buf.as_mut_ptr(), buf.len(), &mut needed) };
        assert_eq!(s, SwStatus::Ok);
        assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(), "abc");
    }

    #[test]
    fn panics_become_status_codes() {
        let s = guarded(|| panic!("boom"));
        assert_eq!(s, SwStatus::Panic);
        assert!(LAST_ERROR.with(|e| e.borrow().contains("boom")));
    }
}
