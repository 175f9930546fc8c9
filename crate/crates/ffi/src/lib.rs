//! C ABI over `sps_core`.
//!
//! Objects cross the boundary as opaque handles (`SpsSolution`,
//! `SpsSweep`) created by the library and released with the matching
//! `*_free` function. Every fallible call returns an [`SpsStatus`]; the
//! message of the last failure on the calling thread is available from
//! [`sps_last_error`].
//!
//! Pointer arguments are checked for null; non-null pointers must be valid
//! for the access the function documents (handles from this library,
//! buffers of the stated length, nul-terminated strings).

#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sps_core::asymptotics::{eps_of_lambda, sweep, SweepOptions, SweepReport};
use sps_core::io::{solution_from_json, solution_to_json, sweep_to_csv, sweep_to_json};
use sps_core::solver::{verify, GridSpec};
use sps_core::{ground_state, ProblemParams, Solution, SolverConfig, SpsError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpsStatus {
    Ok = 0,
    InvalidArgument = 1,
    NotConverged = 2,
    VerificationFailed = 3,
    NullPointer = 4,
    Io = 5,
    Parse = 6,
    Panic = 7,
}

/// Grid and stopping rule for a solve.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpsSolveOptions {
    pub grid_n: usize,
    pub r_max: f64,
    pub stretch: f64,
    pub tol: f64,
    pub max_iters: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpsBreakdown {
    /// `int |grad u|^2`
    pub a: f64,
    /// `int u^2`
    pub b: f64,
    /// Coulomb self-interaction.
    pub c: f64,
    /// `int |u|^p`
    pub d: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpsResiduals {
    pub nehari: f64,
    pub pohozaev_identity: f64,
    pub pohozaev_manifold: f64,
    pub ode_sup: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpsSweepRow {
    pub eps: f64,
    /// NaN for the `eps = 0` row.
    pub lambda: f64,
    pub m_eps: f64,
    pub gap: f64,
    pub eps_times_b: f64,
    pub t_proj: f64,
    pub e_dist: f64,
    pub decay_rate: f64,
    pub energy_at_projection: f64,
    pub converged: bool,
}

/// A ground state. Opaque.
pub struct SpsSolution(Solution);

/// A finished eps sweep. Opaque.
pub struct SpsSweep(SweepReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &SpsError) -> SpsStatus {
    match err {
        SpsError::NotConverged { .. }
        | SpsError::Collapse
        | SpsError::ScfStagnation(_)
        | SpsError::TailUnderflow => SpsStatus::NotConverged,
        SpsError::Io(_) => SpsStatus::Io,
        SpsError::Parse { .. } => SpsStatus::Parse,
        _ => SpsStatus::InvalidArgument,
    }
}

fn fail(err: SpsError) -> SpsStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn guard(f: impl FnOnce() -> SpsStatus) -> SpsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            SpsStatus::Panic
        }
    }
}

fn null_arg(name: &str) -> SpsStatus {
    set_error(&format!("null pointer: {name}"));
    SpsStatus::NullPointer
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static, nul-terminated version string.
#[no_mangle]
pub extern "C" fn sps_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(
        concat!("sps-lab ", env!("CARGO_PKG_VERSION"), "\0").as_bytes(),
    ) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    V.as_ptr()
}

#[no_mangle]
pub extern "C" fn sps_solve_options_default() -> SpsSolveOptions {
    let d = SolverConfig::default();
    SpsSolveOptions {
        grid_n: d.grid.n,
        r_max: d.grid.r_max,
        stretch: d.grid.stretch,
        tol: d.tol_residual,
        max_iters: d.max_iters,
    }
}

fn config_of(opts: *const SpsSolveOptions) -> SolverConfig {
    let o = if opts.is_null() {
        sps_solve_options_default()
    } else {
        // SAFETY: non-null pointers must reference a valid options struct.
        unsafe { *opts }
    };
    SolverConfig {
        grid: GridSpec {
            n: o.grid_n,
            r_max: o.r_max,
            stretch: o.stretch,
        },
        tol_residual: o.tol,
        max_iters: o.max_iters,
        ..SolverConfig::default()
    }
}

fn solve_into(
    params: sps_core::Result<ProblemParams>,
    opts: *const SpsSolveOptions,
    out: *mut *mut SpsSolution,
) -> SpsStatus {
    if out.is_null() {
        return null_arg("out");
    }
    // SAFETY: checked non-null above.
    unsafe { *out = ptr::null_mut() };
    let params = match params {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let (sol, status) = match ground_state(&params, &config_of(opts)) {
        Ok(mut s) => {
            s.converged = true;
            (s, SpsStatus::Ok)
        }
        Err(SpsError::NotConverged { best, iters, ode_sup }) => {
            set_error(&format!(
                "not converged after {iters} iterations (ode residual {ode_sup:e})"
            ));
            (*best, SpsStatus::NotConverged)
        }
        Err(e) => return fail(e),
    };
    // SAFETY: checked non-null above.
    unsafe { *out = Box::into_raw(Box::new(SpsSolution(sol))) };
    status
}

/// Ground state for exponent `p` and mass `eps`. `opts` may be null for
/// defaults. On `NotConverged` the best iterate is still returned in `out`.
#[no_mangle]
pub extern "C" fn sps_solve(
    p: f64,
    eps: f64,
    opts: *const SpsSolveOptions,
    out: *mut *mut SpsSolution,
) -> SpsStatus {
    guard(|| solve_into(ProblemParams::new(p, eps), opts, out))
}

/// Ground state in the rescaled form for coupling `lambda > 0`.
#[no_mangle]
pub extern "C" fn sps_solve_lambda(
    p: f64,
    lambda: f64,
    opts: *const SpsSolveOptions,
    out: *mut *mut SpsSolution,
) -> SpsStatus {
    guard(|| solve_into(ProblemParams::from_lambda(p, lambda), opts, out))
}

/// Releases a solution; null is ignored.
#[no_mangle]
pub extern "C" fn sps_solution_free(sol: *mut SpsSolution) {
    if !sol.is_null() {
        // SAFETY: the handle came from Box::into_raw in this library.
        drop(unsafe { Box::from_raw(sol) });
    }
}

fn with_solution<T>(sol: *const SpsSolution, default: T, f: impl FnOnce(&Solution) -> T) -> T {
    if sol.is_null() {
        return default;
    }
    // SAFETY: non-null handles are live solutions owned by the caller.
    f(unsafe { &(*sol).0 })
}

/// Ground-state energy; NaN for a null handle.
#[no_mangle]
pub extern "C" fn sps_solution_energy(sol: *const SpsSolution) -> f64 {
    with_solution(sol, f64::NAN, |s| s.m)
}

#[no_mangle]
pub extern "C" fn sps_solution_eps(sol: *const SpsSolution) -> f64 {
    with_solution(sol, f64::NAN, |s| s.params.eps)
}

#[no_mangle]
pub extern "C" fn sps_solution_converged(sol: *const SpsSolution) -> bool {
    with_solution(sol, false, |s| s.converged)
}

#[no_mangle]
pub extern "C" fn sps_solution_iterations(sol: *const SpsSolution) -> usize {
    with_solution(sol, 0, |s| s.iters)
}

/// Number of grid nodes; 0 for a null handle.
#[no_mangle]
pub extern "C" fn sps_solution_len(sol: *const SpsSolution) -> usize {
    with_solution(sol, 0, |s| s.grid().n())
}

#[no_mangle]
pub extern "C" fn sps_solution_breakdown(
    sol: *const SpsSolution,
    out: *mut SpsBreakdown,
) -> SpsStatus {
    if sol.is_null() {
        return null_arg("sol");
    }
    if out.is_null() {
        return null_arg("out");
    }
    with_solution(sol, SpsStatus::NullPointer, |s| {
        let bd = s.coupled();
        // SAFETY: checked non-null above.
        unsafe {
            *out = SpsBreakdown {
                a: bd.a,
                b: bd.b,
                c: bd.c,
                d: bd.d,
            }
        };
        SpsStatus::Ok
    })
}

fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> SpsStatus {
    if buf.is_null() {
        return null_arg("buf");
    }
    if len < src.len() {
        set_error(&format!("buffer holds {len} values, need {}", src.len()));
        return SpsStatus::InvalidArgument;
    }
    // SAFETY: the caller guarantees `buf` holds `len >= src.len()` doubles.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len()) };
    SpsStatus::Ok
}

/// Copies the radial nodes into `buf` (capacity `len`).
#[no_mangle]
pub extern "C" fn sps_solution_nodes(
    sol: *const SpsSolution,
    buf: *mut f64,
    len: usize,
) -> SpsStatus {
    if sol.is_null() {
        return null_arg("sol");
    }
    with_solution(sol, SpsStatus::NullPointer, |s| copy_out(s.grid().nodes(), buf, len))
}

/// Copies the profile values `u(r_i)` into `buf` (capacity `len`).
#[no_mangle]
pub extern "C" fn sps_solution_values(
    sol: *const SpsSolution,
    buf: *mut f64,
    len: usize,
) -> SpsStatus {
    if sol.is_null() {
        return null_arg("sol");
    }
    with_solution(sol, SpsStatus::NullPointer, |s| copy_out(s.u.values(), buf, len))
}

/// Recomputes the residuals from the profile. Returns `VerificationFailed`
/// when any exceeds `tol` or the profile is zero; `out` may be null.
#[no_mangle]
pub extern "C" fn sps_verify(
    sol: *const SpsSolution,
    tol: f64,
    out: *mut SpsResiduals,
) -> SpsStatus {
    guard(|| {
        if sol.is_null() {
            return null_arg("sol");
        }
        with_solution(sol, SpsStatus::NullPointer, |s| {
            let r = verify(s, tol);
            if !out.is_null() {
                // SAFETY: checked non-null.
                unsafe {
                    *out = SpsResiduals {
                        nehari: r.nehari,
                        pohozaev_identity: r.pohozaev_identity,
                        pohozaev_manifold: r.pohozaev_manifold,
                        ode_sup: r.ode_sup,
                    }
                };
            }
            if r.pass {
                SpsStatus::Ok
            } else {
                set_error(if r.empty {
                    "identity violated: zero profile"
                } else {
                    "identity violated"
                });
                SpsStatus::VerificationFailed
            }
        })
    })
}

fn string_out(text: String, out: *mut *mut c_char) -> SpsStatus {
    if out.is_null() {
        return null_arg("out");
    }
    let c = CString::new(text).expect("json has no nul");
    // SAFETY: checked non-null.
    unsafe { *out = c.into_raw() };
    SpsStatus::Ok
}

/// Solution document as JSON; release with [`sps_string_free`].
#[no_mangle]
pub extern "C" fn sps_solution_to_json(
    sol: *const SpsSolution,
    out: *mut *mut c_char,
) -> SpsStatus {
    guard(|| {
        if sol.is_null() {
            return null_arg("sol");
        }
        with_solution(sol, SpsStatus::NullPointer, |s| {
            string_out(solution_to_json(s, None), out)
        })
    })
}

/// Parses a solution JSON document.
#[no_mangle]
pub extern "C" fn sps_solution_from_json(
    json: *const c_char,
    out: *mut *mut SpsSolution,
) -> SpsStatus {
    guard(|| {
        if json.is_null() {
            return null_arg("json");
        }
        if out.is_null() {
            return null_arg("out");
        }
        // SAFETY: checked non-null; the caller passes a nul-terminated string.
        let text = match unsafe { CStr::from_ptr(json) }.to_str() {
            Ok(t) => t,
            Err(e) => {
                set_error(&format!("json is not utf-8: {e}"));
                return SpsStatus::Parse;
            }
        };
        match solution_from_json(text) {
            Ok(s) => {
                // SAFETY: checked non-null.
                unsafe { *out = Box::into_raw(Box::new(SpsSolution(s))) };
                SpsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a string returned by this library; null is ignored.
#[no_mangle]
pub extern "C" fn sps_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: the string came from CString::into_raw in this library.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// `eps = lambda^((p-2)/(4(3-p)))`.
#[no_mangle]
pub extern "C" fn sps_eps_of_lambda(lambda: f64, p: f64, out: *mut f64) -> SpsStatus {
    if out.is_null() {
        return null_arg("out");
    }
    match eps_of_lambda(lambda, p) {
        Ok(e) => {
            // SAFETY: checked non-null.
            unsafe { *out = e };
            SpsStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Sweep over `eps[0..len]` (strictly decreasing, ending with 0) with
/// continuation. `NotConverged` still returns the partial sweep in `out`.
#[no_mangle]
pub extern "C" fn sps_sweep(
    p: f64,
    eps: *const f64,
    len: usize,
    opts: *const SpsSolveOptions,
    out: *mut *mut SpsSweep,
) -> SpsStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        // SAFETY: checked non-null.
        unsafe { *out = ptr::null_mut() };
        if eps.is_null() {
            return null_arg("eps");
        }
        // SAFETY: the caller guarantees `eps` holds `len` doubles.
        let list = unsafe { std::slice::from_raw_parts(eps, len) };
        match sweep(p, list, &config_of(opts), SweepOptions::default()) {
            Ok(report) => {
                let partial = report.partial;
                // SAFETY: checked non-null.
                unsafe { *out = Box::into_raw(Box::new(SpsSweep(report))) };
                if partial {
                    set_error("some sweep rows did not converge");
                    SpsStatus::NotConverged
                } else {
                    SpsStatus::Ok
                }
            }
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub extern "C" fn sps_sweep_free(sweep: *mut SpsSweep) {
    if !sweep.is_null() {
        // SAFETY: the handle came from Box::into_raw in this library.
        drop(unsafe { Box::from_raw(sweep) });
    }
}

fn with_sweep<T>(sweep: *const SpsSweep, default: T, f: impl FnOnce(&SweepReport) -> T) -> T {
    if sweep.is_null() {
        return default;
    }
    // SAFETY: non-null handles are live sweeps owned by the caller.
    f(unsafe { &(*sweep).0 })
}

#[no_mangle]
pub extern "C" fn sps_sweep_len(sweep: *const SpsSweep) -> usize {
    with_sweep(sweep, 0, |r| r.rows.len())
}

/// Energy of the `eps = 0` reference.
#[no_mangle]
pub extern "C" fn sps_sweep_m_inf(sweep: *const SpsSweep) -> f64 {
    with_sweep(sweep, f64::NAN, |r| r.m_inf)
}

/// Fitted `log gap / log eps` slope; NaN if it could not be fitted.
#[no_mangle]
pub extern "C" fn sps_sweep_slope(sweep: *const SpsSweep) -> f64 {
    with_sweep(sweep, f64::NAN, |r| r.slope.unwrap_or(f64::NAN))
}

/// Whether every sweep invariant holds.
#[no_mangle]
pub extern "C" fn sps_sweep_pass(sweep: *const SpsSweep) -> bool {
    with_sweep(sweep, false, |r| r.flags.all() && !r.partial)
}

#[no_mangle]
pub extern "C" fn sps_sweep_row(
    sweep: *const SpsSweep,
    index: usize,
    out: *mut SpsSweepRow,
) -> SpsStatus {
    if sweep.is_null() {
        return null_arg("sweep");
    }
    if out.is_null() {
        return null_arg("out");
    }
    with_sweep(sweep, SpsStatus::NullPointer, |r| match r.rows.get(index) {
        Some(row) => {
            // SAFETY: checked non-null.
            unsafe {
                *out = SpsSweepRow {
                    eps: row.eps,
                    lambda: row.lambda.unwrap_or(f64::NAN),
                    m_eps: row.m_eps,
                    gap: row.gap,
                    eps_times_b: row.eps_times_b,
                    t_proj: row.t_proj,
                    e_dist: row.e_dist,
                    decay_rate: row.decay_rate,
                    energy_at_projection: row.energy_at_projection,
                    converged: row.converged,
                }
            };
            SpsStatus::Ok
        }
        None => {
            set_error(&format!("row {index} out of range ({} rows)", r.rows.len()));
            SpsStatus::InvalidArgument
        }
    })
}

/// Sweep table as CSV; release with [`sps_string_free`].
#[no_mangle]
pub extern "C" fn sps_sweep_to_csv(sweep: *const SpsSweep, out: *mut *mut c_char) -> SpsStatus {
    guard(|| {
        if sweep.is_null() {
            return null_arg("sweep");
        }
        with_sweep(sweep, SpsStatus::NullPointer, |r| string_out(sweep_to_csv(r), out))
    })
}

/// Sweep summary as JSON; release with [`sps_string_free`].
#[no_mangle]
pub extern "C" fn sps_sweep_to_json(sweep: *const SpsSweep, out: *mut *mut c_char) -> SpsStatus {
    guard(|| {
        if sweep.is_null() {
            return null_arg("sweep");
        }
        with_sweep(sweep, SpsStatus::NullPointer, |r| string_out(sweep_to_json(r, None), out))
    })
}
