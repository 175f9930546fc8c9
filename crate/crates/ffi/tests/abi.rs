use std::ffi::{CStr, CString};
use std::ptr;

use sps_ffi::*;

fn small() -> SpsSolveOptions {
    SpsSolveOptions {
        grid_n: 2048,
        r_max: 30.0,
        ..sps_solve_options_default()
    }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(sps_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn solve_read_verify_free() {
    let opts = small();
    let mut sol = ptr::null_mut();
    assert_eq!(sps_solve(4.0, 1.0, &opts, &mut sol), SpsStatus::Ok);
    assert!(!sol.is_null());
    assert!(sps_solution_converged(sol));
    assert!((sps_solution_energy(sol) - 25.61687).abs() < 1e-3);
    assert_eq!(sps_solution_eps(sol), 1.0);

    let n = sps_solution_len(sol);
    assert_eq!(n, 2048);
    let mut r = vec![0.0; n];
    let mut u = vec![0.0; n];
    assert_eq!(sps_solution_nodes(sol, r.as_mut_ptr(), n), SpsStatus::Ok);
    assert_eq!(sps_solution_values(sol, u.as_mut_ptr(), n), SpsStatus::Ok);
    assert_eq!(r[0], 0.0);
    assert!((r[n - 1] - 30.0).abs() < 1e-12);
    assert!(u[0] > 0.0 && u.windows(2).take(n - 2).all(|w| w[1] < w[0]));

    let mut bd = SpsBreakdown::default();
    assert_eq!(sps_solution_breakdown(sol, &mut bd), SpsStatus::Ok);
    // Nehari: A + eps B + C = D at a solution
    assert!(((bd.a + bd.b + bd.c) - bd.d).abs() / bd.d < 1e-7);

    let mut res = SpsResiduals::default();
    assert_eq!(sps_verify(sol, 1e-6, &mut res), SpsStatus::Ok);
    assert!(res.nehari.abs() < 1e-6 && res.ode_sup < 1e-6);
    sps_solution_free(sol);
}

#[test]
fn json_round_trip_through_the_abi() {
    let opts = small();
    let mut sol = ptr::null_mut();
    assert_eq!(sps_solve_lambda(4.0, 4.0, &opts, &mut sol), SpsStatus::Ok);
    assert!((sps_solution_eps(sol) - 0.5).abs() < 1e-15);
    let mut json = ptr::null_mut();
    assert_eq!(sps_solution_to_json(sol, &mut json), SpsStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(sps_solution_from_json(json, &mut back), SpsStatus::Ok);
    assert_eq!(sps_solution_energy(back), sps_solution_energy(sol));
    sps_string_free(json);
    sps_solution_free(back);
    sps_solution_free(sol);

    let bad = CString::new("{\"version\": 1").unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(sps_solution_from_json(bad.as_ptr(), &mut none), SpsStatus::Parse);
    assert!(last_error().contains("line 1"));
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut sol = ptr::null_mut();
    assert_eq!(
        sps_solve(2.5, 1.0, ptr::null(), &mut sol),
        SpsStatus::InvalidArgument
    );
    assert!(sol.is_null());
    assert_eq!(last_error(), "p outside (3,6): p = 2.5");

    assert_eq!(
        sps_solve(4.0, 1.0, ptr::null(), ptr::null_mut()),
        SpsStatus::NullPointer
    );
    let mut e = 0.0;
    assert_eq!(sps_eps_of_lambda(0.0, 4.0, &mut e), SpsStatus::InvalidArgument);
    assert_eq!(sps_eps_of_lambda(4.0, 4.0, &mut e), SpsStatus::Ok);
    assert!((e - 0.5).abs() < 1e-15);

    // null handles are inert
    assert!(sps_solution_energy(ptr::null()).is_nan());
    assert_eq!(sps_solution_len(ptr::null()), 0);
    sps_solution_free(ptr::null_mut());
    sps_sweep_free(ptr::null_mut());
    sps_string_free(ptr::null_mut());
    assert!(unsafe { CStr::from_ptr(sps_version()) }
        .to_str()
        .unwrap()
        .starts_with("sps-lab "));
}

#[test]
fn short_buffer_is_rejected() {
    let opts = SpsSolveOptions {
        grid_n: 512,
        r_max: 25.0,
        ..sps_solve_options_default()
    };
    let mut sol = ptr::null_mut();
    sps_solve(4.0, 1.0, &opts, &mut sol);
    let mut buf = vec![0.0; 10];
    assert_eq!(
        sps_solution_values(sol, buf.as_mut_ptr(), 10),
        SpsStatus::InvalidArgument
    );
    sps_solution_free(sol);
}

#[test]
fn iteration_cap_returns_best_iterate() {
    let opts = SpsSolveOptions {
        max_iters: 2,
        ..small()
    };
    let mut sol = ptr::null_mut();
    assert_eq!(sps_solve(4.0, 1.0, &opts, &mut sol), SpsStatus::NotConverged);
    assert!(!sol.is_null());
    assert!(!sps_solution_converged(sol));
    assert_eq!(sps_verify(sol, 1e-8, ptr::null_mut()), SpsStatus::VerificationFailed);
    assert!(last_error().starts_with("identity violated"));
    sps_solution_free(sol);
}

#[test]
fn sweep_through_the_abi() {
    let opts = small();
    let eps = [1.0, 0.1, 0.01, 0.0];
    let mut sw = ptr::null_mut();
    assert_eq!(
        sps_sweep(4.0, eps.as_ptr(), eps.len(), &opts, &mut sw),
        SpsStatus::Ok
    );
    assert_eq!(sps_sweep_len(sw), 4);
    let m_inf = sps_sweep_m_inf(sw);
    assert!((m_inf - 17.473).abs() < 1e-2);
    let mut row = SpsSweepRow::default();
    assert_eq!(sps_sweep_row(sw, 0, &mut row), SpsStatus::Ok);
    assert_eq!(row.eps, 1.0);
    assert!(row.gap > 0.0 && row.t_proj < 1.0);
    assert_eq!(sps_sweep_row(sw, 3, &mut row), SpsStatus::Ok);
    assert!(row.lambda.is_nan());
    assert_eq!(sps_sweep_row(sw, 4, &mut row), SpsStatus::InvalidArgument);

    let mut csv = ptr::null_mut();
    assert_eq!(sps_sweep_to_csv(sw, &mut csv), SpsStatus::Ok);
    let text = unsafe { CStr::from_ptr(csv) }.to_str().unwrap().to_owned();
    assert!(text.starts_with("eps,lambda,m_eps,gap,eps_times_B,t_proj,e_dist,decay_rate\n"));
    assert_eq!(text.lines().count(), 5);
    sps_string_free(csv);
    sps_sweep_free(sw);

    let bad = [1.0, 0.5];
    let mut none = ptr::null_mut();
    assert_eq!(
        sps_sweep(4.0, bad.as_ptr(), 2, &opts, &mut none),
        SpsStatus::InvalidArgument
    );
    assert!(none.is_null());
}

#[test]
fn header_declares_every_entry_point() {
    let header = include_str!("../include/sps_lab.h");
    for name in [
        "sps_solve(",
        "sps_solve_lambda(",
        "sps_solution_free(",
        "sps_solution_values(",
        "sps_verify(",
        "sps_sweep(",
        "sps_sweep_row(",
        "sps_last_error(",
        "typedef struct SpsSolution SpsSolution;",
        "SPS_STATUS_NOT_CONVERGED = 2",
    ] {
        assert!(header.contains(name), "{name}");
    }
}

/// Compiles and runs a C program against the header and the static
/// library when a C compiler is on the path.
#[test]
fn c_program_links_against_the_header() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let crate_dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let target = crate_dir.join("../../target");
    let lib = ["release", "debug"]
        .iter()
        .map(|p| target.join(p).join("libsps_ffi.a"))
        .filter(|p| p.exists())
        .max_by_key(|p| p.metadata().and_then(|m| m.modified()).ok());
    let Some(lib) = lib else {
        eprintln!("static library not built; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "sps_lab.h"
int main(void) {
    SpsSolveOptions o = sps_solve_options_default();
    o.grid_n = 2048; o.r_max = 30.0;
    SpsSolution *s = NULL;
    if (sps_solve(4.0, 1.0, &o, &s) != SPS_STATUS_OK) { puts(sps_last_error()); return 1; }
    if (sps_verify(s, 1e-6, NULL) != SPS_STATUS_OK) return 2;
    printf("%.6f\n", sps_solution_energy(s));
    sps_solution_free(s);
    if (sps_solve(7.0, 1.0, &o, &s) != SPS_STATUS_INVALID_ARGUMENT) return 3;
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let status = std::process::Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = std::process::Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{:?}", out);
    let m: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((m - 25.6169).abs() < 1e-2);
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if std::process::Command::new(cc)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
        {
            return Ok(cc);
        }
    }
    Err(())
}
