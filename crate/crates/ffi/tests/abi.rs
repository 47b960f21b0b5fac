use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use chns_ffi::*;

const UNIFORM: &str = "[grid]\nn = 6\n[stepper]\nhorizon = 1\n[scenario]\nkind = uniform\nphi = 0.2\nq = 0.6\n";

fn last_error() -> String {
    let p = chns_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn create(ini: &str) -> Result<*mut ChnsSimulation, (ChnsStatus, String)> {
    let text = CString::new(ini).unwrap();
    let mut sim = ptr::null_mut();
    match unsafe { chns_simulation_new(text.as_ptr(), &mut sim) } {
        ChnsStatus::Ok => Ok(sim),
        s => {
            assert!(sim.is_null());
            Err((s, last_error()))
        }
    }
}

fn field(sim: *const ChnsSimulation, f: ChnsField) -> Vec<f64> {
    let mut len = 0;
    assert_eq!(unsafe { chns_simulation_field_len(sim, f, &mut len) }, ChnsStatus::Ok);
    let mut buf = vec![f64::NAN; len as usize];
    assert_eq!(unsafe { chns_simulation_copy_field(sim, f, buf.as_mut_ptr(), len) }, ChnsStatus::Ok);
    buf
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(chns_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn uniform_state_advances_unchanged() {
    let sim = create(UNIFORM).unwrap();
    let mut taken = 0;
    assert_eq!(unsafe { chns_simulation_advance(sim, 3, &mut taken) }, ChnsStatus::Ok);
    assert_eq!(taken, 3);

    let (mut t, mut k, mut nx, mut ny) = (0.0, 0, 0, 0);
    assert_eq!(unsafe { chns_simulation_info(sim, &mut t, &mut k, &mut nx, &mut ny) }, ChnsStatus::Ok);
    assert_eq!((k, nx, ny), (3, 6, 6));
    assert!((t - 3e-3).abs() < 1e-15);

    assert!(field(sim, ChnsField::Phi).iter().all(|&p| p == 0.2));
    assert!(field(sim, ChnsField::Q).iter().all(|&q| q == 0.6));
    assert_eq!(field(sim, ChnsField::VelocityX).len(), 5 * 6);
    assert!(field(sim, ChnsField::VelocityY).iter().all(|&v| v == 0.0));

    let mut len = 0;
    assert_eq!(unsafe { chns_simulation_ledger_len(sim, &mut len) }, ChnsStatus::Ok);
    assert_eq!(len, 3);
    let mut rows = [ChnsLedgerRow::default(); 3];
    for (i, row) in rows.iter_mut().enumerate() {
        assert_eq!(unsafe { chns_simulation_ledger_row(sim, i as u64, row) }, ChnsStatus::Ok);
    }
    assert_eq!(rows.map(|r| r.step), [1, 2, 3]);
    assert!(rows.iter().all(|r| r.e_tot == rows[0].e_tot && r.slack == 0.0 && r.flagged == 0));
    let mut row = ChnsLedgerRow::default();
    assert_eq!(unsafe { chns_simulation_ledger_row(sim, 3, &mut row) }, ChnsStatus::Invalid);
    assert!(last_error().contains("out of range"));
    unsafe { chns_simulation_free(sim) };
}

#[test]
fn advance_stops_at_the_horizon() {
    let sim = create("[grid]\nn = 4\n[stepper]\nhorizon = 2e-3\n[scenario]\nkind = uniform\n").unwrap();
    let mut taken = 0;
    assert_eq!(unsafe { chns_simulation_advance(sim, 10, &mut taken) }, ChnsStatus::Ok);
    assert_eq!(taken, 2);
    assert_eq!(unsafe { chns_simulation_advance(sim, 10, &mut taken) }, ChnsStatus::Ok);
    assert_eq!(taken, 0);
    unsafe { chns_simulation_free(sim) };
}

#[test]
fn droplet_conserves_mass_through_the_abi() {
    let sim = create("[grid]\nn = 8\n[stepper]\nhorizon = 1\n[scenario]\nkind = droplet\n").unwrap();
    let mut before = ChnsObservables::default();
    let mut after = ChnsObservables::default();
    assert_eq!(unsafe { chns_simulation_observables(sim, &mut before) }, ChnsStatus::Ok);
    assert_eq!(unsafe { chns_simulation_advance(sim, 2, ptr::null_mut()) }, ChnsStatus::Ok);
    assert_eq!(unsafe { chns_simulation_observables(sim, &mut after) }, ChnsStatus::Ok);
    assert!((after.phi_mass - before.phi_mass).abs() <= 1e-12);
    assert!((after.surf_total - before.surf_total).abs() <= 1e-10);
    assert!(after.div_inf <= 1e-9);
    assert!(after.phi_min >= -1.1 && after.phi_max <= 1.1);
    unsafe { chns_simulation_free(sim) };
}

#[test]
fn config_errors_are_reported() {
    let (status, msg) = create("[grid]\nnn = 4\n").unwrap_err();
    assert_eq!(status, ChnsStatus::Invalid);
    assert!(msg.contains("grid.nn"), "{msg}");

    let (status, msg) = create("[params]\nq_min = 1\nq_max = 0\n").unwrap_err();
    assert_eq!(status, ChnsStatus::Invalid);
    assert!(msg.contains("q_interval"), "{msg}");

    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { chns_simulation_new(ptr::null(), &mut sim) }, ChnsStatus::NullPointer);
    let text = CString::new(UNIFORM).unwrap();
    assert_eq!(unsafe { chns_simulation_new(text.as_ptr(), ptr::null_mut()) }, ChnsStatus::NullPointer);
}

#[test]
fn null_handles_and_short_buffers_are_rejected() {
    let mut t = 0.0;
    assert_eq!(
        unsafe { chns_simulation_info(ptr::null(), &mut t, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) },
        ChnsStatus::NullPointer
    );
    assert_eq!(unsafe { chns_simulation_advance(ptr::null_mut(), 1, ptr::null_mut()) }, ChnsStatus::NullPointer);
    unsafe { chns_simulation_free(ptr::null_mut()) };

    let sim = create(UNIFORM).unwrap();
    let mut buf = [0.0; 4];
    assert_eq!(
        unsafe { chns_simulation_copy_field(sim, ChnsField::Phi, buf.as_mut_ptr(), 4) },
        ChnsStatus::BufferTooSmall
    );
    assert!(last_error().contains("36 required"));
    unsafe { chns_simulation_free(sim) };
}

#[test]
fn solver_failure_keeps_the_last_good_state() {
    let sim = create(
        "[grid]\nn = 8\n[stepper]\nsolver = picard\nnewton = false\nmax_picard = 1\nmax_halvings = 0\nflow = false\n[scenario]\nkind = droplet\n",
    )
    .unwrap();
    let phi0 = field(sim, ChnsField::Phi);
    let mut taken = 7;
    assert_eq!(unsafe { chns_simulation_advance(sim, 1, &mut taken) }, ChnsStatus::SolverFailed);
    assert_eq!(taken, 0);
    assert!(last_error().contains("step failed"));
    assert_eq!(field(sim, ChnsField::Phi), phi0);
    unsafe { chns_simulation_free(sim) };
}

#[test]
fn from_file_audit_and_selftest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.ini");
    std::fs::write(&path, UNIFORM).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { chns_simulation_from_file(cpath.as_ptr(), &mut sim) }, ChnsStatus::Ok);
    let mut failed = 99;
    assert_eq!(unsafe { chns_simulation_audit(sim, &mut failed) }, ChnsStatus::Ok);
    assert_eq!(failed, 0);
    unsafe { chns_simulation_free(sim) };

    let missing = CString::new(dir.path().join("missing.ini").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { chns_simulation_from_file(missing.as_ptr(), &mut sim) }, ChnsStatus::Io);

    let (mut passed, mut failed) = (0, 99);
    assert_eq!(unsafe { chns_selftest(&mut passed, &mut failed) }, ChnsStatus::Ok);
    assert!(passed > 50);
    assert_eq!(failed, 0);
}

#[test]
fn header_declares_the_abi_and_compiles_as_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(include.join("chns.h")).unwrap();
    for name in [
        "chns_version",
        "chns_last_error",
        "chns_simulation_new",
        "chns_simulation_from_file",
        "chns_simulation_free",
        "chns_simulation_advance",
        "chns_simulation_info",
        "chns_simulation_field_len",
        "chns_simulation_copy_field",
        "chns_simulation_ledger_len",
        "chns_simulation_ledger_row",
        "chns_simulation_observables",
        "chns_simulation_audit",
        "chns_selftest",
        "CHNS_STATUS_SOLVER_FAILED",
        "CHNS_FIELD_VELOCITY_X",
        "typedef struct ChnsSimulation ChnsSimulation",
    ] {
        assert!(header.contains(name), "chns.h lacks {name}");
    }

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "chns.h"

int main(void) {
    ChnsSimulation *sim = NULL;
    uint64_t taken = 0, len = 0;
    double phi[64];
    ChnsLedgerRow row;
    ChnsObservables obs;
    ChnsStatus s = chns_simulation_new("[grid]\nn = 8\n", &sim);
    if (s != CHNS_STATUS_OK) {
        fprintf(stderr, "%s\n", chns_last_error());
        return (int)s;
    }
    chns_simulation_advance(sim, 1, &taken);
    chns_simulation_field_len(sim, CHNS_FIELD_PHI, &len);
    chns_simulation_copy_field(sim, CHNS_FIELD_PHI, phi, len);
    chns_simulation_ledger_row(sim, 0, &row);
    chns_simulation_observables(sim, &obs);
    chns_simulation_free(sim);
    printf("%s %f %f\n", chns_version(), row.e_tot, obs.phi_mass);
    return 0;
}
"#,
    )
    .unwrap();
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Wextra", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
        .expect("a C compiler is available");
    assert!(status.success());
}
