//! C ABI for the `chns` solver.
//!
//! A simulation is an opaque [`ChnsSimulation`] handle created from INI text or
//! a config file and released with [`chns_simulation_free`]. Every fallible
//! function returns a [`ChnsStatus`]; on failure the message is available from
//! [`chns_last_error`] on the same thread until the next failing call.
//!
//! Field buffers are caller-allocated. Query the required length first (cells
//! for scalars, stored faces for the velocity components) and pass it back.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use chns::config::Config;
use chns::constitutive::{audit_assumptions, ConstitutiveSet, SamplingSpec};
use chns::energy::LedgerRow;
use chns::mesh::Grid;
use chns::state::{initialize_scenario, observables, State};
use chns::stepper::run;
use chns::ChnsError;

/// Result codes. The first four agree with the exit codes of the `chns` CLI.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChnsStatus {
    Ok = 0,
    /// Invalid config, parameter or argument.
    Invalid = 1,
    /// The nonlinear or linear solver failed; the simulation keeps its last good state.
    SolverFailed = 2,
    /// An audit or selftest check failed.
    CheckFailed = 3,
    NullPointer = 4,
    /// The caller's buffer is shorter than required.
    BufferTooSmall = 5,
    Io = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Which field [`chns_simulation_copy_field`] reads.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChnsField {
    Phi = 0,
    Mu = 1,
    Q = 2,
    Pressure = 3,
    /// x-components on the stored x-faces.
    VelocityX = 4,
    /// y-components on the stored y-faces.
    VelocityY = 5,
}

/// One row of the energy ledger.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ChnsLedgerRow {
    pub step: u64,
    pub t: f64,
    pub tau: f64,
    pub e_kin: f64,
    pub e_grad: f64,
    pub e_surf: f64,
    pub e_bulk: f64,
    pub e_tot: f64,
    pub visc: f64,
    pub q_diss: f64,
    pub mu_diss: f64,
    pub kin_jump: f64,
    pub grad_jump: f64,
    pub phi_jump: f64,
    pub biharm: f64,
    pub slack: f64,
    pub phi_mass: f64,
    pub surf_total: f64,
    pub div_inf: f64,
    pub picard_iters: u64,
    /// 1 when the slack is below the tolerance.
    pub flagged: i32,
}

impl From<&LedgerRow> for ChnsLedgerRow {
    fn from(r: &LedgerRow) -> Self {
        ChnsLedgerRow {
            step: r.step,
            t: r.t,
            tau: r.tau,
            e_kin: r.e_kin,
            e_grad: r.e_grad,
            e_surf: r.e_surf,
            e_bulk: r.e_bulk,
            e_tot: r.e_tot,
            visc: r.visc,
            q_diss: r.q_diss,
            mu_diss: r.mu_diss,
            kin_jump: r.kin_jump,
            grad_jump: r.grad_jump,
            phi_jump: r.phi_jump,
            biharm: r.biharm,
            slack: r.slack,
            phi_mass: r.phi_mass,
            surf_total: r.surf_total,
            div_inf: r.div_inf,
            picard_iters: r.picard_iters as u64,
            flagged: r.flagged() as i32,
        }
    }
}

/// Conserved quantities and diagnostics of the current state.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ChnsObservables {
    pub phi_mass: f64,
    pub surf_total: f64,
    pub kinetic: f64,
    pub div_inf: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub q_min: f64,
    pub q_max: f64,
}

/// Opaque simulation handle.
pub struct ChnsSimulation {
    config: Config,
    grid: Grid,
    set: ConstitutiveSet,
    state: State,
    ledger: Vec<LedgerRow>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &ChnsError) -> ChnsStatus {
    match e {
        ChnsError::LinearSolver(_) | ChnsError::StepFailed { .. } => ChnsStatus::SolverFailed,
        ChnsError::Io { .. } => ChnsStatus::Io,
        _ => ChnsStatus::Invalid,
    }
}

fn fail(e: ChnsError) -> ChnsStatus {
    let status = status_of(&e);
    set_error(e.to_string());
    status
}

/// Runs `f`, converting panics into [`ChnsStatus::Panic`].
fn guard(f: impl FnOnce() -> ChnsStatus) -> ChnsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            ChnsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, ChnsStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(ChnsStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        ChnsStatus::Invalid
    })
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! handle {
    ($p:expr) => {
        match $p.as_ref() {
            Some(h) => h,
            None => {
                set_error("simulation handle is null");
                return ChnsStatus::NullPointer;
            }
        }
    };
}

fn build(config: Config) -> Result<ChnsSimulation, ChnsError> {
    config.validate()?;
    let grid = config.build_grid()?;
    let set = config.constitutive_set()?;
    let state = initialize_scenario(&config.scenario, &grid, &set, &config.params)?;
    Ok(ChnsSimulation {
        config,
        grid,
        set,
        state,
        ledger: Vec::new(),
    })
}

unsafe fn publish(sim: Result<ChnsSimulation, ChnsError>, out: *mut *mut ChnsSimulation) -> ChnsStatus {
    match sim {
        Ok(sim) => {
            *out = Box::into_raw(Box::new(sim));
            ChnsStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// NUL-terminated version string of the library. Static; do not free.
#[no_mangle]
pub extern "C" fn chns_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failing call on this thread, or NULL. Valid until the
/// next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn chns_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates a simulation from INI text. Unknown keys are an error.
///
/// # Safety
/// `ini` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chns_simulation_new(ini: *const c_char, out: *mut *mut ChnsSimulation) -> ChnsStatus {
    guard(|| {
        if out.is_null() {
            set_error("output pointer is null");
            return ChnsStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let text = try_status!(str_arg(ini, "config text"));
        publish(Config::parse(text).and_then(build), out)
    })
}

/// Creates a simulation from a config file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chns_simulation_from_file(path: *const c_char, out: *mut *mut ChnsSimulation) -> ChnsStatus {
    guard(|| {
        if out.is_null() {
            set_error("output pointer is null");
            return ChnsStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let path = try_status!(str_arg(path, "config path"));
        publish(Config::load(Path::new(path)).and_then(build), out)
    })
}

/// Releases a simulation. NULL is ignored.
///
/// # Safety
/// `sim` must come from a constructor of this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn chns_simulation_free(sim: *mut ChnsSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances by up to `steps` time steps of the configured size, stopping early
/// at the configured horizon. `taken` (optional) receives the number of
/// accepted steps. On solver failure the accepted steps are kept.
///
/// # Safety
/// `sim` must be a live handle; `taken` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn chns_simulation_advance(sim: *mut ChnsSimulation, steps: u64, taken: *mut u64) -> ChnsStatus {
    guard(|| {
        let sim = match sim.as_mut() {
            Some(s) => s,
            None => {
                set_error("simulation handle is null");
                return ChnsStatus::NullPointer;
            }
        };
        if !taken.is_null() {
            *taken = 0;
        }
        let cfg = &sim.config;
        let tau = cfg.stepper.tau;
        let remaining = cfg.horizon - sim.state.t;
        let span = (steps as f64 * tau).min(remaining);
        if steps == 0 || span <= 1e-9 * tau {
            return ChnsStatus::Ok;
        }
        let result = run(&sim.state, &sim.grid, &sim.set, &cfg.params, &cfg.stepper, span, &mut |_, _, _| {});
        let (state, mut rows, error) = match result {
            Ok(o) => (o.state, o.ledger, None),
            Err(f) => (f.state, f.ledger, Some(f.error)),
        };
        for row in rows.iter_mut() {
            row.slack_tol = cfg.slack_tol * row.e_prev.max(1.0);
        }
        if !taken.is_null() {
            *taken = rows.len() as u64;
        }
        sim.state = state;
        sim.ledger.extend(rows);
        match error {
            Some(e) => fail(e),
            None => ChnsStatus::Ok,
        }
    })
}

/// Current time, step count and grid shape. Any output pointer may be NULL.
///
/// # Safety
/// `sim` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn chns_simulation_info(
    sim: *const ChnsSimulation,
    t: *mut f64,
    step: *mut u64,
    nx: *mut u64,
    ny: *mut u64,
) -> ChnsStatus {
    guard(|| {
        let sim = handle!(sim);
        if !t.is_null() {
            *t = sim.state.t;
        }
        if !step.is_null() {
            *step = sim.state.k;
        }
        if !nx.is_null() {
            *nx = sim.grid.nx() as u64;
        }
        if !ny.is_null() {
            *ny = sim.grid.ny() as u64;
        }
        ChnsStatus::Ok
    })
}

fn field_values(sim: &ChnsSimulation, field: ChnsField) -> &[f64] {
    let s = &sim.state;
    match field {
        ChnsField::Phi => s.phi.values(),
        ChnsField::Mu => s.mu.values(),
        ChnsField::Q => s.q.values(),
        ChnsField::Pressure => s.p.values(),
        ChnsField::VelocityX => s.v.x(),
        ChnsField::VelocityY => s.v.y(),
    }
}

/// Number of values of `field`.
///
/// # Safety
/// `sim` must be a live handle and `len` valid.
#[no_mangle]
pub unsafe extern "C" fn chns_simulation_field_len(sim: *const ChnsSimulation, field: ChnsField, len: *mut u64) -> ChnsStatus {
    guard(|| {
        let sim = handle!(sim);
        if len.is_null() {
            set_error("len is null");
            return ChnsStatus::NullPointer;
        }
        *len = field_values(sim, field).len() as u64;
        ChnsStatus::Ok
    })
}

/// Copies `field` into `buf` (row-major, x fastest).
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn chns_simulation_copy_field(
    sim: *const ChnsSimulation,
    field: ChnsField,
    buf: *mut f64,
    len: u64,
) -> ChnsStatus {
    guard(|| {
        let sim = handle!(sim);
        let values = field_values(sim, field);
        if buf.is_null() {
            set_error("buffer is null");
            return ChnsStatus::NullPointer;
        }
        if (len as usize) < values.len() {
            set_error(format!("buffer holds {len} values, {} required", values.len()));
            return ChnsStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
        ChnsStatus::Ok
    })
}

/// Number of ledger rows recorded so far.
///
/// # Safety
/// `sim` must be a live handle and `len` valid.
#[no_mangle]
pub unsafe extern "C" fn chns_simulation_ledger_len(sim: *const ChnsSimulation, len: *mut u64) -> ChnsStatus {
    guard(|| {
        let sim = handle!(sim);
        if len.is_null() {
            set_error("len is null");
            return ChnsStatus::NullPointer;
        }
        *len = sim.ledger.len() as u64;
        ChnsStatus::Ok
    })
}

/// Reads ledger row `index` (0-based).
///
/// # Safety
/// `sim` must be a live handle and `row` valid.
#[no_mangle]
pub unsafe extern "C" fn chns_simulation_ledger_row(
    sim: *const ChnsSimulation,
    index: u64,
    row: *mut ChnsLedgerRow,
) -> ChnsStatus {
    guard(|| {
        let sim = handle!(sim);
        if row.is_null() {
            set_error("row is null");
            return ChnsStatus::NullPointer;
        }
        match sim.ledger.get(index as usize) {
            Some(r) => {
                *row = r.into();
                ChnsStatus::Ok
            }
            None => {
                set_error(format!("ledger row {index} out of range ({} rows)", sim.ledger.len()));
                ChnsStatus::Invalid
            }
        }
    })
}

/// Observables of the current state.
///
/// # Safety
/// `sim` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn chns_simulation_observables(sim: *const ChnsSimulation, out: *mut ChnsObservables) -> ChnsStatus {
    guard(|| {
        let sim = handle!(sim);
        if out.is_null() {
            set_error("output is null");
            return ChnsStatus::NullPointer;
        }
        let o = observables(&sim.state, &sim.set, &sim.config.params);
        *out = ChnsObservables {
            phi_mass: o.phi_mass,
            surf_total: o.surf_total,
            kinetic: o.kinetic,
            div_inf: o.div_inf,
            phi_min: o.phi_range.0,
            phi_max: o.phi_range.1,
            q_min: o.q_range.0,
            q_max: o.q_range.1,
        };
        ChnsStatus::Ok
    })
}

/// Runs the constitutive assumption audit of the simulation's parameters.
/// Returns [`ChnsStatus::CheckFailed`] when any clause fails; `failed`
/// (optional) receives the number of failing clauses.
///
/// # Safety
/// `sim` must be a live handle; `failed` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn chns_simulation_audit(sim: *const ChnsSimulation, failed: *mut u64) -> ChnsStatus {
    guard(|| {
        let sim = handle!(sim);
        let params = &sim.config.params;
        let report = audit_assumptions(&sim.set, params, &SamplingSpec::for_params(params));
        let bad: Vec<&str> = report.failed().map(|c| c.id).collect();
        if !failed.is_null() {
            *failed = bad.len() as u64;
        }
        if bad.is_empty() {
            ChnsStatus::Ok
        } else {
            set_error(format!("failed clauses: {}", bad.join(", ")));
            ChnsStatus::CheckFailed
        }
    })
}

/// Runs the built-in selftest. `passed`/`failed` (optional) receive the counts.
///
/// # Safety
/// Non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn chns_selftest(passed: *mut u64, failed: *mut u64) -> ChnsStatus {
    guard(|| {
        let checks = chns::cli::selftest();
        let bad: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        if !passed.is_null() {
            *passed = (checks.len() - bad.len()) as u64;
        }
        if !failed.is_null() {
            *failed = bad.len() as u64;
        }
        if bad.is_empty() {
            ChnsStatus::Ok
        } else {
            set_error(format!("failed checks: {}", bad.join(", ")));
            ChnsStatus::CheckFailed
        }
    })
}
