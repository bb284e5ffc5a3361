//! C ABI for the slbgk kinetic solver.
//!
//! Every function returns an [`SlbgkStatus`]. On failure the message of the
//! last error on the calling thread is available through
//! [`slbgk_last_error_message`]. Simulations are opaque handles created by
//! [`slbgk_simulation_new`] and released with [`slbgk_simulation_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use slbgk::config::{ConfigFile, RunConfig};
use slbgk::dmaxwell::solve_discrete_maxwellian;
use slbgk::experiment::Simulation;
use slbgk::riemann::{sample_solution, EulerState};
use slbgk::{Error, Moments, VelocityGrid};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlbgkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    InvalidArgument = 3,
    SolverFailure = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Opaque simulation handle.
pub struct SlbgkSimulation {
    inner: Simulation,
}

/// One-dimensional Euler state.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlbgkEulerState {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(e: &Error) -> SlbgkStatus {
    match e {
        Error::Config { .. } => SlbgkStatus::InvalidConfig,
        Error::InvalidArgument(_)
        | Error::VelocityGridTooSmall(_)
        | Error::GridOrdering { .. }
        | Error::DimensionMismatch { .. }
        | Error::OutOfDomain { .. }
        | Error::Vacuum => SlbgkStatus::InvalidArgument,
        _ => SlbgkStatus::SolverFailure,
    }
}

fn fail(status: SlbgkStatus, message: impl Into<String>) -> SlbgkStatus {
    set_error(message.into());
    status
}

fn guard(body: impl FnOnce() -> Result<(), SlbgkStatus>) -> SlbgkStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SlbgkStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SlbgkStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn check(result: slbgk::Result<()>) -> Result<(), SlbgkStatus> {
    result.map_err(|e| {
        let mut msg = e.to_string();
        let mut source = std::error::Error::source(&e);
        while let Some(s) = source {
            msg.push_str(": ");
            msg.push_str(&s.to_string());
            source = s.source();
        }
        fail(status_of(&e), msg)
    })
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), SlbgkStatus> {
    if p.is_null() {
        Err(fail(SlbgkStatus::NullPointer, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string and returns the length needed including the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn slbgk_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Number of runs a configuration expands into (1 unless it names a preset
/// with several variants).
///
/// # Safety
/// `config_toml` must be a valid NUL-terminated string and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn slbgk_config_run_count(config_toml: *const c_char, out: *mut usize) -> SlbgkStatus {
    guard(|| {
        non_null(config_toml, "config_toml")?;
        non_null(out, "out")?;
        let runs = parse_runs(config_toml)?;
        *out = runs.len();
        Ok(())
    })
}

unsafe fn parse_runs(config_toml: *const c_char) -> Result<Vec<RunConfig>, SlbgkStatus> {
    let text = CStr::from_ptr(config_toml)
        .to_str()
        .map_err(|_| fail(SlbgkStatus::InvalidArgument, "configuration is not valid UTF-8"))?;
    let mut runs = Vec::new();
    check(
        ConfigFile::parse(text)
            .and_then(RunConfig::resolve)
            .and_then(|cfg| cfg.runs())
            .map(|r| runs = r),
    )?;
    Ok(runs)
}

/// Creates a simulation from TOML configuration text. `run` selects one of
/// the runs the configuration expands into.
///
/// # Safety
/// `config_toml` must be a valid NUL-terminated string and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn slbgk_simulation_new(
    config_toml: *const c_char,
    run: usize,
    out: *mut *mut SlbgkSimulation,
) -> SlbgkStatus {
    guard(|| {
        non_null(config_toml, "config_toml")?;
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let runs = parse_runs(config_toml)?;
        let cfg = runs.get(run).ok_or_else(|| {
            fail(
                SlbgkStatus::InvalidArgument,
                format!("run {run} out of range, configuration has {}", runs.len()),
            )
        })?;
        let mut sim = None;
        check(Simulation::new(cfg).map(|s| sim = Some(s)))?;
        let handle = Box::new(SlbgkSimulation {
            inner: sim.expect("set on success"),
        });
        *out = Box::into_raw(handle);
        Ok(())
    })
}

/// Releases a simulation. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle from [`slbgk_simulation_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slbgk_simulation_free(sim: *mut SlbgkSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

unsafe fn handle<'a>(sim: *mut SlbgkSimulation) -> Result<&'a mut SlbgkSimulation, SlbgkStatus> {
    non_null(sim, "sim")?;
    Ok(&mut *sim)
}

/// Advances by up to `steps` steps, stopping early at the final time.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn slbgk_simulation_step(sim: *mut SlbgkSimulation, steps: usize) -> SlbgkStatus {
    guard(|| {
        let sim = handle(sim)?;
        for _ in 0..steps {
            if sim.inner.is_finished() {
                break;
            }
            check(sim.inner.step().map(|_| ()))?;
        }
        Ok(())
    })
}

/// Advances to the final time.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn slbgk_simulation_run(sim: *mut SlbgkSimulation) -> SlbgkStatus {
    guard(|| check(handle(sim)?.inner.run()))
}

/// # Safety
/// `sim` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn slbgk_simulation_time(sim: *mut SlbgkSimulation, out: *mut f64) -> SlbgkStatus {
    guard(|| {
        let sim = handle(sim)?;
        non_null(out, "out")?;
        *out = sim.inner.time();
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn slbgk_simulation_is_finished(sim: *mut SlbgkSimulation, out: *mut bool) -> SlbgkStatus {
    guard(|| {
        let sim = handle(sim)?;
        non_null(out, "out")?;
        *out = sim.inner.is_finished();
        Ok(())
    })
}

/// Number of spatial grid points.
///
/// # Safety
/// `sim` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn slbgk_simulation_num_points(sim: *mut SlbgkSimulation, out: *mut usize) -> SlbgkStatus {
    guard(|| {
        let sim = handle(sim)?;
        non_null(out, "out")?;
        *out = sim.inner.solver().xgrid().len();
        Ok(())
    })
}

/// Copies the current profiles into caller buffers of length `len`. Any
/// buffer may be null to skip that field.
///
/// # Safety
/// `sim` must be a live handle; non-null buffers must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn slbgk_simulation_profiles(
    sim: *mut SlbgkSimulation,
    x: *mut f64,
    rho: *mut f64,
    ux: *mut f64,
    temperature: *mut f64,
    pressure: *mut f64,
    len: usize,
) -> SlbgkStatus {
    guard(|| {
        let sim = handle(sim)?;
        let profile = sim.inner.profile();
        let n = profile.len();
        if len < n {
            return Err(fail(
                SlbgkStatus::BufferTooSmall,
                format!("buffers hold {len} values, {n} needed"),
            ));
        }
        for (dst, src) in [
            (x, &profile.x),
            (rho, &profile.rho),
            (ux, &profile.ux),
            (temperature, &profile.temperature),
            (pressure, &profile.pressure),
        ] {
            if !dst.is_null() {
                ptr::copy_nonoverlapping(src.as_ptr(), dst, n);
            }
        }
        Ok(())
    })
}

/// Samples the exact Euler Riemann solution with diaphragm `x0` at time `t`
/// on `n` points.
///
/// # Safety
/// `xs` must be valid for `n` reads and `out` for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn slbgk_riemann_sample(
    left: SlbgkEulerState,
    right: SlbgkEulerState,
    gamma: f64,
    x0: f64,
    t: f64,
    xs: *const f64,
    n: usize,
    out: *mut SlbgkEulerState,
) -> SlbgkStatus {
    guard(|| {
        non_null(xs, "xs")?;
        non_null(out, "out")?;
        let xs = std::slice::from_raw_parts(xs, n);
        let l = EulerState::new(left.rho, left.u, left.p);
        let r = EulerState::new(right.rho, right.u, right.p);
        let mut states = Vec::new();
        check(sample_solution(&l, &r, gamma, x0, t, xs).map(|s| states = s))?;
        for (i, s) in states.iter().enumerate() {
            *out.add(i) = SlbgkEulerState {
                rho: s.rho,
                u: s.u,
                p: s.p,
            };
        }
        Ok(())
    })
}

/// Solves for the discrete Maxwellian whose grid moments equal
/// `moments = (rho, rho Ux, rho Uy, rho Uz, E)` on the velocity grid with
/// `n_v` intervals on `[-v_max, v_max]`. Writes the five exponent
/// parameters of `exp(a0 + a1 vx + a2 vy + a3 vz + a4 |v|^2)` to `alpha`.
///
/// # Safety
/// `moments` must be valid for 5 reads, `alpha` for 5 writes, `iterations`
/// null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn slbgk_discrete_maxwellian_solve(
    moments: *const f64,
    v_max: f64,
    n_v: usize,
    gas_constant: f64,
    alpha: *mut f64,
    iterations: *mut usize,
) -> SlbgkStatus {
    guard(|| {
        non_null(moments, "moments")?;
        non_null(alpha, "alpha")?;
        let mut m = [0.0; 5];
        ptr::copy_nonoverlapping(moments, m.as_mut_ptr(), 5);
        let target = Moments::from_array(m);
        let mut grid = None;
        check(VelocityGrid::new(v_max, n_v).map(|g| grid = Some(g)))?;
        let grid = grid.expect("set on success");
        let mut solution = None;
        check(solve_discrete_maxwellian(&target, &grid, None, gas_constant).map(|s| solution = Some(s)))?;
        let solution = solution.expect("set on success");
        ptr::copy_nonoverlapping(solution.params.alpha.as_ptr(), alpha, 5);
        if !iterations.is_null() {
            *iterations = solution.iterations;
        }
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn slbgk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
