//! C ABI for `polyak-core`.
//!
//! Every entry point returns a [`PolyakStatus`]; on failure the message is kept
//! per thread and can be read with [`polyak_last_error`]. Objects cross the
//! boundary as opaque handles that the caller releases with the matching
//! `*_free` function. Array and string accessors copy into caller buffers: pass
//! a capacity, get the required length back in `needed`, and receive
//! `POLYAK_STATUS_BUFFER_TOO_SMALL` when it does not fit.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use polyak_core::config::ExperimentConfig;
use polyak_core::engine::{run_spec, RunStatus, Trajectory};
use polyak_core::experiment::{run_experiment, ExperimentOutcome};
use polyak_core::projections::{relaxed_projection_step, ConvexSet, SetSpec};
use polyak_core::stepsize;
use polyak_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyakStatus {
    Ok = 0,
    InvalidArgument = 1,
    DimensionMismatch = 2,
    ZeroGradient = 3,
    InsufficientMetadata = 4,
    Contract = 5,
    UnsupportedSet = 6,
    Config = 7,
    NumericalFailure = 8,
    MalformedTrajectory = 9,
    Io = 10,
    Json = 11,
    NullPointer = 12,
    BufferTooSmall = 13,
    Utf8 = 14,
    Panic = 15,
}

/// How a single run ended.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyakRunStatus {
    Completed = 0,
    Diverged = 1,
    ResampleExhausted = 2,
}

/// Validated experiment config.
pub struct PolyakExperiment {
    config: ExperimentConfig,
}

/// Result of running every seed of an experiment and its checks.
pub struct PolyakOutcome {
    outcome: ExperimentOutcome,
}

/// One recorded run.
pub struct PolyakTrajectory {
    traj: Trajectory,
}

/// Closed convex set with an exact projector.
pub struct PolyakSet {
    set: ConvexSet,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> PolyakStatus {
    match e {
        Error::InvalidArgument(_) => PolyakStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => PolyakStatus::DimensionMismatch,
        Error::ZeroGradient { .. } => PolyakStatus::ZeroGradient,
        Error::InsufficientMetadata(_) => PolyakStatus::InsufficientMetadata,
        Error::Contract(_) => PolyakStatus::Contract,
        Error::UnsupportedSet(_) => PolyakStatus::UnsupportedSet,
        Error::Config { .. } => PolyakStatus::Config,
        Error::NumericalFailure { .. } => PolyakStatus::NumericalFailure,
        Error::MalformedTrajectory { .. } => PolyakStatus::MalformedTrajectory,
        Error::Io { .. } => PolyakStatus::Io,
        Error::Json(_) => PolyakStatus::Json,
    }
}

struct Fail(PolyakStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

type FfiResult = std::result::Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> PolyakStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            PolyakStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside polyak-ffi".into());
            PolyakStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(PolyakStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|e| Fail(PolyakStatus::Utf8, format!("{what}: {e}")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> FfiResult {
    if out.is_null() {
        return Err(null(what));
    }
    unsafe { out.write(value) };
    Ok(())
}

unsafe fn give<T>(out: *mut *mut T, value: T) -> FfiResult {
    if out.is_null() {
        return Err(null("out"));
    }
    unsafe { out.write(Box::into_raw(Box::new(value))) };
    Ok(())
}

unsafe fn copy_f64(src: &[f64], out: *mut f64, cap: usize, needed: *mut usize) -> FfiResult {
    if !needed.is_null() {
        unsafe { needed.write(src.len()) };
    }
    if cap < src.len() {
        return Err(Fail(
            PolyakStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", src.len()),
        ));
    }
    if !src.is_empty() {
        if out.is_null() {
            return Err(null("out"));
        }
        unsafe { ptr::copy_nonoverlapping(src.as_ptr(), out, src.len()) };
    }
    Ok(())
}

/// Copies `s` plus a trailing NUL; `needed` includes the NUL.
unsafe fn copy_str(s: &str, out: *mut c_char, cap: usize, needed: *mut usize) -> FfiResult {
    let n = s.len() + 1;
    if !needed.is_null() {
        unsafe { needed.write(n) };
    }
    if cap < n {
        return Err(Fail(
            PolyakStatus::BufferTooSmall,
            format!("buffer holds {cap} bytes, {n} needed"),
        ));
    }
    if out.is_null() {
        return Err(null("out"));
    }
    unsafe {
        ptr::copy_nonoverlapping(s.as_ptr().cast::<c_char>(), out, s.len());
        out.add(s.len()).write(0);
    }
    Ok(())
}

/// Copies the message of the last failed call on this thread (empty after a
/// success). Always NUL-terminated when `cap > 0`, truncating if needed;
/// returns the untruncated length including the NUL.
///
/// # Safety
/// `out` must point to `cap` writable bytes or be null with `cap == 0`.
#[no_mangle]
pub unsafe extern "C" fn polyak_last_error(out: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if cap > 0 && !out.is_null() {
            let n = msg.len().min(cap - 1);
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), out, n);
                out.add(n).write(0);
            }
        }
        msg.len() + 1
    })
}

/// Static NUL-terminated crate version.
#[no_mangle]
pub extern "C" fn polyak_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates a TOML experiment config.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn polyak_experiment_from_toml(
    toml: *const c_char,
    out: *mut *mut PolyakExperiment,
) -> PolyakStatus {
    guard(|| {
        let text = unsafe { c_str(toml, "toml") }?;
        let config = ExperimentConfig::from_toml_str(text)?;
        config.validate()?;
        unsafe { give(out, PolyakExperiment { config }) }
    })
}

/// Overrides the base seed and the iteration budget (0 keeps the config value).
///
/// # Safety
/// `exp` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn polyak_experiment_override(
    exp: *mut PolyakExperiment,
    seed: u64,
    iterations: usize,
) -> PolyakStatus {
    guard(|| {
        let h = unsafe { exp.as_mut() }.ok_or_else(|| null("exp"))?;
        let mut c = h.config.clone().with_seed(seed);
        if iterations > 0 {
            c = c.with_iterations(iterations);
        }
        c.validate()?;
        h.config = c;
        Ok(())
    })
}

/// Runs all seeds and checks of the experiment.
///
/// # Safety
/// `exp` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn polyak_experiment_run(
    exp: *const PolyakExperiment,
    out: *mut *mut PolyakOutcome,
) -> PolyakStatus {
    guard(|| {
        let h = unsafe { deref(exp, "exp") }?;
        let outcome = run_experiment(&h.config)?;
        unsafe { give(out, PolyakOutcome { outcome }) }
    })
}

/// Runs the experiment's problem, rule and sampler once for `seed`, keeping
/// the whole trajectory.
///
/// # Safety
/// `exp` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn polyak_experiment_trajectory(
    exp: *const PolyakExperiment,
    seed: u64,
    out: *mut *mut PolyakTrajectory,
) -> PolyakStatus {
    guard(|| {
        let h = unsafe { deref(exp, "exp") }?;
        let c = &h.config;
        let problem = c.validate()?;
        let sampler = c.sampler.with_seed(seed);
        let traj = run_spec(
            &problem,
            &c.stepsize,
            &sampler,
            &c.x0,
            c.iterations,
            &c.policy,
        )?;
        unsafe { give(out, PolyakTrajectory { traj }) }
    })
}

/// # Safety
/// `exp` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polyak_experiment_free(exp: *mut PolyakExperiment) {
    if !exp.is_null() {
        drop(unsafe { Box::from_raw(exp) });
    }
}

/// Whether every check met its expectation.
///
/// # Safety
/// `outcome` must be a live handle; `ok` must be writable.
#[no_mangle]
pub unsafe extern "C" fn polyak_outcome_ok(
    outcome: *const PolyakOutcome,
    ok: *mut bool,
) -> PolyakStatus {
    guard(|| {
        let h = unsafe { deref(outcome, "outcome") }?;
        unsafe { put(ok, h.outcome.ok, "ok") }
    })
}

/// PASS/FAIL lines, one per check, newline separated.
///
/// # Safety
/// `outcome` must be a live handle; `out` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn polyak_outcome_lines(
    outcome: *const PolyakOutcome,
    out: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> PolyakStatus {
    guard(|| {
        let h = unsafe { deref(outcome, "outcome") }?;
        unsafe { copy_str(&h.outcome.lines().join("\n"), out, cap, needed) }
    })
}

/// JSON summary of the outcome.
///
/// # Safety
/// `outcome` must be a live handle; `out` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn polyak_outcome_json(
    outcome: *const PolyakOutcome,
    out: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> PolyakStatus {
    guard(|| {
        let h = unsafe { deref(outcome, "outcome") }?;
        let s = h.outcome.summary_json()?;
        unsafe { copy_str(&s, out, cap, needed) }
    })
}

/// # Safety
/// `outcome` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polyak_outcome_free(outcome: *mut PolyakOutcome) {
    if !outcome.is_null() {
        drop(unsafe { Box::from_raw(outcome) });
    }
}

/// Number of steps taken and iterate dimension.
///
/// # Safety
/// `traj` must be a live handle; `len` and `dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn polyak_trajectory_shape(
    traj: *const PolyakTrajectory,
    len: *mut usize,
    dim: *mut usize,
) -> PolyakStatus {
    guard(|| {
        let t = &unsafe { deref(traj, "traj") }?.traj;
        unsafe { put(len, t.len(), "len") }?;
        unsafe { put(dim, t.dim, "dim") }
    })
}

/// Final status and the iteration it refers to (the run length when completed).
///
/// # Safety
/// `traj` must be a live handle; `status` and `k` must be writable.
#[no_mangle]
pub unsafe extern "C" fn polyak_trajectory_status(
    traj: *const PolyakTrajectory,
    status: *mut PolyakRunStatus,
    k: *mut usize,
) -> PolyakStatus {
    guard(|| {
        let t = &unsafe { deref(traj, "traj") }?.traj;
        let (s, at) = match &t.status {
            RunStatus::Completed => (PolyakRunStatus::Completed, t.len()),
            RunStatus::Diverged { k } => (PolyakRunStatus::Diverged, *k),
            RunStatus::ResampleExhausted { k, .. } => (PolyakRunStatus::ResampleExhausted, *k),
        };
        unsafe { put(status, s, "status") }?;
        unsafe { put(k, at, "k") }
    })
}

/// Which per-step column [`polyak_trajectory_column`] copies.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyakColumn {
    /// `len + 1` iterates, row-major with `dim` values each.
    Iterates = 0,
    Gammas = 1,
    Fvals = 2,
    Gradsqs = 3,
    Lowers = 4,
    AvgFvals = 5,
    /// `len + 1` values of ‖x_k‖.
    Xnorms = 6,
}

/// # Safety
/// `traj` must be a live handle; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn polyak_trajectory_column(
    traj: *const PolyakTrajectory,
    column: PolyakColumn,
    out: *mut f64,
    cap: usize,
    needed: *mut usize,
) -> PolyakStatus {
    guard(|| {
        let t = &unsafe { deref(traj, "traj") }?.traj;
        let norms;
        let src: &[f64] = match column {
            PolyakColumn::Iterates => &t.iterates,
            PolyakColumn::Gammas => &t.gammas,
            PolyakColumn::Fvals => &t.fvals,
            PolyakColumn::Gradsqs => &t.gradsqs,
            PolyakColumn::Lowers => &t.lowers,
            PolyakColumn::AvgFvals => &t.avg_fvals,
            PolyakColumn::Xnorms => {
                norms = t.xnorms().collect::<Vec<f64>>();
                &norms
            }
        };
        unsafe { copy_f64(src, out, cap, needed) }
    })
}

/// Trajectory as CSV text (every step, iterate columns when `iterates`).
///
/// # Safety
/// `traj` must be a live handle; `out` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn polyak_trajectory_csv(
    traj: *const PolyakTrajectory,
    iterates: bool,
    out: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> PolyakStatus {
    guard(|| {
        let t = &unsafe { deref(traj, "traj") }?.traj;
        unsafe { copy_str(&t.to_csv(iterates, 1), out, cap, needed) }
    })
}

/// # Safety
/// `traj` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polyak_trajectory_free(traj: *mut PolyakTrajectory) {
    if !traj.is_null() {
        drop(unsafe { Box::from_raw(traj) });
    }
}

/// Builds a set from its JSON description, e.g.
/// `{"kind":"ball","center":[0,0],"radius":1}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn polyak_set_from_json(
    json: *const c_char,
    out: *mut *mut PolyakSet,
) -> PolyakStatus {
    guard(|| {
        let text = unsafe { c_str(json, "json") }?;
        let spec: SetSpec = serde_json::from_str(text).map_err(Error::from)?;
        let set = ConvexSet::from_spec(&spec)?;
        unsafe { give(out, PolyakSet { set }) }
    })
}

/// # Safety
/// `set` must be a live handle; `dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn polyak_set_dim(set: *const PolyakSet, dim: *mut usize) -> PolyakStatus {
    guard(|| {
        let h = unsafe { deref(set, "set") }?;
        unsafe { put(dim, h.set.dim(), "dim") }
    })
}

/// Euclidean projection of `x` (length `n`) into `out` (length `n`).
///
/// # Safety
/// `set` must be a live handle; `x` and `out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn polyak_set_project(
    set: *const PolyakSet,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> PolyakStatus {
    guard(|| {
        let h = unsafe { deref(set, "set") }?;
        let p = h.set.project(unsafe { slice(x, n, "x") }?)?;
        unsafe { copy_f64(&p, out, n, ptr::null_mut()) }
    })
}

/// `(1 - t) x + t P(x)` with `t = λ_k min{1/2, γ_{-1}/λ_0}`.
///
/// # Safety
/// `set` must be a live handle; `x` and `out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn polyak_set_relaxed_step(
    set: *const PolyakSet,
    x: *const f64,
    n: usize,
    lambda_k: f64,
    lambda_0: f64,
    gamma_init: f64,
    out: *mut f64,
) -> PolyakStatus {
    guard(|| {
        let h = unsafe { deref(set, "set") }?;
        let x = unsafe { slice(x, n, "x") }?;
        let y = relaxed_projection_step(&h.set, x, lambda_k, lambda_0, gamma_init)?;
        unsafe { copy_f64(&y, out, n, ptr::null_mut()) }
    })
}

/// # Safety
/// `set` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polyak_set_free(set: *mut PolyakSet) {
    if !set.is_null() {
        drop(unsafe { Box::from_raw(set) });
    }
}

/// `λ min{(f - ℓ)/‖g‖², γ_{-1}/λ}`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn polyak_sps(
    fval: f64,
    lower: f64,
    gradsq: f64,
    lambda: f64,
    gamma_init: f64,
    out: *mut f64,
) -> PolyakStatus {
    guard(|| {
        let g = stepsize::sps(fval, lower, gradsq, lambda, gamma_init)?;
        unsafe { put(out, g, "out") }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn last_error() -> String {
        let mut buf = vec![0 as c_char; 512];
        unsafe { polyak_last_error(buf.as_mut_ptr(), buf.len()) };
        unsafe { CStr::from_ptr(buf.as_ptr()) }
            .to_string_lossy()
            .into_owned()
    }

    #[test]
    fn ball_projection_and_relaxed_step() {
        let spec = CString::new(r#"{"kind":"ball","center":[0.0,0.0],"radius":1.0}"#).unwrap();
        let mut set = ptr::null_mut();
        assert_eq!(
            unsafe { polyak_set_from_json(spec.as_ptr(), &mut set) },
            PolyakStatus::Ok
        );
        let mut out = [0.0; 2];
        let x = [3.0, 4.0];
        assert_eq!(
            unsafe { polyak_set_project(set, x.as_ptr(), 2, out.as_mut_ptr()) },
            PolyakStatus::Ok
        );
        assert!((out[0] - 0.6).abs() < 1e-15 && (out[1] - 0.8).abs() < 1e-15);
        // t = 1 * min(1/2, 2/1) = 1/2
        let st =
            unsafe { polyak_set_relaxed_step(set, x.as_ptr(), 2, 1.0, 1.0, 2.0, out.as_mut_ptr()) };
        assert_eq!(st, PolyakStatus::Ok);
        assert!((out[0] - 1.8).abs() < 1e-15 && (out[1] - 2.4).abs() < 1e-15);
        let st = unsafe { polyak_set_project(set, x.as_ptr(), 3, out.as_mut_ptr()) };
        assert_eq!(st, PolyakStatus::DimensionMismatch);
        unsafe { polyak_set_free(set) };
    }

    #[test]
    fn errors_are_reported() {
        let mut set = ptr::null_mut();
        let bad = CString::new("{not json").unwrap();
        assert_eq!(
            unsafe { polyak_set_from_json(bad.as_ptr(), &mut set) },
            PolyakStatus::Json
        );
        assert!(!last_error().is_empty());
        assert!(set.is_null());
        assert_eq!(
            unsafe { polyak_set_from_json(ptr::null(), &mut set) },
            PolyakStatus::NullPointer
        );
        let mut g = 0.0;
        assert_eq!(
            unsafe { polyak_sps(1.0, 0.0, 0.0, 1.0, 1.0, &mut g) },
            PolyakStatus::ZeroGradient
        );
        assert_eq!(
            unsafe { polyak_sps(2.0, 0.0, 4.0, 1.0, 1.0, &mut g) },
            PolyakStatus::Ok
        );
        assert_eq!(g, 0.5);
        assert!(last_error().is_empty());
    }

    const TOML: &str = r#"
name = "ffi-smoke"
runs = 2
x0 = [3.0]
iterations = 50

[problem]
library = "two-quadratics"

[stepsize]
rule = "constant"
gamma = 0.4

[sampler]
kind = "uniform"
seed = 7

[[verify]]
check = "condition-31"
"#;

    #[test]
    fn experiment_roundtrip() {
        let text = CString::new(TOML).unwrap();
        let mut exp = ptr::null_mut();
        assert_eq!(
            unsafe { polyak_experiment_from_toml(text.as_ptr(), &mut exp) },
            PolyakStatus::Ok
        );

        let mut outcome = ptr::null_mut();
        assert_eq!(
            unsafe { polyak_experiment_run(exp, &mut outcome) },
            PolyakStatus::Ok
        );
        let mut ok = false;
        assert_eq!(
            unsafe { polyak_outcome_ok(outcome, &mut ok) },
            PolyakStatus::Ok
        );
        assert!(ok);
        let mut needed = 0;
        let st = unsafe { polyak_outcome_lines(outcome, ptr::null_mut(), 0, &mut needed) };
        assert_eq!(st, PolyakStatus::BufferTooSmall);
        let mut buf = vec![0 as c_char; needed];
        let st = unsafe { polyak_outcome_lines(outcome, buf.as_mut_ptr(), needed, &mut needed) };
        assert_eq!(st, PolyakStatus::Ok);
        let lines = unsafe { CStr::from_ptr(buf.as_ptr()) }
            .to_str()
            .unwrap()
            .to_owned();
        assert!(lines.starts_with("ffi-smoke: PASS condition-31"), "{lines}");
        unsafe { polyak_outcome_free(outcome) };

        let mut traj = ptr::null_mut();
        assert_eq!(
            unsafe { polyak_experiment_trajectory(exp, 7, &mut traj) },
            PolyakStatus::Ok
        );
        let (mut len, mut dim) = (0, 0);
        unsafe { polyak_trajectory_shape(traj, &mut len, &mut dim) };
        assert_eq!((len, dim), (50, 1));
        let mut xs = vec![0.0; (len + 1) * dim];
        let st = unsafe {
            polyak_trajectory_column(
                traj,
                PolyakColumn::Iterates,
                xs.as_mut_ptr(),
                xs.len(),
                &mut needed,
            )
        };
        assert_eq!(st, PolyakStatus::Ok);
        assert_eq!(xs[0], 3.0);
        let mut gammas = vec![0.0; len];
        unsafe {
            polyak_trajectory_column(
                traj,
                PolyakColumn::Gammas,
                gammas.as_mut_ptr(),
                len,
                &mut needed,
            )
        };
        assert!(gammas.iter().all(|&g| g == 0.4));
        let mut status = PolyakRunStatus::Diverged;
        let mut k = 0;
        unsafe { polyak_trajectory_status(traj, &mut status, &mut k) };
        assert_eq!((status, k), (PolyakRunStatus::Completed, 50));
        unsafe { polyak_trajectory_free(traj) };

        assert_eq!(
            unsafe { polyak_experiment_override(exp, 1, 10) },
            PolyakStatus::Ok
        );
        unsafe { polyak_experiment_free(exp) };
    }

    #[test]
    fn config_errors_map_to_config_status() {
        let text = CString::new(TOML.replace("iterations = 50", "iterations = 0")).unwrap();
        let mut exp = ptr::null_mut();
        let st = unsafe { polyak_experiment_from_toml(text.as_ptr(), &mut exp) };
        assert_eq!(st, PolyakStatus::Config);
        assert!(last_error().contains("iterations"));
    }
}
