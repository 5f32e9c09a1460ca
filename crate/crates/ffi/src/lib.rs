//! C ABI over `monolab`.
//!
//! Every function returns an [`MlStatus`]; on failure the message is
//! available from [`ml_last_error`] on the same thread. Handles are opaque
//! and owned by the caller: free states with [`ml_state_free`], reports with
//! [`ml_report_free`] and returned strings with [`ml_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use monolab::cli::canonical_json;
use monolab::diffcheck::{run_check, CheckConfig, CheckReport};
use monolab::loccsim::{resolve_monotone, run_campaign, CampaignConfig};
use monolab::monotones::{lookup, three_qubit_invariants};
use monolab::qcore::linalg::{c, CVector};
use monolab::qcore::named::named_state;
use monolab::qcore::{PureState, SystemShape};
use monolab::MonolabError;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    Panic = 5,
}

/// Opaque pure state.
pub struct MlState(PureState);

/// Opaque differential-check report.
pub struct MlReport(CheckReport);

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MlInvariants {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub i5: f64,
    pub tau_ab_c: f64,
    pub tau_ac_b: f64,
    pub tau_bc_a: f64,
    pub tau_abc: f64,
    pub phi: f64,
    pub sigma: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MlCounts {
    pub pass: u64,
    pub violation: u64,
    pub ill_conditioned: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &MonolabError) -> MlStatus {
    use MonolabError::*;
    match e {
        Io(_) => MlStatus::Io,
        InvalidShape(_)
        | SizeMismatch { .. }
        | InvalidIndex { .. }
        | Arity(_)
        | Config(_)
        | UnknownMonotone(_)
        | Parse(_)
        | NotNormalized(_)
        | NotPure(_)
        | NotHermitian(_)
        | NotPositive(_)
        | InvalidTrace(_)
        | Completeness(_)
        | Domain(_) => MlStatus::InvalidArgument,
        _ => MlStatus::Numerical,
    }
}

enum Failure {
    Null(&'static str),
    Model(MonolabError),
}

impl From<MonolabError> for Failure {
    fn from(e: MonolabError) -> Self {
        Failure::Model(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Model(e.into())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MlStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            MlStatus::NullPointer
        }
        Ok(Err(Failure::Model(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MlStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::Model(MonolabError::Parse(format!("{what}: {e}"))))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| Failure::Model(MonolabError::Parse(e.to_string())))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library on this thread.
#[no_mangle]
pub extern "C" fn ml_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ml_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a state from `n_amps` interleaved (re, im) pairs in row-major
/// order. The amplitudes must already be normalized.
///
/// # Safety
/// `dims` must point to `n_dims` values, `amps` to `2 * n_amps` values.
#[no_mangle]
pub unsafe extern "C" fn ml_state_new(
    dims: *const usize,
    n_dims: usize,
    amps: *const f64,
    n_amps: usize,
    out: *mut *mut MlState,
) -> MlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if dims.is_null() {
            return Err(Failure::Null("dims"));
        }
        if amps.is_null() {
            return Err(Failure::Null("amps"));
        }
        let dims = std::slice::from_raw_parts(dims, n_dims).to_vec();
        let raw = std::slice::from_raw_parts(amps, 2 * n_amps);
        let v = CVector::from_iterator(n_amps, raw.chunks_exact(2).map(|p| c(p[0], p[1])));
        let psi = PureState::new(SystemShape::new(dims)?, v)?;
        *out = Box::into_raw(Box::new(MlState(psi)));
        Ok(())
    })
}

/// Built-in state by name: product, bell, ghz, w.
///
/// # Safety
/// `name` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ml_state_named(name: *const c_char, out: *mut *mut MlState) -> MlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let psi = named_state(str_arg(name, "name")?)?;
        *out = Box::into_raw(Box::new(MlState(psi)));
        Ok(())
    })
}

/// # Safety
/// `state` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ml_state_free(state: *mut MlState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Total Hilbert-space dimension, 0 for NULL.
///
/// # Safety
/// `state` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ml_state_dim(state: *const MlState) -> usize {
    state.as_ref().map_or(0, |s| s.0.shape().total_dim())
}

/// Three-qubit invariants; fails for any other shape.
///
/// # Safety
/// `state` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ml_invariants(state: *const MlState, out: *mut MlInvariants) -> MlStatus {
    guard(|| {
        let s = ref_arg(state, "state")?;
        let out = out_arg(out, "out")?;
        let i = three_qubit_invariants(&s.0)?;
        *out = MlInvariants {
            i1: i.i1,
            i2: i.i2,
            i3: i.i3,
            i4: i.i4,
            i5: i.i5,
            tau_ab_c: i.tau_ab_c,
            tau_ac_b: i.tau_ac_b,
            tau_bc_a: i.tau_bc_a,
            tau_abc: i.tau_abc,
            phi: i.phi,
            sigma: i.sigma,
        };
        Ok(())
    })
}

/// Evaluates a catalog monotone on the state.
///
/// # Safety
/// `state` must be a live handle, `name` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ml_monotone_eval(state: *const MlState, name: *const c_char, out: *mut f64) -> MlStatus {
    guard(|| {
        let s = ref_arg(state, "state")?;
        let name = str_arg(name, "name")?;
        let out = out_arg(out, "out")?;
        let d = lookup(name)?;
        *out = d.evaluate(s.0.shape(), s.0.density().matrix())?;
        Ok(())
    })
}

/// Differential check of one monotone (`name` or `name@decreasing`) with
/// default tolerances.
///
/// # Safety
/// `monotone` must be NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ml_check_run(
    monotone: *const c_char,
    n_states: usize,
    n_directions: usize,
    seed: u64,
    out: *mut *mut MlReport,
) -> MlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let desc = resolve_monotone(str_arg(monotone, "monotone")?)?;
        let cfg = CheckConfig {
            n_states,
            n_directions,
            seed,
            ..CheckConfig::default()
        };
        let report = run_check(&desc, &cfg)?;
        *out = Box::into_raw(Box::new(MlReport(report)));
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ml_report_counts(report: *const MlReport, out: *mut MlCounts) -> MlStatus {
    guard(|| {
        let r = ref_arg(report, "report")?;
        let out = out_arg(out, "out")?;
        let c = &r.0.counts;
        *out = MlCounts {
            pass: c.pass as u64,
            violation: c.violation as u64,
            ill_conditioned: c.ill_conditioned as u64,
        };
        Ok(())
    })
}

/// Canonical JSON of the report; free with `ml_string_free`.
///
/// # Safety
/// `report` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ml_report_json(report: *const MlReport, out: *mut *mut c_char) -> MlStatus {
    guard(|| {
        let r = ref_arg(report, "report")?;
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        *out = into_c_string(canonical_json(&serde_json::to_value(&r.0)?)?)?;
        Ok(())
    })
}

/// # Safety
/// `report` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ml_report_free(report: *mut MlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Runs a campaign from a JSON config and returns the report as canonical
/// JSON; free with `ml_string_free`.
///
/// # Safety
/// `config_json` must be NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ml_campaign_run_json(config_json: *const c_char, out: *mut *mut c_char) -> MlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg: CampaignConfig = serde_json::from_str(str_arg(config_json, "config_json")?)?;
        let report = run_campaign(&cfg)?;
        *out = into_c_string(canonical_json(&serde_json::to_value(&report)?)?)?;
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ml_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
