//! C ABI over the measure runner.
//!
//! Configurations and results are opaque handles owned by the caller and
//! released with the matching `_free` function. Every fallible call returns an
//! [`NmkStatus`]; the message of the last failure on the calling thread is
//! available from [`nmk_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, c_double, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nmk::damping::{self, DampingParams};
use nmk::dephasing::{self, DephasingParams};
use nmk::numerics::QuadConfig;
use nmk::runner::{self, ResultRecord, RunConfig};
use nmk::Error;

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NmkStatus {
    Ok = 0,
    /// File or serialisation failure.
    Io = 1,
    /// Invalid configuration, state or search.
    Invalid = 2,
    /// Numerical non-convergence.
    Numerics = 3,
    NullPointer = 4,
    /// A string argument was not valid UTF-8.
    Utf8 = 5,
    /// Internal panic caught at the boundary.
    Panic = 6,
}

/// Opaque run configuration.
pub struct NmkConfig {
    inner: RunConfig,
}

/// Opaque result of one measure run.
pub struct NmkResult {
    inner: ResultRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> NmkStatus {
    match e.exit_code() {
        2 => NmkStatus::Invalid,
        3 => NmkStatus::Numerics,
        _ => NmkStatus::Io,
    }
}

struct Failure(NmkStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> std::result::Result<(), Failure>) -> NmkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            NmkStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NmkStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> std::result::Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(NmkStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(NmkStatus::Utf8, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> std::result::Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(NmkStatus::NullPointer, format!("{name} is null")))
}

fn out_check<T>(out: *mut T, name: &str) -> std::result::Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(NmkStatus::NullPointer, format!("{name} is null")));
    }
    Ok(())
}

fn to_c_string(s: String) -> std::result::Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|_| Failure(NmkStatus::Io, "string contains a NUL byte".into()))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn nmk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn nmk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nmk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// New configuration with default settings.
#[no_mangle]
pub extern "C" fn nmk_config_new() -> *mut NmkConfig {
    Box::into_raw(Box::new(NmkConfig { inner: RunConfig::default() }))
}

/// Parses a key/value configuration text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nmk_config_from_str(text: *const c_char, out: *mut *mut NmkConfig) -> NmkStatus {
    guard(|| {
        out_check(out, "out")?;
        let cfg = RunConfig::from_ini_str(str_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(NmkConfig { inner: cfg }));
        Ok(())
    })
}

/// Reads a key/value configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nmk_config_from_file(path: *const c_char, out: *mut *mut NmkConfig) -> NmkStatus {
    guard(|| {
        out_check(out, "out")?;
        let cfg = RunConfig::from_file(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(NmkConfig { inner: cfg }));
        Ok(())
    })
}

/// Sets one `section.key` entry, as in a configuration file.
///
/// # Safety
/// `cfg` must be a live handle and the strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn nmk_config_set(
    cfg: *mut NmkConfig,
    section: *const c_char,
    key: *const c_char,
    value: *const c_char,
) -> NmkStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| Failure(NmkStatus::NullPointer, "cfg is null".into()))?;
        let (section, key, value) = (str_arg(section, "section")?, str_arg(key, "key")?, str_arg(value, "value")?);
        let mut next = cfg.inner.clone();
        next.set(section, key, value)?;
        cfg.inner = next;
        Ok(())
    })
}

/// Validates the configuration.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nmk_config_validate(cfg: *const NmkConfig) -> NmkStatus {
    guard(|| Ok(ref_arg(cfg, "cfg")?.inner.validate()?))
}

/// Canonical hash of the configuration as a new string.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nmk_config_hash(cfg: *const NmkConfig, out: *mut *mut c_char) -> NmkStatus {
    guard(|| {
        out_check(out, "out")?;
        *out = to_c_string(ref_arg(cfg, "cfg")?.inner.hash())?;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn nmk_config_free(cfg: *mut NmkConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the configured measure.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nmk_run_measure(cfg: *const NmkConfig, out: *mut *mut NmkResult) -> NmkStatus {
    guard(|| {
        out_check(out, "out")?;
        let rec = runner::run_measure(&ref_arg(cfg, "cfg")?.inner)?;
        *out = Box::into_raw(Box::new(NmkResult { inner: rec }));
        Ok(())
    })
}

/// Runs one reference table and writes its rows as a JSON array.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nmk_run_table_json(cfg: *const NmkConfig, which: u8, timing: bool, out: *mut *mut c_char) -> NmkStatus {
    guard(|| {
        out_check(out, "out")?;
        let mut rows = runner::run_table(&ref_arg(cfg, "cfg")?.inner, which)?;
        if !timing {
            rows = rows.into_iter().map(ResultRecord::without_timing).collect();
        }
        *out = to_c_string(serde_json::to_string(&rows).map_err(Error::from)?)?;
        Ok(())
    })
}

/// Measure value, or NaN for a null handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nmk_result_value(res: *const NmkResult) -> c_double {
    res.as_ref().map_or(f64::NAN, |r| r.inner.value)
}

/// Horizon the value was taken on, or NaN for a null handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nmk_result_horizon(res: *const NmkResult) -> c_double {
    res.as_ref().map_or(f64::NAN, |r| r.inner.horizon)
}

/// Whether horizon doubling settled; false for a null handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nmk_result_converged(res: *const NmkResult) -> bool {
    res.as_ref().is_some_and(|r| r.inner.converged)
}

/// The full record as JSON. With `timing` false the wall time is zeroed.
///
/// # Safety
/// `res` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nmk_result_to_json(res: *const NmkResult, timing: bool, out: *mut *mut c_char) -> NmkStatus {
    guard(|| {
        out_check(out, "out")?;
        let mut rec = ref_arg(res, "res")?.inner.clone();
        if !timing {
            rec = rec.without_timing();
        }
        *out = to_c_string(serde_json::to_string(&rec).map_err(Error::from)?)?;
        Ok(())
    })
}

/// Label of the optimal input as a new string.
///
/// # Safety
/// `res` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nmk_result_argmax_label(res: *const NmkResult, out: *mut *mut c_char) -> NmkStatus {
    guard(|| {
        out_check(out, "out")?;
        *out = to_c_string(ref_arg(res, "res")?.inner.argmax_state.label.clone())?;
        Ok(())
    })
}

/// # Safety
/// `res` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn nmk_result_free(res: *mut NmkResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Single-qubit coherence factor `r(t)` of ohmic-like pure dephasing.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nmk_dephasing_factor(t: c_double, s: c_double, eta: c_double, omega_c: c_double, out: *mut c_double) -> NmkStatus {
    guard(|| {
        out_check(out, "out")?;
        let p = DephasingParams::new(s, eta, omega_c)?;
        *out = dephasing::dephasing_factor(t, &p, &QuadConfig::default())?;
        Ok(())
    })
}

/// Excited-state survival `p(t)` of Lorentzian amplitude damping.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nmk_damping_parameter(t: c_double, gamma0: c_double, lambda: c_double, out: *mut c_double) -> NmkStatus {
    guard(|| {
        out_check(out, "out")?;
        let p = DampingParams::new(gamma0, lambda)?;
        *out = damping::damping_parameter(t, &p);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_arguments_are_reported() {
        unsafe {
            let mut out = ptr::null_mut();
            assert_eq!(nmk_config_from_str(ptr::null(), &mut out), NmkStatus::NullPointer);
            assert!(!nmk_last_error_message().is_null());
            assert_eq!(nmk_config_validate(ptr::null()), NmkStatus::NullPointer);
            assert!(nmk_result_value(ptr::null()).is_nan());
        }
    }

    #[test]
    fn success_clears_the_error() {
        unsafe {
            assert_eq!(nmk_config_validate(ptr::null()), NmkStatus::NullPointer);
            let cfg = nmk_config_new();
            assert_eq!(nmk_config_validate(cfg), NmkStatus::Ok);
            assert!(nmk_last_error_message().is_null());
            nmk_config_free(cfg);
        }
    }
}
