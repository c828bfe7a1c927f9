//! C ABI for parsing, analyzing and scanning contracts.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns an [`SvcStatus`];
//! on failure [`svc_last_error_message`] describes the error on the calling
//! thread. Strings returned through out-parameters are released with
//! [`svc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use symvalic::clients::warnings_to_json;
use symvalic::corpus::{scan_contract, FactsFile};
use symvalic::ir::{parse, Contract};
use symvalic::valueflow::{analyze, AnalysisConfig, AnalysisResult};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Config = 4,
    Facts = 5,
    Panic = 6,
}

pub struct SvcContract(Arc<Contract>);

pub struct SvcConfig(AnalysisConfig);

pub struct SvcResult(AnalysisResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: SvcStatus, msg: impl Into<String>) -> SvcStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> SvcStatus) -> SvcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SvcStatus::Panic, format!("internal error: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, SvcStatus> {
    if p.is_null() {
        return Err(fail(SvcStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|e| fail(SvcStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("JSON output has no nul bytes").into_raw()
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn svc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses NUL-terminated source text into a contract handle.
///
/// # Safety
/// `source` must be null or a valid C string; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn svc_contract_parse(source: *const c_char, out: *mut *mut SvcContract) -> SvcStatus {
    guard(|| {
        if out.is_null() {
            return fail(SvcStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let text = match read_str(source, "source") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse(text) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(SvcContract(Arc::new(c))));
                SvcStatus::Ok
            }
            Err(e) => fail(SvcStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `contract` must be null or a handle from [`svc_contract_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn svc_contract_free(contract: *mut SvcContract) {
    if !contract.is_null() {
        drop(Box::from_raw(contract));
    }
}

/// A configuration with every bound at its default.
#[no_mangle]
pub extern "C" fn svc_config_default() -> *mut SvcConfig {
    Box::into_raw(Box::new(SvcConfig(AnalysisConfig::default())))
}

/// # Safety
/// `config` must be null or a live handle from [`svc_config_default`].
#[no_mangle]
pub unsafe extern "C" fn svc_config_free(config: *mut SvcConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

unsafe fn with_config(config: *mut SvcConfig, f: impl FnOnce(&mut AnalysisConfig)) -> SvcStatus {
    match config.as_mut() {
        None => fail(SvcStatus::NullArgument, "config is null"),
        Some(c) => {
            f(&mut c.0);
            SvcStatus::Ok
        }
    }
}

/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn svc_config_set_seed(config: *mut SvcConfig, seed: u64) -> SvcStatus {
    with_config(config, |c| c.seed = seed)
}

/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn svc_config_set_tx_rounds(config: *mut SvcConfig, rounds: u32) -> SvcStatus {
    with_config(config, |c| c.tx_rounds = rounds)
}

/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn svc_config_set_arith_depth(config: *mut SvcConfig, depth: u32) -> SvcStatus {
    with_config(config, |c| c.arith_depth = depth)
}

/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn svc_config_set_dep_budget(config: *mut SvcConfig, args: u32, storage_loads: u32, tx_args: u32) -> SvcStatus {
    with_config(config, |c| {
        c.budget.args = args;
        c.budget.storage_loads = storage_loads;
        c.budget.tx_args = tx_args;
    })
}

/// Analyzes a contract. A null `config` means the defaults.
///
/// # Safety
/// `contract` and `config` must be null or live handles; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn svc_analyze(contract: *const SvcContract, config: *const SvcConfig, out: *mut *mut SvcResult) -> SvcStatus {
    guard(|| {
        if out.is_null() {
            return fail(SvcStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let Some(contract) = contract.as_ref() else {
            return fail(SvcStatus::NullArgument, "contract is null");
        };
        let default = AnalysisConfig::default();
        let cfg = config.as_ref().map_or(&default, |c| &c.0);
        match analyze(contract.0.clone(), cfg) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(SvcResult(r)));
                SvcStatus::Ok
            }
            Err(e) => fail(SvcStatus::Config, e.to_string()),
        }
    })
}

/// # Safety
/// `result` must be null or a live handle from [`svc_analyze`].
#[no_mangle]
pub unsafe extern "C" fn svc_result_free(result: *mut SvcResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// 1 if the analysis hit a resource cap, 0 if not, -1 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn svc_result_truncated(result: *const SvcResult) -> i32 {
    match result.as_ref() {
        None => -1,
        Some(r) => i32::from(r.0.truncated),
    }
}

/// The result as `symvalic-result/1` JSON.
///
/// # Safety
/// `result` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn svc_result_to_json(result: *const SvcResult, out: *mut *mut c_char) -> SvcStatus {
    guard(|| {
        if out.is_null() {
            return fail(SvcStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let Some(r) = result.as_ref() else {
            return fail(SvcStatus::NullArgument, "result is null");
        };
        *out = into_c_string(r.0.to_json());
        SvcStatus::Ok
    })
}

/// Runs every detector and writes `symvalic-warnings/1` JSON. `facts_json`
/// is null or the text of a facts file; `warning_count` may be null.
///
/// # Safety
/// Pointers must be null or valid for their documented use.
#[no_mangle]
pub unsafe extern "C" fn svc_scan(result: *const SvcResult, facts_json: *const c_char, out: *mut *mut c_char, warning_count: *mut usize) -> SvcStatus {
    guard(|| {
        if out.is_null() {
            return fail(SvcStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let Some(r) = result.as_ref() else {
            return fail(SvcStatus::NullArgument, "result is null");
        };
        let facts = if facts_json.is_null() {
            Default::default()
        } else {
            let text = match read_str(facts_json, "facts_json") {
                Ok(t) => t,
                Err(s) => return s,
            };
            match FactsFile::from_json(text) {
                Ok(f) => f.facts(),
                Err(e) => return fail(SvcStatus::Facts, format!("malformed facts: {e}")),
            }
        };
        let det = scan_contract(&r.0, &facts);
        if let Some(n) = warning_count.as_mut() {
            *n = det.warnings.len();
        }
        *out = into_c_string(warnings_to_json(&det.warnings));
        SvcStatus::Ok
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn svc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
