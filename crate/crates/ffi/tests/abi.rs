use std::ffi::{CStr, CString};
use std::ptr;

use symvalic_ffi::*;

const UNGUARDED: &str = "contract Sensitive {
    function sensitive(address recipient) public { selfdestruct(recipient); } }";

fn parse(src: &str) -> *mut SvcContract {
    let text = CString::new(src).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { svc_contract_parse(text.as_ptr(), &mut out) }, SvcStatus::Ok);
    out
}

fn take(s: *mut std::ffi::c_char) -> String {
    let owned = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { svc_string_free(s) };
    owned
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(svc_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn analyze_and_scan_round_trip() {
    let contract = parse(UNGUARDED);
    let config = svc_config_default();
    unsafe {
        assert_eq!(svc_config_set_seed(config, 3), SvcStatus::Ok);
        let mut result = ptr::null_mut();
        assert_eq!(svc_analyze(contract, config, &mut result), SvcStatus::Ok);
        assert_eq!(svc_result_truncated(result), 0);

        let mut json = ptr::null_mut();
        assert_eq!(svc_result_to_json(result, &mut json), SvcStatus::Ok);
        assert!(take(json).contains("\"schema\": \"symvalic-result/1\""));

        let mut warnings = ptr::null_mut();
        let mut count = 0usize;
        assert_eq!(svc_scan(result, ptr::null(), &mut warnings, &mut count), SvcStatus::Ok);
        assert_eq!(count, 2);
        assert!(take(warnings).contains("UNGUARDED_SENSITIVE"));

        svc_result_free(result);
        svc_config_free(config);
        svc_contract_free(contract);
    }
}

#[test]
fn errors_are_reported() {
    let text = CString::new("contract Broken {\n  function f( }").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { svc_contract_parse(text.as_ptr(), &mut out) }, SvcStatus::Parse);
    assert!(out.is_null());
    assert!(last_error().starts_with("2:"), "{}", last_error());

    assert_eq!(unsafe { svc_contract_parse(ptr::null(), &mut out) }, SvcStatus::NullArgument);
    assert_eq!(unsafe { svc_result_truncated(ptr::null()) }, -1);

    let contract = parse(UNGUARDED);
    let config = svc_config_default();
    unsafe {
        svc_config_set_tx_rounds(config, 0);
        let mut result = ptr::null_mut();
        assert_eq!(svc_analyze(contract, config, &mut result), SvcStatus::Config);
        assert!(result.is_null());

        assert_eq!(svc_analyze(contract, ptr::null(), &mut result), SvcStatus::Ok);
        let bad = CString::new("{").unwrap();
        let mut json = ptr::null_mut();
        assert_eq!(svc_scan(result, bad.as_ptr(), &mut json, ptr::null_mut()), SvcStatus::Facts);
        assert!(json.is_null());
        assert!(last_error().contains("malformed facts"));

        svc_result_free(result);
        svc_config_free(config);
        svc_contract_free(contract);
        svc_string_free(ptr::null_mut());
    }
}
