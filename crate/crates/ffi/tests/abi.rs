use std::ffi::{CStr, CString};
use std::ptr;

use cpctl_ffi::*;

fn last_error() -> String {
    let p = cpctl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn example1_round_trip() {
    unsafe {
        let name = CString::new("example1").unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(cpctl_model_builtin(name.as_ptr(), 0.5, 0.0, &mut m), CpctlStatus::Ok);
        assert_eq!(cpctl_model_num_states(m), 9);

        let text = CString::new("P>=2/3 [G P>=7/12 [G !a]]").unwrap();
        let mut f = ptr::null_mut();
        assert_eq!(cpctl_formula_parse(text.as_ptr(), CpctlFragment::Cpctl, &mut f), CpctlStatus::Ok);
        assert_eq!(cpctl_formula_num_paths(f), 2);

        let cfg = cpctl_config_default();
        let mut r = ptr::null_mut();
        assert_eq!(cpctl_synthesize(m, f, &cfg, &mut r), CpctlStatus::Ok);
        assert_eq!(cpctl_result_status(r), CpctlViStatus::TargetMet);
        assert!(cpctl_result_num_points(r, 0) >= 1);

        let mut nu = [0.0; 2];
        assert_eq!(cpctl_result_target_nu(r, nu.as_mut_ptr(), 2), CpctlStatus::Ok);
        assert!(nu[1] >= 2.0 / 3.0 - 1e-9);

        let mut p = ptr::null_mut();
        assert_eq!(cpctl_policy_extract(r, &mut p), CpctlStatus::Ok);
        assert!(cpctl_policy_num_memory(p) > 0);
        let mut exact = [0.0; 2];
        assert_eq!(cpctl_policy_check(p, exact.as_mut_ptr(), 2), CpctlStatus::Ok);
        assert!(exact[0] >= nu[0] - 1e-9 && exact[1] >= nu[1] - 1e-9);
        assert_eq!(cpctl_policy_certify(p), CpctlStatus::Ok);

        let mut json = ptr::null_mut();
        assert_eq!(cpctl_policy_to_json(p, &mut json), CpctlStatus::Ok);
        assert!(CStr::from_ptr(json).to_str().unwrap().contains("\"memory\""));
        cpctl_string_free(json);

        cpctl_policy_free(p);
        cpctl_result_free(r);
        cpctl_formula_free(f);
        cpctl_model_free(m);
    }
}

#[test]
fn unmet_target_has_no_policy() {
    unsafe {
        let name = CString::new("example1").unwrap();
        let mut m = ptr::null_mut();
        cpctl_model_builtin(name.as_ptr(), 0.5, 0.0, &mut m);
        let text = CString::new("P>=0.7 [G P>=7/12 [G !a]]").unwrap();
        let mut f = ptr::null_mut();
        cpctl_formula_parse(text.as_ptr(), CpctlFragment::Cpctl, &mut f);
        let mut r = ptr::null_mut();
        assert_eq!(cpctl_synthesize(m, f, ptr::null(), &mut r), CpctlStatus::Ok);
        assert_eq!(cpctl_result_status(r), CpctlViStatus::ConvergedTargetUnmet);
        let mut p = ptr::null_mut();
        assert_eq!(cpctl_policy_extract(r, &mut p), CpctlStatus::NoTarget);
        assert!(p.is_null());
        assert!(last_error().contains("target"));
        cpctl_result_free(r);
        cpctl_formula_free(f);
        cpctl_model_free(m);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(cpctl_model_builtin(ptr::null(), 0.5, 0.0, &mut m), CpctlStatus::NullArgument);
        let bad = CString::new("{\"states\": 3}").unwrap();
        assert_eq!(cpctl_model_from_json(bad.as_ptr(), &mut m), CpctlStatus::ModelError);
        assert!(!last_error().is_empty());

        let text = CString::new("P>=0.5 [a U b]").unwrap();
        let mut f = ptr::null_mut();
        assert_eq!(cpctl_formula_parse(text.as_ptr(), CpctlFragment::Cpctl, &mut f), CpctlStatus::FormulaError);

        let mut buf = [0.0; 1];
        assert_eq!(cpctl_result_point_nu(ptr::null(), 0, 0, buf.as_mut_ptr(), 1), CpctlStatus::NullArgument);
        // A successful call clears the previous message.
        let name = CString::new("thm1").unwrap();
        assert_eq!(cpctl_model_builtin(name.as_ptr(), 0.5, 0.0, &mut m), CpctlStatus::Ok);
        assert!(cpctl_last_error_message().is_null());
        let mut json = ptr::null_mut();
        assert_eq!(cpctl_model_to_json(m, &mut json), CpctlStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(cpctl_model_from_json(json, &mut again), CpctlStatus::Ok);
        assert_eq!(cpctl_model_num_states(again), cpctl_model_num_states(m));
        cpctl_string_free(json);
        cpctl_model_free(again);
        cpctl_model_free(m);
    }
}

#[test]
fn point_buffer_too_small() {
    unsafe {
        let name = CString::new("example1").unwrap();
        let mut m = ptr::null_mut();
        cpctl_model_builtin(name.as_ptr(), 0.5, 0.0, &mut m);
        let text = CString::new("P>=0.5 [G P>=0.5 [G !a]]").unwrap();
        let mut f = ptr::null_mut();
        cpctl_formula_parse(text.as_ptr(), CpctlFragment::Cpctl, &mut f);
        let mut r = ptr::null_mut();
        cpctl_synthesize(m, f, ptr::null(), &mut r);
        let mut buf = [0.0; 1];
        assert_eq!(cpctl_result_point_nu(r, 0, 0, buf.as_mut_ptr(), 1), CpctlStatus::OutOfRange);
        assert_eq!(cpctl_result_point_nu(r, 99, 0, buf.as_mut_ptr(), 1), CpctlStatus::OutOfRange);
        assert_eq!(cpctl_result_num_points(r, 99), 0);
        cpctl_result_free(r);
        cpctl_formula_free(f);
        cpctl_model_free(m);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cpctl.h")).unwrap();
    for name in [
        "typedef struct CpctlModel CpctlModel;",
        "cpctl_last_error_message",
        "cpctl_synthesize",
        "cpctl_policy_certify",
        "cpctl_string_free",
        "CPCTL_STATUS_NO_TARGET",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
