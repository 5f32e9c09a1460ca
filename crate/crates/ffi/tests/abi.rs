use std::ffi::{CStr, CString};
use std::ptr;

use monolab_ffi::*;

fn last_error() -> String {
    let p = ml_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn ghz_invariants_through_handles() {
    let name = CString::new("ghz").unwrap();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(ml_state_named(name.as_ptr(), &mut s), MlStatus::Ok);
        assert_eq!(ml_state_dim(s), 8);
        let mut inv = MlInvariants::default();
        assert_eq!(ml_invariants(s, &mut inv), MlStatus::Ok);
        assert!((inv.phi - 49.5).abs() < 1e-9);
        assert!((inv.tau_abc - 1.0).abs() < 1e-12);
        let mut v = 0.0;
        let m = CString::new("entropy").unwrap();
        assert_eq!(ml_monotone_eval(s, m.as_ptr(), &mut v), MlStatus::Ok);
        assert!((v - 1.0).abs() < 1e-12);
        ml_state_free(s);
    }
}

#[test]
fn state_from_amplitudes() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let dims = [2usize, 2];
    let amps = [h, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, h];
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(ml_state_new(dims.as_ptr(), 2, amps.as_ptr(), 4, &mut s), MlStatus::Ok);
        let mut v = 0.0;
        let m = CString::new("purity").unwrap();
        assert_eq!(ml_monotone_eval(s, m.as_ptr(), &mut v), MlStatus::Ok);
        assert!(v.is_finite());
        let mut inv = MlInvariants::default();
        assert_eq!(ml_invariants(s, &mut inv), MlStatus::InvalidArgument);
        ml_state_free(s);

        assert_eq!(
            ml_state_new(dims.as_ptr(), 2, amps.as_ptr(), 3, &mut s),
            MlStatus::InvalidArgument
        );
        assert!(s.is_null());
        assert!(!last_error().is_empty());
    }
}

#[test]
fn null_and_bad_arguments() {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(ml_state_named(ptr::null(), &mut s), MlStatus::NullPointer);
        assert!(last_error().contains("name"));
        let bad = CString::new("nope").unwrap();
        assert_eq!(ml_state_named(bad.as_ptr(), &mut s), MlStatus::InvalidArgument);
        assert_eq!(ml_state_named(bad.as_ptr(), ptr::null_mut()), MlStatus::NullPointer);
        assert_eq!(ml_state_dim(ptr::null()), 0);
        ml_state_free(ptr::null_mut());
        ml_string_free(ptr::null_mut());
        ml_report_free(ptr::null_mut());
        let ok = CString::new("bell").unwrap();
        assert_eq!(ml_state_named(ok.as_ptr(), &mut s), MlStatus::Ok);
        assert!(ml_last_error().is_null());
        ml_state_free(s);
    }
}

#[test]
fn check_report_round_trip() {
    let m = CString::new("purity@decreasing").unwrap();
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(ml_check_run(m.as_ptr(), 4, 3, 11, &mut r), MlStatus::Ok);
        let mut c = MlCounts::default();
        assert_eq!(ml_report_counts(r, &mut c), MlStatus::Ok);
        assert!(c.violation > 0);
        let mut js = ptr::null_mut();
        assert_eq!(ml_report_json(r, &mut js), MlStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(js).to_str().unwrap()).unwrap();
        assert_eq!(v["counts"]["violation"].as_u64(), Some(c.violation));
        ml_string_free(js);
        ml_report_free(r);
    }
}

#[test]
fn campaign_json() {
    let cfg = CString::new(r#"{"n_trials": 30, "seed": 5, "monotones": ["norm", "tau_ABC"]}"#).unwrap();
    let mut js = ptr::null_mut();
    unsafe {
        assert_eq!(ml_campaign_run_json(cfg.as_ptr(), &mut js), MlStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(js).to_str().unwrap()).unwrap();
        assert_eq!(v["n_trials"], 30);
        ml_string_free(js);
        let bad = CString::new(r#"{"n_trials": 3, "bogus": 1}"#).unwrap();
        assert_eq!(ml_campaign_run_json(bad.as_ptr(), &mut js), MlStatus::InvalidArgument);
        assert!(js.is_null());
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/monolab.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .filter_map(|l| l.split('(').next())
        .collect();
    assert!(exports.len() >= 12);
    for f in exports {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    let v = unsafe { CStr::from_ptr(ml_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
