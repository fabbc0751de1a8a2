use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use m3fair_ffi::*;

fn last_error() -> String {
    let p = m3f_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn reweight_matches_worked_example() {
    let labels = [1u8, 1, 1, 0, 0, 1, 0, 0, 0, 0];
    let groups = [1u32, 1, 1, 1, 0, 0, 0, 0, 0, 0];
    let mut out = [0.0; 10];
    let s = unsafe { m3f_reweight(labels.as_ptr(), groups.as_ptr(), ptr::null(), 10, out.as_mut_ptr()) };
    assert_eq!(s, M3fStatus::Ok);
    // group 1: 4 rows, 3 favorable; group 0: 6 rows, 1 favorable; 4/10 favorable overall
    let expect = |n_label: f64, n_group: f64, n_cell: f64| n_label * n_group / (10.0 * n_cell);
    assert!((out[0] - expect(4.0, 4.0, 3.0)).abs() < 1e-12);
    assert!((out[3] - expect(6.0, 4.0, 1.0)).abs() < 1e-12);
    assert!((out[4] - expect(6.0, 6.0, 5.0)).abs() < 1e-12);
    assert!((out[5] - expect(4.0, 6.0, 1.0)).abs() < 1e-12);
}

#[test]
fn unreachable_cell_is_reported() {
    let labels = [1u8, 1, 0, 0];
    let groups = [1u32, 1, 0, 0];
    let mut out = [0.0; 4];
    let s = unsafe { m3f_reweight(labels.as_ptr(), groups.as_ptr(), ptr::null(), 4, out.as_mut_ptr()) };
    assert_eq!(s, M3fStatus::UnreachableCell);
    assert!(last_error().contains("cell"), "{}", last_error());
}

#[test]
fn m3fair_with_one_attribute_equals_single_reweight() {
    let labels = [1u8, 0, 1, 0, 0, 1, 1, 0];
    let membership = [1u8, 1, 0, 0, 1, 0, 1, 0];
    let partition: Vec<u32> = membership.iter().map(|&m| m as u32).collect();
    let prior = [1.0, 2.0, 0.5, 1.0, 1.0, 3.0, 1.0, 1.0];
    let (mut a, mut b) = ([0.0; 8], [0.0; 8]);
    unsafe {
        assert_eq!(m3f_reweight(labels.as_ptr(), partition.as_ptr(), prior.as_ptr(), 8, a.as_mut_ptr()), M3fStatus::Ok);
        // privileged = 1 flips the indicator; a one-attribute partition is the same up to relabeling
        let s = m3f_m3fair(labels.as_ptr(), membership.as_ptr(), [1u8].as_ptr(), [1u32].as_ptr(), 1, 8, prior.as_ptr(), b.as_mut_ptr());
        assert_eq!(s, M3fStatus::Ok);
    }
    assert_eq!(a, b);
}

#[test]
fn null_and_invalid_arguments() {
    let mut out = 0.0;
    let s = unsafe { m3f_auroc(ptr::null(), ptr::null(), 3, &mut out) };
    assert_eq!(s, M3fStatus::NullPointer);
    assert!(last_error().contains("scores"));

    let labels = [1u8, 0];
    let groups = [0u32, 1];
    let bad_prior = [-1.0, 1.0];
    let mut w = [0.0; 2];
    let s = unsafe { m3f_reweight(labels.as_ptr(), groups.as_ptr(), bad_prior.as_ptr(), 2, w.as_mut_ptr()) };
    assert_eq!(s, M3fStatus::InvalidArgument);

    let s = unsafe { m3f_m3fair(labels.as_ptr(), [0u8, 1].as_ptr(), [1u8].as_ptr(), [0u32].as_ptr(), 1, 2, ptr::null(), w.as_mut_ptr()) };
    assert_eq!(s, M3fStatus::InvalidArgument);
}

#[test]
fn fairness_struct_is_filled() {
    // unprivileged (0): 2 of 4 predicted positive; privileged (1): 4 of 4
    let scores = [0.9, 0.8, 0.1, 0.2, 0.9, 0.7, 0.6, 0.95];
    let labels = [1u8, 0, 1, 0, 1, 0, 1, 1];
    let membership = [0u8, 0, 0, 0, 1, 1, 1, 1];
    let mut r = M3fFairness::default();
    let s = unsafe { m3f_fairness(scores.as_ptr(), labels.as_ptr(), membership.as_ptr(), 1, 8, 0.5, &mut r) };
    assert_eq!(s, M3fStatus::Ok);
    assert!((r.di - 0.5).abs() < 1e-12);
    assert!((r.spd + 0.5).abs() < 1e-12);
    assert!((r.acc - 5.0 / 8.0).abs() < 1e-12);
}

#[test]
fn dataset_handle_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "a,b,y\n1,2,yes\n3,4,no\n5,6,yes\n").unwrap();
    let (p, l, pos) = (
        CString::new(path.to_str().unwrap()).unwrap(),
        CString::new("y").unwrap(),
        CString::new("yes").unwrap(),
    );
    let mut ds = ptr::null_mut();
    unsafe {
        assert_eq!(m3f_dataset_load_csv(p.as_ptr(), l.as_ptr(), pos.as_ptr(), &mut ds), M3fStatus::Ok);
        assert_eq!(m3f_dataset_n_rows(ds), 3);
        assert_eq!(m3f_dataset_n_cols(ds), 2);
        let mut labels = [9u8; 3];
        assert_eq!(m3f_dataset_labels(ds, labels.as_mut_ptr(), 3), M3fStatus::Ok);
        assert_eq!(labels, [1, 0, 1]);
        assert_eq!(m3f_dataset_labels(ds, labels.as_mut_ptr(), 2), M3fStatus::InvalidData);
        m3f_dataset_free(ds);
        assert_eq!(m3f_dataset_n_rows(ptr::null()), 0);
    }
}

#[test]
fn experiment_json_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let mut csv = String::from("s,x,y\n");
    for i in 0..60 {
        let s = i % 2;
        let y = u8::from((i * 7 + s * 3) % 5 < 2 + s);
        csv.push_str(&format!("{s},{},{y}\n", (i * 13 % 17) as f64 / 3.0));
    }
    std::fs::write(&path, csv).unwrap();
    let config = serde_json::json!({
        "dataset": {"path": path, "label_column": "y", "positive_label": "1"},
        "sensitive_attributes": ["s"],
        "method": {"kind": "rw_single", "attribute": "s"}
    });
    let c = CString::new(config.to_string()).unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(m3f_run_experiment_json(c.as_ptr(), &mut out), M3fStatus::Ok, "{}", last_error());
        let report = CStr::from_ptr(out).to_str().unwrap().to_string();
        m3f_string_free(out);
        let parsed = m3fair::ExperimentReport::from_json(&report).unwrap();
        assert_eq!(parsed.rows.len(), 1);
        assert_eq!(parsed.rows[0].method, "RW");

        let bad = CString::new("{\"dataset\": 3}").unwrap();
        assert_eq!(m3f_run_experiment_json(bad.as_ptr(), &mut out), M3fStatus::Parse);
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(m3f_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// Compiles tests/c/smoke.c against the generated header and static library.
#[test]
fn c_smoke_test() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    // the test binary lives in target/<profile>/deps
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libm3fair_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}

fn which_cc() -> Result<String, ()> {
    for c in ["cc", "gcc", "clang"] {
        if Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(c.to_string());
        }
    }
    Err(())
}
