use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;

use nvlab_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(nv_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn cubic_anchor() {
    let mut roots = [0.0; 6];
    let mut mult = [0u8; 3];
    let s = unsafe { nv_solve_cubic(0.0, 0.0, roots.as_mut_ptr(), mult.as_mut_ptr()) };
    assert_eq!(s, NvStatus::Ok);
    // ξ³ = 1
    for i in 0..3 {
        let m = roots[2 * i].hypot(roots[2 * i + 1]);
        assert!((m - 1.0).abs() < 1e-12);
    }
    assert_eq!(mult, [1, 1, 1]);
}

#[test]
fn classify_codes() {
    let mut region = NvRegion::Exterior;
    let mut p = [0.0; 2];
    let cases = [(0.0, NvRegion::Interior), (-6.0, NvRegion::BoundaryRegular), (18.0, NvRegion::BoundaryCusp), (30.0, NvRegion::Exterior)];
    for (u, expect) in cases {
        assert_eq!(unsafe { nv_classify(u, 0.0, &mut region, p.as_mut_ptr()) }, NvStatus::Ok);
        assert_eq!(region, expect, "u={u}");
    }
    assert!(p[0] > 0.0, "omega at u=30");
}

#[test]
fn null_pointers_are_reported() {
    let mut p = [0.0; 2];
    assert_eq!(unsafe { nv_classify(1.0, 0.0, std::ptr::null_mut(), p.as_mut_ptr()) }, NvStatus::NullPointer);
    assert!(last_error().contains("null"));
    assert_eq!(unsafe { nv_phase(1.0, 0.0, 1.0, 0.0, std::ptr::null_mut()) }, NvStatus::NullPointer);
    let mut out = [0.0; 2];
    assert_eq!(
        unsafe { nv_lab_reconstruct_v(std::ptr::null(), 0.0, 0.0, 0.0, out.as_mut_ptr(), std::ptr::null_mut()) },
        NvStatus::NullPointer
    );
    unsafe { nv_lab_free(std::ptr::null_mut()) };
}

#[test]
fn phase_pole_is_numerical_error() {
    let mut s = 0.0;
    assert_eq!(unsafe { nv_phase(1.0, 0.0, 0.0, 0.0, &mut s) }, NvStatus::Numerical);
    assert_eq!(unsafe { nv_phase(0.0, 0.0, 2.0, 0.0, &mut s) }, NvStatus::Ok);
    assert!(s.is_finite());
}

#[test]
fn handles_and_config_errors() {
    assert!(nv_lab_new(-1.0, 0.6).is_null());
    assert!(!last_error().is_empty());
    let bad = CString::new(r#"{"quadrature": {"n_r": 7}}"#).unwrap();
    assert!(unsafe { nv_lab_from_json(bad.as_ptr()) }.is_null());
    let good = CString::new(r#"{"scattering": {"c": 0.05}}"#).unwrap();
    let lab = unsafe { nv_lab_from_json(good.as_ptr()) };
    assert!(!lab.is_null());
    let mut lin = [0.0; 4];
    assert_eq!(unsafe { nv_lab_linear(lab, 0.5, 1.0, 2.0, lin.as_mut_ptr()) }, NvStatus::Ok);
    assert!(lin[1].abs() < 1e-9 * lin[0].abs().max(1e-3));
    let mut v = [0.0; 2];
    let mut it = 0u32;
    assert_eq!(unsafe { nv_lab_reconstruct_v(lab, 1.0, 0.5, 0.5, v.as_mut_ptr(), &mut it) }, NvStatus::Ok);
    assert!(it > 0 && v[0].is_finite());
    unsafe { nv_lab_free(lab) };
}

#[test]
fn c_program_links_against_header() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = root.join("include/nvlab.h");
    assert!(header.exists(), "header not generated");
    // target/<profile>/deps/abi-xxxx → target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libnvlab_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("nvlab_smoke");
    let mut cmd = Command::new(&cc);
    cmd.arg("-std=c99").arg("-Wall").arg("-Werror").arg("-I").arg(root.join("include"));
    cmd.arg(root.join("tests/c/smoke.c"));
    if lib.exists() {
        cmd.arg(&lib).args(["-lpthread", "-ldl", "-lm"]).arg("-o").arg(&out);
    } else {
        cmd.arg("-fsyntax-only");
    }
    let status = match cmd.status() {
        Ok(s) => s,
        Err(_) => {
            eprintln!("no C compiler; header check skipped");
            return;
        }
    };
    assert!(status.success(), "C compile failed");
    if lib.exists() {
        let run = Command::new(&out).output().unwrap();
        assert!(run.status.success(), "smoke exit {:?}", run.status.code());
        assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
    }
}
