//! C ABI over nvlab. Handles are opaque; every call returns an `NvStatus` and
//! leaves a message for `nv_last_error` on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;

use nvlab::asymptotics_lab::sample_v;
use nvlab::cli_runner::RunConfig;
use nvlab::linearized_flow::{eval_i_z, eval_j_z, LinearData};
use nvlab::phase_geometry::{classify_region, phase, solve_cubic, RegionClass};
use nvlab::NvError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    NoConvergence = 4,
    Numerical = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NvRegion {
    Interior = 0,
    BoundaryRegular = 1,
    BoundaryCusp = 2,
    Exterior = 3,
}

/// Opaque handle holding scattering data and numerical settings.
pub struct NvLab {
    config: RunConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &NvError) -> NvStatus {
    set_error(&e.to_string());
    match e {
        NvError::Config(_) => NvStatus::Config,
        NvError::NoConvergence { .. } => NvStatus::NoConvergence,
        _ => NvStatus::Numerical,
    }
}

fn guard<F: FnOnce() -> NvStatus>(f: F) -> NvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            NvStatus::Panic
        }
    }
}

fn null(what: &str) -> NvStatus {
    set_error(&format!("{what} is null"));
    NvStatus::NullPointer
}

/// Message for the last failed call on this thread; valid until the next call.
#[no_mangle]
pub extern "C" fn nv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn nv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Bump-family data with amplitude c and width w; null on invalid input.
#[no_mangle]
pub extern "C" fn nv_lab_new(c: f64, width: f64) -> *mut NvLab {
    let mut config = RunConfig::default();
    config.scattering.c = c;
    config.scattering.width = width;
    if let Err(e) = config.validate() {
        status_of(&e);
        return std::ptr::null_mut();
    }
    Box::into_raw(Box::new(NvLab { config }))
}

/// Handle from a JSON run configuration; null on error.
///
/// # Safety
/// `json` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nv_lab_from_json(json: *const c_char) -> *mut NvLab {
    if json.is_null() {
        null("json");
        return std::ptr::null_mut();
    }
    let text = match CStr::from_ptr(json).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("json is not UTF-8");
            return std::ptr::null_mut();
        }
    };
    match RunConfig::from_json(text) {
        Ok(config) => Box::into_raw(Box::new(NvLab { config })),
        Err(e) => {
            status_of(&e);
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `lab` must come from `nv_lab_new`/`nv_lab_from_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn nv_lab_free(lab: *mut NvLab) {
    if !lab.is_null() {
        drop(Box::from_raw(lab));
    }
}

/// Roots ξ₀..ξ₂ as (re, im) pairs into `roots[6]`, multiplicities into `mult[3]`.
///
/// # Safety
/// `roots` must hold 6 doubles and `mult` 3 bytes.
#[no_mangle]
pub unsafe extern "C" fn nv_solve_cubic(u_re: f64, u_im: f64, roots: *mut f64, mult: *mut u8) -> NvStatus {
    if roots.is_null() || mult.is_null() {
        return null("output");
    }
    if !(u_re.is_finite() && u_im.is_finite()) {
        set_error("u must be finite");
        return NvStatus::InvalidArgument;
    }
    guard(|| {
        let r = solve_cubic(Complex64::new(u_re, u_im));
        let out = std::slice::from_raw_parts_mut(roots, 6);
        for (i, x) in r.xi.iter().enumerate() {
            out[2 * i] = x.re;
            out[2 * i + 1] = x.im;
        }
        std::slice::from_raw_parts_mut(mult, 3).copy_from_slice(&r.multiplicity);
        NvStatus::Ok
    })
}

/// Region class of u. `param[2]` receives (φ, 0) on the regular boundary,
/// (k, 0) at a cusp and (ω, φ) outside.
///
/// # Safety
/// `region` must be valid and `param` must hold 2 doubles.
#[no_mangle]
pub unsafe extern "C" fn nv_classify(u_re: f64, u_im: f64, region: *mut NvRegion, param: *mut f64) -> NvStatus {
    if region.is_null() || param.is_null() {
        return null("output");
    }
    guard(|| match classify_region(Complex64::new(u_re, u_im)) {
        Ok(c) => {
            let (k, p) = match c {
                RegionClass::Interior => (NvRegion::Interior, [0.0, 0.0]),
                RegionClass::BoundaryRegular { phi } => (NvRegion::BoundaryRegular, [phi, 0.0]),
                RegionClass::BoundaryCusp { k } => (NvRegion::BoundaryCusp, [k as f64, 0.0]),
                RegionClass::Exterior { omega, phi } => (NvRegion::Exterior, [omega, phi]),
            };
            *region = k;
            std::slice::from_raw_parts_mut(param, 2).copy_from_slice(&p);
            NvStatus::Ok
        }
        Err(e) => status_of(&e),
    })
}

/// S(u, ζ).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nv_phase(u_re: f64, u_im: f64, zeta_re: f64, zeta_im: f64, out: *mut f64) -> NvStatus {
    if out.is_null() {
        return null("out");
    }
    guard(|| match phase(Complex64::new(u_re, u_im), Complex64::new(zeta_re, zeta_im)) {
        Ok(v) => {
            *out = v;
            NvStatus::Ok
        }
        Err(e) => status_of(&e),
    })
}

/// I(t, z) and J(t, z) for f = b, written as (re, im) pairs into `out[4]`.
///
/// # Safety
/// `lab` must be a live handle and `out` must hold 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn nv_lab_linear(lab: *const NvLab, t: f64, z_re: f64, z_im: f64, out: *mut f64) -> NvStatus {
    if lab.is_null() {
        return null("lab");
    }
    if out.is_null() {
        return null("out");
    }
    let cfg = &(*lab).config;
    guard(|| {
        let f = LinearData::plain(cfg.data());
        let z = Complex64::new(z_re, z_im);
        let res = eval_i_z(t, z, &f, &cfg.policy()).and_then(|i| Ok((i, eval_j_z(t, z, &f, &cfg.policy())?)));
        match res {
            Ok((i, j)) => {
                std::slice::from_raw_parts_mut(out, 4).copy_from_slice(&[i.re, i.im, j.re, j.im]);
                NvStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Reconstructed v(z, t) into `out[2]`; `iterations` may be null.
///
/// # Safety
/// `lab` must be a live handle and `out` must hold 2 doubles.
#[no_mangle]
pub unsafe extern "C" fn nv_lab_reconstruct_v(
    lab: *const NvLab,
    z_re: f64,
    z_im: f64,
    t: f64,
    out: *mut f64,
    iterations: *mut u32,
) -> NvStatus {
    if lab.is_null() {
        return null("lab");
    }
    if out.is_null() {
        return null("out");
    }
    if !(z_re.is_finite() && z_im.is_finite() && t.is_finite()) {
        set_error("z and t must be finite");
        return NvStatus::InvalidArgument;
    }
    let cfg = &(*lab).config;
    guard(|| match sample_v(&cfg.data(), Complex64::new(z_re, z_im), t, &cfg.sweep_config()) {
        Ok(p) => {
            std::slice::from_raw_parts_mut(out, 2).copy_from_slice(&[p.v.re, p.v.im]);
            if !iterations.is_null() {
                *iterations = p.iterations as u32;
            }
            NvStatus::Ok
        }
        Err(e) => status_of(&e),
    })
}
