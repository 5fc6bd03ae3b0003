//! C ABI over the okpair core: atlases, verification, integration and
//! lattice classification behind opaque handles.
//!
//! Every fallible function returns an [`OkpairStatus`]; on failure a message
//! is available from [`okpair_last_error`] on the calling thread. Strings
//! returned through `char**` out-parameters are owned by the caller and must
//! be released with [`okpair_string_free`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;
use okpair::atlas::{builtin_atlas, parse_atlas, Atlas};
use okpair::integrator::{compile_atlas, integrate, IntegrateOptions, PhaseState, TPath, Trajectory};
use okpair::lattice::{classify, deformation_dim, kernel, IntersectionMatrix};
use serde_json::json;

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OkpairStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    NotFound = 4,
    InvalidArgument = 5,
    Integration = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// Opaque atlas handle.
pub struct OkpairAtlas {
    inner: Atlas,
}

/// Opaque trajectory handle.
pub struct OkpairTrajectory {
    inner: Trajectory,
}

/// One trajectory sample; `chart` indexes the atlas charts in declaration order.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OkpairSample {
    pub t_re: f64,
    pub t_im: f64,
    pub x_re: f64,
    pub x_im: f64,
    pub y_re: f64,
    pub y_im: f64,
    pub h: f64,
    pub err: f64,
    pub chart: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let mut bytes = msg.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(OkpairStatus, String);

type FfiResult<T> = Result<T, Fail>;

fn fail<T>(status: OkpairStatus, msg: impl Into<String>) -> FfiResult<T> {
    Err(Fail(status, msg.into()))
}

/// Runs `f`, converting errors and panics into a status plus last-error message.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> OkpairStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            OkpairStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            OkpairStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return fail(OkpairStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(OkpairStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref()
        .map_or_else(|| fail(OkpairStatus::NullPointer, format!("{what} is null")), Ok)
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> FfiResult<()> {
    if out.is_null() {
        return fail(OkpairStatus::NullPointer, format!("{what} is null"));
    }
    out.write(value);
    Ok(())
}

fn c_string(s: String) -> *mut c_char {
    let mut bytes = s.into_bytes();
    bytes.retain(|&b| b != 0);
    CString::new(bytes).expect("interior NULs removed").into_raw()
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next okpair call on the same thread.
#[no_mangle]
pub extern "C" fn okpair_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn okpair_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from an okpair `char**` out-parameter and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn okpair_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a built-in atlas (`"E7"` or `"D8"`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn okpair_atlas_builtin(name: *const c_char, out: *mut *mut OkpairAtlas) -> OkpairStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let atlas = builtin_atlas(name).or_else(|e| fail(OkpairStatus::NotFound, e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(OkpairAtlas { inner: atlas })), "out")
    })
}

/// Parses an atlas from DSL text.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn okpair_atlas_from_dsl(source: *const c_char, out: *mut *mut OkpairAtlas) -> OkpairStatus {
    guard(|| {
        let src = str_arg(source, "source")?;
        let atlas = parse_atlas(src).or_else(|e| fail(OkpairStatus::Parse, e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(OkpairAtlas { inner: atlas })), "out")
    })
}

/// # Safety
/// `atlas` must come from an okpair constructor and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn okpair_atlas_free(atlas: *mut OkpairAtlas) {
    if !atlas.is_null() {
        drop(Box::from_raw(atlas));
    }
}

/// Number of charts of an atlas, or 0 for null.
///
/// # Safety
/// `atlas` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn okpair_atlas_chart_count(atlas: *const OkpairAtlas) -> usize {
    atlas.as_ref().map_or(0, |a| a.inner.charts().len())
}

/// Serializes an atlas back to DSL text.
///
/// # Safety
/// `atlas` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn okpair_atlas_to_dsl(atlas: *const OkpairAtlas, out: *mut *mut c_char) -> OkpairStatus {
    guard(|| {
        let a = ref_arg(atlas, "atlas")?;
        write_out(out, c_string(a.inner.to_dsl()), "out")
    })
}

/// Runs the full symbolic verification pipeline. `passed` receives 1 or 0.
/// When `report_json` is non-null it receives the per-check report.
///
/// # Safety
/// `atlas` must be a live handle; `passed` a valid pointer; `report_json` null or valid.
#[no_mangle]
pub unsafe extern "C" fn okpair_verify(
    atlas: *const OkpairAtlas,
    passed: *mut i32,
    report_json: *mut *mut c_char,
) -> OkpairStatus {
    guard(|| {
        let a = ref_arg(atlas, "atlas")?;
        let reports =
            okpair::cli::verify_reports(&a.inner).or_else(|e| fail(OkpairStatus::InvalidArgument, e))?;
        let ok = reports.iter().all(|r| r.passed());
        write_out(passed, i32::from(ok), "passed")?;
        if !report_json.is_null() {
            let body = json!({ "atlas": a.inner.name, "passed": ok, "reports": reports });
            report_json.write(c_string(body.to_string()));
        }
        Ok(())
    })
}

/// Integrates along the polyline `waypoints` (`2 * n_waypoints` doubles, re/im
/// interleaved) from `(x, y)` in chart `chart`. Parameters are given as
/// `n_params` names with `2 * n_params` interleaved values. A single waypoint
/// yields the one-sample trajectory.
///
/// # Safety
/// All pointers must be valid for the stated lengths; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn okpair_integrate(
    atlas: *const OkpairAtlas,
    chart: *const c_char,
    x_re: f64,
    x_im: f64,
    y_re: f64,
    y_im: f64,
    waypoints: *const f64,
    n_waypoints: usize,
    param_names: *const *const c_char,
    param_values: *const f64,
    n_params: usize,
    rtol: f64,
    atol: f64,
    out: *mut *mut OkpairTrajectory,
) -> OkpairStatus {
    guard(|| {
        let a = ref_arg(atlas, "atlas")?;
        let chart = str_arg(chart, "chart")?;
        if n_waypoints == 0 || waypoints.is_null() {
            return fail(OkpairStatus::InvalidArgument, "at least one waypoint is required");
        }
        let raw = std::slice::from_raw_parts(waypoints, 2 * n_waypoints);
        let pts: Vec<Complex64> = raw.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let mut params = BTreeMap::new();
        if n_params > 0 {
            if param_names.is_null() || param_values.is_null() {
                return fail(OkpairStatus::NullPointer, "parameter arrays are null");
            }
            let names = std::slice::from_raw_parts(param_names, n_params);
            let values = std::slice::from_raw_parts(param_values, 2 * n_params);
            for (i, &n) in names.iter().enumerate() {
                let name = str_arg(n, "parameter name")?;
                params.insert(name.to_string(), Complex64::new(values[2 * i], values[2 * i + 1]));
            }
        }
        let sys = compile_atlas(&a.inner).or_else(|e| fail(OkpairStatus::InvalidArgument, e.to_string()))?;
        let chart_index = sys
            .chart_index(chart)
            .map_or_else(|| fail(OkpairStatus::NotFound, format!("unknown chart `{chart}`")), Ok)?;
        let path = if pts.len() == 1 {
            TPath::stationary(pts[0])
        } else {
            TPath::new(pts.clone()).or_else(|e| fail(OkpairStatus::InvalidArgument, e.to_string()))?
        };
        let init = PhaseState {
            chart: chart_index,
            x: Complex64::new(x_re, x_im),
            y: Complex64::new(y_re, y_im),
            t: pts[0],
        };
        let opts = IntegrateOptions::with_tolerances(rtol, atol);
        let traj = integrate(&sys, &params, &path, init, &opts).or_else(|e| {
            let status = match e {
                okpair::integrator::IntegratorError::MissingParam(_)
                | okpair::integrator::IntegratorError::UnknownParam(_)
                | okpair::integrator::IntegratorError::BadTolerance { .. }
                | okpair::integrator::IntegratorError::BadPath(_) => OkpairStatus::InvalidArgument,
                _ => OkpairStatus::Integration,
            };
            fail(status, e.to_string())
        })?;
        write_out(out, Box::into_raw(Box::new(OkpairTrajectory { inner: traj })), "out")
    })
}

/// # Safety
/// `traj` must come from [`okpair_integrate`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn okpair_trajectory_free(traj: *mut OkpairTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of samples, or 0 for null.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn okpair_trajectory_len(traj: *const OkpairTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.samples.len())
}

/// Number of chart switches, or 0 for null.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn okpair_trajectory_switch_count(traj: *const OkpairTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.switches.len())
}

/// Copies sample `index` into `out`.
///
/// # Safety
/// `traj` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn okpair_trajectory_sample(
    traj: *const OkpairTrajectory,
    index: usize,
    out: *mut OkpairSample,
) -> OkpairStatus {
    guard(|| {
        let t = ref_arg(traj, "trajectory")?;
        let Some(s) = t.inner.samples.get(index) else {
            return fail(
                OkpairStatus::OutOfRange,
                format!("sample {index} of {}", t.inner.samples.len()),
            );
        };
        let sample = OkpairSample {
            t_re: s.t.re,
            t_im: s.t.im,
            x_re: s.x.re,
            x_im: s.x.im,
            y_re: s.y.re,
            y_im: s.y.im,
            h: s.h,
            err: s.err,
            chart: s.chart as u32,
        };
        write_out(out, sample, "out")
    })
}

/// Serializes a trajectory as JSON.
///
/// # Safety
/// `traj` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn okpair_trajectory_to_json(traj: *const OkpairTrajectory, out: *mut *mut c_char) -> OkpairStatus {
    guard(|| {
        let t = ref_arg(traj, "trajectory")?;
        write_out(out, c_string(t.inner.to_json()), "out")
    })
}

/// Classifies an intersection matrix given as JSON (`{"n":..,"entries":..}` or
/// an array of rows). Returns [`OkpairStatus::NotFound`] outside the catalog.
///
/// # Safety
/// `matrix_json` must be a NUL-terminated string and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn okpair_classify(matrix_json: *const c_char, out_json: *mut *mut c_char) -> OkpairStatus {
    guard(|| {
        let text = str_arg(matrix_json, "matrix_json")?;
        let m = match IntersectionMatrix::from_json(text) {
            Ok(m) => m,
            Err(first) => {
                let rows: Vec<Vec<i64>> =
                    serde_json::from_str(text).or_else(|_| fail(OkpairStatus::Parse, first.to_string()))?;
                IntersectionMatrix::new(rows).or_else(|e| fail(OkpairStatus::Parse, e.to_string()))?
            }
        };
        let Some(c) = classify(&m) else {
            return fail(OkpairStatus::NotFound, "matrix is not in the catalog");
        };
        let t = &c.root_type;
        let body = json!({
            "type": t.label,
            "kodaira": t.kodaira,
            "r": t.r,
            "dim": deformation_dim(t),
            "marks": t.marks,
            "kernel": kernel(&m),
            "painleve": t.painleve,
            "aliases": c.aliases,
        });
        write_out(out_json, c_string(body.to_string()), "out_json")
    })
}
