//! C interface to the covshift detector.
//!
//! Models are opaque handles created by `covshift_fit` or
//! `covshift_model_load` and released with `covshift_model_free`. Every
//! fallible call returns a `CovshiftStatus`; on failure the message is
//! available from `covshift_last_error_message` on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use covshift::bounds::{solve_bound, BoundQuery};
use covshift::detector::{self, DetectorModel};
use covshift::scores::{ConfidenceFunction, ScoreSample};
use covshift::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovshiftStatus {
    Ok = 0,
    InvalidInput = 1,
    Parse = 2,
    KappaMismatch = 3,
    Version = 4,
    Model = 5,
    Io = 6,
    Json = 7,
    NullPointer = 8,
    Panic = 9,
}

/// Opaque fitted detector.
pub struct CovshiftModel {
    inner: DetectorModel,
}

/// Outcome of `covshift_detect`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CovshiftReport {
    pub v_statistic: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub shift_detected: bool,
    pub window_size: usize,
    pub violated_count: usize,
}

/// One fitted target coverage.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CovshiftCoveragePair {
    pub c_target: f64,
    pub b_star: f64,
    pub theta: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CovshiftStatus {
    match e {
        Error::InvalidInput(_) => CovshiftStatus::InvalidInput,
        Error::Parse { .. } => CovshiftStatus::Parse,
        Error::KappaMismatch { .. } => CovshiftStatus::KappaMismatch,
        Error::Version { .. } => CovshiftStatus::Version,
        Error::Model(_) => CovshiftStatus::Model,
        Error::Io { .. } => CovshiftStatus::Io,
        Error::Json(_) => CovshiftStatus::Json,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CovshiftStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CovshiftStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_last_error(format!("{what} must not be NULL"));
            CovshiftStatus::NullPointer
        }
        Err(_) => {
            set_last_error("internal panic".to_string());
            CovshiftStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &'static str) -> Result<*const T, Fail> {
    if p.is_null() {
        Err(Fail::Null(what))
    } else {
        Ok(p)
    }
}

/// # Safety
/// `data` must point to `len` readable doubles (or be NULL when `len` is 0).
unsafe fn slice<'a>(data: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    Ok(std::slice::from_raw_parts(non_null(data, what)?, len))
}

/// # Safety
/// `s` must be NULL or a NUL-terminated string.
unsafe fn string(s: *const c_char, what: &'static str) -> Result<String, Fail> {
    let s = CStr::from_ptr(non_null(s, what)?);
    s.to_str()
        .map(str::to_owned)
        .map_err(|_| Fail::Lib(Error::InvalidInput(format!("{what} is not valid UTF-8"))))
}

/// Message of the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn covshift_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Fit a detector on `len` training scores.
///
/// `kappa` names the confidence function that produced the scores
/// (`"sr"`, `"entropy"` or `"raw"`); NULL means `"entropy"`.
///
/// # Safety
/// `scores` must point to `len` doubles; `kappa` must be NULL or a
/// NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn covshift_fit(
    scores: *const f64,
    len: usize,
    kappa: *const c_char,
    delta: f64,
    coverage_count: usize,
    out: *mut *mut CovshiftModel,
) -> CovshiftStatus {
    guard(|| {
        non_null(out, "out")?;
        let cf = if kappa.is_null() {
            ConfidenceFunction::OneMinusEntropy
        } else {
            string(kappa, "kappa")?.parse()?
        };
        let sample = ScoreSample::new(slice(scores, len, "scores")?.to_vec(), cf.name(), "ffi")?;
        let inner = detector::fit(&sample, delta, coverage_count)?;
        *out = Box::into_raw(Box::new(CovshiftModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn covshift_model_load(
    path: *const c_char,
    out: *mut *mut CovshiftModel,
) -> CovshiftStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = PathBuf::from(string(path, "path")?);
        let inner = detector::load_model(&path)?;
        *out = Box::into_raw(Box::new(CovshiftModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn covshift_model_save(
    model: *const CovshiftModel,
    path: *const c_char,
) -> CovshiftStatus {
    guard(|| {
        let model = &*non_null(model, "model")?;
        let path = PathBuf::from(string(path, "path")?);
        detector::save_model(&model.inner, &path)?;
        Ok(())
    })
}

/// Number of fitted target coverages, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn covshift_model_coverage_count(model: *const CovshiftModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.pairs.len())
}

/// Training-sample size the model was fitted on, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn covshift_model_training_size(model: *const CovshiftModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.m)
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn covshift_model_pair(
    model: *const CovshiftModel,
    index: usize,
    out: *mut CovshiftCoveragePair,
) -> CovshiftStatus {
    guard(|| {
        let model = &*non_null(model, "model")?;
        non_null(out, "out")?;
        let p = model.inner.pairs.get(index).ok_or_else(|| {
            Error::InvalidInput(format!(
                "coverage index {index} out of range ({} pairs)",
                model.inner.pairs.len()
            ))
        })?;
        *out = CovshiftCoveragePair {
            c_target: p.c_target,
            b_star: p.b_star,
            theta: p.theta,
        };
        Ok(())
    })
}

/// Test a window of `len` scores, computed with the model's confidence
/// function. Safe to call concurrently on the same handle.
///
/// # Safety
/// `model` must be a live handle; `window` must point to `len` doubles;
/// `report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn covshift_detect(
    model: *const CovshiftModel,
    window: *const f64,
    len: usize,
    alpha: f64,
    report: *mut CovshiftReport,
) -> CovshiftStatus {
    guard(|| {
        let model = &*non_null(model, "model")?;
        non_null(report, "report")?;
        let w = ScoreSample::new(
            slice(window, len, "window")?.to_vec(),
            model.inner.kappa_name.clone(),
            "ffi",
        )?;
        let r = detector::detect(&model.inner, &w, alpha)?;
        *report = CovshiftReport {
            v_statistic: r.v_statistic,
            t_statistic: r.t_statistic,
            p_value: r.p_value,
            shift_detected: r.shift_detected,
            window_size: r.window_size,
            violated_count: r.per_coverage.iter().filter(|c| c.violated).count(),
        };
        Ok(())
    })
}

/// Release a handle. NULL is ignored.
///
/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn covshift_model_free(model: *mut CovshiftModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Binomial-tail lower bound on coverage for `successes` out of `m`.
///
/// # Safety
/// `b_star` must be writable; `satisfiable` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn covshift_solve_bound(
    m: u64,
    successes: u64,
    delta: f64,
    b_star: *mut f64,
    satisfiable: *mut bool,
) -> CovshiftStatus {
    guard(|| {
        non_null(b_star, "b_star")?;
        let r = solve_bound(BoundQuery {
            m,
            successes,
            delta,
        })?;
        *b_star = r.b_star;
        if !satisfiable.is_null() {
            *satisfiable = r.satisfiable;
        }
        Ok(())
    })
}
