//! C ABI over `tmv`.
//!
//! Every call returns a [`TmvStatus`] and writes results through pointer
//! arguments. After a failure, [`tmv_last_error`] describes it. Handles are
//! opaque and must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::{ptr, slice};

use tmv::decompose::{decompose, DecomposeConfig, Decomposition};
use tmv::error::TmvError;
use tmv::fitting::{fit_all, FitConfig, FitResult, SampledCurve};
use tmv::geometry::{arcdist, ArcConfig};
use tmv::model::{ModeSpec, SamplingGrid};
use tmv::workbench::io::load_curves;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TmvStatus {
    Ok = 0,
    InvalidArgument = 1,
    Parse = 2,
    Fit = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

/// Sampled curves on a shared grid.
pub struct TmvStudy {
    grid: SamplingGrid,
    curves: Vec<SampledCurve>,
}

/// Fitted template and per-curve parameters.
pub struct TmvFit {
    fit: FitResult,
}

/// Per-mode shares of a fitted study.
pub struct TmvDecomposition {
    inner: Decomposition,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

struct Failure {
    status: TmvStatus,
    message: String,
}

impl From<TmvError> for Failure {
    fn from(e: TmvError) -> Self {
        let status = match &e {
            TmvError::Parse { .. } | TmvError::GridMismatch(_) | TmvError::Json(_) => TmvStatus::Parse,
            TmvError::Io(_) => TmvStatus::Io,
            TmvError::FitNotConverged { .. } | TmvError::NoConvergence(_) | TmvError::BootstrapAborted { .. } => TmvStatus::Fit,
            TmvError::NonConvergent { .. }
            | TmvError::NonInvertible { .. }
            | TmvError::SearchBoxTooSmall { .. }
            | TmvError::NotSeparable { .. } => TmvStatus::Numerical,
            _ => TmvStatus::InvalidArgument,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        status: TmvStatus::InvalidArgument,
        message: message.into(),
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TmvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            TmvStatus::Ok
        }
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {message}"));
            TmvStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| invalid(format!("{name} is null")))
}

unsafe fn write_out<T>(p: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(invalid(format!("{name} is null")));
    }
    p.write(value);
    Ok(())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(invalid(format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{name} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(invalid(format!("{name} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// Writes the required length to `len`, then the values if `buf` holds them.
/// A null `buf` with `cap == 0` is a size query.
unsafe fn copy_out(values: &[f64], buf: *mut f64, cap: usize, len: *mut usize) -> Result<(), Failure> {
    write_out(len, values.len(), "len")?;
    if buf.is_null() && cap == 0 {
        return Ok(());
    }
    if buf.is_null() {
        return Err(invalid("buf is null"));
    }
    if cap < values.len() {
        return Err(invalid(format!("buffer holds {cap} values, {} needed", values.len())));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tmv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next `tmv_*` call on the same thread.
#[no_mangle]
pub extern "C" fn tmv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Load a `curve_id,t,z[,weight]` CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tmv_study_load_csv(path: *const c_char, out: *mut *mut TmvStudy) -> TmvStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let (grid, curves) = load_curves(path)?;
        write_out(out, Box::into_raw(Box::new(TmvStudy { grid, curves })), "out")
    })
}

/// Build a study from `n_curves` rows of `n_grid` values, row-major.
/// `weights` may be null for unit weights.
///
/// # Safety
/// `grid` must hold `n_grid` values, `values` `n_curves * n_grid` values and
/// `weights`, if not null, `n_curves` values. `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tmv_study_from_arrays(
    grid: *const f64,
    n_grid: usize,
    values: *const f64,
    n_curves: usize,
    weights: *const f64,
    out: *mut *mut TmvStudy,
) -> TmvStatus {
    guard(|| {
        let grid = SamplingGrid::new(slice_arg(grid, n_grid, "grid")?.to_vec())?;
        let total = n_curves.checked_mul(n_grid).ok_or_else(|| invalid("size overflow"))?;
        let values = slice_arg(values, total, "values")?;
        let weights = if weights.is_null() {
            vec![1.0; n_curves]
        } else {
            slice_arg(weights, n_curves, "weights")?.to_vec()
        };
        let curves = values
            .chunks(n_grid.max(1))
            .zip(weights)
            .enumerate()
            .map(|(i, (z, w))| SampledCurve::new(format!("c{i}"), z.to_vec(), w))
            .collect::<Result<Vec<_>, _>>()?;
        if curves.is_empty() {
            return Err(invalid("no curves"));
        }
        write_out(out, Box::into_raw(Box::new(TmvStudy { grid, curves })), "out")
    })
}

/// # Safety
/// `study` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tmv_study_curve_count(study: *const TmvStudy, out: *mut usize) -> TmvStatus {
    guard(|| write_out(out, handle(study, "study")?.curves.len(), "out"))
}

/// # Safety
/// `study` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tmv_study_free(study: *mut TmvStudy) {
    if !study.is_null() {
        drop(Box::from_raw(study));
    }
}

/// Fit a polynomial template of `degree` and per-curve parameters. `modes`
/// is a comma-separated list of `gen_spec`, `horizontal`, `vertical`; null
/// selects all three.
///
/// # Safety
/// `study` must be a live handle, `modes` null or NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tmv_fit(
    study: *const TmvStudy,
    modes: *const c_char,
    degree: usize,
    seed: u64,
    out: *mut *mut TmvFit,
) -> TmvStatus {
    guard(|| {
        let study = handle(study, "study")?;
        let modes = if modes.is_null() {
            ModeSpec::shape_invariant()
        } else {
            str_arg(modes, "modes")?
                .split(',')
                .map(|m| ModeSpec::from_name(m.trim()))
                .collect::<Result<Vec<_>, _>>()?
        };
        let cfg = FitConfig {
            degree,
            seed,
            ..FitConfig::default()
        };
        let fit = fit_all(&study.curves, &study.grid, modes, &cfg)?;
        write_out(out, Box::into_raw(Box::new(TmvFit { fit })), "out")
    })
}

/// Template coefficients in ascending powers.
///
/// # Safety
/// `fit` must be a live handle, `buf` null or writable for `cap` values,
/// `len` writable.
#[no_mangle]
pub unsafe extern "C" fn tmv_fit_template_coefficients(fit: *const TmvFit, buf: *mut f64, cap: usize, len: *mut usize) -> TmvStatus {
    guard(|| copy_out(handle(fit, "fit")?.fit.template().coefficients(), buf, cap, len))
}

/// Parameter vector of curve `curve`, in mode order.
///
/// # Safety
/// As for [`tmv_fit_template_coefficients`].
#[no_mangle]
pub unsafe extern "C" fn tmv_fit_theta(fit: *const TmvFit, curve: usize, buf: *mut f64, cap: usize, len: *mut usize) -> TmvStatus {
    guard(|| {
        let fit = &handle(fit, "fit")?.fit;
        let c = fit
            .curves
            .get(curve)
            .ok_or_else(|| invalid(format!("curve {curve} out of range ({} curves)", fit.curves.len())))?;
        copy_out(c.theta.as_slice(), buf, cap, len)
    })
}

/// Unweighted residual sum of squares.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tmv_fit_sse(fit: *const TmvFit, out: *mut f64) -> TmvStatus {
    guard(|| write_out(out, handle(fit, "fit")?.fit.sse(), "out"))
}

/// # Safety
/// `fit` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tmv_fit_free(fit: *mut TmvFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Arc length along mode `mode` of the fitted model between parameter values
/// `a` and `b`, other parameters held at `fixed` (`n_fixed` values).
///
/// # Safety
/// `fit` must be a live handle, `fixed` readable for `n_fixed` values, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tmv_arcdist(
    fit: *const TmvFit,
    mode: usize,
    a: f64,
    b: f64,
    fixed: *const f64,
    n_fixed: usize,
    out: *mut f64,
) -> TmvStatus {
    guard(|| {
        let model = &handle(fit, "fit")?.fit.model;
        let fixed = slice_arg(fixed, n_fixed, "fixed")?;
        let d = arcdist(model, mode, a, b, fixed, &ArcConfig::default())?;
        write_out(out, d, "out")
    })
}

/// Decompose the fitted variation with blend weight `gamma` and default
/// origin selection.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tmv_decompose(fit: *const TmvFit, gamma: f64, out: *mut *mut TmvDecomposition) -> TmvStatus {
    guard(|| {
        let fit = &handle(fit, "fit")?.fit;
        let cfg = DecomposeConfig {
            gamma,
            ..DecomposeConfig::default()
        };
        let inner = decompose(fit, &cfg)?;
        write_out(out, Box::into_raw(Box::new(TmvDecomposition { inner })), "out")
    })
}

unsafe fn mode_value(d: *const TmvDecomposition, mode: *const c_char, pick: impl Fn(&Decomposition, Option<&str>) -> Option<f64>) -> Result<f64, Failure> {
    let d = &handle(d, "decomposition")?.inner;
    let mode = str_arg(mode, "mode")?;
    let key = (mode != "total").then_some(mode);
    pick(d, key).ok_or_else(|| invalid(format!("unknown mode `{mode}`")))
}

/// Percentage share of mode `mode`, or of all modes for `"total"`.
///
/// # Safety
/// `d` must be a live handle, `mode` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tmv_decomposition_rss(d: *const TmvDecomposition, mode: *const c_char, out: *mut f64) -> TmvStatus {
    guard(|| {
        let v = mode_value(d, mode, |d, k| match k {
            Some(k) => d.rss_per_mode.get(k).copied(),
            None => Some(d.rss_total),
        })?;
        write_out(out, v, "out")
    })
}

/// Model sum of squares of mode `mode`, or of all modes for `"total"`.
///
/// # Safety
/// As for [`tmv_decomposition_rss`].
#[no_mangle]
pub unsafe extern "C" fn tmv_decomposition_ssm(d: *const TmvDecomposition, mode: *const c_char, out: *mut f64) -> TmvStatus {
    guard(|| {
        let v = mode_value(d, mode, |d, k| match k {
            Some(k) => d.ssm_per_mode.get(k).copied(),
            None => Some(d.ssm_total),
        })?;
        write_out(out, v, "out")
    })
}

/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tmv_decomposition_sse(d: *const TmvDecomposition, out: *mut f64) -> TmvStatus {
    guard(|| write_out(out, handle(d, "decomposition")?.inner.sse, "out"))
}

/// # Safety
/// `d` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tmv_decomposition_free(d: *mut TmvDecomposition) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}
