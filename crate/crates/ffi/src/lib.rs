//! C interface to `ustat`.
//!
//! Objects are opaque handles created by `ust_*` constructors and released
//! with the matching `ust_*_free`. Every fallible function returns a
//! [`UstStatus`]; on failure the message is available from
//! [`ust_last_error`] on the same thread.
//!
//! Processes, kernels and experiments are described by the same TOML
//! documents the command-line tool reads (`[process]`, `[kernel]`,
//! `[experiment]` tables).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ustat::config::FileConfig;
use ustat::io::write_atomic;
use ustat::{ConvergenceReport, Error, Kernel, SamplePath};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UstStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Config = 3,
    Infeasible = 4,
    Io = 5,
    Panic = 6,
}

/// A sample path.
pub struct UstPath(SamplePath);

/// A kernel, possibly truncated.
pub struct UstKernel(Kernel);

/// Result of a convergence experiment.
pub struct UstReport(ConvergenceReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> UstStatus {
    match e {
        Error::Domain(_) => UstStatus::Domain,
        Error::Config { .. } | Error::Parse { .. } => UstStatus::Config,
        Error::Infeasible(_) => UstStatus::Infeasible,
        Error::Io { .. } => UstStatus::Io,
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> UstStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UstStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            UstStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            UstStatus::Panic
        }
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::domain(format!("{what} is not valid UTF-8"))))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn parse_config(text: &str) -> Result<FileConfig, Error> {
    FileConfig::parse(text, Path::new("<config>"), &[])
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ust_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Simulates `experiment.n` points of `[process]` with `experiment.seed`.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ust_path_simulate(config_toml: *const c_char, out: *mut *mut UstPath) -> UstStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let cfg = parse_config(c_str(config_toml, "config_toml")?)?;
        let path = cfg.load_path(None)?;
        *out = Box::into_raw(Box::new(UstPath(path)));
        Ok(())
    })
}

/// Builds a path from `n` points of dimension `dim`, stored row-major.
///
/// # Safety
/// `values` must hold `n * dim` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ust_path_from_values(
    values: *const f64,
    n: usize,
    dim: usize,
    out: *mut *mut UstPath,
) -> UstStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if dim == 0 {
            return Err(Error::domain("dimension must be at least 1").into());
        }
        let total = n
            .checked_mul(dim)
            .ok_or_else(|| Error::domain("n * dim overflows"))?;
        let data = slice(values, total, "values")?;
        let points = data
            .chunks(dim)
            .map(|c| ustat::Point::new(c.to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        let path = SamplePath::new(points, 0, None, "external")?;
        *out = Box::into_raw(Box::new(UstPath(path)));
        Ok(())
    })
}

/// Number of points, 0 for NULL.
///
/// # Safety
/// `path` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ust_path_len(path: *const UstPath) -> usize {
    path.as_ref().map_or(0, |p| p.0.len())
}

/// Point dimension, 0 for NULL.
///
/// # Safety
/// `path` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ust_path_dim(path: *const UstPath) -> usize {
    path.as_ref().map_or(0, |p| p.0.dim())
}

/// Latent mixture component of a simulated path, or -1.
///
/// # Safety
/// `path` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ust_path_latent_component(path: *const UstPath) -> i64 {
    path.as_ref()
        .and_then(|p| p.0.latent_component)
        .map_or(-1, |k| k as i64)
}

/// Copies the coordinates row-major into `out`, which holds `cap` doubles.
///
/// # Safety
/// `path` must be a live handle and `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn ust_path_values(path: *const UstPath, out: *mut f64, cap: usize) -> UstStatus {
    guard(|| {
        let p = &deref(path, "path")?.0;
        let need = p.len() * p.dim();
        if cap < need {
            return Err(Error::domain(format!("buffer holds {cap} values, need {need}")).into());
        }
        let dst = slice_mut(out, need, "out")?;
        for (chunk, pt) in dst.chunks_mut(p.dim()).zip(p.points()) {
            chunk.copy_from_slice(pt.coords());
        }
        Ok(())
    })
}

/// # Safety
/// `path` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ust_path_free(path: *mut UstPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Builds the `[kernel]` table, truncated at `experiment.truncation` when set.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ust_kernel_from_config(config_toml: *const c_char, out: *mut *mut UstKernel) -> UstStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let cfg = parse_config(c_str(config_toml, "config_toml")?)?;
        *out = Box::into_raw(Box::new(UstKernel(cfg.build_kernel()?)));
        Ok(())
    })
}

/// Kernel order, 0 for NULL.
///
/// # Safety
/// `kernel` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ust_kernel_order(kernel: *const UstKernel) -> usize {
    kernel.as_ref().map_or(0, |k| k.0.order())
}

/// # Safety
/// `kernel` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ust_kernel_free(kernel: *mut UstKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

unsafe fn with_pair<F>(path: *const UstPath, kernel: *const UstKernel, out: *mut f64, f: F) -> UstStatus
where
    F: FnOnce(&SamplePath, &Kernel) -> Result<f64, Error>,
{
    guard(|| {
        let out = out_ref(out, "out")?;
        let p = &deref(path, "path")?.0;
        let k = &deref(kernel, "kernel")?.0;
        *out = f(p, k)?;
        Ok(())
    })
}

/// Exact U-statistic.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ust_u_statistic(path: *const UstPath, kernel: *const UstKernel, out: *mut f64) -> UstStatus {
    with_pair(path, kernel, out, |p, k| {
        ustat::engine::check_exact_kernel(p.len(), k)?;
        ustat::u_statistic(p, k)
    })
}

/// V-statistic (all `n^m` index tuples).
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ust_v_statistic(path: *const UstPath, kernel: *const UstKernel, out: *mut f64) -> UstStatus {
    with_pair(path, kernel, out, ustat::v_statistic)
}

/// Incomplete U-statistic over `b` uniformly drawn increasing tuples.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ust_incomplete_u_statistic(
    path: *const UstPath,
    kernel: *const UstKernel,
    b: usize,
    seed: u64,
    out: *mut f64,
) -> UstStatus {
    with_pair(path, kernel, out, |p, k| ustat::incomplete_u_statistic(p, k, b, seed))
}

/// Exact U-statistics of the prefixes listed in `checkpoints`; writes
/// `len` values to `out`.
///
/// # Safety
/// Handles must be live; `checkpoints` and `out` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn ust_prefix_u_statistics(
    path: *const UstPath,
    kernel: *const UstKernel,
    checkpoints: *const usize,
    len: usize,
    out: *mut f64,
) -> UstStatus {
    guard(|| {
        let p = &deref(path, "path")?.0;
        let k = &deref(kernel, "kernel")?.0;
        let cks = slice(checkpoints, len, "checkpoints")?;
        let dst = slice_mut(out, len, "out")?;
        if let Some(&last) = cks.iter().max() {
            ustat::engine::check_exact_kernel(last, k)?;
        }
        let series = ustat::prefix_u_statistics(p, k, cks)?;
        dst.copy_from_slice(&series.values);
        Ok(())
    })
}

/// Limit of the U-statistic for this path: closed form when available,
/// Monte Carlo with `experiment.mc_samples` draws otherwise.
///
/// # Safety
/// `config_toml` must be NUL-terminated, handles live, `value` valid;
/// `std_error` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ust_estimate_limit(
    config_toml: *const c_char,
    path: *const UstPath,
    kernel: *const UstKernel,
    value: *mut f64,
    std_error: *mut f64,
) -> UstStatus {
    guard(|| {
        let value = out_ref(value, "value")?;
        let cfg = parse_config(c_str(config_toml, "config_toml")?)?;
        let p = &deref(path, "path")?.0;
        let k = &deref(kernel, "kernel")?.0;
        let model = cfg.limit_model(p)?;
        let est = ustat::estimate_limit(&model, k, cfg.experiment.mc_samples, cfg.experiment.seed)?;
        *value = est.value;
        if let Some(se) = std_error.as_mut() {
            *se = est.std_error;
        }
        Ok(())
    })
}

/// Runs the replicated convergence experiment described by the document.
///
/// # Safety
/// `config_toml` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ust_converge(config_toml: *const c_char, out: *mut *mut UstReport) -> UstStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let cfg = parse_config(c_str(config_toml, "config_toml")?)?;
        let report = ustat::convergence_experiment(&cfg.experiment_config()?)?;
        *out = Box::into_raw(Box::new(UstReport(report)));
        Ok(())
    })
}

/// Number of checkpoints in the report, 0 for NULL.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ust_report_len(report: *const UstReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.checkpoints.len())
}

/// Copies the `L^p` error per checkpoint into `out` (`cap` doubles).
///
/// # Safety
/// `report` must be live and `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn ust_report_lp_error(report: *const UstReport, out: *mut f64, cap: usize) -> UstStatus {
    guard(|| {
        let r = &deref(report, "report")?.0;
        let need = r.lp_error.len();
        if cap < need {
            return Err(Error::domain(format!("buffer holds {cap} values, need {need}")).into());
        }
        slice_mut(out, need, "out")?.copy_from_slice(&r.lp_error);
        Ok(())
    })
}

/// Writes the report CSV to `file` atomically.
///
/// # Safety
/// `report` must be live and `file` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ust_report_write_csv(report: *const UstReport, file: *const c_char) -> UstStatus {
    guard(|| {
        let r = &deref(report, "report")?.0;
        let file = c_str(file, "file")?;
        write_atomic(Path::new(file), |w| r.write_csv(w))?;
        Ok(())
    })
}

/// # Safety
/// `report` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ust_report_free(report: *mut UstReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
