//! C ABI over the covcast library.
//!
//! Every fallible function returns a [`CovcastStatus`]. On failure the
//! message is kept per thread and read with [`covcast_last_error`]. Models are
//! opaque handles created by `covcast_model_load*` and released with
//! [`covcast_model_free`]. Quantile forecasts are row-major `horizon x 9`
//! arrays at levels 0.1, ..., 0.9.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use covcast::baselines::seasonal_naive;
use covcast::dataio::{Covariate, CovariateKind, TimeSeriesSample};
use covcast::evaluation::{mase, wql};
use covcast::model::{checkpoint, Forecaster};
use covcast::Error;

/// Number of quantile levels per forecast step.
pub const COVCAST_NUM_QUANTILES: usize = 9;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovcastStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Checkpoint = 4,
    Unsupported = 5,
    Numeric = 6,
    Internal = 7,
}

/// Opaque trained forecaster.
pub struct CovcastModel {
    inner: Forecaster,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(CovcastStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => CovcastStatus::Io,
            Error::Checkpoint(_) => CovcastStatus::Checkpoint,
            Error::Capability(_) => CovcastStatus::Unsupported,
            Error::NonFinite { .. }
            | Error::NonFiniteLoss { .. }
            | Error::Solver(_)
            | Error::UndefinedMetric(_) => CovcastStatus::Numeric,
            _ => CovcastStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(CovcastStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CovcastStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CovcastStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CovcastStatus::Internal
        }
    }
}

/// Borrows `len` values; a null pointer is allowed only when `len == 0`.
unsafe fn view<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure(CovcastStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn view_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure(CovcastStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn write_forecast(rows: &[[f64; 9]], out: &mut [f64]) {
    for (dst, row) in out.chunks_exact_mut(COVCAST_NUM_QUANTILES).zip(rows) {
        dst.copy_from_slice(row);
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn covcast_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a checkpoint file. `*out` receives a handle owned by the caller.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn covcast_model_load(path: *const c_char, out: *mut *mut CovcastModel) -> CovcastStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return Err(Failure(CovcastStatus::NullPointer, "path or out is null".into()));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| invalid("path is not UTF-8"))?;
        let inner = checkpoint::load(path)?;
        *out = Box::into_raw(Box::new(CovcastModel { inner }));
        Ok(())
    })
}

/// Loads a checkpoint from memory.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn covcast_model_load_bytes(
    data: *const u8,
    len: usize,
    out: *mut *mut CovcastModel,
) -> CovcastStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure(CovcastStatus::NullPointer, "out is null".into()));
        }
        let bytes = view(data, len, "data")?;
        let inner = checkpoint::from_bytes(bytes)?;
        *out = Box::into_raw(Box::new(CovcastModel { inner }));
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from `covcast_model_load*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn covcast_model_free(model: *mut CovcastModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of scalar parameters, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn covcast_model_num_parameters(model: *const CovcastModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.num_parameters())
}

/// Quantile forecast for one series.
///
/// `context` holds `context_len` values; `observed` may be null (all
/// observed) or hold `context_len` flags, non-zero meaning observed.
/// `covariates` is row-major `num_covariates x (context_len + horizon)`, each
/// row known over context and horizon. `out` receives `horizon x 9` values
/// sorted within each step.
///
/// # Safety
/// All non-null pointers must reference arrays of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn covcast_model_predict(
    model: *const CovcastModel,
    context: *const f64,
    observed: *const u8,
    context_len: usize,
    covariates: *const f64,
    num_covariates: usize,
    horizon: usize,
    period: usize,
    use_covariates: bool,
    out: *mut f64,
) -> CovcastStatus {
    guard(|| {
        let model = model
            .as_ref()
            .ok_or_else(|| Failure(CovcastStatus::NullPointer, "model is null".into()))?;
        if context_len == 0 || horizon == 0 {
            return Err(invalid("context_len and horizon must be positive"));
        }
        let n = context_len + horizon;
        let ctx = view(context, context_len, "context")?;
        let covs = view(covariates, num_covariates * n, "covariates")?;
        let out = view_mut(out, horizon * COVCAST_NUM_QUANTILES, "out")?;
        let mut target = ctx.to_vec();
        target.resize(n, 0.0);
        let mut sample = TimeSeriesSample::univariate("ffi", target, context_len, horizon, period.max(1));
        if !observed.is_null() {
            let flags = view(observed, context_len, "observed")?;
            for (m, &f) in sample.missing_mask.iter_mut().zip(flags) {
                *m = f != 0;
            }
        }
        for i in context_len..n {
            sample.missing_mask[i] = false;
        }
        sample.covariates = covs
            .chunks_exact(n)
            .enumerate()
            .map(|(i, row)| Covariate::new(format!("x{i}"), CovariateKind::PastAndFuture, row.to_vec()))
            .collect();
        sample.validate()?;
        let rows = model.inner.predict(&sample, use_covariates, true)?;
        write_forecast(&rows, out);
        Ok(())
    })
}

/// Seasonal naive forecast written as `horizon x 9` values.
///
/// # Safety
/// `context` must hold `context_len` values and `out` `horizon * 9`.
#[no_mangle]
pub unsafe extern "C" fn covcast_seasonal_naive(
    context: *const f64,
    context_len: usize,
    period: usize,
    horizon: usize,
    out: *mut f64,
) -> CovcastStatus {
    guard(|| {
        let ctx = view(context, context_len, "context")?;
        let out = view_mut(out, horizon * COVCAST_NUM_QUANTILES, "out")?;
        let rows = seasonal_naive(ctx, period, horizon)?;
        write_forecast(&rows, out);
        Ok(())
    })
}

/// Mean absolute scaled error of a point forecast against `truth`, scaled by
/// the in-sample seasonal naive error of `context`.
///
/// # Safety
/// `median` and `truth` must hold `len` values, `context` `context_len`.
#[no_mangle]
pub unsafe extern "C" fn covcast_mase(
    median: *const f64,
    truth: *const f64,
    len: usize,
    context: *const f64,
    context_len: usize,
    period: usize,
    out: *mut f64,
) -> CovcastStatus {
    guard(|| {
        let m = view(median, len, "median")?;
        let t = view(truth, len, "truth")?;
        let c = view(context, context_len, "context")?;
        let out = out
            .as_mut()
            .ok_or_else(|| Failure(CovcastStatus::NullPointer, "out is null".into()))?;
        *out = mase(m, t, c, period)?;
        Ok(())
    })
}

/// Weighted quantile loss of a `len x 9` forecast. Steps whose truth is
/// zero are excluded.
///
/// # Safety
/// `forecast` must hold `len * 9` values and `truth` `len`.
#[no_mangle]
pub unsafe extern "C" fn covcast_wql(
    forecast: *const f64,
    truth: *const f64,
    len: usize,
    out: *mut f64,
) -> CovcastStatus {
    guard(|| {
        let f = view(forecast, len * COVCAST_NUM_QUANTILES, "forecast")?;
        let t = view(truth, len, "truth")?;
        let out = out
            .as_mut()
            .ok_or_else(|| Failure(CovcastStatus::NullPointer, "out is null".into()))?;
        let rows: Vec<[f64; 9]> = f
            .chunks_exact(COVCAST_NUM_QUANTILES)
            .map(|c| c.try_into().expect("chunk of nine"))
            .collect();
        *out = wql(&rows, t)?;
        Ok(())
    })
}
