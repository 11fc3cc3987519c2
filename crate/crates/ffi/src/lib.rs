//! C ABI over the accident-detect library.
//!
//! Every fallible function returns an [`AdStatus`]; on failure a message
//! for the calling thread is available from [`ad_last_error_message`].
//! Models are opaque [`AdModel`] handles released with [`ad_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use accident_detect::cli::ModelCheckpoint;
use accident_detect::dataio::{TrafficWindow, FEATURES};
use accident_detect::evaluation::{auc, roc_curve, ConfusionMatrix};
use accident_detect::{Error, TrainedModel};

/// Number of raw feature values a window is flattened into.
pub const AD_FEATURE_COUNT: usize = 70;
const _: () = assert!(AD_FEATURE_COUNT == FEATURES);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Shape = 5,
    Panic = 6,
}

/// Trained model loaded from a checkpoint.
pub struct AdModel {
    model: TrainedModel,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AdMetrics {
    pub accuracy: f64,
    pub detection_rate: f64,
    pub false_alarm_rate: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AdStatus {
    match e {
        Error::Stage { source, .. } => status_of(source),
        Error::Io { .. } => AdStatus::Io,
        Error::Shape { .. } => AdStatus::Shape,
        Error::Csv(_)
        | Error::Json(_)
        | Error::Header { .. }
        | Error::Row { .. }
        | Error::CheckpointVersion { .. } => AdStatus::Parse,
        _ => AdStatus::InvalidArgument,
    }
}

struct Fail(AdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(AdStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            AdStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            AdStatus::Panic
        }
    }
}

/// Message for the last failed call on this thread, or NULL after a
/// success. Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ad_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Load a checkpoint file. On success `*out` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ad_model_load(path: *const c_char, out: *mut *mut AdModel) -> AdStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(AdStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let model = ModelCheckpoint::load(path)?.into_model();
        *out = Box::into_raw(Box::new(AdModel { model }));
        Ok(())
    })
}

/// Release a handle from [`ad_model_load`]. NULL is ignored.
///
/// # Safety
/// `model` must come from `ad_model_load` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ad_model_free(model: *mut AdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ad_model_threshold(model: *const AdModel, out: *mut f64) -> AdStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = m.model.threshold;
        Ok(())
    })
}

unsafe fn window_from(features: *const f64, len: usize) -> Result<TrafficWindow, Fail> {
    if features.is_null() {
        return Err(null("features"));
    }
    let slice = std::slice::from_raw_parts(features, len);
    Ok(TrafficWindow::from_features(slice, 0)?)
}

/// Accident probability for one unscaled window given as
/// [`AD_FEATURE_COUNT`] values: six 11-minute blocks (speed_up,
/// speed_down, occ_up, occ_down, vol_up, vol_down) then weather, weekday,
/// am_peak, pm_peak.
///
/// # Safety
/// `features` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ad_model_predict(
    model: *const AdModel,
    features: *const f64,
    len: usize,
    out: *mut f64,
) -> AdStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let w = window_from(features, len)?;
        *out = accident_detect::predict(&m.model, &w)?;
        Ok(())
    })
}

/// 1 if the probability reaches the model threshold, else 0.
///
/// # Safety
/// As [`ad_model_predict`].
#[no_mangle]
pub unsafe extern "C" fn ad_model_classify(
    model: *const AdModel,
    features: *const f64,
    len: usize,
    out: *mut u8,
) -> AdStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let w = window_from(features, len)?;
        *out = accident_detect::classify(&m.model, &w)?;
        Ok(())
    })
}

/// Accuracy, detection rate and false-alarm rate (percent) from a
/// confusion matrix.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ad_metrics(
    tp: u64,
    fp: u64,
    fn_: u64,
    tn: u64,
    out: *mut AdMetrics,
) -> AdStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let cm = ConfusionMatrix::new(tp, fp, fn_, tn);
        *out = AdMetrics {
            accuracy: cm.accuracy()?,
            detection_rate: cm.detection_rate()?,
            false_alarm_rate: cm.false_alarm_rate()?,
        };
        Ok(())
    })
}

/// Area under the ROC curve of `n` scores with 0/1 labels.
///
/// # Safety
/// `scores` and `labels` must point to `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ad_auc(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
) -> AdStatus {
    guard(|| {
        if scores.is_null() {
            return Err(null("scores"));
        }
        if labels.is_null() {
            return Err(null("labels"));
        }
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = std::slice::from_raw_parts(scores, n);
        let l = std::slice::from_raw_parts(labels, n);
        *out = auc(&roc_curve(s, l)?)?;
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ad_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
