//! C bindings. Models are opaque handles; every call returns an
//! [`HsStatus`] and stashes a message retrievable with
//! [`hs_last_error_message`] on failure. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hatespeech::classifier::TrainedModel;
use hatespeech::ensemble::{check_member_count, combine_votes, DecisionMethod};
use hatespeech::eval::{per_class_metrics, ConfusionMatrix};
use hatespeech::features::TendencyProfile;
use hatespeech::{persist, ClassLabel, Error};

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    ModelFormat = 4,
    Internal = 5,
}

/// A loaded classifier. Only ever handled through a pointer.
pub struct HsModel {
    inner: TrainedModel,
}

/// Output of [`hs_ensemble_combine`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HsDecision {
    /// Class ordinal: 0 neutral, 1 racism, 2 sexism.
    pub label: u32,
    /// 1 when a majority vote decided, 0 when the most confident member did.
    pub by_vote: u32,
    /// Deciding member for the confidence fallback, or -1.
    pub decisive_member: i32,
}

/// Per-class and weighted scores from a 3x3 confusion matrix.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HsMetrics {
    pub precision: [f64; 3],
    pub recall: [f64; 3],
    pub f_score: [f64; 3],
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f: f64,
    pub accuracy: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> HsStatus {
    match e {
        Error::Io { .. } => HsStatus::Io,
        Error::ModelFormat(_) => HsStatus::ModelFormat,
        Error::InvalidArgument(_) | Error::Shape(_) | Error::Validation(_) => {
            HsStatus::InvalidArgument
        }
        _ => HsStatus::Internal,
    }
}

struct Fail(HsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HsStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(HsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(HsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn label_of(ordinal: u32) -> Result<ClassLabel, Fail> {
    ClassLabel::from_index(ordinal as usize).ok_or_else(|| {
        Fail(
            HsStatus::InvalidArgument,
            format!("class ordinal {ordinal} out of range"),
        )
    })
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a model file. On success `*out` owns a handle to release with
/// [`hs_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_model_load(path: *const c_char, out: *mut *mut HsModel) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = c_str(path, "path")?;
        let inner = persist::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(HsModel { inner }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from [`hs_model_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hs_model_free(model: *mut HsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes the model's feature-combination code (0 O, 1 NS, 2 NR, 3 RS, 4 NRS).
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_model_combination(model: *const HsModel, out: *mut u32) -> HsStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = u32::from(model.inner.combination.code());
        Ok(())
    })
}

/// Classifies one tweet. `tendency` holds the author's neutral, racism and
/// sexism shares; pass null to use the training priors. `probs` receives
/// three class probabilities in ordinal order.
///
/// # Safety
/// `model` must be a live handle, `text` NUL-terminated, `tendency` null or
/// three readable doubles, and `probs` three writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_model_predict_text(
    model: *const HsModel,
    text: *const c_char,
    tendency: *const f64,
    probs: *mut f64,
) -> HsStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let text = c_str(text, "text")?;
        if probs.is_null() {
            return Err(null("probs"));
        }
        let profile = if tendency.is_null() {
            model.inner.priors
        } else {
            let t = std::slice::from_raw_parts(tendency, 3);
            let sum: f64 = t.iter().sum();
            if t.iter().any(|v| !(0.0..=1.0).contains(v)) || (sum - 1.0).abs() > 1e-6 {
                return Err(Fail(
                    HsStatus::InvalidArgument,
                    "tendency must be a distribution".into(),
                ));
            }
            TendencyProfile {
                neutral: t[0],
                racism: t[1],
                sexism: t[2],
            }
        };
        let dist = model.inner.predict_text(text, &profile)?;
        std::slice::from_raw_parts_mut(probs, 3).copy_from_slice(&dist.0);
        Ok(())
    })
}

/// Combines 3 or 5 member votes. `labels[i]` is member i's class ordinal and
/// `confidences[i]` the probability it gave that class.
///
/// # Safety
/// `labels` and `confidences` must hold `n` readable elements and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_ensemble_combine(
    labels: *const u32,
    confidences: *const f64,
    n: usize,
    out: *mut HsDecision,
) -> HsStatus {
    guard(|| {
        if labels.is_null() || confidences.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        check_member_count(n)?;
        let labels = std::slice::from_raw_parts(labels, n);
        let confidences = std::slice::from_raw_parts(confidences, n);
        let votes = labels
            .iter()
            .zip(confidences)
            .map(|(&l, &c)| Ok((label_of(l)?, c)))
            .collect::<Result<Vec<_>, Fail>>()?;
        let (label, method, member) = combine_votes(&votes);
        *out = HsDecision {
            label: label.index() as u32,
            by_vote: u32::from(method == DecisionMethod::Vote),
            decisive_member: member.map_or(-1, |m| m as i32),
        };
        Ok(())
    })
}

/// Scores a row-major 3x3 confusion matrix (rows are gold classes).
///
/// # Safety
/// `counts` must hold nine readable values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_metrics_from_confusion(
    counts: *const u64,
    out: *mut HsMetrics,
) -> HsStatus {
    guard(|| {
        if counts.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let c = std::slice::from_raw_parts(counts, 9);
        let cm = ConfusionMatrix([[c[0], c[1], c[2]], [c[3], c[4], c[5]], [c[6], c[7], c[8]]]);
        if cm.total() == 0 {
            return Err(Fail(
                HsStatus::InvalidArgument,
                "confusion matrix is empty".into(),
            ));
        }
        let r = per_class_metrics(&cm);
        *out = HsMetrics {
            precision: r.per_class.map(|m| m.precision),
            recall: r.per_class.map(|m| m.recall),
            f_score: r.per_class.map(|m| m.f_score),
            weighted_precision: r.precision,
            weighted_recall: r.recall,
            weighted_f: r.f_score,
            accuracy: r.accuracy,
        };
        Ok(())
    })
}
