//! C ABI for the m3fair library.
//!
//! Every function returns an [`M3fStatus`]; on failure the message is
//! available from [`m3f_last_error_message`] on the same thread. Arrays are
//! passed as pointer + length and outputs are written into caller-owned
//! buffers, except for strings returned by [`m3f_run_experiment_json`],
//! which must be released with [`m3f_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use m3fair::data::{load_csv, GroupAssignment};
use m3fair::metrics::{self, FairnessReport, PredictionSet};
use m3fair::reweight::{self, LevelWeightConfig, SampleWeights};
use m3fair::{Dataset, Error, ExperimentConfig};

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum M3fStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    InvalidData = 5,
    UndefinedMetric = 6,
    UnreachableCell = 7,
    Fit = 8,
    Panic = 9,
}

/// Opaque handle to a loaded dataset.
pub struct M3fDataset(Dataset);

/// Fairness and performance metrics for one attribute.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct M3fFairness {
    pub acc: f64,
    pub auroc: f64,
    pub auprc: f64,
    /// `INFINITY` when the privileged group has no predicted positives.
    pub di: f64,
    pub spd: f64,
    pub aod: f64,
    pub eod: f64,
    pub partial_support: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(M3fStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::Io { .. } => M3fStatus::Io,
            Error::Csv(_) | Error::Json(_) | Error::UnparseableNumber { .. } => M3fStatus::Parse,
            Error::UndefinedMetric(_) => M3fStatus::UndefinedMetric,
            Error::UnreachableCell { .. } => M3fStatus::UnreachableCell,
            Error::SingleClass => M3fStatus::Fit,
            Error::InvalidConfig(_) | Error::InvalidWeights(_) | Error::InvalidLevelWeights(_) => {
                M3fStatus::InvalidArgument
            }
            _ => M3fStatus::InvalidData,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> M3fStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => M3fStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside m3fair".into());
            M3fStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(M3fStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> FfiResult<&'a mut [T]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(M3fStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn prior(p: *const f64, n: usize) -> FfiResult<SampleWeights> {
    if p.is_null() {
        Ok(SampleWeights::uniform(n))
    } else {
        Ok(SampleWeights::new(slice(p, n, "prior")?.to_vec())?)
    }
}

fn group(name: String, membership: &[u8], privileged: u8) -> FfiResult<GroupAssignment> {
    Ok(GroupAssignment::new(name, membership.to_vec())?.with_privileged(privileged)?)
}

/// Last error message on this thread, or null. Valid until the next failing
/// call on the same thread.
#[no_mangle]
pub extern "C" fn m3f_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn m3f_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a CSV with a header row. `out` receives a handle to free with
/// [`m3f_dataset_free`].
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn m3f_dataset_load_csv(
    path: *const c_char,
    label_column: *const c_char,
    positive_label: *const c_char,
    out: *mut *mut M3fDataset,
) -> M3fStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ds = load_csv(
            string(path, "path")?,
            string(label_column, "label_column")?,
            string(positive_label, "positive_label")?,
        )?;
        *out = Box::into_raw(Box::new(M3fDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from [`m3f_dataset_load_csv`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn m3f_dataset_free(dataset: *mut M3fDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn m3f_dataset_n_rows(dataset: *const M3fDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.n_rows())
}

/// Number of feature columns, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn m3f_dataset_n_cols(dataset: *const M3fDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.n_cols())
}

/// Copies the 0/1 labels into `out`, which must hold exactly `n_rows` values.
///
/// # Safety
/// `out` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn m3f_dataset_labels(dataset: *const M3fDataset, out: *mut u8, len: usize) -> M3fStatus {
    guard(|| {
        let ds = &dataset.as_ref().ok_or_else(|| null("dataset"))?.0;
        if len != ds.n_rows() {
            return Err(Error::LengthMismatch { what: "label buffer", expected: ds.n_rows(), found: len }.into());
        }
        slice_mut(out, len, "out")?.copy_from_slice(ds.labels());
        Ok(())
    })
}

/// Reweights so that every partition cell has the same favorable rate.
/// `prior` may be null for unit weights. Writes `n` weights to `out`.
///
/// # Safety
/// All non-null pointers must address `n` elements.
#[no_mangle]
pub unsafe extern "C" fn m3f_reweight(
    labels: *const u8,
    partition: *const u32,
    prior: *const f64,
    n: usize,
    out: *mut f64,
) -> M3fStatus {
    guard(|| {
        let w = reweight::reweight(slice(labels, n, "labels")?, slice(partition, n, "partition")?, &self::prior(prior, n)?)?;
        slice_mut(out, n, "out")?.copy_from_slice(w.as_slice());
        Ok(())
    })
}

/// Multi-attribute reweighting. `membership` is attribute-major
/// (`n_attributes * n` values, 0/1), `privileged` and `level_weights` hold
/// one value per attribute. `prior` may be null.
///
/// # Safety
/// Pointers must address the element counts described above.
#[no_mangle]
pub unsafe extern "C" fn m3f_m3fair(
    labels: *const u8,
    membership: *const u8,
    privileged: *const u8,
    level_weights: *const u32,
    n_attributes: usize,
    n: usize,
    prior: *const f64,
    out: *mut f64,
) -> M3fStatus {
    guard(|| {
        let labels = slice(labels, n, "labels")?;
        let membership = slice(membership, n_attributes * n, "membership")?;
        let privileged = slice(privileged, n_attributes, "privileged")?;
        let levels = slice(level_weights, n_attributes, "level_weights")?;
        let groups = (0..n_attributes)
            .map(|a| group(format!("a{a}"), &membership[a * n..(a + 1) * n], privileged[a]))
            .collect::<FfiResult<Vec<_>>>()?;
        let config = LevelWeightConfig::new((0..n_attributes).map(|a| (format!("a{a}"), levels[a])))?;
        let w = reweight::m3fair(labels, &groups, &config, &self::prior(prior, n)?)?;
        slice_mut(out, n, "out")?.copy_from_slice(w.as_slice());
        Ok(())
    })
}

/// # Safety
/// `scores` and `labels` must address `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn m3f_auroc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> M3fStatus {
    guard(|| {
        let v = metrics::auroc(slice(scores, n, "scores")?, slice(labels, n, "labels")?)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// # Safety
/// `scores` and `labels` must address `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn m3f_auprc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> M3fStatus {
    guard(|| {
        let v = metrics::auprc(slice(scores, n, "scores")?, slice(labels, n, "labels")?)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// All seven metrics for one binary attribute. Predictions are
/// `score >= threshold`.
///
/// # Safety
/// Array pointers must address `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn m3f_fairness(
    scores: *const f64,
    labels: *const u8,
    membership: *const u8,
    privileged: u8,
    n: usize,
    threshold: f64,
    out: *mut M3fFairness,
) -> M3fStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let preds = PredictionSet::from_scores(
            slice(scores, n, "scores")?.to_vec(),
            slice(labels, n, "labels")?.to_vec(),
            threshold,
        )?;
        let g = group("attribute".into(), slice(membership, n, "membership")?, privileged)?;
        let r = FairnessReport::compute(&preds, &g)?;
        *out = M3fFairness {
            acc: r.acc,
            auroc: r.auroc,
            auprc: r.auprc,
            di: r.di,
            spd: r.spd,
            aod: r.aod,
            eod: r.eod,
            partial_support: r.partial_support,
        };
        Ok(())
    })
}

/// Runs an experiment described by a JSON config and returns the JSON
/// report in `out`. Relative dataset paths resolve against the working
/// directory. Free the result with [`m3f_string_free`].
///
/// # Safety
/// `config_json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn m3f_run_experiment_json(config_json: *const c_char, out: *mut *mut c_char) -> M3fStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config: ExperimentConfig = serde_json::from_str(string(config_json, "config_json")?).map_err(Error::from)?;
        let report = m3fair::run_experiment(&config)?.to_json()?;
        *out = CString::new(report).map_err(|e| Failure(M3fStatus::InvalidData, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn m3f_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
