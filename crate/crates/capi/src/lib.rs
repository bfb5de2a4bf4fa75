//! C ABI for the privscore toolkit.
//!
//! The surface is handle-based: load a dataset bundle (or raw CSV files)
//! into an opaque `PsDataset`, compute one scoring model into an opaque
//! `PsScores`, then read values out. Every function returns a `PsStatus`
//! code; a human-readable message for the last failure on the calling
//! thread is available from [`ps_last_error_message`]. Strings are
//! NUL-terminated UTF-8. The generated header lives at
//! `include/privscore.h`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use privscore::bundle::{ingest, load_bundle, Dataset};
use privscore::granularity::build_level_matrix;
use privscore::graph::{score_psc, score_psna, Centrality};
use privscore::irt::{fit_2pl, fit_grm, score_psgi, score_psi, FitConfig};
use privscore::matrix::{ModelKind, ScoreVector};
use privscore::naive::{score_psgn, score_psn};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidInput = 5,
    NonConverged = 6,
    OutOfRange = 7,
    BufferTooSmall = 8,
    Internal = 9,
}

/// Opaque dataset handle.
pub struct PsDataset {
    inner: Dataset,
}

/// Opaque score-vector handle.
pub struct PsScores {
    inner: ScoreVector,
}

/// Scoring knobs; get defaults from [`ps_score_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PsScoreOptions {
    /// Damping factor for PageRank-style fixed points, in [0, 1).
    pub damping: f64,
    /// Maximum granularity level for the graded models.
    pub max_level: u8,
    /// Seed for fit initialization.
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let cstring = CString::new(message)
        .unwrap_or_else(|_| CString::new("error message contained NUL").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn fail(status: PsStatus, message: impl Into<String>) -> PsStatus {
    set_last_error(message.into());
    status
}

fn status_for(error: &privscore::Error) -> PsStatus {
    use privscore::Error;
    match error {
        Error::Io(_) | Error::MissingFile(_) => PsStatus::Io,
        Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => PsStatus::Parse,
        Error::IndexOutOfRange { .. } | Error::UnknownItem(_) | Error::UnknownLevel { .. } => {
            PsStatus::OutOfRange
        }
        _ => PsStatus::InvalidInput,
    }
}

/// Last error message for this thread, or NULL when no error occurred.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn ps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |msg| msg.as_ptr())
    })
}

/// Crate version as a static string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// # Safety
/// `ptr` must be NULL or a NUL-terminated string valid for reads.
unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<Option<&'a Path>, PsStatus> {
    if ptr.is_null() {
        return Ok(None);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Some(Path::new(s))),
        Err(_) => Err(fail(PsStatus::InvalidUtf8, "path is not valid UTF-8")),
    }
}

fn guarded(body: impl FnOnce() -> PsStatus) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(PsStatus::Internal, "internal panic"),
    }
}

/// Opens an existing bundle directory.
///
/// # Safety
/// `dir` must be a valid NUL-terminated string; `out` must be a valid
/// pointer. On success `*out` owns a dataset that must be released with
/// [`ps_dataset_free`].
#[no_mangle]
pub unsafe extern "C" fn ps_dataset_open(
    dir: *const c_char,
    out: *mut *mut PsDataset,
) -> PsStatus {
    guarded(|| {
        if out.is_null() {
            return fail(PsStatus::NullArgument, "out pointer is NULL");
        }
        let dir = match path_arg(dir) {
            Ok(Some(p)) => p,
            Ok(None) => return fail(PsStatus::NullArgument, "dir is NULL"),
            Err(status) => return status,
        };
        match load_bundle(dir) {
            Ok((dataset, _)) => {
                *out = Box::into_raw(Box::new(PsDataset { inner: dataset }));
                PsStatus::Ok
            }
            Err(e) => fail(status_for(&e), e.to_string()),
        }
    })
}

/// Ingests raw CSV files. Exactly one of `granularity_path` /
/// `responses_path` must be non-NULL.
///
/// # Safety
/// All non-NULL pointers must be valid NUL-terminated strings; `out` must
/// be a valid pointer. On success `*out` must be released with
/// [`ps_dataset_free`].
#[no_mangle]
pub unsafe extern "C" fn ps_dataset_from_csv(
    edges_path: *const c_char,
    granularity_path: *const c_char,
    responses_path: *const c_char,
    out: *mut *mut PsDataset,
) -> PsStatus {
    guarded(|| {
        if out.is_null() {
            return fail(PsStatus::NullArgument, "out pointer is NULL");
        }
        let edges = match path_arg(edges_path) {
            Ok(Some(p)) => p,
            Ok(None) => return fail(PsStatus::NullArgument, "edges path is NULL"),
            Err(status) => return status,
        };
        let granularity = match path_arg(granularity_path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let responses = match path_arg(responses_path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match ingest(edges, granularity, responses) {
            Ok((dataset, _report)) => {
                *out = Box::into_raw(Box::new(PsDataset { inner: dataset }));
                PsStatus::Ok
            }
            Err(e) => fail(status_for(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `dataset` must be NULL or a pointer from a `ps_dataset_*` constructor;
/// it is invalid after this call.
#[no_mangle]
pub unsafe extern "C" fn ps_dataset_free(dataset: *mut PsDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// # Safety
/// `dataset` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn ps_dataset_user_count(dataset: *const PsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.registry.len())
}

/// # Safety
/// `dataset` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn ps_dataset_item_count(dataset: *const PsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.catalog.len())
}

/// # Safety
/// `dataset` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn ps_dataset_edge_count(dataset: *const PsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.graph.edge_count())
}

fn copy_str(value: &str, buffer: *mut c_char, buffer_len: usize) -> PsStatus {
    let bytes = value.as_bytes();
    if buffer_len < bytes.len() + 1 {
        return fail(
            PsStatus::BufferTooSmall,
            format!("need {} bytes, got {buffer_len}", bytes.len() + 1),
        );
    }
    unsafe {
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), buffer as *mut u8, bytes.len());
        *buffer.add(bytes.len()) = 0;
    }
    PsStatus::Ok
}

/// Copies the user identifier at `index` into `buffer` (NUL-terminated).
///
/// # Safety
/// `dataset` must be a live handle; `buffer` must be valid for
/// `buffer_len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ps_dataset_user_id(
    dataset: *const PsDataset,
    index: usize,
    buffer: *mut c_char,
    buffer_len: usize,
) -> PsStatus {
    guarded(|| {
        let Some(dataset) = dataset.as_ref() else {
            return fail(PsStatus::NullArgument, "dataset is NULL");
        };
        if buffer.is_null() {
            return fail(PsStatus::NullArgument, "buffer is NULL");
        }
        if index >= dataset.inner.registry.len() {
            return fail(PsStatus::OutOfRange, format!("user index {index}"));
        }
        copy_str(dataset.inner.registry.id(index), buffer, buffer_len)
    })
}

/// Default scoring options: damping 0.85, three levels, seed 0.
#[no_mangle]
pub extern "C" fn ps_score_options_default() -> PsScoreOptions {
    PsScoreOptions {
        damping: 0.85,
        max_level: 3,
        seed: 0,
    }
}

fn compute_score(
    dataset: &Dataset,
    model: ModelKind,
    options: &PsScoreOptions,
) -> Result<(ScoreVector, bool), privscore::Error> {
    let config = FitConfig {
        seed: options.seed,
        ..FitConfig::default()
    };
    let glm = |kind: ModelKind| -> Result<_, privscore::Error> {
        let gm = dataset.granularity.as_ref().ok_or_else(|| {
            privscore::Error::Config(format!(
                "model {} requires granularity data",
                kind.label()
            ))
        })?;
        Ok(build_level_matrix(gm, options.max_level)?.0)
    };
    match model {
        ModelKind::Psn => Ok((score_psn(&dataset.responses), true)),
        ModelKind::Psi => {
            let fit = fit_2pl(&dataset.responses, &config)?;
            Ok((score_psi(&fit.params, &fit.abilities)?, fit.report.converged))
        }
        ModelKind::Psgn => Ok((score_psgn(&glm(model)?)?, true)),
        ModelKind::Psgi => {
            let fit = fit_grm(&glm(model)?, &config)?;
            Ok((score_psgi(&fit.params, &fit.abilities)?, fit.report.converged))
        }
        ModelKind::PscPrc => Ok((
            score_psc(&dataset.graph, Centrality::PageRank, options.damping)?,
            true,
        )),
        ModelKind::PscEvc => Ok((
            score_psc(&dataset.graph, Centrality::Eigenvector, options.damping)?,
            true,
        )),
        ModelKind::PscCc => Ok((
            score_psc(&dataset.graph, Centrality::Closeness, options.damping)?,
            true,
        )),
        ModelKind::PscBc => Ok((
            score_psc(&dataset.graph, Centrality::Betweenness, options.damping)?,
            true,
        )),
        ModelKind::Psna => {
            let fit = fit_2pl(&dataset.responses, &config)?;
            let rho = score_psi(&fit.params, &fit.abilities)?;
            let lo = rho.values().iter().cloned().fold(f64::INFINITY, f64::min);
            let rho = if lo < 0.0 {
                let shifted: Vec<f64> = rho.values().iter().map(|v| v - lo).collect();
                ScoreVector::new(rho.registry_arc(), rho.model(), shifted)?
            } else {
                rho
            };
            let (scores, converged) =
                score_psna(&dataset.graph, &rho, options.damping, 1e-12, 100_000)?;
            Ok((scores, converged && fit.report.converged))
        }
    }
}

/// Computes one scoring model over the dataset. `model` accepts the same
/// names as the command line (`psn`, `psi`, `psgn`, `psgi`, `psc:prc`,
/// `psc:evc`, `psc:cc`, `psc:bc`, `psna`). Returns `NonConverged` (with
/// the scores still written to `*out`) when an iterative fit hit its
/// iteration cap.
///
/// # Safety
/// `dataset` must be a live handle, `model` a valid NUL-terminated
/// string, `options` NULL or valid, `out` valid. On success (or
/// `NonConverged`) `*out` must be released with [`ps_scores_free`].
#[no_mangle]
pub unsafe extern "C" fn ps_score(
    dataset: *const PsDataset,
    model: *const c_char,
    options: *const PsScoreOptions,
    out: *mut *mut PsScores,
) -> PsStatus {
    guarded(|| {
        let Some(dataset) = dataset.as_ref() else {
            return fail(PsStatus::NullArgument, "dataset is NULL");
        };
        if out.is_null() {
            return fail(PsStatus::NullArgument, "out pointer is NULL");
        }
        if model.is_null() {
            return fail(PsStatus::NullArgument, "model is NULL");
        }
        let Ok(model) = CStr::from_ptr(model).to_str() else {
            return fail(PsStatus::InvalidUtf8, "model is not valid UTF-8");
        };
        let kind: ModelKind = match model.parse() {
            Ok(kind) => kind,
            Err(e) => return fail(PsStatus::InvalidInput, e.to_string()),
        };
        let options = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| ps_score_options_default());
        match compute_score(&dataset.inner, kind, &options) {
            Ok((scores, converged)) => {
                *out = Box::into_raw(Box::new(PsScores { inner: scores }));
                if converged {
                    PsStatus::Ok
                } else {
                    fail(PsStatus::NonConverged, "iteration cap reached")
                }
            }
            Err(e) => fail(status_for(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `scores` must be NULL or a pointer from [`ps_score`]; it is invalid
/// after this call.
#[no_mangle]
pub unsafe extern "C" fn ps_scores_free(scores: *mut PsScores) {
    if !scores.is_null() {
        drop(Box::from_raw(scores));
    }
}

/// # Safety
/// `scores` must be NULL or a live scores handle.
#[no_mangle]
pub unsafe extern "C" fn ps_scores_len(scores: *const PsScores) -> usize {
    scores.as_ref().map_or(0, |s| s.inner.len())
}

/// Reads the score value at `index` (registry order).
///
/// # Safety
/// `scores` must be a live handle; `value` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_scores_value(
    scores: *const PsScores,
    index: usize,
    value: *mut f64,
) -> PsStatus {
    guarded(|| {
        let Some(scores) = scores.as_ref() else {
            return fail(PsStatus::NullArgument, "scores is NULL");
        };
        if value.is_null() {
            return fail(PsStatus::NullArgument, "value pointer is NULL");
        }
        if index >= scores.inner.len() {
            return fail(PsStatus::OutOfRange, format!("score index {index}"));
        }
        *value = scores.inner.values()[index];
        PsStatus::Ok
    })
}

/// Copies the user identifier the score at `index` belongs to.
///
/// # Safety
/// `scores` must be a live handle; `buffer` must be valid for
/// `buffer_len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ps_scores_user_id(
    scores: *const PsScores,
    index: usize,
    buffer: *mut c_char,
    buffer_len: usize,
) -> PsStatus {
    guarded(|| {
        let Some(scores) = scores.as_ref() else {
            return fail(PsStatus::NullArgument, "scores is NULL");
        };
        if buffer.is_null() {
            return fail(PsStatus::NullArgument, "buffer is NULL");
        }
        if index >= scores.inner.len() {
            return fail(PsStatus::OutOfRange, format!("score index {index}"));
        }
        copy_str(scores.inner.registry().id(index), buffer, buffer_len)
    })
}

/// Copies the model label of the scores (e.g. `PSC-PRC`).
///
/// # Safety
/// `scores` must be a live handle; `buffer` must be valid for
/// `buffer_len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ps_scores_model(
    scores: *const PsScores,
    buffer: *mut c_char,
    buffer_len: usize,
) -> PsStatus {
    guarded(|| {
        let Some(scores) = scores.as_ref() else {
            return fail(PsStatus::NullArgument, "scores is NULL");
        };
        if buffer.is_null() {
            return fail(PsStatus::NullArgument, "buffer is NULL");
        }
        copy_str(scores.inner.model().label(), buffer, buffer_len)
    })
}
