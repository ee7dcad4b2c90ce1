//! C ABI over trained ensembles: load a bundle, predict rows, free it.
//!
//! Every fallible call returns a [`Status`]; on anything but `Ok` a message
//! is available from [`bnmoe_last_error`] on the same thread. Panics are
//! caught at the boundary and reported as `Panic`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use bnmoe::bayesnet::count_dags;
use bnmoe::ensemble::GatedEnsemble;
use bnmoe::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotFound = 3,
    /// Malformed or inconsistent bundle or input data.
    Data = 4,
    Io = 5,
    Panic = 6,
}

/// Opaque handle to a loaded ensemble.
pub struct Ensemble {
    inner: GatedEnsemble,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: Status, msg: impl Into<String>) -> Status {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> Status {
    match e {
        Error::NotFound(_) => Status::NotFound,
        Error::Io { .. } => Status::Io,
        Error::Usage(_) | Error::Parameter(_) | Error::Config(_) => Status::InvalidArgument,
        _ => Status::Data,
    }
}

fn guard(f: impl FnOnce() -> Status) -> Status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(Status::Panic, "internal panic"),
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bnmoe_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bnmoe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load a bundle from its directory or manifest path. On success `*out`
/// owns a handle that must be released with [`bnmoe_ensemble_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bnmoe_ensemble_load(path: *const c_char, out: *mut *mut Ensemble) -> Status {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(Status::NullPointer, "path and out must not be NULL");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(Status::InvalidArgument, "path is not valid UTF-8");
        };
        match GatedEnsemble::load_bundle(path) {
            Ok((inner, _)) => {
                *out = Box::into_raw(Box::new(Ensemble { inner }));
                Status::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Release a handle. NULL is ignored.
///
/// # Safety
/// `ens` must come from [`bnmoe_ensemble_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bnmoe_ensemble_free(ens: *mut Ensemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}

/// Number of input features, or 0 for NULL.
///
/// # Safety
/// `ens` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bnmoe_ensemble_num_features(ens: *const Ensemble) -> usize {
    ens.as_ref().map_or(0, |e| e.inner.feature_count())
}

/// Number of experts (gate states), or 0 for NULL.
///
/// # Safety
/// `ens` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bnmoe_ensemble_num_experts(ens: *const Ensemble) -> usize {
    ens.as_ref().map_or(0, |e| e.inner.k())
}

/// Predict one row.
///
/// `x` holds `n_features` values. `missing` is NULL (all observed) or
/// `n_features` flags, nonzero meaning unobserved; unobserved values are
/// ignored. Outputs: `label` (0 or 1), `scores` (2 values, may be NULL) and
/// `gate` (`gate_len` values, may be NULL; `gate_len` must equal the expert
/// count when given).
///
/// # Safety
/// All non-NULL pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn bnmoe_ensemble_predict(
    ens: *const Ensemble,
    x: *const f64,
    missing: *const u8,
    n_features: usize,
    label: *mut u8,
    scores: *mut f64,
    gate: *mut f64,
    gate_len: usize,
) -> Status {
    guard(|| {
        let Some(ens) = ens.as_ref() else {
            return fail(Status::NullPointer, "ensemble handle is NULL");
        };
        if x.is_null() || label.is_null() {
            return fail(Status::NullPointer, "x and label must not be NULL");
        }
        let d = ens.inner.feature_count();
        if n_features != d {
            return fail(Status::InvalidArgument, format!("expected {d} features, got {n_features}"));
        }
        if !gate.is_null() && gate_len != ens.inner.k() {
            return fail(
                Status::InvalidArgument,
                format!("gate buffer holds {gate_len} values, model has {} experts", ens.inner.k()),
            );
        }
        let x = slice::from_raw_parts(x, d);
        let mask: Vec<bool> = if missing.is_null() {
            vec![false; d]
        } else {
            slice::from_raw_parts(missing, d).iter().map(|&m| m != 0).collect()
        };
        match ens.inner.predict_one(x, &mask) {
            Ok(p) => {
                *label = p.label;
                if !scores.is_null() {
                    slice::from_raw_parts_mut(scores, 2).copy_from_slice(&p.combined);
                }
                if !gate.is_null() {
                    slice::from_raw_parts_mut(gate, gate_len).copy_from_slice(&p.gate.posterior);
                }
                Status::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Predict `n_rows` complete rows stored row-major in `rows`
/// (`n_rows × n_features`), writing one label per row to `labels`.
///
/// # Safety
/// `rows` must hold `n_rows * n_features` values and `labels` `n_rows` bytes.
#[no_mangle]
pub unsafe extern "C" fn bnmoe_ensemble_predict_batch(
    ens: *const Ensemble,
    rows: *const f64,
    n_rows: usize,
    n_features: usize,
    labels: *mut u8,
) -> Status {
    guard(|| {
        let Some(ens) = ens.as_ref() else {
            return fail(Status::NullPointer, "ensemble handle is NULL");
        };
        if n_rows == 0 {
            return Status::Ok;
        }
        if rows.is_null() || labels.is_null() {
            return fail(Status::NullPointer, "rows and labels must not be NULL");
        }
        let d = ens.inner.feature_count();
        if n_features != d {
            return fail(Status::InvalidArgument, format!("expected {d} features, got {n_features}"));
        }
        let Some(len) = n_rows.checked_mul(d) else {
            return fail(Status::InvalidArgument, "row count overflows");
        };
        let data: Vec<Vec<f64>> = slice::from_raw_parts(rows, len).chunks_exact(d).map(<[f64]>::to_vec).collect();
        match ens.inner.predict_batch(&data) {
            Ok(batch) => {
                slice::from_raw_parts_mut(labels, n_rows).copy_from_slice(&batch.labels);
                Status::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Number of labelled DAGs on `nodes` nodes (1 to 8).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bnmoe_count_dags(nodes: usize, out: *mut u64) -> Status {
    guard(|| {
        if out.is_null() {
            return fail(Status::NullPointer, "out must not be NULL");
        }
        match count_dags(nodes) {
            Ok(n) => {
                *out = n;
                Status::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}
