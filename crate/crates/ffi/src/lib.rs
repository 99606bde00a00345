//! C ABI over the stargraph pipeline: load or generate datasets, load
//! trained checkpoints, and run inference from non-Rust callers.
//!
//! Conventions: every function returns an [`SgStatus`]; out-parameters are
//! written only on `Ok`. Handles are opaque and must be released with the
//! matching `_free` function. On any failure a thread-local message is set,
//! readable via [`sg_last_error_message`] until the next call on the same
//! thread. No function panics across the boundary.

use libc::{c_char, c_int, size_t};
use stargraph::data::{self, Dataset};
use stargraph::graph::{build_sequence, GraphConfig};
use stargraph::model::{Checkpoint, DdgnnModel};
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

/// Result of every FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    SgOk = 0,
    /// A required pointer argument was null.
    SgNullPointer = 1,
    /// A string argument was not valid UTF-8.
    SgInvalidUtf8 = 2,
    /// An argument was out of range (index, class count, ...).
    SgInvalidArgument = 3,
    /// The file could not be read or parsed.
    SgDataError = 4,
    /// The operation itself failed.
    SgRuntimeError = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: SgStatus, msg: &str) -> SgStatus {
    set_error(msg);
    status
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next FFI call from the same thread; never free it.
#[no_mangle]
pub extern "C" fn sg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Wraps the body in `catch_unwind` so panics become status codes instead
/// of undefined behavior across the C boundary.
fn guarded(body: impl FnOnce() -> SgStatus) -> SgStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(SgStatus::SgRuntimeError, "internal panic"),
    }
}

unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<&'a Path, SgStatus> {
    if ptr.is_null() {
        set_error("path is null");
        return Err(SgStatus::SgNullPointer);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(SgStatus::SgInvalidUtf8)
        }
    }
}

/// Opaque dataset handle.
pub struct SgDataset {
    inner: Dataset,
}

/// Opaque model handle; keeps the graph recipe recorded in the checkpoint.
pub struct SgModel {
    model: DdgnnModel,
    graph: GraphConfig,
}

/// Loads a `.jsonl` / `.jsonl.gz` dataset from disk.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_load(
    path: *const c_char,
    out: *mut *mut SgDataset,
) -> SgStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SgStatus::SgNullPointer, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match data::load(path) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SgDataset { inner }));
                SgStatus::SgOk
            }
            Err(e) => fail(SgStatus::SgDataError, &e.to_string()),
        }
    })
}

/// Generates the builtin synthetic 4-class dataset.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_generate_synth4(
    seed: u64,
    n_per_class: size_t,
    out: *mut *mut SgDataset,
) -> SgStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SgStatus::SgNullPointer, "out is null");
        }
        if n_per_class == 0 {
            return fail(SgStatus::SgInvalidArgument, "n_per_class must be >= 1");
        }
        match data::synth_generate(&data::synth4_spec(), n_per_class, seed) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SgDataset { inner }));
                SgStatus::SgOk
            }
            Err(e) => fail(SgStatus::SgRuntimeError, &e.to_string()),
        }
    })
}

/// Number of sequences.
///
/// # Safety
/// `ds` must be a live handle from this library, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_len(ds: *const SgDataset, out: *mut size_t) -> SgStatus {
    guarded(|| {
        if ds.is_null() || out.is_null() {
            return fail(SgStatus::SgNullPointer, "null argument");
        }
        *out = (*ds).inner.len();
        SgStatus::SgOk
    })
}

/// Number of classes.
///
/// # Safety
/// `ds` must be a live handle from this library, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_classes(ds: *const SgDataset, out: *mut size_t) -> SgStatus {
    guarded(|| {
        if ds.is_null() || out.is_null() {
            return fail(SgStatus::SgNullPointer, "null argument");
        }
        *out = (*ds).inner.classes;
        SgStatus::SgOk
    })
}

/// Label of the sequence at `index`.
///
/// # Safety
/// `ds` must be a live handle from this library, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_label(
    ds: *const SgDataset,
    index: size_t,
    out: *mut size_t,
) -> SgStatus {
    guarded(|| {
        if ds.is_null() || out.is_null() {
            return fail(SgStatus::SgNullPointer, "null argument");
        }
        let dataset = &(*ds).inner;
        if index >= dataset.len() {
            return fail(
                SgStatus::SgInvalidArgument,
                &format!("index {index} out of range for {} sequences", dataset.len()),
            );
        }
        *out = dataset.sequences[index].label;
        SgStatus::SgOk
    })
}

/// Releases a dataset handle; a null pointer is a no-op.
///
/// # Safety
/// `ds` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_free(ds: *mut SgDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Loads a checkpoint written by `stargraph train`. The graph recipe
/// recorded inside is used for every prediction.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sg_model_load(path: *const c_char, out: *mut *mut SgModel) -> SgStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SgStatus::SgNullPointer, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match Checkpoint::load(path) {
            Ok(ckpt) => {
                let graph = ckpt.graph.unwrap_or_default();
                *out = Box::into_raw(Box::new(SgModel { model: ckpt.model, graph }));
                SgStatus::SgOk
            }
            Err(e) => fail(SgStatus::SgDataError, &e.to_string()),
        }
    })
}

/// Number of output classes of a loaded model.
///
/// # Safety
/// `model` must be a live handle from this library, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sg_model_classes(model: *const SgModel, out: *mut size_t) -> SgStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            return fail(SgStatus::SgNullPointer, "null argument");
        }
        *out = (*model).model.config.classes;
        SgStatus::SgOk
    })
}

/// Classifies the dataset sequence at `index`. Writes the argmax class to
/// `out_class` and, if `out_probs` is non-null, the full softmax
/// distribution to `out_probs[0..classes]`.
///
/// # Safety
/// `model` and `ds` must be live handles from this library; `out_class`
/// must be valid; `out_probs`, when non-null, must have room for one f64
/// per class.
#[no_mangle]
pub unsafe extern "C" fn sg_model_predict(
    model: *const SgModel,
    ds: *const SgDataset,
    index: size_t,
    out_class: *mut size_t,
    out_probs: *mut f64,
) -> SgStatus {
    guarded(|| {
        if model.is_null() || ds.is_null() || out_class.is_null() {
            return fail(SgStatus::SgNullPointer, "null argument");
        }
        let handle = &*model;
        let dataset = &(*ds).inner;
        if index >= dataset.len() {
            return fail(
                SgStatus::SgInvalidArgument,
                &format!("index {index} out of range for {} sequences", dataset.len()),
            );
        }
        let gs = match build_sequence(&dataset.sequences[index], &handle.graph) {
            Ok(gs) => gs,
            Err(e) => return fail(SgStatus::SgRuntimeError, &e.to_string()),
        };
        match handle.model.predict(&gs) {
            Ok((class, probs)) => {
                *out_class = class;
                if !out_probs.is_null() {
                    ptr::copy_nonoverlapping(probs.as_ptr(), out_probs, probs.len());
                }
                SgStatus::SgOk
            }
            Err(e) => fail(SgStatus::SgRuntimeError, &e.to_string()),
        }
    })
}

/// Overall accuracy of the model over an entire dataset.
///
/// # Safety
/// `model` and `ds` must be live handles from this library, `out_accuracy`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sg_model_evaluate(
    model: *const SgModel,
    ds: *const SgDataset,
    out_accuracy: *mut f64,
) -> SgStatus {
    guarded(|| {
        if model.is_null() || ds.is_null() || out_accuracy.is_null() {
            return fail(SgStatus::SgNullPointer, "null argument");
        }
        let handle = &*model;
        let dataset = &(*ds).inner;
        let mut set = Vec::with_capacity(dataset.len());
        for seq in &dataset.sequences {
            match build_sequence(seq, &handle.graph) {
                Ok(gs) => set.push(gs),
                Err(e) => return fail(SgStatus::SgRuntimeError, &e.to_string()),
            }
        }
        match handle.model.evaluate(&set) {
            Ok(report) => {
                *out_accuracy = report.overall_accuracy;
                SgStatus::SgOk
            }
            Err(e) => fail(SgStatus::SgRuntimeError, &e.to_string()),
        }
    })
}

/// Releases a model handle; a null pointer is a no-op.
///
/// # Safety
/// `model` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sg_model_free(model: *mut SgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// ABI version of this header/library pair.
#[no_mangle]
pub extern "C" fn sg_abi_version() -> c_int {
    1
}
