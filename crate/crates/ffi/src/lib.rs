//! C ABI over the training engine: opaque session handles, status codes, and
//! flat row-major buffers. All matrices cross the boundary feature-major:
//! an input buffer holds `inputs x samples` values, row by row, matching the
//! engine's internal layout.
//!
//! Error reporting: every fallible call returns an [`ElmStatus`]; on failure
//! a thread-local message is set and can be read with
//! [`elm_last_error_message`] until the next failing call on that thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use elm_core::modelfile::ModelFile;
use elm_core::{Activation, Dataset, Error, Matrix, Session, SessionConfig, Variant};

/// Opaque training session; create with `elm_train` or `elm_load_session`,
/// release with `elm_session_free`.
pub struct ElmSession(Session);

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElmStatus {
    Ok = 0,
    /// A pointer argument was null or a size was zero where it must not be.
    NullArgument = 1,
    /// An argument value is invalid (bad index, bad count, bad enum value).
    InvalidArgument = 2,
    /// Buffer or matrix dimensions do not line up.
    ShapeMismatch = 3,
    /// A matrix that must be positive definite is not.
    Singular = 4,
    /// An update became numerically degenerate.
    Degenerate = 5,
    /// The session or model lacks required state.
    InvalidState = 6,
    /// File could not be read, written, or parsed.
    Io = 7,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 8,
    /// An internal invariant failed.
    Internal = 9,
}

/// Which update engine a session maintains.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElmVariant {
    /// Dense inverse of the regularized Gram matrix.
    GramInverse = 0,
    /// Inverse-LDL factors of the Gram matrix.
    Factored = 1,
}

/// Hidden-node activation function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElmActivation {
    Sigmoid = 0,
    Tanh = 1,
    Gaussian = 2,
    Linear = 3,
}

/// Deviations of the maintained state from a direct solve, plus the current
/// mean squared error.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ElmVerifyReport {
    pub weight_deviation: f64,
    pub gram_deviation: f64,
    pub mse: f64,
    pub node_count: usize,
    pub sample_count: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = sanitized);
}

fn status_of(err: &Error) -> ElmStatus {
    match err {
        Error::Shape(_) => ElmStatus::ShapeMismatch,
        Error::InvalidArgument(_) => ElmStatus::InvalidArgument,
        Error::Singular(_) => ElmStatus::Singular,
        Error::Degenerate(_) => ElmStatus::Degenerate,
        Error::State(_) => ElmStatus::InvalidState,
        Error::Parse(_) | Error::Io(_) => ElmStatus::Io,
    }
}

fn fail(err: &Error) -> ElmStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn guard<F: FnOnce() -> ElmStatus>(body: F) -> ElmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            ElmStatus::Internal
        }
    }
}

unsafe fn matrix_from(ptr: *const f64, rows: usize, cols: usize) -> Option<Matrix> {
    if ptr.is_null() || rows == 0 || cols == 0 {
        return None;
    }
    let slice = unsafe { std::slice::from_raw_parts(ptr, rows * cols) };
    Matrix::from_vec(rows, cols, slice.to_vec()).ok()
}

fn variant_of(v: ElmVariant) -> Variant {
    match v {
        ElmVariant::GramInverse => Variant::Q,
        ElmVariant::Factored => Variant::Ldl,
    }
}

fn activation_of(a: ElmActivation) -> Activation {
    match a {
        ElmActivation::Sigmoid => Activation::Sigmoid,
        ElmActivation::Tanh => Activation::Tanh,
        ElmActivation::Gaussian => Activation::Gaussian,
        ElmActivation::Linear => Activation::Linear,
    }
}

unsafe fn path_from<'a>(ptr: *const c_char) -> Result<&'a Path, ElmStatus> {
    if ptr.is_null() {
        set_error("null path");
        return Err(ElmStatus::NullArgument);
    }
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(ElmStatus::InvalidUtf8)
        }
    }
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn elm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Trains a fresh session. `x` is `inputs x samples` row-major, `y` is
/// `outputs x samples` row-major. On success writes a handle to `out`.
#[no_mangle]
pub unsafe extern "C" fn elm_train(
    x: *const f64,
    inputs: usize,
    samples: usize,
    y: *const f64,
    outputs: usize,
    hidden: usize,
    ridge: f64,
    variant: ElmVariant,
    activation: ElmActivation,
    seed: u64,
    allow_zero_ridge: bool,
    out: *mut *mut ElmSession,
) -> ElmStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output handle");
            return ElmStatus::NullArgument;
        }
        let (x, y) = match (
            unsafe { matrix_from(x, inputs, samples) },
            unsafe { matrix_from(y, outputs, samples) },
        ) {
            (Some(x), Some(y)) => (x, y),
            _ => {
                set_error("null data pointer or zero dimension");
                return ElmStatus::NullArgument;
            }
        };
        let data = match Dataset::new(x, y) {
            Ok(d) => d,
            Err(e) => return fail(&e),
        };
        let config = SessionConfig {
            initial_nodes: hidden,
            ridge,
            variant: variant_of(variant),
            seed,
            activation: activation_of(activation),
            allow_zero_ridge,
        };
        match Session::init(data, &config) {
            Ok(session) => {
                unsafe { *out = Box::into_raw(Box::new(ElmSession(session))) };
                ElmStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Loads a saved model (with incremental state) and resumes it against the
/// given training data.
#[no_mangle]
pub unsafe extern "C" fn elm_load_session(
    path: *const c_char,
    x: *const f64,
    inputs: usize,
    samples: usize,
    y: *const f64,
    outputs: usize,
    out: *mut *mut ElmSession,
) -> ElmStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output handle");
            return ElmStatus::NullArgument;
        }
        let path = match unsafe { path_from(path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        let (x, y) = match (
            unsafe { matrix_from(x, inputs, samples) },
            unsafe { matrix_from(y, outputs, samples) },
        ) {
            (Some(x), Some(y)) => (x, y),
            _ => {
                set_error("null data pointer or zero dimension");
                return ElmStatus::NullArgument;
            }
        };
        let result = (|| -> elm_core::Result<Session> {
            let file = ModelFile::load(path)?;
            let stored = file.stored_state()?;
            let data = Dataset::new(x, y)?;
            Session::resume(file.to_model(), data, file.ridge, stored)
        })();
        match result {
            Ok(session) => {
                unsafe { *out = Box::into_raw(Box::new(ElmSession(session))) };
                ElmStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Adds `count` freshly drawn hidden nodes (node `j` uses seed `seed + j`).
#[no_mangle]
pub unsafe extern "C" fn elm_session_grow(
    session: *mut ElmSession,
    count: usize,
    seed: u64,
) -> ElmStatus {
    guard(|| {
        let Some(handle) = (unsafe { session.as_mut() }) else {
            set_error("null session");
            return ElmStatus::NullArgument;
        };
        match handle.0.add_nodes(count, seed) {
            Ok(next) => {
                handle.0 = next;
                ElmStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Removes the hidden nodes at the given 0-based indices.
#[no_mangle]
pub unsafe extern "C" fn elm_session_prune(
    session: *mut ElmSession,
    indices: *const usize,
    count: usize,
) -> ElmStatus {
    guard(|| {
        let Some(handle) = (unsafe { session.as_mut() }) else {
            set_error("null session");
            return ElmStatus::NullArgument;
        };
        if indices.is_null() || count == 0 {
            set_error("null or empty index list");
            return ElmStatus::NullArgument;
        }
        let indices = unsafe { std::slice::from_raw_parts(indices, count) };
        match handle.0.remove_nodes(indices) {
            Ok(next) => {
                handle.0 = next;
                ElmStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Compares the maintained state against a direct solve.
#[no_mangle]
pub unsafe extern "C" fn elm_session_verify(
    session: *const ElmSession,
    out: *mut ElmVerifyReport,
) -> ElmStatus {
    guard(|| {
        let Some(handle) = (unsafe { session.as_ref() }) else {
            set_error("null session");
            return ElmStatus::NullArgument;
        };
        if out.is_null() {
            set_error("null report pointer");
            return ElmStatus::NullArgument;
        }
        match handle.0.verify() {
            Ok(report) => {
                unsafe {
                    *out = ElmVerifyReport {
                        weight_deviation: report.weight_deviation,
                        gram_deviation: report.gram_deviation,
                        mse: report.mse,
                        node_count: report.node_count,
                        sample_count: report.sample_count,
                    };
                }
                ElmStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn elm_session_node_count(session: *const ElmSession) -> usize {
    unsafe { session.as_ref() }.map_or(0, |s| s.0.node_count())
}

#[no_mangle]
pub unsafe extern "C" fn elm_session_input_count(session: *const ElmSession) -> usize {
    unsafe { session.as_ref() }.map_or(0, |s| s.0.model().input_count())
}

#[no_mangle]
pub unsafe extern "C" fn elm_session_output_count(session: *const ElmSession) -> usize {
    unsafe { session.as_ref() }.map_or(0, |s| s.0.data().y.rows())
}

/// Copies the output weights (`outputs x nodes`, row-major) into `out`,
/// which must hold `len >= outputs * nodes` values.
#[no_mangle]
pub unsafe extern "C" fn elm_session_weights(
    session: *const ElmSession,
    out: *mut f64,
    len: usize,
) -> ElmStatus {
    guard(|| {
        let Some(handle) = (unsafe { session.as_ref() }) else {
            set_error("null session");
            return ElmStatus::NullArgument;
        };
        if out.is_null() {
            set_error("null output buffer");
            return ElmStatus::NullArgument;
        }
        let weights = handle.0.engine().weights();
        let needed = weights.rows() * weights.cols();
        if len < needed {
            set_error("output buffer too small");
            return ElmStatus::ShapeMismatch;
        }
        unsafe {
            std::ptr::copy_nonoverlapping(weights.data().as_ptr(), out, needed);
        }
        ElmStatus::Ok
    })
}

/// Runs the network on `samples` new inputs; writes `outputs x samples`
/// row-major predictions into `out`, which must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn elm_session_predict(
    session: *const ElmSession,
    x: *const f64,
    inputs: usize,
    samples: usize,
    out: *mut f64,
    len: usize,
) -> ElmStatus {
    guard(|| {
        let Some(handle) = (unsafe { session.as_ref() }) else {
            set_error("null session");
            return ElmStatus::NullArgument;
        };
        let Some(x) = (unsafe { matrix_from(x, inputs, samples) }) else {
            set_error("null data pointer or zero dimension");
            return ElmStatus::NullArgument;
        };
        if out.is_null() {
            set_error("null output buffer");
            return ElmStatus::NullArgument;
        }
        let result = (|| -> elm_core::Result<Matrix> {
            let hidden = handle.0.model().compute_hidden(&x)?;
            handle.0.model().predict(&hidden)
        })();
        match result {
            Ok(z) => {
                let needed = z.rows() * z.cols();
                if len < needed {
                    set_error("output buffer too small");
                    return ElmStatus::ShapeMismatch;
                }
                unsafe {
                    std::ptr::copy_nonoverlapping(z.data().as_ptr(), out, needed);
                }
                ElmStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Saves the session's model; `light` drops the incremental state.
#[no_mangle]
pub unsafe extern "C" fn elm_session_save(
    session: *const ElmSession,
    path: *const c_char,
    light: bool,
) -> ElmStatus {
    guard(|| {
        let Some(handle) = (unsafe { session.as_ref() }) else {
            set_error("null session");
            return ElmStatus::NullArgument;
        };
        let path = match unsafe { path_from(path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        match ModelFile::from_session(&handle.0, light).save(path) {
            Ok(()) => ElmStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Releases a session handle. Passing null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn elm_session_free(session: *mut ElmSession) {
    if !session.is_null() {
        drop(unsafe { Box::from_raw(session) });
    }
}
