//! C interface to trained kanload models and extracted equations.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns a
//! [`KanloadStatus`]; on failure [`kanload_last_error`] describes the most
//! recent error on the calling thread.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use kanload::cli::{extract_equations, EquationsFile, ModelFile};
use kanload::symbolic::{ExtractConfig, SimplifyOptions};
use kanload::training::Channel;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KanloadStatus {
    Ok = 0,
    /// Null pointer, bad channel or malformed string.
    InvalidArgument = 1,
    /// Unreadable or malformed file, or an input that does not fit the model.
    InputError = 2,
    /// Numerical or structural failure.
    RuntimeError = 3,
    Panic = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KanloadChannel {
    V = 0,
    F = 1,
    P = 2,
    Q = 3,
}

impl From<KanloadChannel> for Channel {
    fn from(c: KanloadChannel) -> Self {
        match c {
            KanloadChannel::V => Channel::V,
            KanloadChannel::F => Channel::F,
            KanloadChannel::P => Channel::P,
            KanloadChannel::Q => Channel::Q,
        }
    }
}

/// A trained model file.
pub struct KanloadModel {
    inner: ModelFile,
}

/// A set of extracted equations.
pub struct KanloadEquations {
    inner: EquationsFile,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: KanloadStatus, msg: impl Into<String>) -> KanloadStatus {
    set_error(msg.into());
    status
}

fn from_lib(e: kanload::Error) -> KanloadStatus {
    let status = if e.is_input_error() {
        KanloadStatus::InputError
    } else {
        KanloadStatus::RuntimeError
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> KanloadStatus) -> KanloadStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(KanloadStatus::Panic, "internal panic"),
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, KanloadStatus> {
    if path.is_null() {
        return Err(fail(KanloadStatus::InvalidArgument, "path is null"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(KanloadStatus::InvalidArgument, "path is not valid UTF-8"))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn kanload_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn kanload_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a `model.json` written by `kanload train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kanload_model_load(
    path: *const c_char,
    out: *mut *mut KanloadModel,
) -> KanloadStatus {
    guard(|| {
        if out.is_null() {
            return fail(KanloadStatus::InvalidArgument, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match ModelFile::load(&path) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(KanloadModel { inner }));
                KanloadStatus::Ok
            }
            Err(e) => from_lib(e),
        }
    })
}

/// # Safety
/// `model` must be null or a handle from [`kanload_model_load`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn kanload_model_free(model: *mut KanloadModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of input channels, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kanload_model_input_count(model: *const KanloadModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.inputs.len())
}

/// Writes the `index`-th input channel to `out`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kanload_model_input(
    model: *const KanloadModel,
    index: usize,
    out: *mut KanloadChannel,
) -> KanloadStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            return fail(KanloadStatus::InvalidArgument, "null argument");
        };
        let Some(ch) = m.inner.inputs.get(index) else {
            return fail(KanloadStatus::InvalidArgument, format!("no input {index}"));
        };
        *out = match ch {
            Channel::V => KanloadChannel::V,
            Channel::F => KanloadChannel::F,
            Channel::P => KanloadChannel::P,
            Channel::Q => KanloadChannel::Q,
        };
        KanloadStatus::Ok
    })
}

/// Predicts `target` for `n_rows` rows of physical inputs. `inputs` is
/// row-major with one column per model input, in model order; `out` receives
/// `n_rows` values.
///
/// # Safety
/// `inputs` must hold `n_rows * kanload_model_input_count(model)` doubles and
/// `out` room for `n_rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn kanload_model_predict(
    model: *const KanloadModel,
    target: KanloadChannel,
    inputs: *const f64,
    n_rows: usize,
    out: *mut f64,
) -> KanloadStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(KanloadStatus::InvalidArgument, "model is null");
        };
        if n_rows == 0 {
            return KanloadStatus::Ok;
        }
        if inputs.is_null() || out.is_null() {
            return fail(KanloadStatus::InvalidArgument, "null buffer");
        }
        let k = m.inner.inputs.len();
        let xs = std::slice::from_raw_parts(inputs, n_rows * k);
        let ys = std::slice::from_raw_parts_mut(out, n_rows);
        for (row, y) in xs.chunks_exact(k).zip(ys.iter_mut()) {
            match m.inner.predict_row(target.into(), row) {
                Ok(v) => *y = v,
                Err(e) => return from_lib(e),
            }
        }
        KanloadStatus::Ok
    })
}

/// Extracts symbolic equations with the default extraction settings.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kanload_model_extract(
    model: *const KanloadModel,
    decimals: u32,
    expand: bool,
    out: *mut *mut KanloadEquations,
) -> KanloadStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            return fail(KanloadStatus::InvalidArgument, "null argument");
        };
        let opts = SimplifyOptions { decimals, expand };
        match extract_equations(&m.inner, &ExtractConfig::default(), &opts) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(KanloadEquations { inner }));
                KanloadStatus::Ok
            }
            Err(e) => from_lib(e),
        }
    })
}

/// Loads an `equations.json` written by `kanload extract`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kanload_equations_load(
    path: *const c_char,
    out: *mut *mut KanloadEquations,
) -> KanloadStatus {
    guard(|| {
        if out.is_null() {
            return fail(KanloadStatus::InvalidArgument, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match EquationsFile::load(&path) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(KanloadEquations { inner }));
                KanloadStatus::Ok
            }
            Err(e) => from_lib(e),
        }
    })
}

/// # Safety
/// `eq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kanload_equations_free(eq: *mut KanloadEquations) {
    if !eq.is_null() {
        drop(Box::from_raw(eq));
    }
}

/// All equations as `<target> = <expression>` lines. Release the result
/// with [`kanload_string_free`]; null on failure.
///
/// # Safety
/// `eq` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kanload_equations_text(eq: *const KanloadEquations) -> *mut c_char {
    clear_error();
    let Some(e) = eq.as_ref() else {
        set_error("equations handle is null".into());
        return ptr::null_mut();
    };
    CString::new(e.inner.to_text()).map_or(ptr::null_mut(), CString::into_raw)
}

/// Evaluates the equation for `target` at voltage `v` and frequency `f`.
///
/// # Safety
/// `eq` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kanload_equations_eval(
    eq: *const KanloadEquations,
    target: KanloadChannel,
    v: f64,
    f: f64,
    out: *mut f64,
) -> KanloadStatus {
    guard(|| {
        let (Some(e), false) = (eq.as_ref(), out.is_null()) else {
            return fail(KanloadStatus::InvalidArgument, "null argument");
        };
        let point = BTreeMap::from([("V".to_string(), v), ("f".to_string(), f)]);
        match e.inner.evaluate(target.into(), &point) {
            Ok(y) => {
                *out = y;
                KanloadStatus::Ok
            }
            Err(err) => from_lib(err),
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kanload_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
