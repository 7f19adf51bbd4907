//! C ABI over `lcanet`. Images cross the boundary as interleaved RGB
//! `float` buffers of `height * width * 3` values in `[0, 1]`, row-major.
//!
//! Every fallible call returns an [`LcaStatus`]; on failure the message is
//! available from [`lca_last_error`] on the same thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lcanet::hazegen::{self, HazeParams};
use lcanet::pipeline::{self, Dehaze, Dehazer, Resolution};
use lcanet::{metrics, Error, Model, Tensor};

/// Result of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcaStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// Bad sizes, parameters, or non-UTF-8 paths.
    InvalidArgument = 2,
    Io = 3,
    /// The checkpoint file is corrupt or of the wrong layout.
    Checkpoint = 4,
    /// The image file could not be decoded or has an unsupported format.
    Image = 5,
    /// A NaN or infinity showed up in the computation.
    NonFinite = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Opaque handle to a trained or freshly initialised network.
pub struct LcaModel(Model<f32>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LcaStatus {
    match e {
        Error::Io { .. } => LcaStatus::Io,
        Error::Checkpoint(_) => LcaStatus::Checkpoint,
        Error::Image(_) => LcaStatus::Image,
        Error::NonFinite(_) | Error::NonFiniteGradient(_) | Error::NonFiniteLoss { .. } => LcaStatus::NonFinite,
        _ => LcaStatus::InvalidArgument,
    }
}

struct Fail(LcaStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(LcaStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `f`, records any error, and turns panics into `Panic`.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LcaStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LcaStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            LcaStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(LcaStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn model_arg<'a>(m: *const LcaModel) -> Result<&'a Model<f32>, Fail> {
    m.as_ref().map(|m| &m.0).ok_or_else(|| null("model"))
}

fn image_len(height: usize, width: usize) -> Result<usize, Fail> {
    if height == 0 || width == 0 {
        return Err(Fail(LcaStatus::InvalidArgument, format!("image size {height}x{width} is empty")));
    }
    height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Fail(LcaStatus::InvalidArgument, "image size overflows".into()))
}

unsafe fn image_arg(p: *const f32, height: usize, width: usize, what: &str) -> Result<Tensor<f32>, Fail> {
    let n = image_len(height, width)?;
    if p.is_null() {
        return Err(null(what));
    }
    let t = Tensor::from_vec(&[height, width, 3], std::slice::from_raw_parts(p, n).to_vec())?;
    if !t.is_finite() {
        return Err(Fail(LcaStatus::NonFinite, format!("{what} contains NaN or infinity")));
    }
    Ok(t)
}

unsafe fn write_image(t: &Tensor<f32>, out: *mut f32) {
    ptr::copy_nonoverlapping(t.data().as_ptr(), out, t.len());
}

fn resolution(n: usize) -> Resolution {
    if n == 0 {
        Resolution::Native
    } else {
        Resolution::Fixed(n)
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next `lca_*` call on the same thread.
#[no_mangle]
pub extern "C" fn lca_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lca_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a freshly initialised network from `seed`.
///
/// # Safety
/// `out` must be NULL or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn lca_model_init(seed: u64, out: *mut *mut LcaModel) -> LcaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(LcaModel(Model::init(seed))));
        Ok(())
    })
}

/// Loads a checkpoint. On failure `*out` is left untouched.
///
/// # Safety
/// `path` must be NULL or a NUL-terminated string; `out` as for `lca_model_init`.
#[no_mangle]
pub unsafe extern "C" fn lca_model_load(path: *const c_char, out: *mut *mut LcaModel) -> LcaStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(LcaModel(Model::load(path)?)));
        Ok(())
    })
}

/// Writes the model's checkpoint to `path`.
///
/// # Safety
/// `model` must be NULL or a live handle; `path` NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn lca_model_save(model: *const LcaModel, path: *const c_char) -> LcaStatus {
    guard(|| {
        let m = model_arg(model)?;
        m.save(path_arg(path, "path")?)?;
        Ok(())
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lca_model_free(model: *mut LcaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of trainable parameters, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lca_model_param_count(model: *const LcaModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.param_count())
}

/// Dehazes an image into `out` (same size as the input, clamped to `[0, 1]`).
/// `resolution_px` 0 runs at the input size rounded down to a multiple of 4;
/// otherwise it is the square working size and must be a multiple of 4.
/// If `seconds` is not NULL it receives the network time.
///
/// # Safety
/// `hazy` and `out` must each hold `height * width * 3` floats.
#[no_mangle]
pub unsafe extern "C" fn lca_dehaze(
    model: *const LcaModel,
    hazy: *const f32,
    height: usize,
    width: usize,
    resolution_px: usize,
    out: *mut f32,
    seconds: *mut f64,
) -> LcaStatus {
    guard(|| {
        let m = model_arg(model)?;
        let x = image_arg(hazy, height, width, "hazy")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (y, secs) = Dehazer::new(m, resolution(resolution_px)).dehaze(&x)?;
        write_image(&y, out);
        if !seconds.is_null() {
            *seconds = secs;
        }
        Ok(())
    })
}

/// Reads `input` (PPM or PNG), dehazes it, and writes `output` in the format
/// named by its extension.
///
/// # Safety
/// `model` must be a live handle; paths NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn lca_dehaze_file(
    model: *const LcaModel,
    input: *const c_char,
    output: *const c_char,
    resolution_px: usize,
) -> LcaStatus {
    guard(|| {
        let m = model_arg(model)?;
        let (i, o) = (path_arg(input, "input")?, path_arg(output, "output")?);
        pipeline::dehaze_one(&Dehazer::new(m, resolution(resolution_px)), i, o)?;
        Ok(())
    })
}

/// PSNR in dB for peak 1.0; identical images give +infinity.
///
/// # Safety
/// `a` and `b` must each hold `height * width * 3` floats; `out` one double.
#[no_mangle]
pub unsafe extern "C" fn lca_psnr(a: *const f32, b: *const f32, height: usize, width: usize, out: *mut f64) -> LcaStatus {
    guard(|| {
        let (a, b) = (image_arg(a, height, width, "a")?, image_arg(b, height, width, "b")?);
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = metrics::psnr(&a, &b)?;
        Ok(())
    })
}

/// SSIM on luma with an 11x11 Gaussian window. Both sides must be at least 11.
///
/// # Safety
/// As for `lca_psnr`.
#[no_mangle]
pub unsafe extern "C" fn lca_ssim(a: *const f32, b: *const f32, height: usize, width: usize, out: *mut f64) -> LcaStatus {
    guard(|| {
        let (a, b) = (image_arg(a, height, width, "a")?, image_arg(b, height, width, "b")?);
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = metrics::ssim(&a, &b)?;
        Ok(())
    })
}

/// Applies uniform haze `I = J t + A (1 - t)` with grey airlight `A`.
/// `clear` must lie in `[0, 1]`; `airlight` in `(0, 1]`, `transmission` in `(0, 1]`.
///
/// # Safety
/// `clear` and `out` must each hold `height * width * 3` floats.
#[no_mangle]
pub unsafe extern "C" fn lca_synthesize(
    clear: *const f32,
    height: usize,
    width: usize,
    airlight: f64,
    transmission: f64,
    out: *mut f32,
) -> LcaStatus {
    guard(|| {
        let j = image_arg(clear, height, width, "clear")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let hazy = hazegen::synthesize(&j, &HazeParams::constant(airlight, transmission))?;
        write_image(&hazy, out);
        Ok(())
    })
}
