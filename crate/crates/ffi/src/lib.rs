//! C ABI over the relight engine.
//!
//! Every function returns an [`RlStatus`]; on failure the message is
//! available from [`rl_last_error`] on the same thread. Objects are opaque
//! handles owned by the caller and released with the matching `*_free`.
//! Panics never cross the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::Vector3;

use relight::compositor::{area_light_target, composite_values, relight_hdri, OlatStack, RelightMode, RelightOptions};
use relight::envmap::EnvironmentMap;
use relight::lightmodel::{sg_sharpness, sh_encode, size_from_sharpness, Direction, LightSample, SH_COEFFS};
use relight::radiometry::{read_pfm_file, write_png_file, write_pfm_file, BitDepth, LinearImage};

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RlStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad parameters or malformed input data.
    InvalidArgument = 2,
    /// Reading or writing a file failed.
    Io = 3,
    /// Any other engine failure.
    Runtime = 4,
    /// A bug: the engine panicked. The handle arguments are still valid.
    Panic = 5,
}

/// Linear RGB float image.
pub struct RlImage(LinearImage);

/// Loaded OLAT stack.
pub struct RlStack(OlatStack);

/// Lat-long HDR environment.
pub struct RlEnv(EnvironmentMap);

/// Relighting path for [`rl_relight_hdri`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RlMode {
    /// Per-panel OLAT weights.
    Olat = 0,
    /// Spherical Gaussian fit, K = 15.
    Sg = 1,
}

thread_local! {
    static LAST: RefCell<(u32, Option<CString>)> = const { RefCell::new((0, None)) };
}

fn set_error(code: u32, msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST.with(|l| *l.borrow_mut() = (code, Some(msg)));
}

fn clear_error() {
    LAST.with(|l| *l.borrow_mut() = (0, None));
}

struct Fail(RlStatus, u32, String);

impl From<relight::Error> for Fail {
    fn from(e: relight::Error) -> Self {
        let status = if e.is_invalid_input() {
            RlStatus::InvalidArgument
        } else if is_io(&e) {
            RlStatus::Io
        } else {
            RlStatus::Runtime
        };
        Fail(status, e.code(), e.to_string())
    }
}

fn is_io(e: &relight::Error) -> bool {
    use relight::envmap::EnvError;
    use relight::radiometry::RadiometryError as R;
    matches!(
        e,
        relight::Error::Io { .. } | relight::Error::Radiometry(R::Io { .. }) | relight::Error::Env(EnvError::Image(R::Io { .. }))
    )
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(RlStatus::InvalidArgument, 0, msg.into())
}

fn engine<E: Into<relight::Error>>(e: E) -> Fail {
    e.into().into()
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_error();
            RlStatus::Ok
        }
        Ok(Err(Fail(status, code, msg))) => {
            set_error(code, msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(0, format!("internal error: {msg}"));
            RlStatus::Panic
        }
    }
}

unsafe fn out_ptr<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail(RlStatus::NullPointer, 0, "null output pointer".into()))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(RlStatus::NullPointer, 0, format!("null {what}")))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(RlStatus::NullPointer, 0, "null path".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid("path is not UTF-8"))
}

fn direction(x: f64, y: f64, z: f64) -> Result<Direction, Fail> {
    Direction::normalize(Vector3::new(x, y, z)).map_err(engine)
}

/// Message for the last failed call on this thread, or NULL after a
/// successful one. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rl_last_error() -> *const c_char {
    LAST.with(|l| l.borrow().1.as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Engine error class of the last failure (0 when not applicable).
#[no_mangle]
pub extern "C" fn rl_last_error_code() -> u32 {
    LAST.with(|l| l.borrow().0)
}

/// SG sharpness for area-light size code `a` in [0, 1].
#[no_mangle]
pub unsafe extern "C" fn rl_sg_sharpness(a: f64, out: *mut f64) -> RlStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = sg_sharpness(a).map_err(engine)?;
        Ok(())
    })
}

/// Size code whose sharpness is `lambda`, clamped to [0, 1].
#[no_mangle]
pub unsafe extern "C" fn rl_size_from_sharpness(lambda: f64, out: *mut f64) -> RlStatus {
    guard(|| {
        let out = out_ptr(out)?;
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(invalid(format!("sharpness {lambda} must be positive")));
        }
        *out = size_from_sharpness(lambda);
        Ok(())
    })
}

/// Degree-3 real SH coefficients of the normalised direction into `out[16]`.
#[no_mangle]
pub unsafe extern "C" fn rl_sh_encode(x: f64, y: f64, z: f64, out: *mut f64) -> RlStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail(RlStatus::NullPointer, 0, "null output pointer".into()));
        }
        let enc = sh_encode(&direction(x, y, z)?);
        std::slice::from_raw_parts_mut(out, SH_COEFFS).copy_from_slice(enc.coefficients());
        Ok(())
    })
}

/// Copies `width * height * 3` interleaved RGB floats into a new image.
#[no_mangle]
pub unsafe extern "C" fn rl_image_new(width: usize, height: usize, data: *const f32, out: *mut *mut RlImage) -> RlStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let n = width.checked_mul(height).and_then(|n| n.checked_mul(3)).ok_or_else(|| invalid("image too large"))?;
        if data.is_null() && n > 0 {
            return Err(Fail(RlStatus::NullPointer, 0, "null pixel data".into()));
        }
        let pixels = if n == 0 { Vec::new() } else { std::slice::from_raw_parts(data, n).to_vec() };
        let img = LinearImage::new(width, height, pixels).map_err(engine)?;
        *out = Box::into_raw(Box::new(RlImage(img)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rl_image_read_pfm(path: *const c_char, out: *mut *mut RlImage) -> RlStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let img = read_pfm_file(path_arg(path)?).map_err(engine)?;
        *out = Box::into_raw(Box::new(RlImage(img)));
        Ok(())
    })
}

/// Little-endian PFM, written atomically.
#[no_mangle]
pub unsafe extern "C" fn rl_image_write_pfm(img: *const RlImage, path: *const c_char) -> RlStatus {
    guard(|| {
        let img = in_ref(img, "image")?;
        write_pfm_file(&img.0, path_arg(path)?).map_err(engine)
    })
}

/// 8-bit sRGB PNG, written atomically.
#[no_mangle]
pub unsafe extern "C" fn rl_image_write_png(img: *const RlImage, path: *const c_char) -> RlStatus {
    guard(|| {
        let img = in_ref(img, "image")?;
        write_png_file(&img.0, BitDepth::Eight, path_arg(path)?).map_err(engine)
    })
}

/// Width in pixels; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn rl_image_width(img: *const RlImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.width())
}

#[no_mangle]
pub unsafe extern "C" fn rl_image_height(img: *const RlImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.height())
}

/// Borrowed pointer to `width * height * 3` floats, row 0 first. Valid
/// until the image is freed.
#[no_mangle]
pub unsafe extern "C" fn rl_image_data(img: *const RlImage) -> *const f32 {
    img.as_ref().map_or(ptr::null(), |i| i.0.data().as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn rl_image_free(img: *mut RlImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Loads a stack manifest; relative frame paths resolve against its folder.
#[no_mangle]
pub unsafe extern "C" fn rl_stack_load(manifest: *const c_char, out: *mut *mut RlStack) -> RlStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let stack = OlatStack::load(path_arg(manifest)?)?;
        *out = Box::into_raw(Box::new(RlStack(stack)));
        Ok(())
    })
}

/// Frame count; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn rl_stack_len(stack: *const RlStack) -> usize {
    stack.as_ref().map_or(0, |s| s.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn rl_stack_free(stack: *mut RlStack) {
    if !stack.is_null() {
        drop(Box::from_raw(stack));
    }
}

/// Reads a lat-long PFM (width = 2 × height).
#[no_mangle]
pub unsafe extern "C" fn rl_env_read_pfm(path: *const c_char, out: *mut *mut RlEnv) -> RlStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let env = EnvironmentMap::new(read_pfm_file(path_arg(path)?).map_err(engine)?).map_err(engine)?;
        *out = Box::into_raw(Box::new(RlEnv(env)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rl_env_free(env: *mut RlEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Weighted sum of frames. `weights` holds `3 * n_frames` values, RGB per
/// frame in stack order.
#[no_mangle]
pub unsafe extern "C" fn rl_composite(
    stack: *const RlStack,
    weights: *const f64,
    n_weights: usize,
    out: *mut *mut RlImage,
) -> RlStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let stack = in_ref(stack, "stack")?;
        if weights.is_null() {
            return Err(Fail(RlStatus::NullPointer, 0, "null weights".into()));
        }
        if n_weights % 3 != 0 {
            return Err(invalid(format!("{n_weights} weights is not a multiple of 3")));
        }
        let w: Vec<[f64; 3]> = std::slice::from_raw_parts(weights, n_weights)
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        let img = composite_values(&stack.0, &w).map_err(engine)?;
        *out = Box::into_raw(Box::new(RlImage(img)));
        Ok(())
    })
}

/// Relights under a light from direction `(x, y, z)` (normalised here) with
/// size code `size` in [0, 1]; 0 is a point light, 1 is flat lighting.
#[no_mangle]
pub unsafe extern "C" fn rl_area_light(
    stack: *const RlStack,
    x: f64,
    y: f64,
    z: f64,
    size: f64,
    out: *mut *mut RlImage,
) -> RlStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let stack = in_ref(stack, "stack")?;
        let light = LightSample::new(direction(x, y, z)?, size).map_err(engine)?;
        *out = Box::into_raw(Box::new(RlImage(area_light_target(&stack.0, &light))));
        Ok(())
    })
}

/// Relights under `env` rotated by `rotation` radians about +z.
#[no_mangle]
pub unsafe extern "C" fn rl_relight_hdri(
    stack: *const RlStack,
    env: *const RlEnv,
    rotation: f64,
    mode: RlMode,
    out: *mut *mut RlImage,
) -> RlStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let stack = in_ref(stack, "stack")?;
        let env = in_ref(env, "environment")?;
        if !rotation.is_finite() {
            return Err(invalid("rotation must be finite"));
        }
        let mode = match mode {
            RlMode::Olat => RelightMode::Olat,
            RlMode::Sg => RelightMode::Sg,
        };
        let result = relight_hdri(&stack.0, &env.0.rotate(rotation), &RelightOptions::with_mode(mode))?;
        *out = Box::into_raw(Box::new(RlImage(result.image)));
        Ok(())
    })
}
