//! C ABI for the faceflow core.
//!
//! Objects cross the boundary as opaque handles that the caller frees with the
//! matching `*_free` function. Every fallible call returns an [`FfStatus`];
//! on failure, [`ff_last_error`] describes the most recent error on the
//! calling thread. No function panics across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use faceflow::decompose::{decompose_flow, fit_head_motion, IrlsConfig, MotionKind};
use faceflow::eval::masked_epe;
use faceflow::face_model::{load_asset, make_synthetic_asset, save_asset, FaceModelAsset, FaceParams};
use faceflow::flow::{compute_decomposed_flows, FlowField, Mask};
use faceflow::io::flo::{read_flo, write_flo};
use faceflow::raster::{Camera, RenderConfig};
use faceflow::sequence::{sample_pair, SequenceSpec};
use faceflow::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfStatus {
    Ok = 0,
    Shape = 1,
    Domain = 2,
    Format = 3,
    Rank = 4,
    Io = 5,
    NullArgument = 6,
    InvalidUtf8 = 7,
    Panic = 8,
}

/// Parametric head motion model used by [`ff_decompose`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfMotionKind {
    Translation = 0,
    Similarity = 1,
    Affine = 2,
}

/// Opaque face model asset.
pub struct FfAsset(FaceModelAsset);

/// Opaque dense flow field.
pub struct FfFlow(FlowField);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> FfStatus {
    match e.kind() {
        "shape" => FfStatus::Shape,
        "format" => FfStatus::Format,
        "rank" => FfStatus::Rank,
        "io" => FfStatus::Io,
        _ => FfStatus::Domain,
    }
}

enum Fail {
    Core(Error),
    Null(&'static str),
    Utf8,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FfStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(name))) => {
            set_last_error(format!("null pointer passed for {name}"));
            FfStatus::NullArgument
        }
        Ok(Err(Fail::Utf8)) => {
            set_last_error("path is not valid UTF-8".into());
            FfStatus::InvalidUtf8
        }
        Err(_) => {
            set_last_error("internal panic".into());
            FfStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, name: &'static str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    CStr::from_ptr(p).to_str().map(PathBuf::from).map_err(|_| Fail::Utf8)
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(name))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

/// Message for the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ff_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a synthetic face model asset.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn ff_asset_synthesize(
    seed: u64,
    num_vertices: usize,
    num_shape: usize,
    num_expression: usize,
    out: *mut *mut FfAsset,
) -> FfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let asset = make_synthetic_asset(seed, num_vertices, num_shape, num_expression)?;
        *out = Box::into_raw(Box::new(FfAsset(asset)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ff_asset_load(path: *const c_char, out: *mut *mut FfAsset) -> FfStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(FfAsset(load_asset(path)?)));
        Ok(())
    })
}

/// # Safety
/// `asset` must come from this library; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ff_asset_save(asset: *const FfAsset, path: *const c_char) -> FfStatus {
    guard(|| {
        let asset = ref_arg(asset, "asset")?;
        save_asset(&asset.0, path_arg(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `asset` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn ff_asset_free(asset: *mut FfAsset) {
    if !asset.is_null() {
        drop(Box::from_raw(asset));
    }
}

/// Writes vertex, triangle, shape, expression and joint counts to `dims[0..5]`.
///
/// # Safety
/// `asset` must be a live handle; `dims` must point to 5 writable `size_t`.
#[no_mangle]
pub unsafe extern "C" fn ff_asset_dimensions(asset: *const FfAsset, dims: *mut usize) -> FfStatus {
    guard(|| {
        let a = &ref_arg(asset, "asset")?.0;
        if dims.is_null() {
            return Err(Fail::Null("dims"));
        }
        let d = std::slice::from_raw_parts_mut(dims, 5);
        d.copy_from_slice(&[a.num_vertices(), a.num_triangles(), a.num_shape(), a.num_expression(), a.num_joints()]);
        Ok(())
    })
}

/// Zero flow of the given size.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ff_flow_new(width: usize, height: usize, out: *mut *mut FfFlow) -> FfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if width == 0 || height == 0 {
            return Err(Error::Domain("flow dimensions must be positive".into()).into());
        }
        *out = Box::into_raw(Box::new(FfFlow(FlowField::zeros(width, height))));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ff_flow_read(path: *const c_char, out: *mut *mut FfFlow) -> FfStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(FfFlow(read_flo(path)?)));
        Ok(())
    })
}

/// # Safety
/// `flow` must be a live handle; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ff_flow_write(flow: *const FfFlow, path: *const c_char) -> FfStatus {
    guard(|| {
        let flow = ref_arg(flow, "flow")?;
        write_flo(&flow.0, path_arg(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `flow` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn ff_flow_free(flow: *mut FfFlow) {
    if !flow.is_null() {
        drop(Box::from_raw(flow));
    }
}

/// Width in pixels, or 0 for a null handle.
///
/// # Safety
/// `flow` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_flow_width(flow: *const FfFlow) -> usize {
    flow.as_ref().map_or(0, |f| f.0.width)
}

/// Height in pixels, or 0 for a null handle.
///
/// # Safety
/// `flow` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_flow_height(flow: *const FfFlow) -> usize {
    flow.as_ref().map_or(0, |f| f.0.height)
}

/// Row-major interleaved `(u, v)` values, `2 * width * height` floats.
/// Invalid pixels hold `1e10`. Valid while the handle lives.
///
/// # Safety
/// `flow` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_flow_data(flow: *const FfFlow) -> *const f32 {
    flow.as_ref().map_or(std::ptr::null(), |f| f.0.data.as_ptr().cast())
}

/// Copies `2 * width * height` interleaved values into the flow. Components
/// above `1e9` in magnitude or non-finite mark the pixel invalid.
///
/// # Safety
/// `flow` must be a live handle; `values` must hold `len` floats.
#[no_mangle]
pub unsafe extern "C" fn ff_flow_set_data(flow: *mut FfFlow, values: *const f32, len: usize) -> FfStatus {
    guard(|| {
        let f = &mut out_arg(flow, "flow")?.0;
        let v = slice_arg(values, len, "values")?;
        if len != 2 * f.data.len() {
            return Err(Error::Shape(format!("expected {} values, got {len}", 2 * f.data.len())).into());
        }
        for i in 0..f.data.len() {
            let (u, w) = (v[2 * i], v[2 * i + 1]);
            if u.is_finite() && w.is_finite() && u.abs() <= faceflow::flow::UNKNOWN_FLOW_THRESHOLD
                && w.abs() <= faceflow::flow::UNKNOWN_FLOW_THRESHOLD
            {
                f.data[i] = [u, w];
                f.valid[i] = true;
            } else {
                f.set_invalid(i);
            }
        }
        Ok(())
    })
}

unsafe fn mask_arg(mask: *const u8, len: usize, width: usize, height: usize) -> Result<Mask, Fail> {
    if mask.is_null() {
        return Ok(Mask::full(width, height));
    }
    let bits = slice_arg(mask, len, "mask")?.iter().map(|&b| b != 0).collect();
    Ok(Mask::new(width, height, bits)?)
}

/// Mean endpoint error over pixels where `mask` is nonzero and both flows are
/// valid. A null `mask` selects every pixel.
///
/// # Safety
/// Handles must be live; `mask` must be null or hold `mask_len` bytes;
/// `out_epe` and `out_count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ff_masked_epe(
    pred: *const FfFlow,
    gt: *const FfFlow,
    mask: *const u8,
    mask_len: usize,
    out_epe: *mut f64,
    out_count: *mut usize,
) -> FfStatus {
    guard(|| {
        let pred = &ref_arg(pred, "pred")?.0;
        let gt = &ref_arg(gt, "gt")?.0;
        let mask = mask_arg(mask, mask_len, gt.width, gt.height)?;
        let r = masked_epe(pred, gt, &mask)?;
        *out_arg(out_epe, "out_epe")? = r.aggregate;
        *out_arg(out_count, "out_count")? = r.count;
        Ok(())
    })
}

/// Ground-truth facial, head and expression flow for pair `t` of an
/// `n`-frame sequence toward `target`, rendered with the default head camera.
/// Any `n >= 2` is accepted.
///
/// # Safety
/// `asset` must be live; each parameter array must hold its stated length;
/// the three output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ff_generate_pair(
    asset: *const FfAsset,
    beta: *const f64,
    beta_len: usize,
    psi: *const f64,
    psi_len: usize,
    theta: *const f64,
    theta_len: usize,
    n: usize,
    t: usize,
    width: usize,
    height: usize,
    out_facial: *mut *mut FfFlow,
    out_head: *mut *mut FfFlow,
    out_expression: *mut *mut FfFlow,
) -> FfStatus {
    guard(|| {
        let asset = &ref_arg(asset, "asset")?.0;
        let target = FaceParams {
            beta: slice_arg(beta, beta_len, "beta")?.to_vec(),
            psi: slice_arg(psi, psi_len, "psi")?.to_vec(),
            theta: slice_arg(theta, theta_len, "theta")?.to_vec(),
        };
        let (of, oh, oe) = (out_arg(out_facial, "out_facial")?, out_arg(out_head, "out_head")?, out_arg(out_expression, "out_expression")?);
        let spec = SequenceSpec { target, n, seed: 0, allow_any_length: true };
        spec.validate(asset)?;
        let sample = sample_pair(asset, &spec, t)?;
        let flows = compute_decomposed_flows(&sample, &Camera::head_default(width, height)?, &RenderConfig::default())?;
        *of = Box::into_raw(Box::new(FfFlow(flows.facial)));
        *oh = Box::into_raw(Box::new(FfFlow(flows.head)));
        *oe = Box::into_raw(Box::new(FfFlow(flows.expression)));
        Ok(())
    })
}

/// Fits a head motion model to `flow` on `mask` with Tukey IRLS and splits the
/// flow into head and expression parts. `coefficients` receives up to 6
/// model coefficients (2, 4 or 6 by kind). A null `mask` selects every pixel.
///
/// # Safety
/// `flow` must be live; `mask` must be null or hold `mask_len` bytes;
/// `coefficients` must hold 6 doubles; the output handles must be writable.
#[no_mangle]
pub unsafe extern "C" fn ff_decompose(
    flow: *const FfFlow,
    mask: *const u8,
    mask_len: usize,
    kind: FfMotionKind,
    coefficients: *mut f64,
    out_head: *mut *mut FfFlow,
    out_expression: *mut *mut FfFlow,
) -> FfStatus {
    guard(|| {
        let flow = &ref_arg(flow, "flow")?.0;
        let mask = mask_arg(mask, mask_len, flow.width, flow.height)?;
        let kind = match kind {
            FfMotionKind::Translation => MotionKind::Translation,
            FfMotionKind::Similarity => MotionKind::Similarity,
            FfMotionKind::Affine => MotionKind::Affine,
        };
        if coefficients.is_null() {
            return Err(Fail::Null("coefficients"));
        }
        let (oh, oe) = (out_arg(out_head, "out_head")?, out_arg(out_expression, "out_expression")?);
        let (model, _) = fit_head_motion(flow, &mask, kind, &IrlsConfig::tukey())?;
        let (head, expr) = decompose_flow(flow, &mask, &model, false)?;
        let c = std::slice::from_raw_parts_mut(coefficients, 6);
        c.fill(0.0);
        c[..model.coefficients.len()].copy_from_slice(&model.coefficients);
        *oh = Box::into_raw(Box::new(FfFlow(head)));
        *oe = Box::into_raw(Box::new(FfFlow(expr)));
        Ok(())
    })
}
