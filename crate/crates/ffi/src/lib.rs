//! C ABI over critmetro.
//!
//! Every call returns a [`CmStatus`]; on anything but `CM_OK` the message is
//! available from [`cm_last_error`] until the next failing call on the same
//! thread. Handles are opaque and owned by the caller, who frees them with
//! the matching `_free`. Panics are caught at the boundary and reported as
//! `CM_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use critmetro::eigen::ground_state;
use critmetro::freefermion::xy_rotation_metrology;
use critmetro::metrology::{metro_point, quantumness, Method, MetroOptions, MetroTensors};
use critmetro::{Error, ModelSpec, SpinAxis};
use nalgebra::DMatrix;

#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmStatus {
    CM_OK = 0,
    CM_NULL_POINTER = 1,
    CM_INVALID_ARGUMENT = 2,
    CM_SIZE_CAP = 3,
    /// Solver, fit or loop failure.
    CM_NUMERICAL = 4,
    /// The requested quantity is undefined here (e.g. singular F).
    CM_UNDEFINED = 5,
    CM_BUFFER_TOO_SMALL = 6,
    CM_PANIC = 7,
}

#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmModelKind {
    CM_FERRO_ISING = 0,
    CM_ANTIFERRO_ISING = 1,
    CM_XY_CHAIN = 2,
}

#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmMethod {
    CM_FIDELITY_BARGMANN = 0,
    CM_EXACT_ROTATION = 1,
}

/// Axis bits for parameter selection.
pub const CM_AXIS_X: u32 = 1;
pub const CM_AXIS_Y: u32 = 2;
pub const CM_AXIS_Z: u32 = 4;

pub struct CmModel {
    spec: ModelSpec,
    opts: MetroOptions,
}

pub struct CmTensors {
    inner: MetroTensors,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CmStatus {
    match e {
        Error::InvalidModel(_) | Error::InvalidInput(_) | Error::Config(_) | Error::DimensionMismatch { .. } => CmStatus::CM_INVALID_ARGUMENT,
        Error::SizeCap { .. } | Error::DenseTooLarge(_) => CmStatus::CM_SIZE_CAP,
        Error::SingularFisher => CmStatus::CM_UNDEFINED,
        _ => CmStatus::CM_NUMERICAL,
    }
}

/// Run `f` behind the panic boundary, recording any error.
fn guard(f: impl FnOnce() -> Result<(), (CmStatus, String)>) -> CmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CmStatus::CM_OK,
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned()).unwrap_or_else(|| "panic".into());
            set_error(&format!("panic: {msg}"));
            CmStatus::CM_PANIC
        }
    }
}

fn core(e: Error) -> (CmStatus, String) {
    (status_of(&e), e.to_string())
}

fn null() -> (CmStatus, String) {
    (CmStatus::CM_NULL_POINTER, "null pointer argument".into())
}

fn axes_from_mask(mask: u32) -> Result<Vec<SpinAxis>, (CmStatus, String)> {
    if mask == 0 || mask & !7 != 0 {
        return Err((CmStatus::CM_INVALID_ARGUMENT, format!("axis mask {mask} must be a nonzero combination of CM_AXIS_*")));
    }
    Ok(SpinAxis::ALL.into_iter().filter(|a| mask & (1 << a.index()) != 0).collect())
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn cm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Create a model. `h` (three reals) is read for the Ising kinds and may be
/// null for the XY chain; `gamma` and `lambda` are read for the XY chain.
///
/// # Safety
/// `h` is null or points to 3 readable doubles; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cm_model_new(kind: CmModelKind, n: usize, h: *const f64, gamma: f64, lambda: f64, out: *mut *mut CmModel) -> CmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let spec = match kind {
            CmModelKind::CM_XY_CHAIN => ModelSpec::xy(n, gamma, lambda),
            _ => {
                if h.is_null() {
                    return Err(null());
                }
                let h = [*h, *h.add(1), *h.add(2)];
                if kind == CmModelKind::CM_FERRO_ISING {
                    ModelSpec::ferro(n, h)
                } else {
                    ModelSpec::antiferro(n, h)
                }
            }
        };
        // the XY chain at large n is only reachable through free fermions
        if kind != CmModelKind::CM_XY_CHAIN || n <= spec.max_spins {
            spec.validate().map_err(core)?;
        }
        *out = Box::into_raw(Box::new(CmModel { spec, opts: MetroOptions::default() }));
        Ok(())
    })
}

/// # Safety
/// `model` is null or was returned by `cm_model_new` and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cm_model_free(model: *mut CmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Ground-state energy and gap by exact diagonalization.
///
/// # Safety
/// `model` is a live handle; `e0` and `gap` are valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cm_ground_energy(model: *const CmModel, e0: *mut f64, gap: *mut f64) -> CmStatus {
    guard(|| {
        let (Some(m), false, false) = (model.as_ref(), e0.is_null(), gap.is_null()) else {
            return Err(null());
        };
        let g = ground_state(&m.spec, &m.opts.solver).map_err(core)?;
        *e0 = g.e0;
        *gap = g.gap;
        Ok(())
    })
}

/// F, U and quantumness at `point` for the axes in `axis_mask`. For Ising
/// chains `point` is the field; for the XY chain it is the rotation angle.
///
/// # Safety
/// `model` is a live handle; `point` points to 3 readable doubles; `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn cm_metro_point(model: *const CmModel, point: *const f64, axis_mask: u32, method: CmMethod, out: *mut *mut CmTensors) -> CmStatus {
    guard(|| {
        let (Some(m), false, false) = (model.as_ref(), point.is_null(), out.is_null()) else {
            return Err(null());
        };
        *out = ptr::null_mut();
        let axes = axes_from_mask(axis_mask)?;
        let p = [*point, *point.add(1), *point.add(2)];
        let method = match method {
            CmMethod::CM_FIDELITY_BARGMANN => Method::FidelityBargmann,
            CmMethod::CM_EXACT_ROTATION => Method::ExactRotation,
        };
        let t = metro_point(&m.spec, &p, &axes, method, &m.opts).map_err(core)?;
        *out = Box::into_raw(Box::new(CmTensors { inner: t }));
        Ok(())
    })
}

/// XY-chain rotation tensors for all three angles by free fermions.
///
/// # Safety
/// `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cm_xy_rotation(n: usize, gamma: f64, lambda: f64, out: *mut *mut CmTensors) -> CmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let t = xy_rotation_metrology(n, gamma, lambda).map_err(core)?;
        *out = Box::into_raw(Box::new(CmTensors { inner: t }));
        Ok(())
    })
}

/// # Safety
/// `t` is null or was returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cm_tensors_free(t: *mut CmTensors) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of parameters p; F and U are p×p.
///
/// # Safety
/// `t` is a live handle or null (yielding 0).
#[no_mangle]
pub unsafe extern "C" fn cm_tensors_dim(t: *const CmTensors) -> usize {
    t.as_ref().map_or(0, |t| t.inner.params.len())
}

unsafe fn copy_matrix(m: &DMatrix<f64>, buf: *mut f64, len: usize) -> Result<(), (CmStatus, String)> {
    if buf.is_null() {
        return Err(null());
    }
    let p = m.nrows();
    if len < p * p {
        return Err((CmStatus::CM_BUFFER_TOO_SMALL, format!("need {} doubles, got {len}", p * p)));
    }
    for i in 0..p {
        for j in 0..p {
            *buf.add(i * p + j) = m[(i, j)];
        }
    }
    Ok(())
}

/// Copy F, row-major, into `buf` (at least p² doubles).
///
/// # Safety
/// `t` is a live handle; `buf` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cm_tensors_f(t: *const CmTensors, buf: *mut f64, len: usize) -> CmStatus {
    guard(|| copy_matrix(&t.as_ref().ok_or_else(null)?.inner.f, buf, len))
}

/// Copy U, row-major, into `buf` (at least p² doubles).
///
/// # Safety
/// `t` is a live handle; `buf` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cm_tensors_u(t: *const CmTensors, buf: *mut f64, len: usize) -> CmStatus {
    guard(|| copy_matrix(&t.as_ref().ok_or_else(null)?.inner.u, buf, len))
}

/// Quantumness over all parameters of the handle; `CM_UNDEFINED` when F is
/// singular or too ill-conditioned.
///
/// # Safety
/// `t` is a live handle; `r` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cm_tensors_r_full(t: *const CmTensors, r: *mut f64) -> CmStatus {
    guard(|| {
        let (Some(t), false) = (t.as_ref(), r.is_null()) else {
            return Err(null());
        };
        let q = t.inner.r_full.ok_or((CmStatus::CM_UNDEFINED, "R_full undefined".to_string()))?;
        *r = q.value;
        Ok(())
    })
}

/// Quantumness of the parameter pair (i, j), indices into the handle's axes.
///
/// # Safety
/// `t` is a live handle; `r` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cm_tensors_r_pair(t: *const CmTensors, i: usize, j: usize, r: *mut f64) -> CmStatus {
    guard(|| {
        let (Some(t), false) = (t.as_ref(), r.is_null()) else {
            return Err(null());
        };
        let p = &t.inner.params;
        if i >= p.len() || j >= p.len() || i == j {
            return Err((CmStatus::CM_INVALID_ARGUMENT, format!("pair ({i}, {j}) out of range for {} parameters", p.len())));
        }
        let q = t.inner.r_pair(p[i], p[j]).ok_or((CmStatus::CM_UNDEFINED, "pairwise R undefined".to_string()))?;
        *r = q.value;
        Ok(())
    })
}

/// R = ‖2iF⁻¹U‖ for caller-supplied row-major p×p tensors.
///
/// # Safety
/// `f` and `u` point to p² readable doubles; `r` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cm_quantumness(p: usize, f: *const f64, u: *const f64, r: *mut f64) -> CmStatus {
    guard(|| {
        if f.is_null() || u.is_null() || r.is_null() {
            return Err(null());
        }
        if p == 0 || p > 64 {
            return Err((CmStatus::CM_INVALID_ARGUMENT, format!("p = {p} out of range")));
        }
        let fm = DMatrix::from_row_slice(p, p, std::slice::from_raw_parts(f, p * p));
        let um = DMatrix::from_row_slice(p, p, std::slice::from_raw_parts(u, p * p));
        *r = quantumness(&fm, &um).map_err(core)?.value;
        Ok(())
    })
}
