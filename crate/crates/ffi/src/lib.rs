//! C ABI for the channel-simulation core.
//!
//! Every fallible function returns an [`EmchanStatus`]; on failure the
//! message is kept per thread and read with [`emchan_last_error`]. Objects
//! cross the boundary as opaque handles that the caller frees exactly once.
//! Panics are caught at the boundary and reported as `EMCHAN_PANIC`.

use emchan::capacity::dbm_to_power;
use emchan::geom::Vec3;
use emchan::optim::{solve_p1, water_fill};
use emchan::swf::{Geometry, Medium, RadiationOperator};
use emchan::Error;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmchanStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Singular = 4,
    NoConvergence = 5,
    Internal = 6,
    Panic = 7,
}

/// Complex number laid out as two doubles.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EmchanComplex {
    pub re: f64,
    pub im: f64,
}

impl From<EmchanComplex> for Complex64 {
    fn from(c: EmchanComplex) -> Self {
        Complex64::new(c.re, c.im)
    }
}

impl From<Complex64> for EmchanComplex {
    fn from(c: Complex64) -> Self {
        EmchanComplex { re: c.re, im: c.im }
    }
}

/// Opaque radiation operator between the Tx and Rx balls.
pub struct EmchanOperator {
    inner: RadiationOperator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EmchanStatus {
    match e {
        Error::Domain { .. } | Error::ExpansionValidity { .. } => EmchanStatus::Domain,
        Error::Singularity { .. } | Error::IllConditioned { .. } => EmchanStatus::Singular,
        Error::Convergence { .. } | Error::Accuracy { .. } => EmchanStatus::NoConvergence,
        Error::Precondition { .. } | Error::Config(_) => EmchanStatus::InvalidArgument,
        Error::Realization { source, .. } => status_of(source),
        _ => EmchanStatus::Internal,
    }
}

/// Runs `f`, recording any error or panic for `emchan_last_error`.
fn guard<F>(f: F) -> EmchanStatus
where
    F: FnOnce() -> Result<(), (EmchanStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EmchanStatus::Ok,
        Ok(Err((status, msg))) => {
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
            EmchanStatus::Panic
        }
    }
}

fn core(e: Error) -> (EmchanStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (EmchanStatus, String) {
    (EmchanStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (EmchanStatus, String) {
    (EmchanStatus::InvalidArgument, msg.into())
}

/// Borrows `len` elements, allowing a null pointer only when `len` is 0.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (EmchanStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], (EmchanStatus, String)> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (EmchanStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn emchan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`) and returns the full message length
/// without the terminator; 0 when no error has been recorded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn emchan_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// dBm to watts, with 30 dBm = 1.
#[no_mangle]
pub extern "C" fn emchan_dbm_to_power(dbm: f64) -> f64 {
    dbm_to_power(dbm)
}

/// Builds the radiation operator for Tx radius `r_t`, Rx radius `r_r` and
/// centre distance `distance` (metres) in vacuum at `frequency` (Hz).
/// `n_trunc` = 0 selects the default truncation ⌈kR_t⌉ + 10.
///
/// # Safety
/// `out_handle` must be a valid pointer; the handle written there is freed
/// with `emchan_operator_free`.
#[no_mangle]
pub unsafe extern "C" fn emchan_operator_new(
    r_t: f64,
    r_r: f64,
    distance: f64,
    frequency: f64,
    n_trunc: usize,
    out_handle: *mut *mut EmchanOperator,
) -> EmchanStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        *slot = ptr::null_mut();
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(invalid("frequency must be positive and finite"));
        }
        let g = Geometry { r_t, r_r, distance };
        let n = (n_trunc > 0).then_some(n_trunc);
        let op = RadiationOperator::new(g, Medium::vacuum(frequency), n).map_err(core)?;
        *slot = Box::into_raw(Box::new(EmchanOperator { inner: op }));
        Ok(())
    })
}

/// Frees an operator; null is ignored.
///
/// # Safety
/// `handle` must come from `emchan_operator_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn emchan_operator_free(handle: *mut EmchanOperator) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of modes P_max = 2N(N+2) held by the operator.
///
/// # Safety
/// `handle` and `out_count` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn emchan_operator_mode_count(
    handle: *const EmchanOperator,
    out_count: *mut usize,
) -> EmchanStatus {
    guard(|| {
        let op = handle.as_ref().ok_or_else(|| null("handle"))?;
        *out(out_count, "out_count")? = op.inner.mode_count();
        Ok(())
    })
}

/// Writes the first `len` singular values σ_p (V/A) in mode order.
///
/// # Safety
/// `handle` must be valid and `out_sigma` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn emchan_operator_singular_values(
    handle: *const EmchanOperator,
    out_sigma: *mut f64,
    len: usize,
) -> EmchanStatus {
    guard(|| {
        let op = handle.as_ref().ok_or_else(|| null("handle"))?;
        if len > op.inner.sigma.len() {
            return Err(invalid(format!(
                "len {len} exceeds the {} available modes",
                op.inner.sigma.len()
            )));
        }
        slice_mut(out_sigma, len, "out_sigma")?.copy_from_slice(&op.inner.sigma[..len]);
        Ok(())
    })
}

/// Field at `point` (x, y, z in metres) radiated by the mode coefficients
/// `j[0..len]`, written as Cartesian components to `out_field[0..3]`.
///
/// # Safety
/// `handle` must be valid, `j` must hold `len` values, `point` three doubles
/// and `out_field` three complex values.
#[no_mangle]
pub unsafe extern "C" fn emchan_operator_radiate(
    handle: *const EmchanOperator,
    j: *const EmchanComplex,
    len: usize,
    point: *const f64,
    out_field: *mut EmchanComplex,
) -> EmchanStatus {
    guard(|| {
        let op = handle.as_ref().ok_or_else(|| null("handle"))?;
        let j: Vec<Complex64> = slice(j, len, "j")?.iter().map(|&c| c.into()).collect();
        let p = slice(point, 3, "point")?;
        let dst = slice_mut(out_field, 3, "out_field")?;
        let e = op.inner.radiate(&j, &Vec3::new(p[0], p[1], p[2])).map_err(core)?;
        let c = e.to_cartesian();
        for (d, v) in dst.iter_mut().zip(c.c) {
            *d = v.into();
        }
        Ok(())
    })
}

/// Water-filling over `len` modes with gains `sigma`: writes |j_p|² to
/// `out_power` and the water level and active-mode count to the scalars.
///
/// # Safety
/// `sigma` and `out_power` must hold `len` doubles; the scalar outputs must
/// be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn emchan_water_fill(
    sigma: *const f64,
    len: usize,
    p_t: f64,
    noise: f64,
    out_power: *mut f64,
    out_water_level: *mut f64,
    out_dof: *mut usize,
) -> EmchanStatus {
    guard(|| {
        let sigma = slice(sigma, len, "sigma")?;
        let power = slice_mut(out_power, len, "out_power")?;
        let level = out(out_water_level, "out_water_level")?;
        let dof = out(out_dof, "out_dof")?;
        let alloc = water_fill(sigma, p_t, noise).map_err(core)?;
        power.copy_from_slice(&alloc.power);
        *level = alloc.water_level;
        *dof = alloc.dof;
        Ok(())
    })
}

/// Minimises ‖Bj − s‖² subject to ‖j‖² ≤ P_T for the row-major `rows` ×
/// `cols` matrix `b` and targets `s[0..rows]`. Writes j to `out_j[0..cols]`,
/// the multiplier to `out_lambda` and Σ|Bj − s|²/Σ|s|² to `out_err`.
///
/// # Safety
/// Array arguments must hold the stated number of elements and the scalar
/// outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn emchan_solve_p1(
    b: *const EmchanComplex,
    rows: usize,
    cols: usize,
    s: *const EmchanComplex,
    p_t: f64,
    out_j: *mut EmchanComplex,
    out_lambda: *mut f64,
    out_err: *mut f64,
) -> EmchanStatus {
    guard(|| {
        let n = rows.checked_mul(cols).ok_or_else(|| invalid("matrix size overflows"))?;
        let b = slice(b, n, "b")?;
        let s = slice(s, rows, "s")?;
        let dst = slice_mut(out_j, cols, "out_j")?;
        let lambda = out(out_lambda, "out_lambda")?;
        let e = out(out_err, "out_err")?;
        let bm = DMatrix::from_row_iterator(rows, cols, b.iter().map(|&c| Complex64::from(c)));
        let sv = DVector::from_iterator(rows, s.iter().map(|&c| Complex64::from(c)));
        let sol = solve_p1(&bm, &sv, p_t).map_err(core)?;
        for (d, v) in dst.iter_mut().zip(&sol.j) {
            *d = (*v).into();
        }
        *lambda = sol.lambda;
        *e = sol.err;
        Ok(())
    })
}
