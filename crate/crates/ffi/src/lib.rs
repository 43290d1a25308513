//! C ABI over the slabsum solvers.
//!
//! Instances and verdicts are opaque heap handles. Every function returns a
//! [`SlabsumStatus`]; on failure the message is available from
//! [`slabsum_last_error`] on the same thread. Strings handed out by this
//! library must be released with [`slabsum_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use slabsum::instance::{Instance, InstanceFile, PartitionInstance};
use slabsum::numerics::{rational_from_f64, rational_to_f64};
use slabsum::quantize::Resolution;
use slabsum::slab::{decide, epsilon_api, SlabVerdict};
use slabsum::sssp::{solve, SsspOptions};
use slabsum::Error;

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlabsumStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// Malformed text or an argument out of range.
    InvalidArgument = 2,
    /// Instance data violated an invariant.
    InvalidInstance = 3,
    /// A configured cap would be exceeded.
    Resource = 4,
    /// The output buffer is too small; the required length was written.
    BufferTooSmall = 5,
    /// Internal failure (a caught panic).
    Internal = 6,
}

/// Which alternative a verdict holds.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlabsumVerdictKind {
    EmptyInner = 0,
    VertexFound = 1,
}

/// Opaque partition instance.
pub struct SlabsumInstance(PartitionInstance);

/// Opaque slab verdict.
pub struct SlabsumVerdict(SlabVerdict);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> SlabsumStatus {
    match e {
        Error::Resource { .. } => SlabsumStatus::Resource,
        Error::InvalidInstance(_) | Error::QuantizationUnderflow { .. } => {
            SlabsumStatus::InvalidInstance
        }
        _ => SlabsumStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (SlabsumStatus, String)>) -> SlabsumStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SlabsumStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error");
            SlabsumStatus::Internal
        }
    }
}

fn fail(e: Error) -> (SlabsumStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SlabsumStatus, String) {
    (SlabsumStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SlabsumStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        (
            SlabsumStatus::InvalidArgument,
            format!("{what} is not UTF-8"),
        )
    })
}

fn give_string(s: String) -> *mut c_char {
    CString::new(s)
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn slabsum_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a partition instance file.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slabsum_instance_from_json(
    json: *const c_char,
    out: *mut *mut SlabsumInstance,
) -> SlabsumStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(json, "json")?;
        let file = InstanceFile::from_json(text).map_err(fail)?;
        let Instance::Partition(p) = file.instance else {
            return Err((
                SlabsumStatus::InvalidInstance,
                format!(
                    "expected a partition instance, got `{}`",
                    file.instance.kind()
                ),
            ));
        };
        *out = Box::into_raw(Box::new(SlabsumInstance(p)));
        Ok(())
    })
}

/// Builds a partition instance from `len` machine-word weights.
///
/// # Safety
/// `weights` must point to `len` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slabsum_instance_from_weights(
    weights: *const u64,
    len: usize,
    out: *mut *mut SlabsumInstance,
) -> SlabsumStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if weights.is_null() {
            return Err(null("weights"));
        }
        let w = std::slice::from_raw_parts(weights, len);
        let p = PartitionInstance::from_u64(w).map_err(fail)?;
        *out = Box::into_raw(Box::new(SlabsumInstance(p)));
        Ok(())
    })
}

/// Number of weights, or 0 for a null handle.
///
/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn slabsum_instance_len(inst: *const SlabsumInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.0.n())
}

/// # Safety
/// `inst` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slabsum_instance_free(inst: *mut SlabsumInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Slab decision at `N = n^c`.
///
/// # Safety
/// `inst` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slabsum_decide(
    inst: *const SlabsumInstance,
    c: u32,
    out: *mut *mut SlabsumVerdict,
) -> SlabsumStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(|| null("inst"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = decide(&inst.0, &Resolution::Exponent(c)).map_err(fail)?;
        *out = Box::into_raw(Box::new(SlabsumVerdict(v)));
        Ok(())
    })
}

/// Slab decision at accuracy `epsilon ∈ (0, 1)`.
///
/// # Safety
/// `inst` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slabsum_solve_epsilon(
    inst: *const SlabsumInstance,
    epsilon: f64,
    out: *mut *mut SlabsumVerdict,
) -> SlabsumStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(|| null("inst"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let eps = rational_from_f64(epsilon).ok_or_else(|| {
            (
                SlabsumStatus::InvalidArgument,
                "epsilon is not finite".to_string(),
            )
        })?;
        let v = epsilon_api(&inst.0, &eps).map_err(fail)?;
        *out = Box::into_raw(Box::new(SlabsumVerdict(v.verdict)));
        Ok(())
    })
}

/// # Safety
/// `v` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn slabsum_verdict_kind(v: *const SlabsumVerdict) -> SlabsumVerdictKind {
    match v.as_ref() {
        Some(v) if !v.0.is_empty_inner() => SlabsumVerdictKind::VertexFound,
        _ => SlabsumVerdictKind::EmptyInner,
    }
}

/// 1 when the certificate check failed, else 0.
///
/// # Safety
/// `v` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn slabsum_verdict_anomaly(v: *const SlabsumVerdict) -> i32 {
    v.as_ref().map_or(0, |v| i32::from(v.0.has_anomaly()))
}

/// Relative error of the found vertex, or NaN for an empty-inner verdict.
///
/// # Safety
/// `v` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn slabsum_verdict_rel_error(v: *const SlabsumVerdict) -> f64 {
    v.as_ref()
        .and_then(|v| v.0.rel_error().map(rational_to_f64))
        .unwrap_or(f64::NAN)
}

/// Copies the found vertex into `buf`. `len` receives the vertex length
/// (0 for an empty-inner verdict) even when `cap` is too small.
///
/// # Safety
/// `v` must be a live handle, `buf` writable for `cap` bytes, `len` writable.
#[no_mangle]
pub unsafe extern "C" fn slabsum_verdict_vertex(
    v: *const SlabsumVerdict,
    buf: *mut u8,
    cap: usize,
    len: *mut usize,
) -> SlabsumStatus {
    guard(|| {
        let v = v.as_ref().ok_or_else(|| null("verdict"))?;
        if len.is_null() {
            return Err(null("len"));
        }
        let x = v.0.vertex().unwrap_or(&[]);
        *len = x.len();
        if x.len() > cap {
            return Err((
                SlabsumStatus::BufferTooSmall,
                format!("need {} bytes", x.len()),
            ));
        }
        if !x.is_empty() {
            if buf.is_null() {
                return Err(null("buf"));
            }
            ptr::copy_nonoverlapping(x.as_ptr(), buf, x.len());
        }
        Ok(())
    })
}

/// Verdict as JSON; release with [`slabsum_string_free`].
///
/// # Safety
/// `v` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slabsum_verdict_to_json(
    v: *const SlabsumVerdict,
    out: *mut *mut c_char,
) -> SlabsumStatus {
    guard(|| {
        let v = v.as_ref().ok_or_else(|| null("verdict"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = give_string(v.0.to_json());
        Ok(())
    })
}

/// # Safety
/// `v` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slabsum_verdict_free(v: *mut SlabsumVerdict) {
    if !v.is_null() {
        drop(Box::from_raw(v));
    }
}

/// Runs the simultaneous subset-sum search on an instance file with
/// default options and writes the result JSON to `out`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slabsum_solve_sssp_json(
    json: *const c_char,
    out: *mut *mut c_char,
) -> SlabsumStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(json, "json")?;
        let file = InstanceFile::from_json(text).map_err(fail)?;
        let Instance::Sssp(inst) = file.instance else {
            return Err((
                SlabsumStatus::InvalidInstance,
                format!("expected an sssp instance, got `{}`", file.instance.kind()),
            ));
        };
        let res = solve(&inst, &SsspOptions::default()).map_err(fail)?;
        *out = give_string(res.to_json());
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slabsum_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
