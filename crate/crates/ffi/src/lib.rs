//! C ABI over `bitstream_lab`.
//!
//! Bit strings cross the boundary as arrays of bytes holding 0 or 1. Every
//! function returns a `BslStatus`; on failure a description is available
//! from `bsl_last_error` until the next call on the same thread. Panics
//! are caught and reported as `BslStatus::Panic`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use bitstream_lab::distance::l2_rearrangement;
use bitstream_lab::geometry::lengths_set;
use bitstream_lab::recovery::run_round_trips;
use bitstream_lab::{BitArray, Distance, Error, Mode, Output, StreamState};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BslStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    ConstructionInfeasible = 4,
    CorruptInstance = 5,
    DecodeFailure = 6,
    Overflow = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BslMode {
    Conv = 0,
    L2 = 1,
}

/// One engine output. `finite` is false only for an L2 distance between
/// strings with different numbers of ones; `value` is then 0.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BslOutput {
    pub value: u64,
    pub finite: bool,
}

/// Opaque streaming engine.
pub struct BslStream {
    inner: StreamState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> BslStatus {
    match e {
        Error::InvalidArgument(_)
        | Error::OracleScaleExceeded { .. }
        | Error::NoValidPermutation
        | Error::GeometryOverflow { .. }
        | Error::WidthOverCap { .. } => BslStatus::InvalidArgument,
        Error::ConstructionInfeasible(_) => BslStatus::ConstructionInfeasible,
        Error::CorruptInstance { .. } => BslStatus::CorruptInstance,
        Error::DecodeFailure { .. } => BslStatus::DecodeFailure,
        Error::Overflow(_) => BslStatus::Overflow,
    }
}

fn fail(status: BslStatus, msg: &str) -> BslStatus {
    set_last_error(msg);
    status
}

/// Runs `f`, clearing the last error first and converting panics.
fn guarded(f: impl FnOnce() -> BslStatus) -> BslStatus {
    set_last_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(BslStatus::Panic, "internal panic"),
    }
}

fn from_lib(r: bitstream_lab::Result<BslStatus>) -> BslStatus {
    r.unwrap_or_else(|e| fail(status_of(&e), &e.to_string()))
}

unsafe fn read_bits(ptr: *const u8, len: usize) -> Result<BitArray, BslStatus> {
    if len == 0 {
        return Ok(BitArray::default());
    }
    if ptr.is_null() {
        return Err(fail(BslStatus::NullPointer, "bit array pointer is null"));
    }
    let bytes = std::slice::from_raw_parts(ptr, len);
    if let Some(i) = bytes.iter().position(|&b| b > 1) {
        return Err(fail(
            BslStatus::InvalidArgument,
            &format!("byte {i} is neither 0 nor 1"),
        ));
    }
    Ok(BitArray::from_bools(bytes.iter().map(|&b| b == 1)))
}

fn output_of(d: Distance) -> BslOutput {
    match d {
        Distance::Finite(v) => BslOutput {
            value: v,
            finite: true,
        },
        Distance::Infinite => BslOutput {
            value: 0,
            finite: false,
        },
    }
}

/// NUL-terminated crate version. Static; do not free.
#[no_mangle]
pub extern "C" fn bsl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Description of the last failure on this thread, or an empty string.
/// Valid until the next `bsl_` call on this thread; do not free.
#[no_mangle]
pub extern "C" fn bsl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates an engine for `pattern` (length `len`). The window starts as all
/// zeros. Free with `bsl_stream_free`.
#[no_mangle]
pub unsafe extern "C" fn bsl_stream_new(
    pattern: *const u8,
    len: usize,
    mode: BslMode,
    out: *mut *mut BslStream,
) -> BslStatus {
    guarded(|| {
        if out.is_null() {
            return fail(BslStatus::NullPointer, "out is null");
        }
        let bits = match read_bits(pattern, len) {
            Ok(b) => b,
            Err(s) => return s,
        };
        let mode = match mode {
            BslMode::Conv => Mode::Conv,
            BslMode::L2 => Mode::L2,
        };
        from_lib(StreamState::new(bits, mode).map(|inner| {
            *out = Box::into_raw(Box::new(BslStream { inner }));
            BslStatus::Ok
        }))
    })
}

/// Feeds one bit (0 or 1) and writes the resulting output.
#[no_mangle]
pub unsafe extern "C" fn bsl_stream_push(
    stream: *mut BslStream,
    bit: u8,
    out: *mut BslOutput,
) -> BslStatus {
    guarded(|| {
        let Some(s) = stream.as_mut() else {
            return fail(BslStatus::NullPointer, "stream is null");
        };
        if out.is_null() {
            return fail(BslStatus::NullPointer, "out is null");
        }
        if bit > 1 {
            return fail(BslStatus::InvalidArgument, "bit must be 0 or 1");
        }
        *out = match s.inner.push(bit == 1) {
            Output::InnerProduct(v) => BslOutput {
                value: v,
                finite: true,
            },
            Output::L2(d) => output_of(d),
        };
        BslStatus::Ok
    })
}

/// Number of bits pushed so far; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn bsl_stream_arrivals(stream: *const BslStream) -> u64 {
    stream.as_ref().map_or(0, |s| s.inner.arrivals_seen())
}

/// Whether the window still holds part of the initial zero fill.
#[no_mangle]
pub unsafe extern "C" fn bsl_stream_in_warmup(stream: *const BslStream) -> bool {
    stream.as_ref().is_some_and(|s| s.inner.in_warmup())
}

/// Releases an engine. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bsl_stream_free(stream: *mut BslStream) {
    if !stream.is_null() {
        drop(Box::from_raw(stream));
    }
}

/// L2-rearrangement distance between two bit arrays of length `len`.
#[no_mangle]
pub unsafe extern "C" fn bsl_l2_distance(
    a: *const u8,
    b: *const u8,
    len: usize,
    out: *mut BslOutput,
) -> BslStatus {
    guarded(|| {
        if out.is_null() {
            return fail(BslStatus::NullPointer, "out is null");
        }
        let (a, b) = match (read_bits(a, len), read_bits(b, len)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        from_lib(l2_rearrangement(&a, &b).map(|d| {
            *out = output_of(d);
            BslStatus::Ok
        }))
    })
}

/// Writes the interval lengths for `n = 2^log_n` into `out` (capacity
/// `cap`) and their number into `count`. When `cap` is too small, `count`
/// still receives the required size.
#[no_mangle]
pub unsafe extern "C" fn bsl_lengths(
    log_n: u32,
    out: *mut u64,
    cap: usize,
    count: *mut usize,
) -> BslStatus {
    guarded(|| {
        if count.is_null() {
            return fail(BslStatus::NullPointer, "count is null");
        }
        if log_n >= 128 {
            return fail(BslStatus::InvalidArgument, "log_n must be below 128");
        }
        from_lib(lengths_set(1u128 << log_n).map(|set| {
            *count = set.lengths.len();
            if cap < set.lengths.len() {
                return fail(BslStatus::BufferTooSmall, "output buffer too small");
            }
            if out.is_null() {
                return fail(BslStatus::NullPointer, "out is null");
            }
            let dst = std::slice::from_raw_parts_mut(out, cap);
            for (d, &l) in dst.iter_mut().zip(&set.lengths) {
                *d = l as u64;
            }
            BslStatus::Ok
        }))
    })
}

/// Runs `trials` seeded encode/decode round trips at length `ell` and
/// writes how many recovered every even block.
#[no_mangle]
pub unsafe extern "C" fn bsl_recovery_round_trips(
    ell: usize,
    trials: usize,
    seed: u64,
    successes: *mut usize,
) -> BslStatus {
    guarded(|| {
        if successes.is_null() {
            return fail(BslStatus::NullPointer, "successes is null");
        }
        from_lib(run_round_trips(ell, trials, seed).map(|r| {
            *successes = r.successes;
            BslStatus::Ok
        }))
    })
}
