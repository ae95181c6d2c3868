//! C ABI over `m2m-core`: transfer functions and dataset reading.
//!
//! Every fallible call returns an [`M2mStatus`]; on failure the message is
//! available from [`m2m_last_error`] on the same thread. Handles are opaque
//! and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use m2m_core::calibrate::{build_transfer_function, load_tf, save_tf, Direction, TfApplier, TransferFunction, WienerConfig};
use m2m_core::rf::{read_dataset, DatasetReader, Patch, PatchGridSpec};
use m2m_core::Error;

pub const M2M_DIRECTION_FORWARD: u32 = 0;
pub const M2M_DIRECTION_INVERSE: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum M2mStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Shape = 5,
    Panic = 6,
}

/// Opaque transfer-function handle.
pub struct M2mTransferFunction {
    tf: TransferFunction,
}

/// Opaque streaming dataset reader.
pub struct M2mDatasetReader {
    reader: DatasetReader,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct M2mDatasetInfo {
    pub n_frames: u32,
    pub axial_len: u32,
    pub lateral_len: u32,
    pub sample_rate_hz: f64,
    pub machine_id: u8,
    pub phantom_id: u8,
    pub acquisition: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> M2mStatus {
    match e {
        Error::Io { .. } | Error::MissingFile(_) => M2mStatus::Io,
        Error::BadMagic { .. }
        | Error::TruncatedFile(_)
        | Error::VersionMismatch { .. }
        | Error::MalformedHeader(_) => M2mStatus::Format,
        Error::ShapeMismatch { .. }
        | Error::LengthMismatch { .. }
        | Error::SizeMismatch { .. }
        | Error::SegmentOutOfRange { .. }
        | Error::GridOverflow { .. }
        | Error::GridMismatch(_)
        | Error::DimMismatch { .. } => M2mStatus::Shape,
        _ => M2mStatus::InvalidArgument,
    }
}

fn fail(status: M2mStatus, msg: impl Into<String>) -> M2mStatus {
    set_last_error(msg.into());
    status
}

/// Runs `f`, turning core errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), M2mStatus>) -> M2mStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => M2mStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(M2mStatus::Panic, "internal panic"),
    }
}

fn core(e: Error) -> M2mStatus {
    fail(status_of(&e), e.to_string())
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, M2mStatus> {
    if p.is_null() {
        return Err(fail(M2mStatus::NullPointer, format!("{what} is null")));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(M2mStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), M2mStatus> {
    if p.is_null() {
        Err(fail(M2mStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread, or NULL.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn m2m_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn m2m_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Estimates a transfer function from two stable calibration datasets.
///
/// `direction` is `M2M_DIRECTION_FORWARD` or `M2M_DIRECTION_INVERSE`; `snr`
/// is the Wiener regularization parameter. Uses the default patch grid.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn m2m_tf_build(
    train_path: *const c_char,
    test_path: *const c_char,
    direction: u32,
    snr: f64,
    out: *mut *mut M2mTransferFunction,
) -> M2mStatus {
    guard(|| {
        non_null(out, "out")?;
        let train = path_arg(train_path, "train_path")?;
        let test = path_arg(test_path, "test_path")?;
        let direction = match direction {
            M2M_DIRECTION_FORWARD => Direction::Forward,
            M2M_DIRECTION_INVERSE => Direction::Inverse,
            d => return Err(fail(M2mStatus::InvalidArgument, format!("unknown direction {d}"))),
        };
        let a = read_dataset(train).map_err(core)?;
        let b = read_dataset(test).map_err(core)?;
        let tf = build_transfer_function(&a, &b, &PatchGridSpec::default(), &WienerConfig::with_snr(snr), direction)
            .map_err(core)?;
        *out = Box::into_raw(Box::new(M2mTransferFunction { tf }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn m2m_tf_load(path: *const c_char, out: *mut *mut M2mTransferFunction) -> M2mStatus {
    guard(|| {
        non_null(out, "out")?;
        let tf = load_tf(path_arg(path, "path")?).map_err(core)?;
        *out = Box::into_raw(Box::new(M2mTransferFunction { tf }));
        Ok(())
    })
}

/// # Safety
/// `tf` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn m2m_tf_save(tf: *const M2mTransferFunction, path: *const c_char) -> M2mStatus {
    guard(|| {
        non_null(tf, "tf")?;
        save_tf(&(*tf).tf, path_arg(path, "path")?).map_err(core)
    })
}

/// Number of depth segments, or 0 for a null handle.
///
/// # Safety
/// `tf` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn m2m_tf_n_segments(tf: *const M2mTransferFunction) -> usize {
    tf.as_ref().map_or(0, |t| t.tf.n_segments())
}

/// Number of gain bins per segment, or 0 for a null handle.
///
/// # Safety
/// `tf` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn m2m_tf_n_bins(tf: *const M2mTransferFunction) -> usize {
    tf.as_ref().map_or(0, |t| t.tf.n_bins())
}

/// Copies the gains of one segment into `out`, which holds `len` floats.
///
/// # Safety
/// `tf` must be a live handle; `out` must point to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn m2m_tf_gains(
    tf: *const M2mTransferFunction,
    segment: usize,
    out: *mut f32,
    len: usize,
) -> M2mStatus {
    guard(|| {
        non_null(tf, "tf")?;
        non_null(out, "out")?;
        let tf = &(*tf).tf;
        let row = tf.gains.get(segment).ok_or_else(|| {
            core(Error::SegmentOutOfRange {
                segment,
                n_segments: tf.n_segments(),
            })
        })?;
        if len != row.len() {
            return Err(core(Error::LengthMismatch {
                expected: row.len(),
                got: len,
            }));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(row);
        Ok(())
    })
}

/// Filters a column-major `axial_len x lateral_len` patch with the gains of
/// `segment`, writing the result to `out` (same size; may not alias `samples`).
///
/// # Safety
/// `samples` and `out` must each point to `axial_len * lateral_len` floats.
#[no_mangle]
pub unsafe extern "C" fn m2m_tf_apply(
    tf: *const M2mTransferFunction,
    samples: *const f32,
    axial_len: usize,
    lateral_len: usize,
    segment: usize,
    out: *mut f32,
) -> M2mStatus {
    guard(|| {
        non_null(tf, "tf")?;
        non_null(samples, "samples")?;
        non_null(out, "out")?;
        let n = axial_len
            .checked_mul(lateral_len)
            .ok_or_else(|| fail(M2mStatus::InvalidArgument, "patch size overflows"))?;
        let input = std::slice::from_raw_parts(samples, n).to_vec();
        let patch = Patch::new(axial_len, lateral_len, input, segment, None).map_err(core)?;
        let filtered = TfApplier::new(&(*tf).tf).apply(&patch).map_err(core)?;
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(filtered.samples());
        Ok(())
    })
}

/// # Safety
/// `tf` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn m2m_tf_free(tf: *mut M2mTransferFunction) {
    if !tf.is_null() {
        drop(Box::from_raw(tf));
    }
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn m2m_dataset_open(path: *const c_char, out: *mut *mut M2mDatasetReader) -> M2mStatus {
    guard(|| {
        non_null(out, "out")?;
        let reader = DatasetReader::open(path_arg(path, "path")?).map_err(core)?;
        *out = Box::into_raw(Box::new(M2mDatasetReader { reader }));
        Ok(())
    })
}

/// # Safety
/// `reader` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn m2m_dataset_info(reader: *const M2mDatasetReader, out: *mut M2mDatasetInfo) -> M2mStatus {
    guard(|| {
        non_null(reader, "reader")?;
        non_null(out, "out")?;
        let h = (*reader).reader.header();
        *out = M2mDatasetInfo {
            n_frames: h.n_frames,
            axial_len: h.axial_len,
            lateral_len: h.lateral_len,
            sample_rate_hz: h.sample_rate_hz,
            machine_id: h.machine_id.code(),
            phantom_id: h.phantom_id.0,
            acquisition: h.acquisition.code(),
        };
        Ok(())
    })
}

/// Reads the next frame's column-major samples into `out` (`len` floats,
/// which must equal `axial_len * lateral_len`). Sets `*has_frame` to false
/// once the dataset is exhausted.
///
/// # Safety
/// `reader` must be a live handle; `out` must point to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn m2m_dataset_next(
    reader: *mut M2mDatasetReader,
    out: *mut f32,
    len: usize,
    has_frame: *mut bool,
) -> M2mStatus {
    guard(|| {
        non_null(reader, "reader")?;
        non_null(out, "out")?;
        non_null(has_frame, "has_frame")?;
        let r = &mut (*reader).reader;
        let h = r.header();
        let expected = h.axial_len as usize * h.lateral_len as usize;
        if len != expected {
            return Err(core(Error::LengthMismatch { expected, got: len }));
        }
        match r.next_frame().map_err(core)? {
            Some(frame) => {
                std::slice::from_raw_parts_mut(out, len).copy_from_slice(frame.samples());
                *has_frame = true;
            }
            None => *has_frame = false,
        }
        Ok(())
    })
}

/// # Safety
/// `reader` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn m2m_dataset_free(reader: *mut M2mDatasetReader) {
    if !reader.is_null() {
        drop(Box::from_raw(reader));
    }
}
