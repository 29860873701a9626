//! C ABI over the `heatrack` library.
//!
//! Objects are opaque handles created by `htrk_*_new`/`_load` functions and
//! released with the matching `_free`. Every fallible call returns an
//! [`HtrkStatus`]; on failure a description is available from
//! [`htrk_last_error`] on the same thread until the next failing call.
//!
//! Handles are not synchronized. A tracker may move between threads but must
//! not be used from two threads at once. Models and configs are read-only
//! once created and may be shared.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use heatrack::assoc::{solve_assignment, CostMatrix};
use heatrack::config::PipelineConfig;
use heatrack::frame::GrayFrame;
use heatrack::io::load_checkpoint;
use heatrack::net::{HeatmapNet, Model};
use heatrack::pipeline::TrackingSession;
use heatrack::sgr::{sgr_confidence, ClassParams};
use heatrack::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HtrkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Checkpoint = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

/// Pipeline configuration.
pub struct HtrkConfig {
    inner: PipelineConfig,
}

/// Network with loaded parameters.
pub struct HtrkModel {
    inner: Arc<Model>,
}

/// Sequential tracker over one frame stream.
pub struct HtrkTracker {
    session: TrackingSession<Arc<Model>>,
    last: Vec<HtrkTrack>,
}

/// One tracked object in the most recent frame.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HtrkTrack {
    pub id: u64,
    pub class_index: u32,
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HtrkStatus {
    match e {
        Error::InvalidInput(_) | Error::Shape(_) => HtrkStatus::InvalidArgument,
        Error::Config { .. } => HtrkStatus::Config,
        Error::Io(_) | Error::Csv { .. } | Error::Image { .. } => HtrkStatus::Io,
        Error::Checkpoint(_) => HtrkStatus::Checkpoint,
        Error::Diverged { .. } => HtrkStatus::Internal,
    }
}

fn fail(status: HtrkStatus, msg: impl Into<String>) -> HtrkStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), HtrkStatus>) -> HtrkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HtrkStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(HtrkStatus::Internal, "internal panic"),
    }
}

fn lift<T>(r: heatrack::Result<T>) -> Result<T, HtrkStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn null(what: &str) -> HtrkStatus {
    fail(HtrkStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, HtrkStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(HtrkStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn htrk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn htrk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a configuration with default values.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn htrk_config_new(out: *mut *mut HtrkConfig) -> HtrkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, HtrkConfig { inner: PipelineConfig::default() });
        Ok(())
    })
}

/// Parses `key = value` configuration text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn htrk_config_parse(text: *const c_char, out: *mut *mut HtrkConfig) -> HtrkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = c_str(text, "text")?;
        let inner = lift(PipelineConfig::parse(text, "<text>"))?;
        put(out, HtrkConfig { inner });
        Ok(())
    })
}

/// Reads a configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn htrk_config_load(path: *const c_char, out: *mut *mut HtrkConfig) -> HtrkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = c_str(path, "path")?;
        let inner = lift(PipelineConfig::load(Path::new(path)))?;
        put(out, HtrkConfig { inner });
        Ok(())
    })
}

/// # Safety
/// `config` must come from an `htrk_config_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn htrk_config_free(config: *mut HtrkConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Loads a parameter checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn htrk_model_load(path: *const c_char, out: *mut *mut HtrkModel) -> HtrkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = c_str(path, "path")?;
        let params = lift(load_checkpoint(Path::new(path)))?;
        let model = lift(Model::new(params))?;
        put(out, HtrkModel { inner: Arc::new(model) });
        Ok(())
    })
}

/// Creates an untrained model with the network shape of `config`,
/// initialized from `seed`.
///
/// # Safety
/// `config` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn htrk_model_init(
    config: *const HtrkConfig,
    seed: u64,
    out: *mut *mut HtrkModel,
) -> HtrkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = config.as_ref().ok_or_else(|| null("config"))?;
        let net = lift(HeatmapNet::new(config.inner.net))?;
        let model = lift(Model::new(net.init_parameters(seed)))?;
        put(out, HtrkModel { inner: Arc::new(model) });
        Ok(())
    })
}

/// Number of output classes of the model, or 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn htrk_model_classes(model: *const HtrkModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.config().classes)
}

/// # Safety
/// `model` must come from an `htrk_model_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn htrk_model_free(model: *mut HtrkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Starts a tracker. The tracker keeps its own reference to the model, so
/// the model handle may be freed afterwards.
///
/// # Safety
/// `model` and `config` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn htrk_tracker_new(
    model: *const HtrkModel,
    config: *const HtrkConfig,
    out: *mut *mut HtrkTracker,
) -> HtrkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let config = config.as_ref().ok_or_else(|| null("config"))?;
        let session = lift(TrackingSession::new(model.inner.clone(), config.inner.tracking.clone()))?;
        put(out, HtrkTracker { session, last: Vec::new() });
        Ok(())
    })
}

/// Processes the next 8-bit grayscale frame, row-major, `width * height`
/// bytes. Dimensions must match earlier frames and be divisible by the
/// network's size multiple.
///
/// # Safety
/// `tracker` must be a live handle and `pixels` must point to
/// `width * height` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn htrk_tracker_push_frame(
    tracker: *mut HtrkTracker,
    pixels: *const u8,
    width: usize,
    height: usize,
) -> HtrkStatus {
    guard(|| {
        let tracker = tracker.as_mut().ok_or_else(|| null("tracker"))?;
        if pixels.is_null() {
            return Err(null("pixels"));
        }
        let len = width
            .checked_mul(height)
            .ok_or_else(|| fail(HtrkStatus::InvalidArgument, "frame size overflows"))?;
        let bytes = std::slice::from_raw_parts(pixels, len);
        let frame = lift(GrayFrame::from_bytes(width, height, bytes))?;
        let output = lift(tracker.session.step(frame))?;
        tracker.last = output
            .tracks
            .iter()
            .map(|t| HtrkTrack {
                id: t.id,
                class_index: t.class as u32,
                x: t.position.x,
                y: t.position.y,
                confidence: t.confidence,
            })
            .collect();
        Ok(())
    })
}

/// Number of frames processed so far, or 0 for a null handle.
///
/// # Safety
/// `tracker` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn htrk_tracker_frame_count(tracker: *const HtrkTracker) -> usize {
    tracker.as_ref().map_or(0, |t| t.session.frame())
}

/// Copies the objects tracked in the most recent frame into `tracks`.
/// `count` receives the number of objects. If `capacity` is too small
/// nothing is copied and `BufferTooSmall` is returned; passing a null
/// `tracks` with zero capacity is a valid size query.
///
/// # Safety
/// `tracker` must be a live handle, `count` writable, and `tracks` valid
/// for `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn htrk_tracker_get_tracks(
    tracker: *const HtrkTracker,
    tracks: *mut HtrkTrack,
    capacity: usize,
    count: *mut usize,
) -> HtrkStatus {
    guard(|| {
        let tracker = tracker.as_ref().ok_or_else(|| null("tracker"))?;
        if count.is_null() {
            return Err(null("count"));
        }
        *count = tracker.last.len();
        if tracker.last.is_empty() {
            return Ok(());
        }
        if capacity < tracker.last.len() {
            return Err(fail(
                HtrkStatus::BufferTooSmall,
                format!("{} tracks, capacity {capacity}", tracker.last.len()),
            ));
        }
        if tracks.is_null() {
            return Err(null("tracks"));
        }
        std::ptr::copy_nonoverlapping(tracker.last.as_ptr(), tracks, tracker.last.len());
        Ok(())
    })
}

/// # Safety
/// `tracker` must come from [`htrk_tracker_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn htrk_tracker_free(tracker: *mut HtrkTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

/// Feedback confidence of a single peak of confidence `w`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn htrk_sgr_confidence(
    w: f64,
    theta: f64,
    lambda: f64,
    phi: f64,
    out: *mut f64,
) -> HtrkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(fail(HtrkStatus::InvalidArgument, format!("confidence {w} outside [0, 1]")));
        }
        let params = lift(ClassParams::new(theta, lambda, phi))?;
        *out = sgr_confidence(w, &params);
        Ok(())
    })
}

/// Minimum-cost assignment. `costs` is row-major `rows * cols`; NaN marks a
/// forbidden pair. `row_to_col` receives, for each row, the assigned column
/// or -1.
///
/// # Safety
/// `costs` must hold `rows * cols` values and `row_to_col` `rows` slots.
#[no_mangle]
pub unsafe extern "C" fn htrk_solve_assignment(
    costs: *const f64,
    rows: usize,
    cols: usize,
    row_to_col: *mut i64,
) -> HtrkStatus {
    guard(|| {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| fail(HtrkStatus::InvalidArgument, "matrix size overflows"))?;
        if rows == 0 {
            return Ok(());
        }
        if row_to_col.is_null() {
            return Err(null("row_to_col"));
        }
        if len > 0 && costs.is_null() {
            return Err(null("costs"));
        }
        let values: &[f64] = if len == 0 { &[] } else { std::slice::from_raw_parts(costs, len) };
        if values.iter().any(|v| v.is_infinite()) {
            return Err(fail(HtrkStatus::InvalidArgument, "costs must be finite or NaN"));
        }
        let mut matrix = CostMatrix::new(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = values[r * cols + c];
                matrix.set(r, c, (!v.is_nan()).then_some(v));
            }
        }
        let out = std::slice::from_raw_parts_mut(row_to_col, rows);
        out.fill(-1);
        for (r, c) in solve_assignment(&matrix) {
            out[r] = c as i64;
        }
        Ok(())
    })
}
