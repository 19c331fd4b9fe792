//! C ABI for `latentgeom`.
//!
//! Networks and Local Basis frames are opaque heap handles released with
//! their `*_free` function. Every fallible call returns an [`LgStatus`]; on
//! failure a message is kept per thread and can be read with
//! [`lg_last_error_message`]. Vectors cross the boundary as `double` arrays
//! with explicit lengths. Sets of vectors are stored vector after vector
//! (vector `i` occupies `[i·dim, (i+1)·dim)`).
//!
//! Panics never unwind into the caller; they are reported as
//! [`LgStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use latentgeom::grassmann::{geodesic_metric, projection_metric, Subspace};
use latentgeom::traversal::iterative_traverse;
use latentgeom::{Error, LocalFrame, MappingNetwork, Matrix, Vector};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// An array length does not match the network or frame.
    Shape = 3,
    NonFinite = 4,
    /// The latent point sits on a partition boundary; perturb and retry.
    Boundary = 5,
    RankDeficient = 6,
    Numerical = 7,
    InvalidNetwork = 8,
    InvalidArgument = 9,
    /// Iterative traversal stopped early; the completed iterates were written.
    TraversalAborted = 10,
    Io = 11,
    Parse = 12,
    Panic = 13,
}

/// Mapping network handle.
pub struct LgNetwork {
    inner: MappingNetwork,
}

/// Local Basis frame handle.
pub struct LgFrame {
    inner: LocalFrame,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> LgStatus {
    match err {
        Error::Shape { .. } => LgStatus::Shape,
        Error::NonFinite(_) => LgStatus::NonFinite,
        Error::Boundary { .. } => LgStatus::Boundary,
        Error::RankDeficient { .. } => LgStatus::RankDeficient,
        Error::Numerical(_) | Error::UnderSampled { .. } => LgStatus::Numerical,
        Error::InvalidNetwork(_) => LgStatus::InvalidNetwork,
        Error::InvalidDirection(_) | Error::InvalidArgument(_) => LgStatus::InvalidArgument,
        Error::TraversalAborted { .. } => LgStatus::TraversalAborted,
        Error::Io(_) => LgStatus::Io,
        Error::Json(_) | Error::Csv(_) => LgStatus::Parse,
    }
}

fn fail(status: LgStatus, msg: impl Into<String>) -> LgStatus {
    set_last_error(msg.into());
    status
}

fn from_error(err: Error) -> LgStatus {
    let mut msg = err.to_string();
    let mut source = std::error::Error::source(&err);
    while let Some(s) = source {
        msg.push_str(": ");
        msg.push_str(&s.to_string());
        source = s.source();
    }
    fail(status_of(&err), msg)
}

/// Runs `body`, converting panics to [`LgStatus::Panic`].
fn guard(body: impl FnOnce() -> LgStatus) -> LgStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(LgStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn read_vector(ptr: *const f64, len: usize, expected: usize, what: &str) -> Result<Vector, LgStatus> {
    if ptr.is_null() {
        return Err(fail(LgStatus::NullPointer, format!("{what} is null")));
    }
    if len != expected {
        return Err(fail(LgStatus::Shape, format!("{what} has length {len}, expected {expected}")));
    }
    Ok(Vector::from_column_slice(std::slice::from_raw_parts(ptr, len)))
}

unsafe fn write_slice(out: *mut f64, len: usize, values: &[f64], what: &str) -> LgStatus {
    if out.is_null() {
        return fail(LgStatus::NullPointer, format!("{what} is null"));
    }
    if len != values.len() {
        return fail(
            LgStatus::Shape,
            format!("{what} has length {len}, expected {}", values.len()),
        );
    }
    std::slice::from_raw_parts_mut(out, len).copy_from_slice(values);
    LgStatus::Ok
}

fn columns_flat(m: &Matrix) -> Vec<f64> {
    // nalgebra storage is column-major, so this is already vector after vector
    m.as_slice().to_vec()
}

unsafe fn network<'a>(net: *const LgNetwork) -> Result<&'a MappingNetwork, LgStatus> {
    net.as_ref()
        .map(|n| &n.inner)
        .ok_or_else(|| fail(LgStatus::NullPointer, "network handle is null"))
}

unsafe fn frame<'a>(f: *const LgFrame) -> Result<&'a LocalFrame, LgStatus> {
    f.as_ref()
        .map(|f| &f.inner)
        .ok_or_else(|| fail(LgStatus::NullPointer, "frame handle is null"))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a network from its JSON weight format.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lg_network_from_json(json: *const c_char, out: *mut *mut LgNetwork) -> LgStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(LgStatus::NullPointer, "json and out must be non-null");
        }
        *out = ptr::null_mut();
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            return fail(LgStatus::InvalidUtf8, "json is not valid UTF-8");
        };
        match latentgeom::io::network_from_json(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(LgNetwork { inner }));
                LgStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Loads a network from a JSON weight file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lg_network_load(path: *const c_char, out: *mut *mut LgNetwork) -> LgStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(LgStatus::NullPointer, "path and out must be non-null");
        }
        *out = ptr::null_mut();
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(LgStatus::InvalidUtf8, "path is not valid UTF-8");
        };
        match latentgeom::io::load_network(path) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(LgNetwork { inner }));
                LgStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a network. Null is ignored.
///
/// # Safety
/// `net` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lg_network_free(net: *mut LgNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Latent dimension, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_network_in_dim(net: *const LgNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.inner.in_dim())
}

/// Output dimension, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_network_out_dim(net: *const LgNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.inner.out_dim())
}

/// `w = f(z)`.
///
/// # Safety
/// Arrays must hold at least the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn lg_network_forward(
    net: *const LgNetwork,
    z: *const f64,
    z_len: usize,
    w_out: *mut f64,
    w_len: usize,
) -> LgStatus {
    guard(|| {
        let net = try_status!(network(net));
        let z = try_status!(read_vector(z, z_len, net.in_dim(), "z"));
        match net.eval(&z) {
            Ok(w) => write_slice(w_out, w_len, w.as_slice(), "w_out"),
            Err(e) => from_error(e),
        }
    })
}

/// Jacobian at `z`, written row-major (`out_dim × in_dim`).
///
/// # Safety
/// Arrays must hold at least the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn lg_network_jacobian(
    net: *const LgNetwork,
    z: *const f64,
    z_len: usize,
    jac_out: *mut f64,
    jac_len: usize,
) -> LgStatus {
    guard(|| {
        let net = try_status!(network(net));
        let z = try_status!(read_vector(z, z_len, net.in_dim(), "z"));
        match net.jacobian(&z) {
            Ok(j) => write_slice(jac_out, jac_len, j.transpose().as_slice(), "jac_out"),
            Err(e) => from_error(e),
        }
    })
}

/// Local Basis at `z`.
///
/// # Safety
/// `z` must hold `z_len` doubles and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lg_local_basis(
    net: *const LgNetwork,
    z: *const f64,
    z_len: usize,
    out: *mut *mut LgFrame,
) -> LgStatus {
    guard(|| {
        if out.is_null() {
            return fail(LgStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let net = try_status!(network(net));
        let z = try_status!(read_vector(z, z_len, net.in_dim(), "z"));
        match latentgeom::local_basis(net, &z) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(LgFrame { inner }));
                LgStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a frame. Null is ignored.
///
/// # Safety
/// `frame` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lg_frame_free(frame: *mut LgFrame) {
    if !frame.is_null() {
        drop(Box::from_raw(frame));
    }
}

/// Number of basis vectors (`min(in_dim, out_dim)`), or 0 for null.
///
/// # Safety
/// `frame` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_frame_len(frame: *const LgFrame) -> usize {
    frame.as_ref().map_or(0, |f| f.inner.len())
}

/// Singular values, non-increasing.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lg_frame_singular_values(frame: *const LgFrame, out: *mut f64, len: usize) -> LgStatus {
    guard(|| {
        let f = try_status!(self::frame(frame));
        write_slice(out, len, f.singular_values().as_slice(), "out")
    })
}

/// Local Basis vectors in the output space, `lg_frame_len` vectors of length
/// `out_dim`.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lg_frame_basis(frame: *const LgFrame, out: *mut f64, len: usize) -> LgStatus {
    guard(|| {
        let f = try_status!(self::frame(frame));
        write_slice(out, len, &columns_flat(f.basis()), "out")
    })
}

/// Matching latent directions, `lg_frame_len` vectors of length `in_dim`.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lg_frame_latent_directions(frame: *const LgFrame, out: *mut f64, len: usize) -> LgStatus {
    guard(|| {
        let f = try_status!(self::frame(frame));
        write_slice(out, len, &columns_flat(f.latent_directions()), "out")
    })
}

unsafe fn subspace(vectors: *const f64, dim: usize, count: usize, what: &str) -> Result<Subspace, LgStatus> {
    if vectors.is_null() {
        return Err(fail(LgStatus::NullPointer, format!("{what} is null")));
    }
    if dim == 0 || count == 0 {
        return Err(fail(LgStatus::InvalidArgument, format!("{what} needs dim and count of at least 1")));
    }
    let m = Matrix::from_column_slice(dim, count, std::slice::from_raw_parts(vectors, dim * count));
    Subspace::from_vectors(&m).map_err(from_error)
}

type Metric = fn(&Subspace, &Subspace) -> latentgeom::Result<f64>;

unsafe fn metric(
    f: Metric,
    a: *const f64,
    a_count: usize,
    b: *const f64,
    b_count: usize,
    dim: usize,
    out: *mut f64,
) -> LgStatus {
    guard(|| {
        if out.is_null() {
            return fail(LgStatus::NullPointer, "out is null");
        }
        let a = try_status!(subspace(a, dim, a_count, "a"));
        let b = try_status!(subspace(b, dim, b_count, "b"));
        match f(&a, &b) {
            Ok(d) => {
                *out = d;
                LgStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Projection distance between the spans of two vector sets in `R^dim`.
/// The sets need not be orthonormal, only linearly independent.
///
/// # Safety
/// `a` and `b` must hold `a_count·dim` and `b_count·dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn lg_projection_distance(
    a: *const f64,
    a_count: usize,
    b: *const f64,
    b_count: usize,
    dim: usize,
    out: *mut f64,
) -> LgStatus {
    metric(projection_metric, a, a_count, b, b_count, dim, out)
}

/// Geodesic (arc-length) distance between the spans of two vector sets.
///
/// # Safety
/// Same as [`lg_projection_distance`].
#[no_mangle]
pub unsafe extern "C" fn lg_geodesic_distance(
    a: *const f64,
    a_count: usize,
    b: *const f64,
    b_count: usize,
    dim: usize,
    out: *mut f64,
) -> LgStatus {
    metric(geodesic_metric, a, a_count, b, b_count, dim, out)
}

/// Iterative traversal along the one-based direction `k`.
///
/// Writes the `n_steps + 1` iterates `w_0 … w_N` into `w_out` (vector after
/// vector, `out_dim` each) and, when `z_out` is non-null, the latent codes
/// into `z_out`. `n_written` receives the number of iterates written, which
/// is smaller than `n_steps + 1` when the call returns
/// [`LgStatus::TraversalAborted`].
///
/// # Safety
/// `w_out` must hold `w_len` doubles, `z_out` (if non-null) `z_out_len`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn lg_iterative_traverse(
    net: *const LgNetwork,
    z0: *const f64,
    z0_len: usize,
    k: usize,
    intensity: f64,
    n_steps: usize,
    sign: i32,
    w_out: *mut f64,
    w_len: usize,
    z_out: *mut f64,
    z_out_len: usize,
    n_written: *mut usize,
) -> LgStatus {
    guard(|| {
        if w_out.is_null() || n_written.is_null() {
            return fail(LgStatus::NullPointer, "w_out and n_written must be non-null");
        }
        *n_written = 0;
        let net = try_status!(network(net));
        let z0 = try_status!(read_vector(z0, z0_len, net.in_dim(), "z0"));
        let capacity = n_steps.saturating_add(1);
        if w_len != capacity * net.out_dim() {
            return fail(
                LgStatus::Shape,
                format!("w_out has length {w_len}, expected {}", capacity * net.out_dim()),
            );
        }
        if !z_out.is_null() && z_out_len != capacity * net.in_dim() {
            return fail(
                LgStatus::Shape,
                format!("z_out has length {z_out_len}, expected {}", capacity * net.in_dim()),
            );
        }
        let (path, status) = match iterative_traverse(net, &z0, k, intensity, n_steps, sign) {
            Ok(p) => (p, LgStatus::Ok),
            Err(Error::TraversalAborted { partial, planned_steps, source }) => {
                let path = (*partial).clone();
                let status = from_error(Error::TraversalAborted {
                    partial,
                    planned_steps,
                    source,
                });
                (path, status)
            }
            Err(e) => return from_error(e),
        };
        let w = std::slice::from_raw_parts_mut(w_out, w_len);
        let (dw, dz) = (net.out_dim(), net.in_dim());
        for (i, it) in path.iterates.iter().enumerate() {
            w[i * dw..(i + 1) * dw].copy_from_slice(&it.w);
            if !z_out.is_null() {
                std::slice::from_raw_parts_mut(z_out, z_out_len)[i * dz..(i + 1) * dz].copy_from_slice(&it.z);
            }
        }
        *n_written = path.iterates.len();
        status
    })
}
