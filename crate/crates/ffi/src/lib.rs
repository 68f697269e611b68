//! C interface to `lsgraph`.
//!
//! Objects are opaque handles created by `lsg_*_new`/`lsg_*_sample`/... and
//! released with the matching `lsg_*_free`. Every fallible function returns an
//! [`LsgStatus`]; on failure a message is available from
//! [`lsg_last_error`] until the next failing call on the same thread.
//! Matrices cross the boundary as row-major `double` buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use lsgraph::curve::{bezier_arclength, hardy_weinberg_arclength, ArclengthCurve, QuadraticBezier};
use lsgraph::distribution::{BetaParams, Underlying};
use lsgraph::graph::{sample_lsm, AdjacencyMatrix, LatentPositionMatrix, LsmSpec};
use lsgraph::hypothesis::{ks_test, two_sample_lsm_test, DimensionChoiceMode, TwoSampleConfig};
use lsgraph::inference::{align_to_curve, fit_beta, lsm_m_estimate};
use lsgraph::spectral::{ase, EmbeddingResult};
use lsgraph::Error;

/// Result codes. `Validation` and `Numerical` match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsgStatus {
    Ok = 0,
    Validation = 1,
    Numerical = 2,
    Io = 3,
    NullPointer = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Observed graph.
pub struct LsgGraph(AdjacencyMatrix);

/// Spectral embedding with its eigenvalues.
pub struct LsgEmbedding(EmbeddingResult);

/// Arclength-parameterized support curve.
pub struct LsgCurve(Arc<ArclengthCurve>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LsgStatus {
    match e {
        Error::Validation(_) | Error::Parse(_) => LsgStatus::Validation,
        Error::Numerical(_) => LsgStatus::Numerical,
        Error::Io { .. } => LsgStatus::Io,
    }
}

struct Fail(LsgStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(LsgStatus::NullPointer, format!("`{name}` is null"))
}

/// Runs `f`, recording failures and turning panics into `Panic`.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> LsgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LsgStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LsgStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn out_buffer<'a>(ptr: *mut f64, len: usize, needed: usize) -> Result<&'a mut [f64], Fail> {
    if len < needed {
        return Err(Fail(
            LsgStatus::BufferTooSmall,
            format!("buffer holds {len} values, {needed} needed"),
        ));
    }
    if ptr.is_null() {
        return Err(null("out"));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, needed))
}

unsafe fn handle<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, Fail> {
    ptr.as_ref().ok_or_else(|| null(name))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lsg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn lsg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------
// graphs

/// Samples a Hardy-Weinberg latent structure graph with Beta(a, b) positions.
/// When `latent_out` is not null it receives the `n x 3` latent positions.
///
/// # Safety
/// `out` must be valid for writes; `latent_out`, if not null, must hold
/// `latent_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lsg_graph_sample_hw(
    a: f64,
    b: f64,
    n: usize,
    seed: u64,
    latent_out: *mut f64,
    latent_len: usize,
    out: *mut *mut LsgGraph,
) -> LsgStatus {
    guard(|| {
        let spec = LsmSpec {
            curve: Arc::new(hardy_weinberg_arclength()),
            underlying: Underlying::Beta(BetaParams::new(a, b)?),
            n,
            sparsity: 1.0,
        };
        let s = sample_lsm(&spec, seed)?;
        if !latent_out.is_null() {
            out_buffer(latent_out, latent_len, n * 3)?.copy_from_slice(s.latent.as_slice());
        }
        put(out, LsgGraph(s.adjacency))
    })
}

/// Binary undirected graph from `m` edges given as `2m` vertex indices.
///
/// # Safety
/// `edges` must hold `2 * m` values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lsg_graph_from_edges(
    n: usize,
    edges: *const usize,
    m: usize,
    out: *mut *mut LsgGraph,
) -> LsgStatus {
    guard(|| {
        let flat = slice(edges, 2 * m, "edges")?;
        let pairs: Vec<(usize, usize)> = flat.chunks_exact(2).map(|p| (p[0], p[1])).collect();
        put(out, LsgGraph(AdjacencyMatrix::from_edges(n, &pairs)?))
    })
}

/// Reads an edge list, or a dense matrix when the path ends in `.csv`.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lsg_graph_read(path: *const c_char, out: *mut *mut LsgGraph) -> LsgStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(LsgStatus::Validation, "path is not valid UTF-8".into()))?;
        put(out, LsgGraph(lsgraph::io::read_graph(Path::new(p))?))
    })
}

/// Vertex count, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn lsg_graph_n(g: *const LsgGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.n())
}

/// Number of edges (unordered pairs for undirected graphs).
///
/// # Safety
/// `g` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn lsg_graph_edge_count(g: *const LsgGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.edge_count())
}

/// # Safety
/// `g` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lsg_graph_free(g: *mut LsgGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

// ---------------------------------------------------------------------------
// embeddings

/// Adjacency spectral embedding into `d` dimensions.
///
/// # Safety
/// `g` must be a live graph handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lsg_embed(g: *const LsgGraph, d: usize, out: *mut *mut LsgEmbedding) -> LsgStatus {
    guard(|| {
        let g = handle(g, "graph")?;
        put(out, LsgEmbedding(ase(&g.0, d)?))
    })
}

/// Writes the row count and dimension of an embedding.
///
/// # Safety
/// `e` must be a live handle; `n` and `d` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lsg_embedding_shape(e: *const LsgEmbedding, n: *mut usize, d: *mut usize) -> LsgStatus {
    guard(|| {
        let e = handle(e, "embedding")?;
        if n.is_null() || d.is_null() {
            return Err(null("n/d"));
        }
        *n = e.0.xhat.n();
        *d = e.0.xhat.d();
        Ok(())
    })
}

/// Copies the `n x d` embedding, row-major, into `out`.
///
/// # Safety
/// `e` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lsg_embedding_positions(e: *const LsgEmbedding, out: *mut f64, len: usize) -> LsgStatus {
    guard(|| {
        let e = handle(e, "embedding")?;
        let src = e.0.xhat.as_slice();
        out_buffer(out, len, src.len())?.copy_from_slice(src);
        Ok(())
    })
}

/// Copies the `d` signed eigenvalues, largest magnitude first.
///
/// # Safety
/// `e` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lsg_embedding_eigenvalues(e: *const LsgEmbedding, out: *mut f64, len: usize) -> LsgStatus {
    guard(|| {
        let e = handle(e, "embedding")?;
        let src = &e.0.signed_eigenvalues;
        out_buffer(out, len, src.len())?.copy_from_slice(src);
        Ok(())
    })
}

/// # Safety
/// `e` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lsg_embedding_free(e: *mut LsgEmbedding) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

// ---------------------------------------------------------------------------
// curves

/// The Hardy-Weinberg curve `(t^2, 2t(1-t), (1-t)^2)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lsg_curve_hardy_weinberg(out: *mut *mut LsgCurve) -> LsgStatus {
    guard(|| put(out, LsgCurve(Arc::new(hardy_weinberg_arclength()))))
}

/// Quadratic Bezier curve from three control points of dimension `d`,
/// given as `3d` row-major values.
///
/// # Safety
/// `control` must hold `3 * d` doubles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lsg_curve_bezier(control: *const f64, d: usize, out: *mut *mut LsgCurve) -> LsgStatus {
    guard(|| {
        let c = slice(control, 3 * d, "control")?;
        let b = QuadraticBezier::new(c[..d].to_vec(), c[d..2 * d].to_vec(), c[2 * d..].to_vec())?;
        put(out, LsgCurve(Arc::new(bezier_arclength(&b)?)))
    })
}

/// Ambient dimension of a curve, or 0 for a null handle.
///
/// # Safety
/// `c` must be null or a live curve handle.
#[no_mangle]
pub unsafe extern "C" fn lsg_curve_dim(c: *const LsgCurve) -> usize {
    c.as_ref().map_or(0, |c| c.0.ambient_dim())
}

/// Total arclength, or NaN for a null handle.
///
/// # Safety
/// `c` must be null or a live curve handle.
#[no_mangle]
pub unsafe extern "C" fn lsg_curve_length(c: *const LsgCurve) -> f64 {
    c.as_ref().map_or(f64::NAN, |c| c.0.length())
}

/// Point at arclength fraction `s` in [0, 1].
///
/// # Safety
/// `c` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lsg_curve_point(c: *const LsgCurve, s: f64, out: *mut f64, len: usize) -> LsgStatus {
    guard(|| {
        let c = handle(c, "curve")?;
        let p = c.0.point(s)?;
        out_buffer(out, len, p.len())?.copy_from_slice(&p);
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lsg_curve_free(c: *mut LsgCurve) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

// ---------------------------------------------------------------------------
// estimation and testing

/// Beta maximum likelihood fit to `n` values in (0, 1).
///
/// # Safety
/// `y` must hold `n` doubles; `a` and `b` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lsg_fit_beta(y: *const f64, n: usize, a: *mut f64, b: *mut f64) -> LsgStatus {
    guard(|| {
        let y = slice(y, n, "y")?;
        if a.is_null() || b.is_null() {
            return Err(null("a/b"));
        }
        let fit = fit_beta(y)?;
        *a = fit.theta.a;
        *b = fit.theta.b;
        Ok(())
    })
}

/// M-estimate of Beta parameters from `n x d` row-major positions and a
/// support curve. With `align != 0` the positions are first rotated onto
/// the curve; otherwise they are used as given.
///
/// # Safety
/// `x` must hold `n * d` doubles; `curve` must be live; `a`, `b` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lsg_m_estimate(
    x: *const f64,
    n: usize,
    d: usize,
    curve: *const LsgCurve,
    epsilon: f64,
    align: i32,
    a: *mut f64,
    b: *mut f64,
) -> LsgStatus {
    guard(|| {
        let data = slice(x, n * d, "x")?.to_vec();
        let curve = handle(curve, "curve")?;
        if a.is_null() || b.is_null() {
            return Err(null("a/b"));
        }
        let mut pts = LatentPositionMatrix::new(n, d, data)?;
        if align != 0 {
            pts = align_to_curve(&pts, &curve.0)?.alignment.apply(&pts);
        }
        let m = lsm_m_estimate(&pts, &curve.0, epsilon)?;
        *a = m.fit.theta.a;
        *b = m.fit.theta.b;
        Ok(())
    })
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
///
/// # Safety
/// `y1`/`y2` must hold `n1`/`n2` doubles; outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lsg_ks_test(
    y1: *const f64,
    n1: usize,
    y2: *const f64,
    n2: usize,
    statistic: *mut f64,
    p_value: *mut f64,
) -> LsgStatus {
    guard(|| {
        let r = ks_test(slice(y1, n1, "y1")?, slice(y2, n2, "y2")?)?;
        if statistic.is_null() || p_value.is_null() {
            return Err(null("statistic/p_value"));
        }
        *statistic = r.statistic;
        *p_value = r.p_value;
        Ok(())
    })
}

/// Two-sample test of equal underlying distributions on two graphs. `d = 0`
/// selects the embedding dimension automatically. Writes the as-is and
/// flipped KS results.
///
/// # Safety
/// `g1`, `g2` must be live handles; outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lsg_two_sample_test(
    g1: *const LsgGraph,
    g2: *const LsgGraph,
    d: usize,
    statistic: *mut f64,
    p_value: *mut f64,
    flipped_statistic: *mut f64,
    flipped_p_value: *mut f64,
) -> LsgStatus {
    guard(|| {
        let (g1, g2) = (handle(g1, "g1")?, handle(g2, "g2")?);
        let outs = [statistic, p_value, flipped_statistic, flipped_p_value];
        if outs.iter().any(|p| p.is_null()) {
            return Err(null("output"));
        }
        let config = TwoSampleConfig {
            dimension: if d == 0 {
                DimensionChoiceMode::Auto
            } else {
                DimensionChoiceMode::Fixed(d)
            },
            ..TwoSampleConfig::default()
        };
        let r = two_sample_lsm_test(&g1.0, &g2.0, &config)?;
        *statistic = r.as_is.statistic;
        *p_value = r.as_is.p_value;
        *flipped_statistic = r.flipped.statistic;
        *flipped_p_value = r.flipped.p_value;
        Ok(())
    })
}
