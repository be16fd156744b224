//! C ABI over the propagation operators and threshold formulas of
//! `pnd-core`.
//!
//! Conventions:
//! * Matrices are dense, row-major `double` buffers of `rows * cols`
//!   entries. Output buffers are allocated by the caller.
//! * Every fallible call returns a [`PndStatus`]; on failure a message is
//!   available from [`pnd_last_error`] on the same thread.
//! * Graph handles come from [`pnd_graph_new`] and must be released with
//!   [`pnd_graph_free`]. A handle may be shared by concurrent readers.
//! * Panics never cross the boundary; they surface as `PND_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pnd_core::graph::{dirichlet_energy, homophily, normalized_adjacency};
use pnd_core::propagation::{inverse_propagate, normalize_rows, ppr_exact, propagate_pnd, propagate_pnd_fix};
use pnd_core::theory::{beta_exact, correction_threshold, epsilon_bound, TheoryParams};
use pnd_core::{DenseMatrix, Error, NormalizedAdjacency, PropagationConfig, SparseGraph};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PndStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// Shapes, ranges or values were rejected.
    InvalidInput = 2,
    /// An iterative solver failed to converge or a value became non-finite.
    Numeric = 3,
    /// The quantity is undefined for this input (e.g. homophily without edges).
    Undefined = 4,
    Panic = 5,
}

/// Undirected graph together with its normalized adjacency `Ã`.
pub struct PndGraph {
    graph: SparseGraph,
    adjacency: NormalizedAdjacency,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PndStatus {
    match e {
        Error::Numeric(_) => PndStatus::Numeric,
        Error::UndefinedMetric(_) => PndStatus::Undefined,
        _ => PndStatus::InvalidInput,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (PndStatus, String)>) -> PndStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PndStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("panic: {msg}"));
            PndStatus::Panic
        }
    }
}

fn core(e: Error) -> (PndStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PndStatus, String) {
    (PndStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (PndStatus, String) {
    (PndStatus::InvalidInput, msg.into())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (PndStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn graph_ref<'a>(g: *const PndGraph) -> Result<&'a PndGraph, (PndStatus, String)> {
    g.as_ref().ok_or_else(|| null("graph"))
}

unsafe fn read_matrix(p: *const f64, rows: usize, cols: usize) -> Result<DenseMatrix, (PndStatus, String)> {
    let len = rows.checked_mul(cols).ok_or_else(|| invalid("rows * cols overflows"))?;
    let data = slice(p, len, "input matrix")?;
    DenseMatrix::new(rows, cols, data.to_vec()).map_err(core)
}

unsafe fn write_matrix(m: &DenseMatrix, out: *mut f64) -> Result<(), (PndStatus, String)> {
    let src = m.as_slice();
    if src.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("output buffer"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

unsafe fn write_scalar(v: f64, out: *mut f64) -> Result<(), (PndStatus, String)> {
    out.as_mut().map(|o| *o = v).ok_or_else(|| null("output pointer"))
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pnd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pnd_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(c) => c,
        Err(_) => c"unknown",
    };
    VERSION.as_ptr()
}

/// Builds a graph from `num_edges` pairs stored as `edges[2*i], edges[2*i+1]`.
/// Duplicate and reversed pairs collapse; self-loops are dropped.
///
/// # Safety
/// `edges` must point to `2 * num_edges` readable values and `out` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pnd_graph_new(
    num_nodes: usize,
    edges: *const u32,
    num_edges: usize,
    out: *mut *mut PndGraph,
) -> PndStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let len = num_edges.checked_mul(2).ok_or_else(|| invalid("edge count overflows"))?;
        let raw = slice(edges, len, "edges")?;
        let pairs: Vec<(usize, usize)> = raw.chunks_exact(2).map(|c| (c[0] as usize, c[1] as usize)).collect();
        let graph = SparseGraph::from_edges(&pairs, num_nodes).map_err(core)?;
        let adjacency = normalized_adjacency(&graph);
        *out = Box::into_raw(Box::new(PndGraph { graph, adjacency }));
        Ok(())
    })
}

/// Releases a graph. Null is ignored.
///
/// # Safety
/// `g` must come from [`pnd_graph_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pnd_graph_free(g: *mut PndGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pnd_graph_num_nodes(g: *const PndGraph) -> usize {
    g.as_ref().map_or(0, |g| g.graph.num_nodes())
}

/// Number of undirected edges, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pnd_graph_num_edges(g: *const PndGraph) -> usize {
    g.as_ref().map_or(0, |g| g.graph.num_edges())
}

/// Fraction of edges joining equal labels; `labels` has one entry per node.
///
/// # Safety
/// `labels` must hold `num_nodes` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pnd_graph_homophily(g: *const PndGraph, labels: *const u32, out: *mut f64) -> PndStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let labels: Vec<usize> = slice(labels, g.graph.num_nodes(), "labels")?
            .iter()
            .map(|&y| y as usize)
            .collect();
        write_scalar(homophily(&g.graph, &labels).map_err(core)?, out)
    })
}

/// `(γÃ + (1 − γ)I)^T P`.
///
/// # Safety
/// `p` and `out` must each hold `num_nodes * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn pnd_propagate(
    g: *const PndGraph,
    p: *const f64,
    cols: usize,
    gamma: f64,
    iterations: usize,
    out: *mut f64,
) -> PndStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let m = read_matrix(p, g.graph.num_nodes(), cols)?;
        let cfg = PropagationConfig::new(gamma, iterations).map_err(core)?;
        write_matrix(&propagate_pnd(&m, &g.adjacency, &cfg).map_err(core)?, out)
    })
}

/// Like [`pnd_propagate`] but the rows listed in `fixed` are reset to their
/// input values after every step.
///
/// # Safety
/// As for [`pnd_propagate`]; `fixed` must hold `num_fixed` indices.
#[no_mangle]
pub unsafe extern "C" fn pnd_propagate_fix(
    g: *const PndGraph,
    p: *const f64,
    cols: usize,
    gamma: f64,
    iterations: usize,
    fixed: *const usize,
    num_fixed: usize,
    out: *mut f64,
) -> PndStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let m = read_matrix(p, g.graph.num_nodes(), cols)?;
        let fixed = slice(fixed, num_fixed, "fixed")?;
        let cfg = PropagationConfig::new(gamma, iterations).map_err(core)?;
        write_matrix(&propagate_pnd_fix(&m, &g.adjacency, &cfg, fixed).map_err(core)?, out)
    })
}

/// Personalized PageRank `(1 − γ)(I − γÃ)^{-1} P` for `0 < γ < 1`.
///
/// # Safety
/// `p` and `out` must each hold `num_nodes * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn pnd_ppr(g: *const PndGraph, p: *const f64, cols: usize, gamma: f64, out: *mut f64) -> PndStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let m = read_matrix(p, g.graph.num_nodes(), cols)?;
        write_matrix(&ppr_exact(&m, &g.adjacency, gamma).map_err(core)?, out)
    })
}

/// `(2I − γÃ) P`.
///
/// # Safety
/// `p` and `out` must each hold `num_nodes * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn pnd_inverse_propagate(
    g: *const PndGraph,
    p: *const f64,
    cols: usize,
    gamma: f64,
    out: *mut f64,
) -> PndStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let m = read_matrix(p, g.graph.num_nodes(), cols)?;
        write_matrix(&inverse_propagate(&m, &g.adjacency, gamma).map_err(core)?, out)
    })
}

/// Clamps entries below `floor` to `floor`, then rescales rows to sum to 1.
///
/// # Safety
/// `p` and `out` must each hold `rows * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn pnd_normalize_rows(
    p: *const f64,
    rows: usize,
    cols: usize,
    floor: f64,
    out: *mut f64,
) -> PndStatus {
    guard(|| {
        let m = read_matrix(p, rows, cols)?;
        write_matrix(normalize_rows(&m, floor).map_err(core)?.matrix(), out)
    })
}

/// `tr(Fᵀ(I − Ã)F)`.
///
/// # Safety
/// `f` must hold `num_nodes * cols` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pnd_dirichlet_energy(g: *const PndGraph, f: *const f64, cols: usize, out: *mut f64) -> PndStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let m = read_matrix(f, g.graph.num_nodes(), cols)?;
        write_scalar(dirichlet_energy(&m, &g.adjacency).map_err(core)?, out)
    })
}

/// Post-propagation scores `β` (true class) and `β'` (competing class) of
/// a node whose teacher assigns `q` to its true class.
///
/// # Safety
/// `beta` and `beta_prime` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pnd_beta_exact(
    h: f64,
    p: f64,
    num_classes: usize,
    gamma: f64,
    epsilon: f64,
    q: f64,
    beta: *mut f64,
    beta_prime: *mut f64,
) -> PndStatus {
    guard(|| {
        let t = TheoryParams {
            h,
            p,
            num_classes,
            gamma,
            epsilon,
            q,
        };
        let (b, bp) = beta_exact(&t).map_err(core)?;
        write_scalar(b, beta)?;
        write_scalar(bp, beta_prime)
    })
}

/// Approximate lower bound on `q` above which one propagation step
/// corrects the prediction.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pnd_correction_threshold(
    h: f64,
    p: f64,
    num_classes: usize,
    gamma: f64,
    epsilon: f64,
    out: *mut f64,
) -> PndStatus {
    guard(|| write_scalar(correction_threshold(h, p, num_classes, gamma, epsilon).map_err(core)?, out))
}

/// Largest teacher error rate for which correction remains possible.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pnd_epsilon_bound(h: f64, num_classes: usize, out: *mut f64) -> PndStatus {
    guard(|| write_scalar(epsilon_bound(h, num_classes).map_err(core)?, out))
}
