//! C ABI for the bandgraph library.
//!
//! Conventions:
//!
//! * Handles (`BgGraph`, `BgBandStructure`) are opaque; create them through
//!   the constructors here and release them with the matching `_free`.
//! * Every fallible call returns a [`BgStatus`]; on anything but
//!   `BG_STATUS_OK` the out-parameters are untouched and
//!   [`bg_last_error_message`] returns a description of the failure.
//! * Strings returned by the library are NUL-terminated, heap-allocated and
//!   released with [`bg_string_free`].
//!
//! The generated header lives at `include/bandgraph.h`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};

use libc::c_char;

use bandgraph::bands::{band_functions, periodic_spectrum, spectrum, BandStructure, GridSpec};
use bandgraph::graph::{builtin, FundamentalGraph, PerturbationSpec};

/// Result code of a C-API call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum BgStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Invalid input: graph validation, dimensions, parameters.
    InvalidInput = 3,
    /// A numerical routine failed to converge.
    NumericalFailure = 4,
}

/// Opaque handle to a fundamental graph.
pub struct BgGraph {
    inner: FundamentalGraph,
}

/// Opaque handle to a computed band structure.
pub struct BgBandStructure {
    inner: BandStructure,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(e: bandgraph::Error) -> BgStatus {
    let status = match &e {
        bandgraph::Error::NoConvergence(_) => BgStatus::NumericalFailure,
        _ => BgStatus::InvalidInput,
    };
    set_error(e.to_string());
    status
}

/// Last error message of the current thread, or NULL when no error was
/// recorded. The caller owns the returned string (free with
/// [`bg_string_free`]).
#[no_mangle]
pub extern "C" fn bg_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must have been returned by a bandgraph function and not freed before.
#[no_mangle]
pub unsafe extern "C" fn bg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, BgStatus> {
    if p.is_null() {
        set_error("NULL string argument".into());
        return Err(BgStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8".into());
        BgStatus::InvalidUtf8
    })
}

unsafe fn graph_ref<'a>(g: *const BgGraph) -> Result<&'a FundamentalGraph, BgStatus> {
    if g.is_null() {
        set_error("NULL graph handle".into());
        return Err(BgStatus::NullPointer);
    }
    Ok(&(*g).inner)
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize) -> Result<&'a [T], BgStatus> {
    if p.is_null() && len > 0 {
        set_error("NULL array argument".into());
        return Err(BgStatus::NullPointer);
    }
    Ok(if len == 0 {
        &[]
    } else {
        std::slice::from_raw_parts(p, len)
    })
}

fn emit_graph(g: FundamentalGraph, out: *mut *mut BgGraph) -> BgStatus {
    if out.is_null() {
        set_error("NULL out pointer".into());
        return BgStatus::NullPointer;
    }
    let boxed = Box::new(BgGraph { inner: g });
    unsafe { *out = Box::into_raw(boxed) };
    BgStatus::Ok
}

/// Builds a graph from the builtin catalog (`lattice:<d>`, `line2`,
/// `hexagonal`, `hex-limit`, `line2-limit`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must point to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn bg_graph_builtin(
    name: *const c_char,
    q: f64,
    out: *mut *mut BgGraph,
) -> BgStatus {
    let name = match read_str(name) {
        Ok(s) => s,
        Err(st) => return st,
    };
    match builtin(name, q) {
        Ok(g) => emit_graph(g, out),
        Err(e) => fail(e),
    }
}

/// Parses a graph from the JSON graph format.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must point to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn bg_graph_from_json(
    json: *const c_char,
    out: *mut *mut BgGraph,
) -> BgStatus {
    let text = match read_str(json) {
        Ok(s) => s,
        Err(st) => return st,
    };
    match FundamentalGraph::from_json(text) {
        Ok(g) => emit_graph(g, out),
        Err(e) => fail(e),
    }
}

/// Serializes a graph to the JSON graph format. Returns NULL on a NULL
/// handle. Free the result with [`bg_string_free`].
///
/// # Safety
/// `graph` must be a live handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn bg_graph_to_json(graph: *const BgGraph) -> *mut c_char {
    match graph_ref(graph) {
        Ok(g) => match CString::new(g.to_json()) {
            Ok(s) => s.into_raw(),
            Err(_) => std::ptr::null_mut(),
        },
        Err(_) => std::ptr::null_mut(),
    }
}

/// Releases a graph handle. NULL is ignored.
///
/// # Safety
/// `graph` must be a handle from this library, not freed before.
#[no_mangle]
pub unsafe extern "C" fn bg_graph_free(graph: *mut BgGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Lattice dimension d of the graph (0 on NULL).
///
/// # Safety
/// `graph` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn bg_graph_dimension(graph: *const BgGraph) -> usize {
    graph_ref(graph).map(|g| g.dimension()).unwrap_or(0)
}

/// Number of vertices ν (0 on NULL).
///
/// # Safety
/// `graph` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn bg_graph_vertex_count(graph: *const BgGraph) -> usize {
    graph_ref(graph).map(|g| g.vertex_count()).unwrap_or(0)
}

/// Number of unoriented edges (0 on NULL).
///
/// # Safety
/// `graph` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn bg_graph_edge_count(graph: *const BgGraph) -> usize {
    graph_ref(graph).map(|g| g.edges().len()).unwrap_or(0)
}

/// Adds one edge `(v1, v2)` with the given index vector; writes the new
/// graph to `out`. The input graph is unchanged.
///
/// # Safety
/// `graph` must be a live handle; `v1`, `v2` NUL-terminated strings;
/// `index` an array of `index_len` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bg_graph_perturb(
    graph: *const BgGraph,
    v1: *const c_char,
    v2: *const c_char,
    index: *const i64,
    index_len: usize,
    out: *mut *mut BgGraph,
) -> BgStatus {
    let g = match graph_ref(graph) {
        Ok(g) => g,
        Err(st) => return st,
    };
    let v1 = match read_str(v1) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let v2 = match read_str(v2) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let idx = match slice_arg(index, index_len) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let p = PerturbationSpec {
        v1: v1.to_string(),
        v2: v2.to_string(),
        index: idx.to_vec(),
    };
    match g.perturb(&p) {
        Ok(gt) => emit_graph(gt, out),
        Err(e) => fail(e),
    }
}

/// Builds the (d+1)-dimensional limit graph, reindexing the edge at
/// `added_edge` to the new axis.
///
/// # Safety
/// `graph` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bg_graph_lift_to_limit(
    graph: *const BgGraph,
    added_edge: usize,
    out: *mut *mut BgGraph,
) -> BgStatus {
    let g = match graph_ref(graph) {
        Ok(g) => g,
        Err(st) => return st,
    };
    match g.lift_to_limit(added_edge) {
        Ok(lim) => emit_graph(lim, out),
        Err(e) => fail(e),
    }
}

/// Band functions at one quasimomentum: writes ν values (sorted ascending)
/// to `out_values`, which must hold `bg_graph_vertex_count` doubles.
///
/// # Safety
/// `graph` must be a live handle; `k` an array of `k_len` doubles;
/// `out_values` writable storage for ν doubles.
#[no_mangle]
pub unsafe extern "C" fn bg_band_functions(
    graph: *const BgGraph,
    k: *const f64,
    k_len: usize,
    out_values: *mut f64,
) -> BgStatus {
    let g = match graph_ref(graph) {
        Ok(g) => g,
        Err(st) => return st,
    };
    let k = match slice_arg(k, k_len) {
        Ok(s) => s,
        Err(st) => return st,
    };
    if out_values.is_null() {
        set_error("NULL out pointer".into());
        return BgStatus::NullPointer;
    }
    match band_functions(g, k) {
        Ok(values) => {
            std::ptr::copy_nonoverlapping(values.as_ptr(), out_values, values.len());
            BgStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Eigenvalues of the fiber at k = 0 (the periodic spectrum): ν values.
///
/// # Safety
/// `graph` must be a live handle; `out_values` writable storage for ν
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn bg_periodic_spectrum(
    graph: *const BgGraph,
    out_values: *mut f64,
) -> BgStatus {
    let g = match graph_ref(graph) {
        Ok(g) => g,
        Err(st) => return st,
    };
    if out_values.is_null() {
        set_error("NULL out pointer".into());
        return BgStatus::NullPointer;
    }
    match periodic_spectrum(g) {
        Ok(values) => {
            std::ptr::copy_nonoverlapping(values.as_ptr(), out_values, values.len());
            BgStatus::Ok
        }
        Err(e) => fail(e),
    }
}

fn grid_for(g: &FundamentalGraph, grid_points: usize) -> Result<GridSpec, bandgraph::Error> {
    if grid_points == 0 {
        Ok(GridSpec::default_for(g.dimension()))
    } else {
        GridSpec::new(grid_points, 1e-10, 500)
    }
}

/// Computes the full band structure. `grid_points` = 0 selects the default
/// resolution for the graph dimension.
///
/// # Safety
/// `graph` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bg_spectrum(
    graph: *const BgGraph,
    grid_points: usize,
    out: *mut *mut BgBandStructure,
) -> BgStatus {
    let g = match graph_ref(graph) {
        Ok(g) => g,
        Err(st) => return st,
    };
    if out.is_null() {
        set_error("NULL out pointer".into());
        return BgStatus::NullPointer;
    }
    let spec = match grid_for(g, grid_points) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    match spectrum(g, &spec) {
        Ok(st) => {
            *out = Box::into_raw(Box::new(BgBandStructure { inner: st }));
            BgStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Number of bands in a band structure (0 on NULL).
///
/// # Safety
/// `bs` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn bg_band_structure_band_count(bs: *const BgBandStructure) -> usize {
    if bs.is_null() {
        return 0;
    }
    (*bs).inner.bands.len()
}

/// Edges and flat flag of band `band` (1-based).
///
/// # Safety
/// `bs` must be a live handle; the out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn bg_band_structure_edges(
    bs: *const BgBandStructure,
    band: usize,
    out_min: *mut f64,
    out_max: *mut f64,
    out_flat: *mut bool,
) -> BgStatus {
    if bs.is_null() || out_min.is_null() || out_max.is_null() || out_flat.is_null() {
        set_error("NULL argument".into());
        return BgStatus::NullPointer;
    }
    let bands = &(*bs).inner.bands;
    if band == 0 || band > bands.len() {
        set_error(format!(
            "band index {band} out of range 1..={}",
            bands.len()
        ));
        return BgStatus::InvalidInput;
    }
    let b = &bands[band - 1];
    *out_min = b.min;
    *out_max = b.max;
    *out_flat = b.flat;
    BgStatus::Ok
}

/// Number of disjoint intervals in the merged spectrum (0 on NULL).
///
/// # Safety
/// `bs` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn bg_band_structure_interval_count(bs: *const BgBandStructure) -> usize {
    if bs.is_null() {
        return 0;
    }
    (*bs).inner.spectrum.len()
}

/// The `i`-th (0-based) interval of the merged spectrum.
///
/// # Safety
/// `bs` must be a live handle; the out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn bg_band_structure_interval(
    bs: *const BgBandStructure,
    i: usize,
    out_lo: *mut f64,
    out_hi: *mut f64,
) -> BgStatus {
    if bs.is_null() || out_lo.is_null() || out_hi.is_null() {
        set_error("NULL argument".into());
        return BgStatus::NullPointer;
    }
    let intervals = &(*bs).inner.spectrum;
    if i >= intervals.len() {
        set_error(format!(
            "interval index {i} out of range 0..{}",
            intervals.len()
        ));
        return BgStatus::InvalidInput;
    }
    *out_lo = intervals[i].0;
    *out_hi = intervals[i].1;
    BgStatus::Ok
}

/// Releases a band structure handle. NULL is ignored.
///
/// # Safety
/// `bs` must be a handle from this library, not freed before.
#[no_mangle]
pub unsafe extern "C" fn bg_band_structure_free(bs: *mut BgBandStructure) {
    if !bs.is_null() {
        drop(Box::from_raw(bs));
    }
}

/// Max-norm deviation of the restriction identity
/// `H_{G_t}(k) = H_{G̃}(k, ⟨t, k⟩)`.
///
/// # Safety
/// Both graphs must be live handles; `t` and `k` arrays of the given
/// lengths; `out_deviation` writable.
#[no_mangle]
pub unsafe extern "C" fn bg_restriction_check(
    perturbed: *const BgGraph,
    limit: *const BgGraph,
    t: *const i64,
    t_len: usize,
    k: *const f64,
    k_len: usize,
    out_deviation: *mut f64,
) -> BgStatus {
    let g_t = match graph_ref(perturbed) {
        Ok(g) => g,
        Err(st) => return st,
    };
    let g_lim = match graph_ref(limit) {
        Ok(g) => g,
        Err(st) => return st,
    };
    let t = match slice_arg(t, t_len) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let k = match slice_arg(k, k_len) {
        Ok(s) => s,
        Err(st) => return st,
    };
    if out_deviation.is_null() {
        set_error("NULL out pointer".into());
        return BgStatus::NullPointer;
    }
    match bandgraph::analysis::restriction_check(g_t, g_lim, t, k) {
        Ok(dev) => {
            *out_deviation = dev;
            BgStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Runs the exact-isospectrality criterion for a perturbed graph against its
/// limit graph. `grid_points` = 0 selects the default resolution.
///
/// # Safety
/// Both graphs must be live handles; `t` an array of `t_len` values;
/// `out_isospectral` writable.
#[no_mangle]
pub unsafe extern "C" fn bg_check_isospectral(
    perturbed: *const BgGraph,
    limit: *const BgGraph,
    t: *const i64,
    t_len: usize,
    grid_points: usize,
    out_isospectral: *mut bool,
) -> BgStatus {
    let g_t = match graph_ref(perturbed) {
        Ok(g) => g,
        Err(st) => return st,
    };
    let g_lim = match graph_ref(limit) {
        Ok(g) => g,
        Err(st) => return st,
    };
    let t = match slice_arg(t, t_len) {
        Ok(s) => s,
        Err(st) => return st,
    };
    if out_isospectral.is_null() {
        set_error("NULL out pointer".into());
        return BgStatus::NullPointer;
    }
    let spec = match grid_for(g_lim, grid_points) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    match bandgraph::analysis::check_isospectral(g_t, g_lim, t, &spec) {
        Ok(report) => {
            *out_isospectral = report.isospectral;
            BgStatus::Ok
        }
        Err(e) => fail(e),
    }
}
