//! Fiber operators and band structure over the quasimomentum torus.
//!
//! For a fundamental graph with ν vertices the fiber operator at
//! quasimomentum `k ∈ (−π, π]^d` is the ν×ν Hermitian matrix
//!
//! ```text
//! H(k)[v, u] = δ_vu (κ_v + Q_v) − Σ_{e=(v,u)} exp(i⟨τ(e), k⟩)
//! ```
//!
//! summed over oriented edges from `v` to `u` (κ_v is the degree, loops
//! counted twice). Band functions are the sorted eigenvalues of `H(k)`;
//! their global extrema over the torus are the band edges, located here by a
//! full grid scan followed by multistart Nelder–Mead refinement and a short
//! Newton polish on finite-difference derivatives.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::graph::FundamentalGraph;
use crate::hermitian::HermitianMatrix;
use crate::optim::{fd_gradient, fd_hessian, nelder_mead, solve_linear};
use crate::{fmt_g17, Error, Result};

/// A band is flagged flat when its width does not exceed this.
pub const FLAT_TOL: f64 = 1e-8;
/// Grid values this close to the grid optimum seed a local refinement.
const CLUSTER_TOL: f64 = 1e-6;
/// Extremizers closer than this on the torus are considered equal.
const DEDUP_RADIUS: f64 = 1e-4;
/// Spectrum intervals separated by gaps up to this are merged.
const MERGE_GAP: f64 = 1e-12;
/// Refined points within this of the refined optimum join the extremizer list.
pub(crate) const LEVEL_TOL: f64 = 1e-8;
/// Always refine from this many best grid points, besides the cluster.
const TOP_STARTS: usize = 48;
const MAX_STARTS: usize = 64;
/// Step for finite-difference derivatives in the Newton polish.
const POLISH_STEP: f64 = 1e-3;

/// Reduces an angle to the canonical torus representative in `(−π, π]`.
pub fn canonical_angle(x: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = x - two_pi * (x / two_pi).round();
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// A point of the torus `T^d = (−π, π]^d`, stored canonically.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiMomentum(Vec<f64>);

impl QuasiMomentum {
    /// Canonicalizes each component into `(−π, π]`. Idempotent.
    pub fn new(components: Vec<f64>) -> Self {
        QuasiMomentum(components.into_iter().map(canonical_angle).collect())
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    /// The evenness partner `−k`, canonicalized.
    pub fn negated(&self) -> Self {
        QuasiMomentum::new(self.0.iter().map(|&x| -x).collect())
    }

    /// Euclidean distance on the torus (componentwise circle metric).
    pub fn torus_distance(&self, other: &Self) -> f64 {
        torus_distance(&self.0, &other.0)
    }
}

pub(crate) fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = canonical_angle(x - y).abs();
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Which band edge to search for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Min,
    Max,
}

impl EdgeKind {
    /// +1 for minima, −1 for maxima: `sign * λ` is always minimized.
    fn sign(self) -> f64 {
        match self {
            EdgeKind::Min => 1.0,
            EdgeKind::Max => -1.0,
        }
    }
}

impl std::fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EdgeKind::Min => write!(f, "min"),
            EdgeKind::Max => write!(f, "max"),
        }
    }
}

/// Grid scan and refinement parameters for band-edge searches.
#[derive(Debug, Clone)]
pub struct GridSpec {
    /// Points per torus dimension (at least 8).
    pub points_per_dim: usize,
    /// Function-value tolerance of the derivative-free refinement.
    pub refine_tol: f64,
    /// Iteration cap per refinement run.
    pub max_refine_iter: usize,
}

impl GridSpec {
    pub fn new(points_per_dim: usize, refine_tol: f64, max_refine_iter: usize) -> Result<Self> {
        if points_per_dim < 8 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 8 points per dimension, got {points_per_dim}"
            )));
        }
        if refine_tol.is_nan() || refine_tol <= 0.0 {
            return Err(Error::InvalidParameter(
                "refinement tolerance must be positive".into(),
            ));
        }
        if max_refine_iter == 0 {
            return Err(Error::InvalidParameter(
                "refinement iteration cap must be positive".into(),
            ));
        }
        Ok(GridSpec {
            points_per_dim,
            refine_tol,
            max_refine_iter,
        })
    }

    /// Defaults: N = 48 for d ≤ 2, 24 for d = 3, 12 beyond; tolerance 1e−10,
    /// at most 500 refinement iterations.
    pub fn default_for(dimension: usize) -> Self {
        let n = match dimension {
            0..=2 => 48,
            3 => 24,
            _ => 12,
        };
        GridSpec {
            points_per_dim: n,
            refine_tol: 1e-10,
            max_refine_iter: 500,
        }
    }

    /// Effective scan resolution for a graph: the requested N, raised when
    /// the fiber phases oscillate faster than the grid resolves. An edge of
    /// index `τ` contributes terms of period `2π/|τ_s|` along axis `s`, so
    /// the scan needs several points per such period or the global optimum
    /// basin can fall between grid points.
    fn effective_points(&self, g: &FundamentalGraph) -> usize {
        let max_component = g
            .edges()
            .iter()
            .flat_map(|e| e.index.iter().map(|t| t.unsigned_abs() as usize))
            .max()
            .unwrap_or(0);
        let cap = match g.dimension() {
            1 => 4096,
            2 => 512,
            3 => 96,
            _ => 24,
        };
        // The oscillation-based floor is capped; an explicit request wins.
        self.points_per_dim.max((6 * max_component).min(cap))
    }
}

/// Edges, extremizers and flags of one band.
#[derive(Debug, Clone)]
pub struct BandEdges {
    /// 1-based band index.
    pub band: usize,
    pub min: f64,
    pub max: f64,
    /// Minimizers up to evenness, canonical, lexicographically sorted.
    pub minimizers: Vec<QuasiMomentum>,
    pub maximizers: Vec<QuasiMomentum>,
    pub flat: bool,
    /// Grid-coarseness heuristic: a refined optimizer moved by more than one
    /// grid cell diameter from its starting grid point.
    pub grid_coarse: bool,
}

/// All band edges plus the merged spectrum.
#[derive(Debug, Clone)]
pub struct BandStructure {
    pub bands: Vec<BandEdges>,
    /// Disjoint closed intervals, ascending.
    pub spectrum: Vec<(f64, f64)>,
}

impl BandStructure {
    pub fn band_count(&self) -> usize {
        self.bands.len()
    }
}

/// Assembles the fiber operator `H(k)`.
///
/// `k` is canonicalized first, which makes `H(k + 2π e_s) = H(k)` exact.
pub fn assemble_fiber(g: &FundamentalGraph, k: &[f64]) -> Result<HermitianMatrix> {
    if k.len() != g.dimension() {
        return Err(Error::DimensionMismatch {
            expected: g.dimension(),
            got: k.len(),
        });
    }
    if k.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("quasimomentum"));
    }
    let kc: Vec<f64> = k.iter().map(|&x| canonical_angle(x)).collect();
    let n = g.vertex_count();
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    for (v, vert) in g.vertices().iter().enumerate() {
        data[v * n + v] = Complex64::new(g.degree_of(v) as f64 + vert.potential, 0.0);
    }
    for e in g.oriented_edges() {
        let phase: f64 = e.index.iter().zip(&kc).map(|(&t, &ks)| t as f64 * ks).sum();
        data[e.from * n + e.to] -= Complex64::new(phase.cos(), phase.sin());
    }
    HermitianMatrix::new(n, data)
}

/// Band functions at `k`: the sorted eigenvalues of `H(k)`.
pub fn band_functions(g: &FundamentalGraph, k: &[f64]) -> Result<Vec<f64>> {
    assemble_fiber(g, k)?.eigenvalues()
}

/// Eigenvalues of `H(0)`, the operator's periodic spectrum.
pub fn periodic_spectrum(g: &FundamentalGraph) -> Result<Vec<f64>> {
    band_functions(g, &vec![0.0; g.dimension()])
}

fn check_band_index(g: &FundamentalGraph, j: usize) -> Result<()> {
    let nu = g.vertex_count();
    if j == 0 || j > nu {
        return Err(Error::BandIndex { j, nu });
    }
    Ok(())
}

/// The j-th band value at `k` (j is 1-based).
fn band_value(g: &FundamentalGraph, j: usize, k: &[f64]) -> f64 {
    // Grid/refinement interiors only call this with validated inputs.
    band_functions(g, k).expect("fiber assembly on validated input")[j - 1]
}

// ---------------------------------------------------------------------------
// Grid sweep
// ---------------------------------------------------------------------------

pub(crate) struct Sweep {
    n: usize,
    d: usize,
    /// `values[rank][j-1]` = λ_j at the rank-th grid point (lexicographic).
    values: Vec<Vec<f64>>,
}

impl Sweep {
    fn total(&self) -> usize {
        self.values.len()
    }

    fn k_of_rank(&self, rank: usize) -> Vec<f64> {
        k_of_rank(rank, self.n, self.d)
    }
}

fn k_of_rank(rank: usize, n: usize, d: usize) -> Vec<f64> {
    let mut k = vec![0.0; d];
    let mut r = rank;
    for s in (0..d).rev() {
        let m = r % n;
        r /= n;
        k[s] = -std::f64::consts::PI + std::f64::consts::TAU * m as f64 / n as f64;
    }
    k
}

pub(crate) fn make_sweep(g: &FundamentalGraph, spec: &GridSpec) -> Result<Sweep> {
    let d = g.dimension();
    let n = spec.effective_points(g);
    let total = n
        .checked_pow(d as u32)
        .ok_or_else(|| Error::InvalidParameter("grid too large".into()))?;
    let values: Vec<Vec<f64>> = (0..total)
        .into_par_iter()
        .map(|rank| {
            band_functions(g, &k_of_rank(rank, n, d)).expect("fiber assembly on validated input")
        })
        .collect();
    Ok(Sweep { n, d, values })
}

// ---------------------------------------------------------------------------
// Band-edge search
// ---------------------------------------------------------------------------

pub(crate) struct EdgeSearch {
    /// The located band edge value.
    pub value: f64,
    /// Canonical extremizers, torus-deduplicated, sorted; the full list,
    /// *not* reduced by evenness.
    pub points: Vec<Vec<f64>>,
    /// Distinct refined extremizer count (drives degeneracy detection).
    pub refined_count: usize,
    pub flat: bool,
    pub grid_coarse: bool,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let c = x.total_cmp(y);
        if c != std::cmp::Ordering::Equal {
            return c;
        }
    }
    std::cmp::Ordering::Equal
}

/// Locates one band edge: grid scan (from `sweep`), multistart refinement,
/// Newton polish, then deduplication of the extremizer candidates.
pub(crate) fn edge_search(
    g: &FundamentalGraph,
    sweep: &Sweep,
    j: usize,
    kind: EdgeKind,
    spec: &GridSpec,
) -> Result<EdgeSearch> {
    check_band_index(g, j)?;
    let sign = kind.sign();
    let spacing = std::f64::consts::TAU / sweep.n as f64;
    let cell_diameter = spacing * (sweep.d as f64).sqrt();

    // Signed objective: always a minimization.
    let phi = |k: &[f64]| sign * band_value(g, j, k);

    let mut grid_best = f64::INFINITY;
    let mut band_min = f64::INFINITY;
    let mut band_max = f64::NEG_INFINITY;
    for vals in &sweep.values {
        let v = vals[j - 1];
        band_min = band_min.min(v);
        band_max = band_max.max(v);
        grid_best = grid_best.min(sign * v);
    }
    let flat = band_max - band_min <= FLAT_TOL;

    // Candidate starts: everything within CLUSTER_TOL of the grid optimum,
    // plus the best TOP_STARTS grid values, capped at MAX_STARTS.
    let mut ranked: Vec<usize> = (0..sweep.total()).collect();
    ranked.sort_by(|&a, &b| {
        (sign * sweep.values[a][j - 1])
            .total_cmp(&(sign * sweep.values[b][j - 1]))
            .then(a.cmp(&b))
    });
    let mut starts = Vec::new();
    for (pos, &rank) in ranked.iter().enumerate() {
        let v = sign * sweep.values[rank][j - 1];
        if pos < TOP_STARTS || v <= grid_best + CLUSTER_TOL {
            starts.push(rank);
        } else {
            break;
        }
        if starts.len() == MAX_STARTS {
            break;
        }
    }

    // Refine every start in parallel (order-preserving collect keeps the
    // result independent of the thread count).
    let refined: Vec<(Vec<f64>, f64)> = starts
        .par_iter()
        .map(|&rank| {
            let k0 = sweep.k_of_rank(rank);
            let r = nelder_mead(
                phi,
                &k0,
                spacing / 2.0,
                spec.refine_tol,
                spec.max_refine_iter,
            );
            let (kp, vp) = polish(&phi, &r.x, r.value, spacing);
            (kp.iter().map(|&x| canonical_angle(x)).collect(), vp)
        })
        .collect();

    let refined_best = refined.iter().map(|(_, v)| *v).fold(grid_best, f64::min);

    // Keep refinements that reached the optimum, dedup on the torus.
    let mut keep: Vec<(Vec<f64>, f64)> = refined
        .into_iter()
        .filter(|(_, v)| *v <= refined_best + LEVEL_TOL)
        .collect();
    keep.sort_by(|a, b| a.1.total_cmp(&b.1).then(lex_cmp(&a.0, &b.0)));
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (k, _v) in keep {
        if points.iter().all(|p| torus_distance(p, &k) > DEDUP_RADIUS) {
            points.push(k);
        }
    }
    let refined_count = points.len();
    points.sort_by(|a, b| lex_cmp(a, b));

    // Coarseness heuristic: the grid optimizer should sit within one cell
    // diameter of some refined extremizer, otherwise the scan resolution was
    // too low to trust the located optimum.
    let grid_opt_k = sweep.k_of_rank(ranked[0]);
    let grid_coarse = !points.is_empty()
        && points
            .iter()
            .all(|p| torus_distance(p, &grid_opt_k) > cell_diameter);

    Ok(EdgeSearch {
        value: sign * refined_best,
        points,
        refined_count,
        flat,
        grid_coarse,
    })
}

/// A few Newton steps on finite-difference derivatives. Nelder–Mead alone
/// leaves ~sqrt(tol) position error near a quadratic extremum; the polish
/// brings extremizers to ~1e−8 in k, which downstream witness checks need.
/// Steps that leave the trust region (one grid spacing) or worsen the value
/// are rejected.
fn polish<F>(phi: &F, x0: &[f64], v0: f64, spacing: f64) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = x0.to_vec();
    let mut v = v0;
    for _ in 0..6 {
        let grad = fd_gradient(phi, &x, POLISH_STEP);
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm <= 1e-11 {
            break;
        }
        let hess = fd_hessian(phi, &x, POLISH_STEP);
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let Some(delta) = solve_linear(hess, rhs) else {
            break;
        };
        let dnorm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        if !dnorm.is_finite() || dnorm > spacing {
            break;
        }
        let cand: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let vc = phi(&cand);
        if vc <= v + 1e-12 {
            x = cand;
            v = vc.min(v);
            if dnorm <= 1e-10 {
                break;
            }
        } else {
            break;
        }
    }
    (x, v)
}

/// Reduces a list of canonical torus points by the evenness symmetry
/// `k ↦ −k`: one representative per symmetric pair (the lexicographically
/// larger one), sorted.
pub(crate) fn evenness_reduce(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut reps: Vec<Vec<f64>> = Vec::new();
    for p in points {
        let neg: Vec<f64> = p.iter().map(|&x| canonical_angle(-x)).collect();
        let rep = if lex_cmp(p, &neg) == std::cmp::Ordering::Less {
            neg
        } else {
            p.clone()
        };
        if reps.iter().all(|r| torus_distance(r, &rep) > DEDUP_RADIUS) {
            reps.push(rep);
        }
    }
    reps.sort_by(|a, b| lex_cmp(a, b));
    reps
}

/// Global minimum and maximum of band `j` with extremizer lists
/// (deduplicated on the torus and reduced by evenness).
pub fn band_edges(g: &FundamentalGraph, j: usize, spec: &GridSpec) -> Result<BandEdges> {
    let sweep = make_sweep(g, spec)?;
    band_edges_with(g, &sweep, j, spec)
}

fn band_edges_with(
    g: &FundamentalGraph,
    sweep: &Sweep,
    j: usize,
    spec: &GridSpec,
) -> Result<BandEdges> {
    let lo = edge_search(g, sweep, j, EdgeKind::Min, spec)?;
    let hi = edge_search(g, sweep, j, EdgeKind::Max, spec)?;
    let flat = hi.value - lo.value <= FLAT_TOL;
    let origin = || vec![QuasiMomentum::new(vec![0.0; g.dimension()])];
    let (minimizers, maximizers) = if flat {
        // Constant bands attain their value everywhere; report the origin.
        (origin(), origin())
    } else {
        (
            evenness_reduce(&lo.points)
                .into_iter()
                .map(QuasiMomentum::new)
                .collect(),
            evenness_reduce(&hi.points)
                .into_iter()
                .map(QuasiMomentum::new)
                .collect(),
        )
    };
    Ok(BandEdges {
        band: j,
        min: lo.value,
        max: hi.value,
        minimizers,
        maximizers,
        flat,
        grid_coarse: lo.grid_coarse || hi.grid_coarse,
    })
}

/// Full band structure: every band's edges plus the merged spectrum.
///
/// ```
/// use bandgraph::bands::{spectrum, GridSpec};
/// let g = bandgraph::graph::builtin("line2", 0.5).unwrap();
/// let st = spectrum(&g, &GridSpec::default_for(1)).unwrap();
/// // Two bands separated by a gap around 2: [2−√4.25, 1.5] ∪ [2.5, 2+√4.25].
/// assert_eq!(st.spectrum.len(), 2);
/// assert!((st.spectrum[0].1 - 1.5).abs() < 1e-8);
/// assert!((st.spectrum[1].0 - 2.5).abs() < 1e-8);
/// ```
pub fn spectrum(g: &FundamentalGraph, spec: &GridSpec) -> Result<BandStructure> {
    let sweep = make_sweep(g, spec)?;
    let nu = g.vertex_count();
    let mut bands = Vec::with_capacity(nu);
    for j in 1..=nu {
        bands.push(band_edges_with(g, &sweep, j, spec)?);
    }
    // Pointwise eigenvalue sorting forces λ_j^- ≤ λ_{j+1}^-; refinement can
    // only sharpen both sides, so any violation indicates a search failure.
    for w in bands.windows(2) {
        debug_assert!(w[0].min <= w[1].min + 1e-9);
    }
    let mut intervals: Vec<(f64, f64)> = bands.iter().map(|b| (b.min, b.max)).collect();
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut spectrum: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in intervals {
        match spectrum.last_mut() {
            Some(last) if lo <= last.1 + MERGE_GAP => last.1 = last.1.max(hi),
            _ => spectrum.push((lo, hi)),
        }
    }
    Ok(BandStructure { bands, spectrum })
}

// ---------------------------------------------------------------------------
// Dispersion export
// ---------------------------------------------------------------------------

/// Band functions tabulated over a regular grid, row order lexicographic in
/// the grid indices.
#[derive(Debug, Clone)]
pub struct DispersionTable {
    pub dimension: usize,
    pub band_count: usize,
    /// Each row is `(k, λ_1..λ_ν)`.
    pub rows: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Samples all band functions on an `n`-per-axis grid. Unlike band-edge
/// searches this never adapts the resolution: the caller asked for exactly
/// `n^d` rows.
pub fn dispersion_table(g: &FundamentalGraph, n: usize) -> Result<DispersionTable> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "grid must have at least 1 point per dimension".into(),
        ));
    }
    let d = g.dimension();
    let total = n
        .checked_pow(d as u32)
        .ok_or_else(|| Error::InvalidParameter("grid too large".into()))?;
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..total)
        .into_par_iter()
        .map(|rank| {
            let k = k_of_rank(rank, n, d);
            let lambdas = band_functions(g, &k).expect("fiber assembly on validated input");
            (k, lambdas)
        })
        .collect();
    Ok(DispersionTable {
        dimension: d,
        band_count: g.vertex_count(),
        rows,
    })
}

impl DispersionTable {
    /// CSV with header `k1,...,kd,lambda_1,...,lambda_nu`, 17 significant
    /// digits, LF line endings.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header: Vec<String> = (1..=self.dimension).map(|s| format!("k{s}")).collect();
        header.extend((1..=self.band_count).map(|j| format!("lambda_{j}")));
        writeln!(w, "{}", header.join(","))?;
        for (k, lambdas) in &self.rows {
            let fields: Vec<String> = k
                .iter()
                .chain(lambdas.iter())
                .map(|&x| fmt_g17(x))
                .collect();
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{builtin, PerturbationSpec};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn canonical_angle_range_and_idempotence() {
        for x in [-10.0, -PI, -0.5, 0.0, 0.5, PI, 10.0, 3.0 * PI] {
            let c = canonical_angle(x);
            assert!(c > -PI && c <= PI, "{x} -> {c}");
            assert_eq!(canonical_angle(c), c);
            approx(
                (x - c) / std::f64::consts::TAU,
                ((x - c) / std::f64::consts::TAU).round(),
                1e-12,
            );
        }
        assert_eq!(canonical_angle(PI), PI);
        assert_eq!(canonical_angle(-PI), PI);
    }

    #[test]
    fn lattice_fiber_is_scalar_cosine_sum() {
        for d in 1..=3usize {
            let g = builtin(&format!("lattice:{d}"), 0.0).unwrap();
            let k: Vec<f64> = (0..d).map(|s| 0.3 + 0.41 * s as f64).collect();
            let h = assemble_fiber(&g, &k).unwrap();
            assert_eq!(h.order(), 1);
            let want = 2.0 * d as f64 - 2.0 * k.iter().map(|x| x.cos()).sum::<f64>();
            approx(h.get(0, 0).re, want, 1e-13);
            approx(h.get(0, 0).im, 0.0, 1e-15);
        }
    }

    #[test]
    fn hex_limit_fiber_matches_closed_form() {
        let q = 0.5;
        let g = builtin("hex-limit", q).unwrap();
        let k = [0.7, -1.1];
        let h = assemble_fiber(&g, &k).unwrap();
        approx(h.get(0, 0).re, 3.0 + q, 1e-13);
        approx(h.get(1, 1).re, 3.0 - q, 1e-13);
        let want = -Complex64::new(1.0, 0.0)
            - Complex64::new(0.0, k[0]).exp()
            - Complex64::new(0.0, -k[1]).exp();
        assert!((h.get(0, 1) - want).norm() < 1e-13);
    }

    #[test]
    fn fiber_at_zero_is_real_schroedinger_operator() {
        let g = builtin("hexagonal", 0.3).unwrap();
        let h = assemble_fiber(&g, &[0.0, 0.0]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                approx(h.get(i, j).im, 0.0, 1e-15);
            }
        }
        approx(h.get(0, 1).re, -3.0, 1e-15);
    }

    #[test]
    fn fiber_dimension_mismatch() {
        let g = builtin("line2", 0.5).unwrap();
        assert!(matches!(
            assemble_fiber(&g, &[0.1, 0.2]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn line2_band_functions_closed_form() {
        let q = 0.5f64;
        let g = builtin("line2", q).unwrap();
        for k in [-2.0, -0.4, 0.0, 1.3, PI] {
            let l = band_functions(&g, &[k]).unwrap();
            let root = (4.0 * (k / 2.0).cos().powi(2) + q * q).sqrt();
            approx(l[0], 2.0 - root, 1e-12);
            approx(l[1], 2.0 + root, 1e-12);
        }
    }

    #[test]
    fn lattice2_band_at_pi_pi() {
        let g = builtin("lattice:2", 0.0).unwrap();
        let l = band_functions(&g, &[PI, PI]).unwrap();
        approx(l[0], 8.0, 1e-12);
    }

    #[test]
    fn periodicity_is_exact() {
        let g = builtin("hex-limit", 0.5).unwrap();
        let k = [0.37, -2.11];
        let h1 = assemble_fiber(&g, &k).unwrap();
        let h2 = assemble_fiber(&g, &[k[0] + std::f64::consts::TAU, k[1]]).unwrap();
        assert_eq!(h1.entries(), h2.entries());
    }

    #[test]
    fn lattice_band_edges() {
        for d in 1..=2usize {
            let g = builtin(&format!("lattice:{d}"), 0.0).unwrap();
            let spec = GridSpec::default_for(d);
            let be = band_edges(&g, 1, &spec).unwrap();
            approx(be.min, 0.0, 1e-9);
            approx(be.max, 4.0 * d as f64, 1e-9);
            assert_eq!(be.minimizers.len(), 1);
            for x in be.minimizers[0].components() {
                approx(*x, 0.0, 1e-6);
            }
            assert_eq!(be.maximizers.len(), 1);
            for x in be.maximizers[0].components() {
                approx(x.abs(), PI, 1e-6);
            }
            assert!(!be.flat);
        }
    }

    #[test]
    fn line2_band_edges_and_extremizers() {
        let q = 0.5f64;
        let g = builtin("line2", q).unwrap();
        let spec = GridSpec::default_for(1);
        let be1 = band_edges(&g, 1, &spec).unwrap();
        approx(be1.min, 2.0 - (4.0 + q * q).sqrt(), 1e-9);
        approx(be1.max, 2.0 - q, 1e-9);
        assert_eq!(be1.minimizers.len(), 1);
        approx(be1.minimizers[0].components()[0], 0.0, 1e-6);
        assert_eq!(be1.maximizers.len(), 1);
        approx(be1.maximizers[0].components()[0].abs(), PI, 1e-6);
        assert!(band_edges(&g, 3, &spec).is_err());
        assert!(band_edges(&g, 0, &spec).is_err());
    }

    #[test]
    fn single_vertex_static_band_is_flat() {
        let g = crate::graph::FundamentalGraph::new(1, vec![("a".into(), 2.5)], vec![]).unwrap();
        let spec = GridSpec::default_for(1);
        let be = band_edges(&g, 1, &spec).unwrap();
        approx(be.min, 2.5, 1e-12);
        approx(be.max, 2.5, 1e-12);
        assert!(be.flat);
    }

    #[test]
    fn hex_limit_spectrum_two_bands_with_gap() {
        let q = 0.5f64;
        let g = builtin("hex-limit", q).unwrap();
        let st = spectrum(&g, &GridSpec::default_for(2)).unwrap();
        assert_eq!(st.spectrum.len(), 2);
        let r = (9.0 + q * q).sqrt();
        approx(st.spectrum[0].0, 3.0 - r, 1e-8);
        approx(st.spectrum[0].1, 3.0 - q, 1e-8);
        approx(st.spectrum[1].0, 3.0 + q, 1e-8);
        approx(st.spectrum[1].1, 3.0 + r, 1e-8);
        // Sorted lower edges.
        assert!(st.bands[0].min <= st.bands[1].min);
    }

    #[test]
    fn lattice1_spectrum_merges_to_single_interval() {
        let g = builtin("lattice:1", 0.0).unwrap();
        let st = spectrum(&g, &GridSpec::default_for(1)).unwrap();
        assert_eq!(st.spectrum.len(), 1);
        approx(st.spectrum[0].0, 0.0, 1e-9);
        approx(st.spectrum[0].1, 4.0, 1e-9);
    }

    #[test]
    fn periodic_spectrum_line2() {
        let q = 0.5f64;
        let g = builtin("line2", q).unwrap();
        let ps = periodic_spectrum(&g).unwrap();
        let root = (4.0 + q * q).sqrt();
        approx(ps[0], 2.0 - root, 1e-12);
        approx(ps[1], 2.0 + root, 1e-12);
    }

    #[test]
    fn periodic_spectrum_single_loop_is_zero() {
        let g = crate::graph::FundamentalGraph::new(
            1,
            vec![("v".into(), 0.0)],
            vec![("v".into(), "v".into(), vec![5])],
        )
        .unwrap();
        let ps = periodic_spectrum(&g).unwrap();
        approx(ps[0], 0.0, 1e-13);
    }

    #[test]
    fn periodic_spectrum_shared_by_perturbed_and_limit() {
        let g = builtin("hexagonal", 0.5).unwrap();
        let gt = g
            .perturb(&PerturbationSpec {
                v1: "v1".into(),
                v2: "v2".into(),
                index: vec![3, 1],
            })
            .unwrap();
        let lim = gt.lift_to_limit(3).unwrap();
        let a = periodic_spectrum(&gt).unwrap();
        let b = periodic_spectrum(&lim).unwrap();
        for (x, y) in a.iter().zip(&b) {
            approx(*x, *y, 1e-12);
        }
    }

    #[test]
    fn dispersion_rows_and_closed_form() {
        let g = builtin("lattice:1", 0.0).unwrap();
        let t = dispersion_table(&g, 4).unwrap();
        assert_eq!(t.rows.len(), 4);
        for (k, l) in &t.rows {
            approx(l[0], 2.0 - 2.0 * k[0].cos(), 1e-12);
        }
        assert!(dispersion_table(&g, 0).is_err());
    }

    #[test]
    fn dispersion_trace_identity_line2() {
        let g = builtin("line2", 0.5).unwrap();
        let t = dispersion_table(&g, 16).unwrap();
        for (_, l) in &t.rows {
            approx(l[0] + l[1], 4.0, 1e-12);
        }
    }

    #[test]
    fn dispersion_csv_shape() {
        let g = builtin("hex-limit", 0.5).unwrap();
        let t = dispersion_table(&g, 4).unwrap();
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k1,k2,lambda_1,lambda_2");
        assert_eq!(lines.len(), 1 + 16);
        // Row at k = (0, 0) carries the closed-form values 3 ∓ sqrt(9 + q²).
        let row0 = t
            .rows
            .iter()
            .find(|(k, _)| k.iter().all(|&x| x.abs() < 1e-12))
            .expect("origin is a grid point for even n");
        approx(row0.1[0], 3.0 - 9.25f64.sqrt(), 1e-12);
        approx(row0.1[1], 3.0 + 9.25f64.sqrt(), 1e-12);
        // 17 significant digits round-trip every f64 bit-exactly.
        for (line, (k, lambdas)) in lines[1..].iter().zip(&t.rows) {
            let parsed: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
            let want: Vec<f64> = k.iter().chain(lambdas.iter()).copied().collect();
            assert_eq!(parsed, want);
        }
    }

    #[test]
    fn quasimomentum_canonicalization() {
        let k = QuasiMomentum::new(vec![3.0 * PI, -PI]);
        approx(k.components()[0], PI, 1e-12);
        approx(k.components()[1], PI, 1e-12);
        let n = k.negated();
        approx(n.components()[0], PI, 1e-12);
        // π and −π are the same torus point.
        approx(k.torus_distance(&n), 0.0, 1e-12);
        let far = QuasiMomentum::new(vec![0.0, 0.0]);
        approx(k.torus_distance(&far), PI * 2.0f64.sqrt(), 1e-12);
    }

    #[test]
    fn line2_limit_matches_hex_limit_bands() {
        // Same graph up to a global orientation flip; identical band
        // functions pointwise.
        let a = builtin("line2-limit", 0.5).unwrap();
        let b = builtin("hex-limit", 0.5).unwrap();
        for k in [[0.3, -0.9], [2.1, 1.7], [-1.2, 0.4]] {
            let fa = band_functions(&a, &k).unwrap();
            let fb = band_functions(&b, &k).unwrap();
            for (x, y) in fa.iter().zip(&fb) {
                approx(*x, *y, 1e-12);
            }
        }
    }

    #[test]
    fn evenness_reduction_keeps_one_representative() {
        let pts = vec![
            vec![2.0 * PI / 3.0, 2.0 * PI / 3.0],
            vec![-2.0 * PI / 3.0, -2.0 * PI / 3.0],
        ];
        let reps = evenness_reduce(&pts);
        assert_eq!(reps.len(), 1);
        approx(reps[0][0], 2.0 * PI / 3.0, 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Band functions are even: λ_j(−k) = λ_j(k).
        #[test]
        fn band_functions_are_even(kx in -PI..PI, ky in -PI..PI, q in 0.1f64..2.0) {
            let g = builtin("hex-limit", q).unwrap();
            let a = band_functions(&g, &[kx, ky]).unwrap();
            let b = band_functions(&g, &[-kx, -ky]).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-10);
            }
        }

        /// trace H(k) = Σ_v (κ_v + Q_v) − 2 Σ_loops cos⟨τ, k⟩.
        #[test]
        fn trace_identity_on_lattice(kx in -PI..PI, ky in -PI..PI, t1 in -4i64..5, t2 in -4i64..5) {
            let g = builtin("lattice:2", 0.0).unwrap();
            let gt = g.perturb(&PerturbationSpec {
                v1: "v".into(), v2: "v".into(), index: vec![t1, t2],
            }).unwrap();
            let k = [kx, ky];
            let h = assemble_fiber(&gt, &k).unwrap();
            let loops: f64 = gt
                .edges()
                .iter()
                .map(|e| {
                    let phase: f64 = e.index.iter().zip(&k).map(|(&t, &ks)| t as f64 * ks).sum();
                    2.0 * phase.cos()
                })
                .sum();
            let want = 6.0 - loops;
            prop_assert!((h.trace() - want).abs() <= 1e-12 * h.frobenius_norm().max(1.0));
        }
    }
}
