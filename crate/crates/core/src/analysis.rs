//! Perturbation analysis: restriction identity, level sets, the
//! isospectrality criterion and band-edge asymptotics.
//!
//! A perturbed graph `G_t` (one added edge of index `t`) and its limit graph
//! `G̃` share the fundamental graph, and their fiber operators satisfy the
//! restriction identity `H_{G_t}(k) = H_{G̃}(k, ⟨t, k⟩)`. The band edges of
//! `G_t` therefore optimize the limit band functions over the hyperplane
//! family `⟨t, k′⟩ − k″ ∈ 2πZ`:
//!
//! * an edge of `G_t` *equals* the limit edge exactly when some level-set
//!   point of the limit edge lies on one of the hyperplanes
//!   ([`check_edge_coincidence`]);
//! * otherwise, for a non-degenerate single-band extremum `k_o` with Hessian
//!   `H = ∓Hess λ̃_j(k_o)`, the edge deviates by
//!   `2π² α²(ρ_t(k_o)) / ⟨t̂, H⁻¹ t̂⟩ + O(|t|⁻³)` where `t̂ = (t, −1)`,
//!   `ρ_t(k) = (⟨t, k′⟩ − k″)/2π`, and `α(x)` is the signed distance from
//!   `x` to the nearest integer ([`predict_edge`]). The error order improves
//!   to `|t|⁻⁴` when every component of `k_o` is 0 or π.

use std::io::Write;

use rayon::prelude::*;

use crate::bands::{
    assemble_fiber, band_functions, canonical_angle, edge_search, make_sweep, EdgeKind, GridSpec,
    QuasiMomentum,
};
use crate::graph::FundamentalGraph;
use crate::hermitian::HermitianMatrix;
use crate::optim::{fd_hessian, solve_linear};
use crate::{fmt_g17, Error, Result};

/// Mod-2π residual below which a level-set point counts as a witness.
pub const COINCIDENCE_TOL: f64 = 1e-6;
/// Band edges closer than this count as numerically equal.
pub const EDGE_EQUALITY_TOL: f64 = 1e-7;
/// Minimal eigenvalue gap for the single-band check (Assumption A1).
pub const GAP_TOL: f64 = 1e-6;
/// More refined extremizers than this flag a degenerate level set.
pub const DEGENERATE_THRESHOLD: usize = 12;
/// Default finite-difference step for Hessians.
pub const HESSIAN_STEP: f64 = 1e-3;
/// Residuals below this are left out of log–log slope fits (they sit at the
/// band-edge solver's noise floor, e.g. exactly isospectral members of a
/// t-sequence).
const SLOPE_FLOOR: f64 = 1e-9;

/// The hyperplane-offset functional `ρ_t(k) = (t_1 k_1 + … + t_d k_d − k_{d+1}) / 2π`.
pub fn rho_t(k: &[f64], t: &[i64]) -> Result<f64> {
    if k.len() != t.len() + 1 {
        return Err(Error::DimensionMismatch {
            expected: t.len() + 1,
            got: k.len(),
        });
    }
    let dot: f64 = t.iter().zip(k).map(|(&ti, &ki)| ti as f64 * ki).sum();
    Ok((dot - k[t.len()]) / std::f64::consts::TAU)
}

/// Signed distance from `x` to its nearest integer, valued in `(−1/2, 1/2]`.
///
/// The tie at half-integers is resolved upward: `n(x) = ⌈x − 1/2⌉`.
///
/// ```
/// use bandgraph::analysis::alpha;
/// assert_eq!(alpha(2.0).unwrap(), 0.0);
/// assert_eq!(alpha(3.5).unwrap(), 0.5);
/// assert!((alpha(2.0 - 1.0 / 3.0).unwrap() + 1.0 / 3.0).abs() < 1e-15);
/// ```
pub fn alpha(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite("alpha argument"));
    }
    Ok(x - (x - 0.5).ceil())
}

/// Max-norm deviation `‖H_{G_t}(k) − H_{G̃}(k, ⟨t, k⟩)‖_max` of the
/// restriction identity. Analytically zero; numerically ≤ 1e−12.
pub fn restriction_check(
    g_t: &FundamentalGraph,
    g_limit: &FundamentalGraph,
    t: &[i64],
    k: &[f64],
) -> Result<f64> {
    let d = g_t.dimension();
    if t.len() != d || g_limit.dimension() != d + 1 {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: t.len(),
        });
    }
    if !g_t.same_vertices(g_limit) {
        return Err(Error::VertexSetMismatch);
    }
    let h_t = assemble_fiber(g_t, k)?;
    let mut lifted: Vec<f64> = k.to_vec();
    lifted.push(t.iter().zip(k).map(|(&ti, &ki)| ti as f64 * ki).sum());
    let h_lim = assemble_fiber(g_limit, &lifted)?;
    let dev = h_t
        .entries()
        .iter()
        .zip(h_lim.entries())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok(dev)
}

/// The set of quasimomenta attaining one band edge of the limit graph.
#[derive(Debug, Clone)]
pub struct LevelSet {
    /// 1-based band index.
    pub band: usize,
    pub kind: EdgeKind,
    /// The band edge value attained on the set.
    pub value: f64,
    /// Sampled points up to evenness, canonical and sorted.
    pub points: Vec<QuasiMomentum>,
    /// Set when the extremum is attained on an extended set (more refined
    /// extremizers than [`DEGENERATE_THRESHOLD`], or a flat band).
    pub degenerate: bool,
}

/// Locates the level set `K_j^±` of a band edge.
pub fn find_level_set(
    g: &FundamentalGraph,
    j: usize,
    kind: EdgeKind,
    spec: &GridSpec,
) -> Result<LevelSet> {
    let sweep = make_sweep(g, spec)?;
    level_set_with(g, &sweep, j, kind, spec)
}

fn level_set_with(
    g: &FundamentalGraph,
    sweep: &crate::bands::Sweep,
    j: usize,
    kind: EdgeKind,
    spec: &GridSpec,
) -> Result<LevelSet> {
    let search = edge_search(g, sweep, j, kind, spec)?;
    let degenerate = search.refined_count > DEGENERATE_THRESHOLD || search.flat;
    let points = crate::bands::evenness_reduce(&search.points)
        .into_iter()
        .map(QuasiMomentum::new)
        .collect();
    Ok(LevelSet {
        band: j,
        kind,
        value: search.value,
        points,
        degenerate,
    })
}

/// Outcome of the exact-isospectrality test for one band edge.
#[derive(Debug, Clone)]
pub struct CoincidenceCheck {
    pub coincides: bool,
    /// The level-set point with the smallest mod-2π residual.
    pub witness: Option<QuasiMomentum>,
    /// `dist(⟨t, k′⟩ − k″, 2πZ)` at the witness.
    pub residual: f64,
}

/// Tests whether some level-set point satisfies
/// `t_1 k_1 + … + t_d k_d ≡ k_{d+1} (mod 2π)` within `tol`.
///
/// A level set containing the origin always passes.
pub fn check_edge_coincidence(
    level_set: &LevelSet,
    t: &[i64],
    tol: f64,
) -> Result<CoincidenceCheck> {
    let mut best: Option<(f64, &QuasiMomentum)> = None;
    for p in &level_set.points {
        let rho = rho_t(p.components(), t)?;
        let residual = std::f64::consts::TAU * alpha(rho)?.abs();
        if best.is_none_or(|(r, _)| residual < r) {
            best = Some((residual, p));
        }
    }
    match best {
        Some((residual, point)) => Ok(CoincidenceCheck {
            coincides: residual <= tol,
            witness: Some(point.clone()),
            residual,
        }),
        None => Ok(CoincidenceCheck {
            coincides: false,
            witness: None,
            residual: f64::INFINITY,
        }),
    }
}

/// Comparison of one band edge between the perturbed graph and its limit.
#[derive(Debug, Clone)]
pub struct EdgeComparison {
    pub band: usize,
    pub kind: EdgeKind,
    pub limit_edge: f64,
    pub direct_edge: f64,
    /// `|direct − limit|`.
    pub deviation: f64,
    pub check: CoincidenceCheck,
    pub level_set_degenerate: bool,
    /// Criterion verdict for this edge: a witness was found, or the edges
    /// agree numerically.
    pub coincident: bool,
}

/// Per-band comparison plus the overall verdict.
#[derive(Debug, Clone)]
pub struct IsospectralityReport {
    pub edges: Vec<EdgeComparison>,
    pub isospectral: bool,
}

/// Runs the isospectrality criterion for every band edge: locates the limit
/// level sets, tests the coincidence condition against `t`, and compares the
/// limit edges with directly computed edges of the perturbed graph.
pub fn check_isospectral(
    g_t: &FundamentalGraph,
    g_limit: &FundamentalGraph,
    t: &[i64],
    spec: &GridSpec,
) -> Result<IsospectralityReport> {
    let d = g_t.dimension();
    if t.len() != d || g_limit.dimension() != d + 1 {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: t.len(),
        });
    }
    if !g_t.same_vertices(g_limit) {
        return Err(Error::VertexSetMismatch);
    }
    let limit_sweep = make_sweep(g_limit, spec)?;
    let direct_sweep = make_sweep(g_t, spec)?;
    let mut edges = Vec::new();
    for j in 1..=g_t.vertex_count() {
        for kind in [EdgeKind::Min, EdgeKind::Max] {
            let ls = level_set_with(g_limit, &limit_sweep, j, kind, spec)?;
            let direct = edge_search(g_t, &direct_sweep, j, kind, spec)?;
            let check = check_edge_coincidence(&ls, t, COINCIDENCE_TOL)?;
            let deviation = (direct.value - ls.value).abs();
            let coincident = check.coincides || deviation <= EDGE_EQUALITY_TOL;
            edges.push(EdgeComparison {
                band: j,
                kind,
                limit_edge: ls.value,
                direct_edge: direct.value,
                deviation,
                check,
                level_set_degenerate: ls.degenerate,
                coincident,
            });
        }
    }
    let isospectral = edges.iter().all(|e| e.coincident);
    Ok(IsospectralityReport { edges, isospectral })
}

/// A band-edge extremum of the limit graph with its diagnostics.
#[derive(Debug, Clone)]
pub struct ExtremumReport {
    pub k_o: QuasiMomentum,
    /// Band value at the extremum.
    pub value: f64,
    pub kind: EdgeKind,
    /// Finite-difference Hessian of the band function at `k_o`.
    pub hessian: Vec<Vec<f64>>,
    /// Non-degeneracy: `Hess` (for minima) or `−Hess` (maxima) is positive
    /// definite.
    pub isolated: bool,
    /// Assumption A1: the extremum is attained by this band alone.
    pub single_band: bool,
    /// Assumption A2 failure: the extremum sits on an extended level set.
    pub degenerate_set: bool,
}

/// Computes the finite-difference Hessian of band `j` at `k_o` and runs the
/// Assumption A diagnostics. `degenerate_set` is taken from the caller's
/// level-set analysis (see [`extremum_reports`]).
pub fn hessian_at(
    g: &FundamentalGraph,
    j: usize,
    k_o: &QuasiMomentum,
    kind: EdgeKind,
    step: f64,
    degenerate_set: bool,
) -> Result<ExtremumReport> {
    let nu = g.vertex_count();
    if j == 0 || j > nu {
        return Err(Error::BandIndex { j, nu });
    }
    if k_o.dimension() != g.dimension() {
        return Err(Error::DimensionMismatch {
            expected: g.dimension(),
            got: k_o.dimension(),
        });
    }
    if step.is_nan() || step <= 0.0 {
        return Err(Error::InvalidParameter(
            "Hessian step must be positive".into(),
        ));
    }
    let here = band_functions(g, k_o.components())?;
    let value = here[j - 1];
    let mut gap = f64::INFINITY;
    if j >= 2 {
        gap = gap.min((here[j - 1] - here[j - 2]).abs());
    }
    if j < nu {
        gap = gap.min((here[j] - here[j - 1]).abs());
    }
    let single_band = gap > GAP_TOL;

    let f = |k: &[f64]| band_functions(g, k).expect("fiber assembly on validated input")[j - 1];
    let hessian = fd_hessian(f, k_o.components(), step);

    let n = hessian.len();
    let sign = match kind {
        EdgeKind::Min => 1.0,
        EdgeKind::Max => -1.0,
    };
    let mut flat_data = Vec::with_capacity(n * n);
    for row in &hessian {
        for &x in row {
            flat_data.push(num_complex::Complex64::new(sign * x, 0.0));
        }
    }
    let eigs = HermitianMatrix::new(n, flat_data)?.eigenvalues()?;
    let scale = eigs.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let isolated = scale > 0.0 && eigs.iter().all(|&e| e > 1e-8 * scale);

    Ok(ExtremumReport {
        k_o: k_o.clone(),
        value,
        kind,
        hessian,
        isolated,
        single_band,
        degenerate_set,
    })
}

/// Builds an [`ExtremumReport`] for every point of a level set, propagating
/// its degeneracy flag.
pub fn extremum_reports(
    g: &FundamentalGraph,
    level_set: &LevelSet,
    step: f64,
) -> Result<Vec<ExtremumReport>> {
    level_set
        .points
        .iter()
        .map(|p| {
            hessian_at(
                g,
                level_set.band,
                p,
                level_set.kind,
                step,
                level_set.degenerate,
            )
        })
        .collect()
}

/// Predicted perturbed band edge for one value of `t`.
#[derive(Debug, Clone)]
pub struct AsymptoticPrediction {
    pub t: Vec<i64>,
    /// `λ̃_j^± ∓ 2π²α²/⟨t̂, H⁻¹t̂⟩`.
    pub predicted: f64,
    /// Signed leading correction (`predicted − limit edge`).
    pub correction: f64,
    pub alpha: f64,
    pub rho: f64,
    /// `(t_1, …, t_d, −1)`.
    pub t_hat: Vec<f64>,
    /// 3, or 4 when every component of `k_o` is 0 or π.
    pub error_order: u8,
}

/// Evaluates the band-edge asymptotics at one extremum.
///
/// Refuses (naming the failed condition) unless the extremum passed every
/// Assumption A check.
pub fn predict_edge(extremum: &ExtremumReport, t: &[i64]) -> Result<AsymptoticPrediction> {
    if !extremum.single_band {
        return Err(Error::AssumptionViolated(
            "A1",
            "band edge is not attained by a single band function (eigenvalue gap below tolerance)"
                .into(),
        ));
    }
    if !extremum.isolated {
        return Err(Error::AssumptionViolated(
            "A1",
            "extremum is degenerate (Hessian not definite)".into(),
        ));
    }
    if extremum.degenerate_set {
        return Err(Error::AssumptionViolated(
            "A2",
            "band edge is attained on an extended level set, not a single extremum".into(),
        ));
    }
    let d1 = extremum.k_o.dimension();
    if t.len() + 1 != d1 {
        return Err(Error::DimensionMismatch {
            expected: d1 - 1,
            got: t.len(),
        });
    }
    let sign = match extremum.kind {
        EdgeKind::Min => 1.0,
        EdgeKind::Max => -1.0,
    };
    // H = ∓Hess is positive definite under the checks above.
    let h: Vec<Vec<f64>> = extremum
        .hessian
        .iter()
        .map(|row| row.iter().map(|&x| sign * x).collect())
        .collect();
    let mut t_hat: Vec<f64> = t.iter().map(|&ti| ti as f64).collect();
    t_hat.push(-1.0);
    let y = solve_linear(h, t_hat.clone()).ok_or(Error::SingularHessian)?;
    let denom: f64 = t_hat.iter().zip(&y).map(|(a, b)| a * b).sum();
    if denom.is_nan() || denom <= 0.0 {
        return Err(Error::SingularHessian);
    }
    let rho = rho_t(extremum.k_o.components(), t)?;
    let a = alpha(rho)?;
    // λ_j^±(t) = λ̃_j^± ∓ 2π²α²/⟨t̂, H⁻¹t̂⟩: maxima shrink, minima rise.
    let magnitude = 2.0 * std::f64::consts::PI.powi(2) * a * a / denom;
    let correction = sign * magnitude;
    let on_half_lattice = extremum.k_o.components().iter().all(|&x| {
        canonical_angle(x).abs() <= 1e-6 || canonical_angle(x - std::f64::consts::PI).abs() <= 1e-6
    });
    Ok(AsymptoticPrediction {
        t: t.to_vec(),
        predicted: extremum.value + correction,
        correction,
        alpha: a,
        rho,
        t_hat,
        error_order: if on_half_lattice { 4 } else { 3 },
    })
}

/// Asymptotics over finitely many isolated extrema: the minimum (for lower
/// edges) or maximum (upper edges) of the per-extremum predictions.
pub fn predict_edge_multi(extrema: &[ExtremumReport], t: &[i64]) -> Result<AsymptoticPrediction> {
    if extrema.is_empty() {
        return Err(Error::EmptyInput("extremum list"));
    }
    let kind = extrema[0].kind;
    let mut best: Option<AsymptoticPrediction> = None;
    for ex in extrema {
        let p = predict_edge(ex, t)?;
        let better = match &best {
            None => true,
            Some(b) => match kind {
                EdgeKind::Min => p.predicted < b.predicted,
                EdgeKind::Max => p.predicted > b.predicted,
            },
        };
        if better {
            best = Some(p);
        }
    }
    Ok(best.expect("nonempty extremum list"))
}

/// One row of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub t: Vec<i64>,
    pub t_norm: f64,
    pub direct: f64,
    pub predicted: f64,
    pub residual: f64,
}

/// Direct-vs-predicted band edges along a sequence of `t`.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub band: usize,
    pub kind: EdgeKind,
    /// The limit band edge the sequence converges to.
    pub limit_edge: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Log–log slope of residual against |t|, fitted over rows with residual
    /// above the noise floor. `None` with fewer than two such rows.
    pub slope: Option<f64>,
}

/// Runs the asymptotics along a `t`-sequence: for each `t`, the direct band
/// edge of `perturb(g, (v1, v2, t))` is compared against the Hessian
/// prediction from the (t-independent) limit graph.
pub fn convergence_study(
    g: &FundamentalGraph,
    v1: &str,
    v2: &str,
    j: usize,
    kind: EdgeKind,
    ts: &[Vec<i64>],
    spec: &GridSpec,
) -> Result<ConvergenceStudy> {
    if ts.is_empty() {
        return Err(Error::EmptyInput("t sequence"));
    }
    let d = g.dimension();
    for t in ts {
        if t.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: t.len(),
            });
        }
    }
    // The limit graph does not depend on t; build it from the first entry.
    let added = g.edges().len();
    let g_limit = g
        .perturb(&crate::graph::PerturbationSpec {
            v1: v1.to_string(),
            v2: v2.to_string(),
            index: ts[0].clone(),
        })?
        .lift_to_limit(added)?;
    let level_set = find_level_set(&g_limit, j, kind, &GridSpec::default_for(d + 1))?;
    let reports = extremum_reports(&g_limit, &level_set, HESSIAN_STEP)?;

    let rows: Vec<ConvergenceRow> = ts
        .par_iter()
        .map(|t| -> Result<ConvergenceRow> {
            let g_t = g.perturb(&crate::graph::PerturbationSpec {
                v1: v1.to_string(),
                v2: v2.to_string(),
                index: t.clone(),
            })?;
            let sweep = make_sweep(&g_t, spec)?;
            let direct = edge_search(&g_t, &sweep, j, kind, spec)?.value;
            let predicted = predict_edge_multi(&reports, t)?.predicted;
            let t_norm = t.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
            Ok(ConvergenceRow {
                t: t.clone(),
                t_norm,
                direct,
                predicted,
                residual: (direct - predicted).abs(),
            })
        })
        .collect::<Result<_>>()?;

    let fit: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.residual > SLOPE_FLOOR)
        .map(|r| (r.t_norm.ln(), r.residual.ln()))
        .collect();
    let slope = if fit.len() >= 2 {
        let n = fit.len() as f64;
        let sx: f64 = fit.iter().map(|p| p.0).sum();
        let sy: f64 = fit.iter().map(|p| p.1).sum();
        let sxx: f64 = fit.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = fit.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        if denom.abs() > 1e-12 {
            Some((n * sxy - sx * sy) / denom)
        } else {
            None
        }
    } else {
        None
    };

    Ok(ConvergenceStudy {
        band: j,
        kind,
        limit_edge: level_set.value,
        rows,
        slope,
    })
}

impl ConvergenceStudy {
    /// CSV with header `t_norm,direct,predicted,residual`, 17 significant
    /// digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_norm,direct,predicted,residual")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_g17(r.t_norm),
                fmt_g17(r.direct),
                fmt_g17(r.predicted),
                fmt_g17(r.residual)
            )?;
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

    fn perturbed(
        name: &str,
        q: f64,
        v1: &str,
        v2: &str,
        t: &[i64],
    ) -> (FundamentalGraph, FundamentalGraph) {
        let g = builtin(name, q).unwrap();
        let added = g.edges().len();
        let g_t = g
            .perturb(&PerturbationSpec {
                v1: v1.into(),
                v2: v2.into(),
                index: t.to_vec(),
            })
            .unwrap();
        let g_lim = g_t.lift_to_limit(added).unwrap();
        (g_t, g_lim)
    }

    #[test]
    fn rho_examples() {
        // d = 1, t = 7 at (2π/3, 2π/3): (7·2π/3 − 2π/3)/2π = 2.
        approx(
            rho_t(&[2.0 * PI / 3.0, 2.0 * PI / 3.0], &[7]).unwrap(),
            2.0,
            1e-13,
        );
        approx(rho_t(&[0.0, 0.0, 0.0], &[5, -3]).unwrap(), 0.0, 1e-15);
        // k = π·1: (Σt_i − 1)/2.
        approx(rho_t(&[PI, PI, PI], &[4, 2]).unwrap(), 2.5, 1e-13);
        assert!(rho_t(&[0.0, 0.0], &[1, 2]).is_err());
    }

    #[test]
    fn alpha_examples() {
        approx(alpha(2.0 - 1.0 / 3.0).unwrap(), -1.0 / 3.0, 1e-14);
        approx(alpha(3.5).unwrap(), 0.5, 1e-14);
        approx(alpha(2.0).unwrap(), 0.0, 1e-14);
        approx(alpha(-0.5).unwrap(), 0.5, 1e-14);
        assert!(alpha(f64::INFINITY).is_err());
    }

    #[test]
    fn restriction_identity_on_perturbed_square_lattice() {
        let (g_t, g_lim) = perturbed("lattice:2", 0.0, "v", "v", &[3, 1]);
        for k in [[0.3, -0.7], [1.9, 2.4], [-3.0, 0.1]] {
            let dev = restriction_check(&g_t, &g_lim, &[3, 1], &k).unwrap();
            assert!(dev <= 1e-12, "deviation {dev}");
            // Both sides equal the scalar 6 − 2cos k1 − 2cos k2 − 2cos(3k1 + k2).
            let h = assemble_fiber(&g_t, &k).unwrap();
            let want = 6.0 - 2.0 * k[0].cos() - 2.0 * k[1].cos() - 2.0 * (3.0 * k[0] + k[1]).cos();
            approx(h.get(0, 0).re, want, 1e-12);
        }
    }

    #[test]
    fn restriction_rejects_mismatched_pair() {
        let (g_t, _) = perturbed("lattice:2", 0.0, "v", "v", &[3, 1]);
        let other = builtin("hex-limit", 0.5).unwrap();
        assert!(restriction_check(&g_t, &other, &[3, 1], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn hex_limit_level_sets() {
        let g = builtin("hex-limit", 0.5).unwrap();
        let spec = GridSpec::default_for(2);
        let lo = find_level_set(&g, 1, EdgeKind::Min, &spec).unwrap();
        assert!(!lo.degenerate);
        assert_eq!(lo.points.len(), 1);
        for x in lo.points[0].components() {
            approx(*x, 0.0, 1e-6);
        }
        let hi = find_level_set(&g, 1, EdgeKind::Max, &spec).unwrap();
        assert!(!hi.degenerate);
        assert_eq!(hi.points.len(), 1);
        for x in hi.points[0].components() {
            approx(*x, 2.0 * PI / 3.0, 1e-6);
        }
        approx(hi.value, 2.5, 1e-9);
    }

    #[test]
    fn perturbed_hex_limit_has_degenerate_upper_set() {
        let (_, g_lim) = perturbed("hexagonal", 0.5, "v1", "v2", &[3, 1]);
        let ls = find_level_set(&g_lim, 1, EdgeKind::Max, &GridSpec::default_for(3)).unwrap();
        assert!(ls.degenerate);
        approx(ls.value, 3.5, 1e-8);
        // Every sampled point satisfies 1 + e^{ik1} + e^{ik2} + e^{ik3} = 0.
        for p in &ls.points {
            let k = p.components();
            let s_re = 1.0 + k[0].cos() + k[1].cos() + k[2].cos();
            let s_im = k[0].sin() + k[1].sin() + k[2].sin();
            assert!(s_re.hypot(s_im) < 1e-3, "off-curve point {k:?}");
        }
    }

    #[test]
    fn coincidence_for_hex_limit() {
        let g = builtin("hex-limit", 0.5).unwrap();
        let ls = find_level_set(&g, 1, EdgeKind::Max, &GridSpec::default_for(2)).unwrap();
        // t − 1 ∈ 3Z: witness at ±(2π/3, 2π/3).
        let yes = check_edge_coincidence(&ls, &[7], COINCIDENCE_TOL).unwrap();
        assert!(yes.coincides);
        assert!(yes.residual <= 1e-6);
        let no = check_edge_coincidence(&ls, &[6], COINCIDENCE_TOL).unwrap();
        assert!(!no.coincides);

        // A level set containing the origin always coincides.
        let lo = find_level_set(&g, 1, EdgeKind::Min, &GridSpec::default_for(2)).unwrap();
        for t in [3i64, 6, 7, 11] {
            assert!(
                check_edge_coincidence(&lo, &[t], COINCIDENCE_TOL)
                    .unwrap()
                    .coincides
            );
        }
    }

    #[test]
    fn isospectral_verdicts_for_perturbed_line() {
        let spec = GridSpec::default_for(1);
        let (g_t, g_lim) = perturbed("line2", 0.5, "v0", "v1", &[7]);
        let report = check_isospectral(&g_t, &g_lim, &[7], &spec).unwrap();
        assert!(report.isospectral);
        for e in &report.edges {
            assert!(
                e.deviation <= 1e-7,
                "band {} {}: {}",
                e.band,
                e.kind,
                e.deviation
            );
        }

        let (g_t, g_lim) = perturbed("line2", 0.5, "v0", "v1", &[6]);
        let report = check_isospectral(&g_t, &g_lim, &[6], &spec).unwrap();
        assert!(!report.isospectral);
        // The inner edges (band 1 max, band 2 min) are strictly inside.
        let inner: Vec<_> = report
            .edges
            .iter()
            .filter(|e| {
                (e.band == 1 && e.kind == EdgeKind::Max) || (e.band == 2 && e.kind == EdgeKind::Min)
            })
            .collect();
        for e in inner {
            assert!(!e.coincident);
            assert!(e.deviation > 1e-3);
        }
        // The outer edges still coincide (0 lies in those level sets).
        for e in &report.edges {
            if (e.band == 1 && e.kind == EdgeKind::Min) || (e.band == 2 && e.kind == EdgeKind::Max)
            {
                assert!(e.coincident);
            }
        }
    }

    #[test]
    fn hessians_of_lattice_limit() {
        // Limit of the perturbed d-lattice is the (d+1)-lattice.
        let (_, g_lim) = perturbed("lattice:2", 0.0, "v", "v", &[1, 2]);
        let k_max = QuasiMomentum::new(vec![PI, PI, PI]);
        let report = hessian_at(&g_lim, 1, &k_max, EdgeKind::Max, HESSIAN_STEP, false).unwrap();
        assert!(report.isolated);
        assert!(report.single_band);
        approx(report.value, 12.0, 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { -2.0 } else { 0.0 };
                approx(report.hessian[i][j], want, 1e-5);
            }
        }
        let k_min = QuasiMomentum::new(vec![0.0, 0.0, 0.0]);
        let report = hessian_at(&g_lim, 1, &k_min, EdgeKind::Min, HESSIAN_STEP, false).unwrap();
        assert!(report.isolated);
        for i in 0..3 {
            approx(report.hessian[i][i], 2.0, 1e-5);
        }
    }

    #[test]
    fn hex_limit_hessian_matches_closed_form() {
        let q = 0.5;
        let g = builtin("hex-limit", q).unwrap();
        let k_o = QuasiMomentum::new(vec![2.0 * PI / 3.0, 2.0 * PI / 3.0]);
        let report = hessian_at(&g, 1, &k_o, EdgeKind::Max, HESSIAN_STEP, false).unwrap();
        assert!(report.isolated && report.single_band);
        // −Hess = (1/2q)·[[2,1],[1,2]] = [[2,1],[1,2]] at q = 1/2.
        approx(-report.hessian[0][0], 2.0, 1e-4);
        approx(-report.hessian[0][1], 1.0, 1e-4);
        approx(-report.hessian[1][1], 2.0, 1e-4);
    }

    #[test]
    fn prediction_formula_hex_limit() {
        let q = 0.5;
        let g = builtin("hex-limit", q).unwrap();
        let ls = find_level_set(&g, 1, EdgeKind::Max, &GridSpec::default_for(2)).unwrap();
        let reports = extremum_reports(&g, &ls, HESSIAN_STEP).unwrap();
        for t in [5i64, 6, 20] {
            let p = predict_edge_multi(&reports, &[t]).unwrap();
            let denom = 4.0 * q / 3.0 * (t * t + t + 1) as f64;
            let a: f64 = match t % 3 {
                0 => -1.0 / 3.0,
                2 => 1.0 / 3.0,
                _ => 0.0,
            };
            let want = 3.0 - q - 2.0 * PI * PI * a * a / denom;
            approx(p.predicted, want, 1e-6);
            assert_eq!(p.error_order, 3);
        }
        // t ≡ 1 (mod 3): zero correction, prediction equals the limit edge.
        let p = predict_edge_multi(&reports, &[7]).unwrap();
        approx(p.correction, 0.0, 1e-9);
        approx(p.predicted, 3.0 - q, 1e-7);
    }

    #[test]
    fn prediction_formula_lattice_limit() {
        let (_, g_lim) = perturbed("lattice:2", 0.0, "v", "v", &[6, 8]);
        let ls = find_level_set(&g_lim, 1, EdgeKind::Max, &GridSpec::default_for(3)).unwrap();
        let reports = extremum_reports(&g_lim, &ls, HESSIAN_STEP).unwrap();
        let p = predict_edge_multi(&reports, &[6, 8]).unwrap();
        // Even component sum puts ρ exactly on the half-integer jump of α;
        // the numerically located k_o falls on either side, and only α²
        // enters the correction.
        approx(p.alpha.abs(), 0.5, 1e-9);
        approx(p.predicted, 12.0 - PI * PI / 101.0, 1e-6);
        assert_eq!(p.error_order, 4);
    }

    #[test]
    fn symmetric_extrema_agree() {
        let g = builtin("hex-limit", 0.5).unwrap();
        let k = QuasiMomentum::new(vec![2.0 * PI / 3.0, 2.0 * PI / 3.0]);
        let a = hessian_at(&g, 1, &k, EdgeKind::Max, HESSIAN_STEP, false).unwrap();
        let b = hessian_at(&g, 1, &k.negated(), EdgeKind::Max, HESSIAN_STEP, false).unwrap();
        for t in [4i64, 9] {
            let pa = predict_edge(&a, &[t]).unwrap();
            let pb = predict_edge(&b, &[t]).unwrap();
            approx(pa.predicted, pb.predicted, 1e-9);
            let multi = predict_edge_multi(&[a.clone(), b.clone()], &[t]).unwrap();
            approx(multi.predicted, pa.predicted, 1e-12);
        }
    }

    #[test]
    fn refusals() {
        // Degenerate level set (Assumption A2).
        let (_, g_lim) = perturbed("hexagonal", 0.5, "v1", "v2", &[3, 1]);
        let ls = find_level_set(&g_lim, 1, EdgeKind::Max, &GridSpec::default_for(3)).unwrap();
        let reports = extremum_reports(&g_lim, &ls, HESSIAN_STEP).unwrap();
        let err = predict_edge_multi(&reports, &[3, 1]).unwrap_err();
        assert!(matches!(err, Error::AssumptionViolated("A2", _)));

        // Empty extremum list.
        assert!(matches!(
            predict_edge_multi(&[], &[1]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn convergence_study_lattice1_t2() {
        let g = builtin("lattice:1", 0.0).unwrap();
        let st = convergence_study(
            &g,
            "v",
            "v",
            1,
            EdgeKind::Max,
            &[vec![2]],
            &GridSpec::default_for(1),
        )
        .unwrap();
        // Stationary-point oracle: max of 4 − 2cos k − 2cos 2k is 25/4.
        approx(st.rows[0].direct, 25.0 / 4.0, 1e-9);
        approx(st.limit_edge, 8.0, 1e-9);
    }

    #[test]
    fn convergence_csv_format() {
        let g = builtin("lattice:1", 0.0).unwrap();
        let st = convergence_study(
            &g,
            "v",
            "v",
            1,
            EdgeKind::Max,
            &[vec![2], vec![3]],
            &GridSpec::default_for(1),
        )
        .unwrap();
        let mut out = Vec::new();
        st.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("t_norm,direct,predicted,residual\n"));
        assert_eq!(text.lines().count(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Distance from k_o to the nearest hyperplane ⟨t, k′⟩ − k″ = 2πn
        /// equals 2π|α(ρ_t(k_o))| / sqrt(|t|² + 1).
        #[test]
        fn hyperplane_distance_formula(
            k1 in -PI..PI, k2 in -PI..PI,
            t1 in -9i64..10, t2 in -9i64..10,
        ) {
            let k = [k1, k2, 0.37];
            let t = [t1, t2];
            let rho = rho_t(&k, &t).unwrap();
            let norm = ((t1 * t1 + t2 * t2 + 1) as f64).sqrt();
            let want = std::f64::consts::TAU * alpha(rho).unwrap().abs() / norm;
            // Brute force over hyperplane offsets.
            let raw = t1 as f64 * k[0] + t2 as f64 * k[1] - k[2];
            let direct = (-64..=64)
                .map(|n| (raw - std::f64::consts::TAU * n as f64).abs() / norm)
                .fold(f64::INFINITY, f64::min);
            prop_assert!((want - direct).abs() <= 1e-12);
        }

        /// α is idempotent as a reduction and lands in (−1/2, 1/2].
        #[test]
        fn alpha_range_and_periodicity(x in -50.0f64..50.0, n in -5i64..6) {
            let a = alpha(x).unwrap();
            prop_assert!(a > -0.5 && a <= 0.5);
            let b = alpha(x + n as f64).unwrap();
            prop_assert!((a - b).abs() <= 1e-9);
        }

        /// Restriction identity holds for random k on the perturbed line.
        #[test]
        fn restriction_identity_line(kx in -PI..PI, t in -12i64..13, q in 0.1f64..1.5) {
            let g = builtin("line2", q).unwrap();
            let g_t = g.perturb(&PerturbationSpec {
                v1: "v0".into(), v2: "v1".into(), index: vec![t],
            }).unwrap();
            let g_lim = g_t.lift_to_limit(2).unwrap();
            let dev = restriction_check(&g_t, &g_lim, &[t], &[kx]).unwrap();
            prop_assert!(dev <= 1e-12);
        }
    }
}
