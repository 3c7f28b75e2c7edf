//! Shared helpers for the integration suites.

#![allow(dead_code)]

use bandgraph::graph::FundamentalGraph;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn approx(a: f64, b: f64, tol: f64, what: &str) {
    assert!(
        (a - b).abs() <= tol,
        "{what}: {a} vs {b} (tol {tol}, diff {:.3e})",
        (a - b).abs()
    );
}

/// A random small fundamental graph: connected quotient by construction
/// (spanning tree first), random integer indices and potentials.
///
/// With `full_periodic_connectivity` set, one loop per axis with a standard
/// basis index is appended, which makes the periodic graph itself connected
/// (the index cycles generate Z^d); some spectral facts (first band never
/// flat, λ_1^- attained at k = 0) presume that.
pub fn random_graph(rng: &mut ChaCha8Rng, full_periodic_connectivity: bool) -> FundamentalGraph {
    let d = rng.gen_range(1..=3usize);
    let nu = rng.gen_range(1..=4usize);
    let vertices: Vec<(String, f64)> = (0..nu)
        .map(|i| (format!("w{i}"), rng.gen_range(-2.0..2.0)))
        .collect();
    let mut edges: Vec<(String, String, Vec<i64>)> = Vec::new();
    let rand_index =
        |rng: &mut ChaCha8Rng| -> Vec<i64> { (0..d).map(|_| rng.gen_range(-3..=3i64)).collect() };
    for i in 1..nu {
        let j = rng.gen_range(0..i);
        let idx = rand_index(rng);
        edges.push((format!("w{i}"), format!("w{j}"), idx));
    }
    let extra = rng.gen_range(0..=3usize);
    for _ in 0..extra {
        let a = rng.gen_range(0..nu);
        let b = rng.gen_range(0..nu);
        let idx = rand_index(rng);
        edges.push((format!("w{a}"), format!("w{b}"), idx));
    }
    if full_periodic_connectivity {
        let anchor = rng.gen_range(0..nu);
        for s in 0..d {
            let mut idx = vec![0i64; d];
            idx[s] = 1;
            edges.push((format!("w{anchor}"), format!("w{anchor}"), idx));
        }
    }
    FundamentalGraph::new(d, vertices, edges).expect("construction is connected by design")
}

/// Uniform quasimomentum in (−π, π]^d.
pub fn random_k(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect()
}
