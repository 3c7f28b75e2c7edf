//! Band spectra of discrete Schrödinger operators on periodic graphs.
//!
//! A periodic graph is described entirely by its *fundamental graph*: finitely
//! many vertices carrying real potentials, and unoriented edges carrying
//! integer index vectors that record which lattice translate each edge
//! crosses. For every quasimomentum `k` on the torus `(-π, π]^d` the operator
//! restricts to a ν×ν Hermitian *fiber* matrix `H(k)`; its sorted eigenvalues
//! swept over the torus produce the spectral bands.
//!
//! On top of the band machinery the crate implements a perturbation theory
//! for graphs with one added edge of index `t`:
//!
//! * [`graph::FundamentalGraph::perturb`] adds the edge, and
//!   [`graph::FundamentalGraph::lift_to_limit`] builds the `(d+1)`-dimensional
//!   limit graph whose fibers restrict to the perturbed ones along the
//!   hyperplane `k_{d+1} = ⟨t, k⟩`.
//! * [`analysis`] locates band-edge level sets of the limit graph, decides
//!   whether the perturbed graph is isospectral to it, and predicts the
//!   perturbed band edges from the extremum Hessian when it is not.
//!
//! The `bandgraph` binary exposes all of this as subcommands (`spectrum`,
//! `perturb`, `limit`, `dispersion`, `isospectral`, `asymptotics`).

pub mod analysis;
pub mod bands;
pub mod graph;
pub mod hermitian;
pub mod optim;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Formats a float with 17 significant digits, enough to round-trip an `f64`.
pub(crate) fn fmt_g17(x: f64) -> String {
    format!("{:.16e}", x)
}
