//! Linear optical response of `N` molecules strongly coupled to a single lossy
//! cavity mode.
//!
//! The first excitation manifold of the light-matter Hamiltonian has a block
//! tridiagonal structure: photon blocks (one cavity excitation, `n` molecules
//! carrying ground-state phonons) alternate with excited blocks (no photon,
//! one molecule electronically excited, `n` spectator phonons). Fast collective
//! couplings `V_n ~ λ√N` act within a block pair, slow single-molecule
//! couplings `v_n ~ λ` hop between pairs.
//!
//! The retarded photon Green's function `D(ω)` is computed by four mutually
//! cross-validating engines:
//!
//! * [`engines::dense_green`] — direct linear solve against the assembled
//!   chain matrix (the ground-truth oracle),
//! * [`engines::cf_full`] — the recursive matrix continued fraction,
//! * [`engines::cf_truncated`] — the same recursion cut at a finite depth,
//!   accurate to `O(N^-k)`,
//! * [`engines::d0`] / [`engines::d1`] / [`engines::d2_x2`] — closed-form
//!   terms of the `1/N` expansion at fixed collective coupling.
//!
//! [`spectra`] converts Green's-function samples into absorption,
//! transmission and reflection curves, locates peaks and computes polariton
//! mode frequencies. [`chi`] evaluates the irreducible nonlinear
//! susceptibilities whose series reconstructs the photon self-energy, and
//! [`diagrams`] enumerates and evaluates the chain walks of the Dyson series
//! order by order.

pub mod chi;
pub mod diagrams;
pub mod engines;
pub(crate) mod linalg;
pub mod model;
pub mod presets;
pub mod spectra;

pub use model::{CavitySpec, EnsembleSpec, SpeciesSpec};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Frequency grid with `points` evenly spaced samples on `[min, max]`.
pub fn linspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2, "a grid needs at least two points");
    let step = (max - min) / (points - 1) as f64;
    (0..points).map(|i| min + step * i as f64).collect()
}
