//! Canonical benchmark ensembles: three-level molecules (two ground
//! vibrational levels, one excited level) resonantly coupled to the cavity,
//! in dimensionless units where the first vibrational quantum is 1.
//!
//! The absolute electronic scale is irrelevant to line shapes, which depend
//! only on detunings; it is fixed at ten vibrational quanta. The
//! Franck-Condon row `[0.98, 0.19899]` has unit norm to machine precision.

use ndarray::array;

use crate::model::{CavitySpec, EnsembleSpec, SpeciesSpec};
use crate::C64;

/// Franck-Condon overlap to the phononless ground level.
pub const FC_C0: f64 = 0.98;
/// Franck-Condon overlap to the one-phonon ground level.
pub const FC_C1: f64 = 0.19899;
/// Electronic transition frequency in units of the vibrational quantum.
pub const ELECTRONIC_GAP: f64 = 10.0;

/// Molecule counts swept by the single-species benchmark, chosen so the
/// `1/N` sideband heights are clearly ordered.
pub const FIG2A_N_VALUES: [usize; 3] = [10, 50, 250];

/// Default per-species counts for the two-species benchmark. Large enough
/// that the second-order Rabi contraction (which the plain `2ω_v` sideband
/// offsets neglect) stays well inside the line width.
pub const FIG2B_COUNTS: (usize, usize) = (25, 25);

fn three_level(count: usize, omega_v: f64) -> SpeciesSpec {
    SpeciesSpec {
        count,
        ground_levels: vec![0.0, omega_v],
        excited_levels: vec![ELECTRONIC_GAP],
        fc_overlaps: array![[C64::new(FC_C0, 0.0), C64::new(FC_C1, 0.0)]],
    }
}

/// Single-species benchmark: `ω_v = 1`, `κ = γ = 0.1`, `λ√N = 0.8`, cavity
/// resonant with the electronic transition.
pub fn fig2a(n: usize) -> EnsembleSpec {
    EnsembleSpec {
        cavity: CavitySpec { omega_ph: ELECTRONIC_GAP, kappa: 0.1 },
        lambda: 0.8 / (n as f64).sqrt(),
        gamma: 0.1,
        species: vec![three_level(n, 1.0)],
    }
}

/// Two-species benchmark: vibrational quanta 1 and 1.2, equal electronic
/// gaps, `κ = γ = 0.05`, `λ√N = 0.6` over the total count.
pub fn fig2b(n_a: usize, n_b: usize) -> EnsembleSpec {
    EnsembleSpec {
        cavity: CavitySpec { omega_ph: ELECTRONIC_GAP, kappa: 0.05 },
        lambda: 0.6 / ((n_a + n_b) as f64).sqrt(),
        gamma: 0.05,
        species: vec![three_level(n_a, 1.0), three_level(n_b, 1.2)],
    }
}

/// Default sideband-study grid: `(min, max, points)` covering both zeroth
/// order polaritons and the first-order sidebands.
pub fn fig2a_grid() -> (f64, f64, usize) {
    (ELECTRONIC_GAP - 3.0, ELECTRONIC_GAP + 3.0, 4001)
}

/// Grid wide enough for the second-order sidebands of the two-species model.
pub fn fig2b_grid() -> (f64, f64, usize) {
    (ELECTRONIC_GAP - 2.2, ELECTRONIC_GAP + 3.4, 5001)
}
