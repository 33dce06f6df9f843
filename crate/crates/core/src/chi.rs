//! Irreducible nonlinear susceptibilities of the molecular ensemble.
//!
//! The photon self-energy is the sum over all irreducible Rayleigh and Raman
//! susceptibilities: the order-(2l+1) term is the sum of every irreducible
//! chain walk with l Raman pairs, built from bare block resolvents. Closed
//! forms are provided through order 5; higher orders come from the walk
//! enumeration in [`crate::diagrams`].

use thiserror::Error;

use crate::engines::{self, EngineError};
use crate::model::{Chain, EnsembleSpec, ModelError};
use crate::C64;

#[derive(Debug, Error)]
pub enum ChiError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("closed-form susceptibilities stop at order 5 (l = 2); order {l} is only available through the walk enumeration")]
    UnsupportedOrder { l: usize },
}

/// Bare resonance factor `1/(ω − ω' + iΓ/2)`.
pub fn lorentzian(omega: f64, omega_prime: f64, gamma: f64) -> C64 {
    1.0 / C64::new(omega - omega_prime, gamma / 2.0)
}

/// One irreducible susceptibility term of order `2l+1`.
///
/// `value` carries the self-energy-series prefactor (a power of `ω_ph/2`), so
/// it has units of energy and sums directly into the Green's-function
/// denominator; [`SusceptibilityTerm::bare`] strips the prefactor.
#[derive(Debug, Clone)]
pub struct SusceptibilityTerm {
    pub order: usize,
    pub value: C64,
    /// Distinct operator-product contributions (order 5 has two: the pure
    /// Raman chain, suppressed as `1/N²`, and the cascade through the
    /// first-order polaritons, suppressed as `1/N`).
    pub contributions: Vec<C64>,
    pub with_prefactor: bool,
}

impl SusceptibilityTerm {
    fn l(&self) -> u32 {
        ((self.order - 1) / 2) as u32
    }

    /// Strip the `(ω_ph/2)^(l+1)` prefactor, leaving the raw susceptibility.
    pub fn bare(&self, omega_ph: f64) -> SusceptibilityTerm {
        if !self.with_prefactor {
            return self.clone();
        }
        let scale = (omega_ph / 2.0).powi(self.l() as i32 + 1);
        SusceptibilityTerm {
            order: self.order,
            value: self.value / scale,
            contributions: self.contributions.iter().map(|c| c / scale).collect(),
            with_prefactor: false,
        }
    }

    /// The frequency-argument string `({ω, ω−ω_ph}^l, ω)` of this term.
    pub fn frequency_arguments(&self, omega: f64, omega_ph: f64) -> Vec<f64> {
        let mut args = Vec::new();
        for _ in 0..self.l() {
            args.push(omega);
            args.push(omega - omega_ph);
        }
        args.push(omega);
        args
    }
}

/// Bare propagator diagonals and couplings at chain depths 0 and 1.
struct Ladder<'a> {
    chain: &'a Chain,
    g_e0: Vec<C64>,
    g_ph1: Vec<C64>,
    g_e1: Vec<C64>,
}

impl<'a> Ladder<'a> {
    fn new(spec: &EnsembleSpec, chain: &'a Chain, omega: f64) -> Self {
        let z_e = C64::new(omega, spec.gamma / 2.0);
        let z_ph = C64::new(omega, spec.cavity.kappa / 2.0);
        let g_e0 = chain.ops[0].h_e.iter().map(|&h| 1.0 / (z_e - h)).collect();
        let (g_ph1, g_e1) = if chain.ops.len() > 1 {
            (
                chain.ops[1].h_ph.iter().map(|&h| 1.0 / (z_ph - h)).collect(),
                chain.ops[1].h_e.iter().map(|&h| 1.0 / (z_e - h)).collect(),
            )
        } else {
            (
                chain.h_ph_final.iter().map(|&h| 1.0 / (z_ph - h)).collect(),
                Vec::new(),
            )
        };
        Self { chain, g_e0, g_ph1, g_e1 }
    }

    /// `V₀ G_{e,0}` as a row over the depth-0 excited space.
    fn open(&self) -> Vec<C64> {
        self.chain.ops[0]
            .v_big
            .row(0)
            .iter()
            .zip(&self.g_e0)
            .map(|(v, g)| v * g)
            .collect()
    }

    /// Append `v₀ G_ph,1`.
    fn raman_up(&self, row: &[C64]) -> Vec<C64> {
        let v = &self.chain.ops[0].v_small;
        (0..v.dim().1)
            .map(|p| {
                row.iter()
                    .enumerate()
                    .map(|(e, x)| x * v[(e, p)])
                    .sum::<C64>()
                    * self.g_ph1[p]
            })
            .collect()
    }

    /// Append `v₀† G_{e,0}`.
    fn raman_down(&self, row: &[C64]) -> Vec<C64> {
        let v = &self.chain.ops[0].v_small;
        (0..v.dim().0)
            .map(|e| {
                row.iter()
                    .enumerate()
                    .map(|(p, x)| x * v[(e, p)].conj())
                    .sum::<C64>()
                    * self.g_e0[e]
            })
            .collect()
    }

    /// Append `V₁ G_{e,1} V₁† G_ph,1`, the collective bounce at depth 1.
    fn rayleigh_bounce(&self, row: &[C64]) -> Vec<C64> {
        let v = &self.chain.ops[1].v_big;
        let up: Vec<C64> = (0..v.dim().1)
            .map(|j| {
                row.iter()
                    .enumerate()
                    .map(|(p, x)| x * v[(p, j)])
                    .sum::<C64>()
                    * self.g_e1[j]
            })
            .collect();
        (0..v.dim().0)
            .map(|p| {
                up.iter()
                    .enumerate()
                    .map(|(j, x)| x * v[(p, j)].conj())
                    .sum::<C64>()
                    * self.g_ph1[p]
            })
            .collect()
    }

    /// Close with `V₀†` back to the photon vacuum.
    fn close(&self, row: &[C64]) -> C64 {
        self.chain.ops[0]
            .v_big
            .row(0)
            .iter()
            .zip(row)
            .map(|(v, x)| x * v.conj())
            .sum()
    }
}

/// The irreducible susceptibility of order `2l+1` at probe frequency `ω`,
/// evaluated as the bare operator product; `l ≤ 2`.
pub fn chi_term(spec: &EnsembleSpec, omega: f64, l: usize) -> Result<SusceptibilityTerm, ChiError> {
    if l > 2 {
        return Err(ChiError::UnsupportedOrder { l });
    }
    let depth = if l == 0 { 0 } else { 1.min(spec.total_count() - 1) };
    let chain = Chain::build_to_depth(spec, depth)?;
    let ladder = Ladder::new(spec, &chain, omega);
    let u0 = ladder.open();
    let contributions = match l {
        0 => vec![-ladder.close(&u0)],
        1 => {
            let row = ladder.raman_down(&ladder.raman_up(&u0));
            vec![-ladder.close(&row)]
        }
        _ => {
            // pure Raman chain, two phonon round trips: 1/N²
            let once = ladder.raman_down(&ladder.raman_up(&u0));
            let twice = ladder.raman_down(&ladder.raman_up(&once));
            let pure_raman = -ladder.close(&twice);
            // cascade through the first-order polaritons: 1/N. A single
            // molecule has no partner to cascade through, so the term is zero.
            let cascade = if chain.ops.len() > 1 {
                let row = ladder.raman_down(&ladder.rayleigh_bounce(&ladder.raman_up(&u0)));
                -ladder.close(&row)
            } else {
                C64::new(0.0, 0.0)
            };
            vec![pure_raman, cascade]
        }
    };
    Ok(SusceptibilityTerm {
        order: 2 * l + 1,
        value: contributions.iter().sum(),
        contributions,
        with_prefactor: true,
    })
}

/// Partial susceptibility series against the exact self-energy.
#[derive(Debug, Clone, Copy)]
pub struct SelfEnergySeries {
    /// `Σ_{l ≤ l_max}` of the prefactored susceptibilities; approximates
    /// `−Σ_{e,0}(ω)`.
    pub partial_sum: C64,
    /// `Σ_{e,0}(ω)` from the full continued-fraction recursion.
    pub reference: C64,
}

impl SelfEnergySeries {
    pub fn residual(&self) -> f64 {
        (self.partial_sum + self.reference).norm()
    }
}

/// Sum the irreducible series through `l_max ≤ 2` and evaluate the exact
/// self-energy alongside it. Near a polariton resonance the series may
/// diverge term to term (it is a geometric series read outside its radius);
/// the residual is reported, not asserted.
pub fn self_energy_from_series(
    spec: &EnsembleSpec,
    omega: f64,
    l_max: usize,
) -> Result<SelfEnergySeries, ChiError> {
    if l_max > 2 {
        return Err(ChiError::UnsupportedOrder { l: l_max });
    }
    let mut partial_sum = C64::new(0.0, 0.0);
    for l in 0..=l_max {
        partial_sum += chi_term(spec, omega, l)?.value;
    }
    let chain = Chain::build(spec)?;
    let (reference, _) = engines::self_energy_e0(spec, &chain, omega, None)?;
    Ok(SelfEnergySeries { partial_sum, reference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CavitySpec, SpeciesSpec};
    use crate::{engines, linspace};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn two_level_spec(n: usize, lambda: f64) -> EnsembleSpec {
        EnsembleSpec {
            cavity: CavitySpec { omega_ph: 1.0, kappa: 0.08 },
            lambda,
            gamma: 0.05,
            species: vec![SpeciesSpec {
                count: n,
                ground_levels: vec![0.0],
                excited_levels: vec![1.0],
                fc_overlaps: array![[C64::new(1.0, 0.0)]],
            }],
        }
    }

    fn vibronic_spec(n: usize, coupling: f64) -> EnsembleSpec {
        EnsembleSpec {
            cavity: CavitySpec { omega_ph: 10.0, kappa: 0.1 },
            lambda: coupling / (n as f64).sqrt(),
            gamma: 0.1,
            species: vec![SpeciesSpec {
                count: n,
                ground_levels: vec![0.0, 1.0],
                excited_levels: vec![10.0],
                fc_overlaps: array![[C64::new(0.98, 0.0), C64::new(0.19899, 0.0)]],
            }],
        }
    }

    #[test]
    fn lorentzian_values() {
        assert!((lorentzian(1.0, 1.0, 0.2) - C64::new(0.0, -10.0)).norm() < 1e-14);
        assert!((lorentzian(1.1, 1.0, 0.2) - C64::new(5.0, -5.0)).norm() < 1e-12);
        let real = lorentzian(2.0, 1.0, 0.0);
        assert_abs_diff_eq!(real.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(real.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn linear_susceptibility_of_a_two_level_ensemble() {
        let spec = two_level_spec(7, 0.13);
        for omega in [0.7, 1.0, 1.3] {
            let term = chi_term(&spec, omega, 0).unwrap();
            let expected = 7.0 * 0.13 * 0.13 * lorentzian(omega, 1.0, spec.gamma);
            assert!((-term.value - expected).norm() < 1e-14 * expected.norm());
        }
    }

    #[test]
    fn chi1_reconstructs_the_zeroth_order_response() {
        let spec = vibronic_spec(25, 0.8);
        let grid = linspace(8.0, 12.5, 101);
        let zeroth = engines::d0(&spec, &grid).unwrap();
        for (&omega, expected) in grid.iter().zip(&zeroth.values) {
            let term = chi_term(&spec, omega, 0).unwrap();
            let rebuilt =
                1.0 / (C64::new(omega - spec.cavity.omega_ph, spec.cavity.kappa / 2.0) + term.value);
            assert!(
                (rebuilt - expected).norm() <= 1e-12 * expected.norm(),
                "ω = {omega}"
            );
        }
    }

    #[test]
    fn raman_susceptibility_scales_as_one_over_n_exactly() {
        // the bare blocks carry no N dependence, so χ⁽³⁾ ∝ λ²·(λ√N)² exactly
        let omega = 10.3;
        let a = chi_term(&vibronic_spec(4, 0.8), omega, 1).unwrap().value;
        let b = chi_term(&vibronic_spec(16, 0.8), omega, 1).unwrap().value;
        assert!((a / b - 4.0).norm() < 1e-12);
    }

    #[test]
    fn fifth_order_contributions_scale_as_documented() {
        let omega = 10.45;
        let n = 5;
        let a = chi_term(&vibronic_spec(n, 0.8), omega, 2).unwrap();
        let b = chi_term(&vibronic_spec(4 * n, 0.8), omega, 2).unwrap();
        assert_eq!(a.contributions.len(), 2);
        // pure Raman chain: two v-pairs, ratio is exactly 16
        assert!((a.contributions[0] / b.contributions[0] - 16.0).norm() < 1e-11);
        // cascade: one v-pair plus a collective bounce with λ²(N−1)
        let expected = 16.0 * (n as f64 - 1.0) / (4.0 * n as f64 - 1.0);
        assert!((a.contributions[1] / b.contributions[1] - expected).norm() < 1e-11);
        assert!((a.value - (a.contributions[0] + a.contributions[1])).norm() < 1e-14 * a.value.norm());
    }

    #[test]
    fn series_residual_decreases_in_the_weak_coupling_regime() {
        let mut spec = vibronic_spec(6, 0.05);
        spec.cavity.kappa = 0.02;
        spec.gamma = 0.02;
        let omega = spec.omega_e0() - 0.5;
        let r0 = self_energy_from_series(&spec, omega, 0).unwrap().residual();
        let r1 = self_energy_from_series(&spec, omega, 1).unwrap().residual();
        let r2 = self_energy_from_series(&spec, omega, 2).unwrap().residual();
        assert!(r2 < r1 && r1 < r0, "residuals {r0} {r1} {r2}");
    }

    #[test]
    fn closed_form_pole_locations_stay_below_the_real_axis() {
        let spec = vibronic_spec(5, 0.8);
        let chain = Chain::build_to_depth(&spec, 1).unwrap();
        let poles: Vec<C64> = chain.ops[0]
            .h_e
            .iter()
            .map(|&h| C64::new(h, -spec.gamma / 2.0))
            .chain(chain.ops[1].h_ph.iter().map(|&h| C64::new(h, -spec.cavity.kappa / 2.0)))
            .chain(chain.ops[1].h_e.iter().map(|&h| C64::new(h, -spec.gamma / 2.0)))
            .collect();
        assert!(poles.iter().all(|p| p.im < 0.0));
    }

    #[test]
    fn unsupported_order_is_rejected() {
        let spec = vibronic_spec(4, 0.5);
        assert!(matches!(
            chi_term(&spec, 10.0, 3),
            Err(ChiError::UnsupportedOrder { l: 3 })
        ));
    }

    #[test]
    fn prefactor_strip_and_argument_bookkeeping() {
        let spec = vibronic_spec(4, 0.5);
        let term = chi_term(&spec, 10.2, 1).unwrap();
        let bare = term.bare(spec.cavity.omega_ph);
        let scale = (spec.cavity.omega_ph / 2.0).powi(2);
        assert!((bare.value * scale - term.value).norm() < 1e-14 * term.value.norm());
        let args = term.frequency_arguments(10.2, 10.0);
        for (got, want) in args.iter().zip([10.2, 0.2, 10.2]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }
}
