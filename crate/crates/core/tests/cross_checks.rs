//! Cross-validation between the independent computational routes: chain-walk
//! sums against the closed-form expansion terms and susceptibilities, the
//! self-energy's coupling-power series against the irreducible walk kernels,
//! and the geometric resummation of the irreducible sum against the raw
//! Dyson series.

use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;

use polariton_core::diagrams::{dyson_partial_sum, enumerate_walks, evaluate_walk};
use polariton_core::engines::{self, cf_full, cf_truncated, d0, d1, d2_x2};
use polariton_core::model::Chain;
use polariton_core::spectra::polariton_modes;
use polariton_core::{chi, linspace, presets, C64};

fn weak_spec(n: usize) -> polariton_core::EnsembleSpec {
    let mut spec = presets::fig2a(n);
    spec.lambda = 0.05 / (n as f64).sqrt();
    spec.cavity.kappa = 0.02;
    spec.gamma = 0.02;
    spec
}

fn bare_photon(spec: &polariton_core::EnsembleSpec, omega: f64) -> C64 {
    1.0 / C64::new(omega - spec.cavity.omega_ph, spec.cavity.kappa / 2.0)
}

/// Walk kernels with the two outer vacuum propagators stripped, summed per
/// Dyson order, with the self-energy sign convention.
fn irreducible_kernels(
    spec: &polariton_core::EnsembleSpec,
    omega: f64,
    m_max: usize,
) -> Vec<C64> {
    let g = bare_photon(spec, omega);
    (1..=m_max)
        .map(|m| {
            enumerate_walks(m, spec.total_count())
                .iter()
                .filter(|w| !w.is_reducible())
                .map(|w| evaluate_walk(spec, w, omega).unwrap().value)
                .sum::<C64>()
                / (g * g)
        })
        .collect()
}

#[test]
fn x2_classified_walks_reproduce_the_closed_second_order_term() {
    let spec = weak_spec(8);
    let omega = spec.omega_e0() - 0.5;
    let x2_sum: C64 = (1..=4)
        .flat_map(|m| enumerate_walks(m, 8))
        .filter(|w| w.scaling_exponent() == 2 && w.max_photon_depth() <= 1)
        .map(|w| evaluate_walk(&spec, &w, omega).unwrap().value)
        .sum();
    let closed = d2_x2(&spec, &[omega]).unwrap().values[0];
    let rel = (x2_sum - closed).norm() / closed.norm();
    assert!(rel <= 0.01, "X² walk sum deviates by {rel:.2e}");

    // doubling the squared-excursion term (a tempting miscount of the
    // geometric-series expansion) breaks the agreement by an order of magnitude
    let g = d0(&spec, &[omega]).unwrap().values[0];
    let s1 = d1(&spec, &[omega]).unwrap().values[0] / (g * g);
    let doubled = closed + g * g * g * s1 * s1;
    let rel_doubled = (x2_sum - doubled).norm() / doubled.norm();
    assert!(
        rel_doubled > 5.0 * rel,
        "doubled variant should be distinguishable: {rel_doubled:.2e} vs {rel:.2e}"
    );
}

#[test]
fn closed_form_susceptibilities_equal_the_irreducible_walks() {
    let spec = presets::fig2a(7);
    let omega = 10.37;
    let g = bare_photon(&spec, omega);

    let walks3 = enumerate_walks(3, 7);
    let irreducible: Vec<_> = walks3.iter().filter(|w| !w.is_reducible()).collect();
    assert_eq!(irreducible.len(), 2);

    let chi5 = chi::chi_term(&spec, omega, 2).unwrap();
    // enumeration order puts the pure Raman chain before the deeper cascade
    for (walk, contribution) in irreducible.iter().zip(&chi5.contributions) {
        let kernel = evaluate_walk(&spec, walk, omega).unwrap().value / (g * g);
        assert!(
            (contribution + kernel).norm() <= 1e-12 * kernel.norm(),
            "walk {} vs χ⁽⁵⁾ part",
            walk.ladder()
        );
    }

    let chi3 = chi::chi_term(&spec, omega, 1).unwrap();
    let raman4 = evaluate_walk(&spec, &enumerate_walks(2, 7)[1], omega).unwrap().value / (g * g);
    assert!((chi3.value + raman4).norm() <= 1e-12 * raman4.norm());

    let chi1 = chi::chi_term(&spec, omega, 0).unwrap();
    let rayleigh2 = evaluate_walk(&spec, &enumerate_walks(1, 7)[0], omega).unwrap().value / (g * g);
    assert!((chi1.value + rayleigh2).norm() <= 1e-12 * rayleigh2.norm());
}

/// The irreducible walk sums are the Taylor coefficients of the self-energy
/// in the squared coupling: recover the coefficients numerically from
/// `Σ_{e,0}` sampled along a coupling ray and compare.
#[test]
fn irreducible_walks_are_the_self_energy_taylor_coefficients() {
    let base = presets::fig2a(5);
    let omega = base.omega_e0() - 0.5;
    let kernels = irreducible_kernels(&base, omega, 3);

    let ts: Vec<f64> = (1..=6).map(|i| 0.06 * i as f64).collect();
    let sigmas: Vec<C64> = ts
        .iter()
        .map(|&t| {
            let mut spec = base.clone();
            spec.lambda = base.lambda * t;
            let chain = Chain::build(&spec).unwrap();
            engines::self_energy_e0(&spec, &chain, omega, None).unwrap().0
        })
        .collect();

    // Σ(t) = Σ_m c_m (t²)^m up to the sampled order
    let n = ts.len();
    let mut vand = Array2::<C64>::zeros((n, n));
    let mut rhs = Array1::<C64>::zeros(n);
    for (i, (&t, &sigma)) in ts.iter().zip(&sigmas).enumerate() {
        let u = t * t;
        for m in 1..=n {
            vand[(i, m - 1)] = C64::new(u.powi(m as i32), 0.0);
        }
        rhs[i] = sigma;
    }
    let coeffs = vand.solve(&rhs).unwrap();

    for m in 1..=3usize {
        // the kernel at the base coupling is homogeneous of degree 2m in λ,
        // so it is exactly the m-th fitted coefficient
        let kernel = kernels[m - 1];
        let rel = (coeffs[m - 1] - kernel).norm() / kernel.norm();
        assert!(rel <= 1e-6, "order {m}: fitted {:?} vs walks {kernel:?} ({rel:.2e})", coeffs[m - 1]);
    }
}

#[test]
fn geometric_resummation_of_irreducible_kernels() {
    let spec = weak_spec(6);
    let omega = spec.omega_e0() - 0.5;
    let grid = [omega];

    let m = 3;
    let sigma: C64 = irreducible_kernels(&spec, omega, m).iter().sum();
    let geometric = 1.0 / (C64::new(omega - spec.cavity.omega_ph, spec.cavity.kappa / 2.0) - sigma);

    let reference = cf_full(&spec, &grid).unwrap().values[0];
    let dyson_m = dyson_partial_sum(&spec, &grid, m).unwrap().values[0];
    let dyson_prev = dyson_partial_sum(&spec, &grid, m - 1).unwrap().values[0];

    // resumming the irreducible kernels regenerates every reducible stacking,
    // so it agrees with the raw partial sum to beyond the next Dyson order and
    // is at least as close to the exact response
    assert!((geometric - dyson_m).norm() <= (dyson_m - dyson_prev).norm());
    assert!((geometric - reference).norm() <= (dyson_m - reference).norm());
}

#[test]
fn scaling_classified_walks_rebuild_the_expansion_terms() {
    let spec = weak_spec(6);
    let omega = spec.omega_e0() - 0.5;
    let g = bare_photon(&spec, omega);

    let mut collective = g;
    let mut single_raman = C64::new(0.0, 0.0);
    for m in 1..=3 {
        for walk in enumerate_walks(m, 6) {
            let value = evaluate_walk(&spec, &walk, omega).unwrap().value;
            match walk.scaling_exponent() {
                0 => collective += value,
                1 => single_raman += value,
                _ => {}
            }
        }
    }
    let zeroth = d0(&spec, &[omega]).unwrap().values[0];
    let first = d1(&spec, &[omega]).unwrap().values[0];
    let rel0 = (collective - zeroth).norm() / (zeroth - g).norm();
    let rel1 = (single_raman - first).norm() / first.norm();
    assert!(rel0 <= 0.01, "collective walks vs d0: {rel0:.2e}");
    assert!(rel1 <= 0.01, "single-Raman walks vs d1: {rel1:.2e}");
}

#[test]
fn d1_poles_sit_on_the_first_order_polaritons() {
    let n = 20;
    let spec = presets::fig2a(n);
    let modes = polariton_modes(&spec, 1).unwrap();
    for ev in &modes.eigenvalues {
        let window = linspace(ev.re - 0.05, ev.re + 0.05, 501);
        let term = d1(&spec, &window).unwrap();
        // least-squares pole of (a + bω)/(ω − p), linear after clearing the denominator
        let m = window.len();
        let mut design = Array2::<C64>::zeros((m, 3));
        let mut rhs = Array1::<C64>::zeros(m);
        for i in 0..m {
            design[(i, 0)] = C64::new(1.0, 0.0);
            design[(i, 1)] = C64::new(window[i], 0.0);
            design[(i, 2)] = term.values[i];
            rhs[i] = term.values[i] * window[i];
        }
        let mh = design.mapv(|z| z.conj()).reversed_axes();
        let fit = mh.dot(&design).solve(&mh.dot(&rhs)).unwrap();
        let pole = fit[2];
        assert!(
            (pole.re - ev.re).abs() <= 2e-3,
            "fitted pole {} vs mode {}",
            pole.re,
            ev.re
        );
    }
}

#[test]
fn d1_carries_no_net_spectral_weight() {
    let spec = presets::fig2a(50);
    let grid = linspace(10.0 - 42.0, 10.0 + 43.0, 30001);
    let weight = |values: &[C64]| -> f64 {
        let mut integral = 0.0;
        for i in 1..grid.len() {
            integral += 0.5 * (grid[i] - grid[i - 1]) * (values[i].im + values[i - 1].im);
        }
        -integral / std::f64::consts::PI
    };
    let first = d1(&spec, &grid).unwrap();
    assert!(weight(&first.values).abs() <= 0.02);

    // same statement through the truncation route
    let trunc1 = cf_truncated(&spec, &grid, 1).unwrap();
    let zeroth = d0(&spec, &grid).unwrap();
    let diff: Vec<C64> = trunc1
        .values
        .iter()
        .zip(&zeroth.values)
        .map(|(a, b)| a - b)
        .collect();
    assert!(weight(&diff).abs() <= 0.02);
}
