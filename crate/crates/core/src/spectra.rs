//! Spectroscopic observables: absorption/transmission/reflection curves from
//! Green's-function samples, peak location with sub-grid refinement, polariton
//! mode frequencies as non-Hermitian eigenvalues, and the spectral sum rule.

use ndarray::Array2;
use serde::Serialize;
use thiserror::Error;

use crate::engines::{Engine, GreenResult};
use crate::linalg::eigenvalues_sorted;
use crate::model::{build_block_operators, CavitySpec, EnsembleSpec, ModelError};
use crate::C64;

/// Default peak-detection thresholds in absolute absorbance; sidebands are
/// `O(1/N)` so the defaults are deliberately small.
pub const DEFAULT_MIN_HEIGHT: f64 = 1e-4;
pub const DEFAULT_MIN_PROMINENCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("polariton mode order {order} not supported (use 0 or 1, with N > order)")]
    Order { order: usize },
    #[error("eigenvalue computation failed: {0}")]
    Eig(String),
}

/// Absorption, transmission and reflection on a frequency grid. The three
/// curves satisfy `A + T + R = 1` pointwise by construction.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub omegas: Vec<f64>,
    pub absorption: Vec<f64>,
    pub transmission: Vec<f64>,
    pub reflection: Vec<f64>,
    pub engine: Engine,
}

/// `T = (κ²/4)|D|²`, `R = 1 + κ·Im D + T`, `A = −(κ/2)[κ|D|² + 2 Im D]`.
pub fn compute_spectrum(green: &GreenResult, kappa: f64) -> Spectrum {
    let mut absorption = Vec::with_capacity(green.values.len());
    let mut transmission = Vec::with_capacity(green.values.len());
    let mut reflection = Vec::with_capacity(green.values.len());
    for d in &green.values {
        let t = kappa * kappa / 4.0 * d.norm_sqr();
        let r = 1.0 + kappa * d.im + t;
        let a = -(kappa / 2.0) * (kappa * d.norm_sqr() + 2.0 * d.im);
        transmission.push(t);
        reflection.push(r);
        absorption.push(a);
    }
    Spectrum {
        omegas: green.omegas.clone(),
        absorption,
        transmission,
        reflection,
        engine: green.engine,
    }
}

/// One located spectral peak.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Peak {
    /// Parabolically refined position.
    pub position: f64,
    /// Refined height.
    pub height: f64,
    /// Full width at half maximum from linear interpolation of the crossings.
    pub fwhm: f64,
}

/// Peak table of one spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct PeakTable {
    pub engine: String,
    pub peaks: Vec<Peak>,
}

/// Local maxima of the absorption curve above the thresholds.
pub fn find_peaks(spectrum: &Spectrum, min_height: f64, min_prominence: f64) -> PeakTable {
    PeakTable {
        engine: spectrum.engine.label(),
        peaks: find_peaks_in(&spectrum.omegas, &spectrum.absorption, min_height, min_prominence),
    }
}

/// Peak finder on an arbitrary sampled curve (used directly for difference
/// spectra). Positions are refined by a 3-point parabolic fit; widths come
/// from the half-maximum crossings.
pub fn find_peaks_in(xs: &[f64], ys: &[f64], min_height: f64, min_prominence: f64) -> Vec<Peak> {
    let n = ys.len();
    let mut peaks = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(ys[i] > ys[i - 1] && ys[i] > ys[i + 1]) {
            continue;
        }
        if ys[i] < min_height {
            continue;
        }
        if prominence(ys, i) < min_prominence {
            continue;
        }
        let (position, height) = refine_parabolic(xs, ys, i);
        let fwhm = width_at_half_max(xs, ys, i, height);
        peaks.push(Peak { position, height, fwhm });
    }
    peaks
}

/// Height above the higher of the two base saddles, scanning outward until a
/// taller sample (or the grid edge) bounds the peak.
fn prominence(ys: &[f64], i: usize) -> f64 {
    let mut left_min = ys[i];
    for j in (0..i).rev() {
        left_min = left_min.min(ys[j]);
        if ys[j] > ys[i] {
            break;
        }
    }
    let mut right_min = ys[i];
    for &y in &ys[i + 1..] {
        right_min = right_min.min(y);
        if y > ys[i] {
            break;
        }
    }
    ys[i] - left_min.max(right_min)
}

fn refine_parabolic(xs: &[f64], ys: &[f64], i: usize) -> (f64, f64) {
    let (ym, y0, yp) = (ys[i - 1], ys[i], ys[i + 1]);
    let denom = ym - 2.0 * y0 + yp;
    if denom.abs() < f64::EPSILON * y0.abs() {
        return (xs[i], y0);
    }
    let delta = 0.5 * (ym - yp) / denom;
    let h = xs[i + 1] - xs[i];
    (xs[i] + delta * h, y0 - 0.25 * (ym - yp) * delta)
}

fn width_at_half_max(xs: &[f64], ys: &[f64], i: usize, height: f64) -> f64 {
    let half = height / 2.0;
    let cross = |from: usize, step: isize| -> f64 {
        let mut j = from as isize;
        loop {
            let next = j + step;
            if next < 0 || next as usize >= ys.len() {
                return xs[j as usize];
            }
            if ys[next as usize] <= half {
                let (x0, y0) = (xs[j as usize], ys[j as usize]);
                let (x1, y1) = (xs[next as usize], ys[next as usize]);
                return x0 + (x1 - x0) * (y0 - half) / (y0 - y1);
            }
            j = next;
        }
    };
    cross(i, 1) - cross(i, -1)
}

/// Complex polariton mode frequencies: real part is the frequency, `−2·Im`
/// the linewidth.
#[derive(Debug, Clone)]
pub struct PolaritonModes {
    pub order: usize,
    pub eigenvalues: Vec<C64>,
}

/// Eigenvalues of the non-Hermitian block pair at chain depth `order`:
/// `[[H_ph − iκ/2, V], [V†, H_e − iγ/2]]`. Order 0 gives the zeroth-order
/// polaritons (poles of the thermodynamic-limit response); order 1 gives the
/// Raman-shifted first-order polaritons.
pub fn polariton_modes(spec: &EnsembleSpec, order: usize) -> Result<PolaritonModes, SpectraError> {
    if order > 1 || spec.total_count() < order + 1 {
        return Err(SpectraError::Order { order });
    }
    let ops = build_block_operators(spec, order)?;
    let (p, e) = (ops.h_ph.len(), ops.h_e.len());
    let dim = p + e;
    let mut m = Array2::zeros((dim, dim));
    for (i, &h) in ops.h_ph.iter().enumerate() {
        m[(i, i)] = C64::new(h, -spec.cavity.kappa / 2.0);
    }
    for (i, &h) in ops.h_e.iter().enumerate() {
        m[(p + i, p + i)] = C64::new(h, -spec.gamma / 2.0);
    }
    for ((i, j), &v) in ops.v_big.indexed_iter() {
        m[(i, p + j)] = v;
        m[(p + j, i)] = v.conj();
    }
    let eigenvalues = eigenvalues_sorted(&m).map_err(|e| SpectraError::Eig(e.to_string()))?;
    Ok(PolaritonModes { order, eigenvalues })
}

/// Result of the spectral-weight integral `−(1/π)∫ Im D dω`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SumRule {
    /// Grid integral plus tail correction; 1 for a causal, normalized response.
    pub value: f64,
    /// Analytic tail contribution assuming `D ≈ 1/(ω − ω_ph + iκ/2)` beyond
    /// the grid.
    pub tail: f64,
    /// Set when the tail exceeds 10% of the total, i.e. the grid is too
    /// narrow for the quadrature to be trusted.
    pub grid_too_narrow: bool,
}

/// Trapezoidal `−(1/π)∫ Im D dω` over the grid with the Lorentzian tail
/// folded in analytically.
pub fn sum_rule(green: &GreenResult, cavity: &CavitySpec) -> SumRule {
    let xs = &green.omegas;
    let mut integral = 0.0;
    for i in 1..xs.len() {
        let dx = xs[i] - xs[i - 1];
        integral += 0.5 * dx * (green.values[i].im + green.values[i - 1].im);
    }
    let grid_part = -integral / std::f64::consts::PI;

    let half_kappa = cavity.kappa / 2.0;
    let lo = xs[0];
    let hi = *xs.last().unwrap();
    let tail = if half_kappa == 0.0 {
        0.0
    } else {
        use std::f64::consts::{FRAC_PI_2, PI};
        let right = FRAC_PI_2 - ((hi - cavity.omega_ph) / half_kappa).atan();
        let left = FRAC_PI_2 + ((lo - cavity.omega_ph) / half_kappa).atan();
        (right + left) / PI
    };
    let value = grid_part + tail;
    SumRule {
        value,
        tail,
        grid_too_narrow: tail.abs() > 0.1 * value.abs(),
    }
}

/// Plot-ready CSV: `omega,re_D,im_D,A,T,R`, one row per grid point, 17
/// significant digits.
pub fn spectrum_csv(green: &GreenResult, spectrum: &Spectrum) -> String {
    let mut out = String::from("omega,re_D,im_D,A,T,R\n");
    for i in 0..green.omegas.len() {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            green.omegas[i],
            green.values[i].re,
            green.values[i].im,
            spectrum.absorption[i],
            spectrum.transmission[i],
            spectrum.reflection[i],
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::{cf_full, d0, dense_green};
    use crate::model::SpeciesSpec;
    use crate::{linspace, C64};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn two_level_spec(n: usize, lambda: f64, kappa: f64, gamma: f64) -> EnsembleSpec {
        EnsembleSpec {
            cavity: CavitySpec { omega_ph: 1.0, kappa },
            lambda,
            gamma,
            species: vec![SpeciesSpec {
                count: n,
                ground_levels: vec![0.0],
                excited_levels: vec![1.0],
                fc_overlaps: array![[C64::new(1.0, 0.0)]],
            }],
        }
    }

    fn fig2a_like(n: usize) -> EnsembleSpec {
        EnsembleSpec {
            cavity: CavitySpec { omega_ph: 10.0, kappa: 0.1 },
            lambda: 0.8 / (n as f64).sqrt(),
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
    fn empty_lossless_cavity_transmits_on_resonance() {
        let mut spec = two_level_spec(2, 0.1, 0.1, 0.04);
        spec.lambda = 0.0;
        let green = dense_green(&spec, &[1.0]).unwrap();
        let s = compute_spectrum(&green, spec.cavity.kappa);
        assert_abs_diff_eq!(s.transmission[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.reflection[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.absorption[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn unitarity_is_an_algebraic_identity() {
        let spec = fig2a_like(6);
        let grid = linspace(8.0, 13.0, 301);
        let green = cf_full(&spec, &grid).unwrap();
        let s = compute_spectrum(&green, spec.cavity.kappa);
        for i in 0..grid.len() {
            let total = s.absorption[i] + s.transmission[i] + s.reflection[i];
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            assert!(s.transmission[i] >= 0.0);
        }
    }

    #[test]
    fn lorentzian_peak_is_located_to_subgrid_accuracy() {
        let kappa = 0.05f64;
        let center = 1.2340567;
        let xs = linspace(0.5, 2.0, 601);
        let step = xs[1] - xs[0];
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| (kappa / 2.0).powi(2) / ((x - center).powi(2) + (kappa / 2.0).powi(2)))
            .collect();
        let peaks = find_peaks_in(&xs, &ys, 0.1, 0.1);
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].position - center).abs() < step * step / kappa);
        assert_abs_diff_eq!(peaks[0].fwhm, kappa, epsilon = step);
    }

    #[test]
    fn fig2a_peak_counts_for_d0_and_cf() {
        let spec = fig2a_like(10);
        let grid = linspace(8.0, 13.0, 4001);
        let zeroth = compute_spectrum(&d0(&spec, &grid).unwrap(), spec.cavity.kappa);
        let table = find_peaks(&zeroth, DEFAULT_MIN_HEIGHT, DEFAULT_MIN_PROMINENCE);
        assert_eq!(table.peaks.len(), 2, "{:?}", table.peaks);

        // the upper sideband rides the polariton tail, so it clears the 1e-4
        // level in height but not in bounded prominence
        let full = compute_spectrum(&cf_full(&spec, &grid).unwrap(), spec.cavity.kappa);
        let table = find_peaks(&full, DEFAULT_MIN_HEIGHT, 0.0);
        assert_eq!(table.peaks.len(), 4, "{:?}", table.peaks);
    }

    #[test]
    fn two_level_modes_are_the_analytic_doublet() {
        let spec = two_level_spec(4, 0.2, 0.06, 0.06);
        let modes = polariton_modes(&spec, 0).unwrap();
        assert_eq!(modes.eigenvalues.len(), 2);
        let split = 2.0 * 0.2 * 2.0; // 2λ√N
        for (ev, expected_re) in modes.eigenvalues.iter().zip([1.0 - split / 2.0, 1.0 + split / 2.0]) {
            assert_abs_diff_eq!(ev.re, expected_re, epsilon = 1e-12);
            assert_abs_diff_eq!(ev.im, -(0.06 + 0.06) / 4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn first_order_modes_show_the_reduced_rabi_splitting() {
        let n = 10;
        let spec = fig2a_like(n);
        let lambda = spec.lambda;
        let modes1 = polariton_modes(&spec, 1).unwrap();
        assert_eq!(modes1.eigenvalues.len(), 2);
        let split1 = lambda * ((n - 1) as f64).sqrt() * 0.98;
        assert_abs_diff_eq!(modes1.eigenvalues[0].re, 11.0 - split1, epsilon = 1e-12);
        assert_abs_diff_eq!(modes1.eigenvalues[1].re, 11.0 + split1, epsilon = 1e-12);

        let modes0 = polariton_modes(&spec, 0).unwrap();
        let split0 = modes0.eigenvalues[1].re - modes0.eigenvalues[0].re;
        let measured = split0 - (modes1.eigenvalues[1].re - modes1.eigenvalues[0].re);
        let expected = 2.0 * lambda * ((n as f64).sqrt() - ((n - 1) as f64).sqrt()) * 0.98;
        assert_abs_diff_eq!(measured, expected, epsilon = 1e-12);
    }

    #[test]
    fn mode_order_is_validated() {
        let spec = fig2a_like(4);
        assert!(matches!(polariton_modes(&spec, 2), Err(SpectraError::Order { order: 2 })));
    }

    #[test]
    fn d0_peaks_sit_on_the_zeroth_order_modes() {
        let spec = fig2a_like(50);
        let grid = linspace(8.5, 11.5, 3001);
        let step = grid[1] - grid[0];
        let s = compute_spectrum(&d0(&spec, &grid).unwrap(), spec.cavity.kappa);
        let peaks = find_peaks(&s, DEFAULT_MIN_HEIGHT, DEFAULT_MIN_PROMINENCE).peaks;
        let modes = polariton_modes(&spec, 0).unwrap();
        assert_eq!(peaks.len(), modes.eigenvalues.len());
        let tol = step.max(spec.cavity.kappa / 10.0);
        for (peak, mode) in peaks.iter().zip(&modes.eigenvalues) {
            assert!(
                (peak.position - mode.re).abs() < tol,
                "peak {} vs mode {}",
                peak.position,
                mode.re
            );
        }
    }

    #[test]
    fn sum_rule_for_a_bare_lorentzian() {
        let mut spec = two_level_spec(2, 0.1, 0.1, 0.04);
        spec.lambda = 0.0;
        let grid = linspace(1.0 - 30.0, 1.0 + 30.0, 40001);
        let green = dense_green(&spec, &grid).unwrap();
        let rule = sum_rule(&green, &spec.cavity);
        assert_abs_diff_eq!(rule.value, 1.0, epsilon = 1e-4);
        assert!(!rule.grid_too_narrow);
    }

    #[test]
    fn narrow_grid_is_flagged() {
        let mut spec = two_level_spec(2, 0.1, 0.5, 0.04);
        spec.lambda = 0.0;
        let grid = linspace(0.8, 1.2, 101);
        let green = dense_green(&spec, &grid).unwrap();
        let rule = sum_rule(&green, &spec.cavity);
        assert!(rule.grid_too_narrow, "tail = {}", rule.tail);
    }

    #[test]
    fn csv_has_the_documented_header_and_shape() {
        let spec = fig2a_like(4);
        let grid = linspace(9.0, 11.0, 5);
        let green = d0(&spec, &grid).unwrap();
        let s = compute_spectrum(&green, spec.cavity.kappa);
        let csv = spectrum_csv(&green, &s);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "omega,re_D,im_D,A,T,R");
        assert_eq!(lines.count(), 5);
    }
}
