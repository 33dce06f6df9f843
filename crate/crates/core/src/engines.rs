//! Four engines for the retarded photon Green's function `D(ω)`: a dense
//! linear-solve oracle, the full recursive matrix continued fraction, the
//! depth-truncated continued fraction, and closed-form `1/N`-expansion terms.
//!
//! Every engine is a pure function of `(spec, ω)`; the frequency sweep is the
//! parallel axis and results are collected in grid order, so output is
//! deterministic regardless of thread count.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{resolvent_denominator, self_energy_step, solve_single};
use crate::model::{assemble_dense_h1, Chain, EnsembleSpec, ModelError};
use crate::C64;

/// Reciprocal-condition threshold below which an inner solve is flagged
/// (condition number above 1e12 leaves too little double-precision headroom).
pub const RCOND_WARN_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("linear solve failed at ω = {omega}: {message}")]
    SolveFailure { omega: f64, message: String },
    #[error("truncation depth {k} out of range 0..={max}")]
    TruncationDepth { k: usize, max: usize },
    #[error("{what} requires N ≥ {needed}, ensemble has N = {n}")]
    EnsembleTooSmall {
        what: &'static str,
        needed: usize,
        n: usize,
    },
    #[error("frequency grid must be strictly ascending")]
    Grid,
}

/// Identity of the engine that produced a set of samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Engine {
    Dense,
    ContinuedFraction,
    /// Continued fraction terminated at excited depth `k`.
    Truncated(usize),
    /// Single `1/N`-expansion term: 0 → `d0`, 1 → `d1`, 2 → the `X²` part of `d2`.
    ExpansionTerm(usize),
    /// Partial sum of expansion terms through order `k`.
    ExpansionSum(usize),
    /// Dyson partial sum through walk order `m`.
    Dyson(usize),
}

impl Engine {
    /// Short file-name-safe label.
    pub fn label(&self) -> String {
        match self {
            Engine::Dense => "dense".into(),
            Engine::ContinuedFraction => "cf_full".into(),
            Engine::Truncated(k) => format!("trunc{k}"),
            Engine::ExpansionTerm(0) => "d0".into(),
            Engine::ExpansionTerm(1) => "d1".into(),
            Engine::ExpansionTerm(2) => "d2_x2".into(),
            Engine::ExpansionTerm(k) => format!("d{k}"),
            Engine::ExpansionSum(k) => match k {
                0 => "d0".into(),
                1 => "d0_plus_d1".into(),
                k => format!("d0_through_d{k}"),
            },
            Engine::Dyson(m) => format!("dyson{m}"),
        }
    }
}

/// A per-frequency conditioning warning from an inner resolvent solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondWarning {
    pub omega_index: usize,
    pub omega: f64,
    pub rcond: f64,
}

/// Complex Green's-function samples on a frequency grid.
#[derive(Debug, Clone)]
pub struct GreenResult {
    pub omegas: Vec<f64>,
    pub values: Vec<C64>,
    pub engine: Engine,
    pub spec_hash: String,
    pub warnings: Vec<CondWarning>,
}

impl GreenResult {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Largest pointwise relative difference `|a − b| / |b|` over a shared grid.
pub fn max_relative_difference(a: &GreenResult, b: &GreenResult) -> f64 {
    assert_eq!(a.omegas, b.omegas, "results must share a grid");
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).norm() / y.norm())
        .fold(0.0, f64::max)
}

fn check_grid(omegas: &[f64]) -> Result<(), EngineError> {
    if omegas.is_empty() || omegas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EngineError::Grid);
    }
    Ok(())
}

fn collect_green(
    spec: &EnsembleSpec,
    omegas: &[f64],
    engine: Engine,
    samples: Vec<(C64, f64)>,
) -> GreenResult {
    let warnings = samples
        .iter()
        .enumerate()
        .filter(|(_, (_, rcond))| *rcond < RCOND_WARN_THRESHOLD)
        .map(|(i, (_, rcond))| CondWarning {
            omega_index: i,
            omega: omegas[i],
            rcond: *rcond,
        })
        .collect();
    GreenResult {
        omegas: omegas.to_vec(),
        values: samples.into_iter().map(|(v, _)| v).collect(),
        engine,
        spec_hash: spec.fingerprint(),
        warnings,
    }
}

/// Ground-truth oracle: assemble the full chain matrix once and solve
/// `(ωI − H₁) x = e_vac` at every grid point.
pub fn dense_green(spec: &EnsembleSpec, omegas: &[f64]) -> Result<GreenResult, EngineError> {
    check_grid(omegas)?;
    let (h, vac) = assemble_dense_h1(spec, None)?;
    let dim = h.dim().0;
    let mut rhs = Array1::zeros(dim);
    rhs[vac] = C64::new(1.0, 0.0);

    let samples = omegas
        .par_iter()
        .map(|&omega| {
            let mut m = h.mapv(|z| -z);
            for i in 0..dim {
                m[(i, i)] += omega;
            }
            solve_single(&m, &rhs)
                .map(|x| (x[vac], 1.0))
                .map_err(|e| EngineError::SolveFailure {
                    omega,
                    message: e.to_string(),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(collect_green(spec, omegas, Engine::Dense, samples))
}

/// The photon self-energy `Σ_{e,0}(ω)` from the backward recursion.
///
/// `truncate_at = Some(k)` terminates with the bare resolvent of the excited
/// block at depth `k`; `None` runs the full chain, closing with the photon
/// block at depth `N`. The second return value is the smallest reciprocal
/// condition number met along the sweep.
pub fn self_energy_e0(
    spec: &EnsembleSpec,
    chain: &Chain,
    omega: f64,
    truncate_at: Option<usize>,
) -> Result<(C64, f64), EngineError> {
    let n = chain.depth();
    let kmax = truncate_at.unwrap_or(n - 1);
    debug_assert!(kmax < n);
    let z_ph = C64::new(omega, spec.cavity.kappa / 2.0);
    let z_e = C64::new(omega, spec.gamma / 2.0);
    let mut min_rcond = f64::INFINITY;

    let to_solve_err = |omega: f64| {
        move |e: ndarray_linalg::error::LinalgError| EngineError::SolveFailure {
            omega,
            message: e.to_string(),
        }
    };

    // Σ_ph at depth kmax+1, expressed in the excited space at depth kmax.
    let e_dim = chain.ops[kmax].h_e.len();
    let mut sigma: Array2<C64> = if truncate_at.is_some() {
        Array2::zeros((e_dim, e_dim))
    } else {
        let m = resolvent_denominator(z_ph, chain.h_ph(n), None);
        let step = self_energy_step(&chain.ops[n - 1].v_small, &m).map_err(to_solve_err(omega))?;
        min_rcond = min_rcond.min(step.rcond);
        step.value
    };

    for k in (0..=kmax).rev() {
        let ops = &chain.ops[k];
        let m_e = resolvent_denominator(z_e, &ops.h_e, Some(&sigma));
        let step = self_energy_step(&ops.v_big, &m_e).map_err(to_solve_err(omega))?;
        min_rcond = min_rcond.min(step.rcond);
        if k == 0 {
            return Ok((step.value[(0, 0)], min_rcond));
        }
        let m_ph = resolvent_denominator(z_ph, &ops.h_ph, Some(&step.value));
        let step_ph =
            self_energy_step(&chain.ops[k - 1].v_small, &m_ph).map_err(to_solve_err(omega))?;
        min_rcond = min_rcond.min(step_ph.rcond);
        sigma = step_ph.value;
    }
    unreachable!("loop returns at k = 0");
}

fn green_from_sigma(spec: &EnsembleSpec, omega: f64, sigma_e0: C64) -> C64 {
    1.0 / (C64::new(omega - spec.cavity.omega_ph, spec.cavity.kappa / 2.0) - sigma_e0)
}

fn cf_sweep(
    spec: &EnsembleSpec,
    omegas: &[f64],
    truncate_at: Option<usize>,
    engine: Engine,
) -> Result<GreenResult, EngineError> {
    check_grid(omegas)?;
    let chain = match truncate_at {
        Some(k) => Chain::build_to_depth(spec, k)?,
        None => Chain::build(spec)?,
    };
    let samples = omegas
        .par_iter()
        .map(|&omega| {
            self_energy_e0(spec, &chain, omega, truncate_at)
                .map(|(sigma, rcond)| (green_from_sigma(spec, omega, sigma), rcond))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(collect_green(spec, omegas, engine, samples))
}

/// Full matrix continued fraction, exact for finite `N`.
pub fn cf_full(spec: &EnsembleSpec, omegas: &[f64]) -> Result<GreenResult, EngineError> {
    cf_sweep(spec, omegas, None, Engine::ContinuedFraction)
}

/// Continued fraction terminated at excited depth `k`, accurate to `O(N^-k)`.
///
/// `k = 0` reproduces the zeroth-order expansion term exactly. At the deepest
/// admissible truncation `k = N−1` the closing photon block is retained, so
/// the result coincides with [`cf_full`].
pub fn cf_truncated(
    spec: &EnsembleSpec,
    omegas: &[f64],
    k: usize,
) -> Result<GreenResult, EngineError> {
    let n = spec.total_count();
    if k + 1 > n {
        return Err(EngineError::TruncationDepth { k, max: n - 1 });
    }
    let truncate_at = if k + 1 == n { None } else { Some(k) };
    cf_sweep(spec, omegas, truncate_at, Engine::Truncated(k))
}

/// Per-frequency quantities shared by the closed-form expansion terms.
struct ExpansionScratch {
    /// `d_{N,0}(ω)`.
    d0: C64,
    /// Diagonal of the bare excited resolvent at depth 0.
    g_e0: Vec<C64>,
}

fn bare_diag(z: C64, h: &[f64]) -> Vec<C64> {
    h.iter().map(|&e| 1.0 / (z - e)).collect()
}

/// `(C · diag(g) · C†)[0,0]` for a single-row coupling `C`.
fn sandwich_scalar(c: &Array2<C64>, g: &[C64]) -> C64 {
    c.row(0)
        .iter()
        .zip(g)
        .map(|(v, g)| v * g * v.conj())
        .sum()
}

fn expansion_scratch(spec: &EnsembleSpec, chain: &Chain, omega: f64) -> ExpansionScratch {
    let ops0 = &chain.ops[0];
    let g_e0 = bare_diag(C64::new(omega, spec.gamma / 2.0), &ops0.h_e);
    let s0 = sandwich_scalar(&ops0.v_big, &g_e0);
    ExpansionScratch {
        d0: green_from_sigma(spec, omega, s0),
        g_e0,
    }
}

/// Zeroth-order term of the `1/N` expansion: the thermodynamic-limit response,
/// `1/(ω − ω_ph + iκ/2 − V₀ G_{e,0} V₀†)`. Depends on `λ√N` only.
pub fn d0(spec: &EnsembleSpec, omegas: &[f64]) -> Result<GreenResult, EngineError> {
    check_grid(omegas)?;
    let chain = Chain::build_to_depth(spec, 0)?;
    let samples = omegas
        .par_iter()
        .map(|&omega| (expansion_scratch(spec, &chain, omega).d0, 1.0))
        .collect();
    Ok(collect_green(spec, omegas, Engine::ExpansionTerm(0), samples))
}

/// Denominator of the depth-1 photon resolvent dressed by the collective
/// coupling at depth 1: `(ω + iκ/2) − H_ph,1 − V₁ G_{e,1} V₁†`. Its poles are
/// the first-order polariton frequencies.
fn first_order_denominator(spec: &EnsembleSpec, chain: &Chain, omega: f64) -> Array2<C64> {
    let ops1 = &chain.ops[1];
    let g_e1 = bare_diag(C64::new(omega, spec.gamma / 2.0), &ops1.h_e);
    let mut scaled = ops1.v_big.clone();
    for (mut col, g) in scaled.columns_mut().into_iter().zip(&g_e1) {
        col.mapv_inplace(|v| v * g);
    }
    let dressed = scaled.dot(&ops1.v_big.mapv(|v| v.conj()).reversed_axes());
    resolvent_denominator(C64::new(omega, spec.cavity.kappa / 2.0), &ops1.h_ph, Some(&dressed))
}

fn require_depth_one(spec: &EnsembleSpec, what: &'static str) -> Result<(), EngineError> {
    let n = spec.total_count();
    if n < 2 {
        return Err(EngineError::EnsembleTooSmall { what, needed: 2, n });
    }
    Ok(())
}

/// First-order term of the `1/N` expansion: a vacuum-mediated Stokes /
/// anti-Stokes Raman round trip through the first-order polaritons, scaling
/// as `1/N` at fixed `λ√N`.
pub fn d1(spec: &EnsembleSpec, omegas: &[f64]) -> Result<GreenResult, EngineError> {
    check_grid(omegas)?;
    require_depth_one(spec, "d1")?;
    let chain = Chain::build_to_depth(spec, 1)?;
    let to_err = |omega: f64| {
        move |e: ndarray_linalg::error::LinalgError| EngineError::SolveFailure {
            omega,
            message: e.to_string(),
        }
    };
    let samples = omegas
        .par_iter()
        .map(|&omega| {
            let scratch = expansion_scratch(spec, &chain, omega);
            let ops0 = &chain.ops[0];
            let b1 = first_order_denominator(spec, &chain, omega);

            // rhs = v₀† G_{e,0} V₀†, a ph₁ column
            let w: Vec<C64> = ops0
                .v_big
                .row(0)
                .iter()
                .zip(&scratch.g_e0)
                .map(|(v, g)| g * v.conj())
                .collect();
            let ph1 = b1.dim().0;
            let mut rhs = Array1::zeros(ph1);
            for p in 0..ph1 {
                rhs[p] = (0..w.len())
                    .map(|e| ops0.v_small[(e, p)].conj() * w[e])
                    .sum();
            }
            let y = solve_single(&b1, &rhs).map_err(to_err(omega))?;

            // left factor V₀ G_{e,0} v₀, a ph₁ row
            let bracket: C64 = (0..ph1)
                .map(|p| {
                    let u: C64 = ops0
                        .v_big
                        .row(0)
                        .iter()
                        .zip(&scratch.g_e0)
                        .enumerate()
                        .map(|(e, (v, g))| v * g * ops0.v_small[(e, p)])
                        .sum();
                    u * y[p]
                })
                .sum();
            Ok((scratch.d0 * bracket * scratch.d0, 1.0))
        })
        .collect::<Result<Vec<_>, EngineError>>()?;
    Ok(collect_green(spec, omegas, Engine::ExpansionTerm(1), samples))
}

/// The `X²` part of the second-order expansion term,
/// `d0³·(V₀G_{e,0}XV₀†)² + d0²·(V₀G_{e,0}X²V₀†)` with
/// `X = v₀ G_ph,1 (I − V₁G_{e,1}V₁†G_ph,1)⁻¹ v₀† G_{e,0}`.
///
/// This is a partial second-order term (the depth-2 cascade has no closed
/// form); full `O(N⁻²)` spectra come from `cf_truncated(2)`. Scales as `1/N²`
/// at fixed `λ√N` and as `λ⁶` for small `λ` at fixed `N`.
pub fn d2_x2(spec: &EnsembleSpec, omegas: &[f64]) -> Result<GreenResult, EngineError> {
    check_grid(omegas)?;
    require_depth_one(spec, "d2_x2")?;
    let chain = Chain::build_to_depth(spec, 1)?;
    let to_err = |omega: f64| {
        move |e: ndarray_linalg::error::LinalgError| EngineError::SolveFailure {
            omega,
            message: e.to_string(),
        }
    };
    let samples = omegas
        .par_iter()
        .map(|&omega| {
            let scratch = expansion_scratch(spec, &chain, omega);
            let ops0 = &chain.ops[0];
            let b1 = first_order_denominator(spec, &chain, omega);
            let e0 = ops0.h_e.len();
            let ph1 = b1.dim().0;

            // X = v₀ B₁⁻¹ v₀† G_{e,0}, an e₀ × e₀ matrix
            let x = if ph1 == 0 {
                Array2::zeros((e0, e0))
            } else {
                let lu_rhs = ops0.v_small.mapv(|v| v.conj()).reversed_axes();
                let mut y = Array2::zeros((ph1, e0));
                for col in 0..e0 {
                    let rhs: Array1<C64> = lu_rhs.column(col).to_owned();
                    let sol = solve_single(&b1, &rhs).map_err(to_err(omega))?;
                    y.column_mut(col).assign(&sol);
                }
                let mut x = ops0.v_small.dot(&y);
                for (mut col, g) in x.columns_mut().into_iter().zip(&scratch.g_e0) {
                    col.mapv_inplace(|v| v * g);
                }
                x
            };

            let u: Vec<C64> = ops0
                .v_big
                .row(0)
                .iter()
                .zip(&scratch.g_e0)
                .map(|(v, g)| v * g)
                .collect();
            let c: Vec<C64> = ops0.v_big.row(0).iter().map(|v| v.conj()).collect();
            let quad = |m: &Array2<C64>| -> C64 {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..e0 {
                    for j in 0..e0 {
                        acc += u[i] * m[(i, j)] * c[j];
                    }
                }
                acc
            };
            let s1 = quad(&x);
            let s2 = quad(&x.dot(&x));
            let g = scratch.d0;
            Ok((g * g * g * s1 * s1 + g * g * s2, 1.0))
        })
        .collect::<Result<Vec<_>, EngineError>>()?;
    Ok(collect_green(spec, omegas, Engine::ExpansionTerm(2), samples))
}

/// Partial sum of the `1/N` expansion through order `k ≤ 2` (order 2 adds
/// only the `X²` part, which is all the expansion provides in closed form).
pub fn expansion_sum(
    spec: &EnsembleSpec,
    omegas: &[f64],
    k: usize,
) -> Result<GreenResult, EngineError> {
    let mut total = d0(spec, omegas)?;
    if k >= 1 {
        let t1 = d1(spec, omegas)?;
        for (v, w) in total.values.iter_mut().zip(&t1.values) {
            *v += w;
        }
    }
    if k >= 2 {
        let t2 = d2_x2(spec, omegas)?;
        for (v, w) in total.values.iter_mut().zip(&t2.values) {
            *v += w;
        }
    }
    if k > 2 {
        return Err(EngineError::TruncationDepth { k, max: 2 });
    }
    total.engine = Engine::ExpansionSum(k);
    Ok(total)
}
