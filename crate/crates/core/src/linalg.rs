//! Thin helpers over LAPACK-backed dense solves. Inner resolvents are always
//! applied through LU solves with partial pivoting, never explicit inversion.

use ndarray::{Array1, Array2};
use ndarray_linalg::error::LinalgError;
use ndarray_linalg::{Eig, Factorize, ReciprocalConditionNum, Solve};

use crate::C64;

/// Outcome of applying `C (M)^{-1} C†` by factoring `M` once and solving
/// against the columns of `C†`.
pub(crate) struct SelfEnergyStep {
    pub value: Array2<C64>,
    pub rcond: f64,
}

/// `M = diag(omega_shifted − h) − sigma_inner`, the inner-resolvent denominator.
pub(crate) fn resolvent_denominator(
    omega_shifted: C64,
    h_diag: &[f64],
    sigma_inner: Option<&Array2<C64>>,
) -> Array2<C64> {
    let dim = h_diag.len();
    let mut m = match sigma_inner {
        Some(s) => {
            debug_assert_eq!(s.dim(), (dim, dim));
            s.mapv(|z| -z)
        }
        None => Array2::zeros((dim, dim)),
    };
    for (i, &h) in h_diag.iter().enumerate() {
        m[(i, i)] += omega_shifted - h;
    }
    m
}

/// `coupling · M^{-1} · coupling†` for a rectangular `coupling` (outer × inner).
pub(crate) fn self_energy_step(
    coupling: &Array2<C64>,
    m: &Array2<C64>,
) -> Result<SelfEnergyStep, LinalgError> {
    let (outer, inner) = coupling.dim();
    if inner == 0 || outer == 0 {
        return Ok(SelfEnergyStep {
            value: Array2::zeros((outer, outer)),
            rcond: 1.0,
        });
    }
    let lu = m.factorize()?;
    let rcond = lu.rcond()?;
    // columns of C† are the conjugated rows of C
    let mut x = Array2::zeros((inner, outer));
    for row in 0..outer {
        let rhs: Array1<C64> = coupling.row(row).mapv(|z| z.conj());
        let sol = lu.solve(&rhs)?;
        x.column_mut(row).assign(&sol);
    }
    Ok(SelfEnergyStep {
        value: coupling.dot(&x),
        rcond,
    })
}

/// Solve `M x = b` once (used by the dense oracle).
pub(crate) fn solve_single(m: &Array2<C64>, b: &Array1<C64>) -> Result<Array1<C64>, LinalgError> {
    m.solve(b)
}

/// Eigenvalues of a small dense non-Hermitian complex matrix, sorted by real
/// part (then imaginary part) for deterministic output.
pub(crate) fn eigenvalues_sorted(m: &Array2<C64>) -> Result<Vec<C64>, LinalgError> {
    if m.dim().0 == 0 {
        return Ok(Vec::new());
    }
    let (vals, _vecs) = m.eig()?;
    let mut out: Vec<C64> = vals.to_vec();
    out.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn self_energy_step_matches_direct_inverse_on_a_scalar() {
        // C (m)^{-1} C† with everything 1×1
        let coupling = array![[C64::new(0.3, 0.1)]];
        let m = array![[C64::new(2.0, -0.5)]];
        let step = self_energy_step(&coupling, &m).unwrap();
        let expected = C64::new(0.3, 0.1) * C64::new(0.3, -0.1) / C64::new(2.0, -0.5);
        assert!((step.value[(0, 0)] - expected).norm() < 1e-15);
    }

    #[test]
    fn empty_inner_space_contributes_nothing() {
        let coupling = Array2::<C64>::zeros((2, 0));
        let m = Array2::<C64>::zeros((0, 0));
        let step = self_energy_step(&coupling, &m).unwrap();
        assert_eq!(step.value.dim(), (2, 2));
        assert!(step.value.iter().all(|z| z.norm() == 0.0));
    }
}
