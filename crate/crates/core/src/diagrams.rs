//! Chain-walk enumeration for the Dyson series.
//!
//! The block tridiagonal chain is a path graph: photon and excited blocks
//! alternate, `V`-steps move within a block pair, `v`-steps (Raman) hop
//! between pairs. The order-`2m` Dyson term of the photon Green's function is
//! the sum over all closed `2m`-step walks from the vacuum photon block; each
//! walk evaluates to an ordered product of couplings and bare resolvents.
//! Walks that revisit the vacuum block in the interior factor into
//! lower-order pieces (reducible); the irreducible ones build the
//! self-energy.

use ndarray::Array1;
use rayon::prelude::*;

use crate::engines::{Engine, EngineError, GreenResult};
use crate::model::{BlockKind, Chain, EnsembleSpec};
use crate::C64;

/// One site of the chain: block kind plus depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChainNode {
    pub kind: BlockKind,
    pub depth: usize,
}

impl ChainNode {
    fn from_index(i: usize) -> Self {
        if i % 2 == 0 {
            ChainNode { kind: BlockKind::Photon, depth: i / 2 }
        } else {
            ChainNode { kind: BlockKind::Excited, depth: i / 2 }
        }
    }
}

/// A closed walk on the chain, starting and ending at the vacuum photon
/// block. Stored as linear chain indices (`0 = ph₀, 1 = e₀, 2 = ph₁, …`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Walk {
    indices: Vec<usize>,
}

/// Reducibility of a walk under the interior-return rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkClass {
    Reducible,
    Irreducible,
}

impl Walk {
    pub fn nodes(&self) -> Vec<ChainNode> {
        self.indices.iter().map(|&i| ChainNode::from_index(i)).collect()
    }

    /// Half the step count: the walk contributes at Dyson order `2m`.
    pub fn order(&self) -> usize {
        (self.indices.len() - 1) / 2
    }

    /// Number of Raman (`v`-type) steps.
    pub fn raman_steps(&self) -> usize {
        self.indices
            .windows(2)
            .filter(|w| {
                let lo = w[0].min(w[1]);
                lo % 2 == 1 // excited ↔ next photon
            })
            .count()
    }

    /// `1/N` suppression power at fixed collective coupling: half the Raman
    /// step count (always an integer on a closed walk).
    pub fn scaling_exponent(&self) -> usize {
        debug_assert_eq!(self.raman_steps() % 2, 0);
        self.raman_steps() / 2
    }

    /// Deepest photon block visited.
    pub fn max_photon_depth(&self) -> usize {
        self.indices.iter().filter(|i| *i % 2 == 0).max().unwrap() / 2
    }

    fn max_excited_depth(&self) -> Option<usize> {
        self.indices.iter().filter(|i| *i % 2 == 1).max().map(|i| i / 2)
    }

    /// True when the walk revisits the vacuum photon block at an interior
    /// position, i.e. it factors into lower-order walks.
    pub fn is_reducible(&self) -> bool {
        self.indices[1..self.indices.len() - 1].contains(&0)
    }

    /// Plain-text operator ladder, outermost propagators included, e.g.
    /// `Gph0·V0·Ge0·v0·Gph1·v0†·Ge0·V0†·Gph0`.
    pub fn ladder(&self) -> String {
        let prop = |i: usize| {
            if i % 2 == 0 {
                format!("Gph{}", i / 2)
            } else {
                format!("Ge{}", i / 2)
            }
        };
        let coupling = |a: usize, b: usize| {
            let d = a.min(b) / 2;
            match (a % 2 == 1, a < b) {
                (false, true) => format!("V{d}†"),  // photon d → excited d
                (true, false) => format!("V{d}"),   // excited d → photon d
                (true, true) => format!("v{d}†"),   // excited d → photon d+1
                (false, false) => format!("v{d}"),  // photon d+1 → excited d
            }
        };
        // assembled right to left, then reversed into operator order
        let mut tokens = vec![prop(0)];
        for w in self.indices.windows(2) {
            tokens.push(coupling(w[0], w[1]));
            tokens.push(prop(w[1]));
        }
        tokens.reverse();
        tokens.join("·")
    }
}

pub fn classify_walk(walk: &Walk) -> WalkClass {
    if walk.is_reducible() {
        WalkClass::Reducible
    } else {
        WalkClass::Irreducible
    }
}

/// All closed `2m`-step walks from the vacuum photon block, in lexicographic
/// order of the index sequence. Depth caps follow the chain for `n_molecules`
/// molecules: photon depth ≤ N, excited depth ≤ N−1.
pub fn enumerate_walks(m: usize, n_molecules: usize) -> Vec<Walk> {
    let max_index = 2 * n_molecules;
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(2 * m + 1);
    path.push(0usize);

    fn recurse(path: &mut Vec<usize>, remaining: usize, max_index: usize, out: &mut Vec<Walk>) {
        let here = *path.last().unwrap();
        if remaining == 0 {
            if here == 0 {
                out.push(Walk { indices: path.clone() });
            }
            return;
        }
        // cannot wander farther than the steps left to come home
        if here > remaining {
            return;
        }
        if here > 0 {
            path.push(here - 1);
            recurse(path, remaining - 1, max_index, out);
            path.pop();
        }
        if here + 1 <= max_index {
            path.push(here + 1);
            recurse(path, remaining - 1, max_index, out);
            path.pop();
        }
    }

    recurse(&mut path, 2 * m, max_index, &mut out);
    out
}

/// A walk with its evaluated Dyson-series contribution.
#[derive(Debug, Clone)]
pub struct WalkTerm {
    pub walk: Walk,
    pub ladder: String,
    pub value: C64,
    pub scaling_exponent: usize,
    pub reducible: bool,
}

fn propagator_diag(spec: &EnsembleSpec, chain: &Chain, node: usize, omega: f64) -> Array1<C64> {
    let depth = node / 2;
    if node % 2 == 0 {
        let z = C64::new(omega, spec.cavity.kappa / 2.0);
        chain.h_ph(depth).iter().map(|&h| 1.0 / (z - h)).collect()
    } else {
        let z = C64::new(omega, spec.gamma / 2.0);
        chain.ops[depth].h_e.iter().map(|&h| 1.0 / (z - h)).collect()
    }
}

fn walk_value(spec: &EnsembleSpec, chain: &Chain, walk: &Walk, omega: f64) -> C64 {
    let mut state = propagator_diag(spec, chain, 0, omega);
    for w in walk.indices.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = a.min(b) / 2;
        let next: Array1<C64> = match (a % 2 == 1, a < b) {
            // V_d†: photon d → excited d
            (false, true) => {
                let v = &chain.ops[d].v_big;
                (0..v.dim().1)
                    .map(|j| (0..v.dim().0).map(|i| v[(i, j)].conj() * state[i]).sum())
                    .collect()
            }
            // V_d: excited d → photon d
            (true, false) => chain.ops[d].v_big.dot(&state),
            // v_d†: excited d → photon d+1
            (true, true) => {
                let v = &chain.ops[d].v_small;
                (0..v.dim().1)
                    .map(|p| (0..v.dim().0).map(|e| v[(e, p)].conj() * state[e]).sum())
                    .collect()
            }
            // v_d: photon d+1 → excited d
            (false, false) => chain.ops[d].v_small.dot(&state),
        };
        let g = propagator_diag(spec, chain, b, omega);
        state = next * g;
    }
    state[0]
}

fn chain_for_walks(spec: &EnsembleSpec, walks: &[&Walk]) -> Result<Chain, EngineError> {
    let depth = walks
        .iter()
        .filter_map(|w| w.max_excited_depth())
        .max()
        .unwrap_or(0);
    Ok(Chain::build_to_depth(spec, depth)?)
}

/// Evaluate one walk at one frequency with bare block propagators.
pub fn evaluate_walk(
    spec: &EnsembleSpec,
    walk: &Walk,
    omega: f64,
) -> Result<WalkTerm, EngineError> {
    let chain = chain_for_walks(spec, &[walk])?;
    Ok(WalkTerm {
        ladder: walk.ladder(),
        value: walk_value(spec, &chain, walk, omega),
        scaling_exponent: walk.scaling_exponent(),
        reducible: walk.is_reducible(),
        walk: walk.clone(),
    })
}

/// Dyson partial sum `G_ph,0 + Σ_{m ≤ m_max} Σ_walks(2m)` on a grid. Walks are
/// enumerated once and summed in enumeration order for reproducibility; the
/// walk count grows Catalan-like, so desk-scale orders are `m_max ≲ 8`.
pub fn dyson_partial_sum(
    spec: &EnsembleSpec,
    omegas: &[f64],
    m_max: usize,
) -> Result<GreenResult, EngineError> {
    let n = spec.total_count();
    let walks: Vec<Walk> = (1..=m_max).flat_map(|m| enumerate_walks(m, n)).collect();
    let refs: Vec<&Walk> = walks.iter().collect();
    let chain = chain_for_walks(spec, &refs)?;
    let values: Vec<C64> = omegas
        .par_iter()
        .map(|&omega| {
            let bare = 1.0 / C64::new(omega - spec.cavity.omega_ph, spec.cavity.kappa / 2.0);
            walks
                .iter()
                .fold(bare, |acc, w| acc + walk_value(spec, &chain, w, omega))
        })
        .collect();
    Ok(GreenResult {
        omegas: omegas.to_vec(),
        values,
        engine: Engine::Dyson(m_max),
        spec_hash: spec.fingerprint(),
        warnings: Vec::new(),
    })
}
