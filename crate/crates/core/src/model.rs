//! Physical specification of the cavity-molecule ensemble and construction of
//! the block tridiagonal chain: basis enumeration, diagonal block energies,
//! collective (`V_n`) and single-molecule (`v_n`) couplings, and the dense
//! assembly of the full first-manifold matrix.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::Array2;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::C64;

/// Hard ceiling on the dense assembly dimension unless overridden.
pub const DEFAULT_DENSE_DIM_LIMIT: usize = 20_000;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid ensemble at {pointer}: {message}")]
    InvalidSpec { pointer: String, message: String },
    #[error("{kind:?} block depth {depth} out of range 0..={max}")]
    DepthOutOfRange {
        kind: BlockKind,
        depth: usize,
        max: usize,
    },
    #[error("total basis dimension {dim} exceeds the limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },
    #[error("ensemble configuration is not valid JSON: {0}")]
    Json(String),
}

/// Cavity mode: frequency and photon decay rate, `ħ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySpec {
    pub omega_ph: f64,
    pub kappa: f64,
}

/// One molecular species: `count` identical molecules, each with vibrational
/// ladders in the ground and excited electronic states and the Franck-Condon
/// overlap matrix `F[j'][j] = ⟨φ^(e)_j' | φ^(g)_j⟩` between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSpec {
    pub count: usize,
    pub ground_levels: Vec<f64>,
    pub excited_levels: Vec<f64>,
    /// `M_e × M_g`, row index is the excited vibrational level.
    #[serde(with = "fc_serde")]
    pub fc_overlaps: Array2<C64>,
}

impl SpeciesSpec {
    pub fn n_ground(&self) -> usize {
        self.ground_levels.len()
    }

    pub fn n_excited(&self) -> usize {
        self.excited_levels.len()
    }

    /// Ground vibrational energy of level `j` relative to level 0.
    pub fn ground_gap(&self, j: usize) -> f64 {
        self.ground_levels[j] - self.ground_levels[0]
    }

    /// Energy of excited vibronic level `j'` relative to the species ground state.
    pub fn excitation_energy(&self, j_e: usize) -> f64 {
        self.excited_levels[j_e] - self.ground_levels[0]
    }
}

/// The full ensemble: cavity, species list, single-molecule coupling `λ` and
/// excited-state linewidth `γ`. The collective coupling `λ√N` is derived.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSpec {
    pub cavity: CavitySpec,
    pub lambda: f64,
    pub gamma: f64,
    pub species: Vec<SpeciesSpec>,
}

/// Wire form of [`EnsembleSpec`]: `gamma` may be omitted, in which case it
/// defaults to `1e-3` of the first vibrational gap (or of `omega_ph` for
/// vibrationless species) so poles never sit on the real axis.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnsembleSpec {
    cavity: CavitySpec,
    lambda: f64,
    #[serde(default)]
    gamma: Option<f64>,
    species: Vec<SpeciesSpec>,
}

impl<'de> Deserialize<'de> for EnsembleSpec {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = RawEnsembleSpec::deserialize(de)?;
        let gamma = raw.gamma.unwrap_or_else(|| {
            let scale = raw
                .species
                .first()
                .and_then(|s| {
                    (s.ground_levels.len() > 1).then(|| s.ground_levels[1] - s.ground_levels[0])
                })
                .unwrap_or(raw.cavity.omega_ph);
            1e-3 * scale
        });
        let spec = EnsembleSpec {
            cavity: raw.cavity,
            lambda: raw.lambda,
            gamma,
            species: raw.species,
        };
        spec.validate().map_err(D::Error::custom)?;
        Ok(spec)
    }
}

impl EnsembleSpec {
    /// Total molecule count `N = Σ_s N_s`.
    pub fn total_count(&self) -> usize {
        self.species.iter().map(|s| s.count).sum()
    }

    /// Collective coupling `λ√N`.
    pub fn collective_coupling(&self) -> f64 {
        self.lambda * (self.total_count() as f64).sqrt()
    }

    /// Reference electronic transition, `ε_{e,0} − ε_{g,0}` of the first species.
    pub fn omega_e0(&self) -> f64 {
        self.species[0].excitation_energy(0)
    }

    /// Parse and validate an ensemble configuration. Errors carry a JSON
    /// pointer to the offending field; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = path_to_pointer(&e.path().to_string());
            ModelError::Json(format!("{} (at {})", e.inner(), pointer))
        })
    }

    /// Check every invariant; error messages name the offending field as a
    /// JSON pointer into the configuration schema.
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |pointer: &str, message: String| -> Result<(), ModelError> {
            Err(ModelError::InvalidSpec {
                pointer: pointer.to_string(),
                message,
            })
        };
        if !(self.cavity.omega_ph > 0.0) {
            return fail("/cavity/omega_ph", format!("must be > 0, got {}", self.cavity.omega_ph));
        }
        if !(self.cavity.kappa >= 0.0) {
            return fail("/cavity/kappa", format!("must be >= 0, got {}", self.cavity.kappa));
        }
        if !(self.lambda > 0.0) {
            return fail("/lambda", format!("must be > 0, got {}", self.lambda));
        }
        if !(self.gamma >= 0.0) {
            return fail("/gamma", format!("must be >= 0, got {}", self.gamma));
        }
        if self.species.is_empty() {
            return fail("/species", "at least one species is required".into());
        }
        for (i, sp) in self.species.iter().enumerate() {
            let at = |field: &str| format!("/species/{i}/{field}");
            if sp.count == 0 {
                return fail(&at("count"), "must be a positive integer".into());
            }
            if sp.ground_levels.is_empty() {
                return fail(&at("ground_levels"), "needs at least one level".into());
            }
            if sp.excited_levels.is_empty() {
                return fail(&at("excited_levels"), "needs at least one level".into());
            }
            if !strictly_increasing(&sp.ground_levels) {
                return fail(&at("ground_levels"), "must be strictly increasing".into());
            }
            if !strictly_increasing(&sp.excited_levels) {
                return fail(&at("excited_levels"), "must be strictly increasing".into());
            }
            let (me, mg) = sp.fc_overlaps.dim();
            if me != sp.n_excited() || mg != sp.n_ground() {
                return fail(
                    &at("fc_overlaps"),
                    format!(
                        "shape {me}×{mg} does not match M_e×M_g = {}×{}",
                        sp.n_excited(),
                        sp.n_ground()
                    ),
                );
            }
            for (j_e, row) in sp.fc_overlaps.rows().into_iter().enumerate() {
                let norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norm > 1.0 + 1e-12 {
                    return fail(
                        &at("fc_overlaps"),
                        format!("row {j_e} has norm {norm} > 1 (truncated-basis overlaps cannot exceed unit norm)"),
                    );
                }
            }
        }
        Ok(())
    }

    /// Stable identifier of the spec: FNV-1a over the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("spec serializes");
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in canonical.as_bytes() {
            hash ^= u64::from(*byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{hash:016x}")
    }
}

fn strictly_increasing(levels: &[f64]) -> bool {
    levels.windows(2).all(|w| w[0] < w[1])
}

fn path_to_pointer(path: &str) -> String {
    if path == "." {
        return "/".to_string();
    }
    let mut out = String::new();
    for segment in path.split('.') {
        // serde_path_to_error renders sequences as `field[idx]`
        if let Some(open) = segment.find('[') {
            out.push('/');
            out.push_str(&segment[..open]);
            for idx in segment[open..].split(['[', ']']).filter(|s| !s.is_empty()) {
                out.push('/');
                out.push_str(idx);
            }
        } else {
            out.push('/');
            out.push_str(segment);
        }
    }
    out
}

/// Serialize Franck-Condon matrices as nested arrays of `[re, im]` pairs;
/// accept bare reals on input.
mod fc_serde {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum FcEntry {
        Real(f64),
        Pair([f64; 2]),
    }

    impl FcEntry {
        fn value(&self) -> C64 {
            match self {
                FcEntry::Real(re) => C64::new(*re, 0.0),
                FcEntry::Pair([re, im]) => C64::new(*re, *im),
            }
        }
    }

    pub fn serialize<S: Serializer>(m: &Array2<C64>, ser: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = m
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
            .collect();
        rows.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Array2<C64>, D::Error> {
        let rows: Vec<Vec<FcEntry>> = Vec::deserialize(de)?;
        if rows.is_empty() {
            return Err(D::Error::custom("fc_overlaps must have at least one row"));
        }
        let ncols = rows[0].len();
        if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("fc_overlaps rows must be nonempty and equal length"));
        }
        let mut m = Array2::zeros((rows.len(), ncols));
        for (i, row) in rows.iter().enumerate() {
            for (j, entry) in row.iter().enumerate() {
                m[(i, j)] = entry.value();
            }
        }
        Ok(m)
    }
}

/// Which side of a chain block pair a basis belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockKind {
    /// One cavity photon, `n` molecules carrying ground-state phonons.
    Photon,
    /// No photon, one molecule excited, `n` spectator phonons.
    Excited,
}

/// Phonon occupation pattern of one chain configuration: map from channel
/// `(species, ground level j ≥ 1)` to the number of molecules parked there.
/// Zero occupations are never stored, so equal configurations compare equal
/// and the derived `Ord` is the canonical lexicographic basis order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PhononConfig {
    occupations: BTreeMap<(usize, usize), u32>,
}

impl PhononConfig {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Total phonon count, i.e. the chain depth of the block holding this
    /// configuration.
    pub fn order(&self) -> usize {
        self.occupations.values().map(|&n| n as usize).sum()
    }

    /// Phonons hosted by species `s`.
    pub fn species_total(&self, species: usize) -> usize {
        self.occupations
            .iter()
            .filter(|((s, _), _)| *s == species)
            .map(|(_, &n)| n as usize)
            .sum()
    }

    pub fn occupation(&self, species: usize, level: usize) -> u32 {
        self.occupations.get(&(species, level)).copied().unwrap_or(0)
    }

    /// New configuration with one more phonon in channel `(species, level)`.
    pub fn with_added(&self, species: usize, level: usize) -> Self {
        debug_assert!(level >= 1, "level 0 carries no phonon by convention");
        let mut occupations = self.occupations.clone();
        *occupations.entry((species, level)).or_insert(0) += 1;
        Self { occupations }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.occupations.iter().map(|(&(s, j), &n)| (s, j, n))
    }
}

impl fmt::Display for PhononConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.occupations.is_empty() {
            return write!(f, "∅");
        }
        let parts: Vec<String> = self
            .iter()
            .map(|(s, j, n)| format!("{n}×(s{s},g{j})"))
            .collect();
        write!(f, "{}", parts.join("+"))
    }
}

/// Which molecule is electronically excited: species index and excited
/// vibrational level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExcitedLabel {
    pub species: usize,
    pub level: usize,
}

/// One basis state of a chain block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockState {
    Photon(PhononConfig),
    Excited(PhononConfig, ExcitedLabel),
}

impl BlockState {
    pub fn config(&self) -> &PhononConfig {
        match self {
            BlockState::Photon(c) => c,
            BlockState::Excited(c, _) => c,
        }
    }
}

/// Ordered basis of one chain block at a given depth.
#[derive(Debug, Clone)]
pub struct BlockBasis {
    pub kind: BlockKind,
    pub depth: usize,
    pub states: Vec<BlockState>,
}

impl BlockBasis {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Photon configurations in basis order; panics on an excited basis.
    pub fn configs(&self) -> impl Iterator<Item = &PhononConfig> {
        self.states.iter().map(|s| match s {
            BlockState::Photon(c) => c,
            BlockState::Excited(..) => panic!("photon basis expected"),
        })
    }

    /// `(config, excited label)` pairs in basis order; panics on a photon basis.
    pub fn excited_states(&self) -> impl Iterator<Item = (&PhononConfig, ExcitedLabel)> {
        self.states.iter().map(|s| match s {
            BlockState::Excited(c, l) => (c, *l),
            BlockState::Photon(_) => panic!("excited basis expected"),
        })
    }
}

/// All phonon channels `(species, ground level ≥ 1)` in canonical order.
fn channels(spec: &EnsembleSpec) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (s, sp) in spec.species.iter().enumerate() {
        for j in 1..sp.n_ground() {
            out.push((s, j));
        }
    }
    out
}

/// Enumerate every admissible configuration of `depth` phonons over the
/// channel list, respecting the per-species molecule counts.
fn enumerate_configs(spec: &EnsembleSpec, depth: usize) -> Vec<PhononConfig> {
    let chans = channels(spec);
    let mut out = Vec::new();
    let mut per_species = vec![0usize; spec.species.len()];
    let mut current = Vec::<((usize, usize), u32)>::new();

    fn recurse(
        spec: &EnsembleSpec,
        chans: &[(usize, usize)],
        idx: usize,
        remaining: usize,
        per_species: &mut [usize],
        current: &mut Vec<((usize, usize), u32)>,
        out: &mut Vec<PhononConfig>,
    ) {
        if remaining == 0 {
            let occupations = current.iter().copied().collect();
            out.push(PhononConfig { occupations });
            return;
        }
        if idx == chans.len() {
            return;
        }
        let (s, j) = chans[idx];
        let cap = spec.species[s].count - per_species[s];
        for occ in 0..=remaining.min(cap) {
            if occ > 0 {
                per_species[s] += occ;
                current.push(((s, j), occ as u32));
            }
            recurse(spec, chans, idx + 1, remaining - occ, per_species, current, out);
            if occ > 0 {
                per_species[s] -= occ;
                current.pop();
            }
        }
    }

    recurse(spec, &chans, 0, depth, &mut per_species, &mut current, &mut out);
    out.sort();
    out
}

/// Enumerate the basis of one chain block in the canonical deterministic
/// order: configurations sorted lexicographically in `(species, level,
/// occupation)`, then (for excited blocks) by the excited label `(s, j')`.
///
/// An over-constrained depth yields an empty basis, not an error; a depth
/// outside the chain range is an error.
pub fn enumerate_block_basis(
    spec: &EnsembleSpec,
    depth: usize,
    kind: BlockKind,
) -> Result<BlockBasis, ModelError> {
    let n_total = spec.total_count();
    let max = match kind {
        BlockKind::Photon => n_total,
        BlockKind::Excited => n_total - 1,
    };
    if depth > max {
        return Err(ModelError::DepthOutOfRange { kind, depth, max });
    }
    let configs = enumerate_configs(spec, depth);
    let states = match kind {
        BlockKind::Photon => configs.into_iter().map(BlockState::Photon).collect(),
        BlockKind::Excited => {
            let mut states = Vec::new();
            for config in configs {
                for (s, sp) in spec.species.iter().enumerate() {
                    if config.species_total(s) + 1 > sp.count {
                        continue;
                    }
                    for j_e in 0..sp.n_excited() {
                        states.push(BlockState::Excited(
                            config.clone(),
                            ExcitedLabel { species: s, level: j_e },
                        ));
                    }
                }
            }
            states
        }
    };
    Ok(BlockBasis { kind, depth, states })
}

/// Diagonal block energies and off-diagonal couplings at one chain depth `n`:
/// `h_ph` over the photon basis, `h_e` over the excited basis, `V` (photon_n ×
/// excited_n) and `v` (excited_n × photon_{n+1}). All energies are referenced
/// to the all-ground initial state.
#[derive(Debug, Clone)]
pub struct BlockOperators {
    pub depth: usize,
    pub h_ph: Vec<f64>,
    pub h_e: Vec<f64>,
    pub v_big: Array2<C64>,
    pub v_small: Array2<C64>,
}

fn photon_diagonal(spec: &EnsembleSpec, basis: &BlockBasis) -> Vec<f64> {
    basis
        .configs()
        .map(|c| {
            spec.cavity.omega_ph
                + c.iter()
                    .map(|(s, j, n)| spec.species[s].ground_gap(j) * n as f64)
                    .sum::<f64>()
        })
        .collect()
}

fn excited_diagonal(spec: &EnsembleSpec, basis: &BlockBasis) -> Vec<f64> {
    basis
        .excited_states()
        .map(|(c, label)| {
            spec.species[label.species].excitation_energy(label.level)
                + c.iter()
                    .map(|(s, j, n)| spec.species[s].ground_gap(j) * n as f64)
                    .sum::<f64>()
        })
        .collect()
}

/// Build the blocks at depth `n` (valid for `0 ≤ n ≤ N−1`; the closing photon
/// block at depth `N` has no excited partner and is handled by the assembly).
///
/// Couplings are stored with a positive global sign; every physical
/// self-energy or Dyson term contains an even number of coupling factors, so
/// observables do not depend on this gauge.
pub fn build_block_operators(spec: &EnsembleSpec, depth: usize) -> Result<BlockOperators, ModelError> {
    let ph = enumerate_block_basis(spec, depth, BlockKind::Photon)?;
    let ex = enumerate_block_basis(spec, depth, BlockKind::Excited)?;
    let ph_next = enumerate_block_basis(spec, depth + 1, BlockKind::Photon)?;

    let h_ph = photon_diagonal(spec, &ph);
    let h_e = excited_diagonal(spec, &ex);

    // Rayleigh couplings: the photon promotes a phonon-free molecule of
    // species s from ground level 0, leaving the phonon pattern unchanged.
    let mut v_big = Array2::zeros((ph.dim(), ex.dim()));
    let ph_configs: Vec<&PhononConfig> = ph.configs().collect();
    for (col, (config, label)) in ex.excited_states().enumerate() {
        if let Ok(row) = ph_configs.binary_search_by(|c| (*c).cmp(config)) {
            let sp = &spec.species[label.species];
            let free = (sp.count - config.species_total(label.species)) as f64;
            v_big[(row, col)] = spec.lambda * free.sqrt() * sp.fc_overlaps[(label.level, 0)];
        }
    }

    // Raman couplings: the excited molecule emits the photon back while
    // landing on ground level j ≥ 1, adding one phonon to its own species.
    let next_configs: Vec<&PhononConfig> = ph_next.configs().collect();
    let mut v_small = Array2::zeros((ex.dim(), ph_next.dim()));
    for (row, (config, label)) in ex.excited_states().enumerate() {
        let sp = &spec.species[label.species];
        for j in 1..sp.n_ground() {
            let target = config.with_added(label.species, j);
            if let Ok(col) = next_configs.binary_search_by(|c| (*c).cmp(&target)) {
                let boson = (config.occupation(label.species, j) + 1) as f64;
                v_small[(row, col)] =
                    spec.lambda * boson.sqrt() * sp.fc_overlaps[(label.level, j)].conj();
            }
        }
    }

    Ok(BlockOperators {
        depth,
        h_ph,
        h_e,
        v_big,
        v_small,
    })
}

/// Every block of the chain, built once and shared by the engines.
#[derive(Debug, Clone)]
pub struct Chain {
    pub ops: Vec<BlockOperators>,
    /// Diagonal of the closing photon block at depth `N`.
    pub h_ph_final: Vec<f64>,
}

impl Chain {
    pub fn build(spec: &EnsembleSpec) -> Result<Self, ModelError> {
        Self::build_to_depth(spec, spec.total_count() - 1)
    }

    /// Build blocks for depths `0..=max_excited_depth` plus the photon block
    /// one past it. Truncated engines use this to avoid enumerating deep
    /// blocks they never touch.
    pub fn build_to_depth(spec: &EnsembleSpec, max_excited_depth: usize) -> Result<Self, ModelError> {
        let ops = (0..=max_excited_depth)
            .map(|n| build_block_operators(spec, n))
            .collect::<Result<Vec<_>, _>>()?;
        let final_basis =
            enumerate_block_basis(spec, max_excited_depth + 1, BlockKind::Photon)?;
        let h_ph_final = photon_diagonal(spec, &final_basis);
        Ok(Self { ops, h_ph_final })
    }

    pub fn depth(&self) -> usize {
        self.ops.len()
    }

    pub fn h_ph(&self, n: usize) -> &[f64] {
        if n < self.ops.len() {
            &self.ops[n].h_ph
        } else {
            debug_assert_eq!(n, self.ops.len());
            &self.h_ph_final
        }
    }
}

/// Assemble the full non-Hermitian first-manifold matrix with losses on the
/// diagonal (`−iκ/2` on photon states, `−iγ/2` on excited states), blocks
/// interleaved `ph_0, e_0, ph_1, e_1, …` up to `max_depth` (default: the full
/// chain). Returns the matrix and the row index of the photon vacuum state.
pub fn assemble_dense_h1(
    spec: &EnsembleSpec,
    max_depth: Option<usize>,
) -> Result<(Array2<C64>, usize), ModelError> {
    assemble_dense_h1_with_limit(spec, max_depth, DEFAULT_DENSE_DIM_LIMIT)
}

pub fn assemble_dense_h1_with_limit(
    spec: &EnsembleSpec,
    max_depth: Option<usize>,
    limit: usize,
) -> Result<(Array2<C64>, usize), ModelError> {
    let n_total = spec.total_count();
    let cap = max_depth.unwrap_or(n_total).min(n_total);
    let chain = Chain::build_to_depth(spec, cap.min(n_total - 1))?;
    let include_final = cap == n_total;

    let mut dims = Vec::new();
    for ops in &chain.ops {
        dims.push(ops.h_ph.len());
        dims.push(ops.h_e.len());
    }
    if include_final {
        dims.push(chain.h_ph_final.len());
    }
    let dim: usize = dims.iter().sum();
    if dim > limit {
        return Err(ModelError::DimensionLimit { dim, limit });
    }

    let offsets: Vec<usize> = dims
        .iter()
        .scan(0, |acc, d| {
            let start = *acc;
            *acc += d;
            Some(start)
        })
        .collect();

    let kappa_shift = C64::new(0.0, -spec.cavity.kappa / 2.0);
    let gamma_shift = C64::new(0.0, -spec.gamma / 2.0);

    let mut h = Array2::zeros((dim, dim));
    for (k, ops) in chain.ops.iter().enumerate() {
        let ph_off = offsets[2 * k];
        let e_off = offsets[2 * k + 1];
        for (i, &e) in ops.h_ph.iter().enumerate() {
            h[(ph_off + i, ph_off + i)] = C64::new(e, 0.0) + kappa_shift;
        }
        for (i, &e) in ops.h_e.iter().enumerate() {
            h[(e_off + i, e_off + i)] = C64::new(e, 0.0) + gamma_shift;
        }
        for ((i, j), &val) in ops.v_big.indexed_iter() {
            h[(ph_off + i, e_off + j)] = val;
            h[(e_off + j, ph_off + i)] = val.conj();
        }
        let has_next = 2 * k + 2 < dims.len();
        if has_next {
            let next_off = offsets[2 * k + 2];
            for ((i, j), &val) in ops.v_small.indexed_iter() {
                h[(e_off + i, next_off + j)] = val;
                h[(next_off + j, e_off + i)] = val.conj();
            }
        }
    }
    if include_final {
        let off = *offsets.last().unwrap();
        for (i, &e) in chain.h_ph_final.iter().enumerate() {
            h[(off + i, off + i)] = C64::new(e, 0.0) + kappa_shift;
        }
    }
    Ok((h, 0))
}
