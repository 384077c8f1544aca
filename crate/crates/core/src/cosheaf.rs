//! Margin precosheaves over a cofiltered cover of the subprogram axis.
//!
//! The subprogram indexes `1..=N` are covered by a descending chain of sets
//! `U0 ⊇ U1 ⊇ ... ⊇ UN`, where `Ur = {r, r+1, ..., N}` for `r >= 1` and `U0`
//! contains every index (it stands for the whole real line). Index `k` lies in
//! `Ur` exactly when `r <= k`.
//!
//! Two precosheaves read a margin profile through this cover: the *deficit*
//! precosheaf assigns to a set the deficit margin of its distinguished
//! subprogram, the *surplus* precosheaf its surplus margin. The distinguished
//! subprogram of a set is its minimal member — the most upstream subprogram
//! the set can see. Neither assignment is a cosheaf in general (gluing fails
//! as soon as a downstream margin is shadowed by an upstream one), which is
//! exactly why the chain data below carries information: the degree-k term of
//! the cover's chain complex is the evaluation at `Uk`, so margins enter the
//! complex at the degree of their subprogram and can be located by comparing
//! consecutive degrees.
//!
//! `phi_projection` describes the canonical full-rank projection from degree
//! `k` of the complex to degree `k` of the once-shifted complex, and
//! `cone_homology_dim` reads off the kernel dimension that the mapping cone
//! of that projection sees: in `absolute` mode against a zero codomain (the
//! full margin at `k`), in `incremental` mode against the previous degree
//! (the margin *created* at `k`). For profiles in which no two consecutive
//! subprograms carry the same kind of margin the two modes agree.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataflow::MarginProfile;

/// Which side of the margin a precosheaf reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CosheafKind {
    /// Deficit margins: where the network under-delivers.
    Error,
    /// Surplus margins: where the network over-delivers.
    Fix,
}

impl CosheafKind {
    fn margin(&self, profile: &MarginProfile, index: usize) -> u64 {
        match self {
            CosheafKind::Error => profile.deficit(index),
            CosheafKind::Fix => profile.surplus(index),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CosheafError {
    #[error("profile covers {profile} subprograms but the cover was built for {cover}")]
    ProfileSizeMismatch { profile: usize, cover: usize },
    #[error("degree {k} is out of range 1..={n}")]
    DegreeOutOfRange { k: usize, n: usize },
    #[error("malformed subcover: {0}")]
    MalformedSubcover(String),
}

/// The descending cover `U0 ⊇ U1 ⊇ ... ⊇ UN` of `N` subprogram indexes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CofilteredCover {
    n: usize,
    sets: Vec<BTreeSet<usize>>,
}

impl CofilteredCover {
    pub fn subprogram_count(&self) -> usize {
        self.n
    }

    /// `Ur`, for `0 <= r <= N`.
    pub fn set(&self, r: usize) -> Option<&BTreeSet<usize>> {
        self.sets.get(r)
    }

    pub fn sets(&self) -> &[BTreeSet<usize>] {
        &self.sets
    }

    /// Membership rule: index `k` lies in `Ur` iff `r <= k`.
    pub fn contains(&self, r: usize, k: usize) -> bool {
        k >= 1 && k <= self.n && r <= k
    }
}

/// Build the cover for `n` subprograms. `U0` and `U1` both contain every
/// index (`U0` additionally stands for all points outside `1..=n`, which
/// carry no margin data); each later set drops the smallest remaining index.
pub fn build_cover(n: usize) -> CofilteredCover {
    let sets = (0..=n)
        .map(|r| (r.max(1)..=n).collect::<BTreeSet<usize>>())
        .collect();
    CofilteredCover { n, sets }
}

/// The distinguished subprogram of an index set: its minimal member, i.e.
/// the largest element in the reverse ordering the cover descends along.
pub fn distinguished_index(set: &BTreeSet<usize>) -> Option<usize> {
    set.iter().next().copied()
}

/// Evaluate a margin precosheaf on an arbitrary index set: the chosen margin
/// of the set's distinguished subprogram. The empty set evaluates to 0.
pub fn evaluate_precosheaf(kind: CosheafKind, profile: &MarginProfile, set: &BTreeSet<usize>) -> u64 {
    match distinguished_index(set) {
        Some(p) => kind.margin(profile, p),
        None => 0,
    }
}

/// Dimension data of the cover's chain complex for one precosheaf.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainData {
    pub kind: CosheafKind,
    /// `chain_dims[k]` = evaluation at `Uk`, for `k = 0..=N`.
    pub chain_dims: Vec<u64>,
    /// `boundary_ranks[k]` = rank of the canonical full-rank boundary map
    /// `C_k -> C_(k-1)`, i.e. `min(chain_dims[k], chain_dims[k-1])`;
    /// entry 0 is the zero map below degree 0.
    pub boundary_ranks: Vec<u64>,
}

/// Evaluate the precosheaf at every cover set and record the canonical
/// boundary ranks.
pub fn cech_chain_data(
    kind: CosheafKind,
    profile: &MarginProfile,
    cover: &CofilteredCover,
) -> Result<ChainData, CosheafError> {
    if profile.len() != cover.subprogram_count() {
        return Err(CosheafError::ProfileSizeMismatch {
            profile: profile.len(),
            cover: cover.subprogram_count(),
        });
    }
    let chain_dims: Vec<u64> = cover
        .sets()
        .iter()
        .map(|u| evaluate_precosheaf(kind, profile, u))
        .collect();
    let mut boundary_ranks = vec![0u64];
    for k in 1..chain_dims.len() {
        boundary_ranks.push(chain_dims[k].min(chain_dims[k - 1]));
    }
    Ok(ChainData { kind, chain_dims, boundary_ranks })
}

/// Homology dimensions of the chain complex, degree by degree.
///
/// Boundary maps are the canonical full-rank ones, with ranks truncated in
/// increasing degree so consecutive composites vanish (the image of each
/// boundary must fit inside the kernel of the one below). Rank–nullity then
/// gives `H_k = C_k - rank(d_k) - rank(d_(k+1))`.
pub fn cech_homology_dims(data: &ChainData) -> Vec<u64> {
    let dims = &data.chain_dims;
    let n = dims.len();
    let mut eff = vec![0u64; n + 1]; // eff[k] = truncated rank of d_k; eff[0] = eff[n] .. zero ends
    for k in 1..n {
        let room = dims[k - 1] - eff[k - 1];
        eff[k] = data.boundary_ranks[k].min(room);
    }
    (0..n)
        .map(|k| dims[k] - eff[k] - if k + 1 < n { eff[k + 1] } else { 0 })
        .collect()
}

/// Dimension-level audit of the gluing sequence
/// `⊕ F(Ui ∩ Uj) -> ⊕ F(Ui) -> F(U) -> 0`
/// for one set `U` and a finite subcover of it.
///
/// The intersection term carries one summand per *ordered* pair `i != j` —
/// one per leg of the gluing diagram. With every corestriction taken as the
/// canonical full-rank coordinate map, dimension-level exactness demands that
/// the fold map onto `F(U)` be surjective and that its kernel be exactly the
/// (split-injective) intersection term: `dim ⊕F(Ui) - dim F(U) = dim ⊕F(Ui∩Uj)`.
/// Returns `Ok(false)` when gluing fails — the generic situation for these
/// precosheaves whenever pieces carry margins their union's distinguished
/// subprogram does not see.
pub fn cosheaf_axiom_check(
    kind: CosheafKind,
    profile: &MarginProfile,
    u: &BTreeSet<usize>,
    subcover: &[BTreeSet<usize>],
) -> Result<bool, CosheafError> {
    if subcover.is_empty() {
        return Err(CosheafError::MalformedSubcover("subcover is empty".into()));
    }
    let union: BTreeSet<usize> = subcover.iter().flatten().copied().collect();
    if &union != u {
        return Err(CosheafError::MalformedSubcover(format!(
            "subcover unions to {union:?}, not to the covered set {u:?}"
        )));
    }

    let target = evaluate_precosheaf(kind, profile, u);
    let pieces: u64 = subcover
        .iter()
        .map(|ui| evaluate_precosheaf(kind, profile, ui))
        .sum();
    let mut intersections = 0u64;
    for (a, ui) in subcover.iter().enumerate() {
        for (b, uj) in subcover.iter().enumerate() {
            if a == b {
                continue;
            }
            let meet: BTreeSet<usize> = ui.intersection(uj).copied().collect();
            intersections += evaluate_precosheaf(kind, profile, &meet);
        }
    }

    let surjective = pieces >= target;
    let kernel_matches = surjective && pieces - target == intersections;
    Ok(surjective && kernel_matches)
}

/// Shape of the canonical projection from degree `k` of the chain complex to
/// degree `k` of the once-shifted complex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapDescriptor {
    pub degree: usize,
    pub domain_dim: u64,
    pub codomain_dim: u64,
    /// Canonical full-rank: `min(domain_dim, codomain_dim)`.
    pub rank: u64,
}

/// Describe the degree-`k` projection (`1 <= k <= N`): domain is the chain
/// dimension at `k`, codomain the chain dimension at `k-1` (the shifted
/// complex's degree-`k` term).
pub fn phi_projection(
    kind: CosheafKind,
    profile: &MarginProfile,
    k: usize,
) -> Result<MapDescriptor, CosheafError> {
    let n = profile.len();
    if k == 0 || k > n {
        return Err(CosheafError::DegreeOutOfRange { k, n });
    }
    let data = cech_chain_data(kind, profile, &build_cover(n))?;
    let domain_dim = data.chain_dims[k];
    let codomain_dim = data.chain_dims[k - 1];
    Ok(MapDescriptor { degree: k, domain_dim, codomain_dim, rank: domain_dim.min(codomain_dim) })
}

/// How the mapping-cone kernel at a degree is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    /// Kernel against a zero codomain: the full margin at `k`.
    #[default]
    Absolute,
    /// Kernel of the projection onto the previous degree: the margin newly
    /// created at `k`, i.e. `max(C_k - C_(k-1), 0)`.
    Incremental,
}

/// Mapping-cone kernel dimension at degree `k` (`1 <= k <= N`).
///
/// `absolute` returns the full chain dimension at `k`; it is nonzero exactly
/// at the subprograms carrying the relevant margin. `incremental` quotients
/// by the previous degree; at `k = 1` there is no previous subprogram (the
/// degree-0 term merely echoes `U1`), so the quotient is by zero and the two
/// modes coincide there. `absolute >= incremental` always, with equality at
/// every degree whenever no two consecutive subprograms carry the same kind
/// of margin.
pub fn cone_homology_dim(
    kind: CosheafKind,
    profile: &MarginProfile,
    k: usize,
    mode: KernelMode,
) -> Result<u64, CosheafError> {
    let n = profile.len();
    if k == 0 || k > n {
        return Err(CosheafError::DegreeOutOfRange { k, n });
    }
    let data = cech_chain_data(kind, profile, &build_cover(n))?;
    let dim = match mode {
        KernelMode::Absolute => data.chain_dims[k],
        KernelMode::Incremental => {
            if k == 1 {
                data.chain_dims[1]
            } else {
                data.chain_dims[k].saturating_sub(data.chain_dims[k - 1])
            }
        }
    };
    Ok(dim)
}
