//! Randomized cyclic permutation families.
//!
//! The builder draws a uniform relabeling `π` of the index set, splits the
//! relabeled indices into consecutive blocks of length `K + 1` and lets member
//! `k` shift every block cyclically by `k` places. Indices past the last full
//! block stay fixed. Conjugating by `π` keeps the cyclic group structure, so
//! member `r` composed with member `s` is member `(r + s) mod (K + 1)`.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Permutation, PermutationFamily, TwoWayPermutation};
use crate::rng;

/// Inputs of the cyclic family builder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclicFamilySpec {
    /// Distinct labels; output permutations act on positions of this list.
    pub index_set: Vec<usize>,
    pub num_perms: usize,
    pub seed: u64,
}

impl CyclicFamilySpec {
    pub fn new(index_set: Vec<usize>, num_perms: usize, seed: u64) -> Result<Self> {
        if num_perms == 0 {
            return Err(Error::InvalidArgument("number of permutations K must be >= 1".into()));
        }
        if index_set.is_empty() {
            return Err(Error::InvalidArgument("index set must be nonempty".into()));
        }
        let distinct: HashSet<_> = index_set.iter().collect();
        if distinct.len() != index_set.len() {
            return Err(Error::InvalidArgument("index set labels must be distinct".into()));
        }
        Ok(CyclicFamilySpec { index_set, num_perms, seed })
    }

    /// Index set `{1, .., n}`.
    pub fn range(n: usize, num_perms: usize, seed: u64) -> Result<Self> {
        Self::new((1..=n).collect(), num_perms, seed)
    }
}

/// The unrelabeled block shift, on 1-based positions.
pub fn block_shift(i: usize, k: usize, n: usize, num_perms: usize) -> usize {
    let period = num_perms + 1;
    let covered = period * (n / period);
    if i > covered || k == 0 {
        return i;
    }
    let residue = match i % period {
        0 => period,
        r => r,
    };
    if residue <= period - k {
        i + k
    } else {
        i - (period - k)
    }
}

/// `K + 1` permutations of the index positions; element 0 is the identity.
pub fn build_cyclic_family(spec: &CyclicFamilySpec) -> Vec<Permutation> {
    let n = spec.index_set.len();
    let k_max = spec.num_perms;

    // relabel[pos] is the 1-based rank assigned to position `pos`.
    let mut relabel: Vec<usize> = (1..=n).collect();
    let mut stream = rng::stream(spec.seed, "cyclic-relabel", 0);
    relabel.shuffle(&mut stream);
    let mut position_of = vec![0usize; n + 1];
    for (pos, &rank) in relabel.iter().enumerate() {
        position_of[rank] = pos;
    }

    (0..=k_max)
        .map(|k| {
            let images = (0..n)
                .map(|pos| position_of[block_shift(relabel[pos], k, n, k_max)])
                .collect();
            Permutation::from_images(images).expect("conjugated block shift is a bijection")
        })
        .collect()
}

/// Two independent cyclic families zipped memberwise into a two-way group.
pub fn build_two_way_group(
    n_rows: usize,
    n_cols: usize,
    num_perms: usize,
    seed: u64,
) -> Result<PermutationFamily> {
    two_way_group_on(n_rows, n_cols, num_perms, seed, 0)
}

/// The two-way group of block `block` (block 0 reproduces
/// [`build_two_way_group`] for the same seed).
pub(crate) fn two_way_group_on(
    n_rows: usize,
    n_cols: usize,
    num_perms: usize,
    seed: u64,
    block: u64,
) -> Result<PermutationFamily> {
    let rows = build_cyclic_family(&CyclicFamilySpec::range(
        n_rows,
        num_perms,
        rng::sub_seed(seed, "rows", block),
    )?);
    let cols = build_cyclic_family(&CyclicFamilySpec::range(
        n_cols,
        num_perms,
        rng::sub_seed(seed, "cols", block),
    )?);
    PermutationFamily::new(
        rows.into_iter()
            .zip(cols)
            .map(|(pi, sigma)| TwoWayPermutation::new(pi, sigma))
            .collect(),
    )
}

/// Cyclic family for axis `label` of block `block`, on `n` points.
pub(crate) fn axis_family(
    n: usize,
    num_perms: usize,
    seed: u64,
    label: &str,
    block: u64,
) -> Result<Vec<Permutation>> {
    Ok(build_cyclic_family(&CyclicFamilySpec::range(
        n,
        num_perms,
        rng::sub_seed(seed, label, block),
    )?))
}

/// True iff `family[0]` is the identity and every pairwise composition is a
/// member.
pub fn verify_group(family: &[Permutation]) -> bool {
    let Some(first) = family.first() else {
        return false;
    };
    if !first.is_identity() {
        return false;
    }
    let members: HashSet<&Permutation> = family.iter().collect();
    family.iter().all(|g| {
        family.iter().all(|h| match g.compose(h) {
            Ok(gh) => members.contains(&gh),
            Err(_) => false,
        })
    })
}

/// Group check for two-way families (closure of the pairs).
pub fn verify_two_way_group(family: &PermutationFamily) -> bool {
    let members = family.members();
    let set: HashSet<(&Permutation, &Permutation)> =
        members.iter().map(|g| (&g.pi, &g.sigma)).collect();
    members.iter().all(|g| {
        members.iter().all(|h| match (g.pi.compose(&h.pi), g.sigma.compose(&h.sigma)) {
            (Ok(p), Ok(s)) => set.contains(&(&p, &s)),
            _ => false,
        })
    })
}

/// True iff every non-identity member moves every index.
pub fn fixed_point_free(family: &[Permutation]) -> bool {
    family
        .iter()
        .filter(|g| !g.is_identity())
        .all(|g| g.fixed_points() == 0)
}

/// Default `K` for index sets of the given sizes.
///
/// Prefers the largest `K <= 99` with `K >= 19` such that `K + 1` divides
/// every size, then the same rule on the smallest size alone. Index sets too
/// small for any `K >= 19` get `K = n_min - 1`, the largest nontrivial choice;
/// everything else falls back to `K = 99` with tail fixing.
pub fn default_num_perms(sizes: &[usize]) -> usize {
    const K_MIN: usize = 19;
    const K_MAX: usize = 99;
    let best = |ns: &[usize]| {
        (K_MIN..=K_MAX)
            .rev()
            .find(|&k| ns.iter().all(|&n| n % (k + 1) == 0))
    };
    let n_min = sizes.iter().copied().filter(|&n| n > 0).min().unwrap_or(1);
    if let Some(k) = best(sizes).or_else(|| best(&[n_min])) {
        return k;
    }
    if n_min <= K_MIN {
        return n_min.saturating_sub(1).max(1);
    }
    K_MAX
}
