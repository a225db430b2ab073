//! Concatenation of product-form permutation families over disjoint blocks of
//! stacked rows.
//!
//! A block occupies a contiguous range of stacked rows, laid out row-major over
//! its axes. Member `k` of the concatenated family applies member `k` of every
//! axis family inside each block and leaves rows outside all blocks fixed.
//! Since every axis family is cyclic of order `K + 1` with member 0 the
//! identity, the concatenation is again a cyclic group of order `K + 1`.

use crate::error::{Error, Result};
use crate::model::Permutation;

/// One block of the stacked data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxisBlock {
    /// First stacked row of the block.
    pub offset: usize,
    /// `axes[a][k]` is member `k` of the family on axis `a`.
    pub axes: Vec<Vec<Permutation>>,
}

impl AxisBlock {
    pub fn new(offset: usize, axes: Vec<Vec<Permutation>>) -> Result<Self> {
        let k1 = axes.first().map(Vec::len).unwrap_or(0);
        if k1 == 0 || axes.iter().any(|a| a.len() != k1 || a.is_empty()) {
            return Err(Error::InvalidArgument(
                "every axis family of a block needs the same nonzero number of members".into(),
            ));
        }
        for family in &axes {
            let n = family[0].len();
            if !family[0].is_identity() || family.iter().any(|g| g.len() != n) {
                return Err(Error::InvalidArgument(
                    "axis families must start at the identity and act on one index set".into(),
                ));
            }
        }
        Ok(AxisBlock { offset, axes })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a[0].len()).collect()
    }

    pub fn len(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn num_members(&self) -> usize {
        self.axes[0].len()
    }

    /// Writes member `k`'s source rows for this block into `map`.
    fn fill(&self, k: usize, map: &mut [usize]) {
        let dims = self.dims();
        let mut coords = vec![0usize; dims.len()];
        for pos in 0..self.len() {
            let mut src = 0;
            for (a, &c) in coords.iter().enumerate() {
                src = src * dims[a] + self.axes[a][k].apply(c);
            }
            map[self.offset + pos] = self.offset + src;
            // odometer increment, last axis fastest
            for a in (0..dims.len()).rev() {
                coords[a] += 1;
                if coords[a] < dims[a] {
                    break;
                }
                coords[a] = 0;
            }
        }
    }
}

fn check_blocks(blocks: &[AxisBlock], n_obs: usize) -> Result<usize> {
    let k1 = blocks.first().map(AxisBlock::num_members).ok_or_else(|| {
        Error::InvalidArgument("need at least one block".into())
    })?;
    if blocks.iter().any(|b| b.num_members() != k1) {
        return Err(Error::InvalidArgument("blocks disagree on the number of members".into()));
    }
    let mut ranges: Vec<(usize, usize)> = blocks.iter().map(|b| (b.offset, b.offset + b.len())).collect();
    ranges.sort_unstable();
    if ranges.windows(2).any(|w| w[0].1 > w[1].0) || ranges.last().is_some_and(|r| r.1 > n_obs) {
        return Err(Error::Dimension("blocks overlap or exceed the stacked data".into()));
    }
    Ok(k1)
}

/// Stacked source map of concatenated member `k`.
pub fn member_map(blocks: &[AxisBlock], k: usize, n_obs: usize) -> Result<Vec<usize>> {
    let k1 = check_blocks(blocks, n_obs)?;
    if k >= k1 {
        return Err(Error::InvalidArgument(format!("member {k} of a family of {k1}")));
    }
    let mut map: Vec<usize> = (0..n_obs).collect();
    for b in blocks {
        b.fill(k, &mut map);
    }
    Ok(map)
}

/// Source maps of members `1..=K`.
pub fn member_maps(blocks: &[AxisBlock], n_obs: usize) -> Result<Vec<Vec<usize>>> {
    let k1 = check_blocks(blocks, n_obs)?;
    (1..k1).map(|k| member_map(blocks, k, n_obs)).collect()
}

/// The concatenated family as permutations of the stacked rows, identity first.
pub fn stacked_family(blocks: &[AxisBlock], n_obs: usize) -> Result<Vec<Permutation>> {
    let k1 = check_blocks(blocks, n_obs)?;
    (0..k1)
        .map(|k| Permutation::from_images(member_map(blocks, k, n_obs)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TwoWayPermutation;
    use crate::permgroup::{build_cyclic_family, verify_group, CyclicFamilySpec};

    fn fam(n: usize, k: usize, seed: u64) -> Vec<Permutation> {
        build_cyclic_family(&CyclicFamilySpec::range(n, k, seed).unwrap())
    }

    #[test]
    fn two_axis_block_matches_two_way_map() {
        let (rows, cols) = (fam(4, 1, 1), fam(6, 1, 2));
        let block = AxisBlock::new(0, vec![rows.clone(), cols.clone()]).unwrap();
        let map = member_map(&[block], 1, 24).unwrap();
        let g = TwoWayPermutation::new(rows[1].clone(), cols[1].clone());
        assert_eq!(map, g.stacked_map());
    }

    #[test]
    fn rows_outside_blocks_stay_fixed() {
        let a = AxisBlock::new(1, vec![fam(3, 2, 1)]).unwrap();
        let b = AxisBlock::new(5, vec![fam(3, 2, 4), fam(2, 2, 5)]).unwrap();
        let family = stacked_family(&[a, b], 12).unwrap();
        assert!(verify_group(&family));
        for g in &family {
            assert_eq!(g.apply(0), 0);
            assert_eq!(g.apply(4), 4);
            assert_eq!(g.apply(11), 11);
        }
    }

    #[test]
    fn overlapping_blocks_rejected() {
        let a = AxisBlock::new(0, vec![fam(3, 1, 1)]).unwrap();
        let b = AxisBlock::new(2, vec![fam(3, 1, 2)]).unwrap();
        assert!(member_maps(&[a, b], 6).is_err());
    }
}
