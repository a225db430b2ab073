//! Observation masks, fully observed blocks (bicliques of the design graph),
//! iterated biclique decomposition, and the blockwise permutation test.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::blocks::{member_maps, stacked_family, AxisBlock};
use crate::dyadic::{PreparedTest, TestReport};
use crate::error::{Error, Result};
use crate::model::{DyadArray, Permutation};
use crate::permgroup::axis_family;
use crate::projector::RankTol;
use crate::rng;

/// Largest mask side accepted by [`max_biclique_exact`].
pub const EXACT_CAP: usize = 16;

/// Binary observation grid; `get(i, j)` is true for an observed cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    n_rows: usize,
    n_cols: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(n_rows: usize, n_cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != n_rows * n_cols {
            return Err(Error::Dimension(format!(
                "{} mask entries for a {n_rows}x{n_cols} grid",
                bits.len()
            )));
        }
        Ok(Mask { n_rows, n_cols, bits })
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let bits = (1..=n_rows)
            .flat_map(|i| (1..=n_cols).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        Mask { n_rows, n_cols, bits }
    }

    pub fn full(n_rows: usize, n_cols: usize) -> Self {
        Mask { n_rows, n_cols, bits: vec![true; n_rows * n_cols] }
    }

    /// Observed cells of an array.
    pub fn from_array(array: &DyadArray) -> Self {
        Self::from_fn(array.n_rows(), array.n_cols(), |i, j| array.is_observed(i, j))
    }

    /// Rows given as strings of `0`/`1`, handy in tests and examples.
    pub fn from_rows(rows: &[&str]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut bits = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(Error::Dimension("ragged mask rows".into()));
            }
            for c in r.chars() {
                match c {
                    '0' => bits.push(false),
                    '1' => bits.push(true),
                    _ => return Err(Error::InvalidArgument(format!("mask symbol {c:?}"))),
                }
            }
        }
        Ok(Mask { n_rows, n_cols, bits })
    }

    /// i.i.d. Bernoulli(`rho`) entries.
    pub fn mcar(n_rows: usize, n_cols: usize, rho: f64, seed: u64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidArgument(format!("rho must lie in (0, 1), got {rho}")));
        }
        let mut stream = rng::stream(seed, "mcar", 0);
        let bits = (0..n_rows * n_cols).map(|_| stream.random::<f64>() < rho).collect();
        Ok(Mask { n_rows, n_cols, bits })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// 1-based lookup.
    pub fn get(&self, i: usize, j: usize) -> bool {
        i >= 1 && j >= 1 && i <= self.n_rows && j <= self.n_cols && self.bits[(i - 1) * self.n_cols + j - 1]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) -> Result<()> {
        if i == 0 || j == 0 || i > self.n_rows || j > self.n_cols {
            return Err(Error::Dimension(format!("cell ({i}, {j}) outside the mask")));
        }
        self.bits[(i - 1) * self.n_cols + j - 1] = value;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// True iff every cell of `I × J` (1-based) is observed.
    pub fn is_fully_observed(&self, rows: &[usize], cols: &[usize]) -> bool {
        rows.iter().all(|&i| cols.iter().all(|&j| self.get(i, j)))
    }

    /// Column sets of each row as bit vectors.
    fn row_sets(&self) -> Vec<BitSet> {
        (0..self.n_rows)
            .map(|i| {
                let mut s = BitSet::empty(self.n_cols);
                for j in 0..self.n_cols {
                    if self.bits[i * self.n_cols + j] {
                        s.insert(j);
                    }
                }
                s
            })
            .collect()
    }
}

/// Mask with i.i.d. Bernoulli(`rho`) entries on an `n × n` grid.
pub fn gen_mcar_mask(n: usize, rho: f64, seed: u64) -> Result<Mask> {
    Mask::mcar(n, n, rho, seed)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn empty(n: usize) -> Self {
        BitSet { words: vec![0; n.div_ceil(64)] }
    }

    fn full(n: usize) -> Self {
        let mut s = Self::empty(n);
        for j in 0..n {
            s.insert(j);
        }
        s
    }

    fn insert(&mut self, j: usize) {
        self.words[j / 64] |= 1 << (j % 64);
    }

    fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn and(&self, other: &BitSet) -> BitSet {
        BitSet { words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect() }
    }

    fn is_subset(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    fn to_vec(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (w, &word) in self.words.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                out.push(w * 64 + bits.trailing_zeros() as usize);
                bits &= bits - 1;
            }
        }
        out
    }
}

/// A fully observed block `I × J` with 1-based sorted indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Biclique {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Biclique {
    pub fn size(&self) -> usize {
        self.rows.len() * self.cols.len()
    }

    fn empty() -> Self {
        Biclique { rows: Vec::new(), cols: Vec::new() }
    }

    /// Ordering used for ties: larger area, then more rows, then the
    /// lexicographically smaller row list, then column list.
    fn better_than(&self, other: &Biclique) -> bool {
        (self.size(), self.rows.len())
            .cmp(&(other.size(), other.rows.len()))
            .then_with(|| other.rows.cmp(&self.rows))
            .then_with(|| other.cols.cmp(&self.cols))
            .is_gt()
    }
}

fn block_from(rows0: &[usize], cols: &BitSet) -> Biclique {
    Biclique {
        rows: rows0.iter().map(|&i| i + 1).collect(),
        cols: cols.to_vec().into_iter().map(|j| j + 1).collect(),
    }
}

/// Common columns of a row set (all columns for the empty set).
fn common_cols(sets: &[BitSet], rows0: &[usize], n_cols: usize) -> BitSet {
    rows0.iter().fold(BitSet::full(n_cols), |acc, &r| acc.and(&sets[r]))
}

/// Branch and bound over row sets with the optimal column set `J = N(I)`.
struct ExactSearch<'a> {
    sets: &'a [BitSet],
    min_side: usize,
    objective: Objective,
    best: Biclique,
    best_value: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Objective {
    /// `|I| · |J|`
    Area,
    /// `min(|I|, |J|)`
    Side,
}

impl Objective {
    fn value(self, n_rows: usize, n_cols: usize) -> usize {
        match self {
            Objective::Area => n_rows * n_cols,
            Objective::Side => n_rows.min(n_cols),
        }
    }
}

impl ExactSearch<'_> {
    fn visit(&mut self, next: usize, rows: &mut Vec<usize>, common: &BitSet) {
        let n_common = common.len();
        if !rows.is_empty() && rows.len() >= self.min_side && n_common >= self.min_side {
            let candidate = block_from(rows, common);
            let value = self.objective.value(rows.len(), n_common);
            let tie_better = match self.objective {
                Objective::Area => candidate.better_than(&self.best),
                Objective::Side => false,
            };
            if value > self.best_value || (value == self.best_value && value > 0 && tie_better) {
                self.best_value = value;
                self.best = candidate;
            }
        }
        if n_common < self.min_side.max(1) {
            return;
        }
        let remaining: Vec<usize> = (next..self.sets.len())
            .filter(|&r| !self.sets[r].and(common).words.iter().all(|&w| w == 0))
            .collect();
        let bound = self.objective.value(rows.len() + remaining.len(), n_common);
        if bound < self.best_value || (self.objective == Objective::Side && bound == self.best_value) {
            return;
        }
        for (idx, &r) in remaining.iter().enumerate() {
            let still = remaining.len() - idx;
            if self.objective.value(rows.len() + still, n_common) < self.best_value {
                break;
            }
            rows.push(r);
            let narrowed = common.and(&self.sets[r]);
            self.visit(r + 1, rows, &narrowed);
            rows.pop();
        }
    }
}

fn exact_search(mask: &Mask, min_side: usize, objective: Objective) -> Result<(Biclique, usize)> {
    if mask.n_rows > EXACT_CAP || mask.n_cols > EXACT_CAP {
        return Err(Error::CapExceeded { rows: mask.n_rows, cols: mask.n_cols, cap: EXACT_CAP });
    }
    let sets = mask.row_sets();
    let mut search = ExactSearch {
        sets: &sets,
        min_side: min_side.max(1),
        objective,
        best: Biclique::empty(),
        best_value: 0,
    };
    search.visit(0, &mut Vec::new(), &BitSet::full(mask.n_cols));
    Ok((search.best, search.best_value))
}

/// A maximum-area fully observed block. Returns an empty block for an empty
/// mask.
pub fn max_biclique_exact(mask: &Mask) -> Result<Biclique> {
    max_biclique_exact_min_side(mask, 1)
}

/// Maximum-area block among those with both sides at least `min_side`.
pub fn max_biclique_exact_min_side(mask: &Mask, min_side: usize) -> Result<Biclique> {
    exact_search(mask, min_side, Objective::Area).map(|(b, _)| b)
}

/// Largest `s` such that an `s × s` fully observed block exists.
pub fn max_balanced_side(mask: &Mask) -> Result<usize> {
    exact_search(mask, 1, Objective::Side).map(|(_, s)| s)
}

fn score(rows: usize, cols: usize, min_side: usize) -> usize {
    if rows >= min_side && cols >= min_side {
        rows * cols
    } else {
        0
    }
}

/// Best prefix of `order` followed by single-row add/remove/swap moves.
fn greedy_pass(sets: &[BitSet], n_cols: usize, order: &[usize], min_side: usize) -> (Vec<usize>, BitSet) {
    let mut best_rows: Vec<usize> = Vec::new();
    let mut best_score = 0;
    let mut common = BitSet::full(n_cols);
    for (len, &r) in order.iter().enumerate() {
        common = common.and(&sets[r]);
        let s = score(len + 1, common.len(), min_side);
        if s > best_score {
            best_score = s;
            best_rows = order[..=len].to_vec();
        }
        if common.len() < min_side.max(1) {
            break;
        }
    }
    if best_rows.is_empty() {
        // fall back to the densest single row so local search has a start
        if let Some(&r) = order.iter().max_by_key(|&&r| (sets[r].len(), std::cmp::Reverse(r))) {
            best_rows = vec![r];
        }
    }
    best_rows.sort_unstable();
    let mut current_score = score(best_rows.len(), common_cols(sets, &best_rows, n_cols).len(), min_side);
    loop {
        // excl[t] = common columns of best_rows without its t-th row
        let len = best_rows.len();
        let mut prefix = vec![BitSet::full(n_cols)];
        for &r in &best_rows {
            let next = prefix.last().expect("nonempty").and(&sets[r]);
            prefix.push(next);
        }
        let mut excl = vec![BitSet::full(n_cols); len];
        let mut suffix = BitSet::full(n_cols);
        for t in (0..len).rev() {
            excl[t] = prefix[t].and(&suffix);
            suffix = suffix.and(&sets[best_rows[t]]);
        }
        let common = &prefix[len];
        let outside: Vec<usize> = (0..sets.len()).filter(|r| best_rows.binary_search(r).is_err()).collect();
        // (score, removed position, added row)
        let mut improved: Option<(usize, Option<usize>, Option<usize>)> = None;
        let mut consider = |s: usize, removed: Option<usize>, added: Option<usize>| {
            if s > improved.map_or(current_score, |x| x.0) {
                improved = Some((s, removed, added));
            }
        };
        for &r in &outside {
            consider(score(len + 1, common.and(&sets[r]).len(), min_side), None, Some(r));
        }
        if len > 1 {
            for (t, e) in excl.iter().enumerate() {
                consider(score(len - 1, e.len(), min_side), Some(t), None);
            }
        }
        for (t, e) in excl.iter().enumerate() {
            for &r in &outside {
                consider(score(len, e.and(&sets[r]).len(), min_side), Some(t), Some(r));
            }
        }
        match improved {
            Some((s, removed, added)) => {
                if let Some(t) = removed {
                    best_rows.remove(t);
                }
                if let Some(r) = added {
                    best_rows.push(r);
                    best_rows.sort_unstable();
                }
                current_score = s;
            }
            None => break,
        }
    }
    // closure: take J = N(I), then every row covering J
    let cols = common_cols(sets, &best_rows, n_cols);
    let rows: Vec<usize> = (0..sets.len()).filter(|&r| cols.is_subset(&sets[r])).collect();
    if !rows.is_empty() && score(rows.len(), cols.len(), min_side) >= current_score {
        let cols = common_cols(sets, &rows, n_cols);
        return (rows, cols);
    }
    (best_rows, cols)
}

/// Heuristic maximum-area block; always a valid fully observed block,
/// deterministic given `seed`.
pub fn max_biclique_greedy(mask: &Mask, restarts: usize, seed: u64) -> Result<Biclique> {
    max_biclique_greedy_min_side(mask, restarts, seed, 1)
}

/// Heuristic block with both sides at least `min_side`; empty if none found.
pub fn max_biclique_greedy_min_side(
    mask: &Mask,
    restarts: usize,
    seed: u64,
    min_side: usize,
) -> Result<Biclique> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let sets = mask.row_sets();
    let n_cols = mask.n_cols;
    let mut degree_order: Vec<usize> = (0..mask.n_rows).collect();
    degree_order.sort_by_key(|&r| (std::cmp::Reverse(sets[r].len()), r));
    let mut best = Biclique::empty();
    for restart in 0..restarts.max(1) {
        let order = if restart == 0 {
            degree_order.clone()
        } else {
            let mut o: Vec<usize> = (0..mask.n_rows).collect();
            o.shuffle(&mut rng::stream(seed, "greedy-order", restart as u64));
            o
        };
        let (rows, cols) = greedy_pass(&sets, n_cols, &order, min_side.max(1));
        let cand = block_from(&rows, &cols);
        if score(cand.rows.len(), cand.cols.len(), min_side.max(1)) > 0 && cand.better_than(&best) {
            best = cand;
        }
    }
    Ok(best)
}

/// Solver used by [`biclique_decompose`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Solver {
    Exact,
    Greedy { restarts: usize, seed: u64 },
}

impl Default for Solver {
    fn default() -> Self {
        Solver::Greedy { restarts: 20, seed: 0 }
    }
}

/// Disjoint fully observed blocks.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BicliqueCover {
    pub blocks: Vec<Biclique>,
}

impl BicliqueCover {
    pub fn single(rows: Vec<usize>, cols: Vec<usize>) -> Self {
        BicliqueCover { blocks: vec![Biclique { rows, cols }] }
    }

    /// `Ñ = Σ |I_q| |J_q|`.
    pub fn cell_count(&self) -> usize {
        self.blocks.iter().map(Biclique::size).sum()
    }

    /// Full observation of every block and pairwise disjointness of the row
    /// and column sets.
    pub fn is_valid_for(&self, mask: &Mask) -> bool {
        let mut seen_rows = vec![false; mask.n_rows + 1];
        let mut seen_cols = vec![false; mask.n_cols + 1];
        for b in &self.blocks {
            if b.rows.is_empty() || b.cols.is_empty() || !mask.is_fully_observed(&b.rows, &b.cols) {
                return false;
            }
            for &i in &b.rows {
                if i == 0 || i > mask.n_rows || std::mem::replace(&mut seen_rows[i], true) {
                    return false;
                }
            }
            for &j in &b.cols {
                if j == 0 || j > mask.n_cols || std::mem::replace(&mut seen_cols[j], true) {
                    return false;
                }
            }
        }
        true
    }

    /// Stacked cells of all blocks in order, row-major within each block.
    pub fn stacked_cells(&self) -> Vec<(usize, usize)> {
        self.blocks
            .iter()
            .flat_map(|b| b.rows.iter().flat_map(move |&i| b.cols.iter().map(move |&j| (i, j))))
            .collect()
    }
}

/// Repeatedly extracts a maximum block and removes every row and column it
/// touches, until no block with both sides `>= min_block` remains.
pub fn biclique_decompose(mask: &Mask, solver: Solver, min_block: usize) -> Result<BicliqueCover> {
    let mut work = mask.clone();
    let mut cover = BicliqueCover::default();
    let min_side = min_block.max(1);
    let mut round = 0u64;
    while !work.is_empty() {
        let block = match solver {
            Solver::Exact => max_biclique_exact_min_side(&work, min_side)?,
            Solver::Greedy { restarts, seed } => {
                max_biclique_greedy_min_side(&work, restarts, rng::sub_seed(seed, "decompose", round), min_side)?
            }
        };
        if block.rows.is_empty() {
            break;
        }
        for &i in &block.rows {
            for j in 1..=work.n_cols {
                work.set(i, j, false)?;
            }
        }
        for &j in &block.cols {
            for i in 1..=work.n_rows {
                work.set(i, j, false)?;
            }
        }
        cover.blocks.push(block);
        round += 1;
    }
    Ok(cover)
}

/// Axis blocks of the concatenated two-way family; block `q` draws its row
/// and column families from `(seed, "rows", q)` and `(seed, "cols", q)`.
pub fn cover_axis_blocks(cover: &BicliqueCover, num_perms: usize, seed: u64) -> Result<Vec<AxisBlock>> {
    let mut offset = 0;
    cover
        .blocks
        .iter()
        .enumerate()
        .map(|(q, b)| {
            let axes = vec![
                axis_family(b.rows.len(), num_perms, seed, "rows", q as u64)?,
                axis_family(b.cols.len(), num_perms, seed, "cols", q as u64)?,
            ];
            let block = AxisBlock::new(offset, axes)?;
            offset += b.size();
            Ok(block)
        })
        .collect()
}

/// The concatenated family as permutations of the stacked block cells.
pub fn procedure2_family(cover: &BicliqueCover, num_perms: usize, seed: u64) -> Result<Vec<Permutation>> {
    stacked_family(&cover_axis_blocks(cover, num_perms, seed)?, cover.cell_count())
}

/// Blockwise permutation test of `β = 0` on the cells of `cover`.
pub fn procedure2(
    array: &DyadArray,
    mask: &Mask,
    cover: &BicliqueCover,
    num_perms: usize,
    seed: u64,
) -> Result<TestReport> {
    let (prepared, notes) = prepare_procedure2(array, mask, cover, num_perms, seed, RankTol::Default)?;
    let mut report = prepared.test(&nalgebra::DVector::zeros(array.d_dim()))?;
    report.seed = Some(seed);
    report.notes.extend(notes);
    Ok(report)
}

/// Shared setup of [`procedure2`]; also returns block-size warnings.
pub fn prepare_procedure2(
    array: &DyadArray,
    mask: &Mask,
    cover: &BicliqueCover,
    num_perms: usize,
    seed: u64,
    policy: RankTol,
) -> Result<(PreparedTest, Vec<String>)> {
    if mask.n_rows != array.n_rows() || mask.n_cols != array.n_cols() {
        return Err(Error::Dimension("mask and array extents differ".into()));
    }
    if cover.blocks.is_empty() {
        return Err(Error::DegenerateInput("biclique cover has no blocks".into()));
    }
    if !cover.is_valid_for(mask) {
        return Err(Error::InvalidArgument(
            "cover blocks must be fully observed under the mask and pairwise disjoint".into(),
        ));
    }
    let n_tilde = cover.cell_count();
    if n_tilde <= 2 * array.p_dim() {
        return Err(Error::InsufficientDimension { n_obs: n_tilde, p: array.p_dim() });
    }
    let design = array.stack_cells(&cover.stacked_cells())?;
    let blocks = cover_axis_blocks(cover, num_perms, seed)?;
    let maps = member_maps(&blocks, n_tilde)?;
    let mut notes = Vec::new();
    let small = cover
        .blocks
        .iter()
        .filter(|b| b.rows.len() < num_perms + 1 || b.cols.len() < num_perms + 1)
        .count();
    if small > 0 {
        notes.push(format!(
            "{small} of {} blocks have a side shorter than K + 1 = {}; those sides are left fixed",
            cover.blocks.len(),
            num_perms + 1
        ));
    }
    let prepared = PreparedTest::new(&design.x, &design.d, &design.y, maps, policy)?;
    Ok((prepared, notes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permgroup::verify_group;

    /// Brute force over every row subset.
    fn brute_force(mask: &Mask) -> usize {
        let sets = mask.row_sets();
        let mut best = 0;
        for subset in 1u32..(1 << mask.n_rows) {
            let rows: Vec<usize> = (0..mask.n_rows).filter(|r| subset >> r & 1 == 1).collect();
            best = best.max(rows.len() * common_cols(&sets, &rows, mask.n_cols).len());
        }
        best
    }

    #[test]
    fn trivial_masks() {
        let full = Mask::full(3, 3);
        let b = max_biclique_exact(&full).unwrap();
        assert_eq!((b.rows, b.cols), (vec![1, 2, 3], vec![1, 2, 3]));
        let eye = Mask::from_fn(3, 3, |i, j| i == j);
        let b = max_biclique_exact(&eye).unwrap();
        assert_eq!(b.size(), 1);
        assert_eq!((b.rows, b.cols), (vec![1], vec![1]));
    }

    #[test]
    fn cap_is_enforced() {
        let big = Mask::full(17, 3);
        assert_eq!(
            max_biclique_exact(&big).unwrap_err(),
            Error::CapExceeded { rows: 17, cols: 3, cap: EXACT_CAP }
        );
    }

    #[test]
    fn tie_break_prefers_rows_then_lexicographic() {
        // 1x2 and 2x1 both have area 2: prefer the taller block
        let m = Mask::from_rows(&["11", "10"]).unwrap();
        let b = max_biclique_exact(&m).unwrap();
        assert_eq!((b.rows, b.cols), (vec![1, 2], vec![1]));
        let m = Mask::from_rows(&["10", "01"]).unwrap();
        let b = max_biclique_exact(&m).unwrap();
        assert_eq!((b.rows, b.cols), (vec![1], vec![1]));
    }

    #[test]
    fn exact_matches_brute_force() {
        for seed in 0..200 {
            let n = 2 + (seed as usize % 7);
            let m = Mask::mcar(n, 8, 0.3 + 0.05 * (seed % 10) as f64, seed).unwrap();
            let b = max_biclique_exact(&m).unwrap();
            assert!(m.is_fully_observed(&b.rows, &b.cols));
            assert_eq!(b.size(), brute_force(&m), "seed {seed}");
        }
    }

    #[test]
    fn balanced_side_bruteforce() {
        for seed in 0..50 {
            let m = Mask::mcar(7, 7, 0.6, seed).unwrap();
            let sets = m.row_sets();
            let mut best = 0;
            for subset in 1u32..(1 << 7) {
                let rows: Vec<usize> = (0..7).filter(|r| subset >> r & 1 == 1).collect();
                best = best.max(rows.len().min(common_cols(&sets, &rows, 7).len()));
            }
            assert_eq!(max_balanced_side(&m).unwrap(), best);
        }
    }

    #[test]
    fn greedy_validity_and_full_mask() {
        let full = Mask::full(5, 7);
        assert_eq!(max_biclique_greedy(&full, 3, 1).unwrap().size(), 35);
        assert_eq!(max_biclique_greedy(&Mask::from_fn(3, 3, |_, _| false), 3, 1).unwrap_err(), Error::EmptyMask);
        for seed in 0..100 {
            let m = Mask::mcar(20, 25, 0.6, seed).unwrap();
            let b = max_biclique_greedy(&m, 5, seed).unwrap();
            assert!(b.size() > 0 && m.is_fully_observed(&b.rows, &b.cols));
            assert_eq!(b, max_biclique_greedy(&m, 5, seed).unwrap());
        }
    }

    #[test]
    fn greedy_close_to_exact() {
        let mut good = 0;
        for seed in 0..200 {
            let m = Mask::mcar(12, 12, 0.5, 1000 + seed).unwrap();
            let exact = max_biclique_exact(&m).unwrap().size();
            let greedy = max_biclique_greedy(&m, 10, seed).unwrap().size();
            assert!(greedy <= exact);
            if greedy as f64 >= 0.6 * exact as f64 {
                good += 1;
            }
        }
        assert!(good >= 180, "{good} of 200");
    }

    #[test]
    fn block_diagonal_recovery() {
        let m = Mask::from_fn(6, 6, |i, j| (i <= 3) == (j <= 3));
        for solver in [Solver::Exact, Solver::Greedy { restarts: 5, seed: 3 }] {
            let cover = biclique_decompose(&m, solver, 2).unwrap();
            assert_eq!(cover.blocks.len(), 2);
            assert!(cover.is_valid_for(&m));
            let mut got: Vec<_> = cover.blocks.iter().map(|b| (b.rows.clone(), b.cols.clone())).collect();
            got.sort();
            assert_eq!(got, vec![(vec![1, 2, 3], vec![1, 2, 3]), (vec![4, 5, 6], vec![4, 5, 6])]);
        }
    }

    #[test]
    fn full_mask_single_block() {
        let cover = biclique_decompose(&Mask::full(4, 5), Solver::Exact, 2).unwrap();
        assert_eq!(cover.blocks, vec![Biclique { rows: vec![1, 2, 3, 4], cols: vec![1, 2, 3, 4, 5] }]);
        assert_eq!(cover.cell_count(), 20);
    }

    #[test]
    fn swaps_inside_and_outside_a_block() {
        // row 1 misses column 1; rows/cols {2, 3} form a full block
        let m = Mask::from_rows(&["011", "111", "111"]).unwrap();
        assert!(m.is_fully_observed(&[2, 3], &[2, 3]));
        assert!(!m.is_fully_observed(&[1, 3], &[1, 3]));
    }

    #[test]
    fn min_block_stops_decomposition() {
        let eye = Mask::from_fn(4, 4, |i, j| i == j);
        assert!(biclique_decompose(&eye, Solver::Exact, 2).unwrap().blocks.is_empty());
        assert_eq!(biclique_decompose(&eye, Solver::Exact, 1).unwrap().blocks.len(), 4);
    }

    #[test]
    fn decomposition_invariants() {
        for seed in 0..100 {
            let n = 4 + seed as usize % 13;
            let m = Mask::mcar(n, 16, 0.7, seed).unwrap();
            let cover = biclique_decompose(&m, Solver::Exact, 2).unwrap();
            assert!(cover.is_valid_for(&m));
            let g = biclique_decompose(&m, Solver::Greedy { restarts: 3, seed }, 2).unwrap();
            assert!(g.is_valid_for(&m));
        }
    }

    #[test]
    fn mcar_density() {
        let m = Mask::mcar(100, 100, 0.3, 11).unwrap();
        let p = m.count() as f64 / 1e4;
        assert!((p - 0.3).abs() < 3.0 * (0.3f64 * 0.7 / 1e4).sqrt());
        assert_eq!(m, Mask::mcar(100, 100, 0.3, 11).unwrap());
        assert!(gen_mcar_mask(10, 1.0, 0).is_err());
        assert!(gen_mcar_mask(10, 0.999, 0).unwrap().count() >= 95);
    }

    #[test]
    fn concatenated_family_is_a_group() {
        let cover = BicliqueCover {
            blocks: vec![
                Biclique { rows: vec![1, 2, 3], cols: vec![4, 5, 6, 7] },
                Biclique { rows: vec![5, 6, 7, 8, 9, 10], cols: vec![1, 2] },
            ],
        };
        let fam = procedure2_family(&cover, 2, 4).unwrap();
        assert_eq!(fam.len(), 3);
        assert!(verify_group(&fam));
    }
}
