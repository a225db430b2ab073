//! Three-index designs: three-way arrays, panels, two-way layouts with
//! replicated cells, and irregular designs with thresholded cell sizes.
//!
//! Every test here stacks its records, builds a product-form family over
//! blocks of the stacked data (see [`crate::blocks`]) and runs the
//! dyadic-test engine on the resulting member maps.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{member_maps, stacked_family, AxisBlock};
use crate::dyadic::{median_of, PreparedTest, TestReport};
use crate::error::{Error, Result};
use crate::missing::{biclique_decompose, BicliqueCover, Mask, Solver};
use crate::model::Permutation;
use crate::permgroup::axis_family;
use crate::projector::RankTol;
use crate::rng;

/// One observation `(i, j, l)` with 1-based indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub i: usize,
    pub j: usize,
    pub l: usize,
    pub y: f64,
    pub d: Vec<f64>,
    pub x: Vec<f64>,
}

/// Records indexed by `(i, j, l)` with per-cell counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiIndexDataset {
    records: Vec<Record>,
    m: usize,
    n: usize,
    l_max: usize,
    /// `cells[(i, j)]` lists the record positions of the cell in ascending `l`.
    cells: BTreeMap<(usize, usize), Vec<usize>>,
}

impl MultiIndexDataset {
    pub fn new(records: Vec<Record>, m: usize, n: usize) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::InvalidArgument("dataset has no records".into()))?;
        let (d_dim, p_dim) = (first.d.len(), first.x.len());
        let mut cells: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        let mut l_max = 0;
        for (r, rec) in records.iter().enumerate() {
            if rec.i == 0 || rec.j == 0 || rec.l == 0 || rec.i > m || rec.j > n {
                return Err(Error::Dimension(format!(
                    "record ({}, {}, {}) outside extents {m}x{n}",
                    rec.i, rec.j, rec.l
                )));
            }
            if rec.d.len() != d_dim || rec.x.len() != p_dim {
                return Err(Error::Dimension(format!(
                    "record ({}, {}, {}) has {} treatments and {} covariates, expected {d_dim} and {p_dim}",
                    rec.i,
                    rec.j,
                    rec.l,
                    rec.d.len(),
                    rec.x.len()
                )));
            }
            l_max = l_max.max(rec.l);
            cells.entry((rec.i, rec.j)).or_default().push(r);
        }
        for ((i, j), list) in cells.iter_mut() {
            list.sort_by_key(|&r| records[r].l);
            if list.windows(2).any(|w| records[w[0]].l == records[w[1]].l) {
                return Err(Error::DuplicateCell { i: *i, j: *j, l: Some(records[list[0]].l) });
            }
        }
        Ok(MultiIndexDataset { records, m, n, l_max, cells })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    /// `(m, n, ℓ)` extents, with `ℓ` the largest third index.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.m, self.n, self.l_max)
    }

    /// `ℓ_ij`, zero for empty cells.
    pub fn cell_size(&self, i: usize, j: usize) -> usize {
        self.cells.get(&(i, j)).map_or(0, Vec::len)
    }

    /// `ℓ_ij` as an `m × n` grid (row-major).
    pub fn cell_sizes(&self) -> Vec<Vec<usize>> {
        (1..=self.m)
            .map(|i| (1..=self.n).map(|j| self.cell_size(i, j)).collect())
            .collect()
    }

    pub fn d_dim(&self) -> usize {
        self.records[0].d.len()
    }

    pub fn p_dim(&self) -> usize {
        self.records[0].x.len()
    }

    /// True iff every `(i, j, l)` with `l <= ℓ` appears exactly once.
    pub fn is_balanced(&self) -> bool {
        self.cells.len() == self.m * self.n
            && self.cells.values().all(|list| {
                list.len() == self.l_max
                    && list.iter().enumerate().all(|(t, &r)| self.records[r].l == t + 1)
            })
    }

    fn stack(&self, order: &[usize]) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        let (d_dim, p_dim) = (self.d_dim(), self.p_dim());
        let x = DMatrix::from_fn(order.len(), p_dim, |r, c| self.records[order[r]].x[c]);
        let d = DMatrix::from_fn(order.len(), d_dim, |r, c| self.records[order[r]].d[c]);
        let y = DVector::from_fn(order.len(), |r, _| self.records[order[r]].y);
        (x, d, y)
    }

    /// Record positions in `(i, j, l)` lexicographic order.
    fn lexicographic(&self) -> Vec<usize> {
        self.cells.values().flatten().copied().collect()
    }
}

fn run(
    data: &MultiIndexDataset,
    order: &[usize],
    blocks: &[AxisBlock],
    seed: u64,
    notes: Vec<String>,
) -> Result<TestReport> {
    let (x, d, y) = data.stack(order);
    let maps = member_maps(blocks, order.len())?;
    let prepared = PreparedTest::new(&x, &d, &y, maps, RankTol::Default)?;
    let mut report = prepared.test(&DVector::zeros(d.ncols()))?;
    report.seed = Some(seed);
    report.notes.extend(notes);
    Ok(report)
}

fn short_axes(names: &[(&str, usize)], num_perms: usize) -> Vec<String> {
    names
        .iter()
        .filter(|(_, n)| *n < num_perms + 1)
        .map(|(name, n)| format!("{name} axis has {n} < K + 1 = {} indices; it is left fixed", num_perms + 1))
        .collect()
}

fn require_balanced(data: &MultiIndexDataset, what: &str) -> Result<()> {
    if data.is_balanced() {
        Ok(())
    } else {
        Err(Error::Unbalanced(format!(
            "{what} needs every (i, j, l) observed exactly once; use the layout or irregular tests"
        )))
    }
}

/// Balanced `m × n × ℓ` design permuted independently along all three axes.
pub fn threeway_blocks(data: &MultiIndexDataset, num_perms: usize, seed: u64) -> Result<Vec<AxisBlock>> {
    let (m, n, l) = data.dims();
    Ok(vec![AxisBlock::new(
        0,
        vec![
            axis_family(m, num_perms, seed, "rows", 0)?,
            axis_family(n, num_perms, seed, "cols", 0)?,
            axis_family(l, num_perms, seed, "layers", 0)?,
        ],
    )?])
}

/// Tests `β = 0` under three-way exchangeability.
pub fn threeway_test(data: &MultiIndexDataset, num_perms: usize, seed: u64) -> Result<TestReport> {
    require_balanced(data, "the three-way test")?;
    let (m, n, l) = data.dims();
    let blocks = threeway_blocks(data, num_perms, seed)?;
    let notes = short_axes(&[("row", m), ("column", n), ("third", l)], num_perms);
    run(data, &data.lexicographic(), &blocks, seed, notes)
}

/// Two-way family on `(i, j)`; every period moves together.
pub fn panel_blocks(data: &MultiIndexDataset, num_perms: usize, seed: u64) -> Result<Vec<AxisBlock>> {
    let (m, n, t) = data.dims();
    Ok(vec![AxisBlock::new(
        0,
        vec![
            axis_family(m, num_perms, seed, "rows", 0)?,
            axis_family(n, num_perms, seed, "cols", 0)?,
            vec![Permutation::identity(t); num_perms + 1],
        ],
    )?])
}

/// Tests `β = 0` in a balanced panel whose errors are exchangeable over rows
/// and columns but not over periods.
pub fn panel_test(data: &MultiIndexDataset, num_perms: usize, seed: u64) -> Result<TestReport> {
    require_balanced(data, "the panel test")?;
    let (m, n, _) = data.dims();
    let blocks = panel_blocks(data, num_perms, seed)?;
    let notes = short_axes(&[("row", m), ("column", n)], num_perms);
    run(data, &data.lexicographic(), &blocks, seed, notes)
}

/// One cyclic family per nonempty cell, drawn from `(seed, "cell", c)` for
/// the `c`-th nonempty cell in lexicographic order.
pub fn layout_blocks(data: &MultiIndexDataset, num_perms: usize, seed: u64) -> Result<Vec<AxisBlock>> {
    let mut offset = 0;
    data.cells
        .values()
        .enumerate()
        .map(|(c, list)| {
            let block = AxisBlock::new(offset, vec![axis_family(list.len(), num_perms, seed, "cell", c as u64)?])?;
            offset += list.len();
            Ok(block)
        })
        .collect()
}

/// Tests `β = 0` by permuting observations independently within each cell.
pub fn layout_test(data: &MultiIndexDataset, num_perms: usize, seed: u64) -> Result<TestReport> {
    let blocks = layout_blocks(data, num_perms, seed)?;
    let short = data.cells.values().filter(|l| l.len() < num_perms + 1).count();
    let mut notes = Vec::new();
    if short > 0 {
        notes.push(format!(
            "{short} of {} cells hold fewer than K + 1 = {} observations and are partly or wholly fixed",
            data.cells.len(),
            num_perms + 1
        ));
    }
    run(data, &data.lexicographic(), &blocks, seed, notes)
}

/// `L0` maximizing `L0 · #{(i, j) : ℓ_ij >= L0}`; the smallest maximizer wins.
pub fn select_l0(data: &MultiIndexDataset) -> Result<usize> {
    let sizes: Vec<usize> = data.cells.values().map(Vec::len).collect();
    let top = sizes.iter().copied().max().unwrap_or(0);
    (1..=top)
        .map(|l0| (l0 * sizes.iter().filter(|&&s| s >= l0).count(), l0))
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .map(|(_, l0)| l0)
        .ok_or(Error::NoEligibleCells { l0: 1 })
}

/// Settings of [`irregular_test`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrregularConfig {
    pub l0: usize,
    pub num_perms: usize,
    pub repeats: usize,
    pub solver: Solver,
    pub min_block: usize,
}

impl IrregularConfig {
    pub fn new(l0: usize, num_perms: usize) -> Self {
        IrregularConfig {
            l0,
            num_perms,
            repeats: 100,
            solver: Solver::default(),
            min_block: 2,
        }
    }
}

/// Median p-value over repeated trim-and-test runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrregularReport {
    pub median_pval: f64,
    pub reports: Vec<TestReport>,
    pub cover: BicliqueCover,
    pub mask_cells: usize,
}

/// Mask of cells holding at least `l0` observations.
pub fn eligibility_mask(data: &MultiIndexDataset, l0: usize) -> Mask {
    Mask::from_fn(data.m, data.n, |i, j| data.cell_size(i, j) >= l0)
}

/// Thresholds cells at `L0`, decomposes the eligibility mask into fully
/// observed blocks, and repeats `R` times: draw `L0` records uniformly from
/// every retained cell and permute rows, columns and within-cell slots
/// blockwise. Reports the lower median p-value.
pub fn irregular_test(data: &MultiIndexDataset, config: &IrregularConfig, seed: u64) -> Result<IrregularReport> {
    let l0 = config.l0;
    if l0 == 0 || config.repeats == 0 {
        return Err(Error::InvalidArgument("L0 and the number of repeats must be positive".into()));
    }
    let mask = eligibility_mask(data, l0);
    if mask.is_empty() {
        return Err(Error::NoEligibleCells { l0 });
    }
    let solver = match config.solver {
        Solver::Greedy { restarts, seed: s } => Solver::Greedy { restarts, seed: rng::sub_seed(seed ^ s, "solver", 0) },
        Solver::Exact => Solver::Exact,
    };
    let cover = biclique_decompose(&mask, solver, config.min_block)?;
    if cover.blocks.is_empty() {
        return Err(Error::DegenerateInput(format!(
            "no fully observed block with both sides >= {} among cells with at least {l0} observations",
            config.min_block
        )));
    }
    let reports = (0..config.repeats)
        .into_par_iter()
        .map(|r| irregular_run(data, &cover, config, rng::sub_seed(seed, "repeat", r as u64)))
        .collect::<Result<Vec<_>>>()?;
    let median_pval = median_of(&reports.iter().map(|r| r.pval).collect::<Vec<_>>())?;
    Ok(IrregularReport { median_pval, reports, cover, mask_cells: mask.count() })
}

/// Trimmed stacking order and axis blocks for one repetition.
pub fn irregular_layout(
    data: &MultiIndexDataset,
    cover: &BicliqueCover,
    l0: usize,
    num_perms: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<AxisBlock>)> {
    let mut order = Vec::with_capacity(cover.cell_count() * l0);
    let mut blocks = Vec::with_capacity(cover.blocks.len());
    for (q, b) in cover.blocks.iter().enumerate() {
        let offset = order.len();
        for &i in &b.rows {
            for &j in &b.cols {
                let list = data.cells.get(&(i, j)).map(Vec::as_slice).unwrap_or(&[]);
                if list.len() < l0 {
                    return Err(Error::MissingData { i, j });
                }
                let cell = (i - 1) * data.n + (j - 1);
                let mut keep = sample(&mut rng::stream(seed, "subsample", cell as u64), list.len(), l0).into_vec();
                keep.sort_unstable();
                order.extend(keep.into_iter().map(|t| list[t]));
            }
        }
        blocks.push(AxisBlock::new(
            offset,
            vec![
                axis_family(b.rows.len(), num_perms, seed, "rows", q as u64)?,
                axis_family(b.cols.len(), num_perms, seed, "cols", q as u64)?,
                axis_family(l0, num_perms, seed, "layers", q as u64)?,
            ],
        )?);
    }
    Ok((order, blocks))
}

fn irregular_run(data: &MultiIndexDataset, cover: &BicliqueCover, config: &IrregularConfig, seed: u64) -> Result<TestReport> {
    let (order, blocks) = irregular_layout(data, cover, config.l0, config.num_perms, seed)?;
    let k1 = config.num_perms + 1;
    let short = cover
        .blocks
        .iter()
        .filter(|b| b.rows.len() < k1 && b.cols.len() < k1 && config.l0 < k1)
        .count();
    let mut notes = Vec::new();
    if short > 0 {
        notes.push(format!("{short} blocks have every axis shorter than K + 1 and stay fixed"));
    }
    run(data, &order, &blocks, seed, notes)
}

/// Concatenated family of a layout or irregular design, as stacked-row
/// permutations (identity first).
pub fn family_of(blocks: &[AxisBlock]) -> Result<Vec<Permutation>> {
    let n_obs = blocks.iter().map(|b| b.offset + b.len()).max().unwrap_or(0);
    stacked_family(blocks, n_obs)
}
