//! Dyadic data model, lexicographic stacking and two-way permutation actions.
//!
//! Cell indices are 1-based at the public boundary, matching the usual
//! `(i, j)` notation for dyads. Internally everything is stored 0-based and
//! the translation happens in [`row_index`] and the `*_one_based` helpers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stacked row of cell `(i, j)` (both 1-based) in an array with `n_cols`
/// columns, returned 0-based: `(i - 1) * n_cols + (j - 1)`.
///
/// The 1-based row number is this value plus one, i.e. `(i - 1) n + j`.
#[inline]
pub fn row_index(i: usize, j: usize, n_cols: usize) -> usize {
    debug_assert!(i >= 1 && j >= 1 && j <= n_cols);
    (i - 1) * n_cols + (j - 1)
}

/// A bijection on `{0, .., n-1}`, stored as its image table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    /// Builds from a 0-based image table, checking bijectivity.
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &t in &images {
            if t >= n || seen[t] {
                return Err(Error::InvalidArgument(format!(
                    "image table {images:?} is not a bijection"
                )));
            }
            seen[t] = true;
        }
        Ok(Permutation(images))
    }

    /// Builds from a 1-based image table, e.g. `[2, 3, 1]` for the 3-cycle.
    pub fn from_one_based(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return Err(Error::InvalidArgument("1-based images must be >= 1".into()));
        }
        Self::from_images(images.iter().map(|&t| t - 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Image of `i` (0-based).
    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    pub fn images_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|&t| t + 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &t)| i == t)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &t) in self.0.iter().enumerate() {
            inv[t] = i;
        }
        Permutation(inv)
    }

    /// `self ∘ other`, i.e. `i ↦ self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::Dimension(format!(
                "cannot compose permutations on {} and {} points",
                self.len(),
                other.len()
            )));
        }
        Ok(Permutation(other.0.iter().map(|&t| self.0[t]).collect()))
    }

    pub fn fixed_points(&self) -> usize {
        self.0.iter().enumerate().filter(|(i, &t)| *i == t).count()
    }

    /// Sorted cycle lengths.
    pub fn cycle_type(&self) -> Vec<usize> {
        let n = self.0.len();
        let mut seen = vec![false; n];
        let mut lengths = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.0[i];
                len += 1;
            }
            lengths.push(len);
        }
        lengths.sort_unstable();
        lengths
    }
}

/// A row map paired with a column map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoWayPermutation {
    pub pi: Permutation,
    pub sigma: Permutation,
}

impl TwoWayPermutation {
    pub fn new(pi: Permutation, sigma: Permutation) -> Self {
        TwoWayPermutation { pi, sigma }
    }

    pub fn identity(n_rows: usize, n_cols: usize) -> Self {
        TwoWayPermutation {
            pi: Permutation::identity(n_rows),
            sigma: Permutation::identity(n_cols),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.pi.is_identity() && self.sigma.is_identity()
    }

    pub fn inverse(&self) -> Self {
        TwoWayPermutation {
            pi: self.pi.inverse(),
            sigma: self.sigma.inverse(),
        }
    }

    /// Source row for every stacked output row: output row of `(i, j)` reads
    /// input row of `(pi(i), sigma(j))`.
    pub fn stacked_map(&self) -> Vec<usize> {
        let (m, n) = (self.pi.len(), self.sigma.len());
        let mut map = Vec::with_capacity(m * n);
        for i in 0..m {
            let src_row = self.pi.apply(i) * n;
            for j in 0..n {
                map.push(src_row + self.sigma.apply(j));
            }
        }
        map
    }
}

/// Componentwise composition `(g.pi ∘ h.pi, g.sigma ∘ h.sigma)`.
pub fn compose(g: &TwoWayPermutation, h: &TwoWayPermutation) -> Result<TwoWayPermutation> {
    Ok(TwoWayPermutation {
        pi: g.pi.compose(&h.pi)?,
        sigma: g.sigma.compose(&h.sigma)?,
    })
}

/// An ordered group of two-way permutations; member 0 is the identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationFamily {
    members: Vec<TwoWayPermutation>,
}

impl PermutationFamily {
    pub fn new(members: Vec<TwoWayPermutation>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty permutation family".into()))?;
        if !first.is_identity() {
            return Err(Error::InvalidArgument(
                "member 0 of a permutation family must be the identity".into(),
            ));
        }
        let (m, n) = (first.pi.len(), first.sigma.len());
        if members.iter().any(|g| g.pi.len() != m || g.sigma.len() != n) {
            return Err(Error::Dimension("family members act on different index sets".into()));
        }
        Ok(PermutationFamily { members })
    }

    pub fn members(&self) -> &[TwoWayPermutation] {
        &self.members
    }

    /// Number of non-identity members `K`.
    pub fn num_perms(&self) -> usize {
        self.members.len() - 1
    }

    pub fn n_rows(&self) -> usize {
        self.members[0].pi.len()
    }

    pub fn n_cols(&self) -> usize {
        self.members[0].sigma.len()
    }

    /// Stacked source maps of members `1..=K`.
    pub fn stacked_maps(&self) -> Vec<Vec<usize>> {
        self.members[1..].iter().map(|g| g.stacked_map()).collect()
    }
}

/// Values carried by an observed dyad.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub y: f64,
    pub d: Vec<f64>,
    pub x: Vec<f64>,
}

/// Which per-cell quantity to stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Outcome,
    Treatment,
    Covariates,
}

/// An `n_rows × n_cols` grid of dyads. Unobserved cells are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadArray {
    n_rows: usize,
    n_cols: usize,
    d_dim: usize,
    p_dim: usize,
    cells: Vec<Option<Cell>>,
}

impl DyadArray {
    /// An empty (all unobserved) array.
    pub fn new(n_rows: usize, n_cols: usize, d_dim: usize, p_dim: usize) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Dimension("array needs at least one row and one column".into()));
        }
        Ok(DyadArray {
            n_rows,
            n_cols,
            d_dim,
            p_dim,
            cells: vec![None; n_rows * n_cols],
        })
    }

    /// Fully observed array from a generator over 1-based `(i, j)`.
    pub fn from_fn<F>(n_rows: usize, n_cols: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Cell,
    {
        let first = f(1, 1);
        let mut array = Self::new(n_rows, n_cols, first.d.len(), first.x.len())?;
        array.set(1, 1, first)?;
        for i in 1..=n_rows {
            for j in 1..=n_cols {
                if (i, j) != (1, 1) {
                    array.set(i, j, f(i, j))?;
                }
            }
        }
        Ok(array)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn d_dim(&self) -> usize {
        self.d_dim
    }

    pub fn p_dim(&self) -> usize {
        self.p_dim
    }

    fn check_index(&self, i: usize, j: usize) -> Result<()> {
        if i == 0 || j == 0 || i > self.n_rows || j > self.n_cols {
            return Err(Error::Dimension(format!(
                "cell ({i}, {j}) outside 1..={} x 1..={}",
                self.n_rows, self.n_cols
            )));
        }
        Ok(())
    }

    pub fn set(&mut self, i: usize, j: usize, cell: Cell) -> Result<()> {
        self.check_index(i, j)?;
        if cell.d.len() != self.d_dim || cell.x.len() != self.p_dim {
            return Err(Error::Dimension(format!(
                "cell ({i}, {j}) has d/x lengths {}/{}, expected {}/{}",
                cell.d.len(),
                cell.x.len(),
                self.d_dim,
                self.p_dim
            )));
        }
        let idx = row_index(i, j, self.n_cols);
        self.cells[idx] = Some(cell);
        Ok(())
    }

    pub fn clear(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_index(i, j)?;
        let idx = row_index(i, j, self.n_cols);
        self.cells[idx] = None;
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&Cell> {
        if self.check_index(i, j).is_err() {
            return None;
        }
        self.cells[row_index(i, j, self.n_cols)].as_ref()
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.get(i, j).is_some()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.cells.iter().all(Option::is_some)
    }

    /// Stacks every cell of a fully observed array in lexicographic order.
    pub fn stack_all(&self) -> Result<StackedDesign> {
        let cells: Vec<(usize, usize)> = (1..=self.n_rows)
            .flat_map(|i| (1..=self.n_cols).map(move |j| (i, j)))
            .collect();
        self.stack_cells(&cells)
    }

    /// Stacks the given 1-based cells in the order supplied.
    pub fn stack_cells(&self, cells: &[(usize, usize)]) -> Result<StackedDesign> {
        let n_obs = cells.len();
        let mut y = DVector::zeros(n_obs);
        let mut d = DMatrix::zeros(n_obs, self.d_dim);
        let mut x = DMatrix::zeros(n_obs, self.p_dim);
        for (r, &(i, j)) in cells.iter().enumerate() {
            self.check_index(i, j)?;
            let cell = self.get(i, j).ok_or(Error::MissingData { i, j })?;
            y[r] = cell.y;
            for (c, v) in cell.d.iter().enumerate() {
                d[(r, c)] = *v;
            }
            for (c, v) in cell.x.iter().enumerate() {
                x[(r, c)] = *v;
            }
        }
        Ok(StackedDesign {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            y,
            d,
            x,
            cells: cells.to_vec(),
        })
    }
}

/// Stacked outcome, treatment and covariate matrices sharing one row order.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedDesign {
    pub n_rows: usize,
    pub n_cols: usize,
    pub y: DVector<f64>,
    pub d: DMatrix<f64>,
    pub x: DMatrix<f64>,
    /// 1-based cell held by each stacked row.
    pub cells: Vec<(usize, usize)>,
}

impl StackedDesign {
    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    /// Rebuilds the grid from a complete stacking.
    pub fn unstack(&self) -> Result<DyadArray> {
        let mut array = DyadArray::new(self.n_rows, self.n_cols, self.d.ncols(), self.x.ncols())?;
        for (r, &(i, j)) in self.cells.iter().enumerate() {
            array.set(
                i,
                j,
                Cell {
                    y: self.y[r],
                    d: self.d.row(r).iter().copied().collect(),
                    x: self.x.row(r).iter().copied().collect(),
                },
            )?;
        }
        Ok(array)
    }
}

/// Stacks one field of a fully observed array as an `N × width` matrix
/// (`width = 1` for the outcome).
pub fn stack(array: &DyadArray, field: Field) -> Result<DMatrix<f64>> {
    let design = array.stack_all()?;
    Ok(match field {
        Field::Outcome => DMatrix::from_column_slice(design.n_obs(), 1, design.y.as_slice()),
        Field::Treatment => design.d,
        Field::Covariates => design.x,
    })
}

/// Reorders rows: output row `r` is input row `map[r]`.
pub fn permute_rows(m: &DMatrix<f64>, map: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(map.len(), m.ncols(), |r, c| m[(map[r], c)])
}

pub fn permute_vector(v: &DVector<f64>, map: &[usize]) -> DVector<f64> {
    DVector::from_fn(map.len(), |r, _| v[map[r]])
}

/// Applies a two-way permutation to a stacked `n_rows·n_cols × w` object:
/// output row of `(i, j)` holds input row of `(pi(i), sigma(j))`.
pub fn apply_two_way(
    stacked: &DMatrix<f64>,
    perm: &TwoWayPermutation,
    n_rows: usize,
    n_cols: usize,
) -> Result<DMatrix<f64>> {
    if stacked.nrows() != n_rows * n_cols || perm.pi.len() != n_rows || perm.sigma.len() != n_cols
    {
        return Err(Error::Dimension(format!(
            "stacked object has {} rows, permutation acts on {}x{}, grid is {n_rows}x{n_cols}",
            stacked.nrows(),
            perm.pi.len(),
            perm.sigma.len()
        )));
    }
    Ok(permute_rows(stacked, &perm.stacked_map()))
}

/// Aggregation level of a covariate for [`effective_variance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateLevel {
    Dyad,
    Node,
}

/// Denominator used for the variance in [`effective_variance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceConvention {
    /// Divide by the number of values.
    #[default]
    Population,
    /// Divide by the number of values minus one.
    Sample,
}

/// Variance scaled by the effective number of independent units:
/// `n² · Var` for dyad-level columns and `n · Var` for node-level columns.
pub fn effective_variance(
    column: &[f64],
    level: CovariateLevel,
    n: usize,
    convention: VarianceConvention,
) -> Result<f64> {
    if column.len() < 2 {
        return Err(Error::DegenerateInput(
            "effective variance needs at least two values".into(),
        ));
    }
    let len = column.len() as f64;
    let mean = column.iter().sum::<f64>() / len;
    let ss: f64 = column.iter().map(|v| (v - mean).powi(2)).sum();
    let var = match convention {
        VarianceConvention::Population => ss / len,
        VarianceConvention::Sample => ss / (len - 1.0),
    };
    let n = n as f64;
    Ok(match level {
        CovariateLevel::Dyad => n * n * var,
        CovariateLevel::Node => n * var,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar_array(n_rows: usize, n_cols: usize, f: impl Fn(usize, usize) -> f64) -> DyadArray {
        DyadArray::from_fn(n_rows, n_cols, |i, j| Cell {
            y: f(i, j),
            d: vec![f(i, j) * 2.0],
            x: vec![1.0, i as f64],
        })
        .unwrap()
    }

    fn perm(images: &[usize]) -> Permutation {
        Permutation::from_one_based(images).unwrap()
    }

    #[test]
    fn stacking_is_lexicographic() {
        let a = scalar_array(2, 2, |i, j| (10 * i + j) as f64);
        let y = stack(&a, Field::Outcome).unwrap();
        assert_eq!(y.as_slice(), &[11.0, 12.0, 21.0, 22.0]);
        // cell (2,1) sits at 1-based row (2-1)*2+1 = 3
        assert_eq!(row_index(2, 1, 2) + 1, 3);
        assert_eq!(y[row_index(2, 1, 2)], 21.0);

        let a = scalar_array(3, 3, |i, j| (10 * i + j) as f64);
        let y = stack(&a, Field::Outcome).unwrap();
        assert_eq!(
            y.as_slice(),
            &[11.0, 12.0, 13.0, 21.0, 22.0, 23.0, 31.0, 32.0, 33.0]
        );
        let x = stack(&a, Field::Covariates).unwrap();
        assert_eq!(x.shape(), (9, 2));
        assert_eq!(x[(4, 1)], 2.0);
    }

    #[test]
    fn single_cell_stack() {
        let a = scalar_array(1, 1, |_, _| 5.0);
        assert_eq!(stack(&a, Field::Outcome).unwrap().as_slice(), &[5.0]);
    }

    #[test]
    fn rectangular_stacking() {
        let a = scalar_array(2, 3, |i, j| (10 * i + j) as f64);
        let y = stack(&a, Field::Outcome).unwrap();
        assert_eq!(y.as_slice(), &[11.0, 12.0, 13.0, 21.0, 22.0, 23.0]);
    }

    #[test]
    fn stacking_unobserved_cell_fails() {
        let mut a = scalar_array(2, 2, |i, j| (i + j) as f64);
        a.clear(1, 2).unwrap();
        assert_eq!(
            stack(&a, Field::Outcome).unwrap_err(),
            Error::MissingData { i: 1, j: 2 }
        );
    }

    #[test]
    fn mismatched_cell_lengths_rejected() {
        let mut a = DyadArray::new(2, 2, 1, 2).unwrap();
        let bad = Cell { y: 0.0, d: vec![1.0, 2.0], x: vec![1.0, 1.0] };
        assert!(matches!(a.set(1, 1, bad), Err(Error::Dimension(_))));
        assert!(a.set(3, 1, Cell { y: 0.0, d: vec![1.0], x: vec![0.0, 0.0] }).is_err());
    }

    #[test]
    fn apply_identity_and_row_swap() {
        let v = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let id = TwoWayPermutation::identity(2, 2);
        assert_eq!(apply_two_way(&v, &id, 2, 2).unwrap(), v);

        let swap = TwoWayPermutation::new(perm(&[2, 1]), perm(&[1, 2]));
        let out = apply_two_way(&v, &swap, 2, 2).unwrap();
        assert_eq!(out.as_slice(), &[3.0, 4.0, 1.0, 2.0]);

        let back = apply_two_way(&out, &swap.inverse(), 2, 2).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn apply_rejects_shape_mismatch() {
        let v = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let id = TwoWayPermutation::identity(2, 2);
        assert!(matches!(apply_two_way(&v, &id, 2, 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn composition_examples() {
        let h = TwoWayPermutation::new(perm(&[2, 3, 1]), perm(&[3, 1, 2]));
        let id = TwoWayPermutation::identity(3, 3);
        assert_eq!(compose(&id, &h).unwrap(), h);
        assert!(compose(&h, &h.inverse()).unwrap().is_identity());

        // shifts by 1 and by 2 on three points compose to the identity
        let s1 = perm(&[2, 3, 1]);
        let s2 = perm(&[3, 1, 2]);
        assert!(s1.compose(&s2).unwrap().is_identity());

        let bad = TwoWayPermutation::identity(2, 3);
        assert!(matches!(compose(&bad, &h), Err(Error::Dimension(_))));
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::from_one_based(&[1, 1]).is_err());
        assert!(Permutation::from_one_based(&[0, 1]).is_err());
        assert_eq!(perm(&[2, 3, 1]).cycle_type(), vec![3]);
        assert_eq!(perm(&[2, 1, 3]).fixed_points(), 1);
    }

    #[test]
    fn effective_variance_examples() {
        let ev = |c: &[f64], l, conv| effective_variance(c, l, 2, conv).unwrap();
        use CovariateLevel::*;
        use VarianceConvention::*;
        assert_eq!(ev(&[3.0, 3.0, 3.0], Node, Population), 0.0);
        // (0, 2): population variance 1, unbiased variance 2
        assert_eq!(ev(&[0.0, 2.0], Node, Population), 2.0);
        assert_eq!(ev(&[0.0, 2.0], Node, Sample), 4.0);
        assert_eq!(ev(&[0.0, 2.0], Dyad, Population), 2.0 * ev(&[0.0, 2.0], Node, Population));
        assert!(matches!(
            effective_variance(&[1.0], Node, 2, Population),
            Err(Error::DegenerateInput(_))
        ));
    }

    fn arb_perm(n: usize) -> impl Strategy<Value = Permutation> {
        Just((0..n).collect::<Vec<_>>())
            .prop_shuffle()
            .prop_map(|v| Permutation::from_images(v).unwrap())
    }

    fn arb_case() -> impl Strategy<Value = (usize, usize, TwoWayPermutation, TwoWayPermutation, Vec<f64>)>
    {
        (1usize..=7, 1usize..=7).prop_flat_map(|(m, n)| {
            (
                Just(m),
                Just(n),
                (arb_perm(m), arb_perm(n)).prop_map(|(a, b)| TwoWayPermutation::new(a, b)),
                (arb_perm(m), arb_perm(n)).prop_map(|(a, b)| TwoWayPermutation::new(a, b)),
                proptest::collection::vec(-100.0f64..100.0, m * n),
            )
        })
    }

    proptest! {
        #[test]
        fn unstack_round_trips(m in 1usize..6, n in 1usize..6, seed in 0u64..1000) {
            let a = scalar_array(m, n, |i, j| (seed as f64) + (i * 7 + j * 13) as f64 / 3.0);
            let back = a.stack_all().unwrap().unstack().unwrap();
            prop_assert_eq!(back, a);
        }

        #[test]
        fn action_composition_and_multiset((m, n, g, h, vals) in arb_case()) {
            let v = DMatrix::from_column_slice(m * n, 1, &vals);
            let gv = apply_two_way(&v, &g, m, n).unwrap();
            let hgv = apply_two_way(&gv, &h, m, n).unwrap();
            let direct = apply_two_way(&v, &compose(&g, &h).unwrap(), m, n).unwrap();
            prop_assert_eq!(&hgv, &direct);

            let mut a: Vec<f64> = gv.iter().copied().collect();
            let mut b = vals.clone();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }
    }
}
