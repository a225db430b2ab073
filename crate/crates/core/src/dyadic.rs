//! Minorized permutation test for dyadic regressions, its shifted-null
//! variant, confidence intervals by test inversion, and median aggregation.
//!
//! For every non-identity group member `g_k` the test partials out
//! `[X | X_{g_k}]` with a member-specific `V_k` and compares
//!
//! ```text
//! a_k = ‖Dᵀ V_k V_kᵀ y‖,    b_k = ‖Dᵀ V_k V_kᵀ y_{g_k}‖
//! pval = (1 + #{k : min_j a_j ≤ b_k}) / (K + 1).
//! ```
//!
//! Everything downstream of `V_k` is linear in the hypothesised coefficient,
//! so [`PreparedTest`] keeps the small summaries `(VᵀD)ᵀVᵀD`, `(VᵀD)ᵀVᵀD_g`,
//! `(VᵀD)ᵀVᵀy` and `(VᵀD)ᵀVᵀy_g` and evaluates the p-value for any `b0` in
//! `O(K d²)`. The same engine serves every design in the crate: callers only
//! supply the stacked data and the stacked source map of each member.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::thin_svd;
use crate::error::{Error, Result};
use crate::model::{permute_rows, permute_vector, PermutationFamily};
use crate::projector::{RankTol, ResidualProjector};

/// Relative size below which statistics are treated as numerically tied.
///
/// Ties only ever count toward the p-value, so the tolerance can only make the
/// test more conservative.
pub const STAT_RTOL: f64 = 1e-10;

/// Result of one permutation test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub pval: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub num_perms: usize,
    pub min_a: f64,
    /// Smallest attainable p-value, `1/(K+1)`.
    pub alpha_floor: f64,
    pub seed: Option<u64>,
    /// True when the treatment is annihilated by every `V_k`.
    pub degenerate: bool,
    pub notes: Vec<String>,
}

impl TestReport {
    /// Number of `k` counted in the p-value numerator (excluding the `+1`).
    pub fn exceedances(&self) -> usize {
        (self.pval * (self.num_perms + 1) as f64).round() as usize - 1
    }
}

#[derive(Debug, Clone)]
struct MemberSummary {
    projector: ResidualProjector,
    /// `V_kᵀD`
    vd: DMatrix<f64>,
    /// `(VᵀD)ᵀVᵀD`
    gram: DMatrix<f64>,
    /// `(VᵀD)ᵀVᵀD_g`
    cross: DMatrix<f64>,
    /// `(VᵀD)ᵀVᵀy`
    u: DVector<f64>,
    /// `(VᵀD)ᵀVᵀy_g`
    w: DVector<f64>,
}

/// Per-member projections, reusable across hypothesised coefficients.
#[derive(Debug, Clone)]
pub struct PreparedTest {
    n_obs: usize,
    x: DMatrix<f64>,
    d: DMatrix<f64>,
    y: DVector<f64>,
    maps: Vec<Vec<usize>>,
    members: Vec<MemberSummary>,
    d_norm: f64,
    degenerate: bool,
    notes: Vec<String>,
}

fn check_shapes(x: &DMatrix<f64>, d: &DMatrix<f64>, y: &DVector<f64>) -> Result<usize> {
    let n_obs = y.len();
    if x.nrows() != n_obs || d.nrows() != n_obs {
        return Err(Error::Dimension(format!(
            "y has {n_obs} rows, X has {}, D has {}",
            x.nrows(),
            d.nrows()
        )));
    }
    if d.ncols() == 0 {
        return Err(Error::Dimension("D needs at least one column".into()));
    }
    Ok(n_obs)
}

/// `(a_k, b_k)` for one member computed directly from its projector.
pub fn statistics_for_member(
    d: &DMatrix<f64>,
    y: &DVector<f64>,
    map: &[usize],
    projector: &ResidualProjector,
) -> Result<(f64, f64)> {
    if map.len() != y.len() || d.nrows() != y.len() {
        return Err(Error::Dimension("member map, D and y must share N".into()));
    }
    let vd = projector.project_matrix(d)?;
    let vy = projector.project(y)?;
    let vyg = projector.project(&permute_vector(y, map))?;
    Ok(((vd.transpose() * vy).norm(), (vd.transpose() * vyg).norm()))
}

impl PreparedTest {
    /// Builds `V_k` and the linear summaries for every member map.
    ///
    /// `maps[k]` gives, for each stacked row, the row it reads under member
    /// `k + 1`; the identity member is implicit and must not be included.
    pub fn new(
        x: &DMatrix<f64>,
        d: &DMatrix<f64>,
        y: &DVector<f64>,
        maps: Vec<Vec<usize>>,
        policy: RankTol,
    ) -> Result<Self> {
        let n_obs = check_shapes(x, d, y)?;
        if maps.is_empty() {
            return Err(Error::InvalidArgument("need at least one non-identity member".into()));
        }
        if let Some(bad) = maps.iter().find(|m| m.len() != n_obs) {
            return Err(Error::Dimension(format!(
                "member map of length {} for N = {n_obs}",
                bad.len()
            )));
        }
        if n_obs <= 2 * x.ncols() {
            return Err(Error::InsufficientDimension { n_obs, p: x.ncols() });
        }

        let members = maps
            .par_iter()
            .map(|map| -> Result<MemberSummary> {
                let xg = permute_rows(x, map);
                let projector = ResidualProjector::new(x, &xg, policy)?;
                let vd = projector.project_matrix(d)?;
                let vdg = projector.project_matrix(&permute_rows(d, map))?;
                let vy = projector.project(y)?;
                let vyg = projector.project(&permute_vector(y, map))?;
                let vdt = vd.transpose();
                Ok(MemberSummary {
                    gram: &vdt * &vd,
                    cross: &vdt * vdg,
                    u: &vdt * vy,
                    w: &vdt * vyg,
                    vd,
                    projector,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let d_norm = d.norm();
        let degenerate = d_norm == 0.0
            || members
                .iter()
                .all(|m| m.vd.norm() <= STAT_RTOL.sqrt() * d_norm);
        let mut notes = Vec::new();
        if degenerate {
            notes.push(
                "treatment lies in the nuisance span for every member; statistic is identically zero and pval = 1"
                    .to_string(),
            );
        }
        let identity_like = maps
            .iter()
            .filter(|m| m.iter().enumerate().all(|(r, &s)| r == s))
            .count();
        if identity_like > 0 {
            notes.push(format!(
                "{identity_like} of {} members act as the identity on the stacked data",
                maps.len()
            ));
        }
        Ok(PreparedTest {
            n_obs,
            x: x.clone(),
            d: d.clone(),
            y: y.clone(),
            maps,
            members,
            d_norm,
            degenerate,
            notes,
        })
    }

    /// Same as [`PreparedTest::new`] for a two-way family acting on a fully
    /// observed `n_rows × n_cols` stacking.
    pub fn from_family(
        x: &DMatrix<f64>,
        d: &DMatrix<f64>,
        y: &DVector<f64>,
        family: &PermutationFamily,
        policy: RankTol,
    ) -> Result<Self> {
        let cells = family.n_rows() * family.n_cols();
        if y.len() != cells {
            return Err(Error::Dimension(format!(
                "family acts on {}x{} cells but y has {} rows",
                family.n_rows(),
                family.n_cols(),
                y.len()
            )));
        }
        Self::new(x, d, y, family.stacked_maps(), policy)
    }

    pub fn num_perms(&self) -> usize {
        self.members.len()
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn d_dim(&self) -> usize {
        self.d.ncols()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn projector(&self, k: usize) -> &ResidualProjector {
        &self.members[k].projector
    }

    pub fn maps(&self) -> &[Vec<usize>] {
        &self.maps
    }

    fn residual_norm(&self, b0: &DVector<f64>) -> f64 {
        (&self.y - &self.d * b0).norm()
    }

    /// `(a_k, b_k)` for the null `β = b0`.
    pub fn statistics(&self, b0: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        self.members
            .iter()
            .map(|m| ((&m.u - &m.gram * b0).norm(), (&m.w - &m.cross * b0).norm()))
            .unzip()
    }

    fn check_b0(&self, b0: &DVector<f64>) -> Result<()> {
        if b0.len() != self.d.ncols() {
            return Err(Error::Dimension(format!(
                "b0 has length {}, D has {} columns",
                b0.len(),
                self.d.ncols()
            )));
        }
        Ok(())
    }

    fn tie_tolerance(&self, b0: &DVector<f64>) -> f64 {
        STAT_RTOL * self.d_norm * self.residual_norm(b0)
    }

    /// p-value only; cheaper than [`PreparedTest::test`].
    pub fn pvalue(&self, b0: &DVector<f64>) -> f64 {
        let k = self.members.len();
        if self.degenerate {
            return 1.0;
        }
        let (a, b) = self.statistics(b0);
        let min_a = a.iter().copied().fold(f64::INFINITY, f64::min);
        let tol = self.tie_tolerance(b0);
        let count = b.iter().filter(|&&bk| min_a <= bk + tol).count();
        (1 + count) as f64 / (k + 1) as f64
    }

    /// Full report for the null `β = b0`.
    pub fn test(&self, b0: &DVector<f64>) -> Result<TestReport> {
        self.check_b0(b0)?;
        let k = self.members.len();
        let (a, b) = self.statistics(b0);
        let min_a = a.iter().copied().fold(f64::INFINITY, f64::min);
        let mut notes = self.notes.clone();
        let tol = self.tie_tolerance(b0);
        if !self.degenerate && a.iter().all(|&ak| ak <= tol) {
            notes.push("all a_k vanish under this null; pval = 1".into());
        }
        Ok(TestReport {
            pval: self.pvalue(b0),
            a,
            b,
            num_perms: k,
            min_a,
            alpha_floor: 1.0 / (k + 1) as f64,
            seed: None,
            degenerate: self.degenerate,
            notes,
        })
    }

    /// p-value obtained by replacing the observed comparison values with the
    /// minorized function of the true errors, `f*(ε_{g_k}) = min_j f_j(ε_{g_k})`
    /// where `f_j(v) = ‖(V_jᵀD)ᵀ V_jᵀ v‖`. Only computable when `ε` is known.
    pub fn infeasible_pvalue(&self, eps: &DVector<f64>) -> Result<f64> {
        if eps.len() != self.n_obs {
            return Err(Error::Dimension("error vector length differs from N".into()));
        }
        let f_star = |v: &DVector<f64>| -> Result<f64> {
            let mut best = f64::INFINITY;
            for m in &self.members {
                let pv = m.projector.project(v)?;
                best = best.min((m.vd.transpose() * pv).norm());
            }
            Ok(best)
        };
        let base = f_star(eps)?;
        let k = self.members.len();
        let mut count = 0;
        for map in &self.maps {
            if base <= f_star(&permute_vector(eps, map))? {
                count += 1;
            }
        }
        Ok((1 + count) as f64 / (k + 1) as f64)
    }

    /// Inverts the shifted test over `b` (requires `d = 1`).
    pub fn invert_ci(&self, alpha: f64, grid: &GridConfig) -> Result<ConfidenceInterval> {
        if self.d.ncols() != 1 {
            return Err(Error::InvalidArgument(
                "confidence intervals are only available for a single treatment column".into(),
            ));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha = {alpha} not in (0, 1)")));
        }
        let floor = 1.0 / (self.num_perms() + 1) as f64;
        if alpha < floor {
            return Err(Error::Resolution { alpha, floor });
        }
        if grid.points < 3 {
            return Err(Error::InvalidArgument("grid needs at least 3 points".into()));
        }
        let (center, scale) = ols_point_and_scale(&self.x, &self.d, &self.y)?;
        let scale = if scale.is_finite() && scale > 0.0 {
            scale
        } else {
            center.abs().max(1.0)
        };
        if self.degenerate {
            return Ok(ConfidenceInterval {
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
                alpha,
                grid: GridSummary { center, scale, half_width: f64::INFINITY, points: 0, expansions: 0 },
                open_lower: true,
                open_upper: true,
                empty: false,
            });
        }

        let accept = |b: f64| self.pvalue(&DVector::from_element(1, b)) > alpha;
        let mut half = grid.half_width_scales * scale;
        let mut expansions = 0;
        let (mut lo, mut hi, mut open_lower, mut open_upper);
        let mut values;
        loop {
            values = linspace(center - half, center + half, grid.points);
            let accepted: Vec<bool> = values.iter().map(|&b| accept(b)).collect();
            let first = accepted.iter().position(|&a| a);
            let last = accepted.iter().rposition(|&a| a);
            let (Some(first), Some(last)) = (first, last) else {
                return Ok(ConfidenceInterval {
                    lower: center,
                    upper: center,
                    alpha,
                    grid: GridSummary { center, scale, half_width: half, points: grid.points, expansions },
                    open_lower: false,
                    open_upper: false,
                    empty: true,
                });
            };
            lo = first;
            hi = last;
            open_lower = first == 0;
            open_upper = last == grid.points - 1;
            if !(open_lower || open_upper) || expansions >= grid.max_expansions {
                break;
            }
            half *= 2.0;
            expansions += 1;
        }

        let bisect = |mut inside: f64, mut outside: f64| {
            for _ in 0..grid.refine_steps {
                let mid = 0.5 * (inside + outside);
                if accept(mid) {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            inside
        };
        let lower = if open_lower {
            f64::NEG_INFINITY
        } else {
            bisect(values[lo], values[lo - 1])
        };
        let upper = if open_upper {
            f64::INFINITY
        } else {
            bisect(values[hi], values[hi + 1])
        };
        Ok(ConfidenceInterval {
            lower,
            upper,
            alpha,
            grid: GridSummary { center, scale, half_width: half, points: grid.points, expansions },
            open_lower,
            open_upper,
            empty: false,
        })
    }
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|t| lo + step * t as f64).collect()
}

/// Least-squares coefficient of the (single) treatment column and its
/// heteroskedasticity-robust (HC0) standard error, from `y ~ [X | D]`.
pub fn ols_point_and_scale(
    x: &DMatrix<f64>,
    d: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(f64, f64)> {
    let n_obs = check_shapes(x, d, y)?;
    let p = x.ncols();
    let cols = p + d.ncols();
    let mut z = DMatrix::zeros(n_obs, cols);
    z.columns_mut(0, p).copy_from(x);
    z.columns_mut(p, d.ncols()).copy_from(d);
    let svd = thin_svd(&z);
    let smax = svd.sigma.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Err(Error::DegenerateInput("least squares on an all-zero design".into()));
    }
    let cut = n_obs.max(cols) as f64 * f64::EPSILON * smax;
    let inv_s = DVector::from_fn(cols, |t, _| if svd.sigma[t] > cut { 1.0 / svd.sigma[t] } else { 0.0 });
    let coef = &svd.v * inv_s.component_mul(&(svd.u.transpose() * y));
    let resid = y - &z * &coef;
    // (ZᵀZ)⁺ = V S⁻² Vᵀ
    let bread = &svd.v * DMatrix::from_diagonal(&inv_s.map(|s| s * s)) * svd.v.transpose();
    let mut meat = DMatrix::zeros(cols, cols);
    for r in 0..n_obs {
        let zr = z.row(r).transpose();
        meat += &zr * zr.transpose() * resid[r].powi(2);
    }
    let cov = &bread * meat * &bread;
    let idx = p;
    Ok((coef[idx], cov[(idx, idx)].max(0.0).sqrt()))
}

/// Test-inversion grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub points: usize,
    /// Initial half-width in units of the robust standard error.
    pub half_width_scales: f64,
    pub max_expansions: usize,
    /// Bisection steps used to sharpen each finite endpoint.
    pub refine_steps: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { points: 201, half_width_scales: 4.0, max_expansions: 6, refine_steps: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub center: f64,
    pub scale: f64,
    pub half_width: f64,
    pub points: usize,
    pub expansions: usize,
}

/// `{b : pval(b) > α}` summarized by its hull.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub grid: GridSummary,
    pub open_lower: bool,
    pub open_upper: bool,
    /// No evaluated point was accepted.
    pub empty: bool,
}

impl ConfidenceInterval {
    pub fn contains(&self, b: f64) -> bool {
        !self.empty && self.lower <= b && b <= self.upper
    }
}

/// Tests `β = 0` against the two-way family.
pub fn procedure1(
    x: &DMatrix<f64>,
    d: &DMatrix<f64>,
    y: &DVector<f64>,
    family: &PermutationFamily,
) -> Result<TestReport> {
    shifted_test(x, d, y, &DVector::zeros(d.ncols()), family)
}

/// Tests `β = b0`, i.e. the basic test on `y − D b0`.
pub fn shifted_test(
    x: &DMatrix<f64>,
    d: &DMatrix<f64>,
    y: &DVector<f64>,
    b0: &DVector<f64>,
    family: &PermutationFamily,
) -> Result<TestReport> {
    PreparedTest::from_family(x, d, y, family, RankTol::Default)?.test(b0)
}

/// Confidence interval for a single treatment coefficient.
pub fn invert_ci(
    x: &DMatrix<f64>,
    d: &DMatrix<f64>,
    y: &DVector<f64>,
    family: &PermutationFamily,
    alpha: f64,
    grid: &GridConfig,
) -> Result<ConfidenceInterval> {
    let floor = 1.0 / (family.num_perms() + 1) as f64;
    if alpha < floor {
        return Err(Error::Resolution { alpha, floor });
    }
    PreparedTest::from_family(x, d, y, family, RankTol::Default)?.invert_ci(alpha, grid)
}

/// Lower median of a nonempty list of p-values.
pub fn median_of(pvals: &[f64]) -> Result<f64> {
    if pvals.is_empty() {
        return Err(Error::InvalidArgument("median of an empty list".into()));
    }
    let mut sorted = pvals.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[(sorted.len() - 1) / 2])
}

/// Lower median of the reports' p-values.
pub fn median_pvalue(reports: &[TestReport]) -> Result<f64> {
    median_of(&reports.iter().map(|r| r.pval).collect::<Vec<_>>())
}

/// p-value from precomputed statistics, `(1 + #{k : min a ≤ b_k}) / (K + 1)`.
pub fn pvalue_from_statistics(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::Dimension("a and b must be nonempty and of equal length".into()));
    }
    let min_a = a.iter().copied().fold(f64::INFINITY, f64::min);
    let count = b.iter().filter(|&&bk| min_a <= bk).count();
    Ok((1 + count) as f64 / (a.len() + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{permute_rows, TwoWayPermutation};
    use crate::permgroup::build_two_way_group;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(n: usize, seed: u64, beta: f64) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let nn = n * n;
        let x = DMatrix::from_fn(nn, 3, |r, c| match c {
            0 => 1.0,
            1 => z[r / n],
            _ => z[r % n],
        });
        let d = DMatrix::from_fn(nn, 1, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(nn, |r, _| {
            0.5 + x[(r, 1)] + x[(r, 2)] + beta * d[(r, 0)] + rng.random_range(-1.0..1.0)
        });
        (x, d, y)
    }

    #[test]
    fn pvalue_formula_example() {
        let p = pvalue_from_statistics(&[1.0, 2.0, 3.0, 4.0], &[0.5, 2.0, 3.0, 0.9]).unwrap();
        assert!((p - 0.6).abs() < 1e-15);
        let p = pvalue_from_statistics(&[1.0, 2.0], &[0.1, 0.2]).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
        // ties count toward the p-value
        let p = pvalue_from_statistics(&[1.0, 2.0], &[1.0, 0.0]).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn member_statistics_match_dense_oracle() {
        let (x, d, y) = toy(4, 1, 0.3);
        let fam = build_two_way_group(4, 4, 1, 7).unwrap();
        let map = fam.members()[1].stacked_map();
        let xg = permute_rows(&x, &map);
        let proj = ResidualProjector::new(&x, &xg, RankTol::Default).unwrap();
        let (a, b) = statistics_for_member(&d, &y, &map, &proj).unwrap();

        // explicit P from the dense complement
        let v = proj.complement();
        let p = &v * v.transpose();
        let yg = crate::model::permute_vector(&y, &map);
        let a_oracle = (d.transpose() * &p * &y)[(0, 0)].abs();
        let b_oracle = (d.transpose() * &p * &yg)[(0, 0)].abs();
        assert!((a - a_oracle).abs() < 1e-10);
        assert!((b - b_oracle).abs() < 1e-10);

        let prepared = PreparedTest::from_family(&x, &d, &y, &fam, RankTol::Default).unwrap();
        let (pa, pb) = prepared.statistics(&DVector::zeros(1));
        assert!((pa[0] - a).abs() < 1e-10 && (pb[0] - b).abs() < 1e-10);
    }

    #[test]
    fn outcome_in_nuisance_span_gives_zero_a() {
        let (x, d, _) = toy(5, 2, 0.0);
        let y = &x * DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let fam = build_two_way_group(5, 5, 4, 3).unwrap();
        let rep = procedure1(&x, &d, &y, &fam).unwrap();
        assert!(rep.a.iter().all(|&a| a < 1e-9));
        assert_eq!(rep.pval, 1.0);
    }

    #[test]
    fn exact_null_shift_gives_pvalue_one() {
        let (x, d, _) = toy(6, 3, 0.0);
        let beta = 0.7;
        let y = &x * DVector::from_vec(vec![0.5, 1.0, 1.0]) + &d * beta;
        let fam = build_two_way_group(6, 6, 5, 1).unwrap();
        let rep = shifted_test(&x, &d, &y, &DVector::from_element(1, beta), &fam).unwrap();
        assert_eq!(rep.pval, 1.0);
    }

    #[test]
    fn b0_zero_reproduces_procedure1() {
        let (x, d, y) = toy(6, 4, 0.4);
        let fam = build_two_way_group(6, 6, 5, 9).unwrap();
        let r1 = procedure1(&x, &d, &y, &fam).unwrap();
        let r2 = shifted_test(&x, &d, &y, &DVector::zeros(1), &fam).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.a.len(), 5);
        assert!((r1.alpha_floor - 1.0 / 6.0).abs() < 1e-15);
        let m = r1.pval * 6.0;
        assert!((m - m.round()).abs() < 1e-9 && m >= 1.0);
    }

    #[test]
    fn zero_treatment_is_degenerate() {
        let (x, _, y) = toy(5, 5, 0.0);
        let d = DMatrix::zeros(25, 1);
        let fam = build_two_way_group(5, 5, 4, 2).unwrap();
        let rep = procedure1(&x, &d, &y, &fam).unwrap();
        assert!(rep.degenerate);
        assert_eq!(rep.pval, 1.0);
        let ci = invert_ci(&x, &d, &y, &fam, 0.2, &GridConfig::default()).unwrap();
        assert!(ci.open_lower && ci.open_upper);
        assert_eq!((ci.lower, ci.upper), (f64::NEG_INFINITY, f64::INFINITY));
    }

    #[test]
    fn alpha_below_resolution_is_rejected() {
        let (x, d, y) = toy(5, 6, 0.0);
        let fam = build_two_way_group(5, 5, 4, 2).unwrap();
        assert!(matches!(
            invert_ci(&x, &d, &y, &fam, 0.1, &GridConfig::default()),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn ci_contains_accepted_points_and_excludes_far_ones() {
        let (x, d, y) = toy(10, 8, 1.0);
        let fam = build_two_way_group(10, 10, 9, 4).unwrap();
        let prep = PreparedTest::from_family(&x, &d, &y, &fam, RankTol::Default).unwrap();
        let ci = prep.invert_ci(0.1, &GridConfig::default()).unwrap();
        assert!(!ci.empty);
        assert!(ci.lower < ci.upper);
        let pv = |b: f64| prep.pvalue(&DVector::from_element(1, b));
        if ci.lower.is_finite() {
            assert!(pv(ci.lower) > 0.1);
        }
        if ci.upper.is_finite() {
            assert!(pv(ci.upper) > 0.1);
            assert!(pv(ci.upper + 100.0 * ci.grid.scale) <= 0.1);
        }
    }

    #[test]
    fn rejects_non_scalar_ci_and_bad_shapes() {
        let (x, _, y) = toy(5, 1, 0.0);
        let d2 = DMatrix::from_fn(25, 2, |r, c| ((r * 3 + c * 7) % 5) as f64);
        let fam = build_two_way_group(5, 5, 4, 2).unwrap();
        assert!(matches!(
            invert_ci(&x, &d2, &y, &fam, 0.2, &GridConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
        let rep = procedure1(&x, &d2, &y, &fam).unwrap();
        assert_eq!(rep.a.len(), 4);
        let short = DVector::zeros(24);
        assert!(matches!(procedure1(&x, &d2, &short, &fam), Err(Error::Dimension(_))));
    }

    #[test]
    fn identity_member_gives_equal_statistics() {
        let (x, d, y) = toy(4, 3, 0.2);
        let id = TwoWayPermutation::identity(4, 4).stacked_map();
        let prep = PreparedTest::new(&x, &d, &y, vec![id], RankTol::Default).unwrap();
        let (a, b) = prep.statistics(&DVector::zeros(1));
        assert!((a[0] - b[0]).abs() < 1e-12);
        assert_eq!(prep.pvalue(&DVector::zeros(1)), 1.0);
    }

    #[test]
    fn median_examples() {
        assert_eq!(median_of(&[0.3]).unwrap(), 0.3);
        assert_eq!(median_of(&[0.9, 0.2, 0.6]).unwrap(), 0.6);
        assert_eq!(median_of(&[0.9, 0.2, 0.6, 0.4]).unwrap(), 0.4);
        assert!(median_of(&[]).is_err());
    }

    #[test]
    fn invariances() {
        let (x, d, y) = toy(8, 12, 0.3);
        let fam = build_two_way_group(8, 8, 7, 5).unwrap();
        let base = procedure1(&x, &d, &y, &fam).unwrap();
        let scaled = procedure1(&x, &(&d * 3.5), &(&y * 0.25), &fam).unwrap();
        assert_eq!(base.pval, scaled.pval);
        let shifted_y = &y + &x * DVector::from_vec(vec![10.0, -3.0, 2.0]);
        let shifted = procedure1(&x, &d, &shifted_y, &fam).unwrap();
        assert_eq!(base.pval, shifted.pval);
    }
}
