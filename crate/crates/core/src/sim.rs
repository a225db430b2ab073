//! Data-generating processes and Monte Carlo drivers.
//!
//! The dyadic generator follows the random-feature recipe
//! `v_ij = σ₁ v₁ᵢ + σ₂ v₂ⱼ + v₃ᵢⱼ` with `σₖ² = φₖ / (1 − φ₁ − φ₂)`, which gives
//! correlation `φ₁` between two cells sharing a row and `φ₂` between two cells
//! sharing a column when the base draws have unit variance.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Cauchy, Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{GridConfig, PreparedTest};
use crate::error::{Error, Result};
use crate::missing::{max_balanced_side, Mask};
use crate::model::{Cell, DyadArray};
use crate::multiway::{irregular_test, IrregularConfig, MultiIndexDataset, Record};
use crate::permgroup::{build_two_way_group, default_num_perms};
use crate::projector::RankTol;
use crate::rng;

/// Base distribution of the random features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseDist {
    #[default]
    Gaussian,
    /// `exp(Z) − e^{1/2}`, a centered lognormal.
    LogNormal,
    /// Standard Cauchy. Heavy-tailed extension; no moments.
    Cauchy,
}

impl BaseDist {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            BaseDist::Gaussian => rng.sample(StandardNormal),
            BaseDist::LogNormal => {
                let z: f64 = rng.sample(StandardNormal);
                z.exp() - 0.5f64.exp()
            }
            BaseDist::Cauchy => Cauchy::new(0.0, 1.0).expect("valid scale").sample(rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomEffectsSpec {
    pub phi1: f64,
    pub phi2: f64,
    pub base: BaseDist,
    pub seed: u64,
}

impl RandomEffectsSpec {
    pub fn new(phi1: f64, phi2: f64, base: BaseDist, seed: u64) -> Result<Self> {
        let spec = RandomEffectsSpec { phi1, phi2, base, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi1 >= 0.0 && self.phi2 >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cluster correlations must be nonnegative, got {} and {}",
                self.phi1, self.phi2
            )));
        }
        if self.phi1 + self.phi2 >= 1.0 {
            return Err(Error::VarianceBudget { phi1: self.phi1, phi2: self.phi2 });
        }
        Ok(())
    }

    /// `(σ₁², σ₂²)`.
    pub fn variances(&self) -> (f64, f64) {
        let rest = 1.0 - self.phi1 - self.phi2;
        (self.phi1 / rest, self.phi2 / rest)
    }
}

/// Row-major `n_rows × n_cols` draw of the random-feature model.
fn sample_random_effects<R: Rng + ?Sized>(
    n_rows: usize,
    n_cols: usize,
    phi1: f64,
    phi2: f64,
    base: BaseDist,
    rng: &mut R,
) -> DMatrix<f64> {
    let rest = 1.0 - phi1 - phi2;
    let (s1, s2) = ((phi1 / rest).sqrt(), (phi2 / rest).sqrt());
    let rows: Vec<f64> = (0..n_rows).map(|_| base.sample(rng)).collect();
    let cols: Vec<f64> = (0..n_cols).map(|_| base.sample(rng)).collect();
    let mut grid = DMatrix::zeros(n_rows, n_cols);
    for i in 0..n_rows {
        for j in 0..n_cols {
            grid[(i, j)] = s1 * rows[i] + s2 * cols[j] + base.sample(rng);
        }
    }
    grid
}

/// `σ₁ v₁ᵢ + σ₂ v₂ⱼ + v₃ᵢⱼ` on an `n_rows × n_cols` grid.
pub fn gen_random_effects(n_rows: usize, n_cols: usize, spec: &RandomEffectsSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let mut stream = rng::stream(spec.seed, "random-effects", 0);
    Ok(sample_random_effects(n_rows, n_cols, spec.phi1, spec.phi2, spec.base, &mut stream))
}

/// Distribution of the dyadic treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovTransform {
    /// `d_ij = w_ij`
    #[default]
    Normal,
    /// `d_ij = exp(0.5 w_ij)`
    Lognormal,
}

/// Dyadic simulation design: `x_ij = (1, z_i, z_j)`, `z ~ Unif[0, 2]`,
/// `γ = (0.5, 1, 1)`, treatment from the random-feature model with
/// `φ₁ = φ₂ = 0.4`, errors from the random-feature model with `(err_phi1, err_phi2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicDgp {
    pub n: usize,
    pub beta: f64,
    pub cov: CovTransform,
    pub cov_phi: (f64, f64),
    pub err_phi1: f64,
    pub err_phi2: f64,
    pub err_base: BaseDist,
}

impl DyadicDgp {
    /// Null configuration with the given treatment law and column correlation.
    pub fn table1(n: usize, cov: CovTransform, err_phi2: f64) -> Self {
        DyadicDgp {
            n,
            beta: 0.0,
            cov,
            cov_phi: (0.4, 0.4),
            err_phi1: 0.05,
            err_phi2,
            err_base: BaseDist::Gaussian,
        }
    }

    /// Power configuration: lognormal treatment, errors with `(0, err_phi2)`.
    pub fn table4(n: usize, beta: f64, err_phi2: f64) -> Self {
        DyadicDgp {
            n,
            beta,
            cov: CovTransform::Lognormal,
            cov_phi: (0.4, 0.4),
            err_phi1: 0.0,
            err_phi2,
            err_base: BaseDist::Gaussian,
        }
    }

    pub const GAMMA: [f64; 3] = [0.5, 1.0, 1.0];
}

/// A simulated dyadic array together with its true error grid.
#[derive(Debug, Clone)]
pub struct DyadicSample {
    pub array: DyadArray,
    pub errors: DMatrix<f64>,
}

impl DyadicSample {
    /// Errors stacked in the same order as the array.
    pub fn stacked_errors(&self) -> DVector<f64> {
        let (m, n) = self.errors.shape();
        DVector::from_fn(m * n, |r, _| self.errors[(r / n, r % n)])
    }
}

pub fn gen_dyadic_dataset(dgp: &DyadicDgp, seed: u64) -> Result<DyadicSample> {
    if dgp.n < 2 {
        return Err(Error::InvalidArgument("need n >= 2".into()));
    }
    RandomEffectsSpec::new(dgp.cov_phi.0, dgp.cov_phi.1, BaseDist::Gaussian, seed)?;
    RandomEffectsSpec::new(dgp.err_phi1, dgp.err_phi2, dgp.err_base, seed)?;
    let n = dgp.n;
    let mut stream = rng::stream(seed, "dyadic-dgp", 0);
    let unif = Uniform::new(0.0, 2.0).expect("valid range");
    let z: Vec<f64> = (0..n).map(|_| unif.sample(&mut stream)).collect();
    let w = sample_random_effects(n, n, dgp.cov_phi.0, dgp.cov_phi.1, BaseDist::Gaussian, &mut stream);
    let eps = sample_random_effects(n, n, dgp.err_phi1, dgp.err_phi2, dgp.err_base, &mut stream);
    let g = DyadicDgp::GAMMA;
    let array = DyadArray::from_fn(n, n, |i, j| {
        let (i0, j0) = (i - 1, j - 1);
        let d = match dgp.cov {
            CovTransform::Normal => w[(i0, j0)],
            CovTransform::Lognormal => (0.5 * w[(i0, j0)]).exp(),
        };
        let x = vec![1.0, z[i0], z[j0]];
        let y = g[0] * x[0] + g[1] * x[1] + g[2] * x[2] + dgp.beta * d + eps[(i0, j0)];
        Cell { y, d: vec![d], x }
    })?;
    Ok(DyadicSample { array, errors: eps })
}

/// Error families for irregular designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SemiSyntheticError {
    /// `ε = exp(vᵢ u_ijl)` with standard normal `vᵢ`, `u_ijl`.
    I,
    /// Random features on `(i, j)` with `φ₁ = φ₂ = 0.1`.
    II,
    /// Random features on `(i, j)` with `φ₁ = 0.9`, `φ₂ = 0`.
    III,
}

/// One error per record `(i, j)` (1-based), from a `n_rows × n_cols` index space.
pub fn gen_semisynthetic_errors(
    records: &[(usize, usize)],
    n_rows: usize,
    n_cols: usize,
    kind: SemiSyntheticError,
    seed: u64,
) -> Result<Vec<f64>> {
    if records.iter().any(|&(i, j)| i == 0 || j == 0 || i > n_rows || j > n_cols) {
        return Err(Error::Dimension("record index outside the declared extents".into()));
    }
    let mut stream = rng::stream(seed, "semisynthetic", 0);
    let normal = |r: &mut rng::StreamRng| -> f64 { r.sample(StandardNormal) };
    Ok(match kind {
        SemiSyntheticError::I => {
            let v: Vec<f64> = (0..n_rows).map(|_| normal(&mut stream)).collect();
            records
                .iter()
                .map(|&(i, _)| (v[i - 1] * normal(&mut stream)).exp())
                .collect()
        }
        SemiSyntheticError::II | SemiSyntheticError::III => {
            let (phi1, phi2): (f64, f64) = if kind == SemiSyntheticError::II { (0.1, 0.1) } else { (0.9, 0.0) };
            let rest = 1.0 - phi1 - phi2;
            let (s1, s2) = ((phi1 / rest).sqrt(), (phi2 / rest).sqrt());
            let rows: Vec<f64> = (0..n_rows).map(|_| normal(&mut stream)).collect();
            let cols: Vec<f64> = (0..n_cols).map(|_| normal(&mut stream)).collect();
            records
                .iter()
                .map(|&(i, j)| s1 * rows[i - 1] + s2 * cols[j - 1] + normal(&mut stream))
                .collect()
        }
    })
}

/// Monte Carlo rejection summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub rejections: usize,
    pub reps: usize,
    pub rate: f64,
    pub mc_se: f64,
    pub alpha: f64,
    pub config_digest: String,
}

impl McSummary {
    pub fn from_pvalues(pvals: &[f64], alpha: f64, config_digest: String) -> Self {
        let reps = pvals.len();
        let rejections = pvals.iter().filter(|&&p| p <= alpha).count();
        let rate = if reps == 0 { 0.0 } else { rejections as f64 / reps as f64 };
        McSummary {
            rejections,
            reps,
            rate,
            mc_se: if reps == 0 { 0.0 } else { (rate * (1.0 - rate) / reps as f64).sqrt() },
            alpha,
            config_digest,
        }
    }
}

/// Runs `f` on replicates `0..reps` in parallel with derived seeds and returns
/// the outputs in replicate order.
pub fn mc_map<T, F>(reps: usize, root_seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|r| {
            f(rng::sub_seed(root_seed, "replicate", r as u64))
                .map_err(|e| Error::Replicate { index: r, source: Box::new(e) })
        })
        .collect()
}

/// Rejection rate of a seeded test closure returning p-values.
pub fn mc_rejection_rate<F>(
    test: F,
    reps: usize,
    alpha: f64,
    root_seed: u64,
    config_digest: &str,
) -> Result<McSummary>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    if reps == 0 {
        return Err(Error::InvalidArgument("need at least one replicate".into()));
    }
    let pvals = mc_map(reps, root_seed, test)?;
    Ok(McSummary::from_pvalues(&pvals, alpha, config_digest.to_string()))
}

/// Outcome of one dyadic replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicReplicate {
    pub pval: f64,
    /// p-value of the minorized statistic evaluated on the true errors.
    pub infeasible_pval: Option<f64>,
    /// Whether the inverted interval contains the true coefficient.
    pub covered: Option<bool>,
}

/// What to compute on each dyadic replicate besides the p-value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplicateExtras {
    pub infeasible: bool,
    pub ci: Option<(f64, GridConfig)>,
}

/// Draws a dyadic sample and tests `β = 0` with the default `K` unless given.
pub fn dyadic_replicate(
    dgp: &DyadicDgp,
    num_perms: Option<usize>,
    extras: &ReplicateExtras,
    seed: u64,
) -> Result<DyadicReplicate> {
    let sample = gen_dyadic_dataset(dgp, rng::sub_seed(seed, "data", 0))?;
    let design = sample.array.stack_all()?;
    let k = num_perms.unwrap_or_else(|| default_num_perms(&[dgp.n, dgp.n]));
    let family = build_two_way_group(dgp.n, dgp.n, k, rng::sub_seed(seed, "group", 0))?;
    let prepared = PreparedTest::from_family(&design.x, &design.d, &design.y, &family, RankTol::Default)?;
    let pval = prepared.pvalue(&DVector::zeros(1));
    let infeasible_pval = if extras.infeasible {
        Some(prepared.infeasible_pvalue(&sample.stacked_errors())?)
    } else {
        None
    };
    let covered = match &extras.ci {
        Some((alpha, grid)) => Some(prepared.invert_ci(*alpha, grid)?.contains(dgp.beta)),
        None => None,
    };
    Ok(DyadicReplicate { pval, infeasible_pval, covered })
}

/// Row of the biclique growth table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub n: usize,
    pub rho: f64,
    pub sides: Vec<usize>,
    /// Lower median of `sides`.
    pub median_side: usize,
}

/// Median side of the largest balanced (`s × s`) biclique of MCAR masks.
pub fn biclique_growth_experiment(
    n_grid: &[usize],
    rho_grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<GrowthRow>> {
    let mut rows = Vec::new();
    for (a, &n) in n_grid.iter().enumerate() {
        for (b, &rho) in rho_grid.iter().enumerate() {
            let cell_seed = rng::sub_seed(seed, "growth", (a * rho_grid.len() + b) as u64);
            let mut sides = mc_map(reps, cell_seed, |s| {
                let mask = Mask::mcar(n, n, rho, s)?;
                max_balanced_side(&mask)
            })?;
            let raw = sides.clone();
            sides.sort_unstable();
            let median_side = sides.get(sides.len().saturating_sub(1) / 2).copied().unwrap_or(0);
            rows.push(GrowthRow { n, rho, sides: raw, median_side });
        }
    }
    Ok(rows)
}

/// Synthetic irregular design: `m × n` cells with random cell sizes and a
/// node-level treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrregularDgp {
    pub m: usize,
    pub n: usize,
    /// Probability that a cell is empty.
    pub empty_prob: f64,
    /// Nonempty cell sizes are uniform on this inclusive range.
    pub size_range: (usize, usize),
    /// Number of nuisance covariates, each drawn from the random-feature model
    /// with `φ₁ = φ₂ = 0.4` on `(i, j)`; an intercept is added on top.
    pub n_covariates: usize,
    pub error: SemiSyntheticError,
}

impl IrregularDgp {
    /// 100 row units by 6 column units, 10% empty cells and 2 to 8
    /// observations per nonempty cell.
    pub fn desk_scale(error: SemiSyntheticError) -> Self {
        IrregularDgp {
            m: 100,
            n: 6,
            empty_prob: 0.1,
            size_range: (2, 8),
            n_covariates: 10,
            error,
        }
    }
}

/// Cell layout of an irregular design (fixed across replicates).
pub fn gen_irregular_layout(dgp: &IrregularDgp, seed: u64) -> Vec<Vec<usize>> {
    let mut stream = rng::stream(seed, "irregular-layout", 0);
    let (lo, hi) = dgp.size_range;
    (0..dgp.m)
        .map(|_| {
            (0..dgp.n)
                .map(|_| {
                    if stream.random::<f64>() < dgp.empty_prob {
                        0
                    } else {
                        stream.random_range(lo..=hi)
                    }
                })
                .collect()
        })
        .collect()
}

/// Data on a fixed layout under the null `β = 0`. The treatment is a fixed
/// node-level (row) covariate `exports`, as in cross-country applications.
pub fn gen_irregular_dataset(
    dgp: &IrregularDgp,
    layout: &[Vec<usize>],
    exports: &[f64],
    seed: u64,
) -> Result<MultiIndexDataset> {
    let mut stream = rng::stream(seed, "irregular-data", 0);
    let mut cells: Vec<(usize, usize)> = Vec::new();
    for (i, row) in layout.iter().enumerate() {
        for (j, &size) in row.iter().enumerate() {
            for _ in 0..size {
                cells.push((i + 1, j + 1));
            }
        }
    }
    let p = dgp.n_covariates;
    let binom = Binomial::new(3, 0.3).expect("valid binomial");
    let gamma: Vec<f64> = (0..p)
        .map(|_| binom.sample(&mut stream) as f64 + 0.5 * stream.sample::<f64, _>(StandardNormal))
        .collect();
    let covs: Vec<DMatrix<f64>> = (0..p)
        .map(|_| sample_random_effects(dgp.m, dgp.n, 0.4, 0.4, BaseDist::Gaussian, &mut stream))
        .collect();
    // covariates vary within a cell through an idiosyncratic term
    let errors = gen_semisynthetic_errors(&cells, dgp.m, dgp.n, dgp.error, stream.random())?;
    let mut counters = vec![vec![0usize; dgp.n]; dgp.m];
    let records = cells
        .iter()
        .zip(errors)
        .map(|(&(i, j), e)| {
            let slot = &mut counters[i - 1][j - 1];
            *slot += 1;
            let mut x = Vec::with_capacity(p + 1);
            x.push(1.0);
            for c in &covs {
                x.push(c[(i - 1, j - 1)] + stream.sample::<f64, _>(StandardNormal));
            }
            let y = x[1..].iter().zip(&gamma).map(|(a, g)| a * g).sum::<f64>() + e;
            Record { i, j, l: *slot, y, d: vec![exports[i - 1]], x }
        })
        .collect();
    MultiIndexDataset::new(records, dgp.m, dgp.n)
}

/// Node-level treatment for irregular designs: `exp(0.5 z)` with standard
/// normal `z`, one value per row index.
pub fn gen_node_treatment(m: usize, seed: u64) -> Vec<f64> {
    let mut stream = rng::stream(seed, "node-treatment", 0);
    (0..m).map(|_| (0.5 * stream.sample::<f64, _>(StandardNormal)).exp()).collect()
}

/// Fixed design of an irregular-design size study.
#[derive(Debug, Clone, PartialEq)]
pub struct IrregularStudy {
    pub dgp: IrregularDgp,
    pub layout: Vec<Vec<usize>>,
    pub treatment: Vec<f64>,
    pub config: IrregularConfig,
}

impl IrregularStudy {
    /// Draws the layout and the node treatment once from `seed`.
    pub fn new(dgp: IrregularDgp, config: IrregularConfig, seed: u64) -> Self {
        let layout = gen_irregular_layout(&dgp, rng::sub_seed(seed, "layout", 0));
        let treatment = gen_node_treatment(dgp.m, rng::sub_seed(seed, "treatment", 0));
        IrregularStudy { dgp, layout, treatment, config }
    }

    /// Median p-value of one null replicate.
    pub fn replicate(&self, seed: u64) -> Result<f64> {
        let data = gen_irregular_dataset(&self.dgp, &self.layout, &self.treatment, rng::sub_seed(seed, "data", 0))?;
        Ok(irregular_test(&data, &self.config, rng::sub_seed(seed, "test", 0))?.median_pval)
    }
}
