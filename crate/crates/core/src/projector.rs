//! Orthonormal factors for partialling out nuisance covariates.
//!
//! Given the covariate matrix `X` and its permuted copy `X_g`, the residual
//! projector holds an orthonormal `V` (N × (N − r)) whose columns span the
//! orthogonal complement of `col([X | X_g])`, so `VᵀX = 0` and `VᵀX_g = 0`.
//! `V` is kept implicitly as the first `r` Householder reflectors of a
//! column-pivoted QR of `[X | X_g]`: `Vᵀv` is the trailing `N − r` block of
//! `H_r ⋯ H_1 v`, which costs `O(N r)` per vector.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::thin_svd;

/// Numerical-rank rule for `[X | X_g]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankTol {
    /// Singular values above `max(N, 2p) · ε · σ_max` count toward the rank.
    #[default]
    Default,
    /// Singular values above `rel · σ_max` count toward the rank.
    Relative(f64),
}

impl RankTol {
    fn threshold(self, n_obs: usize, n_cols: usize, sigma_max: f64) -> f64 {
        match self {
            RankTol::Default => n_obs.max(n_cols) as f64 * f64::EPSILON * sigma_max,
            RankTol::Relative(rel) => rel * sigma_max,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResidualProjector {
    n_obs: usize,
    rank: usize,
    tol: f64,
    /// Column `j` holds reflector `j` in rows `j..N`.
    reflectors: DMatrix<f64>,
    betas: Vec<f64>,
}

/// Householder vector for `x`, returned as `(v, beta, alpha)` with
/// `(I - beta v vᵀ) x = alpha e₁`.
fn householder(x: &[f64]) -> (Vec<f64>, f64, f64) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return (vec![0.0; x.len()], 0.0, 0.0);
    }
    let alpha = if x[0] >= 0.0 { -norm } else { norm };
    let mut v = x.to_vec();
    v[0] -= alpha;
    let vtv: f64 = v.iter().map(|a| a * a).sum();
    if vtv == 0.0 {
        return (vec![0.0; x.len()], 0.0, alpha);
    }
    (v, 2.0 / vtv, alpha)
}

impl ResidualProjector {
    /// Builds the projector annihilating the columns of `x` and `x_perm`.
    pub fn new(x: &DMatrix<f64>, x_perm: &DMatrix<f64>, policy: RankTol) -> Result<Self> {
        let (n_obs, p) = x.shape();
        if x_perm.shape() != (n_obs, p) {
            return Err(Error::Dimension(format!(
                "X is {n_obs}x{p} but its permuted copy is {}x{}",
                x_perm.nrows(),
                x_perm.ncols()
            )));
        }
        if n_obs <= 2 * p {
            return Err(Error::InsufficientDimension { n_obs, p });
        }
        let m = 2 * p;
        let mut a = DMatrix::zeros(n_obs, m);
        a.columns_mut(0, p).copy_from(x);
        a.columns_mut(p, p).copy_from(x_perm);

        let mut reflectors = DMatrix::zeros(n_obs, m);
        let mut betas = Vec::with_capacity(m);
        for j in 0..m {
            // pivot on the largest remaining column norm
            let (best, _) = (j..m)
                .map(|c| (c, a.view((j, c), (n_obs - j, 1)).norm_squared()))
                .fold((j, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if best != j {
                a.swap_columns(j, best);
            }
            let col: Vec<f64> = a.view((j, j), (n_obs - j, 1)).iter().copied().collect();
            let (v, beta, alpha) = householder(&col);
            for c in j + 1..m {
                let mut s = 0.0;
                for (t, vt) in v.iter().enumerate() {
                    s += vt * a[(j + t, c)];
                }
                s *= beta;
                for (t, vt) in v.iter().enumerate() {
                    a[(j + t, c)] -= s * vt;
                }
            }
            a[(j, j)] = alpha;
            for t in 1..v.len() {
                a[(j + t, j)] = 0.0;
            }
            for (t, vt) in v.iter().enumerate() {
                reflectors[(j + t, j)] = *vt;
            }
            betas.push(beta);
        }

        let r_factor = a.rows(0, m).upper_triangle();
        let singular = if m == 0 {
            DVector::zeros(0)
        } else {
            thin_svd(&r_factor).sigma
        };
        let sigma_max = singular.iter().copied().fold(0.0, f64::max);
        let tol = policy.threshold(n_obs, m, sigma_max);
        let rank = if sigma_max == 0.0 {
            0
        } else {
            singular.iter().filter(|&&s| s > tol).count()
        };
        betas.truncate(rank);
        let reflectors = reflectors.columns(0, rank).into_owned();
        Ok(ResidualProjector { n_obs, rank, tol, reflectors, betas })
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    /// Numerical rank `r` of `[X | X_g]`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Column count of `V`, `N − r`.
    pub fn dim(&self) -> usize {
        self.n_obs - self.rank
    }

    /// Absolute singular-value cut used for the rank.
    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// `H_r ⋯ H_1 v` in place.
    fn reflect(&self, buf: &mut [f64]) {
        for j in 0..self.rank {
            let beta = self.betas[j];
            if beta == 0.0 {
                continue;
            }
            let v = self.reflectors.column(j);
            let mut s = 0.0;
            for t in j..self.n_obs {
                s += v[t] * buf[t];
            }
            s *= beta;
            for t in j..self.n_obs {
                buf[t] -= s * v[t];
            }
        }
    }

    /// `H_1 ⋯ H_r v` in place.
    fn reflect_back(&self, buf: &mut [f64]) {
        for j in (0..self.rank).rev() {
            let beta = self.betas[j];
            if beta == 0.0 {
                continue;
            }
            let v = self.reflectors.column(j);
            let mut s = 0.0;
            for t in j..self.n_obs {
                s += v[t] * buf[t];
            }
            s *= beta;
            for t in j..self.n_obs {
                buf[t] -= s * v[t];
            }
        }
    }

    /// `Vᵀv`, of length `N − r`.
    pub fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.n_obs {
            return Err(Error::Dimension(format!(
                "vector of length {} for a projector on {} rows",
                v.len(),
                self.n_obs
            )));
        }
        let mut buf: Vec<f64> = v.iter().copied().collect();
        self.reflect(&mut buf);
        Ok(DVector::from_column_slice(&buf[self.rank..]))
    }

    /// `VᵀM` column by column.
    pub fn project_matrix(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.nrows() != self.n_obs {
            return Err(Error::Dimension(format!(
                "matrix with {} rows for a projector on {} rows",
                m.nrows(),
                self.n_obs
            )));
        }
        let mut out = DMatrix::zeros(self.dim(), m.ncols());
        let mut buf = vec![0.0; self.n_obs];
        for c in 0..m.ncols() {
            buf.copy_from_slice(m.column(c).as_slice());
            self.reflect(&mut buf);
            out.column_mut(c).copy_from_slice(&buf[self.rank..]);
        }
        Ok(out)
    }

    /// Explicit `V`.
    pub fn complement(&self) -> DMatrix<f64> {
        let mut v = DMatrix::zeros(self.n_obs, self.dim());
        let mut buf = vec![0.0; self.n_obs];
        for c in 0..self.dim() {
            buf.iter_mut().for_each(|b| *b = 0.0);
            buf[self.rank + c] = 1.0;
            self.reflect_back(&mut buf);
            v.column_mut(c).copy_from_slice(&buf);
        }
        v
    }

    /// Orthonormal basis of the annihilated span, `N × r`.
    pub fn range_basis(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.n_obs, self.rank);
        let mut buf = vec![0.0; self.n_obs];
        for c in 0..self.rank {
            buf.iter_mut().for_each(|b| *b = 0.0);
            buf[c] = 1.0;
            self.reflect_back(&mut buf);
            q.column_mut(c).copy_from_slice(&buf);
        }
        q
    }

    /// `P = VVᵀ`, computed as `I − QQᵀ` from the range basis.
    pub fn projector_matrix(&self) -> DMatrix<f64> {
        let q = self.range_basis();
        DMatrix::identity(self.n_obs, self.n_obs) - &q * q.transpose()
    }
}

/// Convenience wrapper for [`ResidualProjector::new`].
pub fn residual_projector(
    x: &DMatrix<f64>,
    x_perm: &DMatrix<f64>,
    policy: RankTol,
) -> Result<ResidualProjector> {
    ResidualProjector::new(x, x_perm, policy)
}

/// `Vᵀv`.
pub fn project(projector: &ResidualProjector, v: &DVector<f64>) -> Result<DVector<f64>> {
    projector.project(v)
}

/// The same projector through a one-sided Jacobi SVD of `[X | X_g]`, returned with its
/// rank. Independent of the Householder route; used to cross-check it.
pub fn projector_matrix_svd(
    x: &DMatrix<f64>,
    x_perm: &DMatrix<f64>,
    policy: RankTol,
) -> Result<(DMatrix<f64>, usize)> {
    let (n_obs, p) = x.shape();
    if x_perm.shape() != (n_obs, p) {
        return Err(Error::Dimension("X and its permuted copy differ in shape".into()));
    }
    if n_obs <= 2 * p {
        return Err(Error::InsufficientDimension { n_obs, p });
    }
    let mut a = DMatrix::zeros(n_obs, 2 * p);
    a.columns_mut(0, p).copy_from(x);
    a.columns_mut(p, p).copy_from(x_perm);
    let identity = DMatrix::identity(n_obs, n_obs);
    if p == 0 {
        return Ok((identity, 0));
    }
    let svd = thin_svd(&a);
    let sigma_max = svd.sigma.iter().copied().fold(0.0, f64::max);
    let tol = policy.threshold(n_obs, 2 * p, sigma_max);
    let keep: Vec<usize> = (0..svd.sigma.len())
        .filter(|&c| sigma_max > 0.0 && svd.sigma[c] > tol)
        .collect();
    let mut ur = DMatrix::zeros(n_obs, keep.len());
    for (t, &c) in keep.iter().enumerate() {
        ur.set_column(t, &svd.u.column(c));
    }
    Ok((identity - &ur * ur.transpose(), keep.len()))
}
