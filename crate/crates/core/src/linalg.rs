//! Thin SVD by one-sided Jacobi rotations.
//!
//! Used wherever the input may be exactly rank deficient (duplicated
//! intercepts, dummy sets summing to one): the bidiagonal SVD in nalgebra
//! 0.35 returns inaccurate factors on such inputs, while one-sided Jacobi
//! keeps every singular value to high relative accuracy.

use nalgebra::{DMatrix, DVector};

/// `A = U diag(σ) Vᵀ` with `U` of the same shape as `A`, `σ` sorted
/// descending and `V` square. Columns of `U` with `σ = 0` are zero.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

const MAX_SWEEPS: usize = 80;

pub fn thin_svd(a: &DMatrix<f64>) -> ThinSvd {
    let (rows, cols) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(cols, cols);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..cols {
            for j in i + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for r in 0..rows {
                    let (x, y) = (w[(r, i)], w[(r, j)]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let (x, y) = (w[(r, i)], w[(r, j)]);
                    w[(r, i)] = c * x - s * y;
                    w[(r, j)] = s * x + c * y;
                }
                for r in 0..cols {
                    let (x, y) = (v[(r, i)], v[(r, j)]);
                    v[(r, i)] = c * x - s * y;
                    v[(r, j)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..cols).map(|c| w.column(c).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let mut u = DMatrix::zeros(rows, cols);
    let mut v_sorted = DMatrix::zeros(cols, cols);
    let mut sigma = DVector::zeros(cols);
    for (t, &c) in order.iter().enumerate() {
        sigma[t] = norms[c];
        if norms[c] > 0.0 {
            u.set_column(t, &(w.column(c) / norms[c]));
        }
        v_sorted.set_column(t, &v.column(c));
    }
    ThinSvd { u, sigma, v: v_sorted }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reconstructs_rank_deficient_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 300;
        let mut a = DMatrix::from_fn(n, 5, |_, _| rng.random_range(-1.0..1.0));
        a.column_mut(0).fill(1.0);
        a.column_mut(1).fill(1.0);
        let c = a.column(2) * 3.0 - a.column(0);
        a.set_column(4, &c);
        let svd = thin_svd(&a);
        let rec = &svd.u * DMatrix::from_diagonal(&svd.sigma) * svd.v.transpose();
        assert!((rec - &a).amax() < 1e-12);
        assert!(svd.sigma[2] > 1.0 && svd.sigma[3] < 1e-12 && svd.sigma[4] < 1e-12);
        assert!((svd.sigma[0] - svd.sigma.iter().copied().fold(0.0, f64::max)).abs() == 0.0);
        let vtv = svd.v.transpose() * &svd.v;
        assert!((vtv - DMatrix::<f64>::identity(5, 5)).amax() < 1e-13);
    }

    #[test]
    fn matches_known_singular_values() {
        let a = DMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 4.0, 0.0, 0.0]);
        let svd = thin_svd(&a);
        assert!((svd.sigma[0] - 4.0).abs() < 1e-15 && (svd.sigma[1] - 3.0).abs() < 1e-15);
    }
}
