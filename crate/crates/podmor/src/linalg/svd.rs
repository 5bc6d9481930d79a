//! Singular value decomposition by one-sided Jacobi orthogonalization.
//!
//! The singular values are recovered as column norms of the rotated matrix,
//! which keeps small singular values accurate relative to themselves rather
//! than relative to the largest one. The POD routes that square the data
//! matrix first cannot do better than machine epsilon times the leading
//! eigenvalue; this kernel is what makes that contrast measurable.

use crate::error::{PodError, Result};
use ndarray::Array2;

const ORTHO_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 60;

/// Thin SVD `A = U diag(s) Vᵀ` with `s` descending and nonnegative.
///
/// `U` is `m×k` and `V` is `n×k` with `k = min(m, n)`. Columns of `U`
/// belonging to zero singular values are zero vectors.
pub fn svd(a: &Array2<f64>) -> Result<(Array2<f64>, Vec<f64>, Array2<f64>)> {
    for &v in a.iter() {
        if !v.is_finite() {
            return Err(PodError::invalid("nonfinite entry in SVD input"));
        }
    }
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Err(PodError::invalid("empty matrix in SVD"));
    }
    if m < n {
        let (u, s, v) = jacobi_tall(&a.t().to_owned())?;
        return Ok((v, s, u));
    }
    jacobi_tall(a)
}

/// One-sided Jacobi on a tall matrix (m >= n).
fn jacobi_tall(a: &Array2<f64>) -> Result<(Array2<f64>, Vec<f64>, Array2<f64>)> {
    let (m, n) = a.dim();
    let mut w = a.clone();
    let mut v = Array2::eye(n);

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..m {
                    let x = w[[i, p]];
                    let y = w[[i, q]];
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq == 0.0 || apq.abs() <= ORTHO_TOL * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let x = w[[i, p]];
                    let y = w[[i, q]];
                    w[[i, p]] = c * x - s * y;
                    w[[i, q]] = s * x + c * y;
                }
                for i in 0..n {
                    let x = v[[i, p]];
                    let y = v[[i, q]];
                    v[[i, p]] = c * x - s * y;
                    v[[i, q]] = s * x + c * y;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(PodError::ConvergenceFailure {
            context: "one-sided Jacobi SVD".into(),
            residual: f64::NAN,
            iterations: MAX_SWEEPS,
        });
    }

    let mut sigma: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| w[[i, j]] * w[[i, j]]).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap());

    let mut u = Array2::zeros((m, n));
    let mut vs = Array2::zeros((n, n));
    let mut s_sorted = vec![0.0; n];
    for (col, &src) in order.iter().enumerate() {
        let s = sigma[src];
        s_sorted[col] = s;
        if s > 0.0 {
            for i in 0..m {
                u[[i, col]] = w[[i, src]] / s;
            }
        }
        for i in 0..n {
            vs[[i, col]] = v[[i, src]];
        }
    }
    sigma = s_sorted;
    Ok((u, sigma, vs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;
    use crate::test_support::matrix_with_singular_values;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn reconstruct(u: &Array2<f64>, s: &[f64], v: &Array2<f64>) -> Array2<f64> {
        let (m, k) = u.dim();
        let n = v.nrows();
        let mut a = Array2::zeros((m, n));
        for r in 0..k {
            for i in 0..m {
                for j in 0..n {
                    a[[i, j]] += s[r] * u[[i, r]] * v[[j, r]];
                }
            }
        }
        a
    }

    fn column_orthogonality(q: &Array2<f64>) -> f64 {
        let (m, k) = q.dim();
        let mut err: f64 = 0.0;
        for i in 0..k {
            let ni: f64 = (0..m).map(|r| q[[r, i]] * q[[r, i]]).sum();
            if ni == 0.0 {
                continue; // zero column for a zero singular value
            }
            for j in 0..k {
                let nj: f64 = (0..m).map(|r| q[[r, j]] * q[[r, j]]).sum();
                if nj == 0.0 {
                    continue;
                }
                let dot: f64 = (0..m).map(|r| q[[r, i]] * q[[r, j]]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((dot - target).abs());
            }
        }
        err
    }

    #[test]
    fn reconstructs_tall_and_wide() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (m, n) in [(30usize, 20usize), (20, 30), (17, 17), (5, 1), (1, 5)] {
            let a = Array2::from_shape_fn((m, n), |_| rng.gen_range(-1.0..1.0));
            let (u, s, v) = svd(&a).unwrap();
            assert!(s.windows(2).all(|w| w[0] >= w[1]));
            let err = frobenius(&(&reconstruct(&u, &s, &v) - &a)) / frobenius(&a);
            assert!(err < 1e-13, "{m}x{n}: reconstruction error {err:.3e}");
            assert!(column_orthogonality(&u) < 1e-13);
            assert!(column_orthogonality(&v) < 1e-13);
        }
    }

    #[test]
    fn recovers_prescribed_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let sigma = [5.0, 2.5, 1.0, 0.125, 1e-3];
        let a = matrix_with_singular_values(12, 5, &sigma, &mut rng);
        let (_, s, _) = svd(&a).unwrap();
        for (got, want) in s.iter().zip(&sigma) {
            assert!(
                (got - want).abs() <= 1e-12 * want.max(1.0),
                "got {got}, want {want}"
            );
        }
    }

    #[test]
    fn small_singular_values_keep_relative_accuracy() {
        // Twelve decades of spread: the smallest value must still come out with
        // about three correct digits, far below the eps * sigma_max^2 floor of
        // Gramian-based routes.
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let sigma: Vec<f64> = (0..13).map(|k| 10f64.powi(-k)).collect();
        let a = matrix_with_singular_values(40, 13, &sigma, &mut rng);
        let (_, s, _) = svd(&a).unwrap();
        for (got, want) in s.iter().zip(&sigma) {
            let rel = (got - want).abs() / want;
            assert!(rel < 1e-3, "sigma {want:.1e}: relative error {rel:.2e}");
        }
    }

    #[test]
    fn rank_deficient_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sigma = [3.0, 1.0, 0.0, 0.0];
        let a = matrix_with_singular_values(8, 4, &sigma, &mut rng);
        let (u, s, v) = svd(&a).unwrap();
        assert!(s[2] < 1e-14 && s[3] < 1e-14);
        let err = frobenius(&(&reconstruct(&u, &s, &v) - &a));
        assert!(err < 1e-14);
    }

    #[test]
    fn zero_matrix() {
        let a = Array2::<f64>::zeros((4, 3));
        let (_, s, _) = svd(&a).unwrap();
        assert!(s.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_nonfinite() {
        let mut a = Array2::<f64>::zeros((2, 2));
        a[[0, 1]] = f64::NAN;
        assert!(matches!(svd(&a), Err(PodError::InvalidArgument(_))));
    }
}
