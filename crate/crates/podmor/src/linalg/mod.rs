//! Dense and banded linear-algebra kernels.
//!
//! Everything here is deterministic: no randomized pivoting, no
//! thread-order-dependent reductions. That property is load-bearing for the
//! byte-reproducibility of pipeline outputs.

mod lu;
mod svd;
mod sym_eig;
mod tridiag;

pub use lu::LuFactor;
pub use svd::svd;
pub use sym_eig::sym_eig;
pub use tridiag::{TriDiag, TriDiagLu};

use crate::error::{PodError, Result};
use ndarray::Array2;

/// Square root and inverse square root of a symmetric positive definite
/// matrix, computed through its eigendecomposition.
pub fn spd_sqrt_pair(w: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let n = w.nrows();
    let (vals, vecs) = sym_eig(w)?;
    let scale = vals.first().copied().unwrap_or(0.0);
    if scale <= 0.0 {
        return Err(PodError::invalid("matrix is not positive definite"));
    }
    for &v in &vals {
        if v <= scale * 1e-14 {
            return Err(PodError::invalid(format!(
                "matrix is numerically singular (eigenvalue {v:.3e} vs largest {scale:.3e})"
            )));
        }
    }
    let mut sqrt = Array2::zeros((n, n));
    let mut inv_sqrt = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            let mut si = 0.0;
            for (k, &v) in vals.iter().enumerate() {
                let prod = vecs[[i, k]] * vecs[[j, k]];
                let root = v.sqrt();
                s += prod * root;
                si += prod / root;
            }
            sqrt[[i, j]] = s;
            sqrt[[j, i]] = s;
            inv_sqrt[[i, j]] = si;
            inv_sqrt[[j, i]] = si;
        }
    }
    Ok((sqrt, inv_sqrt))
}

/// Frobenius norm.
pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::random_spd;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spd_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = random_spd(24, 1e4, &mut rng);
        let (s, si) = spd_sqrt_pair(&w).unwrap();
        let w2 = s.dot(&s);
        let ident = s.dot(&si);
        let werr = frobenius(&(&w2 - &w)) / frobenius(&w);
        assert!(werr < 1e-12, "sqrt reconstruction error {werr}");
        let mut ierr: f64 = 0.0;
        for i in 0..24 {
            for j in 0..24 {
                let target = if i == j { 1.0 } else { 0.0 };
                ierr = ierr.max((ident[[i, j]] - target).abs());
            }
        }
        assert!(ierr < 1e-10, "sqrt * inv_sqrt deviates from identity by {ierr}");
    }
}
