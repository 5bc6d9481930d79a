//! Dense LU with partial pivoting, used for the small reduced-order systems.

use crate::error::{PodError, Result};
use ndarray::Array2;

/// Row-pivoted LU factors of a square matrix.
#[derive(Clone, Debug)]
pub struct LuFactor {
    lu: Array2<f64>,
    piv: Vec<usize>,
}

impl LuFactor {
    /// Factors `a`; fails if a pivot falls below roundoff relative to the
    /// matrix scale, which downstream code reports as an ill-posed reduced
    /// system (the documented failure mode of over-enriched Gramian bases).
    pub fn new(a: &Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(PodError::invalid("LU needs a nonempty square matrix"));
        }
        let scale = a.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let mut lu = a.clone();
        let mut piv = Vec::with_capacity(n);
        for k in 0..n {
            let mut p = k;
            for i in (k + 1)..n {
                if lu[[i, k]].abs() > lu[[p, k]].abs() {
                    p = i;
                }
            }
            if lu[[p, k]].abs() <= f64::EPSILON * scale.max(f64::MIN_POSITIVE) * 16.0 {
                return Err(PodError::IllPosed(format!(
                    "dense pivot {k} is {:.3e} against scale {scale:.3e}",
                    lu[[p, k]]
                )));
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[[k, j]];
                    lu[[k, j]] = lu[[p, j]];
                    lu[[p, j]] = tmp;
                }
            }
            piv.push(p);
            let inv = 1.0 / lu[[k, k]];
            for i in (k + 1)..n {
                let f = lu[[i, k]] * inv;
                lu[[i, k]] = f;
                for j in (k + 1)..n {
                    let upd = f * lu[[k, j]];
                    lu[[i, j]] -= upd;
                }
            }
        }
        Ok(LuFactor { lu, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.piv.len();
        assert_eq!(b.len(), n, "dimension mismatch in dense solve");
        let mut x = b.to_vec();
        // Whole rows were interchanged during factorization, so all swaps are
        // applied up front before the triangular solves.
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        for k in 0..n {
            for i in (k + 1)..n {
                x[i] -= self.lu[[i, k]] * x[k];
            }
        }
        for k in (0..n).rev() {
            for j in (k + 1)..n {
                x[k] -= self.lu[[k, j]] * x[j];
            }
            x[k] /= self.lu[[k, k]];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [1usize, 2, 5, 20] {
            let a = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0));
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| a[[i, j]] * x[j]).sum())
                .collect();
            let lu = LuFactor::new(&a).unwrap();
            let got = lu.solve(&b);
            // Random matrices can be poorly conditioned, so check the residual
            // (backward error) rather than the forward error.
            let xnorm = got.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            for i in 0..n {
                let ri: f64 = (0..n).map(|j| a[[i, j]] * got[j]).sum::<f64>() - b[i];
                assert!(ri.abs() < 1e-12 * n as f64 * xnorm, "n={n}: residual {ri:.3e}");
            }
        }
    }

    #[test]
    fn reports_singularity() {
        let a = ndarray::arr2(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(matches!(LuFactor::new(&a), Err(PodError::IllPosed(_))));
    }
}
