//! Tridiagonal matrices and their factorization.
//!
//! Every finite element operator assembled by this crate (mass, stiffness,
//! advection, state-weighted mass) is tridiagonal, so the time stepping never
//! touches a dense solver.

use crate::error::{PodError, Result};
use ndarray::Array2;

/// Tridiagonal matrix stored by diagonals. `sub[i]` is entry `(i+1, i)`,
/// `sup[i]` is entry `(i, i+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TriDiag {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl TriDiag {
    pub fn zeros(n: usize) -> Self {
        TriDiag {
            sub: vec![0.0; n.saturating_sub(1)],
            diag: vec![0.0; n],
            sup: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(x.len(), n, "dimension mismatch in tridiagonal matvec");
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.sup[i] * x[i + 1];
            }
            y[i] = v;
        }
        y
    }

    /// xᵀ A y.
    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    /// self += c * other.
    pub fn add_scaled(&mut self, c: f64, other: &TriDiag) {
        assert_eq!(self.n(), other.n());
        for (a, b) in self.diag.iter_mut().zip(&other.diag) {
            *a += c * b;
        }
        for (a, b) in self.sub.iter_mut().zip(&other.sub) {
            *a += c * b;
        }
        for (a, b) in self.sup.iter_mut().zip(&other.sup) {
            *a += c * b;
        }
    }

    /// Linear combination Σ cᵢ Aᵢ of equally sized tridiagonal matrices.
    pub fn combine(terms: &[(f64, &TriDiag)]) -> TriDiag {
        assert!(!terms.is_empty());
        let mut out = TriDiag::zeros(terms[0].1.n());
        for &(c, m) in terms {
            out.add_scaled(c, m);
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.n();
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            a[[i, i]] = self.diag[i];
            if i + 1 < n {
                a[[i, i + 1]] = self.sup[i];
                a[[i + 1, i]] = self.sub[i];
            }
        }
        a
    }

    fn max_abs(&self) -> f64 {
        self.diag
            .iter()
            .chain(&self.sub)
            .chain(&self.sup)
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// LU factorization with partial pivoting. Pivoting widens the upper band
    /// by one diagonal; that keeps the solve stable for advection-dominated
    /// operators that are not diagonally dominant.
    pub fn factor(&self) -> Result<TriDiagLu> {
        let n = self.n();
        let scale = self.max_abs();
        if n == 0 {
            return Err(PodError::invalid("empty tridiagonal system"));
        }
        let mut dl = self.sub.clone();
        let mut d = self.diag.clone();
        let mut du = self.sup.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];

        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                } else {
                    dl[i] = 0.0;
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE) * 16.0;
        for (i, &piv) in d.iter().enumerate() {
            if piv.abs() <= tiny {
                return Err(PodError::IllPosed(format!(
                    "tridiagonal pivot {i} is {piv:.3e} against scale {scale:.3e}"
                )));
            }
        }
        Ok(TriDiagLu {
            dl,
            d,
            du,
            du2,
            swapped,
        })
    }
}

/// Pivoted LU factors of a [`TriDiag`].
#[derive(Clone, Debug)]
pub struct TriDiagLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TriDiagLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        assert_eq!(b.len(), n, "dimension mismatch in tridiagonal solve");
        let mut x = b.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let tmp = x[i];
                x[i] = x[i + 1];
                x[i + 1] = tmp - self.dl[i] * x[i];
            } else {
                x[i + 1] -= self.dl[i] * x[i];
            }
        }
        x[n - 1] /= self.d[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - self.du[n - 2] * x[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.du[i] * x[i + 1] - self.du2[i] * x[i + 2]) / self.d[i];
        }
        x
    }
}
