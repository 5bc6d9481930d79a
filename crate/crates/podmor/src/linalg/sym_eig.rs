//! Symmetric eigendecomposition: Householder tridiagonalization followed by
//! the implicit-shift QL iteration, with accumulated transformations.
//!
//! This is the classical tred2/tql2 pair. Eigenvalue errors are of order
//! machine-epsilon times the matrix norm, which is exactly the floor the
//! spectrum-stability experiments measure against the direct SVD route.

use crate::error::{PodError, Result};
use ndarray::Array2;

/// Eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in descending order and the matching orthonormal
/// eigenvectors as columns. The input is symmetrized as `(A + Aᵀ)/2` before
/// the reduction so that Gramians carrying roundoff-level asymmetry are
/// accepted; genuinely non-symmetric input is rejected.
pub fn sym_eig(a: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(PodError::invalid(format!(
            "symmetric eigensolver needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut scale = 0.0f64;
    for &v in a.iter() {
        if !v.is_finite() {
            return Err(PodError::invalid("nonfinite entry in eigensolver input"));
        }
        scale = scale.max(v.abs());
    }
    for i in 0..n {
        for j in 0..i {
            if (a[[i, j]] - a[[j, i]]).abs() > 1e-8 * scale.max(1e-300) {
                return Err(PodError::invalid(format!(
                    "matrix is not symmetric at ({i},{j})"
                )));
            }
        }
    }

    let mut z = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            z[[i, j]] = 0.5 * (a[[i, j]] + a[[j, i]]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut z, &mut d, &mut e);
    ql_implicit(&mut d, &mut e, &mut z)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vecs = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vecs[[row, col]] = z[[row, src]];
        }
    }
    Ok((vals, vecs))
}

/// Householder reduction to tridiagonal form; `z` accumulates the orthogonal
/// transformation, `d` receives the diagonal and `e[1..]` the subdiagonal.
fn tridiagonalize(z: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += z[[i, k]].abs();
            }
            if scale == 0.0 {
                e[i] = z[[i, l]];
            } else {
                for k in 0..=l {
                    z[[i, k]] /= scale;
                    h += z[[i, k]] * z[[i, k]];
                }
                let f = z[[i, l]];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[[i, l]] = f - g;
                let mut f_acc = 0.0;
                for j in 0..=l {
                    z[[j, i]] = z[[i, j]] / h;
                    let mut g_acc = 0.0;
                    for k in 0..=j {
                        g_acc += z[[j, k]] * z[[i, k]];
                    }
                    for k in (j + 1)..=l {
                        g_acc += z[[k, j]] * z[[i, k]];
                    }
                    e[j] = g_acc / h;
                    f_acc += e[j] * z[[i, j]];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let fj = z[[i, j]];
                    let gj = e[j] - hh * fj;
                    e[j] = gj;
                    for k in 0..=j {
                        let upd = fj * e[k] + gj * z[[i, k]];
                        z[[j, k]] -= upd;
                    }
                }
            }
        } else {
            e[i] = z[[i, l]];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += z[[i, k]] * z[[k, j]];
                }
                for k in 0..i {
                    let upd = g * z[[k, i]];
                    z[[k, j]] -= upd;
                }
            }
        }
        d[i] = z[[i, i]];
        z[[i, i]] = 1.0;
        for j in 0..i {
            z[[j, i]] = 0.0;
            z[[i, j]] = 0.0;
        }
    }
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix, rotations
/// accumulated into `z`.
fn ql_implicit(d: &mut [f64], e: &mut [f64], z: &mut Array2<f64>) -> Result<()> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(PodError::ConvergenceFailure {
                    context: "implicit QL iteration".into(),
                    residual: e[l].abs(),
                    iterations: iter,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let shifted = if g >= 0.0 { g + r } else { g - r };
            g = d[m] - d[l] + e[l] / shifted;
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut deflated_early = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated_early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[[k, i + 1]];
                    z[[k, i + 1]] = s * z[[k, i]] + c * f;
                    z[[k, i]] = c * z[[k, i]] - s * f;
                }
            }
            if deflated_early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
