//! Shared helpers for unit tests: seeded random matrices with controlled
//! spectra, small dense utilities, and an exactly-low-rank heat trajectory.

use std::sync::Arc;

use ndarray::Array2;
use rand::prelude::*;

use crate::mesh::{
    eval_piecewise_linear, BoundaryCondition, Grid1D, ModelProblem, ProblemKind,
    SpaceTimeFunction, SpatialFunction,
};
use crate::snapshots::{state_solve, SnapshotSet};
use crate::timegrid::TimeGrid;

/// Unforced heat problem on (0, 2) whose trajectory stays in an exact
/// low-dimensional span: on a uniform grid mass and stiffness are Toeplitz
/// tridiagonal, so discrete sine vectors are generalized eigenvectors of the
/// pair and each implicit Euler step only rescales them. The initial value
/// combines one sine per `(amplitude, harmonic)` pair, with breakpoints on
/// every node so the solver's moment projection reproduces it exactly.
pub(crate) fn exact_low_rank_heat(
    m: usize,
    n: usize,
    components: &[(f64, usize)],
) -> (ModelProblem, Arc<Grid1D>, TimeGrid, SnapshotSet) {
    let grid = Arc::new(Grid1D::uniform(0.0, 2.0, m).unwrap());
    let nodes = grid.nodes().to_vec();
    let splits = nodes[1..nodes.len() - 1].to_vec();
    let terms = components.to_vec();
    let nodal: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let s = std::f64::consts::PI * x / 2.0;
            terms
                .iter()
                .map(|&(a, k)| a * (k as f64 * s).sin())
                .sum::<f64>()
        })
        .collect();
    let initial = SpatialFunction::with_breakpoints(
        move |x| eval_piecewise_linear(&nodes, &nodal, x),
        splits,
    )
    .unwrap();
    let problem = ModelProblem::new(
        ProblemKind::LinearHeat,
        1.0,
        0.0,
        0.0,
        0.0,
        SpaceTimeFunction::new(|_t, _x| 0.0),
        initial,
        BoundaryCondition::Dirichlet,
        (0.0, 2.0),
        1.5,
    )
    .unwrap();
    let tg = TimeGrid::uniform(problem.horizon, n).unwrap();
    let set = state_solve(&grid, &problem, &tg, 1e-11, 30).unwrap();
    (problem, grid, tg, set)
}

/// Orthonormalizes the columns of `a` (modified Gram-Schmidt).
pub(crate) fn gram_schmidt(a: &Array2<f64>) -> Array2<f64> {
    let (m, n) = a.dim();
    let mut q = a.clone();
    for j in 0..n {
        for k in 0..j {
            let dot = (0..m).map(|i| q[[i, k]] * q[[i, j]]).sum::<f64>();
            for i in 0..m {
                q[[i, j]] -= dot * q[[i, k]];
            }
        }
        let norm = (0..m).map(|i| q[[i, j]] * q[[i, j]]).sum::<f64>().sqrt();
        for i in 0..m {
            q[[i, j]] /= norm;
        }
    }
    q
}

/// Random symmetric positive definite matrix with condition number `cond`
/// and a log-uniform spectrum in [1/cond, 1].
pub(crate) fn random_spd(n: usize, cond: f64, rng: &mut impl Rng) -> Array2<f64> {
    let g = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0));
    let q = gram_schmidt(&g);
    let mut a = Array2::zeros((n, n));
    for k in 0..n {
        let lam = cond.powf(-(k as f64) / (n.max(2) - 1) as f64);
        for i in 0..n {
            for j in 0..n {
                a[[i, j]] += lam * q[[i, k]] * q[[j, k]];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    a
}

/// Random matrix with prescribed singular values.
pub(crate) fn matrix_with_singular_values(
    m: usize,
    n: usize,
    sigma: &[f64],
    rng: &mut impl Rng,
) -> Array2<f64> {
    let k = m.min(n);
    assert!(sigma.len() == k);
    let gu = Array2::from_shape_fn((m, k), |_| rng.gen_range(-1.0..1.0));
    let gv = Array2::from_shape_fn((n, k), |_| rng.gen_range(-1.0..1.0));
    let u = gram_schmidt(&gu);
    let v = gram_schmidt(&gv);
    let mut a = Array2::zeros((m, n));
    for (r, &s) in sigma.iter().enumerate() {
        for i in 0..m {
            for j in 0..n {
                a[[i, j]] += s * u[[i, r]] * v[[j, r]];
            }
        }
    }
    a
}
