//! Proper orthogonal decomposition of weighted snapshot collections.
//!
//! Three equivalent routes compute the basis: a singular value decomposition
//! of the scaled snapshot matrix, an eigendecomposition of the spatial
//! correlation matrix, and an eigendecomposition of the temporal Gramian.
//! They agree in exact arithmetic; keeping all three makes their floating
//! point behavior comparable, and the temporal route extends to snapshots
//! living on different spatial grids because it only needs pairwise inner
//! products.

use std::sync::Arc;

use ndarray::{s, Array2};
use rayon::prelude::*;

use crate::error::{PodError, Result};
use crate::linalg::{spd_sqrt_pair, svd, sym_eig, TriDiag};
use crate::mesh::{
    full_nodal_values, mass_matrix, stiffness_matrix, BoundaryCondition, Grid1D,
};
use crate::quad::GAUSS_2;
use crate::snapshots::SnapshotSet;

/// Inner product of the spatial function space.
///
/// `H` is the L² pairing (mass matrix), `V` the H¹ seminorm pairing
/// (stiffness matrix). `V` is reserved for Dirichlet conditions, where the
/// seminorm is a norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerProduct {
    H,
    V,
}

impl InnerProduct {
    pub fn label(self) -> &'static str {
        match self {
            InnerProduct::H => "H",
            InnerProduct::V => "V",
        }
    }
}

/// Gram matrix of the chosen inner product in the boundary condition's dof
/// layout.
pub fn weight_matrix(
    grid: &Grid1D,
    bc: &BoundaryCondition,
    inner_product: InnerProduct,
) -> Result<TriDiag> {
    match inner_product {
        InnerProduct::H => Ok(mass_matrix(grid, bc)),
        InnerProduct::V => match bc {
            BoundaryCondition::Dirichlet => Ok(stiffness_matrix(grid, bc)),
            BoundaryCondition::Robin { .. } => Err(PodError::Unsupported(
                "the V inner product requires Dirichlet boundary conditions".into(),
            )),
        },
    }
}

/// Computational route for the decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PodMethod {
    /// Singular value decomposition of `W^{1/2} Y D^{1/2}`.
    Svd,
    /// Eigendecomposition of the spatial correlation matrix
    /// `(W^{1/2} Y D^{1/2})(W^{1/2} Y D^{1/2})ᵀ`.
    SpatialCorrelation,
    /// Eigendecomposition of the temporal Gramian
    /// `D^{1/2} Yᵀ W Y D^{1/2}`; never forms a matrix square root.
    TemporalCorrelation,
}

impl PodMethod {
    pub fn label(self) -> &'static str {
        match self {
            PodMethod::Svd => "svd",
            PodMethod::SpatialCorrelation => "spatial",
            PodMethod::TemporalCorrelation => "temporal",
        }
    }
}

/// Orthonormal reduced basis with its energy spectrum.
///
/// `modes` columns are orthonormal in the `weight` inner product. The
/// retained `eigenvalues` are the leading part of `raw_spectrum`, which
/// keeps every computed value (including roundoff-level or negative tail
/// entries from the eigendecomposition routes) for diagnostics.
#[derive(Clone, Debug)]
pub struct PodBasis {
    pub grid: Arc<Grid1D>,
    pub boundary: BoundaryCondition,
    pub inner_product: InnerProduct,
    pub method: PodMethod,
    pub weight: TriDiag,
    pub modes: Array2<f64>,
    pub eigenvalues: Vec<f64>,
    pub raw_spectrum: Vec<f64>,
    /// Euclidean-orthonormal right factor (one column per mode, one row per
    /// snapshot); maps snapshot combinations to modes.
    pub sample_modes: Array2<f64>,
    /// Weighted squared norm of the snapshot data, `Σ_k w_k |y_k|²`.
    pub total_energy: f64,
    /// Number of eigenvalues above the roundoff cutoff.
    pub max_rank: usize,
}

impl PodBasis {
    /// Number of retained modes.
    pub fn rank(&self) -> usize {
        self.modes.ncols()
    }

    /// Coefficients of the orthogonal projection of `y` onto the first
    /// `ell` modes.
    pub fn project(&self, ell: usize, y: &[f64]) -> Vec<f64> {
        assert!(ell <= self.rank(), "requested more modes than retained");
        let wy = self.weight.matvec(y);
        (0..ell)
            .map(|i| self.modes.column(i).iter().zip(&wy).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// The same basis restricted to the first `ell` modes. The raw spectrum
    /// and total energy keep the full decomposition so truncation errors and
    /// energy fractions stay comparable across cuts.
    pub fn truncated(&self, ell: usize) -> Result<PodBasis> {
        if ell == 0 || ell > self.rank() {
            return Err(PodError::invalid(format!(
                "cannot truncate a rank {} basis to {ell} modes",
                self.rank()
            )));
        }
        Ok(PodBasis {
            grid: Arc::clone(&self.grid),
            boundary: self.boundary.clone(),
            inner_product: self.inner_product,
            method: self.method,
            weight: self.weight.clone(),
            modes: self.modes.slice(s![.., ..ell]).to_owned(),
            eigenvalues: self.eigenvalues[..ell].to_vec(),
            raw_spectrum: self.raw_spectrum.clone(),
            sample_modes: self.sample_modes.slice(s![.., ..ell]).to_owned(),
            total_energy: self.total_energy,
            max_rank: self.max_rank,
        })
    }

    /// Expand mode coefficients back to spatial coefficients.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.modes.nrows()];
        for (i, c) in coeffs.iter().enumerate() {
            for (yj, m) in y.iter_mut().zip(self.modes.column(i)) {
                *yj += c * m;
            }
        }
        y
    }

    /// Squared distance of `y` to the span of the first `ell` modes, in the
    /// basis inner product. Uses the orthonormality identity
    /// `|y - P y|² = |y|² - Σ coeffs²`; tiny negative roundoff is clamped.
    pub fn projection_error_sq(&self, ell: usize, y: &[f64]) -> f64 {
        let full = self.weight.quadratic_form(y, y);
        let coeffs = self.project(ell, y);
        (full - coeffs.iter().map(|c| c * c).sum::<f64>()).max(0.0)
    }

    /// Fraction of snapshot energy captured by the first `ell` modes.
    pub fn energy_fraction(&self, ell: usize) -> f64 {
        assert!(ell <= self.rank());
        if self.total_energy <= 0.0 {
            return 1.0;
        }
        self.eigenvalues[..ell].iter().sum::<f64>() / self.total_energy
    }

    /// Smallest mode count whose energy fraction reaches `target`, capped at
    /// the retained rank.
    pub fn rank_for_energy(&self, target: f64) -> usize {
        for ell in 1..=self.rank() {
            if self.energy_fraction(ell) >= target {
                return ell;
            }
        }
        self.rank()
    }
}

/// Number of spectrum entries that rise above roundoff relative to the
/// leading one: `λ > max(m, n) · 2⁻⁵² · λ₁`.
fn roundoff_rank(spectrum: &[f64], m: usize, n: usize) -> usize {
    let lead = spectrum.first().copied().unwrap_or(0.0);
    if !(lead > 0.0) {
        return 0;
    }
    let cutoff = m.max(n) as f64 * f64::EPSILON * lead;
    spectrum.iter().take_while(|&&v| v > cutoff).count()
}

/// Fix the sign of each mode pair: the spatial component of largest
/// magnitude (first such index on ties) is made positive, and the matching
/// sample mode column flips with it so the factorization stays consistent.
fn fix_signs(modes: &mut Array2<f64>, sample_modes: &mut Array2<f64>) {
    for i in 0..modes.ncols() {
        let col = modes.column(i);
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for (j, &v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = j;
            }
        }
        if modes[[best, i]] < 0.0 {
            for v in modes.column_mut(i) {
                *v = -*v;
            }
            for v in sample_modes.column_mut(i) {
                *v = -*v;
            }
        }
    }
}

fn validate_set(set: &SnapshotSet) -> Result<()> {
    if set.is_empty() {
        return Err(PodError::invalid("snapshot set is empty"));
    }
    for (k, e) in set.entries.iter().enumerate() {
        if !(e.weight > 0.0 && e.weight.is_finite()) {
            return Err(PodError::invalid(format!(
                "snapshot {k} carries non-positive weight {}",
                e.weight
            )));
        }
        if !e.coeffs.iter().all(|v| v.is_finite()) {
            return Err(PodError::invalid(format!(
                "snapshot {k} contains non-finite coefficients"
            )));
        }
    }
    Ok(())
}

/// Full factorization output of one computational route before truncation.
struct RouteOutput {
    spectrum: Vec<f64>,
    modes: Array2<f64>,
    samples: Array2<f64>,
}

fn scale_columns(a: &mut Array2<f64>, factors: &[f64]) {
    for (j, &s) in factors.iter().enumerate() {
        a.column_mut(j).mapv_inplace(|v| v * s);
    }
}

fn route_svd(y: &Array2<f64>, sqrt_d: &[f64], w_dense: &Array2<f64>) -> Result<RouteOutput> {
    let (ws, wsi) = spd_sqrt_pair(w_dense)?;
    let mut scaled = ws.dot(y);
    scale_columns(&mut scaled, sqrt_d);
    let (u, sigma, v) = svd(&scaled)?;
    Ok(RouteOutput {
        spectrum: sigma.iter().map(|s| s * s).collect(),
        modes: wsi.dot(&u),
        samples: v,
    })
}

fn route_spatial(y: &Array2<f64>, sqrt_d: &[f64], w_dense: &Array2<f64>) -> Result<RouteOutput> {
    let (m, n) = y.dim();
    let (ws, wsi) = spd_sqrt_pair(w_dense)?;
    let mut scaled = ws.dot(y);
    scale_columns(&mut scaled, sqrt_d);
    let corr = scaled.dot(&scaled.t());
    let (lambda, u) = sym_eig(&corr)?;
    // Right factor columns y̅ᵀ uᵢ / σᵢ for the positive part of the
    // spectrum; the tail is never consulted past the rank cutoff.
    let keep = roundoff_rank(&lambda, m, n);
    let cols = m.min(n);
    let mut samples = Array2::zeros((n, cols));
    let ytu = scaled.t().dot(&u);
    for i in 0..keep.min(cols) {
        let s = lambda[i].sqrt();
        for j in 0..n {
            samples[[j, i]] = ytu[[j, i]] / s;
        }
    }
    Ok(RouteOutput {
        spectrum: lambda,
        modes: wsi.dot(&u),
        samples,
    })
}

/// Temporal route from a precomputed scaled Gramian `D^{1/2} Yᵀ W Y D^{1/2}`.
/// Modes are `Y D^{1/2} φᵢ / √λᵢ`; orthonormality in `W` follows from the
/// Gramian identity without any matrix square root.
fn route_temporal(y: &Array2<f64>, sqrt_d: &[f64], gram: &Array2<f64>) -> Result<RouteOutput> {
    let (m, n) = y.dim();
    let (lambda, phi) = sym_eig(gram)?;
    let keep = roundoff_rank(&lambda, m, n);
    let mut modes = Array2::zeros((m, n));
    for i in 0..keep {
        let s = lambda[i].sqrt();
        for r in 0..m {
            let mut acc = 0.0;
            for j in 0..n {
                acc += y[[r, j]] * sqrt_d[j] * phi[[j, i]];
            }
            modes[[r, i]] = acc / s;
        }
    }
    Ok(RouteOutput {
        spectrum: lambda,
        modes,
        samples: phi,
    })
}

/// Decide the retained mode count against the roundoff cutoff.
fn resolve_truncation(max_rank: usize, max_modes: Option<usize>) -> Result<usize> {
    match max_modes {
        Some(0) => Err(PodError::invalid("at least one mode must be retained")),
        Some(req) if req > max_rank => Err(PodError::RankDeficient {
            requested: req,
            rank: max_rank,
        }),
        Some(req) => Ok(req),
        None if max_rank == 0 => Err(PodError::RankDeficient {
            requested: 1,
            rank: 0,
        }),
        None => Ok(max_rank),
    }
}

fn truncate_route(
    route: RouteOutput,
    m: usize,
    n: usize,
    max_modes: Option<usize>,
) -> Result<(Vec<f64>, Vec<f64>, Array2<f64>, Array2<f64>, usize)> {
    let max_rank = roundoff_rank(&route.spectrum, m, n);
    let retain = resolve_truncation(max_rank, max_modes)?;
    let mut modes = route.modes.slice(ndarray::s![.., ..retain]).to_owned();
    let mut samples = route.samples.slice(ndarray::s![.., ..retain]).to_owned();
    fix_signs(&mut modes, &mut samples);
    Ok((
        route.spectrum[..retain].to_vec(),
        route.spectrum,
        modes,
        samples,
        max_rank,
    ))
}

/// Reduced basis of a plain snapshot matrix under arbitrary weights: the
/// decomposition maximizes captured energy of the columns of `y` in the
/// `w`-inner product with column weights `d`.
#[derive(Clone, Debug)]
pub struct MatrixPod {
    pub modes: Array2<f64>,
    pub eigenvalues: Vec<f64>,
    pub raw_spectrum: Vec<f64>,
    pub sample_modes: Array2<f64>,
    pub total_energy: f64,
    pub max_rank: usize,
}

impl MatrixPod {
    /// The `w`-orthogonal projector `Ψ Ψᵀ W` onto the retained span;
    /// invariant under sign and rotation ambiguities of the basis itself.
    pub fn projector(&self, w: &Array2<f64>) -> Array2<f64> {
        self.modes.dot(&self.modes.t().dot(w))
    }
}

/// Matrix-level decomposition with a dense symmetric positive definite
/// weight `w` and positive column weights `d`.
pub fn pod_from_matrices(
    y: &Array2<f64>,
    w: &Array2<f64>,
    d: &[f64],
    method: PodMethod,
    max_modes: Option<usize>,
) -> Result<MatrixPod> {
    let (m, n) = y.dim();
    if d.len() != n {
        return Err(PodError::invalid("column weight count must match columns"));
    }
    if !d.iter().all(|&v| v > 0.0 && v.is_finite()) {
        return Err(PodError::invalid("column weights must be positive and finite"));
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(PodError::invalid("snapshot matrix contains non-finite data"));
    }
    let sqrt_d: Vec<f64> = d.iter().map(|v| v.sqrt()).collect();
    let route = match method {
        PodMethod::Svd => route_svd(y, &sqrt_d, w)?,
        PodMethod::SpatialCorrelation => route_spatial(y, &sqrt_d, w)?,
        PodMethod::TemporalCorrelation => {
            let wy = w.dot(y);
            let mut gram = y.t().dot(&wy);
            for j in 0..n {
                for k in 0..n {
                    gram[[j, k]] *= sqrt_d[j] * sqrt_d[k];
                }
            }
            // Symmetrize away the roundoff asymmetry of the triple product.
            for j in 0..n {
                for k in j + 1..n {
                    let v = 0.5 * (gram[[j, k]] + gram[[k, j]]);
                    gram[[j, k]] = v;
                    gram[[k, j]] = v;
                }
            }
            route_temporal(y, &sqrt_d, &gram)?
        }
    };
    let total_energy: f64 = (0..n)
        .map(|j| {
            let col = y.column(j);
            let wcol = w.dot(&col);
            d[j] * col.dot(&wcol)
        })
        .sum();
    let (eigenvalues, raw_spectrum, modes, sample_modes, max_rank) =
        truncate_route(route, m, n, max_modes)?;
    Ok(MatrixPod {
        modes,
        eigenvalues,
        raw_spectrum,
        sample_modes,
        total_energy,
        max_rank,
    })
}

/// Compute a reduced basis from a snapshot set.
///
/// The SVD and spatial-correlation routes require every snapshot on one
/// grid; the temporal route transparently falls back to the cross-grid
/// Gramian when the set mixes grids. `max_modes` limits the retained modes;
/// `None` keeps everything above the roundoff cutoff. Requests beyond the
/// cutoff fail with a rank error rather than padding the basis with noise
/// directions.
pub fn compute_pod_basis(
    set: &SnapshotSet,
    method: PodMethod,
    max_modes: Option<usize>,
) -> Result<PodBasis> {
    validate_set(set)?;
    let grid = match set.common_grid() {
        Some(g) => Arc::clone(g),
        None => {
            return match method {
                PodMethod::TemporalCorrelation => {
                    let gram = cross_gramian(set)?;
                    pod_from_gramian(set, &gram, max_modes)
                }
                _ => Err(PodError::invalid(
                    "the svd and spatial-correlation routes need a single grid; \
                     the temporal route handles mixed grids",
                )),
            }
        }
    };
    let y = set.coeff_matrix()?;
    let (m, n) = y.dim();
    let weight = weight_matrix(&grid, &set.boundary, set.inner_product)?;

    let total_energy: f64 = set
        .entries
        .iter()
        .map(|e| e.weight * weight.quadratic_form(&e.coeffs, &e.coeffs))
        .sum();

    let sqrt_w: Vec<f64> = set.entries.iter().map(|e| e.weight.sqrt()).collect();
    let route = match method {
        PodMethod::Svd => route_svd(&y, &sqrt_w, &weight.to_dense())?,
        PodMethod::SpatialCorrelation => route_spatial(&y, &sqrt_w, &weight.to_dense())?,
        PodMethod::TemporalCorrelation => {
            let gram = scaled_gramian(&y, &weight, &sqrt_w);
            route_temporal(&y, &sqrt_w, &gram)?
        }
    };
    let (eigenvalues, raw_spectrum, modes, sample_modes, max_rank) =
        truncate_route(route, m, n, max_modes)?;

    Ok(PodBasis {
        grid,
        boundary: set.boundary.clone(),
        inner_product: set.inner_product,
        method,
        weight,
        modes,
        eigenvalues,
        raw_spectrum,
        sample_modes,
        total_energy,
        max_rank,
    })
}

/// `D^{1/2} Yᵀ W Y D^{1/2}` using tridiagonal quadratic forms only.
fn scaled_gramian(y: &Array2<f64>, weight: &TriDiag, sqrt_w: &[f64]) -> Array2<f64> {
    let n = y.ncols();
    let mut gram = Array2::zeros((n, n));
    let wy: Vec<Vec<f64>> = (0..n)
        .map(|j| weight.matvec(y.column(j).to_vec().as_slice()))
        .collect();
    for j in 0..n {
        for k in j..n {
            let ip: f64 = y.column(j).iter().zip(&wy[k]).map(|(a, b)| a * b).sum();
            let v = sqrt_w[j] * sqrt_w[k] * ip;
            gram[[j, k]] = v;
            gram[[k, j]] = v;
        }
    }
    gram
}

/// Weighted Gramian of a snapshot collection whose entries may live on
/// different spatial grids over the same interval.
///
/// Entry `(j, k)` is `√w_j √w_k ⟨y_j, y_k⟩_X`, with the pairing integrated
/// exactly on the merged breakpoint sequence of all grids.
#[derive(Clone, Debug)]
pub struct CrossGramian {
    pub matrix: Array2<f64>,
    /// Breakpoints the pairings were integrated on; also the nodes of the
    /// grid a basis extracted from this Gramian lives on.
    pub merged_nodes: Vec<f64>,
}

impl CrossGramian {
    /// Snapshot energy, the trace of the Gramian.
    pub fn total_energy(&self) -> f64 {
        (0..self.matrix.nrows()).map(|i| self.matrix[[i, i]]).sum()
    }

    /// Eigenvalue count above the roundoff cutoff.
    pub fn numerical_rank(&self) -> Result<usize> {
        let (lambda, _) = sym_eig(&self.matrix)?;
        Ok(roundoff_rank(&lambda, self.matrix.nrows(), self.matrix.nrows()))
    }
}

/// Merge the node sequences of every entry's grid, deduplicating exact and
/// near-coincident breakpoints.
fn merged_breakpoints(set: &SnapshotSet) -> Result<Vec<f64>> {
    let first = set.entries[0].grid.interval();
    let span = first.1 - first.0;
    let tol = 1e-12 * span.max(1.0);
    for e in &set.entries {
        let iv = e.grid.interval();
        if (iv.0 - first.0).abs() > tol || (iv.1 - first.1).abs() > tol {
            return Err(PodError::invalid(
                "snapshot grids cover different spatial intervals",
            ));
        }
    }
    let mut all: Vec<f64> = set
        .entries
        .iter()
        .flat_map(|e| e.grid.nodes().iter().copied())
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut merged = Vec::with_capacity(all.len());
    for x in all {
        if merged.last().map_or(true, |&last: &f64| x - last > tol) {
            merged.push(x);
        }
    }
    Ok(merged)
}

/// Evaluate every snapshot at the merged breakpoints. Interpolation is exact
/// because each entry is piecewise linear on a subset of the breakpoints.
fn values_on_merged(set: &SnapshotSet, merged: &[f64]) -> Vec<Vec<f64>> {
    set.entries
        .par_iter()
        .map(|e| {
            let nodal = full_nodal_values(&e.grid, &set.boundary, &e.coeffs);
            let nodes = e.grid.nodes();
            let mut vals = Vec::with_capacity(merged.len());
            let mut cell = 0usize;
            for &x in merged {
                while cell + 2 < nodes.len() && x > nodes[cell + 1] {
                    cell += 1;
                }
                let (xl, xr) = (nodes[cell], nodes[cell + 1]);
                let t = ((x - xl) / (xr - xl)).clamp(0.0, 1.0);
                vals.push(nodal[cell] * (1.0 - t) + nodal[cell + 1] * t);
            }
            vals
        })
        .collect()
}

/// Assemble the cross-grid Gramian of the snapshot set.
pub fn cross_gramian(set: &SnapshotSet) -> Result<CrossGramian> {
    validate_set(set)?;
    if set.inner_product == InnerProduct::V {
        if let BoundaryCondition::Robin { .. } = set.boundary {
            return Err(PodError::Unsupported(
                "the V inner product requires Dirichlet boundary conditions".into(),
            ));
        }
    }
    let merged = merged_breakpoints(set)?;
    let values = values_on_merge_checked(set, &merged)?;
    let n = set.entries.len();
    let sqrt_w: Vec<f64> = set.entries.iter().map(|e| e.weight.sqrt()).collect();

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut row = vec![0.0; n];
            for (k, item) in row.iter_mut().enumerate().take(n).skip(j) {
                let ip = match set.inner_product {
                    InnerProduct::H => pair_l2(&merged, &values[j], &values[k]),
                    InnerProduct::V => pair_h1(&merged, &values[j], &values[k]),
                };
                *item = sqrt_w[j] * sqrt_w[k] * ip;
            }
            row
        })
        .collect();

    let mut matrix = Array2::zeros((n, n));
    for (j, row) in rows.iter().enumerate() {
        for k in j..n {
            matrix[[j, k]] = row[k];
            matrix[[k, j]] = row[k];
        }
    }
    Ok(CrossGramian {
        matrix,
        merged_nodes: merged,
    })
}

fn values_on_merge_checked(set: &SnapshotSet, merged: &[f64]) -> Result<Vec<Vec<f64>>> {
    if merged.len() < 3 {
        return Err(PodError::invalid("merged grid has too few breakpoints"));
    }
    Ok(values_on_merged(set, merged))
}

/// L² pairing of two piecewise linear functions sampled at shared
/// breakpoints, by two-point Gauss quadrature per cell (exact for the
/// quadratic integrand).
fn pair_l2(nodes: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..nodes.len() - 1 {
        let (xl, xr) = (nodes[i], nodes[i + 1]);
        let h = xr - xl;
        let f = |t: f64| (a[i] * (1.0 - t) + a[i + 1] * t) * (b[i] * (1.0 - t) + b[i + 1] * t);
        acc += GAUSS_2
            .nodes
            .iter()
            .zip(GAUSS_2.weights.iter())
            .map(|(&g, &w)| w * f(0.5 * (g + 1.0)))
            .sum::<f64>()
            * 0.5
            * h;
    }
    acc
}

/// H¹ seminorm pairing of two piecewise linear functions: derivatives are
/// cellwise constant, so the midpoint value times the cell length is exact.
fn pair_h1(nodes: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..nodes.len() - 1 {
        let h = nodes[i + 1] - nodes[i];
        acc += (a[i + 1] - a[i]) * (b[i + 1] - b[i]) / h;
    }
    acc
}

/// Extract a reduced basis from a cross-grid Gramian. The modes live on the
/// merged grid and are weighted combinations of the interpolated snapshots.
pub fn pod_from_gramian(
    set: &SnapshotSet,
    gram: &CrossGramian,
    max_modes: Option<usize>,
) -> Result<PodBasis> {
    let n = set.entries.len();
    if gram.matrix.nrows() != n || gram.matrix.ncols() != n {
        return Err(PodError::invalid("Gramian size does not match snapshot count"));
    }
    let grid = Arc::new(Grid1D::from_nodes(gram.merged_nodes.clone())?);
    let weight = weight_matrix(&grid, &set.boundary, set.inner_product)?;
    let values = values_on_merged(set, &gram.merged_nodes);
    let m = grid.dof_count(&set.boundary);

    let (lambda, phi) = sym_eig(&gram.matrix)?;
    let max_rank = roundoff_rank(&lambda, m, n);
    let retain = resolve_truncation(max_rank, max_modes)?;

    let sqrt_w: Vec<f64> = set.entries.iter().map(|e| e.weight.sqrt()).collect();
    let dof_values: Vec<Vec<f64>> = values
        .iter()
        .map(|v| crate::mesh::restrict_to_dofs(&grid, &set.boundary, v))
        .collect();
    let mut modes = Array2::zeros((m, retain));
    for i in 0..retain {
        let s = lambda[i].sqrt();
        for (k, dv) in dof_values.iter().enumerate() {
            let c = sqrt_w[k] * phi[[k, i]] / s;
            for (r, &v) in dv.iter().enumerate() {
                modes[[r, i]] += c * v;
            }
        }
    }
    let mut sample_modes = phi.slice(ndarray::s![.., ..retain]).to_owned();
    fix_signs(&mut modes, &mut sample_modes);

    Ok(PodBasis {
        grid,
        boundary: set.boundary.clone(),
        inner_product: set.inner_product,
        method: PodMethod::TemporalCorrelation,
        weight,
        modes,
        eigenvalues: lambda[..retain].to_vec(),
        raw_spectrum: lambda,
        sample_modes,
        total_energy: gram.total_energy(),
        max_rank,
    })
}
