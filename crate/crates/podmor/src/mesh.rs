//! One-dimensional piecewise-linear finite elements.
//!
//! Grids carry their boundary nodes; the degree-of-freedom layout depends on
//! the boundary condition (interior nodes for Dirichlet, all nodes for Robin).
//! Mass, stiffness and advection matrices are assembled from closed-form
//! element integrals; data terms (loads, initial values, cubic pairings) go
//! through Gauss quadrature with the integrand split at declared breakpoints
//! so that piecewise-defined data is integrated exactly on each smooth piece.

use crate::error::{PodError, Result};
use crate::linalg::TriDiag;
use crate::quad::GAUSS_3;
use std::fmt;
use std::sync::Arc;

/// Strictly increasing node coordinates including both endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid1D {
    nodes: Vec<f64>,
}

impl Grid1D {
    /// Uniform grid over `[a, b]` with `interior` interior nodes
    /// (`interior + 2` nodes in total).
    pub fn uniform(a: f64, b: f64, interior: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(PodError::invalid(format!("bad interval [{a}, {b}]")));
        }
        if interior == 0 {
            return Err(PodError::invalid("grid needs at least one interior node"));
        }
        let n = interior + 2;
        let h = (b - a) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| a + i as f64 * h).collect();
        nodes[n - 1] = b;
        Ok(Grid1D { nodes })
    }

    /// Grid from explicit nodes; they must be finite and strictly increasing.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(PodError::invalid("grid needs at least three nodes"));
        }
        for w in nodes.windows(2) {
            if !w[0].is_finite() || !w[1].is_finite() || w[1] <= w[0] {
                return Err(PodError::invalid("grid nodes must increase strictly"));
            }
        }
        Ok(Grid1D { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().unwrap())
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Number of unknowns under the given boundary condition.
    pub fn dof_count(&self, bc: &BoundaryCondition) -> usize {
        match bc {
            BoundaryCondition::Dirichlet => self.nodes.len() - 2,
            BoundaryCondition::Robin { .. } => self.nodes.len(),
        }
    }

    /// Uniformly refined grid: every element is bisected. Node values of a
    /// piecewise-linear function carry over exactly, which the cross-grid
    /// Gramian tests rely on.
    pub fn refine_uniform(&self) -> Grid1D {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(*self.nodes.last().unwrap());
        Grid1D { nodes }
    }
}

/// Robin data `c ∂ₙy + q y = g` at one endpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobinData {
    pub q: f64,
    pub g: f64,
}

/// Boundary condition shared by both endpoints.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryCondition {
    /// Homogeneous Dirichlet; boundary nodes are eliminated.
    Dirichlet,
    /// Robin conditions; boundary nodes stay in the unknown vector and the
    /// data enters as rank-two corrections to operator and load.
    Robin { left: RobinData, right: RobinData },
}

impl BoundaryCondition {
    pub fn is_dirichlet(&self) -> bool {
        matches!(self, BoundaryCondition::Dirichlet)
    }
}

/// Spatial function with declared breakpoints between its smooth pieces.
#[derive(Clone)]
pub struct SpatialFunction {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    breakpoints: Vec<f64>,
}

impl SpatialFunction {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        SpatialFunction {
            f: Arc::new(f),
            breakpoints: Vec::new(),
        }
    }

    /// `breakpoints` must be sorted ascending; quadrature splits there.
    pub fn with_breakpoints(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        breakpoints: Vec<f64>,
    ) -> Result<Self> {
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) || breakpoints.iter().any(|b| !b.is_finite())
        {
            return Err(PodError::invalid("breakpoints must increase strictly"));
        }
        Ok(SpatialFunction {
            f: Arc::new(f),
            breakpoints,
        })
    }

    pub fn zero() -> Self {
        SpatialFunction::new(|_| 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
}

impl fmt::Debug for SpatialFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialFunction")
            .field("breakpoints", &self.breakpoints)
            .finish_non_exhaustive()
    }
}

/// Space-time function `f(t, x)` with spatial breakpoints.
#[derive(Clone)]
pub struct SpaceTimeFunction {
    f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    space_breakpoints: Vec<f64>,
}

impl SpaceTimeFunction {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        SpaceTimeFunction {
            f: Arc::new(f),
            space_breakpoints: Vec::new(),
        }
    }

    pub fn with_breakpoints(
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        space_breakpoints: Vec<f64>,
    ) -> Result<Self> {
        if space_breakpoints.windows(2).any(|w| w[1] <= w[0])
            || space_breakpoints.iter().any(|b| !b.is_finite())
        {
            return Err(PodError::invalid("breakpoints must increase strictly"));
        }
        Ok(SpaceTimeFunction {
            f: Arc::new(f),
            space_breakpoints,
        })
    }

    pub fn zero() -> Self {
        SpaceTimeFunction::new(|_, _| 0.0)
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x)
    }

    pub fn space_breakpoints(&self) -> &[f64] {
        &self.space_breakpoints
    }
}

impl fmt::Debug for SpaceTimeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpaceTimeFunction")
            .field("space_breakpoints", &self.space_breakpoints)
            .finish_non_exhaustive()
    }
}

/// Classification of the evolution problem
/// `y_t - c y_xx + β y_x + a y + c₃ y³ = f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    LinearHeat,
    ConvectionReactionDiffusion,
    SemilinearCubic,
}

/// Full problem description on `domain × (0, horizon]`.
#[derive(Clone, Debug)]
pub struct ModelProblem {
    pub kind: ProblemKind,
    pub diffusivity: f64,
    pub velocity: f64,
    pub reaction: f64,
    pub cubic: f64,
    pub forcing: SpaceTimeFunction,
    pub initial: SpatialFunction,
    pub boundary: BoundaryCondition,
    pub domain: (f64, f64),
    pub horizon: f64,
}

impl ModelProblem {
    /// Validated constructor. The coefficient set must match the declared
    /// kind: a linear heat problem has no advection, reaction or cubic term,
    /// and only the semilinear kind may carry a cubic coefficient.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: ProblemKind,
        diffusivity: f64,
        velocity: f64,
        reaction: f64,
        cubic: f64,
        forcing: SpaceTimeFunction,
        initial: SpatialFunction,
        boundary: BoundaryCondition,
        domain: (f64, f64),
        horizon: f64,
    ) -> Result<Self> {
        if !(diffusivity.is_finite() && diffusivity > 0.0) {
            return Err(PodError::invalid("diffusivity must be positive"));
        }
        if !velocity.is_finite() || !reaction.is_finite() || !cubic.is_finite() {
            return Err(PodError::invalid("coefficients must be finite"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(PodError::invalid("horizon must be positive"));
        }
        if !(domain.0.is_finite() && domain.1.is_finite() && domain.1 > domain.0) {
            return Err(PodError::invalid("domain must be a proper interval"));
        }
        match kind {
            ProblemKind::LinearHeat => {
                if velocity != 0.0 || reaction != 0.0 || cubic != 0.0 {
                    return Err(PodError::invalid(
                        "linear heat admits neither advection, reaction nor cubic terms",
                    ));
                }
            }
            ProblemKind::ConvectionReactionDiffusion => {
                if cubic != 0.0 {
                    return Err(PodError::invalid(
                        "convection-reaction-diffusion has no cubic term",
                    ));
                }
            }
            ProblemKind::SemilinearCubic => {
                if cubic < 0.0 {
                    return Err(PodError::invalid("cubic coefficient must be nonnegative"));
                }
            }
        }
        if let BoundaryCondition::Robin { left, right } = &boundary {
            for r in [left, right] {
                if !r.q.is_finite() || !r.g.is_finite() || r.q < 0.0 {
                    return Err(PodError::invalid("Robin data must be finite with q >= 0"));
                }
            }
        }
        Ok(ModelProblem {
            kind,
            diffusivity,
            velocity,
            reaction,
            cubic,
            forcing,
            initial,
            boundary,
            domain,
            horizon,
        })
    }

    pub fn is_nonlinear(&self) -> bool {
        self.cubic != 0.0
    }
}

/// Assembled finite element operators on one grid.
///
/// `mass`, `stiffness` and `advection` are the plain Gram matrices of the hat
/// basis (`⟨φ_j, φ_i⟩`, `⟨φ_j', φ_i'⟩`, `⟨φ_j', φ_i⟩`); problem coefficients
/// are applied when composing the spatial operator. Robin boundary weights
/// are kept separately so that `stiffness` stays the V-inner-product matrix.
#[derive(Clone, Debug)]
pub struct FeMatrices {
    pub mass: TriDiag,
    pub stiffness: TriDiag,
    pub advection: TriDiag,
    pub reaction_scale: f64,
    diffusivity: f64,
    velocity: f64,
    robin_q: Option<(f64, f64)>,
}

impl FeMatrices {
    /// Spatial operator `c·S + β·B + a·M` plus Robin corner weights; this is
    /// the matrix of the full bilinear form.
    pub fn spatial_operator(&self) -> TriDiag {
        let mut op = TriDiag::combine(&[
            (self.diffusivity, &self.stiffness),
            (self.velocity, &self.advection),
            (self.reaction_scale, &self.mass),
        ]);
        if let Some((ql, qr)) = self.robin_q {
            let n = op.n();
            op.diag[0] += ql;
            op.diag[n - 1] += qr;
        }
        op
    }
}

/// Mass matrix `⟨φ_j, φ_i⟩` in the boundary condition's dof layout.
pub fn mass_matrix(grid: &Grid1D, bc: &BoundaryCondition) -> TriDiag {
    let nodes = grid.nodes();
    let mut mass = TriDiag::zeros(grid.dof_count(bc));
    for e in 0..grid.num_elements() {
        let h = nodes[e + 1] - nodes[e];
        let (dl, dr) = (dof_index(grid, bc, e), dof_index(grid, bc, e + 1));
        if let Some(i) = dl {
            mass.diag[i] += h / 3.0;
        }
        if let Some(i) = dr {
            mass.diag[i] += h / 3.0;
        }
        if let (Some(i), Some(_)) = (dl, dr) {
            mass.sup[i] += h / 6.0;
            mass.sub[i] += h / 6.0;
        }
    }
    mass
}

/// Stiffness matrix `⟨φ_j', φ_i'⟩` in the boundary condition's dof layout.
pub fn stiffness_matrix(grid: &Grid1D, bc: &BoundaryCondition) -> TriDiag {
    let nodes = grid.nodes();
    let mut stiff = TriDiag::zeros(grid.dof_count(bc));
    for e in 0..grid.num_elements() {
        let h = nodes[e + 1] - nodes[e];
        let (dl, dr) = (dof_index(grid, bc, e), dof_index(grid, bc, e + 1));
        if let Some(i) = dl {
            stiff.diag[i] += 1.0 / h;
        }
        if let Some(i) = dr {
            stiff.diag[i] += 1.0 / h;
        }
        if let (Some(i), Some(_)) = (dl, dr) {
            stiff.sup[i] += -1.0 / h;
            stiff.sub[i] += -1.0 / h;
        }
    }
    stiff
}

/// Assembles mass, stiffness and advection matrices in the problem's
/// degree-of-freedom layout.
pub fn assemble(grid: &Grid1D, problem: &ModelProblem) -> Result<FeMatrices> {
    check_domain(grid, problem)?;
    let nodes = grid.nodes();
    let bc = &problem.boundary;
    let n = grid.dof_count(bc);
    if n == 0 {
        return Err(PodError::invalid("no degrees of freedom"));
    }
    let mut mass = TriDiag::zeros(n);
    let mut stiff = TriDiag::zeros(n);
    let mut adv = TriDiag::zeros(n);

    // Element loop; element e spans nodes e, e+1.
    for e in 0..grid.num_elements() {
        let h = nodes[e + 1] - nodes[e];
        let (dl, dr) = (dof_index(grid, bc, e), dof_index(grid, bc, e + 1));
        // Local matrices of the hat pair on the element:
        //   mass  [[h/3, h/6], [h/6, h/3]]
        //   stiff [[1/h, -1/h], [-1/h, 1/h]]
        //   adv   [[-1/2, 1/2], [-1/2, 1/2]]   (columns differentiate)
        if let Some(i) = dl {
            mass.diag[i] += h / 3.0;
            stiff.diag[i] += 1.0 / h;
            adv.diag[i] += -0.5;
        }
        if let Some(i) = dr {
            mass.diag[i] += h / 3.0;
            stiff.diag[i] += 1.0 / h;
            adv.diag[i] += 0.5;
        }
        if let (Some(i), Some(j)) = (dl, dr) {
            debug_assert_eq!(j, i + 1);
            mass.sup[i] += h / 6.0;
            mass.sub[i] += h / 6.0;
            stiff.sup[i] += -1.0 / h;
            stiff.sub[i] += -1.0 / h;
            adv.sup[i] += 0.5;
            adv.sub[i] += -0.5;
        }
    }

    let robin_q = match bc {
        BoundaryCondition::Dirichlet => None,
        BoundaryCondition::Robin { left, right } => Some((left.q, right.q)),
    };
    Ok(FeMatrices {
        mass,
        stiffness: stiff,
        advection: adv,
        reaction_scale: problem.reaction,
        diffusivity: problem.diffusivity,
        velocity: problem.velocity,
        robin_q,
    })
}

/// Load vector `⟨f(t, ·), φ_i⟩` plus Robin boundary data, by three-point
/// Gauss quadrature per element with splits at the forcing's breakpoints.
pub fn load_vector(grid: &Grid1D, problem: &ModelProblem, t: f64) -> Result<Vec<f64>> {
    if !t.is_finite() || t < -1e-12 * problem.horizon || t > problem.horizon * (1.0 + 1e-12) {
        return Err(PodError::invalid(format!(
            "time {t} outside [0, {}]",
            problem.horizon
        )));
    }
    check_domain(grid, problem)?;
    let f = &problem.forcing;
    let mut b = moments(grid, &problem.boundary, f.space_breakpoints(), |x| {
        f.eval(t, x)
    });
    if let BoundaryCondition::Robin { left, right } = &problem.boundary {
        let n = b.len();
        b[0] += left.g;
        b[n - 1] += right.g;
    }
    Ok(b)
}

/// Coefficients of the L²-projection of the initial value: solves
/// `M y = ⟨y∘, φ_i⟩`.
pub fn interpolate_initial(grid: &Grid1D, problem: &ModelProblem) -> Result<Vec<f64>> {
    check_domain(grid, problem)?;
    let y0 = &problem.initial;
    let b = moments(grid, &problem.boundary, y0.breakpoints(), |x| y0.eval(x));
    let fe = assemble(grid, problem)?;
    let lu = fe.mass.factor()?;
    Ok(lu.solve(&b))
}

/// Moment vector `⟨g, φ_i⟩` in dof layout.
pub(crate) fn moments(
    grid: &Grid1D,
    bc: &BoundaryCondition,
    breakpoints: &[f64],
    g: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let nodes = grid.nodes();
    let mut b = vec![0.0; grid.dof_count(bc)];
    for e in 0..grid.num_elements() {
        let (xl, xr) = (nodes[e], nodes[e + 1]);
        let h = xr - xl;
        if let Some(i) = dof_index(grid, bc, e) {
            b[i] += GAUSS_3.integrate_split(xl, xr, breakpoints, |x| g(x) * (xr - x) / h);
        }
        if let Some(i) = dof_index(grid, bc, e + 1) {
            b[i] += GAUSS_3.integrate_split(xl, xr, breakpoints, |x| g(x) * (x - xl) / h);
        }
    }
    b
}

/// Maps a node index to its dof index, `None` for eliminated boundary nodes.
pub(crate) fn dof_index(grid: &Grid1D, bc: &BoundaryCondition, node: usize) -> Option<usize> {
    match bc {
        BoundaryCondition::Dirichlet => {
            if node == 0 || node + 1 == grid.num_nodes() {
                None
            } else {
                Some(node - 1)
            }
        }
        BoundaryCondition::Robin { .. } => Some(node),
    }
}

/// Expands a dof vector to values at all grid nodes (zeros on Dirichlet
/// boundary nodes).
pub fn full_nodal_values(grid: &Grid1D, bc: &BoundaryCondition, dofs: &[f64]) -> Vec<f64> {
    assert_eq!(dofs.len(), grid.dof_count(bc), "dof layout mismatch");
    match bc {
        BoundaryCondition::Dirichlet => {
            let mut v = Vec::with_capacity(grid.num_nodes());
            v.push(0.0);
            v.extend_from_slice(dofs);
            v.push(0.0);
            v
        }
        BoundaryCondition::Robin { .. } => dofs.to_vec(),
    }
}

/// Restricts nodal values to the dof layout.
pub fn restrict_to_dofs(grid: &Grid1D, bc: &BoundaryCondition, nodal: &[f64]) -> Vec<f64> {
    assert_eq!(nodal.len(), grid.num_nodes());
    match bc {
        BoundaryCondition::Dirichlet => nodal[1..nodal.len() - 1].to_vec(),
        BoundaryCondition::Robin { .. } => nodal.to_vec(),
    }
}

/// Evaluates the piecewise-linear interpolant of `(nodes, values)` at `x`;
/// constant extrapolation outside the node range.
pub fn eval_piecewise_linear(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    debug_assert_eq!(nodes.len(), values.len());
    let n = nodes.len();
    if x <= nodes[0] {
        return values[0];
    }
    if x >= nodes[n - 1] {
        return values[n - 1];
    }
    let mut lo = 0usize;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if nodes[mid] <= x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = (x - nodes[lo]) / (nodes[hi] - nodes[lo]);
    values[lo] * (1.0 - w) + values[hi] * w
}

/// Interpolates an FE function from `src` onto the nodes of `dst`, returning
/// the dof vector on `dst`. Exact whenever `dst` contains all nodes of `src`.
pub fn interpolate_between_grids(
    src: &Grid1D,
    bc: &BoundaryCondition,
    coeffs: &[f64],
    dst: &Grid1D,
) -> Vec<f64> {
    let full = full_nodal_values(src, bc, coeffs);
    let nodal: Vec<f64> = dst
        .nodes()
        .iter()
        .map(|&x| eval_piecewise_linear(src.nodes(), &full, x))
        .collect();
    restrict_to_dofs(dst, bc, &nodal)
}

/// Load vector `⟨v³, φ_i⟩` of the cubed FE function with coefficients
/// `coeffs`. The integrand is quartic on each element, so any rule exact
/// through degree 5 integrates it exactly.
pub fn cubic_load(
    grid: &Grid1D,
    bc: &BoundaryCondition,
    coeffs: &[f64],
    rule: crate::quad::GaussRule,
) -> Vec<f64> {
    let full = full_nodal_values(grid, bc, coeffs);
    let nodes = grid.nodes();
    let mut b = vec![0.0; grid.dof_count(bc)];
    for e in 0..grid.num_elements() {
        let (xl, xr) = (nodes[e], nodes[e + 1]);
        let h = xr - xl;
        let (vl, vr) = (full[e], full[e + 1]);
        let value = |x: f64| {
            let w = (x - xl) / h;
            let v = vl * (1.0 - w) + vr * w;
            v * v * v
        };
        if let Some(i) = dof_index(grid, bc, e) {
            b[i] += rule.integrate(xl, xr, |x| value(x) * (xr - x) / h);
        }
        if let Some(i) = dof_index(grid, bc, e + 1) {
            b[i] += rule.integrate(xl, xr, |x| value(x) * (x - xl) / h);
        }
    }
    b
}

/// Tridiagonal matrix `⟨v² φ_j, φ_i⟩` weighted by the squared FE function
/// with coefficients `coeffs`; this is the state-dependent part of the
/// cubic term's Jacobian (up to the factor `3 c₃`).
pub fn state_squared_mass(
    grid: &Grid1D,
    bc: &BoundaryCondition,
    coeffs: &[f64],
    rule: crate::quad::GaussRule,
) -> TriDiag {
    let full = full_nodal_values(grid, bc, coeffs);
    let nodes = grid.nodes();
    let n = grid.dof_count(bc);
    let mut a = TriDiag::zeros(n);
    for e in 0..grid.num_elements() {
        let (xl, xr) = (nodes[e], nodes[e + 1]);
        let h = xr - xl;
        let (vl, vr) = (full[e], full[e + 1]);
        let sq = |x: f64| {
            let w = (x - xl) / h;
            let v = vl * (1.0 - w) + vr * w;
            v * v
        };
        let (dl, dr) = (dof_index(grid, bc, e), dof_index(grid, bc, e + 1));
        if let Some(i) = dl {
            a.diag[i] += rule.integrate(xl, xr, |x| {
                let p = (xr - x) / h;
                sq(x) * p * p
            });
        }
        if let Some(i) = dr {
            a.diag[i] += rule.integrate(xl, xr, |x| {
                let p = (x - xl) / h;
                sq(x) * p * p
            });
        }
        if let (Some(i), Some(j)) = (dl, dr) {
            debug_assert_eq!(j, i + 1);
            let v = rule.integrate(xl, xr, |x| sq(x) * (xr - x) * (x - xl) / (h * h));
            a.sup[i] += v;
            a.sub[i] += v;
        }
    }
    a
}

fn check_domain(grid: &Grid1D, problem: &ModelProblem) -> Result<()> {
    let (a, b) = grid.interval();
    let span = problem.domain.1 - problem.domain.0;
    if (a - problem.domain.0).abs() > 1e-12 * span || (b - problem.domain.1).abs() > 1e-12 * span {
        return Err(PodError::invalid(format!(
            "grid interval [{a}, {b}] does not match problem domain [{}, {}]",
            problem.domain.0, problem.domain.1
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_grid(a: f64, b: f64, interior: usize, rng: &mut impl Rng) -> Grid1D {
        let mut nodes: Vec<f64> = (0..interior).map(|_| rng.gen_range(a..b)).collect();
        nodes.push(a);
        nodes.push(b);
        nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());
        nodes.dedup_by(|x, y| (*x - *y).abs() < 1e-6);
        Grid1D::from_nodes(nodes).unwrap()
    }

    /// Global hat function at node `k` and its derivative.
    fn hat(grid: &Grid1D, k: usize, x: f64) -> f64 {
        let nd = grid.nodes();
        if k > 0 && x >= nd[k - 1] && x <= nd[k] {
            (x - nd[k - 1]) / (nd[k] - nd[k - 1])
        } else if k + 1 < nd.len() && x >= nd[k] && x <= nd[k + 1] {
            (nd[k + 1] - x) / (nd[k + 1] - nd[k])
        } else {
            0.0
        }
    }

    fn hat_deriv(grid: &Grid1D, k: usize, x: f64) -> f64 {
        let nd = grid.nodes();
        if k > 0 && x > nd[k - 1] && x < nd[k] {
            1.0 / (nd[k] - nd[k - 1])
        } else if k + 1 < nd.len() && x > nd[k] && x < nd[k + 1] {
            -1.0 / (nd[k + 1] - nd[k])
        } else {
            0.0
        }
    }

    /// Quadrature-based Gram matrix oracle: integrates the product of basis
    /// functions (or derivatives) element by element with the 3-point rule.
    fn oracle_gram(grid: &Grid1D, bc: &BoundaryCondition, derivatives: bool, mixed: bool) -> Array2<f64> {
        let n = grid.dof_count(bc);
        let nd = grid.nodes();
        let mut a = Array2::zeros((n, n));
        for e in 0..grid.num_elements() {
            let (xl, xr) = (nd[e], nd[e + 1]);
            for kn in [e, e + 1] {
                for ln in [e, e + 1] {
                    let (Some(i), Some(j)) = (dof_index(grid, bc, kn), dof_index(grid, bc, ln))
                    else {
                        continue;
                    };
                    // Open the interval slightly so derivative jumps at nodes
                    // do not leak across elements.
                    let val = crate::quad::GAUSS_3.integrate(xl, xr, |x| {
                        let xm = x.clamp(xl + 1e-13, xr - 1e-13);
                        let ti = if derivatives && !mixed {
                            hat_deriv(grid, kn, xm)
                        } else {
                            hat(grid, kn, xm)
                        };
                        let tj = if derivatives {
                            hat_deriv(grid, ln, xm)
                        } else {
                            hat(grid, ln, xm)
                        };
                        ti * tj
                    });
                    a[[i, j]] += val;
                }
            }
        }
        a
    }

    fn robin_bc() -> BoundaryCondition {
        BoundaryCondition::Robin {
            left: RobinData { q: 1.5, g: 0.5 },
            right: RobinData { q: 0.25, g: -1.0 },
        }
    }

    #[test]
    fn closed_form_matrices_match_quadrature_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for bc in [BoundaryCondition::Dirichlet, robin_bc()] {
            let grid = random_grid(0.0, 2.0, 17, &mut rng);
            let problem = ModelProblem::new(
                ProblemKind::ConvectionReactionDiffusion,
                0.7,
                1.3,
                -0.2,
                0.0,
                SpaceTimeFunction::zero(),
                SpatialFunction::zero(),
                bc.clone(),
                (0.0, 2.0),
                1.0,
            )
            .unwrap();
            let fe = assemble(&grid, &problem).unwrap();
            for (tri, derivatives, mixed, name) in [
                (&fe.mass, false, false, "mass"),
                (&fe.stiffness, true, false, "stiffness"),
                (&fe.advection, true, true, "advection"),
            ] {
                let dense = tri.to_dense();
                let oracle = oracle_gram(&grid, &bc, derivatives, mixed);
                let n = dense.nrows();
                for i in 0..n {
                    for j in 0..n {
                        let d = (dense[[i, j]] - oracle[[i, j]]).abs();
                        assert!(
                            d <= 1e-12 * oracle[[i, j]].abs().max(1.0),
                            "{name}[{i}][{j}]: closed form {} vs oracle {}",
                            dense[[i, j]],
                            oracle[[i, j]]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn mass_row_sums_are_hat_integrals() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let grid = random_grid(-1.0, 3.0, 11, &mut rng);
        let bc = robin_bc();
        let problem = catalog_problem_on(&grid, bc.clone());
        let fe = assemble(&grid, &problem).unwrap();
        let ones = vec![1.0; grid.dof_count(&bc)];
        let sums = fe.mass.matvec(&ones);
        let nd = grid.nodes();
        for (k, s) in sums.iter().enumerate() {
            let left = if k > 0 { nd[k] - nd[k - 1] } else { 0.0 };
            let right = if k + 1 < nd.len() { nd[k + 1] - nd[k] } else { 0.0 };
            let want = 0.5 * (left + right);
            assert!((s - want).abs() < 1e-13, "row {k}");
        }
        // Constants lie in the stiffness kernel when no node is eliminated.
        let s_sums = fe.stiffness.matvec(&ones);
        assert!(s_sums.iter().all(|v| v.abs() < 1e-12));
    }

    fn catalog_problem_on(grid: &Grid1D, bc: BoundaryCondition) -> ModelProblem {
        let (a, b) = grid.interval();
        ModelProblem::new(
            ProblemKind::LinearHeat,
            1.0,
            0.0,
            0.0,
            0.0,
            SpaceTimeFunction::zero(),
            SpatialFunction::zero(),
            bc,
            (a, b),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn polynomial_load_matches_dense_quadrature() {
        let problem = catalog::heat_polynomial_forcing();
        let grid = Grid1D::uniform(0.0, 2.0, 40).unwrap();
        let t = 1.25;
        let b = load_vector(&grid, &problem, t).unwrap();
        // Dense trapezoid oracle over each hat support.
        let nd = grid.nodes();
        for (i, bi) in b.iter().enumerate() {
            let node = i + 1;
            let (lo, hi) = (nd[node - 1], nd[node + 1]);
            let panels = 20_000;
            let hstep = (hi - lo) / panels as f64;
            let mut acc = 0.0;
            for p in 0..=panels {
                let x = lo + p as f64 * hstep;
                let w = if p == 0 || p == panels { 0.5 } else { 1.0 };
                acc += w * problem.forcing.eval(t, x) * hat(&grid, node, x);
            }
            acc *= hstep;
            assert!((bi - acc).abs() < 1e-8, "dof {i}: {bi} vs {acc}");
        }
    }

    #[test]
    fn breakpoint_splitting_integrates_step_data_exactly() {
        // 41 interior nodes put the jumps of the step profile strictly inside
        // elements, so splitting is what makes the moments exact.
        let problem = catalog::heat_polynomial_forcing();
        let grid = Grid1D::uniform(0.0, 2.0, 41).unwrap();
        let y0 = &problem.initial;
        let b = moments(&grid, &problem.boundary, y0.breakpoints(), |x| y0.eval(x));
        let nd = grid.nodes();
        for (i, bi) in b.iter().enumerate() {
            let node = i + 1;
            let (lo, hi) = (nd[node - 1], nd[node + 1]);
            // Exact moment of the step profile against the hat: integrate the
            // hat over the intersection of its support with (0.5,1) minus the
            // intersection with (1,1.5), by very fine midpoint quadrature.
            let panels = 400_000;
            let hstep = (hi - lo) / panels as f64;
            let mut acc = 0.0;
            for p in 0..panels {
                let x = lo + (p as f64 + 0.5) * hstep;
                acc += y0.eval(x) * hat(&grid, node, x) * hstep;
            }
            assert!((bi - acc).abs() < 1e-9, "dof {i}: {bi} vs {acc}");
        }
    }

    #[test]
    fn projection_of_fe_function_returns_its_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let grid = random_grid(0.0, 2.0, 23, &mut rng);
        let coeffs: Vec<f64> = (0..grid.dof_count(&BoundaryCondition::Dirichlet))
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let nodes = grid.nodes().to_vec();
        let full = full_nodal_values(&grid, &BoundaryCondition::Dirichlet, &coeffs);
        let interior: Vec<f64> = nodes[1..nodes.len() - 1].to_vec();
        let initial = SpatialFunction::with_breakpoints(
            move |x| eval_piecewise_linear(&nodes, &full, x),
            interior,
        )
        .unwrap();
        let problem = ModelProblem::new(
            ProblemKind::LinearHeat,
            1.0,
            0.0,
            0.0,
            0.0,
            SpaceTimeFunction::zero(),
            initial,
            BoundaryCondition::Dirichlet,
            (0.0, 2.0),
            1.0,
        )
        .unwrap();
        let projected = interpolate_initial(&grid, &problem).unwrap();
        for (got, want) in projected.iter().zip(&coeffs) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn coefficient_quadratic_form_is_the_l2_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let grid = random_grid(0.0, 1.0, 9, &mut rng);
        let bc = BoundaryCondition::Dirichlet;
        let problem = catalog_problem_on(&grid, bc.clone());
        let fe = assemble(&grid, &problem).unwrap();
        let v: Vec<f64> = (0..grid.dof_count(&bc))
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let full = full_nodal_values(&grid, &bc, &v);
        let nd = grid.nodes();
        let mut want = 0.0;
        for e in 0..grid.num_elements() {
            want += crate::quad::GAUSS_3.integrate(nd[e], nd[e + 1], |x| {
                let val = eval_piecewise_linear(nd, &full, x);
                val * val
            });
        }
        let got = fe.mass.quadratic_form(&v, &v);
        assert!((got - want).abs() < 1e-13 * want.max(1.0));
    }

    #[test]
    fn robin_corrections_enter_operator_and_load() {
        let problem = catalog::robin_heat();
        let grid = Grid1D::uniform(0.0, 2.0, 15).unwrap();
        let fe = assemble(&grid, &problem).unwrap();
        let op = fe.spatial_operator();
        let plain = TriDiag::combine(&[
            (problem.diffusivity, &fe.stiffness),
            (problem.velocity, &fe.advection),
            (problem.reaction, &fe.mass),
        ]);
        let n = op.n();
        assert!((op.diag[0] - plain.diag[0] - 1.0).abs() < 1e-15);
        assert!((op.diag[n - 1] - plain.diag[n - 1] - 2.0).abs() < 1e-15);
        for i in 1..n - 1 {
            assert_eq!(op.diag[i], plain.diag[i]);
        }
        let b = load_vector(&grid, &problem, 0.0).unwrap();
        let raw = moments(&grid, &problem.boundary, &[], |x| problem.forcing.eval(0.0, x));
        assert!((b[0] - raw[0] - 0.5).abs() < 1e-15);
        assert!((b[n - 1] - raw[n - 1] + 0.25).abs() < 1e-15);
        for i in 1..n - 1 {
            assert_eq!(b[i], raw[i]);
        }
    }

    #[test]
    fn interpolation_to_refined_grid_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let grid = random_grid(0.0, 1.0, 7, &mut rng);
        let bc = BoundaryCondition::Dirichlet;
        let coeffs: Vec<f64> = (0..grid.dof_count(&bc))
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let fine = grid.refine_uniform();
        let on_fine = interpolate_between_grids(&grid, &bc, &coeffs, &fine);
        let back = interpolate_between_grids(&fine, &bc, &on_fine, &grid);
        for (got, want) in back.iter().zip(&coeffs) {
            assert!((got - want).abs() < 1e-14);
        }
        // Midpoints must be averages of the endpoint values.
        let full_c = full_nodal_values(&grid, &bc, &coeffs);
        let full_f = full_nodal_values(&fine, &bc, &on_fine);
        for e in 0..grid.num_elements() {
            let want = 0.5 * (full_c[e] + full_c[e + 1]);
            assert!((full_f[2 * e + 1] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn constructors_validate() {
        assert!(Grid1D::uniform(0.0, 2.0, 0).is_err());
        assert!(Grid1D::uniform(2.0, 0.0, 5).is_err());
        assert!(Grid1D::from_nodes(vec![0.0, 0.0, 1.0]).is_err());
        assert!(ModelProblem::new(
            ProblemKind::LinearHeat,
            1.0,
            0.5, // advection not allowed for the linear heat kind
            0.0,
            0.0,
            SpaceTimeFunction::zero(),
            SpatialFunction::zero(),
            BoundaryCondition::Dirichlet,
            (0.0, 1.0),
            1.0,
        )
        .is_err());
        let problem = catalog::heat_polynomial_forcing();
        let grid = Grid1D::uniform(0.0, 2.0, 10).unwrap();
        assert!(load_vector(&grid, &problem, 3.5).is_err());
        assert!(load_vector(&grid, &problem, -0.5).is_err());
        let wrong = Grid1D::uniform(0.0, 1.0, 10).unwrap();
        assert!(assemble(&wrong, &problem).is_err());
    }

    #[test]
    fn dirichlet_and_robin_dof_layouts() {
        let grid = Grid1D::uniform(0.0, 1.0, 4).unwrap();
        assert_eq!(grid.dof_count(&BoundaryCondition::Dirichlet), 4);
        assert_eq!(grid.dof_count(&robin_bc()), 6);
        let dofs = vec![1.0, 2.0, 3.0, 4.0];
        let full = full_nodal_values(&grid, &BoundaryCondition::Dirichlet, &dofs);
        assert_eq!(full, vec![0.0, 1.0, 2.0, 3.0, 4.0, 0.0]);
        assert_eq!(
            restrict_to_dofs(&grid, &BoundaryCondition::Dirichlet, &full),
            dofs
        );
    }
}
