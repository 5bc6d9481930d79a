//! Reduced-order time stepping in a precomputed orthonormal basis.
//!
//! The reduced system is the Galerkin projection of the implicit Euler
//! scheme: every full-order matrix is compressed once during assembly, and
//! the stepping then works with dense systems whose size is the mode count.
//! The cubic term offers several treatments that trade fidelity against the
//! cost of touching the full grid during stepping.

use std::sync::Arc;

use ndarray::Array2;

use crate::error::{PodError, Result};
use crate::linalg::{LuFactor, TriDiag};
use crate::mesh::{
    assemble, cubic_load, interpolate_initial, interpolate_between_grids, load_vector,
    state_squared_mass, Grid1D, ModelProblem,
};
use crate::pod::PodBasis;
use crate::quad::{GAUSS_3, GAUSS_4};
use crate::snapshots::{SnapshotEntry, SnapshotSet};
use crate::timegrid::TimeGrid;

/// How the reduced load vector samples the forcing on each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadMode {
    /// Average the load over the step, `(1/Δt) ∫ b(t) dt`, by three-point
    /// Gauss quadrature in time.
    TimeAveraged,
    /// Evaluate the load at the step's endpoint, exactly like the full-order
    /// solver; reduced and full trajectories are then directly comparable.
    Endpoint,
}

/// Treatment of the cubic reaction term during reduced stepping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CubicTreatment {
    /// Drop the term; the reduced model is linear.
    Omit,
    /// Keep the exact Galerkin nonlinearity: every Newton iteration lifts
    /// the reduced state to the full grid and projects back.
    Galerkin,
    /// First-order expansion about the stored snapshot trajectory; stepping
    /// stays linear but the system matrix changes per step.
    Linearized,
    /// Zeroth-order replay: the nonlinearity becomes a known source term
    /// evaluated on the snapshot trajectory.
    Frozen,
}

/// Reduced operators, loads and treatment data for one model problem.
#[derive(Clone, Debug)]
pub struct RomSystem {
    pub basis: PodBasis,
    pub time_grid: TimeGrid,
    pub load_mode: LoadMode,
    pub treatment: CubicTreatment,
    pub cubic: f64,
    /// `ΨᵀMΨ`; the identity when the basis is mass-orthonormal.
    pub reduced_mass: Array2<f64>,
    /// `ΨᵀAΨ` with `A` the full spatial operator (including Robin weights).
    pub reduced_operator: Array2<f64>,
    /// Reduced load per step; entry 0 is unused and kept zero.
    pub reduced_loads: Vec<Vec<f64>>,
    /// Reduced coefficients of the initial state.
    pub initial_coeffs: Vec<f64>,
    /// `Ψᵀ n(y_j)` per step for the snapshot-anchored treatments.
    pub frozen_sources: Vec<Vec<f64>>,
    /// `Ψᵀ n'(y_j) Ψ` per step for the linearized treatment.
    pub linearized_ops: Vec<Array2<f64>>,
    /// `Ψᵀ n'(y_j) y_j` per step for the linearized treatment.
    pub linearized_anchors: Vec<Vec<f64>>,
}

impl RomSystem {
    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    /// Expand reduced coefficients to spatial coefficients on the basis grid.
    pub fn lift(&self, coeffs: &[f64]) -> Vec<f64> {
        self.basis.reconstruct(coeffs)
    }
}

/// Reduced coefficients along a time grid, one state per instant.
#[derive(Clone, Debug)]
pub struct RomTrajectory {
    pub eta: Vec<Vec<f64>>,
    pub time_grid: TimeGrid,
}

/// Evaluate a reduced trajectory as a snapshot set on a target grid.
///
/// Each mode is interpolated from its native grid onto the target nodes once
/// and the states are then plain linear combinations; with the native grid
/// as target this is an exact matrix product. Entries carry the trajectory's
/// trapezoidal weights.
pub fn lift(
    traj: &RomTrajectory,
    basis: &PodBasis,
    target: &Arc<Grid1D>,
) -> Result<SnapshotSet> {
    let (a, b) = basis.grid.interval();
    let (ta, tb) = target.interval();
    if (a - ta).abs() > 1e-12 * (b - a) || (b - tb).abs() > 1e-12 * (b - a) {
        return Err(PodError::invalid(
            "target grid covers a different interval than the basis grid",
        ));
    }
    let native = target.nodes() == basis.grid.nodes();
    let mut target_modes = Vec::with_capacity(basis.rank());
    for i in 0..basis.rank() {
        let col = basis.modes.column(i).to_vec();
        if native {
            target_modes.push(col);
        } else {
            target_modes.push(interpolate_between_grids(
                &basis.grid,
                &basis.boundary,
                &col,
                target,
            ));
        }
    }
    let weights = traj.time_grid.weights();
    let dofs = target.dof_count(&basis.boundary);
    let entries = traj
        .eta
        .iter()
        .zip(&weights)
        .map(|(coeffs, &w)| {
            let mut vals = vec![0.0; dofs];
            for (c, mode) in coeffs.iter().zip(&target_modes) {
                for (v, m) in vals.iter_mut().zip(mode) {
                    *v += c * m;
                }
            }
            SnapshotEntry {
                grid: Arc::clone(target),
                coeffs: vals,
                weight: w,
            }
        })
        .collect();
    Ok(SnapshotSet {
        entries,
        boundary: basis.boundary.clone(),
        inner_product: basis.inner_product,
        time_grid: traj.time_grid.clone(),
        ensembles: 1,
    })
}

/// `Ψᵀ (T Ψ)` for a tridiagonal full-order operator.
fn project_operator(modes: &Array2<f64>, t: &TriDiag) -> Array2<f64> {
    let (m, r) = modes.dim();
    let mut tpsi = Array2::zeros((m, r));
    for i in 0..r {
        let col = modes.column(i).to_vec();
        let tv = t.matvec(&col);
        for (row, v) in tv.iter().enumerate() {
            tpsi[[row, i]] = *v;
        }
    }
    modes.t().dot(&tpsi)
}

/// `Ψᵀ v` for a full-order vector.
fn project_vector(modes: &Array2<f64>, v: &[f64]) -> Vec<f64> {
    (0..modes.ncols())
        .map(|i| modes.column(i).iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn grids_match(a: &crate::mesh::Grid1D, b: &crate::mesh::Grid1D) -> bool {
    a.num_nodes() == b.num_nodes()
        && a.nodes()
            .iter()
            .zip(b.nodes())
            .all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()))
}

fn time_grids_match(a: &TimeGrid, b: &TimeGrid) -> bool {
    a.n() == b.n()
        && a.instants()
            .iter()
            .zip(b.instants())
            .all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + a.horizon()))
}

/// Project the full-order problem onto the basis.
///
/// The snapshot set is only consulted by the `Linearized` and `Frozen`
/// treatments, which anchor the cubic term on the stored trajectory; those
/// treatments therefore require the snapshots to live on the basis grid and
/// on the requested time grid.
pub fn assemble_rom(
    basis: &PodBasis,
    problem: &ModelProblem,
    time_grid: &TimeGrid,
    load_mode: LoadMode,
    treatment: CubicTreatment,
    snapshots: Option<&SnapshotSet>,
) -> Result<RomSystem> {
    if basis.boundary != problem.boundary {
        return Err(PodError::invalid(
            "basis and problem use different boundary conditions",
        ));
    }
    if (time_grid.horizon() - problem.horizon).abs() > 1e-12 * problem.horizon.max(1.0) {
        return Err(PodError::invalid(
            "time grid horizon does not match the problem horizon",
        ));
    }

    let grid = &basis.grid;
    let fem = assemble(grid, problem)?;
    let op = fem.spatial_operator();
    let modes = &basis.modes;
    let n = time_grid.n();

    let reduced_mass = project_operator(modes, &fem.mass);
    let reduced_operator = project_operator(modes, &op);

    let mut reduced_loads = vec![vec![0.0; basis.rank()]; n];
    let instants = time_grid.instants();
    for j in 1..n {
        let full_load = match load_mode {
            LoadMode::Endpoint => load_vector(grid, problem, instants[j])?,
            LoadMode::TimeAveraged => {
                let (a, b) = (instants[j - 1], instants[j]);
                let dt = b - a;
                let mut avg = vec![0.0; grid.dof_count(&problem.boundary)];
                for (g, w) in GAUSS_3.nodes.iter().zip(GAUSS_3.weights.iter()) {
                    let t = 0.5 * (a + b) + 0.5 * dt * g;
                    let bt = load_vector(grid, problem, t)?;
                    for (acc, v) in avg.iter_mut().zip(&bt) {
                        *acc += 0.5 * w * v;
                    }
                }
                avg
            }
        };
        reduced_loads[j] = project_vector(modes, &full_load);
    }

    let y0 = interpolate_initial(grid, problem)?;
    let rhs0 = project_vector(modes, &fem.mass.matvec(&y0));
    let initial_coeffs = LuFactor::new(&reduced_mass)?.solve(&rhs0);

    let (mut frozen_sources, mut linearized_ops, mut linearized_anchors) =
        (Vec::new(), Vec::new(), Vec::new());
    if matches!(treatment, CubicTreatment::Linearized | CubicTreatment::Frozen) {
        let snaps = snapshots.ok_or_else(|| {
            PodError::invalid("snapshot-anchored treatments need the snapshot trajectory")
        })?;
        if !grids_match(&snaps.entries[0].grid, grid) || snaps.common_grid().is_none() {
            return Err(PodError::invalid(
                "snapshot-anchored treatments require snapshots on the basis grid",
            ));
        }
        if !time_grids_match(&snaps.time_grid, time_grid) {
            return Err(PodError::invalid(
                "snapshot-anchored treatments require the snapshot time grid",
            ));
        }
        let c3 = problem.cubic;
        frozen_sources = vec![vec![0.0; basis.rank()]; n];
        for j in 1..n {
            let y = &snaps.trajectory()[j].coeffs;
            let mut load = cubic_load(grid, &problem.boundary, y, GAUSS_4);
            for v in &mut load {
                *v *= c3;
            }
            frozen_sources[j] = project_vector(modes, &load);
        }
        if treatment == CubicTreatment::Linearized {
            linearized_ops = vec![Array2::zeros((0, 0)); n];
            linearized_anchors = vec![vec![0.0; basis.rank()]; n];
            for j in 1..n {
                let y = &snaps.trajectory()[j].coeffs;
                let weighted = TriDiag::combine(&[(
                    3.0 * c3,
                    &state_squared_mass(grid, &problem.boundary, y, GAUSS_4),
                )]);
                linearized_ops[j] = project_operator(modes, &weighted);
                linearized_anchors[j] = project_vector(modes, &weighted.matvec(y));
            }
        }
    }

    Ok(RomSystem {
        basis: basis.clone(),
        time_grid: time_grid.clone(),
        load_mode,
        treatment,
        cubic: problem.cubic,
        reduced_mass,
        reduced_operator,
        reduced_loads,
        initial_coeffs,
        frozen_sources,
        linearized_ops,
        linearized_anchors,
    })
}

/// March the reduced system through its time grid and return the reduced
/// coefficients at every instant.
pub fn rom_step_sequence(
    rom: &RomSystem,
    newton_tol: f64,
    newton_max: usize,
) -> Result<RomTrajectory> {
    let n = rom.time_grid.n();
    let r = rom.rank();
    let mut states = Vec::with_capacity(n);
    states.push(rom.initial_coeffs.clone());

    // Constant-matrix treatments reuse one factorization per distinct step.
    let mut cached: Option<(u64, LuFactor)> = None;
    for j in 1..n {
        let dt = rom.time_grid.dt(j);
        let prev = &states[j - 1];

        let mut rhs = mat_vec(&rom.reduced_mass, prev);
        for (acc, f) in rhs.iter_mut().zip(&rom.reduced_loads[j]) {
            *acc += dt * f;
        }

        let eta = match rom.treatment {
            CubicTreatment::Omit => {
                linear_solve_cached(&mut cached, dt, &rom.reduced_mass, &rom.reduced_operator, &rhs)?
            }
            CubicTreatment::Frozen => {
                for (acc, p) in rhs.iter_mut().zip(&rom.frozen_sources[j]) {
                    *acc -= dt * p;
                }
                linear_solve_cached(&mut cached, dt, &rom.reduced_mass, &rom.reduced_operator, &rhs)?
            }
            CubicTreatment::Linearized => {
                for i in 0..r {
                    rhs[i] -= dt * (rom.frozen_sources[j][i] - rom.linearized_anchors[j][i]);
                }
                let mut system = &rom.reduced_mass + &(dt * &rom.reduced_operator);
                system += &(dt * &rom.linearized_ops[j]);
                LuFactor::new(&system)?.solve(&rhs)
            }
            CubicTreatment::Galerkin => reduced_newton(
                rom,
                dt,
                &rhs,
                prev,
                newton_tol,
                newton_max,
                rom.time_grid.instants()[j],
            )?,
        };
        if !eta.iter().all(|v| v.is_finite()) {
            return Err(PodError::IllPosed(format!(
                "reduced state became non-finite at t = {}",
                rom.time_grid.instants()[j]
            )));
        }
        states.push(eta);
    }
    Ok(RomTrajectory {
        eta: states,
        time_grid: rom.time_grid.clone(),
    })
}

fn mat_vec(a: &Array2<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[[i, j]] * x[j]).sum())
        .collect()
}

fn linear_solve_cached(
    cached: &mut Option<(u64, LuFactor)>,
    dt: f64,
    mass: &Array2<f64>,
    operator: &Array2<f64>,
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let needs_fresh = match cached {
        Some((bits, _)) => *bits != dt.to_bits(),
        None => true,
    };
    if needs_fresh {
        let system = mass + &(dt * operator);
        *cached = Some((dt.to_bits(), LuFactor::new(&system)?));
    }
    Ok(cached.as_ref().unwrap().1.solve(rhs))
}

/// Newton iteration for the exact Galerkin nonlinearity. Residual and
/// Jacobian are evaluated by lifting to the full grid; the linear algebra
/// stays reduced.
fn reduced_newton(
    rom: &RomSystem,
    dt: f64,
    rhs: &[f64],
    start: &[f64],
    tol: f64,
    max_iter: usize,
    t: f64,
) -> Result<Vec<f64>> {
    let grid = &rom.basis.grid;
    let bc = &rom.basis.boundary;
    let modes = &rom.basis.modes;
    let c3 = rom.cubic;
    let rhs_norm = norm2(rhs);
    let mut eta = start.to_vec();
    for _ in 0..max_iter {
        let lifted = rom.lift(&eta);
        let mut residual = mat_vec(&rom.reduced_mass, &eta);
        let a_eta = mat_vec(&rom.reduced_operator, &eta);
        let mut nl = cubic_load(grid, bc, &lifted, GAUSS_3);
        for v in &mut nl {
            *v *= c3;
        }
        let nl_reduced = project_vector(modes, &nl);
        for i in 0..residual.len() {
            residual[i] += dt * (a_eta[i] + nl_reduced[i]) - rhs[i];
        }
        let res_norm = norm2(&residual);
        if !res_norm.is_finite() {
            return Err(PodError::IllPosed(format!(
                "reduced Newton residual became non-finite at t = {t}"
            )));
        }
        if res_norm <= tol * (1.0 + rhs_norm) {
            return Ok(eta);
        }
        let weighted = state_squared_mass(grid, bc, &lifted, GAUSS_3);
        let mut jac = &rom.reduced_mass + &(dt * &rom.reduced_operator);
        jac += &((3.0 * c3 * dt) * &project_operator(modes, &weighted));
        let delta = LuFactor::new(&jac)?.solve(&residual);
        for (e, d) in eta.iter_mut().zip(&delta) {
            *e -= d;
        }
    }
    Err(PodError::ConvergenceFailure {
        context: format!("reduced Newton iteration at t = {t}"),
        residual: rhs_norm,
        iterations: max_iter,
    })
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Snapshot-space pairing tables of the cubic term along a trajectory.
///
/// With `s_k = sqrt(w_k) y_k` the weight-scaled snapshots, entry `[j][k]` of
/// `source` is `⟨n(y_j), s_k⟩`, `anchor` holds `⟨n'(y_j) y_j, s_k⟩`, and
/// `derivative[j]` the full pairing matrix `⟨n'(y_j) s_ν, s_μ⟩`. The anchor
/// index `j` runs over the trajectory states only; the pairing indices run
/// over every entry of the set, difference quotients included, because the
/// basis is drawn from all of them. Everything is integrated with four-point
/// Gauss quadrature, exact well past the quartic integrands.
#[derive(Clone, Debug)]
pub struct LinearizationTables {
    pub source: Vec<Vec<f64>>,
    pub anchor: Vec<Vec<f64>>,
    pub derivative: Vec<Array2<f64>>,
}

impl LinearizationTables {
    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }
}

/// Build the snapshot-space pairing tables of the problem's cubic term.
///
/// The reduced operators used by the `Linearized` treatment are contractions
/// of these tables with the sample modes; the tables themselves stay in
/// snapshot space so they can be reused for any basis drawn from the same
/// set. A problem without a cubic term yields empty tables.
pub fn build_linearization_data(
    set: &SnapshotSet,
    problem: &ModelProblem,
) -> Result<LinearizationTables> {
    if problem.cubic == 0.0 {
        return Ok(LinearizationTables {
            source: Vec::new(),
            anchor: Vec::new(),
            derivative: Vec::new(),
        });
    }
    let grid = set
        .common_grid()
        .ok_or_else(|| PodError::invalid("linearization tables require a single grid"))?;
    if set.boundary != problem.boundary {
        return Err(PodError::invalid(
            "snapshot set and problem disagree on the boundary condition",
        ));
    }
    set.check_consistent()?;
    let cubic = problem.cubic;
    let n = set.len();
    let steps = set.time_grid.n();
    let scaled: Vec<Vec<f64>> = set
        .entries
        .iter()
        .map(|e| {
            let s = e.weight.sqrt();
            e.coeffs.iter().map(|c| s * c).collect()
        })
        .collect();
    let mut source = vec![vec![0.0; n]; steps];
    let mut anchor = vec![vec![0.0; n]; steps];
    let mut derivative = Vec::with_capacity(steps);
    for j in 0..steps {
        let yj = &set.entries[j].coeffs;
        let mut load = cubic_load(grid, &set.boundary, yj, GAUSS_4);
        for v in &mut load {
            *v *= cubic;
        }
        let weighted = state_squared_mass(grid, &set.boundary, yj, GAUSS_4);
        let anchor_image = weighted.matvec(yj);
        let mut deriv = Array2::zeros((n, n));
        for nu in 0..n {
            let w_snu = weighted.matvec(&scaled[nu]);
            for mu in 0..n {
                deriv[[nu, mu]] =
                    3.0 * cubic * scaled[mu].iter().zip(&w_snu).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        for k in 0..n {
            let sk = &scaled[k];
            source[j][k] = load.iter().zip(sk).map(|(a, b)| a * b).sum();
            anchor[j][k] =
                3.0 * cubic * anchor_image.iter().zip(sk).map(|(a, b)| a * b).sum::<f64>();
        }
        derivative.push(deriv);
    }
    Ok(LinearizationTables {
        source,
        anchor,
        derivative,
    })
}
