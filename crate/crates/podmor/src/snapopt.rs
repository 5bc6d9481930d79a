//! Placement of additional snapshot instants.
//!
//! Extra snapshots at instants τ ∈ [0,T]^k enrich the data the basis is
//! computed from. The quality of a placement is the squared weighted
//! trajectory error of the resulting reduced model against the full-order
//! reference, discretizing the continuous error integral on a fixed
//! refinement of the base grid: the refined quadrature sees the instants
//! between base snapshots, which is exactly where extra snapshots can make a
//! difference. A derivative-free search minimizes it over the box [0,T]^k;
//! a quasi-Newton mode on difference quotients is available for comparison.

use std::sync::Arc;

use crate::error::{PodError, Result};
use crate::linalg::TriDiag;
use crate::mesh::{Grid1D, ModelProblem};
use crate::pod::{compute_pod_basis, weight_matrix, InnerProduct, PodMethod};
use crate::rom::{assemble_rom, rom_step_sequence, CubicTreatment, LoadMode};
use crate::snapshots::{state_solve, SnapshotSet};
use crate::timegrid::TimeGrid;

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX: usize = 25;

/// Substeps per base step in the error-measuring quadrature. The objective
/// approximates an integral over all of [0,T]; measuring only at the base
/// instants would make the base data optimal by construction.
pub const EVAL_REFINEMENT: usize = 8;

/// A set of extra snapshot instants merged into a base time grid.
///
/// The merged weights are the trapezoid weights of the sorted union of the
/// base instants and τ with exact duplicates collapsed, so they are positive
/// and sum to the horizon. An instant appearing more than once contributes
/// its state that many times to the snapshot data, which simply scales its
/// effective weight.
#[derive(Clone, Debug)]
pub struct SnapshotPlacement {
    pub tau: Vec<f64>,
    pub base_grid: TimeGrid,
    pub merged_weights: Vec<f64>,
    union_instants: Vec<f64>,
    multiplicities: Vec<usize>,
}

impl SnapshotPlacement {
    pub fn new(tau: Vec<f64>, base_grid: TimeGrid) -> Result<Self> {
        let horizon = base_grid.horizon();
        for &t in &tau {
            if !t.is_finite() || t < 0.0 || t > horizon {
                return Err(PodError::invalid(format!(
                    "placement instant {t} lies outside [0, {horizon}]"
                )));
            }
        }
        let mut pool: Vec<f64> = base_grid.instants().to_vec();
        pool.extend_from_slice(&tau);
        pool.sort_by(|a, b| a.total_cmp(b));
        let mut union_instants = Vec::with_capacity(pool.len());
        let mut multiplicities = Vec::with_capacity(pool.len());
        for t in pool {
            match union_instants.last() {
                Some(&last) if last == t => *multiplicities.last_mut().unwrap() += 1,
                _ => {
                    union_instants.push(t);
                    multiplicities.push(1);
                }
            }
        }
        let merged_weights = TimeGrid::from_instants(union_instants.clone())?
            .weights()
            .to_vec();
        Ok(SnapshotPlacement {
            tau,
            base_grid,
            merged_weights,
            union_instants,
            multiplicities,
        })
    }

    /// Sorted distinct union of the base instants and τ.
    pub fn merged_instants(&self) -> &[f64] {
        &self.union_instants
    }

    /// Appearance count per merged instant; above one only where τ repeats
    /// a base instant or itself.
    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }
}

/// One objective evaluation in an optimization trace.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub index: usize,
    pub tau: Vec<f64>,
    pub value: f64,
}

/// Result of a placement search: the best placement found, its objective
/// value, every evaluation in order, and whether the search converged
/// before exhausting its evaluation budget.
#[derive(Clone, Debug)]
pub struct OptimizationOutcome {
    pub placement: SnapshotPlacement,
    pub objective: f64,
    pub trace: Vec<Evaluation>,
    pub converged: bool,
}

/// Squared weighted trajectory error of the reduced model built from the
/// placement's merged snapshot data. Reduced and full-order trajectories are
/// both computed on the [`EVAL_REFINEMENT`]-fold refinement of the base grid
/// and compared in the chosen norm under the refined trapezoid weights. The
/// placement enters only through the basis; the error quadrature is fixed,
/// so values are comparable across τ.
pub fn objective(
    placement: &SnapshotPlacement,
    grid: &Arc<Grid1D>,
    problem: &ModelProblem,
    space: InnerProduct,
    ell: usize,
) -> Result<f64> {
    let evaluator = ObjectiveEvaluator::new(grid, problem, space, ell, &placement.base_grid)?;
    evaluator.eval_placement(placement)
}

/// Shared state for repeated objective evaluations: the fine reference
/// trajectory and the measuring weight are independent of τ and solved once.
struct ObjectiveEvaluator<'a> {
    grid: &'a Arc<Grid1D>,
    problem: &'a ModelProblem,
    space: InnerProduct,
    ell: usize,
    base_grid: &'a TimeGrid,
    eval_grid: TimeGrid,
    reference: SnapshotSet,
    weight: TriDiag,
    treatment: CubicTreatment,
}

impl<'a> ObjectiveEvaluator<'a> {
    fn new(
        grid: &'a Arc<Grid1D>,
        problem: &'a ModelProblem,
        space: InnerProduct,
        ell: usize,
        base_grid: &'a TimeGrid,
    ) -> Result<Self> {
        if ell == 0 {
            return Err(PodError::invalid("the reduced model needs at least one mode"));
        }
        let eval_grid = base_grid.refine(EVAL_REFINEMENT)?;
        let reference = state_solve(grid, problem, &eval_grid, NEWTON_TOL, NEWTON_MAX)?;
        let weight = weight_matrix(grid, &problem.boundary, space)?;
        let treatment = if problem.is_nonlinear() {
            CubicTreatment::Galerkin
        } else {
            CubicTreatment::Omit
        };
        Ok(ObjectiveEvaluator {
            grid,
            problem,
            space,
            ell,
            base_grid,
            eval_grid,
            reference,
            weight,
            treatment,
        })
    }

    fn eval_tau(&self, tau: &[f64]) -> Result<f64> {
        let placement = SnapshotPlacement::new(tau.to_vec(), self.base_grid.clone())?;
        self.eval_placement(&placement)
    }

    fn eval_placement(&self, placement: &SnapshotPlacement) -> Result<f64> {
        let union_grid = TimeGrid::from_instants(placement.merged_instants().to_vec())?;
        let mut merged = state_solve(self.grid, self.problem, &union_grid, NEWTON_TOL, NEWTON_MAX)?;
        merged.inner_product = self.space;
        for (entry, &mult) in merged.entries.iter_mut().zip(placement.multiplicities()) {
            if mult > 1 {
                entry.weight *= mult as f64;
            }
        }
        let basis = compute_pod_basis(&merged, PodMethod::Svd, Some(self.ell))?;
        let rom = assemble_rom(
            &basis,
            self.problem,
            &self.eval_grid,
            LoadMode::Endpoint,
            self.treatment,
            None,
        )?;
        let traj = rom_step_sequence(&rom, NEWTON_TOL, NEWTON_MAX)?;
        let mut sum = 0.0;
        for (coeffs, entry) in traj.eta.iter().zip(self.reference.trajectory()) {
            let lifted = basis.reconstruct(coeffs);
            let diff: Vec<f64> = lifted
                .iter()
                .zip(&entry.coeffs)
                .map(|(a, b)| a - b)
                .collect();
            sum += entry.weight * self.weight.quadratic_form(&diff, &diff);
        }
        Ok(sum.max(0.0))
    }
}

/// Restart starting points after the caller's: a Halton sequence over the
/// box, so the search escapes local basins deterministically. The ladder is
/// deliberately long because placement objectives routinely pair narrow
/// basins with exactly flat plateaus; a collapsed plateau round costs only a
/// simplex worth of evaluations, so breadth is cheap.
const RESTART_STARTS: usize = 40;

/// Search strategy for [`optimize_placement_with`].
///
/// The default Nelder–Mead multistart is the robust choice on placement
/// landscapes. The quasi-Newton mode descends on central-difference
/// gradients from the single given start; it refines a smooth basin in far
/// fewer evaluations but stops dead on the flat plateaus these objectives
/// routinely contain, which is exactly the contrast it exists to show.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlacementSearch {
    NelderMead,
    FdBfgs,
}

/// Derivative-free minimization of the placement objective over [0,T]^k.
///
/// Nelder–Mead with every candidate clamped to the box. When a simplex
/// collapses, the search restarts from the next point of a Halton sequence
/// over the box; the placement objective is routinely multimodal (a narrow
/// transient basin behind a flat plateau), so collapse means a local basin
/// is exhausted, not that the search is done. The run is fully deterministic
/// in `tau0`. The budget caps objective evaluations; `converged` is set only
/// when every round collapsed before the budget ran out.
pub fn optimize_placement(
    tau0: &[f64],
    grid: &Arc<Grid1D>,
    problem: &ModelProblem,
    space: InnerProduct,
    ell: usize,
    budget: usize,
    base_grid: &TimeGrid,
) -> Result<OptimizationOutcome> {
    optimize_placement_with(
        tau0,
        grid,
        problem,
        space,
        ell,
        budget,
        base_grid,
        PlacementSearch::NelderMead,
    )
}

/// [`optimize_placement`] with an explicit choice of search strategy.
#[allow(clippy::too_many_arguments)]
pub fn optimize_placement_with(
    tau0: &[f64],
    grid: &Arc<Grid1D>,
    problem: &ModelProblem,
    space: InnerProduct,
    ell: usize,
    budget: usize,
    base_grid: &TimeGrid,
    search: PlacementSearch,
) -> Result<OptimizationOutcome> {
    let k = tau0.len();
    if k == 0 {
        return Err(PodError::invalid("at least one placement instant is required"));
    }
    if budget < k + 1 {
        return Err(PodError::invalid(format!(
            "budget {budget} cannot even evaluate the initial simplex of {} points",
            k + 1
        )));
    }
    let horizon = base_grid.horizon();
    for &t in tau0 {
        if !t.is_finite() || t < 0.0 || t > horizon {
            return Err(PodError::invalid(format!(
                "starting instant {t} lies outside [0, {horizon}]"
            )));
        }
    }

    let evaluator = ObjectiveEvaluator::new(grid, problem, space, ell, base_grid)?;
    let mut trace: Vec<Evaluation> = Vec::new();
    let converged = match search {
        PlacementSearch::NelderMead => {
            let mut all_rounds_collapsed = true;
            for round in 0..=RESTART_STARTS {
                if trace.len() + k + 1 > budget {
                    all_rounds_collapsed = false;
                    break;
                }
                let start = if round == 0 {
                    tau0.to_vec()
                } else {
                    (0..k)
                        .map(|d| halton(round, prime(d)) * horizon)
                        .collect()
                };
                let done = nelder_mead_round(&evaluator, &start, horizon, budget, &mut trace)?;
                if !done {
                    all_rounds_collapsed = false;
                    break;
                }
            }
            all_rounds_collapsed
        }
        PlacementSearch::FdBfgs => bfgs_descent(&evaluator, tau0, horizon, budget, &mut trace)?,
    };

    let best = trace
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("the search evaluated its starting point");
    let placement = SnapshotPlacement::new(best.tau.clone(), base_grid.clone())?;
    Ok(OptimizationOutcome {
        placement,
        objective: best.value,
        trace,
        converged,
    })
}

/// Radical-inverse of `index` in the given base, the Halton coordinate.
fn halton(index: usize, base: usize) -> f64 {
    let mut value = 0.0;
    let mut denom = 1.0;
    let mut i = index;
    while i > 0 {
        denom *= base as f64;
        value += (i % base) as f64 / denom;
        i /= base;
    }
    value
}

fn prime(dim: usize) -> usize {
    const SMALL: [usize; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];
    if dim < SMALL.len() {
        return SMALL[dim];
    }
    let mut candidate = SMALL[SMALL.len() - 1] + 2;
    let mut found = SMALL.len() - 1;
    loop {
        if (2..candidate).take_while(|d| d * d <= candidate).all(|d| candidate % d != 0) {
            found += 1;
            if found == dim {
                return candidate;
            }
        }
        candidate += 2;
    }
}

/// One Nelder–Mead descent from `start` until the simplex collapses or the
/// shared budget runs out. Returns whether the round finished by collapse.
fn nelder_mead_round(
    evaluator: &ObjectiveEvaluator<'_>,
    start: &[f64],
    horizon: f64,
    budget: usize,
    trace: &mut Vec<Evaluation>,
) -> Result<bool> {
    let k = start.len();
    let eval = |tau: &[f64], trace: &mut Vec<Evaluation>| -> Result<f64> {
        let value = evaluator.eval_tau(tau)?;
        trace.push(Evaluation {
            index: trace.len(),
            tau: tau.to_vec(),
            value,
        });
        Ok(value)
    };
    let clamp = |tau: &mut Vec<f64>| {
        for t in tau.iter_mut() {
            *t = t.clamp(0.0, horizon);
        }
    };

    // Initial simplex: the start plus one nudge per coordinate, flipped
    // inward when the nudge would leave the box.
    let spread = 0.05 * horizon;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    let v = eval(start, trace)?;
    simplex.push((start.to_vec(), v));
    for i in 0..k {
        let mut vertex = start.to_vec();
        vertex[i] = if vertex[i] + spread <= horizon {
            vertex[i] + spread
        } else {
            vertex[i] - spread
        };
        clamp(&mut vertex);
        let v = eval(&vertex, trace)?;
        simplex.push((vertex, v));
    }

    while trace.len() < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex
            .iter()
            .skip(1)
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        let f_spread = simplex[k].1 - simplex[0].1;
        if diameter <= 1e-7 * horizon || f_spread <= 1e-12 * (1.0 + simplex[0].1.abs()) {
            return Ok(true);
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0f64; k];
        for (x, _) in simplex.iter().take(k) {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / k as f64;
            }
        }
        let worst = simplex[k].clone();
        let second_worst = simplex[k - 1].1;

        let mut reflected: Vec<f64> = centroid
            .iter()
            .zip(&worst.0)
            .map(|(c, w)| c + (c - w))
            .collect();
        clamp(&mut reflected);
        if trace.len() >= budget {
            break;
        }
        let fr = eval(&reflected, trace)?;

        if fr < simplex[0].1 {
            // Try to expand past the reflection.
            let mut expanded: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + 2.0 * (c - w))
                .collect();
            clamp(&mut expanded);
            if trace.len() < budget {
                let fe = eval(&expanded, trace)?;
                simplex[k] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            } else {
                simplex[k] = (reflected, fr);
            }
            continue;
        }
        if fr < second_worst {
            simplex[k] = (reflected, fr);
            continue;
        }

        // Contract toward the better of the worst vertex and its reflection.
        let (anchor, f_anchor) = if fr < worst.1 {
            (&reflected, fr)
        } else {
            (&worst.0, worst.1)
        };
        let mut contracted: Vec<f64> = centroid
            .iter()
            .zip(anchor)
            .map(|(c, a)| c + 0.5 * (a - c))
            .collect();
        clamp(&mut contracted);
        if trace.len() >= budget {
            break;
        }
        let fc = eval(&contracted, trace)?;
        if fc < f_anchor {
            simplex[k] = (contracted, fc);
            continue;
        }

        // Shrink everything toward the best vertex.
        let best = simplex[0].0.clone();
        for idx in 1..=k {
            if trace.len() >= budget {
                break;
            }
            let mut vertex: Vec<f64> = simplex[idx]
                .0
                .iter()
                .zip(&best)
                .map(|(x, b)| b + 0.5 * (x - b))
                .collect();
            clamp(&mut vertex);
            let v = eval(&vertex, trace)?;
            simplex[idx] = (vertex, v);
        }
    }
    Ok(false)
}

/// Relative step for the central differences feeding the quasi-Newton mode.
const FD_STEP: f64 = 1e-5;

/// One projected BFGS descent on finite-difference gradients. Returns true
/// when it stops at a stationary point (which on these landscapes includes
/// any flat plateau), false when the budget ran out first.
fn bfgs_descent(
    evaluator: &ObjectiveEvaluator<'_>,
    start: &[f64],
    horizon: f64,
    budget: usize,
    trace: &mut Vec<Evaluation>,
) -> Result<bool> {
    let k = start.len();
    let eval = |tau: &[f64], trace: &mut Vec<Evaluation>| -> Result<f64> {
        let value = evaluator.eval_tau(tau)?;
        trace.push(Evaluation {
            index: trace.len(),
            tau: tau.to_vec(),
            value,
        });
        Ok(value)
    };
    let clamp = |tau: &mut Vec<f64>| {
        for t in tau.iter_mut() {
            *t = t.clamp(0.0, horizon);
        }
    };

    // Difference quotients, one-sided against a box face.
    let h = FD_STEP * horizon;
    let gradient = |x: &[f64], trace: &mut Vec<Evaluation>| -> Result<Option<Vec<f64>>> {
        let mut g = vec![0.0f64; k];
        for (i, gi) in g.iter_mut().enumerate() {
            if trace.len() + 2 > budget {
                return Ok(None);
            }
            let up = (x[i] + h).min(horizon);
            let down = (x[i] - h).max(0.0);
            let mut probe = x.to_vec();
            probe[i] = up;
            let fu = eval(&probe, trace)?;
            probe[i] = down;
            let fd = eval(&probe, trace)?;
            *gi = (fu - fd) / (up - down);
        }
        Ok(Some(g))
    };

    let mut x = start.to_vec();
    clamp(&mut x);
    let mut f = eval(&x, trace)?;
    // Inverse Hessian estimate, row-major.
    let mut hess_inv: Vec<f64> = (0..k * k)
        .map(|idx| if idx % (k + 1) == 0 { 1.0 } else { 0.0 })
        .collect();
    let mut grad = match gradient(&x, trace)? {
        Some(g) => g,
        None => return Ok(false),
    };

    loop {
        let g_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if g_norm <= 1e-9 {
            return Ok(true);
        }

        let mut dir: Vec<f64> = (0..k)
            .map(|i| -(0..k).map(|j| hess_inv[i * k + j] * grad[j]).sum::<f64>())
            .collect();
        let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if slope >= 0.0 {
            // The estimate lost positive definiteness; fall back to steepest
            // descent and start rebuilding it.
            hess_inv.iter_mut().enumerate().for_each(|(idx, v)| {
                *v = if idx % (k + 1) == 0 { 1.0 } else { 0.0 };
            });
            for (d, g) in dir.iter_mut().zip(&grad) {
                *d = -g;
            }
        }
        let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();

        // Backtracking Armijo search, with the first trial capped so a badly
        // scaled direction cannot jump across the whole box.
        let d_norm = dir.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let mut alpha = (0.2 * horizon / d_norm).min(1.0);
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        for _ in 0..30 {
            if trace.len() >= budget {
                return Ok(false);
            }
            let mut candidate: Vec<f64> =
                x.iter().zip(&dir).map(|(xi, di)| xi + alpha * di).collect();
            clamp(&mut candidate);
            let fc = eval(&candidate, trace)?;
            if fc <= f + 1e-4 * alpha * slope {
                accepted = Some((candidate, fc));
                break;
            }
            alpha *= 0.5;
        }
        let (x_new, f_new) = match accepted {
            Some(pair) => pair,
            // No decrease at any trial step: stationary to this resolution.
            None => return Ok(true),
        };

        let step: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let step_norm = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if step_norm <= 1e-9 * horizon {
            return Ok(true);
        }
        let grad_new = match gradient(&x_new, trace)? {
            Some(g) => g,
            None => return Ok(false),
        };

        // BFGS update of the inverse estimate, skipped when the curvature
        // pairing is too weak to be trustworthy.
        let y: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = step.iter().zip(&y).map(|(s, y)| s * y).sum();
        let y_norm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sy > 1e-12 * step_norm * y_norm {
            let rho = 1.0 / sy;
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let mut hy = vec![0.0f64; k];
            for i in 0..k {
                hy[i] = (0..k).map(|j| hess_inv[i * k + j] * y[j]).sum();
            }
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..k {
                for j in 0..k {
                    hess_inv[i * k + j] += -rho * (step[i] * hy[j] + hy[i] * step[j])
                        + rho * rho * yhy * step[i] * step[j]
                        + rho * step[i] * step[j];
                }
            }
        }

        x = x_new;
        f = f_new;
        grad = grad_new;
    }
}
