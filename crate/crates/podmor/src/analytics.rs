//! Error curves, spectrum tables, and report files for reduction studies.
//!
//! The two headline diagnostics are the projection error (distance of the
//! snapshots to the span of the first modes) and the reduced-order error
//! (distance of the reduced trajectory to the snapshots), both in the
//! discrete, trapezoid-weighted L² norm in time. The projection curve obeys
//! the truncated-spectrum identity and lower-bounds the reduced-order curve;
//! both facts are validated when a report is assembled.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{PodError, Result};
use crate::linalg::TriDiag;
use crate::mesh::ModelProblem;
use crate::pod::{compute_pod_basis, weight_matrix, InnerProduct, PodBasis, PodMethod};
use crate::rom::{assemble_rom, rom_step_sequence, CubicTreatment, LoadMode, RomTrajectory};
use crate::snapshots::SnapshotSet;

/// Wall-clock phase durations in seconds; the speedup compares the full
/// solve against the reduced one.
#[derive(Clone, Copy, Debug)]
pub struct Timings {
    pub fe_seconds: f64,
    pub pod_seconds: f64,
    pub rom_seconds: f64,
}

impl Timings {
    pub fn speedup(&self) -> f64 {
        if self.rom_seconds > 0.0 {
            self.fe_seconds / self.rom_seconds
        } else {
            f64::INFINITY
        }
    }
}

/// How the reduced trajectories behind an error curve are produced.
#[derive(Clone, Copy, Debug)]
pub struct RomRunOptions {
    pub method: PodMethod,
    pub treatment: CubicTreatment,
    pub load_mode: LoadMode,
    pub newton_tol: f64,
    pub newton_max: usize,
}

impl Default for RomRunOptions {
    fn default() -> Self {
        RomRunOptions {
            method: PodMethod::Svd,
            treatment: CubicTreatment::Omit,
            // Endpoint loads mirror the snapshot stepping, so reduced and
            // full trajectories see identical data and the error measures
            // the reduction alone.
            load_mode: LoadMode::Endpoint,
            newton_tol: 1e-10,
            newton_max: 25,
        }
    }
}

/// Projection error for every mode count from zero through `ell_max`.
///
/// Entry `ell` is `sqrt(Σ_j α_j |y_j - P_ell y_j|²_X)` over every weighted
/// entry of the set, difference-quotient ensembles included; that is the sum
/// the truncated-spectrum identity refers to. Residuals are formed explicitly
/// in state space rather than through the norm identity, which keeps the
/// values accurate relative to themselves even many decades below the total.
pub fn proj_error_curve(set: &SnapshotSet, basis: &PodBasis, ell_max: usize) -> Result<Vec<f64>> {
    if ell_max > basis.rank() {
        return Err(PodError::invalid(format!(
            "curve up to {ell_max} modes exceeds the basis rank {}",
            basis.rank()
        )));
    }
    let grid = set
        .common_grid()
        .ok_or_else(|| PodError::Unsupported("projection curve requires a single grid".into()))?;
    if grid.nodes() != basis.grid.nodes() || set.boundary != basis.boundary {
        return Err(PodError::invalid(
            "snapshot set and basis live on different discretizations",
        ));
    }
    let mut sums = vec![0.0f64; ell_max + 1];
    for entry in &set.entries {
        let coeffs = basis.project(ell_max, &entry.coeffs);
        let mut residual = entry.coeffs.clone();
        sums[0] += entry.weight * basis.weight.quadratic_form(&residual, &residual);
        for ell in 1..=ell_max {
            let c = coeffs[ell - 1];
            for (r, m) in residual.iter_mut().zip(basis.modes.column(ell - 1)) {
                *r -= c * m;
            }
            sums[ell] += entry.weight * basis.weight.quadratic_form(&residual, &residual);
        }
    }
    Ok(sums.into_iter().map(|s| s.max(0.0).sqrt()).collect())
}

/// Projection error curve measured in a norm other than the one the basis
/// projects with, e.g. energy-norm residuals of an L²-optimal basis. The
/// projector is still the basis's own; only the residual norm changes.
pub fn proj_error_curve_in_norm(
    set: &SnapshotSet,
    basis: &PodBasis,
    norm_weight: &TriDiag,
    ell_max: usize,
) -> Result<Vec<f64>> {
    if ell_max > basis.rank() {
        return Err(PodError::invalid(format!(
            "curve up to {ell_max} modes exceeds the basis rank {}",
            basis.rank()
        )));
    }
    if norm_weight.n() != basis.modes.nrows() {
        return Err(PodError::invalid(
            "norm weight does not match the basis dimension",
        ));
    }
    let mut sums = vec![0.0f64; ell_max + 1];
    for entry in &set.entries {
        let coeffs = basis.project(ell_max, &entry.coeffs);
        let mut residual = entry.coeffs.clone();
        sums[0] += entry.weight * norm_weight.quadratic_form(&residual, &residual);
        for ell in 1..=ell_max {
            let c = coeffs[ell - 1];
            for (r, m) in residual.iter_mut().zip(basis.modes.column(ell - 1)) {
                *r -= c * m;
            }
            sums[ell] += entry.weight * norm_weight.quadratic_form(&residual, &residual);
        }
    }
    Ok(sums.into_iter().map(|s| s.max(0.0).sqrt()).collect())
}

/// Reduced-order error against the stored snapshots for each mode count in
/// `ell_list`, in the discrete L²(0,T;X) norm with X chosen by `space`.
///
/// The basis is computed once at the largest requested count and truncated
/// for the smaller ones. A count of zero means the empty model whose lifted
/// trajectory is identically zero, so its error is the trajectory norm.
/// Failures of an individual reduced solve are reported with the mode count
/// at which they occurred.
pub fn rom_error_curve(
    set: &SnapshotSet,
    problem: &ModelProblem,
    space: InnerProduct,
    ell_list: &[usize],
    options: &RomRunOptions,
) -> Result<Vec<f64>> {
    if ell_list.is_empty() {
        return Ok(Vec::new());
    }
    let working = resolve_space(set, space);
    let working = working.as_ref();
    let ell_max = *ell_list.iter().max().unwrap();
    let basis = if ell_max == 0 {
        None
    } else {
        Some(compute_pod_basis(working, options.method, Some(ell_max))?)
    };
    let grid = working
        .common_grid()
        .ok_or_else(|| PodError::Unsupported("reduced runs require a single grid".into()))?;
    let weight = match &basis {
        Some(b) => b.weight.clone(),
        None => weight_matrix(grid, &working.boundary, space)?,
    };
    let mut errors = Vec::with_capacity(ell_list.len());
    for &ell in ell_list {
        if ell == 0 {
            errors.push(trajectory_norm(working, &weight));
            continue;
        }
        let truncated = basis.as_ref().unwrap().truncated(ell)?;
        let traj = run_reduced(&truncated, problem, working, options)
            .map_err(|e| e.with_context(&format!("reduced solve with {ell} modes")))?;
        errors.push(trajectory_error(&truncated, &traj, working, &weight));
    }
    Ok(errors)
}

/// Reduced-order error against a reference trajectory computed on a finer
/// time grid and interpolated to the snapshot instants. The curves plateau
/// at the full-order time discretization error instead of decaying to zero.
pub fn reference_error_curve(
    set: &SnapshotSet,
    reference: &SnapshotSet,
    problem: &ModelProblem,
    basis: &PodBasis,
    ell_list: &[usize],
    options: &RomRunOptions,
) -> Result<Vec<f64>> {
    if ell_list.is_empty() {
        return Ok(Vec::new());
    }
    let grid = set
        .common_grid()
        .ok_or_else(|| PodError::Unsupported("reference curves require a single grid".into()))?;
    let ref_grid = reference
        .common_grid()
        .ok_or_else(|| PodError::Unsupported("the reference requires a single grid".into()))?;
    if grid.nodes() != ref_grid.nodes() || set.boundary != reference.boundary {
        return Err(PodError::invalid(
            "reference must share the snapshot spatial discretization",
        ));
    }
    if grid.nodes() != basis.grid.nodes() {
        return Err(PodError::invalid(
            "basis does not live on the snapshot grid",
        ));
    }
    let horizon = set.time_grid.horizon();
    if (reference.time_grid.horizon() - horizon).abs() > 1e-12 * horizon {
        return Err(PodError::invalid(
            "reference covers a different time horizon",
        ));
    }
    let ref_states = interpolate_in_time(reference, set.time_grid.instants());
    let alpha: Vec<f64> = set.trajectory().iter().map(|e| e.weight).collect();
    let mut errors = Vec::with_capacity(ell_list.len());
    for &ell in ell_list {
        let states: Vec<Vec<f64>> = if ell == 0 {
            vec![vec![0.0; basis.modes.nrows()]; ref_states.len()]
        } else {
            let truncated = basis.truncated(ell)?;
            let traj = run_reduced(&truncated, problem, set, options)
                .map_err(|e| e.with_context(&format!("reduced solve with {ell} modes")))?;
            traj.eta.iter().map(|c| truncated.reconstruct(c)).collect()
        };
        let mut sum = 0.0;
        for ((state, reference_state), a) in states.iter().zip(&ref_states).zip(&alpha) {
            let diff: Vec<f64> = state
                .iter()
                .zip(reference_state)
                .map(|(x, y)| x - y)
                .collect();
            sum += a * basis.weight.quadratic_form(&diff, &diff);
        }
        errors.push(sum.max(0.0).sqrt());
    }
    Ok(errors)
}

/// Use the snapshot set as-is when it already carries the requested inner
/// product, otherwise clone it with the selector overridden.
fn resolve_space(set: &SnapshotSet, space: InnerProduct) -> std::borrow::Cow<'_, SnapshotSet> {
    if set.inner_product == space {
        std::borrow::Cow::Borrowed(set)
    } else {
        let mut owned = set.clone();
        owned.inner_product = space;
        std::borrow::Cow::Owned(owned)
    }
}

fn run_reduced(
    basis: &PodBasis,
    problem: &ModelProblem,
    set: &SnapshotSet,
    options: &RomRunOptions,
) -> Result<RomTrajectory> {
    let snaps = matches!(
        options.treatment,
        CubicTreatment::Linearized | CubicTreatment::Frozen
    )
    .then_some(set);
    let rom = assemble_rom(
        basis,
        problem,
        &set.time_grid,
        options.load_mode,
        options.treatment,
        snaps,
    )?;
    rom_step_sequence(&rom, options.newton_tol, options.newton_max)
}

fn trajectory_norm(set: &SnapshotSet, weight: &TriDiag) -> f64 {
    set.trajectory()
        .iter()
        .map(|e| e.weight * weight.quadratic_form(&e.coeffs, &e.coeffs))
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

fn trajectory_error(
    basis: &PodBasis,
    traj: &RomTrajectory,
    set: &SnapshotSet,
    weight: &TriDiag,
) -> f64 {
    let mut sum = 0.0;
    for (coeffs, entry) in traj.eta.iter().zip(set.trajectory()) {
        let lifted = basis.reconstruct(coeffs);
        let diff: Vec<f64> = lifted
            .iter()
            .zip(&entry.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        sum += entry.weight * weight.quadratic_form(&diff, &diff);
    }
    sum.max(0.0).sqrt()
}

/// Piecewise linear evaluation of the reference trajectory at the requested
/// instants. Instants outside the reference range clamp to its ends.
fn interpolate_in_time(reference: &SnapshotSet, instants: &[f64]) -> Vec<Vec<f64>> {
    let fine = reference.time_grid.instants();
    let states = reference.trajectory();
    instants
        .iter()
        .map(|&t| {
            let k = match fine.binary_search_by(|probe| probe.total_cmp(&t)) {
                Ok(exact) => return states[exact].coeffs.clone(),
                Err(0) => return states[0].coeffs.clone(),
                Err(after) if after >= fine.len() => return states.last().unwrap().coeffs.clone(),
                Err(after) => after,
            };
            let (t0, t1) = (fine[k - 1], fine[k]);
            let theta = (t - t0) / (t1 - t0);
            states[k - 1]
                .coeffs
                .iter()
                .zip(&states[k].coeffs)
                .map(|(a, b)| (1.0 - theta) * a + theta * b)
                .collect()
        })
        .collect()
}

/// What the per-count error column was measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RomErrorKind {
    /// Distance to the stored snapshots, the quantity the Galerkin lower
    /// bound applies to.
    VsSnapshots,
    /// Distance to a finer-time-grid reference; plateaus at the full-order
    /// accuracy and may legitimately cross the projection curve.
    VsReference,
}

/// Diagnostic bundle for one reduction study: errors per mode count, the
/// spectrum with its energy fractions, the norm the curves were measured in,
/// and phase timings.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub ell_list: Vec<usize>,
    pub proj_error: Vec<f64>,
    pub rom_error: Vec<f64>,
    pub rom_error_kind: RomErrorKind,
    /// Optional extra residual column in another norm (selector, values),
    /// reported without an acceptance level attached.
    pub alt_norm_proj: Option<(InnerProduct, Vec<f64>)>,
    pub eigenvalues: Vec<f64>,
    pub singular_values: Vec<f64>,
    pub energy: Vec<f64>,
    pub total_energy: f64,
    /// Ensemble count of the underlying snapshot set. The projection column
    /// always sums over every ensemble (that is what the spectrum identity
    /// covers), while the reduced-order column covers the trajectory, so the
    /// lower bound is only asserted for single-ensemble data.
    pub ensembles: usize,
    pub norms_used: InnerProduct,
    pub timings: Timings,
}

impl ErrorReport {
    /// Assemble a report for `set` and its basis: the projection curve is
    /// computed here, the reduced-order column is supplied by the caller and
    /// aligned with `ell_list`. The spectrum identity and, where applicable,
    /// the Galerkin lower bound are checked before the report is handed out.
    pub fn new(
        set: &SnapshotSet,
        basis: &PodBasis,
        ell_list: Vec<usize>,
        rom_error: Vec<f64>,
        rom_error_kind: RomErrorKind,
        timings: Timings,
    ) -> Result<Self> {
        if rom_error.len() != ell_list.len() {
            return Err(PodError::invalid(
                "per-count error arrays must align with the mode counts",
            ));
        }
        let ell_max = ell_list.iter().copied().max().unwrap_or(0);
        let proj_curve = proj_error_curve(set, basis, ell_max)?;
        let proj_error: Vec<f64> = ell_list.iter().map(|&ell| proj_curve[ell]).collect();
        let eigenvalues = basis.eigenvalues.clone();
        let singular_values: Vec<f64> = eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
        let energy: Vec<f64> = (1..=basis.rank()).map(|i| basis.energy_fraction(i)).collect();
        let report = ErrorReport {
            ell_list,
            proj_error,
            rom_error,
            rom_error_kind,
            alt_norm_proj: None,
            eigenvalues,
            singular_values,
            energy,
            total_energy: basis.total_energy,
            ensembles: set.ensembles,
            norms_used: basis.inner_product,
            timings,
        };
        report.validate()?;
        Ok(report)
    }

    /// Check the embedded invariants: the projection error squares match the
    /// discarded spectrum sums, and the snapshot-relative reduced-order error
    /// never drops below the projection error on single-ensemble data. Both
    /// checks carry a roundoff floor tied to the total energy, since many
    /// decades below it the identities are only meaningful up to cancellation
    /// noise.
    pub fn validate(&self) -> Result<()> {
        let total = self.total_energy;
        let floor = 1e-10 * total.max(f64::MIN_POSITIVE);
        let bound_applies =
            self.rom_error_kind == RomErrorKind::VsSnapshots && self.ensembles == 1;
        for (k, &ell) in self.ell_list.iter().enumerate() {
            let prefix: f64 = self.eigenvalues.iter().take(ell).sum();
            let tail = (total - prefix).max(0.0);
            let square = self.proj_error[k] * self.proj_error[k];
            if (square - tail).abs() > 1e-8 * tail.max(square) + floor {
                return Err(PodError::invalid(format!(
                    "projection error at {ell} modes breaks the spectrum identity: \
                     {square:.6e} vs discarded sum {tail:.6e}"
                )));
            }
            let slack = 1e-10 * (1.0 + total.sqrt());
            if bound_applies && self.rom_error[k] < self.proj_error[k] - slack {
                return Err(PodError::invalid(format!(
                    "reduced-order error at {ell} modes undercuts the projection error: \
                     {:.6e} vs {:.6e}",
                    self.rom_error[k], self.proj_error[k]
                )));
            }
        }
        Ok(())
    }
}

/// Write the report as four files under `destination`: `spectrum.csv`,
/// `errors.csv`, `timings.csv`, and `summary.txt`. Rows are ordered by index
/// and numbers use the shortest exact decimal form, so identical reports
/// serialize to identical bytes. Returns the written paths.
pub fn emit_report(report: &ErrorReport, destination: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(destination).map_err(|e| PodError::io(destination, e))?;
    let mut written = Vec::with_capacity(4);

    let mut spectrum = String::from("index,eigenvalue,singular_value,energy_fraction\n");
    for i in 0..report.eigenvalues.len() {
        let _ = writeln!(
            spectrum,
            "{},{},{},{}",
            i + 1,
            report.eigenvalues[i],
            report.singular_values[i],
            report.energy[i]
        );
    }
    written.push(write_file(destination, "spectrum.csv", &spectrum)?);

    let mut errors = String::from("modes,projection_error,rom_error");
    if let Some((space, _)) = &report.alt_norm_proj {
        let _ = write!(errors, ",projection_error_{}", space.label().to_lowercase());
    }
    errors.push('\n');
    for (k, &ell) in report.ell_list.iter().enumerate() {
        let _ = write!(
            errors,
            "{},{},{}",
            ell, report.proj_error[k], report.rom_error[k]
        );
        if let Some((_, column)) = &report.alt_norm_proj {
            let _ = write!(errors, ",{}", column[k]);
        }
        errors.push('\n');
    }
    written.push(write_file(destination, "errors.csv", &errors)?);

    let timings = format!(
        "fe_seconds,pod_seconds,rom_seconds,speedup\n{},{},{},{}\n",
        report.timings.fe_seconds,
        report.timings.pod_seconds,
        report.timings.rom_seconds,
        report.timings.speedup()
    );
    written.push(write_file(destination, "timings.csv", &timings)?);

    let mut summary = String::new();
    let _ = writeln!(summary, "norm: {}", report.norms_used.label());
    let _ = writeln!(summary, "retained modes: {}", report.eigenvalues.len());
    let _ = writeln!(summary, "total energy: {}", report.total_energy);
    if let (Some(first), Some(last)) = (report.ell_list.first(), report.ell_list.last()) {
        let _ = writeln!(summary, "mode counts: {first}..{last}");
    }
    if let Some(min_rom) = report
        .rom_error
        .iter()
        .copied()
        .fold(None::<f64>, |m, v| Some(m.map_or(v, |m| m.min(v))))
    {
        let _ = writeln!(summary, "best rom error: {min_rom}");
    }
    let _ = writeln!(
        summary,
        "timings: fe {} s, pod {} s, rom {} s, speedup {}",
        report.timings.fe_seconds,
        report.timings.pod_seconds,
        report.timings.rom_seconds,
        report.timings.speedup()
    );
    written.push(write_file(destination, "summary.txt", &summary)?);

    Ok(written)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| PodError::io(&path, e))?;
    Ok(path)
}
