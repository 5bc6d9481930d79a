//! Ready-made model problems used by the experiment presets and the test
//! suite. Each constructor fixes coefficients, forcing, and initial data;
//! discretization parameters stay free.

use crate::error::Result;
use crate::mesh::{
    BoundaryCondition, ModelProblem, ProblemKind, RobinData, SpaceTimeFunction, SpatialFunction,
};

/// Linear heat equation on (0, 2) over [0, 3] with polynomial forcing
/// `f(t, x) = t³ - x²` and the step initial profile `χ_(0.5,1) - χ_(1,1.5)`.
/// Its snapshot spectrum decays fast, which makes it the baseline of the
/// error-decay studies.
pub fn heat_polynomial_forcing() -> ModelProblem {
    ModelProblem::new(
        ProblemKind::LinearHeat,
        1.0,
        0.0,
        0.0,
        0.0,
        SpaceTimeFunction::new(|t, x| t * t * t - x * x),
        step_initial(),
        BoundaryCondition::Dirichlet,
        (0.0, 2.0),
        3.0,
    )
    .expect("catalog problem is valid")
}

/// Convection-reaction-diffusion variant on the same domain: small
/// diffusivity, unit advection, slightly negative reaction, and a forcing
/// `clamp(1/(1-t), ±cap) · cos(πx)` that spikes near t = 1. The transported
/// near-singular profile makes the snapshot spectrum decay much slower than
/// the heat baseline.
pub fn convection_capped_forcing(cap: f64) -> ModelProblem {
    ModelProblem::new(
        ProblemKind::ConvectionReactionDiffusion,
        0.025,
        1.0,
        -0.001,
        0.0,
        SpaceTimeFunction::new(move |t, x| {
            let raw = 1.0 / (1.0 - t);
            raw.clamp(-cap, cap) * (std::f64::consts::PI * x).cos()
        }),
        step_initial(),
        BoundaryCondition::Dirichlet,
        (0.0, 2.0),
        3.0,
    )
    .expect("catalog problem is valid")
}

/// Semilinear variant of the heat baseline with cubic reaction `c₃ y³`.
pub fn cubic_polynomial_forcing(c3: f64) -> Result<ModelProblem> {
    ModelProblem::new(
        ProblemKind::SemilinearCubic,
        1.0,
        0.0,
        0.0,
        c3,
        SpaceTimeFunction::new(|t, x| t * t * t - x * x),
        step_initial(),
        BoundaryCondition::Dirichlet,
        (0.0, 2.0),
        3.0,
    )
}

/// Unforced heat problem on (0, 1) whose initial value mixes a slow and a
/// fast Fourier mode. The fast mode dies in the first fraction of the
/// horizon, so extra snapshot locations help only if they land early — the
/// setting for the snapshot-placement studies.
pub fn sine_transient() -> ModelProblem {
    ModelProblem::new(
        ProblemKind::LinearHeat,
        0.1,
        0.0,
        0.0,
        0.0,
        SpaceTimeFunction::zero(),
        SpatialFunction::new(|x| {
            let pi = std::f64::consts::PI;
            (pi * x).sin() + 2.0 * (5.0 * pi * x).sin()
        }),
        BoundaryCondition::Dirichlet,
        (0.0, 1.0),
        1.0,
    )
    .expect("catalog problem is valid")
}

/// Single slow-mode heat problem near equilibrium; used as the flat-dynamics
/// control case where snapshot placement should not matter.
pub fn sine_equilibrium() -> ModelProblem {
    ModelProblem::new(
        ProblemKind::LinearHeat,
        0.01,
        0.0,
        0.0,
        0.0,
        SpaceTimeFunction::zero(),
        SpatialFunction::new(|x| (std::f64::consts::PI * x).sin()),
        BoundaryCondition::Dirichlet,
        (0.0, 1.0),
        1.0,
    )
    .expect("catalog problem is valid")
}

/// Heat problem with Robin boundary data on both ends, exercising the
/// boundary corrections to operator and load.
pub fn robin_heat() -> ModelProblem {
    ModelProblem::new(
        ProblemKind::LinearHeat,
        1.0,
        0.0,
        0.0,
        0.0,
        SpaceTimeFunction::new(|t, x| (1.0 + t) * (1.0 - x)),
        SpatialFunction::new(|x| x * (2.0 - x)),
        BoundaryCondition::Robin {
            left: RobinData { q: 1.0, g: 0.5 },
            right: RobinData { q: 2.0, g: -0.25 },
        },
        (0.0, 2.0),
        1.0,
    )
    .expect("catalog problem is valid")
}

/// Step profile `χ_(0.5,1) - χ_(1,1.5)` with its jumps declared as quadrature
/// breakpoints.
pub fn step_initial() -> SpatialFunction {
    SpatialFunction::with_breakpoints(
        |x| {
            if x > 0.5 && x < 1.0 {
                1.0
            } else if x > 1.0 && x < 1.5 {
                -1.0
            } else {
                0.0
            }
        },
        vec![0.5, 1.0, 1.5],
    )
    .expect("breakpoints are sorted")
}
