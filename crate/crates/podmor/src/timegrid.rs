//! Time grids and trapezoidal quadrature weights.

use crate::error::{PodError, Result};

/// Strictly increasing time instants `t_1 = 0 < … < t_n = T`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    instants: Vec<f64>,
}

impl TimeGrid {
    /// Uniform grid with `n` instants covering `[0, horizon]`.
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(PodError::invalid("horizon must be positive"));
        }
        if n < 2 {
            return Err(PodError::invalid("time grid needs at least two instants"));
        }
        let dt = horizon / (n - 1) as f64;
        let mut instants: Vec<f64> = (0..n).map(|j| j as f64 * dt).collect();
        instants[n - 1] = horizon;
        Ok(TimeGrid { instants })
    }

    /// Grid from explicit instants; must start at zero and increase strictly.
    pub fn from_instants(instants: Vec<f64>) -> Result<Self> {
        if instants.len() < 2 {
            return Err(PodError::invalid("time grid needs at least two instants"));
        }
        if instants[0] != 0.0 {
            return Err(PodError::invalid("time grid must start at t = 0"));
        }
        for w in instants.windows(2) {
            if !w[1].is_finite() || w[1] <= w[0] {
                return Err(PodError::invalid("time instants must increase strictly"));
            }
        }
        Ok(TimeGrid { instants })
    }

    pub fn instants(&self) -> &[f64] {
        &self.instants
    }

    pub fn n(&self) -> usize {
        self.instants.len()
    }

    pub fn horizon(&self) -> f64 {
        *self.instants.last().unwrap()
    }

    /// Step `t_j - t_{j-1}` preceding instant `j` (0-based, `j >= 1`).
    pub fn dt(&self, j: usize) -> f64 {
        self.instants[j] - self.instants[j - 1]
    }

    /// Trapezoidal weights: half the first step for the first instant, half
    /// the surrounding steps for interior instants, half the last step for
    /// the final one. They sum to the horizon and integrate piecewise-linear
    /// functions of time exactly.
    pub fn weights(&self) -> Vec<f64> {
        trapezoidal_weights(self)
    }

    /// Refinement splitting every step into `factor` equal substeps. The
    /// original instants are kept bitwise; `factor` one returns a copy.
    pub fn refine(&self, factor: usize) -> Result<TimeGrid> {
        if factor == 0 {
            return Err(PodError::invalid("refinement factor must be at least 1"));
        }
        let mut instants = Vec::with_capacity((self.n() - 1) * factor + 1);
        for j in 0..self.n() - 1 {
            let (a, b) = (self.instants[j], self.instants[j + 1]);
            instants.push(a);
            let h = (b - a) / factor as f64;
            for i in 1..factor {
                instants.push(a + i as f64 * h);
            }
        }
        instants.push(*self.instants.last().unwrap());
        TimeGrid::from_instants(instants)
    }
}

/// See [`TimeGrid::weights`].
pub fn trapezoidal_weights(grid: &TimeGrid) -> Vec<f64> {
    let t = grid.instants();
    let n = t.len();
    let mut w = vec![0.0; n];
    w[0] = 0.5 * (t[1] - t[0]);
    for j in 1..n - 1 {
        w[j] = 0.5 * (t[j + 1] - t[j - 1]);
    }
    w[n - 1] = 0.5 * (t[n - 1] - t[n - 2]);
    w
}
