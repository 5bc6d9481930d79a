//! Gauss-Legendre quadrature on intervals.
//!
//! The rules are used for every integral the assembly routines cannot write
//! down in closed form: load moments, initial-value moments, and pairings with
//! the cubic nonlinearity. `GAUSS_3` integrates polynomials up to degree 5
//! exactly, `GAUSS_4` up to degree 7.

/// A Gauss-Legendre rule given by nodes and weights on the reference
/// interval [-1, 1].
#[derive(Clone, Copy, Debug)]
pub struct GaussRule {
    pub nodes: &'static [f64],
    pub weights: &'static [f64],
}

/// Two-point rule, exact through degree 3.
pub const GAUSS_2: GaussRule = GaussRule {
    nodes: &[-0.577_350_269_189_625_7, 0.577_350_269_189_625_7],
    weights: &[1.0, 1.0],
};

/// Three-point rule, exact through degree 5.
pub const GAUSS_3: GaussRule = GaussRule {
    nodes: &[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
    weights: &[
        0.555_555_555_555_555_6,
        0.888_888_888_888_888_9,
        0.555_555_555_555_555_6,
    ],
};

/// Four-point rule, exact through degree 7.
pub const GAUSS_4: GaussRule = GaussRule {
    nodes: &[
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ],
    weights: &[
        0.347_854_845_137_453_85,
        0.652_145_154_862_546_2,
        0.652_145_154_862_546_2,
        0.347_854_845_137_453_85,
    ],
};

impl GaussRule {
    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Integrates `f` over `[a, b]`, splitting the interval at every interior
    /// breakpoint so that piecewise-defined integrands keep the rule's exactness
    /// on each smooth piece. `breakpoints` must be sorted ascending.
    pub fn integrate_split(
        &self,
        a: f64,
        b: f64,
        breakpoints: &[f64],
        mut f: impl FnMut(f64) -> f64,
    ) -> f64 {
        let mut acc = 0.0;
        let mut left = a;
        for &p in breakpoints {
            if p <= left {
                continue;
            }
            if p >= b {
                break;
            }
            acc += self.integrate(left, p, &mut f);
            left = p;
        }
        acc + self.integrate(left, b, &mut f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_check(rule: GaussRule, max_degree: u32) {
        for k in 0..=max_degree {
            let exact = (2.0f64.powi(k as i32 + 1) - (-1.0f64).powi(k as i32 + 1)) / (k + 1) as f64;
            let got = rule.integrate(-1.0, 2.0, |x| x.powi(k as i32));
            assert!(
                (got - exact).abs() <= 1e-12 * exact.abs().max(1.0),
                "degree {k}: got {got}, want {exact}"
            );
        }
    }

    #[test]
    fn rules_integrate_polynomials_exactly() {
        monomial_check(GAUSS_2, 3);
        monomial_check(GAUSS_3, 5);
        monomial_check(GAUSS_4, 7);
    }

    #[test]
    fn split_rule_handles_piecewise_constants_exactly() {
        // Indicator of (0.5, 1) minus indicator of (1, 1.5): only exact when the
        // interval is split at the jumps.
        let f = |x: f64| {
            if x > 0.5 && x < 1.0 {
                1.0
            } else if x > 1.0 && x < 1.5 {
                -1.0
            } else {
                0.0
            }
        };
        let val = GAUSS_3.integrate_split(0.0, 2.0, &[0.5, 1.0, 1.5], f);
        assert!((val - 0.0).abs() < 1e-15);
        let val = GAUSS_3.integrate_split(0.0, 1.2, &[0.5, 1.0, 1.5], f);
        assert!((val - (0.5 - 0.2)).abs() < 1e-15);
    }

    #[test]
    fn breakpoints_outside_interval_are_ignored() {
        let val = GAUSS_2.integrate_split(0.0, 1.0, &[-3.0, 5.0], |x| x);
        assert!((val - 0.5).abs() < 1e-15);
    }
}
