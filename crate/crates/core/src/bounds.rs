//! Solutions and closed-form bounds for `x - ln x = y - ln y`.
//!
//! For `y > 1` the small root `x < 1` is written `x = z·Y` with `Y = y·e^{-y}`,
//! where `z ∈ (1, e)` solves
//!
//! ```text
//! ln z / z = Y.
//! ```
//!
//! Replacing `ln z` by a rational function `f(z) = (z - 1 + a(z - 1)²) / (c z + d)`
//! that agrees with `ln` at `z = 1` and `z = e` turns this into a quadratic in
//! `z`. When `f` lies above `ln` on `(1, e)` the quadratic root is a lower bound
//! on `z`; when it lies below, an upper bound.
//!
//! Every quantity near `z = 1` is also available as an *excess* `z - 1`, which
//! keeps full relative precision when `Y` is tiny (large `y`).

use std::f64::consts::E;
use std::sync::LazyLock;

use crate::roots::newton_bisect;
use crate::{Error, Result};

/// Largest admissible `Y` is `1/e`; arguments within this distance of it are rejected.
pub const UPPER_MARGIN: f64 = 1e-15;
/// `exact_z` rejects `y <= 1 + Y_MARGIN`.
pub const Y_MARGIN: f64 = 1e-12;
/// Residual tolerance on `ln z / z - Y`.
pub const RESIDUAL_TOL: f64 = 1e-13;
pub const MAX_ITER: usize = 200;

/// Which side of `ln z` a rational approximant lies on over `(1, e)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogSide {
    /// `f(z) < ln z`; the induced root is an upper bound on `z`.
    BelowLog,
    /// `f(z) > ln z`; the induced root is a lower bound on `z`.
    AboveLog,
}

/// Which root of the quadratic `A z² - B z + C = 0` was returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadraticRoot {
    /// The root with the minus sign in front of the square root.
    Minus,
    /// The other root; never selected for the standard coefficient sets.
    Plus,
}

/// Rational approximant `f(z) = (z - 1 + a(z - 1)²) / (c z + d)` of `ln z` on `[1, e]`.
///
/// `d` is always derived from `a` and `c` so that `f(e) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadeBound {
    pub name: &'static str,
    pub a: f64,
    pub c: f64,
    pub d: f64,
    pub kind: LogSide,
}

impl PadeBound {
    pub fn new(name: &'static str, a: f64, c: f64, kind: LogSide) -> Self {
        let d = E - 1.0 - c * E + a * (E - 1.0) * (E - 1.0);
        PadeBound {
            name,
            a,
            c,
            d,
            kind,
        }
    }

    /// Evaluate `f(z)` without a domain check.
    pub fn value(&self, z: f64) -> f64 {
        let t = z - 1.0;
        (t + self.a * t * t) / (self.c * z + self.d)
    }

    /// Value of `Y` at which the leading coefficient `c Y - a` changes sign, if
    /// that happens inside `(0, 1/e)`.
    pub fn leading_sign_change(&self) -> Option<f64> {
        if self.c == 0.0 {
            return None;
        }
        let y = self.a / self.c;
        (y > 0.0 && y < 1.0 / E).then_some(y)
    }

    /// The quadratic coefficients `(A, B, C)` of `A z² - B z + C = 0`.
    fn quadratic(&self, target: f64) -> (f64, f64, f64) {
        (
            self.c * target - self.a,
            1.0 - 2.0 * self.a - self.d * target,
            1.0 - self.a,
        )
    }

    fn discriminant(&self, target: f64) -> Result<f64> {
        let (qa, qb, qc) = self.quadratic(target);
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            return Ok(disc);
        }
        // double root at Y = 1/e for approximants matched to ln' at z = e
        let scale = qb * qb + (4.0 * qa * qc).abs();
        if disc > -64.0 * f64::EPSILON * scale {
            Ok(0.0)
        } else {
            Err(Error::NoAdmissibleRoot {
                bound: self.name,
                y_value: target,
                discriminant: disc,
            })
        }
    }

    /// Solve `f(z) / z = Y` for `Y ∈ [0, 1/e]`, returning `z - 1` and the branch used.
    ///
    /// The minus-sign root is evaluated in rationalised form,
    /// `z - 1 = 4Y(c + d)(1 - a) / ((1 + dY + √D)(B + √D))`, which stays finite
    /// through `Y = 0` and through the sign change of `cY - a`. The plus root is
    /// only used if the minus root leaves `[1, e]`.
    pub fn solve_excess_with_branch(&self, target: f64) -> Result<(f64, QuadraticRoot)> {
        if !(0.0..=1.0 / E).contains(&target) {
            return Err(Error::domain("Y", target, "[0, 1/e]"));
        }
        let (qa, qb, _) = self.quadratic(target);
        let sqrt_disc = self.discriminant(target)?.sqrt();
        const SLACK: f64 = 1e-12;
        let admissible =
            |excess: f64| excess.is_finite() && (-SLACK..=E - 1.0 + SLACK).contains(&excess);

        if qb + sqrt_disc > 0.0 {
            let excess = 4.0 * target * (self.c + self.d) * (1.0 - self.a)
                / ((1.0 + self.d * target + sqrt_disc) * (qb + sqrt_disc));
            if admissible(excess) {
                return Ok((excess, QuadraticRoot::Minus));
            }
        }
        if qa != 0.0 {
            let excess = (qb + sqrt_disc) / (2.0 * qa) - 1.0;
            if admissible(excess) {
                return Ok((excess, QuadraticRoot::Plus));
            }
        }
        Err(Error::NoAdmissibleRoot {
            bound: self.name,
            y_value: target,
            discriminant: sqrt_disc * sqrt_disc,
        })
    }

    /// `z - 1` for the root of `f(z) / z = Y`.
    pub fn solve_excess(&self, target: f64) -> Result<f64> {
        self.solve_excess_with_branch(target).map(|(x, _)| x)
    }

    /// The root `z` of `f(z) / z = Y`.
    pub fn solve(&self, target: f64) -> Result<f64> {
        self.solve_excess(target).map(|x| 1.0 + x)
    }
}

/// Evaluate a rational approximant on `[1, e]`.
pub fn pade_eval(bound: &PadeBound, z: f64) -> Result<f64> {
    if !(1.0..=E).contains(&z) {
        return Err(Error::domain("z", z, "[1, e]"));
    }
    Ok(bound.value(z))
}

/// The six approximants used for the first- and second-order bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSet {
    /// Matches `ln'` at `z = 1`; lower bound on `z`.
    pub z1: PadeBound,
    /// Matches `ln'` at `z = e`; upper bound on `z`.
    pub z2: PadeBound,
    /// Linear interpolant; upper bound on `z`.
    pub z0: PadeBound,
    /// Quadratic numerator matched to `ln'` at both ends; lower bound.
    pub tz1: PadeBound,
    /// Matched to `ln'` and `ln''` at `z = 1`; upper bound.
    pub tz2: PadeBound,
    /// Matched to `ln'` and `ln''` at `z = e`; upper bound.
    pub tz3: PadeBound,
}

static STANDARD: LazyLock<BoundSet> = LazyLock::new(BoundSet::compute);

impl BoundSet {
    /// The coefficient set, computed once in binary64 from `e`.
    pub fn standard() -> &'static BoundSet {
        &STANDARD
    }

    fn compute() -> BoundSet {
        let em1 = E - 1.0;
        let em2 = E - 2.0;

        let c3 = (2.0 * E - em1 * em1) / (2.0 + em1 * em1);
        BoundSet {
            z1: PadeBound::new("z1", 0.0, em2 / em1, LogSide::AboveLog),
            z2: PadeBound::new("z2", 0.0, 1.0 / E, LogSide::BelowLog),
            z0: PadeBound::new("z0", 0.0, 0.0, LogSide::BelowLog),
            tz1: PadeBound::new(
                "tz1",
                1.0 - E / (em1 * em1),
                em1 - 2.0 / em1,
                LogSide::AboveLog,
            ),
            tz2: PadeBound::new(
                "tz2",
                (3.0 - E) / (2.0 * em1 * em2),
                (E * E - 4.0 * E + 5.0) / (2.0 * em1 * em2),
                LogSide::BelowLog,
            ),
            tz3: PadeBound::new("tz3", (c3 * E - 1.0) / (E * E - 1.0), c3, LogSide::BelowLog),
        }
    }

    pub fn all(&self) -> [&PadeBound; 6] {
        [
            &self.z1, &self.z2, &self.z0, &self.tz1, &self.tz2, &self.tz3,
        ]
    }

    pub fn theorem1_excess(&self, target: f64) -> Result<Theorem1Bounds> {
        check_target(target)?;
        Ok(Theorem1Bounds {
            z1: self.z1.solve_excess(target)?,
            z2: self.z2.solve_excess(target)?,
            z0: self.z0.solve_excess(target)?,
        })
    }

    pub fn theorem1(&self, target: f64) -> Result<Theorem1Bounds> {
        self.theorem1_excess(target).map(|b| b.shifted(1.0))
    }

    pub fn theorem2_excess(&self, target: f64) -> Result<Theorem2Bounds> {
        check_target(target)?;
        Ok(Theorem2Bounds {
            tz1: self.tz1.solve_excess(target)?,
            tz2: self.tz2.solve_excess(target)?,
            tz3: self.tz3.solve_excess(target)?,
        })
    }

    pub fn theorem2(&self, target: f64) -> Result<Theorem2Bounds> {
        self.theorem2_excess(target).map(|b| b.shifted(1.0))
    }

    /// Check that the minus-sign quadratic root is the one inside `[1, e]` at a few
    /// probe values of `Y`.
    pub fn verify_branch_selection(&self) -> Result<()> {
        for target in [1e-6, 0.1, 1.0 / E - 1e-6] {
            for bound in self.all() {
                let (_, branch) = bound.solve_excess_with_branch(target)?;
                if branch != QuadraticRoot::Minus {
                    return Err(Error::NoAdmissibleRoot {
                        bound: bound.name,
                        y_value: target,
                        discriminant: bound.discriminant(target)?,
                    });
                }
            }
        }
        Ok(())
    }
}

/// First-order bounds: `1 < z1 < z < z2 < z0 < e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Bounds {
    pub z1: f64,
    pub z2: f64,
    pub z0: f64,
}

impl Theorem1Bounds {
    fn shifted(self, by: f64) -> Self {
        Theorem1Bounds {
            z1: self.z1 + by,
            z2: self.z2 + by,
            z0: self.z0 + by,
        }
    }
}

/// Second-order bounds: `tz1 < z < min(tz2, tz3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem2Bounds {
    pub tz1: f64,
    pub tz2: f64,
    pub tz3: f64,
}

impl Theorem2Bounds {
    fn shifted(self, by: f64) -> Self {
        Theorem2Bounds {
            tz1: self.tz1 + by,
            tz2: self.tz2 + by,
            tz3: self.tz3 + by,
        }
    }

    /// The sharper of the two upper bounds.
    pub fn upper(&self) -> f64 {
        self.tz2.min(self.tz3)
    }
}

/// The equation `ln z / z = Y` posed by a given `y > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZProblem {
    pub y: f64,
    /// `Y = y·e^{-y}`, in `(0, 1/e)`.
    pub target: f64,
}

impl ZProblem {
    pub fn new(y: f64) -> Result<Self> {
        if !(y > 1.0 + Y_MARGIN) || !y.is_finite() {
            return Err(Error::domain("y", y, "(1, inf)"));
        }
        let target = y * (-y).exp();
        if !(target > 0.0) || !target.is_normal() {
            return Err(Error::domain("y", y, "(1, ~708] (y·e^-y underflows)"));
        }
        Ok(ZProblem { y, target })
    }

    /// `z - 1` for the exact solution.
    pub fn solve_excess(&self) -> Result<f64> {
        solve_z_excess(self.target)
    }
}

fn check_target(target: f64) -> Result<()> {
    if !(target > 0.0 && target < 1.0 / E - UPPER_MARGIN) {
        return Err(Error::domain("Y", target, "(0, 1/e)"));
    }
    Ok(())
}

/// `|ln z / z - Y|` evaluated at `z = 1 + excess`.
pub fn z_residual(target: f64, excess: f64) -> f64 {
    (excess.ln_1p() / (1.0 + excess) - target).abs()
}

/// Value of `x - ln x - (y - ln y)` at `x = (1 + excess)·Y`.
///
/// The function is decreasing in `x` on `(0, 1)`, so it is positive for lower
/// bounds on the small root and negative for upper bounds.
pub fn side_residual(target: f64, excess: f64) -> f64 {
    target * (1.0 + excess) - excess.ln_1p()
}

/// Solve `ln(1 + ζ) / (1 + ζ) = Y` for `ζ ∈ (0, e - 1)`.
pub fn solve_z_excess(target: f64) -> Result<f64> {
    if !(target > 0.0 && target <= 1.0 / E) {
        return Err(Error::domain("Y", target, "(0, 1/e)"));
    }
    // G(ζ) = ln(1+ζ) - Y(1+ζ): increasing and concave on the bracket.
    let g = |zeta: f64| {
        (
            zeta.ln_1p() - target * (1.0 + zeta),
            1.0 / (1.0 + zeta) - target,
        )
    };
    let em1 = E - 1.0;
    let guess = (em1 * target / (1.0 - em1 * target)).min(em1);
    let root = newton_bisect(g, 0.0, em1, guess, 2.0 * f64::EPSILON, MAX_ITER)?;
    let residual = z_residual(target, root.x);
    if residual >= RESIDUAL_TOL {
        return Err(Error::Convergence {
            method: "ln z / z = Y",
            iterations: root.iterations,
            residual,
        });
    }
    Ok(root.x)
}

/// The solution `z ∈ (1, e)` of `ln z / z = y·e^{-y}`.
pub fn exact_z(y: f64) -> Result<f64> {
    exact_z_excess(y).map(|x| 1.0 + x)
}

/// `exact_z(y) - 1`, accurate to full relative precision for large `y`.
pub fn exact_z_excess(y: f64) -> Result<f64> {
    ZProblem::new(y)?.solve_excess()
}

/// The root `x < 1` of `x - ln x = y - ln y` for `y > 1`.
pub fn exact_small_root(y: f64) -> Result<f64> {
    let problem = ZProblem::new(y)?;
    let excess = problem.solve_excess()?;
    Ok(problem.target + problem.target * excess)
}

/// Root `x < a` of `x - a ln x = y - a ln y` for `0 < a < y`.
pub fn scaled_small_root(a: f64, y: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::domain("a", a, "(0, inf)"));
    }
    if !(y > a) {
        return Err(Error::domain("y", y, "(a, inf)"));
    }
    exact_small_root(y / a).map(|u| a * u)
}

/// `(z1, z2, z0)` for `Y ∈ (0, 1/e)`.
pub fn theorem1_bounds(target: f64) -> Result<Theorem1Bounds> {
    BoundSet::standard().theorem1(target)
}

/// `(z1 - 1, z2 - 1, z0 - 1)` for `Y ∈ (0, 1/e)`.
pub fn theorem1_excess(target: f64) -> Result<Theorem1Bounds> {
    BoundSet::standard().theorem1_excess(target)
}

/// `(tz1, tz2, tz3)` for `Y ∈ (0, 1/e)`.
pub fn theorem2_bounds(target: f64) -> Result<Theorem2Bounds> {
    BoundSet::standard().theorem2(target)
}

/// `(tz1 - 1, tz2 - 1, tz3 - 1)` for `Y ∈ (0, 1/e)`.
pub fn theorem2_excess(target: f64) -> Result<Theorem2Bounds> {
    BoundSet::standard().theorem2_excess(target)
}
