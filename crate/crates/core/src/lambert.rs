//! Principal branch of the Lambert W function and closed-form bounds on it.
//!
//! For `y > 1` the small root of `x - ln x = y - ln y` is `x = -W(-y e^{-y})`,
//! so every bound `z_lo < z < z_hi` on `z = x / Y` turns into a bound on
//! `W(X) = z X` for `X = -Y ∈ (-1/e, 0)`. Because `X` is negative the order
//! flips: the lower `z` bounds become upper bounds on `W` and vice versa.

use std::f64::consts::E;

use crate::bounds::{BoundSet, PadeBound};
use crate::{Error, Result};

/// `e - E` where `E` is the binary64 value of `e`.
const E_LO: f64 = 1.445_646_891_729_250_2e-16;
/// Arguments down to `-1/e - BRANCH_TOL` are accepted and mapped to `W = -1`.
pub const BRANCH_TOL: f64 = 1e-15;
pub const MAX_TAYLOR_TERMS: usize = 30;

/// A validated argument of the principal branch, `X >= -1/e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WQuery {
    pub x: f64,
}

impl WQuery {
    pub fn new(x: f64) -> Result<Self> {
        if !x.is_finite() || x < -1.0 / E - BRANCH_TOL {
            return Err(Error::domain("X", x, "[-1/e, inf)"));
        }
        Ok(WQuery { x })
    }

    /// `e·X + 1`, evaluated with a split constant so that it stays accurate
    /// next to the branch point.
    fn branch_distance(&self) -> f64 {
        E.mul_add(self.x, 1.0) + E_LO * self.x
    }
}

/// Principal branch `W(X) >= -1` of the inverse of `w e^w`.
///
/// The starting value comes from the branch-point expansion in
/// `p = √(2(eX + 1))` near `X = -1/e`, the Maclaurin series for small `|X|`,
/// and logarithmic asymptotics elsewhere; Halley iteration then refines it.
pub fn lambert_w(x: f64) -> Result<f64> {
    let query = WQuery::new(x)?;
    let q = query.branch_distance();
    if q <= 0.0 {
        return Ok(-1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }

    let mut w = if q < 0.3 {
        let p = (2.0 * q).sqrt();
        -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (-43.0 / 540.0))))
    } else if x.abs() < 0.2 {
        x * (1.0 + x * (-1.0 + x * (1.5 + x * (-8.0 / 3.0))))
    } else if x < 3.0 {
        let l = x.ln_1p();
        l * (1.0 - l.ln_1p() / (2.0 + l))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };

    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        if wp1 <= 0.0 {
            w = -1.0 + f64::EPSILON;
            continue;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        if !step.is_finite() {
            break;
        }
        w -= step;
        if step.abs() <= 2.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w.max(-1.0))
}

/// `W(-y e^{-y})` for `y > 1`; equals minus the small root of `x - ln x = y - ln y`.
pub fn w_of_minus_y_exp(y: f64) -> Result<f64> {
    if !(y > 1.0) || !y.is_finite() {
        return Err(Error::domain("y", y, "(1, inf)"));
    }
    lambert_w(-(y * (-y).exp()))
}

fn check_negative_open(x: f64) -> Result<()> {
    if !(x > -1.0 / E && x < 0.0) {
        return Err(Error::domain("X", x, "(-1/e, 0)"));
    }
    Ok(())
}

/// First-order estimates of `W` on `(-1/e, 0)`.
///
/// On that interval they satisfy `Z0 <= Z2 <= W <= Z1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corollary1Bounds {
    pub z1: f64,
    pub z2: f64,
    pub z0: f64,
}

/// Second-order estimates of `W` on `(-1/e, 0)`.
///
/// On that interval they satisfy `max(TZ2, TZ3) <= W <= TZ1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corollary2Bounds {
    pub tz1: f64,
    pub tz2: f64,
    pub tz3: f64,
}

impl Corollary2Bounds {
    /// The sharper of the two bounds on the far side of `W` from `tz1`.
    pub fn sharper_of_tz2_tz3(&self) -> f64 {
        self.tz2.max(self.tz3)
    }
}

/// `(-1 - dX + √((1 + dX)² + 4cX)) / (2c)`, evaluated as `2X / (1 + dX + √(...))`.
fn first_order_estimate(bound: &PadeBound, x: f64) -> f64 {
    let u = 1.0 + bound.d * x;
    let disc = (u * u + 4.0 * bound.c * x).max(0.0);
    2.0 * x / (u + disc.sqrt())
}

/// `(2a - 1 - dX + √D) / (2(c + a/X))` with `D = (1 + dX)² + 4X(c - a(d + c))`,
/// evaluated as `2(1 - a)X / (1 - 2a + dX + √D)`. The rationalised form has no
/// removable singularity at `X = -a/c`.
fn second_order_estimate(bound: &PadeBound, x: f64) -> f64 {
    let (a, c, d) = (bound.a, bound.c, bound.d);
    let u = 1.0 + d * x;
    let disc = (u * u + 4.0 * x * (c - a * (d + c))).max(0.0);
    2.0 * (1.0 - a) * x / (1.0 - 2.0 * a + d * x + disc.sqrt())
}

pub fn corollary1_bounds(x: f64) -> Result<Corollary1Bounds> {
    corollary1_bounds_with(BoundSet::standard(), x)
}

pub fn corollary1_bounds_with(set: &BoundSet, x: f64) -> Result<Corollary1Bounds> {
    check_negative_open(x)?;
    Ok(Corollary1Bounds {
        z1: first_order_estimate(&set.z1, x),
        z2: first_order_estimate(&set.z2, x),
        z0: x / (1.0 + (E - 1.0) * x),
    })
}

pub fn corollary2_bounds(x: f64) -> Result<Corollary2Bounds> {
    corollary2_bounds_with(BoundSet::standard(), x)
}

pub fn corollary2_bounds_with(set: &BoundSet, x: f64) -> Result<Corollary2Bounds> {
    check_negative_open(x)?;
    Ok(Corollary2Bounds {
        tz1: second_order_estimate(&set.tz1, x),
        tz2: second_order_estimate(&set.tz2, x),
        tz3: second_order_estimate(&set.tz3, x),
    })
}

/// The chain `2 ln y - y < √(8(y - 1 - ln y)) - y < W(-y e^{-y}) < ln y - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct S09Chain {
    pub lower_a: f64,
    pub lower_b: f64,
    pub upper: f64,
}

pub fn s09_chain(y: f64) -> Result<S09Chain> {
    if !(y > 1.0) || !y.is_finite() {
        return Err(Error::domain("y", y, "(1, inf)"));
    }
    let ln_y = y.ln();
    let t = y - 1.0;
    Ok(S09Chain {
        lower_a: 2.0 * ln_y - y,
        lower_b: (8.0 * (t - t.ln_1p())).sqrt() - y,
        upper: ln_y - 1.0,
    })
}

/// Upper bound `W(X) <= (X + ȳ) / (1 + ln ȳ)` for any `ȳ > 1/e`.
pub fn hh08_upper(x: f64, ybar: f64) -> Result<f64> {
    WQuery::new(x)?;
    if !(ybar > 1.0 / E) || !ybar.is_finite() {
        return Err(Error::domain("ybar", ybar, "(1/e, inf)"));
    }
    Ok((x + ybar) / (1.0 + ybar.ln()))
}

/// [`hh08_upper`] with the free parameter set to `ȳ = X + 1`.
pub fn hh08_default(x: f64) -> Result<f64> {
    hh08_upper(x, x + 1.0)
}

/// Coefficient `(-n)^{n-1} / n!` of `X^n` in the Maclaurin series of `W`.
pub fn taylor_coefficient(n: usize) -> Result<f64> {
    if !(1..=MAX_TAYLOR_TERMS).contains(&n) {
        return Err(Error::Argument(format!(
            "number of series terms must lie in [1, {MAX_TAYLOR_TERMS}], got {n}"
        )));
    }
    let numerator = (-(n as f64)).powi(n as i32 - 1);
    let factorial: f64 = (1..=n).map(|k| k as f64).product();
    Ok(numerator / factorial)
}

/// Partial sum of the Maclaurin series of `W` with `n_terms` terms.
pub fn taylor_w(x: f64, n_terms: usize) -> Result<f64> {
    taylor_coefficient(n_terms)?;
    if !x.is_finite() {
        return Err(Error::domain("X", x, "finite"));
    }
    let mut acc = 0.0;
    for n in (1..=n_terms).rev() {
        acc = x * (taylor_coefficient(n)? + acc);
    }
    Ok(acc)
}
