//! Bracketed scalar root finding.
//!
//! [`newton_bisect`] is a safeguarded Newton iteration: every Newton step that
//! would leave the current bracket, or that fails to at least halve the previous
//! step, is replaced by a bisection step. The bracket shrinks monotonically, so
//! the iteration always terminates.

use crate::{Error, Result};

/// Outcome of a bracketed solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Find a root of `f` in `[lo, hi]` where `f(lo)` and `f(hi)` differ in sign.
///
/// `f_df` returns the function value and its derivative. Iteration stops when
/// the step or the bracket width drops below `xtol_rel * |x|` (with a floor of
/// one ulp at `x`), or when `f` vanishes exactly.
pub fn newton_bisect<F>(
    mut f_df: F,
    lo: f64,
    hi: f64,
    guess: f64,
    xtol_rel: f64,
    max_iter: usize,
) -> Result<Root>
where
    F: FnMut(f64) -> (f64, f64),
{
    if !(lo < hi) {
        return Err(Error::Argument(format!("empty bracket [{lo}, {hi}]")));
    }
    let (flo, _) = f_df(lo);
    let (fhi, _) = f_df(hi);
    if flo == 0.0 {
        return Ok(Root {
            x: lo,
            fx: 0.0,
            iterations: 0,
        });
    }
    if fhi == 0.0 {
        return Ok(Root {
            x: hi,
            fx: 0.0,
            iterations: 0,
        });
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Argument(format!(
            "no sign change on [{lo}, {hi}]: f = {flo:e}, {fhi:e}"
        )));
    }
    // orient so that f(neg) < 0 < f(pos)
    let (mut neg, mut pos) = if flo < 0.0 { (lo, hi) } else { (hi, lo) };

    let mut x = if guess > lo && guess < hi {
        guess
    } else {
        0.5 * (lo + hi)
    };
    let mut dx_old = (hi - lo).abs();
    let mut dx = dx_old;
    let (mut fx, mut dfx) = f_df(x);

    for it in 1..=max_iter {
        if fx == 0.0 {
            return Ok(Root {
                x,
                fx,
                iterations: it,
            });
        }
        if fx < 0.0 {
            neg = x;
        } else {
            pos = x;
        }

        let newton_ok = dfx != 0.0 && dfx.is_finite() && {
            let cand = x - fx / dfx;
            (cand - neg) * (cand - pos) < 0.0 && (2.0 * fx).abs() <= (dx_old * dfx).abs()
        };
        dx_old = dx;
        if newton_ok {
            dx = fx / dfx;
            x -= dx;
        } else {
            dx = 0.5 * (pos - neg);
            x = neg + dx;
        }

        let tol = (xtol_rel * x.abs())
            .max(f64::EPSILON * x.abs())
            .max(f64::MIN_POSITIVE);
        let width = (pos - neg).abs();
        (fx, dfx) = f_df(x);
        if dx.abs() <= tol || width <= 2.0 * tol {
            return Ok(Root {
                x,
                fx,
                iterations: it,
            });
        }
    }
    Err(Error::Convergence {
        method: "safeguarded Newton",
        iterations: max_iter,
        residual: fx.abs(),
    })
}

/// Plain bisection for a sign change of `f` on `[lo, hi]`, down to adjacent floats.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Argument(format!(
            "no sign change on [{lo}, {hi}]: f = {fa:e}, {fb:e}"
        )));
    }
    let neg_at_a = fa < 0.0;
    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm < 0.0) == neg_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_two() {
        let r = newton_bisect(|x| (x * x - 2.0, 2.0 * x), 0.0, 2.0, 1.0, 1e-15, 100).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn falls_back_to_bisection_on_flat_derivative() {
        // derivative vanishes at the guess
        let r = newton_bisect(
            |x| (x * x * x - 0.001, 3.0 * x * x),
            -1.0,
            1.0,
            0.0,
            1e-15,
            200,
        )
        .unwrap();
        assert!((r.x - 0.1).abs() < 1e-14);
    }

    #[test]
    fn rejects_missing_sign_change() {
        let err = newton_bisect(|x| (x * x + 1.0, 2.0 * x), -1.0, 1.0, 0.0, 1e-12, 50);
        assert!(matches!(err, Err(Error::Argument(_))));
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 50).is_err());
    }

    #[test]
    fn iteration_cap_is_reported() {
        let err = newton_bisect(|x| (x.ln(), 1.0 / x), 0.5, 1e6, 1e6 - 1.0, 1e-16, 2);
        assert!(matches!(err, Err(Error::Convergence { iterations: 2, .. })));
    }

    #[test]
    fn bisection_reaches_adjacent_floats() {
        let r = bisect(|x| x.cos(), 1.0, 2.0, 200).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() <= 4.0 * f64::EPSILON);
    }
}
