//! Dormand-Prince 5(4) integrator with level-crossing events.
//!
//! Steps are controlled by the embedded fourth-order error estimate with a PI
//! step-size controller. Events are sign changes of a scalar function of the
//! state; once a sign change is seen inside an accepted step, the crossing time
//! is located by regula falsi (Illinois variant) on the map `h ↦ g(step(y, h))`,
//! i.e. on genuine Runge-Kutta steps rather than on an interpolant.

use crate::{Error, Result};

/// System of ordinary differential equations `dy/dt = f(t, y)`.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N], dydt: &mut [f64; N]);
}

// Dormand-Prince tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order weights minus fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Which sign changes of the event function count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    /// From negative to positive.
    Rising,
    /// From positive to negative.
    Falling,
    Either,
}

impl Crossing {
    fn matches(self, rising: bool) -> bool {
        match self {
            Crossing::Rising => rising,
            Crossing::Falling => !rising,
            Crossing::Either => true,
        }
    }
}

/// A scalar event function and the crossing that terminates integration.
///
/// If the initial state sits exactly on the level (`g = 0`), the departure from
/// it is not counted; the first counted crossing is the next sign change after
/// the trajectory has left the level.
pub struct Event<G> {
    pub g: G,
    pub direction: Crossing,
    /// Stop at the n-th matching crossing (1-based).
    pub occurrence: usize,
    /// Target for `|g|` at the located crossing.
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    /// Steps shorter than this are reported as a failure.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: 1.0,
            h_min: 1e-14,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Event,
    TimeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventPoint<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    /// `g` at the reported state.
    pub residual: f64,
    pub rising: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    /// Accepted step points, starting with the initial state; the event state
    /// (if any) is the last entry.
    pub t: Vec<f64>,
    pub y: Vec<[f64; N]>,
    pub event: Option<EventPoint<N>>,
    pub stop: StopReason,
    pub stats: Stats,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (coef, k) in terms {
            acc += coef * k[i];
        }
        *o += h * acc;
    }
    out
}

struct StepOutput<const N: usize> {
    y: [f64; N],
    k7: [f64; N],
    err: f64,
}

impl Dopri5 {
    /// One Dormand-Prince step of size `h` from `(t, y)` with `k1 = f(t, y)`.
    fn step<S, const N: usize>(
        &self,
        sys: &S,
        t: f64,
        y: &[f64; N],
        k1: &[f64; N],
        h: f64,
        stats: &mut Stats,
    ) -> StepOutput<N>
    where
        S: OdeSystem<N>,
    {
        let mut k2 = [0.0; N];
        let mut k3 = [0.0; N];
        let mut k4 = [0.0; N];
        let mut k5 = [0.0; N];
        let mut k6 = [0.0; N];
        let mut k7 = [0.0; N];

        sys.rhs(t + C2 * h, &axpy(y, h, &[(A21, k1)]), &mut k2);
        sys.rhs(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]), &mut k3);
        sys.rhs(
            t + C4 * h,
            &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]),
            &mut k4,
        );
        sys.rhs(
            t + C5 * h,
            &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            &mut k5,
        );
        sys.rhs(
            t + h,
            &axpy(
                y,
                h,
                &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
            &mut k6,
        );
        let y_new = axpy(
            y,
            h,
            &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        sys.rhs(t + h, &y_new, &mut k7);
        stats.rhs_evals += 6;

        let mut sum = 0.0;
        for i in 0..N {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
            sum += (e / sk) * (e / sk);
        }
        StepOutput {
            y: y_new,
            k7,
            err: (sum / N as f64).sqrt(),
        }
    }

    fn initial_step<const N: usize>(&self, y: &[f64; N], f: &[f64; N]) -> f64 {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let sk = self.atol + self.rtol * y[i].abs();
            d0 += (y[i] / sk).powi(2);
            d1 += (f[i] / sk).powi(2);
        }
        let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
        let h = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h.min(self.h_max)
    }

    /// Integrate from `(t0, y0)` until `t_max` or until `event` fires.
    pub fn integrate<S, G, const N: usize>(
        &self,
        sys: &S,
        t0: f64,
        y0: [f64; N],
        t_max: f64,
        event: Option<&Event<G>>,
    ) -> Result<Solution<N>>
    where
        S: OdeSystem<N>,
        G: Fn(&[f64; N]) -> f64,
    {
        const SAFETY: f64 = 0.9;
        const BETA: f64 = 0.04;
        const EXPO: f64 = 0.2 - BETA * 0.75;
        const FAC_MIN: f64 = 0.2; // largest shrink
        const FAC_MAX: f64 = 10.0; // largest growth

        let mut stats = Stats::default();
        let mut t = t0;
        let mut y = y0;
        let mut k1 = [0.0; N];
        sys.rhs(t, &y, &mut k1);
        stats.rhs_evals += 1;

        let mut h = self.initial_step(&y, &k1);
        let mut err_old: f64 = 1e-4;
        let mut ts = vec![t];
        let mut ys = vec![y];

        let mut side = event.and_then(|ev| {
            let g0 = (ev.g)(&y);
            (g0 != 0.0).then_some(g0 > 0.0)
        });
        let mut seen = 0usize;

        loop {
            if t >= t_max {
                return Ok(Solution {
                    t: ts,
                    y: ys,
                    event: None,
                    stop: StopReason::TimeLimit,
                    stats,
                });
            }
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(Error::StepSizeUnderflow { tau: t, step: h });
            }
            h = h.min(self.h_max).min(t_max - t);
            if h < self.h_min && t_max - t > self.h_min {
                return Err(Error::StepSizeUnderflow { tau: t, step: h });
            }

            let out = self.step(sys, t, &y, &k1, h, &mut stats);
            let finite = out.y.iter().all(|v| v.is_finite()) && out.err.is_finite();
            if !finite {
                stats.rejected += 1;
                h *= 0.25;
                if h < self.h_min {
                    return Err(Error::NonFinite { tau: t });
                }
                continue;
            }

            let fac11 = out.err.powf(EXPO);
            if out.err <= 1.0 {
                stats.accepted += 1;

                if let Some(ev) = event {
                    let g_new = (ev.g)(&out.y);
                    if g_new != 0.0 {
                        let new_side = g_new > 0.0;
                        match side {
                            None => side = Some(new_side),
                            Some(old) if old != new_side => {
                                side = Some(new_side);
                                if ev.direction.matches(new_side) {
                                    seen += 1;
                                    if seen >= ev.occurrence {
                                        let hit = self.locate(sys, t, &y, &k1, h, ev, &mut stats);
                                        ts.push(hit.t);
                                        ys.push(hit.y);
                                        return Ok(Solution {
                                            t: ts,
                                            y: ys,
                                            event: Some(hit),
                                            stop: StopReason::Event,
                                            stats,
                                        });
                                    }
                                }
                            }
                            Some(_) => {}
                        }
                    }
                }

                t += h;
                y = out.y;
                k1 = out.k7;
                ts.push(t);
                ys.push(y);

                let fac = (fac11 / err_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                err_old = out.err.max(1e-4);
                h /= fac;
            } else {
                stats.rejected += 1;
                h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            }
        }
    }

    /// Locate the crossing inside the accepted step `[t, t + h]`.
    #[allow(clippy::too_many_arguments)]
    fn locate<S, G, const N: usize>(
        &self,
        sys: &S,
        t: f64,
        y: &[f64; N],
        k1: &[f64; N],
        h: f64,
        ev: &Event<G>,
        stats: &mut Stats,
    ) -> EventPoint<N>
    where
        S: OdeSystem<N>,
        G: Fn(&[f64; N]) -> f64,
    {
        let eval = |tau: f64, stats: &mut Stats| {
            let state = if tau == 0.0 {
                *y
            } else {
                self.step(sys, t, y, k1, tau, stats).y
            };
            ((ev.g)(&state), state)
        };

        let (mut a, mut b) = (0.0, h);
        let (mut ga, _) = eval(a, stats);
        let (mut gb, yb) = eval(b, stats);
        let rising = gb > 0.0;
        let mut best = (b, gb, yb);
        let mut last_kept = 0i8;

        for _ in 0..200 {
            if best.1.abs() <= ev.tolerance || (b - a).abs() <= 4.0 * f64::EPSILON * (t.abs() + h) {
                break;
            }
            let mut c = (a * gb - b * ga) / (gb - ga);
            if !(c > a.min(b) && c < a.max(b)) {
                c = 0.5 * (a + b);
            }
            let (gc, yc) = eval(c, stats);
            if gc.abs() < best.1.abs() {
                best = (c, gc, yc);
            }
            if gc == 0.0 {
                break;
            }
            if (gc > 0.0) == (gb > 0.0) {
                b = c;
                gb = gc;
                if last_kept == -1 {
                    ga *= 0.5;
                }
                last_kept = -1;
            } else {
                a = c;
                ga = gc;
                if last_kept == 1 {
                    gb *= 0.5;
                }
                last_kept = 1;
            }
        }
        EventPoint {
            t: t + best.0,
            y: best.2,
            residual: best.1,
            rising,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl OdeSystem<1> for Decay {
        fn rhs(&self, _t: f64, y: &[f64; 1], dydt: &mut [f64; 1]) {
            dydt[0] = -y[0];
        }
    }

    struct Oscillator;
    impl OdeSystem<2> for Oscillator {
        fn rhs(&self, _t: f64, y: &[f64; 2], dydt: &mut [f64; 2]) {
            dydt[0] = y[1];
            dydt[1] = -y[0];
        }
    }

    type NoEvent = fn(&[f64; 2]) -> f64;

    #[test]
    fn exponential_decay() {
        let sol = Dopri5::default()
            .integrate(
                &Decay,
                0.0,
                [1.0],
                5.0,
                None::<&Event<fn(&[f64; 1]) -> f64>>,
            )
            .unwrap();
        assert_eq!(sol.stop, StopReason::TimeLimit);
        let last = sol.y.last().unwrap()[0];
        assert!((last - (-5.0_f64).exp()).abs() < 1e-11);
        assert_eq!(*sol.t.last().unwrap(), 5.0);
    }

    #[test]
    fn oscillator_period() {
        let sol = Dopri5::default()
            .integrate(
                &Oscillator,
                0.0,
                [1.0, 0.0],
                20.0 * std::f64::consts::PI,
                None::<&Event<NoEvent>>,
            )
            .unwrap();
        let y = sol.y.last().unwrap();
        assert!((y[0] - 1.0).abs() < 1e-8 && y[1].abs() < 1e-8);
    }

    #[test]
    fn locates_zero_crossings() {
        // x = cos t crosses zero falling at pi/2, rising at 3pi/2
        let ev = Event {
            g: |y: &[f64; 2]| y[0],
            direction: Crossing::Rising,
            occurrence: 1,
            tolerance: 1e-14,
        };
        let sol = Dopri5::default()
            .integrate(&Oscillator, 0.0, [1.0, 0.0], 100.0, Some(&ev))
            .unwrap();
        let hit = sol.event.unwrap();
        assert_eq!(sol.stop, StopReason::Event);
        assert!(hit.rising);
        assert!((hit.t - 1.5 * std::f64::consts::PI).abs() < 1e-9);
        assert!(hit.residual.abs() <= 1e-14);

        let ev = Event {
            direction: Crossing::Either,
            occurrence: 3,
            ..ev
        };
        let sol = Dopri5::default()
            .integrate(&Oscillator, 0.0, [1.0, 0.0], 100.0, Some(&ev))
            .unwrap();
        assert!((sol.event.unwrap().t - 2.5 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn departure_from_level_is_not_counted() {
        // start on x = 0 moving up; the next crossing is the falling one at t = pi
        let ev = Event {
            g: |y: &[f64; 2]| y[0],
            direction: Crossing::Either,
            occurrence: 1,
            tolerance: 1e-14,
        };
        let sol = Dopri5::default()
            .integrate(&Oscillator, 0.0, [0.0, 1.0], 100.0, Some(&ev))
            .unwrap();
        let hit = sol.event.unwrap();
        assert!(!hit.rising);
        assert!((hit.t - std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn time_limit_without_event() {
        let ev = Event {
            g: |y: &[f64; 2]| y[0] - 5.0,
            direction: Crossing::Either,
            occurrence: 1,
            tolerance: 1e-12,
        };
        let sol = Dopri5::default()
            .integrate(&Oscillator, 0.0, [1.0, 0.0], 10.0, Some(&ev))
            .unwrap();
        assert_eq!(sol.stop, StopReason::TimeLimit);
        assert!(sol.event.is_none());
    }

    #[test]
    fn underflow_is_reported() {
        struct Blowup;
        impl OdeSystem<1> for Blowup {
            fn rhs(&self, _t: f64, y: &[f64; 1], dydt: &mut [f64; 1]) {
                dydt[0] = y[0] * y[0];
            }
        }
        let err = Dopri5::default()
            .integrate(
                &Blowup,
                0.0,
                [1.0],
                2.0,
                None::<&Event<fn(&[f64; 1]) -> f64>>,
            )
            .unwrap_err();
        assert!(err.is_integration_failure(), "{err:?}");
    }
}
