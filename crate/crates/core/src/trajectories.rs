//! Predator-prey flows, level-crossing integration and trajectory estimates.
//!
//! Integration runs in logarithmic coordinates `u = ln s`, `v = ln x`, so that
//! both biomasses stay positive by construction. The reported states are mapped
//! back with `exp`.
//!
//! The general system is
//!
//! ```text
//! dS/dt = H(S) - q φ(S) X
//! dX/dt = p φ(S) X - d X
//! ```
//!
//! with the Lotka-Volterra (`H = S`, `φ = S`, `p = d = α`) and
//! Rosenzweig-MacArthur (`H = h(s) s`, `φ = s`, `p = m`, `d = mλ`) systems as
//! special cases, each in its own time scale.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{theorem1_bounds, BoundSet, Theorem1Bounds, ZProblem};
use crate::csv::Table;
use crate::lambert::w_of_minus_y_exp;
use crate::ode::{Crossing, Dopri5, Event, OdeSystem, StopReason};
use crate::roots::bisect;
use crate::{Error, Result};

/// Seed used by the randomized suites when none is given.
pub const DEFAULT_SEED: u64 = 20_220_503;
/// Default `T_max` for level-crossing integrations.
pub const DEFAULT_T_MAX: f64 = 1e6;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Prey isocline of the scaled Rosenzweig-MacArthur system, `h(s) = (1 - s)(s + a)`.
pub fn rm_h(s: f64, a: f64) -> f64 {
    (1.0 - s) * (s + a)
}

/// User-supplied general predator-prey system.
#[derive(Clone)]
pub struct GeneralSystem {
    pub h: ScalarFn,
    pub phi: ScalarFn,
    /// An antiderivative of `1/φ`.
    pub phi_antiderivative: ScalarFn,
    pub p: f64,
    pub q: f64,
    pub d: f64,
}

impl fmt::Debug for GeneralSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralSystem")
            .field("p", &self.p)
            .field("q", &self.q)
            .field("d", &self.d)
            .finish_non_exhaustive()
    }
}

impl GeneralSystem {
    /// Build a general system, spot-checking `φ` and `Φ` on a geometric grid
    /// over `check_range`.
    pub fn new(
        h: ScalarFn,
        phi: ScalarFn,
        phi_antiderivative: ScalarFn,
        (p, q, d): (f64, f64, f64),
        check_range: (f64, f64),
    ) -> Result<Self> {
        for (name, v) in [("p", p), ("q", q), ("d", d)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(name, v, "(0, inf)"));
            }
        }
        let (lo, hi) = check_range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Argument(format!("bad check range [{lo}, {hi}]")));
        }
        let n = 64;
        let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
        let mut prev = phi(lo);
        for i in 1..n {
            let s = lo * ratio.powi(i);
            let cur = phi(s);
            if !(cur >= prev) {
                return Err(Error::Argument(format!(
                    "φ is not non-decreasing near S = {s}: {prev} then {cur}"
                )));
            }
            prev = cur;
            let step = 1e-5 * s;
            let fd = (phi_antiderivative(s + step) - phi_antiderivative(s - step)) / (2.0 * step);
            let want = 1.0 / cur;
            if !((fd - want).abs() <= 1e-6 * want.abs()) {
                return Err(Error::Argument(format!(
                    "Φ' = {fd} but 1/φ = {want} at S = {s}"
                )));
            }
        }
        Ok(GeneralSystem {
            h,
            phi,
            phi_antiderivative,
            p,
            q,
            d,
        })
    }
}

#[derive(Debug, Clone)]
pub enum SystemSpec {
    /// `ds/dτ = (1 - x)s`, `dx/dτ = α x (s - 1)`.
    LotkaVolterra {
        alpha: f64,
    },
    /// `ds/dτ = (h(s) - x)s`, `dx/dτ = m (s - λ) x`.
    RosenzweigMacArthur {
        m: f64,
        lambda: f64,
        a: f64,
    },
    General(GeneralSystem),
}

impl SystemSpec {
    pub fn lotka_volterra(alpha: f64) -> Result<Self> {
        let s = SystemSpec::LotkaVolterra { alpha };
        s.validate()?;
        Ok(s)
    }

    pub fn rosenzweig_macarthur(m: f64, lambda: f64, a: f64) -> Result<Self> {
        let s = SystemSpec::RosenzweigMacArthur { m, lambda, a };
        s.validate()?;
        Ok(s)
    }

    /// Check parameter ranges (the general variant is checked on construction).
    pub fn validate(&self) -> Result<()> {
        match *self {
            SystemSpec::LotkaVolterra { alpha } => {
                if !(alpha > 0.0) || !alpha.is_finite() {
                    return Err(Error::domain("alpha", alpha, "(0, inf)"));
                }
            }
            SystemSpec::RosenzweigMacArthur { m, lambda, a } => {
                if !(m > 0.0) || !m.is_finite() {
                    return Err(Error::domain("m", m, "(0, inf)"));
                }
                if !(lambda > 0.0 && lambda < 1.0) {
                    return Err(Error::domain("lambda", lambda, "(0, 1)"));
                }
                if !(a > 0.0) || !a.is_finite() {
                    return Err(Error::domain("a", a, "(0, inf)"));
                }
            }
            SystemSpec::General(_) => {}
        }
        Ok(())
    }

    pub fn is_lotka_volterra(&self) -> bool {
        matches!(self, SystemSpec::LotkaVolterra { .. })
    }

    /// `(p, q, d)` when the system is read as a general system.
    pub fn rates(&self) -> (f64, f64, f64) {
        match self {
            SystemSpec::LotkaVolterra { alpha } => (*alpha, 1.0, *alpha),
            SystemSpec::RosenzweigMacArthur { m, lambda, .. } => (*m, 1.0, m * lambda),
            SystemSpec::General(g) => (g.p, g.q, g.d),
        }
    }

    pub fn phi(&self, s: f64) -> f64 {
        match self {
            SystemSpec::General(g) => (g.phi)(s),
            _ => s,
        }
    }

    pub fn phi_antiderivative(&self, s: f64) -> f64 {
        match self {
            SystemSpec::General(g) => (g.phi_antiderivative)(s),
            _ => s.ln(),
        }
    }

    /// `F(S) = H(S) / (q φ(S))`; the prey isocline `X = F(S)`.
    pub fn functional_ratio(&self, s: f64) -> f64 {
        match self {
            SystemSpec::LotkaVolterra { .. } => 1.0,
            SystemSpec::RosenzweigMacArthur { a, .. } => rm_h(s, *a),
            SystemSpec::General(g) => (g.h)(s) / (g.q * (g.phi)(s)),
        }
    }

    /// `F(S) - f` without the cancellation of forming `F(S)` first when `S` is tiny.
    pub fn functional_ratio_minus(&self, s: f64, f: f64) -> f64 {
        match self {
            SystemSpec::RosenzweigMacArthur { a, .. } => (a - f) + s * (1.0 - a - s),
            _ => self.functional_ratio(s) - f,
        }
    }

    /// Prey level where `φ(S) = d/p` (the predator isocline), if there is one.
    pub fn predator_isocline(&self) -> Option<f64> {
        match self {
            SystemSpec::LotkaVolterra { .. } => Some(1.0),
            SystemSpec::RosenzweigMacArthur { lambda, .. } => Some(*lambda),
            SystemSpec::General(g) => {
                let level = g.d / g.p;
                let mut hi = 1.0;
                while (g.phi)(hi) < level {
                    hi *= 2.0;
                    if hi > 1e300 {
                        return None;
                    }
                }
                let mut lo = hi;
                while (g.phi)(lo) >= level {
                    lo *= 0.5;
                    if lo < 1e-300 {
                        return Some(lo);
                    }
                }
                bisect(|s| (g.phi)(s) - level, lo, hi, 200).ok()
            }
        }
    }

    /// `(d ln s/dτ, d ln x/dτ)`.
    fn log_rates(&self, u: f64, v: f64) -> (f64, f64) {
        match self {
            SystemSpec::LotkaVolterra { alpha } => (1.0 - v.exp(), alpha * u.exp_m1()),
            SystemSpec::RosenzweigMacArthur { m, lambda, a } => {
                let s = u.exp();
                (rm_h(s, *a) - v.exp(), m * (s - lambda))
            }
            SystemSpec::General(g) => {
                let s = u.exp();
                let phi = (g.phi)(s);
                ((g.h)(s) / s - g.q * phi * v.exp() / s, g.p * phi - g.d)
            }
        }
    }

    /// `p S - d Φ(S)` at `S = e^u`, exact for the logarithmic `Φ` even when
    /// `e^u` underflows.
    fn prey_potential_log(&self, u: f64) -> f64 {
        let (p, _, d) = self.rates();
        match self {
            SystemSpec::General(g) => p * u.exp() - d * (g.phi_antiderivative)(u.exp()),
            _ => p * u.exp() - d * u,
        }
    }
}

/// A point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryState {
    pub tau: f64,
    pub s: f64,
    pub x: f64,
}

impl TrajectoryState {
    pub fn new(tau: f64, s: f64, x: f64) -> Self {
        TrajectoryState { tau, s, x }
    }

    pub fn at(s: f64, x: f64) -> Self {
        TrajectoryState { tau: 0.0, s, x }
    }

    fn check(&self) -> Result<()> {
        if !(self.s > 0.0) || !self.s.is_finite() {
            return Err(Error::domain("s", self.s, "(0, inf)"));
        }
        if !(self.x > 0.0) || !self.x.is_finite() {
            return Err(Error::domain("x", self.x, "(0, inf)"));
        }
        Ok(())
    }
}

/// `(ds/dτ, dx/dτ)`.
pub fn rhs(system: &SystemSpec, state: &TrajectoryState) -> Result<(f64, f64)> {
    state.check()?;
    let (s, x) = (state.s, state.x);
    Ok(match system {
        SystemSpec::LotkaVolterra { alpha } => ((1.0 - x) * s, alpha * x * (s - 1.0)),
        SystemSpec::RosenzweigMacArthur { m, lambda, a } => {
            ((rm_h(s, *a) - x) * s, m * (s - lambda) * x)
        }
        SystemSpec::General(g) => {
            let phi = (g.phi)(s);
            ((g.h)(s) - g.q * phi * x, (g.p * phi - g.d) * x)
        }
    })
}

/// `V = (x - ln x)/α + s - ln s`, conserved along Lotka-Volterra orbits.
pub fn lyapunov_v(system: &SystemSpec, state: &TrajectoryState) -> Result<f64> {
    let SystemSpec::LotkaVolterra { alpha } = system else {
        return Err(Error::Argument(
            "the conserved integral is defined for the Lotka-Volterra system only".into(),
        ));
    };
    state.check()?;
    Ok((state.x - state.x.ln()) / alpha + state.s - state.s.ln())
}

/// `V_F̄ = p S - d Φ(S) + q (X - F̄ ln X)`.
///
/// With `q = 1` this is the usual generalized integral; the factor `q` keeps
/// `dV/dt = q (pφ(S) - d)(F(S) - F̄)` valid for other `q`.
pub fn generalized_v(system: &SystemSpec, fbar: f64, state: &TrajectoryState) -> Result<f64> {
    if !(fbar > 0.0) || !fbar.is_finite() {
        return Err(Error::domain("Fbar", fbar, "(0, inf)"));
    }
    state.check()?;
    let (p, q, d) = system.rates();
    Ok(p * state.s - d * system.phi_antiderivative(state.s) + q * (state.x - fbar * state.x.ln()))
}

/// Time derivative of [`generalized_v`] along the flow.
pub fn generalized_v_rate(system: &SystemSpec, fbar: f64, state: &TrajectoryState) -> Result<f64> {
    if !(fbar > 0.0) || !fbar.is_finite() {
        return Err(Error::domain("Fbar", fbar, "(0, inf)"));
    }
    state.check()?;
    let (p, q, d) = system.rates();
    Ok(q * (p * system.phi(state.s) - d) * (system.functional_ratio(state.s) - fbar))
}

struct LogFlow<'a>(&'a SystemSpec);

impl OdeSystem<2> for LogFlow<'_> {
    fn rhs(&self, _t: f64, y: &[f64; 2], dydt: &mut [f64; 2]) {
        let (du, dv) = self.0.log_rates(y[0], y[1]);
        dydt[0] = du;
        dydt[1] = dv;
    }
}

/// A fixed prey or predator level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    Prey(f64),
    Predator(f64),
}

impl Level {
    pub fn value(&self) -> f64 {
        match *self {
            Level::Prey(v) | Level::Predator(v) => v,
        }
    }

    /// The level's coordinate of a state.
    pub fn coordinate(&self, state: &TrajectoryState) -> f64 {
        match self {
            Level::Prey(_) => state.s,
            Level::Predator(_) => state.x,
        }
    }
}

/// When to stop an integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCondition {
    pub level: Option<Level>,
    pub direction: Crossing,
    /// Counted crossings; leaving a start point that lies on the level does not count.
    pub occurrence: usize,
    pub t_max: f64,
}

impl StopCondition {
    pub fn time_limit(t_max: f64) -> Self {
        StopCondition {
            level: None,
            direction: Crossing::Either,
            occurrence: 1,
            t_max,
        }
    }

    /// The next intersection with the level after leaving the start point.
    pub fn next_crossing(level: Level) -> Self {
        StopCondition {
            level: Some(level),
            direction: Crossing::Either,
            occurrence: 1,
            t_max: DEFAULT_T_MAX,
        }
    }

    /// Return to the level in the direction the orbit left it: one full cycle
    /// when the start point lies on the level.
    pub fn full_cycle(level: Level) -> Self {
        StopCondition {
            occurrence: 2,
            ..StopCondition::next_crossing(level)
        }
    }

    pub fn with_t_max(self, t_max: f64) -> Self {
        StopCondition { t_max, ..self }
    }
}

/// A located level crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingEvent {
    pub state: TrajectoryState,
    pub level: Level,
    /// `|s - s₀|` or `|x - x₀|` at the reported state.
    pub residual: f64,
    /// The level coordinate was increasing through the crossing.
    pub rising: bool,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectoryState>,
    pub event: Option<CrossingEvent>,
    pub stop: StopReason,
    pub t_max: f64,
}

impl Trajectory {
    /// The event, or [`Error::TimeLimit`] if the integration ran out of time.
    pub fn require_event(&self) -> Result<CrossingEvent> {
        self.event.ok_or(Error::TimeLimit { t_max: self.t_max })
    }

    /// Samples strictly between the start and the final state.
    pub fn interior(&self) -> &[TrajectoryState] {
        if self.samples.len() < 2 {
            return &[];
        }
        &self.samples[1..self.samples.len() - 1]
    }
}

/// Integrate with the default tolerances (rtol 1e-10, atol 1e-12).
pub fn integrate(
    system: &SystemSpec,
    initial: TrajectoryState,
    stop: StopCondition,
) -> Result<Trajectory> {
    integrate_with(system, initial, stop, &Dopri5::default())
}

pub fn integrate_with(
    system: &SystemSpec,
    initial: TrajectoryState,
    stop: StopCondition,
    solver: &Dopri5,
) -> Result<Trajectory> {
    system.validate()?;
    initial.check()?;
    if !(stop.t_max > 0.0) {
        return Err(Error::domain("t_max", stop.t_max, "(0, inf]"));
    }
    if stop.occurrence == 0 {
        return Err(Error::Argument(
            "event occurrence must be at least 1".into(),
        ));
    }
    let y0 = [initial.s.ln(), initial.x.ln()];
    let t_end = initial.tau + stop.t_max;
    let flow = LogFlow(system);

    let solution = match stop.level {
        None => solver.integrate(
            &flow,
            initial.tau,
            y0,
            t_end,
            None::<&Event<fn(&[f64; 2]) -> f64>>,
        )?,
        Some(level) => {
            let value = level.value();
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::domain("level", value, "(0, inf)"));
            }
            let target = value.ln();
            let index = match level {
                Level::Prey(_) => 0,
                Level::Predator(_) => 1,
            };
            let event = Event {
                g: move |y: &[f64; 2]| y[index] - target,
                direction: stop.direction,
                occurrence: stop.occurrence,
                tolerance: 2.0 * f64::EPSILON * target.abs().max(1.0),
            };
            solver.integrate(&flow, initial.tau, y0, t_end, Some(&event))?
        }
    };

    let samples: Vec<TrajectoryState> = solution
        .t
        .iter()
        .zip(&solution.y)
        .map(|(&tau, y)| TrajectoryState::new(tau, y[0].exp(), y[1].exp()))
        .collect();
    if let Some(bad) = samples.iter().find(|st| !(st.s > 0.0 && st.x > 0.0)) {
        return Err(Error::NonFinite { tau: bad.tau });
    }
    let event = match (solution.event, stop.level) {
        (Some(hit), Some(level)) => {
            let state = *samples.last().expect("event state is recorded");
            Some(CrossingEvent {
                state,
                level,
                residual: (level.coordinate(&state) - level.value()).abs(),
                rising: hit.rising,
            })
        }
        _ => None,
    };
    Ok(Trajectory {
        samples,
        event,
        stop: solution.stop,
        t_max: stop.t_max,
    })
}

/// Trajectory samples as a CSV table, `tau,s,x` plus `V` for Lotka-Volterra.
pub fn trajectory_table(system: &SystemSpec, trajectory: &Trajectory) -> Result<Table> {
    let with_v = system.is_lotka_volterra();
    let mut table = if with_v {
        Table::new(["tau", "s", "x", "V"])
    } else {
        Table::new(["tau", "s", "x"])
    };
    for st in &trajectory.samples {
        let mut row = vec![st.tau, st.s, st.x];
        if with_v {
            row.push(lyapunov_v(system, st)?);
        }
        table.push_values(&row);
    }
    Ok(table)
}

/// Which biomass a Lotka-Volterra crossing estimate is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelKind {
    /// Estimate the prey value `s₁` where the orbit returns to the predator level `x₀`.
    Prey,
    /// Estimate the predator value `x₁` where the orbit returns to the prey level `s₀`.
    Predator,
}

/// Bracket for the second root of `v - ln v = v₀ - ln v₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LvIntersectionBounds {
    pub kind: LevelKind,
    pub lower: f64,
    pub upper: f64,
    /// `v e^{-v}`; the trivial bounds are `scale` and `e·scale`.
    pub scale: f64,
    pub z: Theorem1Bounds,
}

impl LvIntersectionBounds {
    /// The weaker upper estimate `z0·v e^{-v}`.
    pub fn z0_upper(&self) -> f64 {
        self.z.z0 * self.scale
    }

    pub fn trivial(&self) -> (f64, f64) {
        (self.scale, std::f64::consts::E * self.scale)
    }
}

pub fn lv_intersection_bounds(kind: LevelKind, start_value: f64) -> Result<LvIntersectionBounds> {
    if !(start_value > 1.0) {
        return Err(Error::domain("start value", start_value, "(1, inf)"));
    }
    let problem = ZProblem::new(start_value)?;
    let z = theorem1_bounds(problem.target)?;
    Ok(LvIntersectionBounds {
        kind,
        lower: z.z1 * problem.target,
        upper: z.z2 * problem.target,
        scale: problem.target,
        z,
    })
}

/// Integrated crossing value against its predicted bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectionResult {
    pub crossing_value: f64,
    pub predicted_lower: f64,
    pub predicted_upper: f64,
    pub level: f64,
    pub refinement_residual: f64,
}

impl IntersectionResult {
    pub fn contains(&self) -> bool {
        self.predicted_lower <= self.crossing_value && self.crossing_value <= self.predicted_upper
    }

    /// Smallest relative distance from the crossing to either end of the bracket
    /// (negative when outside).
    pub fn relative_margin(&self) -> f64 {
        ((self.crossing_value - self.predicted_lower) / self.crossing_value)
            .min((self.predicted_upper - self.crossing_value) / self.crossing_value)
    }
}

/// Outcome of a Lotka-Volterra crossing experiment.
#[derive(Debug, Clone)]
pub struct LvCrossing {
    pub result: IntersectionResult,
    pub bounds: LvIntersectionBounds,
    pub trajectory: Trajectory,
    /// Largest `|V - V₀|` over the samples.
    pub v_drift: f64,
}

/// Integrate Lotka-Volterra from `(s0, x0)` to the next intersection with the
/// level that fixes the other coordinate and compare with the bracket.
///
/// For [`LevelKind::Prey`] the level is `x = x0` and `s0 > 1` is required; for
/// [`LevelKind::Predator`] the level is `s = s0` and `x0 > 1` is required.
pub fn lv_crossing(alpha: f64, s0: f64, x0: f64, kind: LevelKind) -> Result<LvCrossing> {
    let system = SystemSpec::lotka_volterra(alpha)?;
    let (level, start_value) = match kind {
        LevelKind::Prey => (Level::Predator(x0), s0),
        LevelKind::Predator => (Level::Prey(s0), x0),
    };
    let bounds = lv_intersection_bounds(kind, start_value)?;
    let initial = TrajectoryState::at(s0, x0);
    let trajectory = integrate(&system, initial, StopCondition::next_crossing(level))?;
    let event = trajectory.require_event()?;
    let crossing_value = match kind {
        LevelKind::Prey => event.state.s,
        LevelKind::Predator => event.state.x,
    };
    let v_drift = max_v_drift(&system, &trajectory)?;
    Ok(LvCrossing {
        result: IntersectionResult {
            crossing_value,
            predicted_lower: bounds.lower,
            predicted_upper: bounds.upper,
            level: level.value(),
            refinement_residual: event.residual,
        },
        bounds,
        trajectory,
        v_drift,
    })
}

/// Largest deviation of the Lotka-Volterra integral from its initial value.
pub fn max_v_drift(system: &SystemSpec, trajectory: &Trajectory) -> Result<f64> {
    let v0 = lyapunov_v(system, &trajectory.samples[0])?;
    let mut worst: f64 = 0.0;
    for st in &trajectory.samples {
        worst = worst.max((lyapunov_v(system, st)? - v0).abs());
    }
    Ok(worst)
}

/// The ratio chain for `X₁/X₀` with `y̲ = X₀/F̲`, `ȳ = X₀/F̄`.
///
/// Both readings of the outer upper links are kept: with `e^{-ȳ}` (the one that
/// follows from the first-order bounds) and with `e^{+ȳ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioChain {
    /// `e^{-y̲}`
    pub exp_low: f64,
    /// `z1(y̲) e^{-y̲}`
    pub z1_low: f64,
    /// `z2(ȳ) e^{-ȳ}`
    pub z2_up: f64,
    /// `z0(ȳ) e^{-ȳ}`
    pub z0_up: f64,
    /// `e^{1 - ȳ}`
    pub e_up: f64,
    /// `z0(ȳ) e^{+ȳ}`
    pub z0_up_pos: f64,
    /// `e^{1 + ȳ}`
    pub e_up_pos: f64,
}

/// Which links of the ratio chain hold for an observed ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RatioCheck {
    /// `e^{-y̲} < z1 e^{-y̲} < ratio < z2 e^{-ȳ}`
    pub inner: bool,
    /// `z2 e^{-ȳ} < z0 e^{-ȳ} < e^{1-ȳ}`
    pub negative_exponent: bool,
    /// `z2 e^{-ȳ} < z0 e^{ȳ} < e^{1+ȳ}`
    pub positive_exponent: bool,
}

impl RatioChain {
    pub fn check(&self, ratio: f64) -> RatioCheck {
        RatioCheck {
            inner: self.exp_low < self.z1_low && self.z1_low < ratio && ratio < self.z2_up,
            negative_exponent: self.z2_up < self.z0_up && self.z0_up < self.e_up,
            positive_exponent: self.z2_up < self.z0_up_pos && self.z0_up_pos < self.e_up_pos,
        }
    }
}

/// Bracket for the return value `X₁` of a general predator-prey trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem3Interval {
    pub lower: f64,
    pub upper: f64,
    pub ratio: RatioChain,
}

/// `-F W(-(X₀/F) e^{-X₀/F})` for `F = F̲` and `F = F̄`, plus the ratio chain.
pub fn theorem3_interval(x0: f64, f_low: f64, f_up: f64) -> Result<Theorem3Interval> {
    if !(f_low > 0.0) || !f_low.is_finite() {
        return Err(Error::domain("F_low", f_low, "(0, F_up]"));
    }
    if !(f_up >= f_low) || !f_up.is_finite() {
        return Err(Error::domain("F_up", f_up, "[F_low, X0)"));
    }
    if !(x0 > f_up) || !x0.is_finite() {
        return Err(Error::domain("X0", x0, "(F_up, inf)"));
    }
    let y_low = x0 / f_low;
    let y_up = x0 / f_up;
    let lower = -f_low * w_of_minus_y_exp(y_low)?;
    let upper = -f_up * w_of_minus_y_exp(y_up)?;

    let set = BoundSet::standard();
    let z_low = set.theorem1(ZProblem::new(y_low)?.target)?;
    let z_up = set.theorem1(ZProblem::new(y_up)?.target)?;
    let exp_low = (-y_low).exp();
    let exp_up = (-y_up).exp();
    Ok(Theorem3Interval {
        lower,
        upper,
        ratio: RatioChain {
            exp_low,
            z1_low: z_low.z1 * exp_low,
            z2_up: z_up.z2 * exp_up,
            z0_up: z_up.z0 * exp_up,
            e_up: (1.0 - y_up).exp(),
            z0_up_pos: z_up.z0 * y_up.exp(),
            e_up_pos: (1.0 + y_up).exp(),
        },
    })
}

/// Bracket for the minimal predator biomass of a scaled Rosenzweig-MacArthur
/// orbit through `(λ, x_max)`: `theorem3_interval(x_max, a, h(λ))`.
pub fn rm_min_predator_interval(x_max: f64, lambda: f64, a: f64) -> Result<Theorem3Interval> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::domain("lambda", lambda, "(0, 1)"));
    }
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::domain("a", a, "(0, inf)"));
    }
    let h_lambda = rm_h(lambda, a);
    if !(h_lambda > a) {
        return Err(Error::Precondition(format!(
            "h(lambda) = {h_lambda} does not exceed a = {a} (needs lambda + a < 1)"
        )));
    }
    if !(x_max > h_lambda) {
        return Err(Error::Precondition(format!(
            "x_max = {x_max} must exceed h(lambda) = {h_lambda}"
        )));
    }
    theorem3_interval(x_max, a, h_lambda)
}

/// Pointwise check of `F̲ < F(S) < F̄` and `φ(S) < d/p` over interior samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcCheck {
    pub samples: usize,
    /// `min (F(S) - F̲)`
    pub low_margin: f64,
    /// `min (F̄ - F(S))`
    pub up_margin: f64,
    /// `min (d/p - φ(S))`
    pub isocline_margin: f64,
    /// Sample index and description of the first violation.
    pub first_violation: Option<(usize, &'static str)>,
}

impl ArcCheck {
    pub fn passed(&self) -> bool {
        self.samples > 0 && self.first_violation.is_none()
    }
}

pub fn check_arc(
    system: &SystemSpec,
    f_low: f64,
    f_up: f64,
    samples: &[TrajectoryState],
) -> ArcCheck {
    let (p, _, d) = system.rates();
    let threshold = d / p;
    let mut check = ArcCheck {
        samples: samples.len(),
        low_margin: f64::INFINITY,
        up_margin: f64::INFINITY,
        isocline_margin: f64::INFINITY,
        first_violation: None,
    };
    for (i, st) in samples.iter().enumerate() {
        let lo = system.functional_ratio_minus(st.s, f_low);
        let up = -system.functional_ratio_minus(st.s, f_up);
        let iso = threshold - system.phi(st.s);
        check.low_margin = check.low_margin.min(lo);
        check.up_margin = check.up_margin.min(up);
        check.isocline_margin = check.isocline_margin.min(iso);
        if check.first_violation.is_none() {
            if !(lo > 0.0) {
                check.first_violation = Some((i, "F(S) <= F_low"));
            } else if !(up > 0.0) {
                check.first_violation = Some((i, "F(S) >= F_up"));
            } else if !(iso > 0.0) {
                check.first_violation = Some((i, "phi(S) >= d/p"));
            }
        }
    }
    check
}

/// Outcome of integrating one arc below the predator isocline.
#[derive(Debug, Clone)]
pub struct ReturnStudy {
    pub result: IntersectionResult,
    pub interval: Theorem3Interval,
    pub arc: ArcCheck,
    pub trajectory: Trajectory,
}

impl ReturnStudy {
    pub fn ratio_check(&self) -> RatioCheck {
        let x0 = self.trajectory.samples[0].x;
        self.interval.ratio.check(self.result.crossing_value / x0)
    }
}

/// Integrate from `(s0, x0)` to the next intersection with `S = s0` and check
/// the bracket together with its hypotheses along the computed arc.
pub fn return_study(
    system: &SystemSpec,
    s0: f64,
    x0: f64,
    f_low: f64,
    f_up: f64,
    t_max: f64,
) -> Result<ReturnStudy> {
    let (p, _, d) = system.rates();
    // a start on the isocline itself is allowed; d/p carries rounding
    if !(system.phi(s0) <= d / p * (1.0 + 4.0 * f64::EPSILON)) {
        return Err(Error::Precondition(format!(
            "start prey {s0} lies above the predator isocline"
        )));
    }
    if !(x0 > system.functional_ratio(s0)) {
        return Err(Error::Precondition(format!(
            "start predator {x0} does not exceed F(S0) = {}",
            system.functional_ratio(s0)
        )));
    }
    let interval = theorem3_interval(x0, f_low, f_up)?;
    let trajectory = integrate(
        system,
        TrajectoryState::at(s0, x0),
        StopCondition::next_crossing(Level::Prey(s0)).with_t_max(t_max),
    )?;
    let event = trajectory.require_event()?;
    let arc = check_arc(system, f_low, f_up, trajectory.interior());
    Ok(ReturnStudy {
        result: IntersectionResult {
            crossing_value: event.state.x,
            predicted_lower: interval.lower,
            predicted_upper: interval.upper,
            level: s0,
            refinement_residual: event.residual,
        },
        interval,
        arc,
        trajectory,
    })
}

/// [`return_study`] for the scaled Rosenzweig-MacArthur system from `(λ*, x0)`
/// with `F̲ = a`, `F̄ = h(λ*)`. Pass `lambda_star = λ` for the orbit through
/// the predator maximum.
pub fn rm_return_study(
    m: f64,
    lambda: f64,
    a: f64,
    x0: f64,
    lambda_star: f64,
) -> Result<ReturnStudy> {
    let system = SystemSpec::rosenzweig_macarthur(m, lambda, a)?;
    if !(lambda_star > 0.0 && lambda_star <= lambda) {
        return Err(Error::domain("lambda_star", lambda_star, "(0, lambda]"));
    }
    let f_up = rm_h(lambda_star, a);
    if !(f_up > a) {
        return Err(Error::Precondition(format!(
            "h({lambda_star}) = {f_up} does not exceed a = {a}"
        )));
    }
    if lambda_star >= (1.0 - a) / 2.0 {
        return Err(Error::Precondition(format!(
            "h is not increasing up to {lambda_star} (needs 2 lambda* + a < 1)"
        )));
    }
    return_study(&system, lambda_star, x0, a, f_up, DEFAULT_T_MAX)
}

/// Prey value `S(X)` on the level set `V_F(X, S) = V_F(X₀, S₀)` below the
/// predator isocline, or `None` if that branch does not reach `X`.
pub fn barrier_prey(
    system: &SystemSpec,
    f: f64,
    start: &TrajectoryState,
    x: f64,
) -> Result<Option<f64>> {
    let v0 = generalized_v(system, f, start)?;
    if !(x > 0.0) {
        return Err(Error::domain("x", x, "(0, inf)"));
    }
    let (_, q, _) = system.rates();
    let target = v0 - q * (x - f * x.ln());
    let u_hi = match system.predator_isocline() {
        Some(s_star) => s_star.ln(),
        None => 700.0,
    };
    let u_lo = match system {
        SystemSpec::General(_) => -700.0,
        _ => -1e6,
    };
    let g = |u: f64| system.prey_potential_log(u) - target;
    // g decreases in u below the isocline; at the turning point the level set
    // touches the isocline, so allow rounding there
    let at_top = g(u_hi);
    if at_top >= 0.0 {
        let touch = 8.0 * f64::EPSILON * (target.abs() + 1.0);
        return Ok((at_top <= touch).then(|| u_hi.exp()));
    }
    if !(g(u_lo) > 0.0) {
        return Ok(None);
    }
    let u = bisect(g, u_lo, u_hi, 400)?;
    Ok(Some(u.exp()))
}

/// Physical Rosenzweig-MacArthur parameters with `φ(S) = S/(S + A)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RMPhysicalParams {
    pub r: f64,
    pub k: f64,
    pub a: f64,
    pub p: f64,
    pub q: f64,
    pub d: f64,
}

/// Dimensionless `(m, λ, a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmParams {
    pub m: f64,
    pub lambda: f64,
    pub a: f64,
}

impl RMPhysicalParams {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r", self.r),
            ("K", self.k),
            ("A", self.a),
            ("p", self.p),
            ("q", self.q),
            ("d", self.d),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(name, v, "(0, inf)"));
            }
        }
        if !(self.p > self.d) {
            return Err(Error::domain("p", self.p, "(d, inf)"));
        }
        Ok(())
    }

    /// The dimensional system with `H(S) = rS(1 - S/K)` and `φ(S) = S/(S + A)`.
    pub fn general_system(&self) -> Result<GeneralSystem> {
        self.validate()?;
        let Self { r, k, a, p, q, d } = *self;
        GeneralSystem::new(
            Arc::new(move |s| r * s * (1.0 - s / k)),
            Arc::new(move |s| s / (s + a)),
            Arc::new(move |s| s + a * s.ln()),
            (p, q, d),
            (1e-3 * k, 10.0 * k),
        )
    }
}

pub fn rm_nondimensionalize(phys: &RMPhysicalParams) -> Result<RmParams> {
    phys.validate()?;
    let growth = phys.p - phys.d;
    Ok(RmParams {
        m: growth / phys.r,
        lambda: phys.d * phys.a / (growth * phys.k),
        a: phys.a / phys.k,
    })
}

/// Random Lotka-Volterra start points `(s₀, x₀)` with `s₀ ∈ (1, 5]`, `x₀ ∈ [0.25, 4)`.
pub fn random_lv_starts(seed: u64, n: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let s0 = 5.0 - 4.0 * rng.gen::<f64>();
            let x0 = rng.gen_range(0.25..4.0);
            (s0, x0)
        })
        .collect()
}

/// One random Rosenzweig-MacArthur case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmCase {
    pub m: f64,
    pub lambda: f64,
    pub a: f64,
    pub x_max: f64,
}

/// Random cases with `λ ∈ (0.05, 0.45)`, `a ∈ (0.02, 0.3)`, `2λ + a < 1`,
/// `x_max ∈ (1.1 h(λ), 5]` and `m ∈ [0.5, 2]`.
pub fn random_rm_cases(seed: u64, n: usize) -> Vec<RmCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let lambda = rng.gen_range(0.05..0.45);
        let a = rng.gen_range(0.02..0.3);
        if 2.0 * lambda + a >= 1.0 || lambda == 0.05 || a == 0.02 {
            continue;
        }
        let lo = 1.1 * rm_h(lambda, a);
        let x_max = 5.0 - (5.0 - lo) * rng.gen::<f64>();
        let m = rng.gen_range(0.5..=2.0);
        if x_max > lo {
            out.push(RmCase {
                m,
                lambda,
                a,
                x_max,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::E;

    // s₁ for s₀ = 2 (mpmath, 30 digits)
    const S1_OF_2: f64 = 0.406_375_739_959_959_9;

    fn lv1() -> SystemSpec {
        SystemSpec::lotka_volterra(1.0).unwrap()
    }

    #[test]
    fn rhs_examples() {
        assert_eq!(
            rhs(&lv1(), &TrajectoryState::at(1.0, 1.0)).unwrap(),
            (0.0, 0.0)
        );
        assert_eq!(
            rhs(&lv1(), &TrajectoryState::at(2.0, 2.0)).unwrap(),
            (-2.0, 2.0)
        );
        let rm = SystemSpec::rosenzweig_macarthur(1.3, 0.3, 0.1).unwrap();
        let (ds, dx) = rhs(&rm, &TrajectoryState::at(0.3, rm_h(0.3, 0.1))).unwrap();
        assert_eq!((ds, dx), (0.0, 0.0));
        assert!(rhs(&lv1(), &TrajectoryState::at(0.0, 1.0)).is_err());
        assert!(rhs(&lv1(), &TrajectoryState::at(1.0, -1.0)).is_err());
    }

    #[test]
    fn ratio_margin_survives_tiny_prey() {
        let rm = SystemSpec::rosenzweig_macarthur(1.0, 0.3, 0.1).unwrap();
        assert_eq!(rm.functional_ratio(1e-20), 0.1);
        assert!(rm.functional_ratio_minus(1e-20, 0.1) > 0.0);
        let v = rm.functional_ratio_minus(0.2, rm_h(0.3, 0.1));
        assert!((v - (rm_h(0.2, 0.1) - rm_h(0.3, 0.1))).abs() < 1e-16);
    }

    #[test]
    fn constructor_domains() {
        assert!(SystemSpec::lotka_volterra(0.0).is_err());
        assert!(SystemSpec::rosenzweig_macarthur(1.0, 1.0, 0.1).is_err());
        assert!(SystemSpec::rosenzweig_macarthur(1.0, 0.3, 0.0).is_err());
        assert!(SystemSpec::rosenzweig_macarthur(-1.0, 0.3, 0.1).is_err());
    }

    #[test]
    fn lyapunov_examples() {
        assert_eq!(
            lyapunov_v(&lv1(), &TrajectoryState::at(1.0, 1.0)).unwrap(),
            2.0
        );
        let lv2 = SystemSpec::lotka_volterra(2.0).unwrap();
        assert_eq!(
            lyapunov_v(&lv2, &TrajectoryState::at(1.0, 1.0)).unwrap(),
            1.5
        );
        assert_relative_eq!(
            lyapunov_v(&lv1(), &TrajectoryState::at(2.0, 2.0)).unwrap(),
            2.0 * (2.0 - 2f64.ln()),
            max_relative = 1e-15
        );
        let rm = SystemSpec::rosenzweig_macarthur(1.0, 0.3, 0.1).unwrap();
        assert!(lyapunov_v(&rm, &TrajectoryState::at(1.0, 1.0)).is_err());
    }

    #[test]
    fn generalized_v_examples() {
        let m = 1.7;
        let rm = SystemSpec::rosenzweig_macarthur(m, 0.3, 0.1).unwrap();
        let st = TrajectoryState::at(1.0, 1.0);
        assert_eq!(generalized_v(&rm, 0.42, &st).unwrap(), m + 1.0);
        let on_isocline = TrajectoryState::at(0.3, 0.8);
        assert_eq!(generalized_v_rate(&rm, 0.42, &on_isocline).unwrap(), 0.0);
        assert!(generalized_v(&rm, 0.0, &st).is_err());
    }

    #[test]
    fn generalized_v_rate_matches_chain_rule() {
        let phys = RMPhysicalParams {
            r: 1.3,
            k: 2.0,
            a: 0.4,
            p: 2.5,
            q: 0.7,
            d: 0.9,
        };
        let sys = SystemSpec::General(phys.general_system().unwrap());
        let rm = SystemSpec::rosenzweig_macarthur(1.2, 0.3, 0.1).unwrap();
        for system in [&sys, &rm, &lv1()] {
            for &(s, x, f) in &[(0.3, 1.2, 0.5), (1.1, 0.4, 0.2), (0.05, 2.0, 1.5)] {
                let st = TrajectoryState::at(s, x);
                let (ds, dx) = rhs(system, &st).unwrap();
                let hs = 1e-6 * s;
                let hx = 1e-6 * x;
                let dvs = (generalized_v(system, f, &TrajectoryState::at(s + hs, x)).unwrap()
                    - generalized_v(system, f, &TrajectoryState::at(s - hs, x)).unwrap())
                    / (2.0 * hs);
                let dvx = (generalized_v(system, f, &TrajectoryState::at(s, x + hx)).unwrap()
                    - generalized_v(system, f, &TrajectoryState::at(s, x - hx)).unwrap())
                    / (2.0 * hx);
                let rate = generalized_v_rate(system, f, &st).unwrap();
                assert!(
                    (dvs * ds + dvx * dx - rate).abs() < 1e-6 * (1.0 + rate.abs()),
                    "{system:?} at {st:?}"
                );
            }
        }
    }

    #[test]
    fn general_system_checks_phi() {
        let bad_phi = GeneralSystem::new(
            Arc::new(|s| s),
            Arc::new(|s| 1.0 / s),
            Arc::new(|s| 0.5 * s * s),
            (1.0, 1.0, 1.0),
            (0.1, 10.0),
        );
        assert!(bad_phi.is_err());
        let bad_antiderivative = GeneralSystem::new(
            Arc::new(|s| s),
            Arc::new(|s| s),
            Arc::new(|s| 2.0 * s.ln()),
            (1.0, 1.0, 1.0),
            (0.1, 10.0),
        );
        assert!(bad_antiderivative.is_err());
    }

    #[test]
    fn equilibrium_runs_to_time_limit() {
        let traj = integrate(
            &lv1(),
            TrajectoryState::at(1.0, 1.0),
            StopCondition::next_crossing(Level::Prey(2.0)).with_t_max(50.0),
        )
        .unwrap();
        assert_eq!(traj.stop, StopReason::TimeLimit);
        assert!(matches!(traj.require_event(), Err(Error::TimeLimit { .. })));
        assert!(traj.samples.iter().all(|st| st.s == 1.0 && st.x == 1.0));
        assert_eq!(traj.samples.last().unwrap().tau, 50.0);
    }

    #[test]
    fn full_cycle_conserves_v() {
        let traj = integrate(
            &lv1(),
            TrajectoryState::at(2.0, 2.0),
            StopCondition::full_cycle(Level::Prey(2.0)),
        )
        .unwrap();
        let ev = traj.require_event().unwrap();
        assert!(!ev.rising, "returns in the departure direction");
        assert!(ev.residual < 1e-10);
        assert!((ev.state.x - 2.0).abs() < 1e-7);
        assert!(max_v_drift(&lv1(), &traj).unwrap() < 1e-8);
    }

    #[test]
    fn figure_one_crossings() {
        let left = lv_crossing(1.0, 2.0, 2.0, LevelKind::Prey).unwrap();
        assert!(left.result.contains());
        assert!((left.result.crossing_value - S1_OF_2).abs() < 1e-8);
        assert!(left.result.refinement_residual < 1e-10);
        assert!(left.v_drift < 1e-8);

        let right = lv_crossing(1.0, 0.5, 2.0, LevelKind::Predator).unwrap();
        assert!(right.result.contains());
        assert!((right.result.crossing_value - S1_OF_2).abs() < 1e-8);
    }

    #[test]
    fn lv_bounds_limits_and_domain() {
        // the upper end degenerates to 1; the lower end tends to z1(1/e)/e < 1
        let b = lv_intersection_bounds(LevelKind::Prey, 1.0 + 1e-6).unwrap();
        assert!((b.upper - 1.0).abs() < 1e-5, "{b:?}");
        let z1 = BoundSet::standard().z1;
        let lim = bisect(|z| z1.value(z) - z / E, 1.5, E - 1e-9, 200).unwrap() / E;
        assert!((b.lower - lim).abs() < 1e-5 && lim < 0.9, "{b:?} vs {lim}");
        assert!(lv_intersection_bounds(LevelKind::Prey, 1.0).is_err());
        assert!(lv_intersection_bounds(LevelKind::Predator, 0.5).is_err());
        let b = lv_intersection_bounds(LevelKind::Prey, 2.0).unwrap();
        assert!(b.lower < S1_OF_2 && S1_OF_2 < b.upper && b.upper < b.z0_upper());
        let (lo, hi) = b.trivial();
        assert!(lo < b.lower && b.z0_upper() < hi);
    }

    #[test]
    fn theorem3_degenerate_interval_is_exact() {
        let t = theorem3_interval(2.0, 0.5, 0.5).unwrap();
        assert_eq!(t.lower, t.upper);
        let exact = crate::bounds::scaled_small_root(0.5, 2.0).unwrap();
        assert_relative_eq!(t.lower, exact, max_relative = 1e-13);
    }

    #[test]
    fn theorem3_domain() {
        assert!(theorem3_interval(0.4, 0.1, 0.5).is_err());
        assert!(theorem3_interval(2.0, 0.6, 0.5).is_err());
        assert!(theorem3_interval(2.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn theorem3_ratio_chain_readings() {
        let t = theorem3_interval(2.0, 0.1, 0.5).unwrap();
        assert!(t.lower < t.upper);
        let mid = 0.5 * (t.lower + t.upper) / 2.0;
        let check = t.ratio.check(mid);
        assert!(check.inner && check.negative_exponent && check.positive_exponent);
    }

    #[test]
    fn rm_interval_preconditions() {
        assert!(matches!(
            rm_min_predator_interval(0.1, 0.3, 0.1),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            rm_min_predator_interval(1.0, 0.6, 0.5),
            Err(Error::Precondition(_))
        ));
        assert!(rm_min_predator_interval(1.0, 0.0, 0.1).is_err());
        assert!(rm_min_predator_interval(1.0, 0.3, -0.1).is_err());
    }

    #[test]
    fn rm_interval_tightens_as_lambda_shrinks() {
        let a = 0.1;
        let wide = rm_min_predator_interval(1.0, 0.3, a).unwrap();
        let narrow = rm_min_predator_interval(1.0, 1e-6, a).unwrap();
        assert!(narrow.upper - narrow.lower < 1e-4 * (wide.upper - wide.lower));
        let exact = crate::bounds::scaled_small_root(a, 1.0).unwrap();
        assert!((narrow.upper - exact).abs() < 1e-4 * exact);
    }

    #[test]
    fn rm_reference_case() {
        let study = rm_return_study(1.0, 0.3, 0.1, 1.0, 0.3).unwrap();
        assert!(study.arc.passed(), "{:?}", study.arc);
        assert!(study.result.contains(), "{:?}", study.result);
        assert!(study.result.crossing_value < 1.0);
        assert!(study.result.refinement_residual < 1e-10);
        let check = study.ratio_check();
        assert!(check.inner && check.negative_exponent);
    }

    #[test]
    fn lambda_star_nests() {
        let full = rm_min_predator_interval(1.0, 0.3, 0.1).unwrap();
        let half = rm_min_predator_interval(1.0, 0.15, 0.1).unwrap();
        assert!(full.lower == half.lower && half.upper < full.upper);
        let study = rm_return_study(1.0, 0.3, 0.1, 1.0, 0.15).unwrap();
        assert!(study.arc.passed() && study.result.contains());
    }

    #[test]
    fn barriers_enclose_the_arc() {
        let study = rm_return_study(1.0, 0.3, 0.1, 1.0, 0.3).unwrap();
        let system = SystemSpec::rosenzweig_macarthur(1.0, 0.3, 0.1).unwrap();
        let start = study.trajectory.samples[0];
        let mut checked = 0;
        for st in study.trajectory.interior() {
            let lo = barrier_prey(&system, 0.1, &start, st.x).unwrap();
            let hi = barrier_prey(&system, rm_h(0.3, 0.1), &start, st.x).unwrap();
            if let (Some(lo), Some(hi)) = (lo, hi) {
                assert!(
                    lo <= st.s * (1.0 + 1e-9) && st.s <= hi * (1.0 + 1e-9),
                    "{lo} {st:?} {hi}"
                );
                checked += 1;
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn v_monotone_along_rm_arc() {
        let study = rm_return_study(1.0, 0.3, 0.1, 1.0, 0.3).unwrap();
        let system = SystemSpec::rosenzweig_macarthur(1.0, 0.3, 0.1).unwrap();
        let fbar = rm_h(0.3, 0.1);
        let pts = &study.trajectory.samples;
        for w in pts.windows(2) {
            let up0 = generalized_v(&system, fbar, &w[0]).unwrap();
            let up1 = generalized_v(&system, fbar, &w[1]).unwrap();
            let lo0 = generalized_v(&system, 0.1, &w[0]).unwrap();
            let lo1 = generalized_v(&system, 0.1, &w[1]).unwrap();
            assert!(up1 >= up0 - 1e-9 && lo1 <= lo0 + 1e-9);
        }
    }

    #[test]
    fn nondimensionalize_examples() {
        let phys = RMPhysicalParams {
            r: 1.0,
            k: 1.0,
            a: 0.1,
            p: 2.0,
            q: 1.0,
            d: 1.0,
        };
        let g = rm_nondimensionalize(&phys).unwrap();
        assert_relative_eq!(g.m, 1.0);
        assert_relative_eq!(g.lambda, 0.1, max_relative = 1e-15);
        assert_relative_eq!(g.a, 0.1, max_relative = 1e-15);

        let doubled = rm_nondimensionalize(&RMPhysicalParams { k: 2.0, ..phys }).unwrap();
        assert_relative_eq!(doubled.a, 0.5 * g.a, max_relative = 1e-15);
        assert_relative_eq!(doubled.lambda, 0.5 * g.lambda, max_relative = 1e-15);
        assert_eq!(doubled.m, g.m);

        assert!(rm_nondimensionalize(&RMPhysicalParams { d: 2.0, ..phys }).is_err());
    }

    #[test]
    fn random_cases_respect_ranges() {
        for c in random_rm_cases(DEFAULT_SEED, 200) {
            assert!(c.lambda > 0.05 && c.lambda < 0.45 && c.a > 0.02 && c.a < 0.3);
            assert!(2.0 * c.lambda + c.a < 1.0);
            assert!(c.x_max > 1.1 * rm_h(c.lambda, c.a) && c.x_max <= 5.0);
            assert!((0.5..=2.0).contains(&c.m));
        }
        assert_eq!(random_rm_cases(7, 5), random_rm_cases(7, 5));
        for (s0, x0) in random_lv_starts(DEFAULT_SEED, 200) {
            assert!(s0 > 1.0 && s0 <= 5.0 && (0.25..4.0).contains(&x0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn nondimensional_round_trip(
            r in 0.1f64..10.0, k in 0.1f64..10.0, a in 0.01f64..10.0,
            d in 0.1f64..5.0, extra in 0.01f64..5.0, q in 0.1f64..5.0,
        ) {
            let phys = RMPhysicalParams { r, k, a, p: d + extra, q, d };
            let g = rm_nondimensionalize(&phys).unwrap();
            let lhs = g.lambda * (phys.p - phys.d) * phys.k;
            prop_assert!((lhs - d * a).abs() <= 1e-12 * (d * a));
        }

        // The dimensional flow, rescaled by dτ/dt = rK/(A + S), is the scaled flow.
        #[test]
        fn dimensional_flow_maps_to_scaled_flow(
            r in 0.2f64..5.0, k in 0.2f64..5.0, a in 0.05f64..2.0,
            d in 0.1f64..2.0, extra in 0.1f64..3.0, q in 0.2f64..3.0,
            s_frac in 0.01f64..2.0, xs in 0.01f64..3.0,
        ) {
            let phys = RMPhysicalParams { r, k, a, p: d + extra, q, d };
            let g = rm_nondimensionalize(&phys).unwrap();
            prop_assume!(g.lambda < 1.0);
            let general = SystemSpec::General(phys.general_system().unwrap());
            let scaled = SystemSpec::rosenzweig_macarthur(g.m, g.lambda, g.a).unwrap();
            let big_s = s_frac * k;
            let big_x = xs * r * k / q;
            let (dsdt, dxdt) = rhs(&general, &TrajectoryState::at(big_s, big_x)).unwrap();
            let dt_dtau = (a + big_s) / (r * k);
            let (ds, dx) = rhs(&scaled, &TrajectoryState::at(s_frac, xs)).unwrap();
            prop_assert!((dsdt / k * dt_dtau - ds).abs() <= 1e-12 * (1.0 + ds.abs()));
            prop_assert!((dxdt * q / (r * k) * dt_dtau - dx).abs() <= 1e-12 * (1.0 + dx.abs()));
        }

        #[test]
        fn lv_crossing_contained(s0 in 1.05f64..5.0, x0 in 0.3f64..3.5) {
            let c = lv_crossing(1.0, s0, x0, LevelKind::Prey).unwrap();
            prop_assert!(c.result.contains(), "{:?}", c.result);
            prop_assert!(c.result.refinement_residual < 1e-10);
        }

        #[test]
        fn lv_bounds_are_ordered(v in 1.001f64..100.0) {
            let b = lv_intersection_bounds(LevelKind::Predator, v).unwrap();
            let (lo, hi) = b.trivial();
            prop_assert!(lo <= b.lower && b.lower <= b.upper && b.upper <= b.z0_upper() && b.z0_upper() <= hi);
        }

        #[test]
        fn theorem3_interval_ordered(x0 in 0.5f64..5.0, lo_frac in 0.05f64..0.9, up_frac in 0.0f64..1.0) {
            let f_low = lo_frac * x0 * 0.9;
            let f_up = f_low + up_frac * (0.95 * x0 - f_low);
            let t = theorem3_interval(x0, f_low, f_up).unwrap();
            prop_assert!(t.lower <= t.upper);
            prop_assert!(t.ratio.exp_low <= t.ratio.z1_low && t.ratio.z2_up <= t.ratio.z0_up && t.ratio.z0_up <= t.ratio.e_up);
        }
    }
}
