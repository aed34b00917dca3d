//! The `lvb` command line: CSV tables, trajectory export, figure data and the
//! verification report.

use std::f64::consts::E;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::{
    exact_small_root, side_residual, BoundSet, LogSide, PadeBound, ZProblem, RESIDUAL_TOL,
};
use crate::csv::Table;
use crate::lambert::{
    corollary1_bounds_with, corollary2_bounds_with, hh08_default, lambert_w, s09_chain,
    taylor_coefficient, taylor_w, w_of_minus_y_exp,
};
use crate::trajectories::{
    barrier_prey, generalized_v, integrate, lv_crossing, max_v_drift, random_lv_starts,
    random_rm_cases, return_study, rm_h, rm_return_study, trajectory_table, Level, LevelKind,
    StopCondition, SystemSpec, TrajectoryState, DEFAULT_SEED, DEFAULT_T_MAX,
};
use crate::{Error, Result};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_VERIFY: u8 = 2;
pub const EXIT_INTEGRATION: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "lvb",
    version,
    about = "Bounds for x - ln x = y - ln y, Lambert W and predator-prey trajectories"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Seed for randomized suites.
    #[arg(long, env = "LVB_SEED", default_value_t = DEFAULT_SEED, global = true)]
    pub seed: u64,
    /// Output file (bounds, lambert, simulate) or directory (figure).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact root and all bounds on a y grid.
    Bounds(GridArgs),
    /// Lambert W and its estimates on an X grid.
    Lambert(GridArgs),
    /// Integrate a predator-prey system and export the trajectory.
    Simulate(SimArgs),
    /// Run every invariant suite and print a report.
    Verify(VerifyArgs),
    /// Write the data behind a figure, one CSV per panel.
    Figure(FigureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub grid_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid_max: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub grid_count: usize,
    #[arg(long, value_enum)]
    pub grid_spacing: Option<Spacing>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemKind {
    Lv,
    Rm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StopKind {
    /// Run until `--t-max`.
    Time,
    /// Next intersection with the level through the start point.
    Next,
    /// Return to the level in the departure direction.
    Cycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Prey,
    Predator,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long, value_enum, default_value_t = SystemKind::Lv)]
    pub system: SystemKind,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub m: f64,
    #[arg(long, default_value_t = 0.3)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    pub a: f64,
    #[arg(long, default_value_t = 2.0)]
    pub s0: f64,
    #[arg(long, default_value_t = 2.0)]
    pub x0: f64,
    /// Defaults to `cycle` for Lotka-Volterra and `next` otherwise.
    #[arg(long, value_enum)]
    pub stop: Option<StopKind>,
    /// Level through the start point used by the stop event.
    #[arg(long, value_enum, default_value_t = LevelArg::Prey)]
    pub level: LevelArg,
    #[arg(long, default_value_t = DEFAULT_T_MAX)]
    pub t_max: f64,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Negative control: perturb one approximant so that its chain breaks.
    #[arg(long, hide = true)]
    pub corrupt_coefficient: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FigureArgs {
    #[arg(long)]
    pub figure: u32,
}

/// Evaluation grid with at least two points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Grid {
    pub fn new(min: f64, max: f64, count: usize, spacing: Spacing) -> Result<Grid> {
        if count < 2 {
            return Err(Error::Argument(format!(
                "grid count must be at least 2, got {count}"
            )));
        }
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::Argument(format!(
                "grid needs min < max, got [{min}, {max}]"
            )));
        }
        if spacing == Spacing::Log && !(min > 0.0) {
            return Err(Error::Argument(format!(
                "log grid needs min > 0, got {min}"
            )));
        }
        Ok(Grid {
            min,
            max,
            count,
            spacing,
        })
    }

    pub fn points(&self) -> Vec<f64> {
        let n = self.count - 1;
        let mut pts: Vec<f64> = (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                match self.spacing {
                    Spacing::Linear => self.min + (self.max - self.min) * t,
                    Spacing::Log => (self.min.ln() + (self.max.ln() - self.min.ln()) * t).exp(),
                }
            })
            .collect();
        pts[0] = self.min;
        pts[n] = self.max;
        pts
    }

    fn from_args(args: &GridArgs, default: Grid) -> Result<Grid> {
        Grid::new(
            args.grid_min.unwrap_or(default.min),
            args.grid_max.unwrap_or(default.max),
            args.grid_count,
            args.grid_spacing.unwrap_or(default.spacing),
        )
    }
}

fn relerr(b: Option<f64>, exact: f64) -> Option<f64> {
    b.map(|b| (b - exact).abs() / exact.abs())
}

pub const BOUNDS_COLUMNS: [&str; 13] = [
    "y", "Y", "x_exact", "z_exact", "z1", "z2", "z0", "tz1", "tz2", "tz3", "s09_lo_a", "s09_lo_b",
    "s09_up",
];

/// Exact `z` and `x`, the six `z` bounds and the three chain estimates on a
/// `y` grid.
///
/// The `s09_*` columns are estimates of `x = -W(-y e^{-y})`, named after their
/// position in the chain for `W`: `s09_lo_*` bound `x` from above.
pub fn run_bounds(grid: &Grid) -> Result<Table> {
    if !(grid.min > 1.0) {
        return Err(Error::domain("grid-min", grid.min, "(1, inf)"));
    }
    let set = BoundSet::standard();
    let mut header: Vec<String> = BOUNDS_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(BOUNDS_COLUMNS[4..].iter().map(|c| format!("relerr_{c}")));
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for y in grid.points() {
        let problem = ZProblem::new(y)?;
        let big_y = problem.target;
        let zeta = problem.solve_excess()?;
        let z = 1.0 + zeta;
        let x = exact_small_root(y)?;
        let t1 = set.theorem1_excess(big_y)?;
        let t2 = set.theorem2_excess(big_y)?;
        let s = s09_chain(y)?;
        let excess = [t1.z1, t1.z2, t1.z0, t2.tz1, t2.tz2, t2.tz3];
        let xs = [-s.lower_a, -s.lower_b, -s.upper];
        let mut row = vec![Some(y), Some(big_y), Some(x), Some(z)];
        row.extend(excess.iter().map(|&e| Some(1.0 + e)));
        row.extend(xs.iter().map(|&v| Some(v)));
        // from the excesses, so that differences far below one ulp of z survive
        row.extend(excess.iter().map(|&e| Some((e - zeta).abs() / z)));
        row.extend(xs.iter().map(|&v| relerr(Some(v), x)));
        table.push(row);
    }
    Ok(table)
}

pub const LAMBERT_COLUMNS: [&str; 14] = [
    "X", "W", "Z1", "Z2", "Z0", "TZ1", "TZ2", "TZ3", "hh08", "ser2", "ser3", "ser4", "ser5", "ser6",
];

/// `W` with the corollary estimates (empty outside `(-1/e, 0)`), the `ȳ = X + 1`
/// upper bound and partial Maclaurin sums.
pub fn run_lambert(grid: &Grid) -> Result<Table> {
    if !(grid.min >= -1.0 / E) {
        return Err(Error::domain("grid-min", grid.min, "[-1/e, inf)"));
    }
    lambert_table(BoundSet::standard(), &grid.points())
}

fn lambert_table(set: &BoundSet, xs: &[f64]) -> Result<Table> {
    let mut header: Vec<String> = LAMBERT_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(LAMBERT_COLUMNS[2..].iter().map(|c| format!("relerr_{c}")));
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for &x in xs {
        let w = lambert_w(x)?;
        let c1 = corollary1_bounds_with(set, x).ok();
        let c2 = corollary2_bounds_with(set, x).ok();
        let hh = hh08_default(x).ok();
        let mut est = vec![
            c1.map(|c| c.z1),
            c1.map(|c| c.z2),
            c1.map(|c| c.z0),
            c2.map(|c| c.tz1),
            c2.map(|c| c.tz2),
            c2.map(|c| c.tz3),
            hh,
        ];
        for n in 2..=6 {
            est.push(Some(taylor_w(x, n)?));
        }
        let mut row = vec![Some(x), Some(w)];
        row.extend(est.iter().copied());
        // relative error is undefined at W = 0
        row.extend(
            est.iter()
                .map(|&b| if w == 0.0 { None } else { relerr(b, w) }),
        );
        table.push(row);
    }
    Ok(table)
}

/// Rows where a second-order estimate is less accurate than the matching
/// first-order one: `(X, column)`.
pub fn lambert_accuracy_exceptions(table: &Table) -> Vec<(f64, &'static str)> {
    let col = |name: &str| table.column_index(name).expect("lambert column");
    let (x, tz1, tz2, tz3, z1, z2) = (
        col("X"),
        col("relerr_TZ1"),
        col("relerr_TZ2"),
        col("relerr_TZ3"),
        col("relerr_Z1"),
        col("relerr_Z2"),
    );
    let mut out = Vec::new();
    for row in &table.rows {
        let (Some(e_tz1), Some(e_tz2), Some(e_tz3), Some(e_z1), Some(e_z2)) =
            (row[tz1], row[tz2], row[tz3], row[z1], row[z2])
        else {
            continue;
        };
        let xv = row[x].unwrap_or(f64::NAN);
        if e_tz1 > e_z1 {
            out.push((xv, "TZ1"));
        }
        if e_tz2.min(e_tz3) > e_z2 {
            out.push((xv, "TZ2/TZ3"));
        }
    }
    out
}

/// Result of `simulate`: the trajectory and a one-row event summary.
pub struct Simulation {
    pub trajectory: Table,
    pub events: Table,
    /// Set when an event was requested but `T_max` came first.
    pub missed_event: Option<Error>,
}

pub fn run_simulate(args: &SimArgs) -> Result<Simulation> {
    let system = match args.system {
        SystemKind::Lv => SystemSpec::lotka_volterra(args.alpha)?,
        SystemKind::Rm => SystemSpec::rosenzweig_macarthur(args.m, args.lambda, args.a)?,
    };
    let initial = TrajectoryState::at(args.s0, args.x0);
    let level = match args.level {
        LevelArg::Prey => Level::Prey(args.s0),
        LevelArg::Predator => Level::Predator(args.x0),
    };
    let stop_kind = args.stop.unwrap_or(match args.system {
        SystemKind::Lv => StopKind::Cycle,
        SystemKind::Rm => StopKind::Next,
    });
    let stop = match stop_kind {
        StopKind::Time => StopCondition::time_limit(args.t_max),
        StopKind::Next => StopCondition::next_crossing(level).with_t_max(args.t_max),
        StopKind::Cycle => StopCondition::full_cycle(level).with_t_max(args.t_max),
    };
    let traj = integrate(&system, initial, stop)?;
    let trajectory = trajectory_table(&system, &traj)?;

    let mut events = Table::new([
        "tau",
        "s",
        "x",
        "level",
        "residual",
        "rising",
        "predicted_lower",
        "predicted_upper",
        "v_drift",
    ]);
    let v_drift = if system.is_lotka_volterra() {
        Some(max_v_drift(&system, &traj)?)
    } else {
        None
    };
    // bracket for the return value when the run is a return to s = s0 below the
    // predator isocline
    let bracket = match (&system, stop_kind, args.level) {
        (SystemSpec::RosenzweigMacArthur { m, lambda, a }, StopKind::Next, LevelArg::Prey)
            if args.s0 <= *lambda && 2.0 * args.s0 + a < 1.0 && args.x0 > rm_h(args.s0, *a) =>
        {
            let study = rm_return_study(*m, *lambda, *a, args.x0, args.s0)?;
            Some((study.interval.lower, study.interval.upper))
        }
        (SystemSpec::LotkaVolterra { .. }, StopKind::Next, _) => {
            let (kind, v) = match args.level {
                LevelArg::Prey => (LevelKind::Predator, args.x0),
                LevelArg::Predator => (LevelKind::Prey, args.s0),
            };
            (v > 1.0)
                .then(|| crate::trajectories::lv_intersection_bounds(kind, v))
                .transpose()?
                .map(|b| (b.lower, b.upper))
        }
        _ => None,
    };
    if let Some(ev) = traj.event {
        events.push(vec![
            Some(ev.state.tau),
            Some(ev.state.s),
            Some(ev.state.x),
            Some(ev.level.value()),
            Some(ev.residual),
            Some(if ev.rising { 1.0 } else { 0.0 }),
            bracket.map(|b| b.0),
            bracket.map(|b| b.1),
            v_drift,
        ]);
    } else {
        let last = traj.samples.last().expect("at least the initial sample");
        events.push(vec![
            Some(last.tau),
            Some(last.s),
            Some(last.x),
            None,
            None,
            None,
            None,
            None,
            v_drift,
        ]);
    }
    let missed_event = (stop.level.is_some() && traj.event.is_none())
        .then_some(Error::TimeLimit { t_max: args.t_max });
    Ok(Simulation {
        trajectory,
        events,
        missed_event,
    })
}

/// One line of the verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Smallest observed margin; negative margins beyond the slack are failures.
    pub worst_margin: f64,
    pub worst_at: String,
}

impl Check {
    fn new(suite: &'static str, name: &'static str) -> Self {
        Check {
            suite,
            name,
            cases: 0,
            failures: 0,
            worst_margin: f64::INFINITY,
            worst_at: String::new(),
        }
    }

    /// Record one case with `margin >= -slack` as passing.
    fn observe(&mut self, margin: f64, slack: f64, at: impl FnOnce() -> String) {
        self.cases += 1;
        let ok = margin >= -slack;
        if !ok {
            self.failures += 1;
        }
        if !(margin >= self.worst_margin) {
            self.worst_margin = margin;
            self.worst_at = at();
        }
    }

    fn observe_strict(&mut self, margin: f64, at: impl FnOnce() -> String) {
        self.observe(margin, 0.0, at);
        if margin == 0.0 {
            self.failures += 1;
        }
    }

    fn fail(&mut self, at: String) {
        self.cases += 1;
        self.failures += 1;
        self.worst_margin = f64::NEG_INFINITY;
        self.worst_at = at;
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed {}", self.seed)?;
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<12} {:<40} {:>6}/{:<6} worst margin {:>12.4e} at {}",
                if c.passed() { "PASS" } else { "FAIL" },
                c.suite,
                c.name,
                c.cases - c.failures,
                c.cases,
                c.worst_margin,
                c.worst_at
            )?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed()).count();
        writeln!(
            f,
            "{} of {} checks passed",
            self.checks.len() - failed,
            self.checks.len()
        )
    }
}

/// The approximant set with one coefficient perturbed, for the negative control.
pub fn corrupted_bound_set() -> BoundSet {
    let mut set = *BoundSet::standard();
    set.z2 = PadeBound::new("z2", 0.0, 1.2 * set.z2.c, LogSide::BelowLog);
    set
}

fn log_grid(min: f64, max: f64, n: usize) -> Vec<f64> {
    Grid::new(min, max, n, Spacing::Log)
        .expect("static grid")
        .points()
}

fn lin_grid(min: f64, max: f64, n: usize) -> Vec<f64> {
    Grid::new(min, max, n, Spacing::Linear)
        .expect("static grid")
        .points()
}

/// Open grid on `(-1/e, 0)`.
fn branch_grid(n: usize) -> Vec<f64> {
    let lo = -1.0 / E;
    (1..=n)
        .map(|i| lo * (1.0 - i as f64 / (n + 1) as f64))
        .collect()
}

fn bounds_suite(set: &BoundSet, checks: &mut Vec<Check>) -> Result<()> {
    let ys = log_grid(1.001, 100.0, 1000);
    let mut chain1 = Check::new("bounds", "1 < z1 <= z <= z2 <= z0 < e");
    let mut resid = Check::new("bounds", "|ln z / z - Y| < 1e-13");
    let mut chain2 = Check::new("bounds", "tz1 <= z <= min(tz2, tz3)");
    let mut width = Check::new("bounds", "second-order bracket within first");
    let mut mono = Check::new("bounds", "z decreasing in y");
    let mut consist = Check::new("bounds", "small root = z Y");
    let mut sides = Check::new("bounds", "side test of x-estimates");
    let mut prev_z: Option<f64> = None;
    for &y in &ys {
        let at = || format!("y = {y:.6e}");
        let p = ZProblem::new(y)?;
        let t = p.target;
        let zx = p.solve_excess()?;
        let e1 = set.theorem1_excess(t)?;
        let e2 = set.theorem2_excess(t)?;
        let em1 = E - 1.0;
        let m1 = e1
            .z1
            .min(zx - e1.z1)
            .min(e1.z2 - zx)
            .min(e1.z0 - e1.z2)
            .min(em1 - e1.z0);
        chain1.observe(m1, 1e-12, at);
        resid.observe(RESIDUAL_TOL - crate::bounds::z_residual(t, zx), 0.0, at);
        let m2 = (zx - e2.tz1).min(e2.tz2 - zx).min(e2.tz3 - zx);
        chain2.observe(m2, 1e-12, at);
        width.observe((e1.z2 - e1.z1) - (e2.tz2.min(e2.tz3) - e2.tz1), 1e-12, at);
        if let Some(pz) = prev_z {
            mono.observe(pz - zx, 0.0, at);
        }
        prev_z = Some(zx);
        let x = exact_small_root(y)?;
        consist.observe(1e-12 - (x - (t + t * zx)).abs() / x, 0.0, at);
        // the sign of x - ln x - (y - ln y) is only resolvable down to a few
        // ulps of Y; closer second-order bounds are accepted within that
        let lowers = [e1.z1, e2.tz1];
        let uppers = [e1.z2, e1.z0, e2.tz2, e2.tz3];
        let slack = 8.0 * f64::EPSILON * t;
        for ex in lowers {
            sides.observe(side_residual(t, ex), slack, at);
        }
        for ex in uppers {
            sides.observe(-side_residual(t, ex), slack, at);
        }
    }

    let mut sandwich = Check::new("bounds", "approximants on their side of ln z");
    for &z in &lin_grid(1.0, E, 1002)[1..1001] {
        let ln = z.ln();
        let at = || format!("z = {z:.6}");
        let m = (set.z2.value(z) - set.z0.value(z))
            .min(ln - set.z2.value(z))
            .min(set.z1.value(z) - ln)
            .min(set.tz1.value(z) - ln)
            .min(ln - set.tz2.value(z))
            .min(ln - set.tz3.value(z));
        sandwich.observe(m, 0.0, at);
    }
    checks.extend([chain1, resid, chain2, width, mono, sandwich, consist, sides]);
    Ok(())
}

fn lambert_suite(set: &BoundSet, checks: &mut Vec<Check>) -> Result<()> {
    let mut oracle = Check::new("lambert", "|W e^W - X| <= 1e-13 max(1, |X|)");
    let lo = -1.0 / E + 1e-9;
    let xs: Vec<f64> = lin_grid(lo, 0.0, 2000)
        .into_iter()
        .chain(log_grid(1e-12, 1e3, 8000))
        .collect();
    for &x in &xs {
        let w = lambert_w(x)?;
        oracle.observe(
            1e-13 * x.abs().max(1.0) - (w * w.exp() - x).abs(),
            0.0,
            || format!("X = {x:.6e}"),
        );
    }
    let mut special = Check::new("lambert", "W(0) = 0, W(e) = 1, W(-1/e) = -1");
    for (x, want) in [(0.0, 0.0), (E, 1.0), (-1.0 / E, -1.0)] {
        let w = lambert_w(x)?;
        special.observe(1e-10 - (w - want).abs(), 0.0, || format!("X = {x:.6e}"));
    }

    let mut c1 = Check::new("lambert", "Z0 <= Z2 <= W <= Z1");
    let mut c2 = Check::new("lambert", "max(TZ2, TZ3) <= W <= TZ1");
    let mut hh = Check::new("lambert", "W <= (X + ybar)/(1 + ln ybar), ybar = X + 1");
    for &x in &branch_grid(1000) {
        let w = lambert_w(x)?;
        let a = corollary1_bounds_with(set, x)?;
        let b = corollary2_bounds_with(set, x)?;
        let at = || format!("X = {x:.6e}");
        c1.observe((a.z2 - a.z0).min(w - a.z2).min(a.z1 - w), 1e-12, at);
        c2.observe((w - b.tz2).min(w - b.tz3).min(b.tz1 - w), 1e-12, at);
        hh.observe(hh08_default(x)? - w, 1e-12 * w.abs(), at);
    }
    for &x in &log_grid(1e-6, 10.0, 200) {
        let w = lambert_w(x)?;
        hh.observe(hh08_default(x)? - w, 1e-12 * w.abs(), || {
            format!("X = {x:.6e}")
        });
    }

    let mut star = Check::new("lambert", "2 ln y - y < ... < W(-y e^-y) < ln y - 1");
    let mut ident = Check::new("lambert", "-W(-y e^-y) = small root");
    for &y in &log_grid(1.001, 50.0, 1000) {
        let w = w_of_minus_y_exp(y)?;
        let s = s09_chain(y)?;
        let at = || format!("y = {y:.6e}");
        star.observe_strict(
            (s.lower_b - s.lower_a).min(w - s.lower_b).min(s.upper - w),
            at,
        );
    }
    for &y in &log_grid(1.001, 100.0, 1000) {
        let x = exact_small_root(y)?;
        let w = w_of_minus_y_exp(y)?;
        ident.observe(1e-12 - (-w - x).abs() / x, 0.0, || format!("y = {y:.6e}"));
    }

    let mut taylor = Check::new("lambert", "series coefficients 1, -1, 3/2, -8/3, 125/24");
    for (n, want) in [
        (1, 1.0),
        (2, -1.0),
        (3, 1.5),
        (4, -8.0 / 3.0),
        (5, 125.0 / 24.0),
    ] {
        let c = taylor_coefficient(n)?;
        if c == want {
            taylor.observe(0.0, 0.0, || format!("n = {n}"));
        } else {
            taylor.fail(format!("n = {n}: {c} != {want}"));
        }
    }
    checks.extend([oracle, special, c1, c2, hh, star, ident, taylor]);
    Ok(())
}

fn trajectory_suite(seed: u64, checks: &mut Vec<Check>) -> Result<()> {
    let mut fig1 = Check::new("trajectory", "LV crossings at (2,2) and (1/2,2)");
    let mut drift = Check::new("trajectory", "LV full-cycle |dV| < 1e-8");
    let mut lv_rand = Check::new("trajectory", "LV random crossings contained");
    let mut rm_rand = Check::new("trajectory", "RM x_min contained");
    let mut arc = Check::new("trajectory", "RM arc hypotheses hold");
    let mut barrier = Check::new("trajectory", "V_Fbar rises, V_Flow falls on arc");
    let mut extremum = Check::new("trajectory", "RM predator extrema on s = lambda");
    let mut residual = Check::new("trajectory", "event residual < 1e-10");

    let lv = SystemSpec::lotka_volterra(1.0)?;
    for (s0, x0, kind) in [(2.0, 2.0, LevelKind::Prey), (0.5, 2.0, LevelKind::Predator)] {
        let c = lv_crossing(1.0, s0, x0, kind)?;
        let at = || format!("(s0, x0) = ({s0}, {x0})");
        fig1.observe(c.result.relative_margin(), 0.0, at);
        residual.observe(1e-10 - c.result.refinement_residual, 0.0, at);
        let level = match kind {
            LevelKind::Prey => Level::Prey(s0),
            LevelKind::Predator => Level::Predator(x0),
        };
        let cycle = integrate(
            &lv,
            TrajectoryState::at(s0, x0),
            StopCondition::full_cycle(level),
        )?;
        cycle.require_event()?;
        drift.observe(1e-8 - max_v_drift(&lv, &cycle)?, 0.0, at);
    }

    for (i, (s0, x0)) in random_lv_starts(seed, 50).into_iter().enumerate() {
        for (kind, s, x) in [(LevelKind::Prey, s0, x0), (LevelKind::Predator, x0, s0)] {
            let c = lv_crossing(1.0, s, x, kind)?;
            let at = || format!("case {i} {kind:?} (s0, x0) = ({s:.6}, {x:.6})");
            lv_rand.observe(c.result.relative_margin(), 0.0, at);
            residual.observe(1e-10 - c.result.refinement_residual, 0.0, at);
        }
    }

    for (i, case) in random_rm_cases(seed, 20).into_iter().enumerate() {
        let at = || format!("case {i} {case:?}");
        let study = rm_return_study(case.m, case.lambda, case.a, case.x_max, case.lambda)?;
        rm_rand.observe(study.result.relative_margin(), 0.0, at);
        residual.observe(1e-10 - study.result.refinement_residual, 0.0, at);
        let a = &study.arc;
        arc.observe(
            if a.passed() {
                a.low_margin.min(a.up_margin).min(a.isocline_margin)
            } else {
                -1.0
            },
            0.0,
            at,
        );
        let system = SystemSpec::rosenzweig_macarthur(case.m, case.lambda, case.a)?;
        let fbar = rm_h(case.lambda, case.a);
        let mut worst = f64::INFINITY;
        for w in study.trajectory.samples.windows(2) {
            let up = generalized_v(&system, fbar, &w[1])? - generalized_v(&system, fbar, &w[0])?;
            let lo =
                generalized_v(&system, case.a, &w[0])? - generalized_v(&system, case.a, &w[1])?;
            let scale = 1e-9 * (1.0 + generalized_v(&system, fbar, &w[0])?.abs());
            worst = worst.min(up + scale).min(lo + scale);
        }
        barrier.observe(worst, 0.0, at);

        // predator minimum at the return, then the next maximum
        let x_min = study.result.crossing_value;
        let below = study
            .trajectory
            .samples
            .iter()
            .map(|st| st.x)
            .fold(f64::INFINITY, f64::min);
        extremum.observe(below / x_min - (1.0 - 1e-12), 0.0, at);
        let end = *study.trajectory.samples.last().expect("event sample");
        let next = return_study_or_cycle(&system, end)?;
        let ev = next.require_event()?;
        let above = next.samples.iter().map(|st| st.x).fold(0.0, f64::max);
        extremum.observe((1.0 + 1e-12) - above / ev.state.x, 0.0, at);
        extremum.observe(1e-8 - (ev.state.s - case.lambda).abs(), 0.0, at);
        residual.observe(1e-10 - ev.residual, 0.0, at);
    }
    checks.extend([
        fig1, drift, lv_rand, rm_rand, arc, barrier, extremum, residual,
    ]);
    Ok(())
}

/// From a point on `s = λ`, integrate to the next crossing of that line.
fn return_study_or_cycle(
    system: &SystemSpec,
    start: TrajectoryState,
) -> Result<crate::trajectories::Trajectory> {
    let lambda = system
        .predator_isocline()
        .expect("scaled system has an isocline");
    integrate(
        system,
        TrajectoryState::at(lambda, start.x),
        StopCondition::next_crossing(Level::Prey(lambda)),
    )
}

/// Run all suites. Errors inside a suite are reported as failed checks.
pub fn run_verify(seed: u64, corrupt: bool) -> Report {
    let owned;
    let set = if corrupt {
        owned = corrupted_bound_set();
        &owned
    } else {
        BoundSet::standard()
    };
    let mut checks = Vec::new();
    let guard = |suite: &'static str, r: Result<()>, checks: &mut Vec<Check>| {
        if let Err(e) = r {
            let mut c = Check::new(suite, "suite completed");
            c.fail(e.to_string());
            checks.push(c);
        }
    };
    let r = bounds_suite(set, &mut checks);
    guard("bounds", r, &mut checks);
    let r = lambert_suite(set, &mut checks);
    guard("lambert", r, &mut checks);
    let r = trajectory_suite(seed, &mut checks);
    guard("trajectory", r, &mut checks);
    Report { seed, checks }
}

/// Tables behind a figure, keyed by panel name.
pub fn figure_tables(id: u32) -> Result<Vec<(String, Table)>> {
    match id {
        1 => figure1(),
        2 => figure2(),
        3 => figure3(),
        4 => figure4(),
        5 => figure5(),
        _ => Err(Error::Argument(format!(
            "unknown figure {id}; expected 1 to 5"
        ))),
    }
}

fn figure1() -> Result<Vec<(String, Table)>> {
    let lv = SystemSpec::lotka_volterra(1.0)?;
    let mut out = Vec::new();
    for (panel, s0, x0, kind) in [
        ("left", 2.0, 2.0, LevelKind::Prey),
        ("right", 0.5, 2.0, LevelKind::Predator),
    ] {
        let c = lv_crossing(1.0, s0, x0, kind)?;
        let cycle = integrate(
            &lv,
            TrajectoryState::at(s0, x0),
            StopCondition::full_cycle(Level::Prey(s0)),
        )?;
        let b = c.bounds;
        let (t_lo, t_hi) = b.trivial();
        let levels = [b.lower, b.upper, b.z0_upper(), t_lo, t_hi, c.result.level];
        let mut table = Table::new([
            "tau",
            "s",
            "x",
            "V",
            "z1_level",
            "z2_level",
            "z0_level",
            "trivial_low",
            "trivial_high",
            "intersection_level",
        ]);
        let traj = trajectory_table(&lv, &cycle)?;
        for row in traj.rows {
            let mut r = row;
            r.extend(levels.iter().map(|&v| Some(v)));
            table.push(r);
        }
        out.push((panel.to_string(), table));
    }
    Ok(out)
}

/// `y` values shared by the `x`-estimate panels.
fn figure_y_grid() -> Vec<f64> {
    log_grid(1.001, 12.0, 400)
}

fn figure_x_grid() -> Vec<f64> {
    branch_grid(400)
}

fn select(table: &Table, columns: &[&str]) -> Table {
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            table
                .column_index(c)
                .unwrap_or_else(|| panic!("missing column {c}"))
        })
        .collect();
    Table {
        header: columns.iter().map(|c| c.to_string()).collect(),
        rows: table
            .rows
            .iter()
            .map(|r| idx.iter().map(|&j| r[j]).collect())
            .collect(),
    }
}

/// x-space estimates `z·Y` for every `z` column, and their relative errors
/// (taken from the excess form, see [`run_bounds`]).
fn x_estimates() -> Result<(Table, Table)> {
    let ys = figure_y_grid();
    let grid = Grid::new(ys[0], *ys.last().expect("grid"), ys.len(), Spacing::Log)?;
    let b = run_bounds(&grid)?;
    let names = [
        "x_trivial_low",
        "x_z1",
        "x_z2",
        "x_z0",
        "x_trivial_high",
        "x_tz1",
        "x_tz2",
        "x_tz3",
        "s09_lo_a",
        "s09_lo_b",
        "s09_up",
    ];
    let mut values = Table::new(["y", "x_exact"].into_iter().chain(names));
    let mut errors = Table::new(
        std::iter::once("y".to_string()).chain(names.iter().map(|n| format!("relerr_{n}"))),
    );
    let col = |name: &str| b.column_index(name).expect("bounds column");
    for r in &b.rows {
        let v = |name: &str| r[col(name)].expect("bounds cell");
        let big_y = v("Y");
        let z = v("z_exact");
        values.push_values(&[
            v("y"),
            v("x_exact"),
            big_y,
            v("z1") * big_y,
            v("z2") * big_y,
            v("z0") * big_y,
            E * big_y,
            v("tz1") * big_y,
            v("tz2") * big_y,
            v("tz3") * big_y,
            v("s09_lo_a"),
            v("s09_lo_b"),
            v("s09_up"),
        ]);
        let zeta = z - 1.0;
        errors.push_values(&[
            v("y"),
            zeta / z,
            v("relerr_z1"),
            v("relerr_z2"),
            v("relerr_z0"),
            (E - z) / z,
            v("relerr_tz1"),
            v("relerr_tz2"),
            v("relerr_tz3"),
            v("relerr_s09_lo_a"),
            v("relerr_s09_lo_b"),
            v("relerr_s09_up"),
        ]);
    }
    Ok((values, errors))
}

fn with_relerr(t: &Table, key: &str, exact: &str, columns: &[&str]) -> Table {
    let k = t.column_index(key).expect("key column");
    let e = t.column_index(exact).expect("exact column");
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| t.column_index(c).expect("estimate column"))
        .collect();
    let mut header = vec![key.to_string()];
    header.extend(columns.iter().map(|c| format!("relerr_{c}")));
    Table {
        header,
        rows: t
            .rows
            .iter()
            .map(|r| {
                let mut out = vec![r[k]];
                let ex = r[e].expect("exact value");
                out.extend(
                    idx.iter()
                        .map(|&j| if ex == 0.0 { None } else { relerr(r[j], ex) }),
                );
                out
            })
            .collect(),
    }
}

fn prefixed(prefix: &str, columns: &[&str]) -> Vec<String> {
    columns.iter().map(|c| format!("{prefix}{c}")).collect()
}

const FIG2_X_COLUMNS: [&str; 8] = [
    "x_trivial_low",
    "x_z1",
    "x_z2",
    "x_z0",
    "x_trivial_high",
    "s09_lo_a",
    "s09_lo_b",
    "s09_up",
];
const FIG2_W_COLUMNS: [&str; 9] = [
    "Z1", "Z2", "Z0", "hh08", "ser2", "ser3", "ser4", "ser5", "ser6",
];

fn figure2() -> Result<Vec<(String, Table)>> {
    let (xt, xe) = x_estimates()?;
    let mut upper_right = vec!["y".to_string()];
    upper_right.extend(prefixed("relerr_", &FIG2_X_COLUMNS));
    let upper_right: Vec<&str> = upper_right.iter().map(String::as_str).collect();
    let mut upper_left = vec!["y", "x_exact"];
    upper_left.extend(FIG2_X_COLUMNS);
    let lt = lambert_table(BoundSet::standard(), &figure_x_grid())?;
    let mut lower_left = vec!["X", "W"];
    lower_left.extend(FIG2_W_COLUMNS);
    Ok(vec![
        ("upper_left".into(), select(&xt, &upper_left)),
        ("upper_right".into(), select(&xe, &upper_right)),
        ("lower_left".into(), select(&lt, &lower_left)),
        (
            "lower_right".into(),
            with_relerr(&lt, "X", "W", &FIG2_W_COLUMNS),
        ),
    ])
}

fn figure3() -> Result<Vec<(String, Table)>> {
    let (_, xe) = x_estimates()?;
    let lt = lambert_table(BoundSet::standard(), &figure_x_grid())?;
    let mut left = vec!["y".to_string()];
    left.extend(prefixed(
        "relerr_",
        &[
            "x_tz1", "x_tz2", "x_tz3", "x_z1", "x_z2", "s09_lo_a", "s09_lo_b", "s09_up",
        ],
    ));
    let left: Vec<&str> = left.iter().map(String::as_str).collect();
    Ok(vec![
        ("left".into(), select(&xe, &left)),
        (
            "right".into(),
            with_relerr(
                &lt,
                "X",
                "W",
                &[
                    "TZ1", "TZ2", "TZ3", "Z1", "Z2", "hh08", "ser2", "ser3", "ser4", "ser5", "ser6",
                ],
            ),
        ),
    ])
}

fn figure4() -> Result<Vec<(String, Table)>> {
    let mut t = Table::new(["X", "W"]);
    let lo = -1.0 / E;
    let xs: Vec<f64> = lin_grid(lo, 0.0, 200)
        .into_iter()
        .chain(lin_grid(0.0, 10.0, 301).into_iter().skip(1))
        .collect();
    for x in xs {
        t.push_values(&[x, lambert_w(x)?]);
    }
    Ok(vec![("main".into(), t)])
}

/// Parameters of the barrier figure: `m, λ, a, x_max`.
pub const FIGURE5_PARAMS: (f64, f64, f64, f64) = (1.0, 0.3, 0.1, 1.0);

fn figure5() -> Result<Vec<(String, Table)>> {
    let (m, lambda, a, x_max) = FIGURE5_PARAMS;
    let system = SystemSpec::rosenzweig_macarthur(m, lambda, a)?;
    let study = return_study(&system, lambda, x_max, a, rm_h(lambda, a), DEFAULT_T_MAX)?;
    let start = study.trajectory.samples[0];
    let mut t = Table::new(["tau", "s_arc", "x", "s_barrier_low", "s_barrier_high"]);
    for st in &study.trajectory.samples {
        let lo = barrier_prey(&system, a, &start, st.x)?;
        let hi = barrier_prey(&system, rm_h(lambda, a), &start, st.x)?;
        t.push(vec![Some(st.tau), Some(st.s), Some(st.x), lo, hi]);
    }
    Ok(vec![("main".into(), t)])
}

/// Write `fig<N>_<panel>.csv` files into `dir`.
pub fn run_figure(id: u32, dir: &Path) -> Result<Vec<PathBuf>> {
    let tables = figure_tables(id)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::Argument(format!("{}: {e}", dir.display())))?;
    let mut paths = Vec::new();
    for (panel, table) in tables {
        let path = dir.join(format!("fig{id}_{panel}.csv"));
        table
            .write_to(&path)
            .map_err(|e| Error::Argument(format!("{}: {e}", path.display())))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> u8 {
    if err.is_integration_failure() {
        EXIT_INTEGRATION
    } else {
        EXIT_CONFIG
    }
}

fn emit(table: &Table, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => table
            .write_to(path)
            .map_err(|e| Error::Argument(format!("{}: {e}", path.display()))),
        None => {
            print!("{}", table.to_csv_string());
            Ok(())
        }
    }
}

fn events_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("trajectory");
    out.with_file_name(format!("{stem}_events.csv"))
}

fn dispatch(cli: &Cli) -> Result<u8> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Bounds(g) => {
            let grid = Grid::from_args(g, Grid::new(1.001, 10.0, 500, Spacing::Log)?)?;
            emit(&run_bounds(&grid)?, out)?;
        }
        Command::Lambert(g) => {
            let default = Grid::new(-1.0 / E + 1e-6, -1e-6, 500, Spacing::Linear)?;
            let grid = Grid::from_args(g, default)?;
            let table = run_lambert(&grid)?;
            let exceptions = lambert_accuracy_exceptions(&table);
            let rows = table.rows.len();
            if !exceptions.is_empty() {
                eprintln!(
                    "second-order estimate less accurate than first-order on {} of {rows} rows; first at X = {:.6e} ({})",
                    exceptions.len(),
                    exceptions[0].0,
                    exceptions[0].1
                );
            }
            emit(&table, out)?;
        }
        Command::Simulate(args) => {
            let sim = run_simulate(args)?;
            match out {
                Some(path) => {
                    emit(&sim.trajectory, Some(path))?;
                    emit(&sim.events, Some(&events_path(path)))?;
                }
                None => {
                    emit(&sim.trajectory, None)?;
                    eprint!("{}", sim.events.to_csv_string());
                }
            }
            if let Some(e) = sim.missed_event {
                return Err(e);
            }
        }
        Command::Verify(v) => {
            let report = run_verify(cli.seed, v.corrupt_coefficient);
            print!("{report}");
            if !report.passed() {
                return Ok(EXIT_VERIFY);
            }
        }
        Command::Figure(f) => {
            let dir = out.unwrap_or(Path::new("."));
            for path in run_figure(f.figure, dir)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(EXIT_OK)
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
