//! Closed-form bounds for the Lotka-Volterra integral equation
//! `x - ln x = y - ln y`, the Lambert W estimates they induce, and numerical
//! checks of the trajectory-containment estimates for predator-prey systems.
//!
//! The crate is organised in four layers:
//!
//! * [`bounds`]: exact solution of `ln z / z = Y` and the rational (Padé-type)
//!   bounds on `z`, together with the small root `x < 1` of `x - ln x = y - ln y`.
//! * [`lambert`]: a principal-branch Lambert W oracle plus the bounds on `W`
//!   obtained from the `z` estimates and a few classical comparison bounds.
//! * [`trajectories`]: Lotka-Volterra, Rosenzweig-MacArthur and general
//!   predator-prey right-hand sides, an adaptive Dormand-Prince integrator with
//!   level-crossing events, and the intersection estimates built on [`bounds`].
//! * [`cli`]: table builders behind the `lvb` command line tool.

pub mod bounds;
pub mod cli;
pub mod csv;
mod error;
pub mod lambert;
pub mod ode;
pub mod roots;
pub mod trajectories;

pub use error::{Error, Result};
