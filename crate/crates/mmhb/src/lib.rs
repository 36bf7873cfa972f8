//! Numerical laboratory for heavy-ball momentum in min-max games.
//!
//! The crate is organised around the objects a study of
//! `min_x max_y f(x, y)` under heavy-ball momentum needs:
//!
//! * [`game`] — payoffs with closed-form gradients and Hessian blocks,
//! * [`discrete`] — Sim-HB, Alt-HB and Adam with a (possibly negative) β₁,
//! * [`continuous`] — the O(h³) modified-loss vector fields, the n-indexed
//!   transient fields and a fixed-step integrator,
//! * [`spectral`] — Jacobians J, J_S, J_A, stability bounds, optimal momentum
//!   and the alternating-rate prediction,
//! * [`regularization`] — path-averaged and cumulative slope metrics,
//! * [`experiments`] — config-driven runners behind the `mmhb` binary.
//!
//! ```
//! use mmhb::discrete::{run, HBParams, Scheme};
//! use mmhb::game::BuiltinGame;
//! use nalgebra::dvector;
//!
//! let p = HBParams::new(0.1, -0.5, Scheme::Alternating).unwrap();
//! let traj = run(&BuiltinGame::XY, &p, &dvector![1.0], &dvector![1.0], 10_000).unwrap();
//! assert!(traj.last().norm() < 1e-3);
//! ```

pub mod continuous;
pub mod discrete;
pub mod error;
pub mod experiments;
pub mod game;
pub mod output;
pub mod regularization;
pub mod spectral;

pub use error::{Error, Result};
