//! Stationary droplet solutions of a two-layer thin-film model.
//!
//! Three independent routes to the same droplet are provided and cross-checked:
//!
//! * [`droplet`]: exact first-integral quadrature of the stationary equation,
//!   plus a discrete shooting solver for Neumann boxes.
//! * [`asymptotics`]: the matched inner/outer expansion up to second order,
//!   including the logarithmic switch-back terms.
//! * [`sharp_interface`] and [`minimizer`]: closed-form minimizers of the
//!   sharp-interface energy and discrete constrained minimization of the
//!   diffuse energy, used for an ε → 0 convergence study.

pub mod asymptotics;
pub mod cli;
pub mod droplet;
pub mod error;
pub mod io;
pub mod minimizer;
pub mod numerics;
pub mod potential;
pub mod sharp_interface;

pub use error::{Error, Result};
