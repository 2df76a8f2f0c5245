//! Runge-Kutta discontinuous Galerkin solver for one-dimensional fractional
//! conservation laws `u_t + f(u)_x = g_lambda[u]` on a periodic domain.

pub mod analysis;
pub mod error;
pub mod flux;
pub mod fractional;
pub mod mesh;
pub mod projection;
pub mod quadrature;
pub mod reference;
pub mod scheme;

pub use error::{Error, Result};
