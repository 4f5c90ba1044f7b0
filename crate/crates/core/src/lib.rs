//! Numerical toolkit for the Euler–Lorenz family of noninvertible planar
//! maps: orbits, periodic orbits, critical curves, unstable manifolds,
//! global bifurcations and basins.

pub mod basins;
pub mod continuation;
pub mod critical;
pub mod error;
pub mod geometry;
pub mod global;
pub mod manifold;
pub mod map;
pub mod orbit;
pub mod periodic;

pub use error::{Error, Result};
pub use geometry::{Jacobian2, PhasePoint, Rect};
pub use map::{EulerLorenz, MapModel, ParamPoint};
