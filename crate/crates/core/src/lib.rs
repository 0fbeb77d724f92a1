//! Numerical laboratory for the finite-dimensional statistical Calderón
//! problem on the unit disk.
//!
//! The conductivity is piecewise constant, equal to one on a boundary collar
//! and to `theta[k]` on each of `D` inner regions. The crate provides
//!
//! * [`geometry`]: the partition of the disk, a conforming polar mesh and the
//!   electrode arcs,
//! * [`fem`]: P1 stiffness assembly and Dirichlet solves,
//! * [`forward`]: the normalised electrode measurement matrix `G_theta`, its
//!   sensitivity tensor and independent oracles,
//! * [`statmodel`]: the random-design Gaussian regression experiment with its
//!   score and Fisher information,
//! * [`inference`]: random-walk Metropolis posterior sampling and the
//!   Bernstein–von-Mises, rate and coverage experiments.

pub mod error;
pub mod fem;
pub mod forward;
pub mod geometry;
pub mod inference;
pub mod param;
pub mod rng;
pub mod setup;
pub mod sparse;
pub mod statmodel;

pub use error::{EitError, Result};
pub use param::ParameterBox;
pub use setup::{ProblemSetup, ProblemSpec};
