//! Numerical laboratory for scalar reaction-diffusion equations on the circle,
//!
//! ```text
//!     u_t = u_xx + f(t, u, u_x),    x in S^1 = R / 2*pi*Z,
//! ```
//!
//! with almost-periodic, reflection-symmetric forcing `f(t,u,p) = f(t,u,-p)`.
//!
//! The crate provides:
//!
//! * [`signal`] / [`forcing`] — finite quasi-periodic sums, the forcing
//!   nonlinearity, and its hull (time-translation) flow realized on a phase
//!   torus;
//! * [`grid`] — periodic pseudospectral grid functions with exact spectral
//!   reflection and translation operators;
//! * [`solver`] — an exponential (ETDRK4-type) time integrator for the
//!   evolution semiflow and trajectory sampling;
//! * [`zero`] — zero-number (lap number) counting with simplicity
//!   certification, stability radii, and a Sturm monotonicity monitor for
//!   solution differences;
//! * [`variational`] — linearization along trajectories, tangent-frame
//!   evolution, finite-time Lyapunov exponents with dimension counts, and
//!   explicit sin/cos Floquet modes along spatially homogeneous orbits;
//! * [`omega`] — long-time attractor sampling and classification (common
//!   critical point, homogeneity, minimal-set count, fiber cardinality,
//!   proximality);
//! * [`scenarios`] — canned experiments with closed-form oracles;
//! * [`harness`] — run configuration, persistence, and the verification
//!   pipeline behind the CLI.

pub mod error;
pub mod fft;
pub mod forcing;
pub mod grid;
pub mod harness;
pub mod omega;
pub mod rng;
pub mod scenarios;
pub mod signal;
pub mod solver;
pub mod variational;
pub mod zero;

pub use error::Error;
pub use forcing::{EvenPoly, FieldKind, ForcingField};
pub use grid::GridFunction;
pub use signal::{QuasiPeriodicSum, SignalTerm};
pub use solver::{SolverConfig, Trajectory};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
