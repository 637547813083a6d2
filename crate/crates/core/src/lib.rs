//! Numerical laboratory for the three-player gambler's ruin in a truncated
//! cone: exit probabilities, discrete Green functions, and harmonic measure,
//! cross-validated over three independent routes.
//!
//! * [`exact`]: absorbing-chain linear solves (conjugate gradient on the
//!   symmetric positive definite interior operator).
//! * [`montecarlo`]: seeded, worker-independent simulation.
//! * [`conformal`]: the Brownian Dirichlet solution via a Weierstrass-based
//!   conformal map to the half plane and the Poisson kernel.
//! * [`asymptotics`]: the closed-form limit constants tying them together.
//! * [`moments`], [`studies`], [`cli`]: the step-law moment oracle, the
//!   report generators, and the command-line front end.

pub mod asymptotics;
pub mod cli;
pub mod conformal;
pub mod exact;
pub mod model;
pub mod moments;
pub mod montecarlo;
pub mod studies;

pub use exact::Quantity;
