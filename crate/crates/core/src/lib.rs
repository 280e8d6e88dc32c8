//! Quantum noise analysis of the nondegenerate optical parametric oscillator
//! with an injected signal.
//!
//! The crate works in dimensionless scaled units throughout. It covers:
//!
//! * [`model`]: parameter types, physical to scaled conversion and quadrature
//!   conventions.
//! * [`steady_state`]: exact real roots of the quintic fixed-point condition
//!   and the below / at / above threshold closed-form approximations.
//! * [`stability`]: drift matrices, Hurwitz report, reduced stability
//!   condition and an eigenvalue check.
//! * [`linear_spectra`]: first-order fluctuation coefficients, intracavity and
//!   output squeezing spectra, cross spectra and a linear-SDE cross-check.
//! * [`stochastic`]: Euler–Maruyama integration of the full positive-P
//!   quadrature equations over seeded trajectory ensembles.
//! * [`estimator`]: Welch-style (cross-)spectral estimation of trajectory
//!   ensembles and the input–output relation.
//! * [`criteria`]: Duan inseparability sum, Reid inferred variances and EPR
//!   product, quadrature-angle sweeps and the power budget.

pub mod criteria;
pub mod error;
pub mod estimator;
pub mod linear_spectra;
pub mod model;
pub mod polynomial;
pub mod stability;
pub mod steady_state;
pub mod stochastic;

pub use error::{Error, Result};
pub use model::{PhysicalParams, QuadratureState, ScaledParams};
pub use steady_state::{steady_state, Regime, SteadyState};
