//! Simulation and numerical verification for nearest-neighbour energy-exchange
//! jump processes on an open chain.
//!
//! A bond `(i, i+1)` fires at rate `Lambda(x_i, x_{i+1})` and redistributes the
//! pair energy so the left site keeps a fraction `alpha` drawn from a
//! splitting kernel. The crate provides the state space and its contraction
//! metric, built-in kernels and rates, an exact event-driven simulator with a
//! synchronous coupling, reversible product measures, and closed-form and
//! Monte-Carlo spectral-gap estimates.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kernels;
pub mod measures;
pub mod numeric;
pub mod rng;
pub mod simulator;
pub mod spectral;
pub mod state_space;

pub use error::{Error, Result};
pub use kernels::{AlphaKernel, KernelConfig, LambdaR, LambdaS, RateConfig, RateSpec};
pub use measures::{GammaProductSpec, MicrocanonicalSpec, RatioLaw};
pub use simulator::{Model, Observable, Trajectory};
pub use spectral::{ComparisonInputs, ContractionMatrix, GapEstimate, GapMethod};
pub use state_space::{EnergyState, ExchangeMove, UCoords};
