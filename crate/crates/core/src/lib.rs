//! Downlink multi-user beamforming between continuous-aperture arrays.
//!
//! Aperture integrals are discretised with tensor Gauss-Legendre rules, which
//! turns the functional WMMSE recursion into weighted matrix products whose
//! inverses have the size of the stream count rather than the sample count.
//! [`solver::run`] is the entry point; [`baselines`] holds the Fourier-basis
//! and discretised-array comparisons.

pub mod baselines;
pub mod channel;
pub mod error;
pub mod linalg;
pub mod quadrature;
pub mod scenario;
pub mod solver;

/// Cartesian point in metres.
pub type Point3 = [f64; 3];

pub use channel::{build_channel_set, kernel, ChannelSet, SampledLink};
pub use error::{CapaError, Result};
pub use linalg::CMatrix;
pub use quadrature::{legendre_rule, tensor_grid, QuadGrid, QuadRule1D};
pub use scenario::{Aperture, Scenario, ScenarioFile};
pub use solver::{run, Init, IterationTrace, Solution, SolverConfig, SolverState};
