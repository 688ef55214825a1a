//! Simulation and verification toolkit for one-dimensional SDEs whose drift is
//! a local-time integral against a finite signed measure.
//!
//! The pipeline: describe the measure and the diffusion coefficient, build a
//! strictly increasing scale map whose image process is driftless, run the
//! Euler-Maruyama scheme on the transformed equation, map back, and measure
//! the weak convergence order by Monte Carlo.

pub mod funcdsl;
pub mod measure;
pub mod montecarlo;
pub mod sde;
pub mod transform;
