//! Discrete-element simulation of cohesive micron-scale metal powders.
//!
//! The crate covers the full desk-scale pipeline for powder-bed-fusion
//! feedstock studies: sampling and settling powder samples, cohesive
//! contact dynamics with van der Waals adhesion, spreading with rigid
//! blade or roller tools, layer-quality metrics, and the funnel
//! angle-of-repose test used to calibrate the surface energy.

pub mod error;
pub mod forces;
pub mod metrics;
pub mod neighbor;
pub mod particle;
pub mod sampling;
pub mod scenario;
pub mod sim;
pub mod surface;

pub use error::{Error, Result};
