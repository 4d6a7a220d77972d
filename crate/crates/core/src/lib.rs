//! Simulation and calibration toolkit for price models driven by traders'
//! differential beliefs.
//!
//! * [`market`]: barycentric McKean–Vlasov price under increasing information.
//! * [`bias`]: ambiguity-weighted opinion bias that shrinks with information.
//! * [`aggregation`]: KL-budgeted exponential tilting of expert drifts.
//!
//! [`sde`], [`measures`], and [`numerics`] hold the shared machinery.

pub mod aggregation;
pub mod bias;
pub mod error;
pub mod market;
pub mod measures;
pub mod numerics;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use measures::{DiscreteMeasure1D, Divergence, LognormalLaw, QuantileMixture};
pub use sde::{BrownianPath, PathBundle, TimeGrid};
