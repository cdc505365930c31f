//! Exact event-driven simulation and analysis of bullet processes with
//! discrete speeds, and their ballistic-annihilation counterparts.
//!
//! The numeric core is generic over [`Scalar`]; the aliases below fix the
//! scalar for the common cases.

pub mod ballistic;
pub mod engine;
pub mod exact;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod theory;

pub use rng::{derive_stream, RandomStream};
pub use scalar::{BigRational, Rational, Scalar};
pub use stats::{wilson, Estimate};

/// Bullet with fixed-width exact coordinates.
pub type ExactBullet = engine::Bullet<Rational>;
/// Bullet with float coordinates.
pub type FloatBullet = engine::Bullet<f64>;
pub type ExactFateTable = engine::FateTable<Rational>;
pub type FloatFateTable = engine::FateTable<f64>;
pub type ExactSimulation = engine::Simulation<Rational>;
pub type FloatSimulation = engine::Simulation<f64>;
