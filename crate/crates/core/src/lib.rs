//! Multiplicative measures on integer partitions: partition functions, tilt
//! parameters, limit shapes, exact and rejection samplers, and diagnostics of
//! the ergodic and nonergodic regimes.
//!
//! The numerical core is generic over [`scalar::Real`] (`f32`, `f64`);
//! coefficient tables are generic over [`scalar::Coefficient`], which adds
//! exact [`num_rational::BigRational`] arithmetic.

pub mod asymptotics;
pub mod catalog;
pub mod config;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod partition_function;
pub mod quadrature;
pub mod sampler;
pub mod scalar;
pub mod series;
pub mod special;
pub mod verify;
pub mod weights;

pub use asymptotics::{limit_shape, omega, scaling_alpha, shape_curve, sigma_sq, solve_tilt, ShapeCurve, TiltSolution};
pub use catalog::CatalogName;
pub use config::EnsembleConfig;
pub use ensemble::{Ensemble, Moments, Numerics, Regime};
pub use error::{Error, Result};
pub use partition_function::{coefficients, CoefficientTable, ExactTable, FloatTable, TableOptions};
pub use sampler::{Partition, PartitionRecord, RngStream};
pub use scalar::{Coefficient, Real};
pub use series::{SeriesFunction, SeriesKind, Singularity};
pub use weights::{PartSet, WeightRule, WeightSequence};

pub type Ensemble64 = Ensemble<f64>;
pub type Ensemble32 = Ensemble<f32>;
pub type Series64 = SeriesFunction<f64>;
pub type Weights64 = WeightSequence<f64>;
