//! Tracial commutator functionals of measure-preserving dynamics on flat tori.
//!
//! For a measure-preserving map `Phi` of `T^d` and a finite family `F` of
//! Fourier observables, the functional
//!
//! ```text
//! S(F) = integral of log(1 + sum_{f in F} |f(x) - f(Phi x)|^2) dmu(x)
//! ```
//!
//! vanishes exactly when every observable is `Phi`-invariant. This crate
//! estimates it by Monte Carlo or grid quadrature for translations, toral
//! automorphisms and time-`h` maps of prescribed incompressible flows, checks
//! it against closed forms, and runs canned experiments around it.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the configuration layer and the
//! experiments use.

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod functional;
pub mod jobs;
pub mod observables;
pub mod oracles;
pub mod output;
pub mod reduce;
pub mod scalar;
pub mod torus;

pub use error::{Error, Result};
pub use scalar::Real;

pub type TorusPoint = torus::TorusPoint<f64>;
pub type Displacement = torus::Displacement<f64>;
pub type DynamicalSystem = dynamics::DynamicalSystem<f64>;
pub type VectorField = dynamics::VectorField<f64>;
pub type IntegratorConfig = dynamics::IntegratorConfig<f64>;
pub type FunctionalEstimate = functional::FunctionalEstimate<f64>;
pub type SampleSet = functional::SampleSet<f64>;
pub type BoundReport = functional::BoundReport<f64>;
pub type SigmaEstimate = functional::SigmaEstimate<f64>;
pub type SmallTimeSeries = functional::SmallTimeSeries<f64>;
