//! Simulation and convergence-study toolkit for multi-agent systems whose
//! agents carry a fixed label and an evolving opinion, driven by `m`-body
//! interactions.
//!
//! The crate provides the particle system ([`particles`]), its Vlasov-type
//! mean-field description as a pushed-forward weighted measure
//! ([`mesoscopic`]), the label-indexed opinion field and its large-`m` limit
//! ([`macroscopic`]), exact optimal transport distances ([`transport`]), the
//! Liouville ensemble used to measure propagation of chaos ([`chaos`]), and
//! a config-driven study harness ([`experiments`]).

pub mod chaos;
pub mod error;
pub mod experiments;
pub mod force;
pub mod kernels;
pub mod macroscopic;
pub mod measures;
pub mod mesoscopic;
pub mod numeric;
pub mod ode;
pub mod particles;
pub mod rng;
pub mod transport;

pub use error::{BlowUp, Error, Result};
pub use force::RhsMode;
pub use kernels::{evaluate_kernel, kernel_by_name, validate_kernel, InteractionKernel, KernelParams};
pub use measures::{InitialDatumSpec, WeightedMeasure};
pub use ode::{Scheme, TimeGrid};
pub use particles::{integrate, ParticleEnsemble, Trajectory};
pub use rng::RngStream;
