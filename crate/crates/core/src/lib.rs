//! Fully distributed Bayesian optimization. Every node keeps its own GP
//! surrogate over the broadcast history and picks its next point by sampling
//! a Boltzmann distribution over the acquisition surface.
//!
//! The numerical core is generic over [`Scalar`]; the aliases below fix it to
//! `f64` (the default everywhere) or `f32`.

pub mod error;
pub mod kernel;
pub mod linalg;
pub mod rng;
pub mod scalar;
pub mod sobol;
pub mod space;
pub mod surrogate;
pub mod acquisition;
pub mod policy;
pub mod node;
pub mod objectives;
pub mod netsim;
pub mod experiment;

pub use error::{Error, Result};
pub use kernel::{KernelFamily, KernelSpec};
pub use scalar::Scalar;
pub use space::Domain;
pub use surrogate::{Dataset, GpModel, Hyperparameters, ObservationRecord};

pub type Kernel64 = KernelSpec<f64>;
pub type Gp64 = GpModel<f64>;
pub type Dataset64 = Dataset<f64>;
pub type Record64 = ObservationRecord<f64>;
pub type Domain64 = Domain<f64>;

pub type Kernel32 = KernelSpec<f32>;
pub type Gp32 = GpModel<f32>;
pub type Dataset32 = Dataset<f32>;
pub type Record32 = ObservationRecord<f32>;
pub type Domain32 = Domain<f32>;
