//! Reactive islands of the Hénon-Heiles system and support vector classifiers
//! that learn them.

pub mod datasets;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod manifolds;
pub mod periodic;
pub mod pipelines;
pub mod svc;

pub use dynamics::{PhaseState, SaddleId, SystemParams};
pub use error::{Error, Result};
