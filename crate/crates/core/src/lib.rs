//! Numerical laboratory for the self-similar form of the Hardy-Sobolev heat
//! equation
//!
//! ```text
//! v_s + L v = beta v + mu v / |y|^2 + |v|^{p-1} v,   L = -Delta - (1/2) y . grad
//! ```
//!
//! on radial fields in the Gaussian-weighted space `L^2(R^N, e^{|y|^2/4} dy)`.

pub mod error;
pub mod evolution;
pub mod fields;
pub mod functionals;
pub mod grid;
pub mod hardy;
pub mod linalg;
pub mod selfsimilar;
pub mod variational;

pub use error::{LabError, Result};
pub use evolution::{evolve, EvolutionConfig, EvolutionOutcome, OutcomeLabel, TraceSample};
pub use functionals::{evaluate, model_constants, FunctionalReport, ModelConstants, ModelParams};
pub use grid::{RadialField, RadialGrid};
pub use variational::{classify, WellClassification, WellConstants};
