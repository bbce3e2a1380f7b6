//! Steering assemblages, local filtering and distillation of singlet assemblages.
//!
//! Bob's side of a one-sided device-independent scenario is described by an
//! [`Assemblage`]: a table of subnormalized states `σ_{a|x}` indexed by Alice's
//! input `x` and outcome `a`.

pub mod assemblage;
pub mod error;
pub mod filtering;
pub mod lhs;
pub mod matcore;
pub mod metrics;
pub mod tomosim;

pub use assemblage::{alpha_assemblage, singlet_assemblage, Assemblage, MeasurementSet};
pub use error::{Error, Result};
pub use lhs::{lhs_membership, lhs_robustness, Flavor};
pub use matcore::HermMat;
