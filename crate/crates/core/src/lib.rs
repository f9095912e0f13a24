//! Scale functions, passage transforms and Monte Carlo oracles for killed
//! continuous-time Bienaymé–Galton–Watson processes with immigration and
//! culling.

// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod model;
pub mod quad;
pub mod passage;
pub mod scale;
pub mod sim;

pub use control::{BellmanReport, BellmanViolation, ControlProblem};
pub use error::{Error, Result};
pub use model::{Criticality, ImmigrationLaw, ModelSpec, OffspringLaw, RegimeReport};
pub use passage::{AtMinLaw, ConditionedGenerator, GeneratorRow};
pub use quad::{QuadConfig, QuadError};
pub use scale::{Scale, ScaleTag};
pub use sim::{Estimate, OutcomeKind, PathOutcome, Policy, SimConfig};
