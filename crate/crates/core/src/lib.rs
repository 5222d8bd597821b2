//! Run time assurance filters for autonomous spacecraft docking.
//!
//! A deputy spacecraft approaches a chief in circular orbit under the
//! linearised Clohessy-Wiltshire equations. An unconstrained LQR docking
//! controller proposes thrust each step and one of four safety filters
//! (explicit or implicit monitoring, switching or QP intervention) decides
//! what is actually applied so that a distance-dependent speed limit and
//! per-axis velocity caps hold.

pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod filters;
pub mod nmt;
pub mod qp;
pub mod safety;
pub mod sim;

pub use dynamics::{ControlCommand, CwParameters, RelativeState};
pub use error::{Result, RtaError};
pub use filters::{FilterDecision, FilterKind, Mechanism, RtaFilter};
pub use safety::{Constraint, SafetyParameters};
