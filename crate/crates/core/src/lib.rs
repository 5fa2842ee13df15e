//! Closed-loop capacity investment equilibria of a two-firm game under
//! geometric Brownian demand shocks.
//!
//! Modules follow the data flow: parameters ([`model`]), trigger surfaces
//! ([`boundaries`]), shock paths ([`paths`]), capital outcomes ([`outcomes`]),
//! candidate values ([`values`]), pointwise verification ([`verify`]) and
//! Monte Carlo payoffs ([`mc`]).

// `!(x > 0.0)` is used throughout to reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundaries;
pub mod error;
pub mod mc;
pub mod model;
pub mod outcomes;
pub mod paths;
pub mod quadrature;
pub mod values;
pub mod verify;

pub use boundaries::{Boundary, BoundaryKind};
pub use error::{Error, Result};
pub use model::{derive_params, ModelParams, Primitives, State};
pub use outcomes::{Construction, Firm, Outcome, StrategyPair};
pub use paths::{generate_path, ShockPath};
pub use quadrature::QuadSettings;
pub use values::{Partials, ValueFn, ValueKind};
