//! Sequential stopping rules for selecting the best action in every context
//! when output variances are unknown.
//!
//! Evidence is a plug-in generalized likelihood ratio; boundaries are
//! time-uniform, so the rules are valid under any adaptive sampling scheme.
//! Two precision targets are supported: a context-weighted probability of a
//! delta-optimal action ([`Criterion::P1`]) and a delta-accurate policy value
//! ([`Criterion::P2`]). Both an unstructured model (one mean per
//! context-action pair) and a linear model (one coefficient vector per
//! action) are provided.

pub mod boundary;
pub mod env;
pub mod error;
pub mod harness;
pub mod linear;
pub mod sampling;
pub mod space;
pub mod stats;
pub mod unstructured;
#[cfg(feature = "validation")]
pub mod validation;

pub use boundary::{BoundaryValue, Criterion, ErrorBudget};
pub use error::{Error, Result};
pub use space::{ActionId, Context, ContextId, ContextSpace};
pub use stats::{LinearActionStats, OlsFit, PairStats};
