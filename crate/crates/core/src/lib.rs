//! History-dependent assortment planning under MNL choice.
//!
//! The crate covers the problem data and choice model ([`problem`]), the
//! per-product envelope algebra ([`envelope`]), formulation builders over a
//! small model representation ([`modelir`]), a dense LP solver ([`lp`]), a
//! branch-and-bound driver with lazy separation ([`bnb`]), exact and heuristic
//! policies ([`policies`]), cyclic policies ([`cyclic`]) and the cutting-plane
//! drivers ([`cutplane`]).

pub mod bnb;
pub mod cutplane;
pub mod cyclic;
pub mod envelope;
pub mod error;
pub mod lp;
pub mod metrics;
pub mod modelir;
pub mod policies;
pub mod problem;

pub use error::{Error, Result};
pub use problem::{ChoiceOutcome, ConstraintSpec, Instance, Plan, RhoBounds};
