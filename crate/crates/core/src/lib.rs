//! Finite-radius models of the space of left orders on a finitely
//! generated group.
//!
//! A left order is encoded by its positive cone. Restricting cones to the
//! balls `B_0 ⊆ B_1 ⊆ ...` of a norm filtration turns the order space into
//! the inverse limit of finite sets of admissible sign assignments, which
//! this crate enumerates as a prefix tree and analyses: the conjugation
//! action, restriction to subgroups, and a finite-horizon stand-in for the
//! Cantor–Bendixson derivative.

pub mod cantor;
pub mod cli;
pub mod cones;
pub mod dynamics;
pub mod groups;
pub mod orderspace;
pub mod properties;
pub mod subgroups;
mod unionfind;

/// Version tag written into every JSON document.
pub const SCHEMA_VERSION: u32 = 1;

pub use cones::{Ball, ChainCondition, PartialAssignment, PartialCone, Sign};
pub use groups::{parse_group_spec, Family, GroupCtx, GroupElement};
pub use orderspace::{PrefixTree, SearchConfig};
