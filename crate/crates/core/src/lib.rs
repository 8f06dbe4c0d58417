//! Multi-group agnostic learning over hierarchically structured groups.
//!
//! The crate provides ingestion of tabular data with categorical group
//! attributes, construction of the group hierarchy tree, base learners and
//! group ERM, the MGL-Tree / Prepend / decoupled learners, and an
//! experiment harness reporting per-group test error.

// `!(a < b)` is used on purpose where NaN must fail a check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod bounds;
pub mod data;
mod error;
pub mod eval;
pub mod groups;
pub mod learners;
pub mod par;
pub mod risk;

pub use error::{Error, Result};
