//! Local invariants of a closed 2-form at a transverse double point of two strata.

pub mod error;
pub mod germ;
pub mod hamiltonians;
pub mod ingest;
pub mod invariants;
pub mod linalg;
pub mod normal_forms;
pub mod random;
pub mod report;
pub mod selftest;

pub use error::{Error, ErrorClass, Result};
pub use germ::{Dims, GermPair, StratumKind};
pub use linalg::{Matrix, ToleranceConfig};
