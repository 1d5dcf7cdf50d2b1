//! Numerical laboratory for interior regularity of divergence-form elliptic
//! equations `-div(A grad u) = f + div F` on boxes in dimension 2 and 3.

pub mod caccioppoli;
pub mod calculus;
pub mod cli;
pub mod degiorgi;
pub mod ensemble;
pub mod error;
pub mod field;
pub mod grid;
pub mod liouville;
pub mod norms;
pub mod report;
pub mod schauder;
pub mod solver;

pub use error::{LabError, Result};
pub use field::{Field, MaskedField, VecField};
pub use grid::{BallRegion, Cutoff, Grid};
