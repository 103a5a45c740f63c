//! Twisted L-values `L(s, f x chi)` of level-one cusp forms by a sub-linear
//! orbit-sum method, with a direct oracle for cross-checking.

pub mod arith;
pub mod assembly;
pub mod cli;
pub mod counter;
pub mod dirichlet;
pub mod error;
pub mod forms;
pub mod hecke;
pub mod jet;
pub mod oracle;
pub mod orbit_sum;
pub mod quad;
pub mod sl2;
pub mod special;
pub mod sum;

pub use error::{Error, Result};
