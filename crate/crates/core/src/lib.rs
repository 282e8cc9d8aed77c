//! Maximum expected utility and marginal MAP for discrete probabilistic
//! programs, solved by compiling to semiring-weighted BDDs and searching the
//! decision space with bound-pruned branch-and-bound.

pub mod bbir;
pub mod bdd;
pub mod dappl;
pub mod error;
pub mod gen;
pub mod lexer;
pub mod oracle;
pub mod pineappl;
pub mod semiring;

pub use error::{Error, Result, Span};
