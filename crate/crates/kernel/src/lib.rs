//! Trusted kernel: exact arithmetic, the network model, the constraint store,
//! certificate checkers and the proof-log checker.
//!
//! Nothing in this crate solves linear programs. Every check here is a direct
//! recomputation from the problem and the certificate data.

pub mod certs;
pub mod linear;
pub mod model;
pub mod prooflog;
pub mod rational;
pub mod store;

pub use linear::{Accumulator, SparseRow};
pub use rational::{q, Rational};
