//! Abelian extensions of Q with prescribed Galois group, parametrized by tuples
//! of signed squarefree integers, together with the weak approximation and
//! Hasse norm principle verdicts for their norm-one tori and the Euler-product
//! constants of the corresponding counting functions.

pub mod arith;
pub mod constants;
pub mod error;
pub mod group;
pub mod reduction;
pub mod splitting;
pub mod tuple;
pub mod verify;

pub use error::{Error, Result};
