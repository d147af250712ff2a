//! Monodromy data of semisimple Frobenius manifolds.
//!
//! The crate computes twisted periods of the second structure connection, twisted reflection
//! vectors, Stokes and central connection matrices, and the exact K-theory of `P^n` they are
//! compared against. It is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod frobenius;
pub mod ktheory;
pub mod numerics;
pub mod paths;
pub mod periods;
pub mod stokes;
