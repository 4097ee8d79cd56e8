//! Gravity-aware grasp dataset generation for underactuated two-finger
//! grippers.
//!
//! The crate is `no_std` (with `alloc`): every stage is a pure function of its
//! inputs and seeds. File formats, the command line and parallel scheduling
//! live in the `gravgrasp` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod annotation;
pub mod closure;
pub mod eval;
pub mod geometry;
pub mod hand;
pub mod math;
pub mod sampling;
pub mod scene;
pub mod wrench;

pub use geometry::{GeometryError, Pose, TriangleMesh};
