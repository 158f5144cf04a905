//! Integrable Lagrange billiards in the plane, on the sphere and in the
//! hyperbolic plane.
//!
//! A Lagrange problem (two Kepler centers plus a Hooke term at their
//! midpoint) on a curved surface projects centrally to a Lagrange problem in
//! the plane with an affine norm. Confocal conic walls project to confocal
//! conic walls, so each billiard carries the energy of its projected partner
//! as a second first integral. This crate simulates those billiards and
//! checks the correspondences numerically.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod conformal;
pub mod conics;
pub mod correspondence;
pub mod dynamics;
pub mod error;
pub mod potentials;
pub mod report;
pub mod scenario;
pub mod spaces;
pub mod verify;

pub use error::{Error, Result};
